"""Facial attribute schema, ±1 attribute vectors and threshold matching.

Two faces are compared by the number of attributes on which their vectors
disagree.  With entries in {-1, +1} that count is recovered from the inner
product as ``(N - a.b) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

DEFAULT_MATCHING_NAMES: tuple[str, ...] = (
    "Arched Eyebrows",
    "Bushy Eyebrows",
    "Big Lips",
    "Big Nose",
    "Pointy Nose",
    "Black Hair",
    "Blond Hair",
    "Brown Hair",
    "Gray Hair",
    "Eyeglasses",
    "Bald",
    "High Cheekbones",
    "Narrow Eyes",
    "Oval Face",
    "Male",
    "Young",
)
DEFAULT_AUXILIARY_NAMES: tuple[str, ...] = ("Smiling",)

DEFAULT_THRESHOLD = 1


class SchemaMismatchError(ValueError):
    """Raised when two vectors built over different schemas are compared."""


class AttributeParseError(ValueError):
    """Raised when an encoded attribute string cannot be decoded."""


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute names.

    Only ``matching_names`` take part in matching; auxiliary attributes
    (``Smiling`` by default) are predicted alongside but used elsewhere.
    Equality is by name lists, so a schema rebuilt from a file compares
    equal to the in-memory default.
    """

    matching_names: tuple[str, ...] = DEFAULT_MATCHING_NAMES
    auxiliary_names: tuple[str, ...] = DEFAULT_AUXILIARY_NAMES

    def __post_init__(self) -> None:
        object.__setattr__(self, "matching_names", tuple(self.matching_names))
        object.__setattr__(self, "auxiliary_names", tuple(self.auxiliary_names))
        if len(self.matching_names) < 1:
            raise ValueError("schema needs at least one matching attribute")
        names = self.matching_names + self.auxiliary_names
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique across the schema")

    @property
    def size(self) -> int:
        return len(self.matching_names)

    def index(self, name: str) -> int:
        return self.matching_names.index(name)

    @classmethod
    def generic(cls, n: int) -> "AttributeSchema":
        """Schema of ``n`` anonymous attributes, handy for small test vectors."""
        return cls(tuple(f"attr{i}" for i in range(n)), ())


DEFAULT_SCHEMA = AttributeSchema()


@dataclass(frozen=True)
class AttributeVector:
    schema: AttributeSchema
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        values = tuple(int(v) for v in self.values)
        if len(values) != self.schema.size:
            raise ValueError(
                f"vector has {len(values)} entries, schema expects {self.schema.size}"
            )
        if any(v not in (-1, 1) for v in values):
            raise ValueError("attribute entries must be -1 or +1")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def __neg__(self) -> "AttributeVector":
        return AttributeVector(self.schema, tuple(-v for v in self.values))

    @classmethod
    def from_present(
        cls, present: Iterable[str], schema: AttributeSchema = DEFAULT_SCHEMA
    ) -> "AttributeVector":
        """+1 for every named attribute in ``present``, -1 elsewhere."""
        present = set(present)
        unknown = present - set(schema.matching_names)
        if unknown:
            raise ValueError(f"unknown attributes: {sorted(unknown)}")
        return cls(schema, tuple(1 if n in present else -1 for n in schema.matching_names))

    def flipped(self, indices: Iterable[int]) -> "AttributeVector":
        values = list(self.values)
        for i in set(indices):
            values[i] = -values[i]
        return AttributeVector(self.schema, tuple(values))

    def present(self) -> list[str]:
        return [n for n, v in zip(self.schema.matching_names, self.values) if v == 1]

    def __str__(self) -> str:
        return encode(self)


def _check_schema(a: AttributeVector, b: AttributeVector) -> None:
    if a.schema != b.schema:
        raise SchemaMismatchError("attribute vectors use different schemas")


def inner_product(a: AttributeVector, b: AttributeVector) -> int:
    _check_schema(a, b)
    return sum(x * y for x, y in zip(a.values, b.values))


def attribute_diff(a: AttributeVector, b: AttributeVector) -> int:
    """Number of attributes on which ``a`` and ``b`` disagree."""
    n = a.schema.size
    # N and the inner product always share parity, so the division is exact.
    return (n - inner_product(a, b)) // 2


def matches(a: AttributeVector, b: AttributeVector, threshold: int = DEFAULT_THRESHOLD) -> bool:
    if threshold < 0 or threshold > a.schema.size:
        raise ValueError(f"threshold must lie in [0, {a.schema.size}], got {threshold}")
    return attribute_diff(a, b) <= threshold


def encode(a: AttributeVector) -> str:
    return "".join("+" if v == 1 else "-" for v in a.values)


def decode(s: str, schema: AttributeSchema = DEFAULT_SCHEMA) -> AttributeVector:
    if len(s) != schema.size:
        raise AttributeParseError(
            f"attribute string has length {len(s)}, schema expects {schema.size}"
        )
    values = []
    for pos, ch in enumerate(s):
        if ch == "+":
            values.append(1)
        elif ch == "-":
            values.append(-1)
        else:
            raise AttributeParseError(f"illegal character {ch!r} at position {pos}")
    return AttributeVector(schema, tuple(values))


def as_vector(value: "AttributeVector | str | Sequence[int]", schema: AttributeSchema = DEFAULT_SCHEMA) -> AttributeVector:
    """Coerce an encoded string or a ±1 sequence to a vector."""
    if isinstance(value, AttributeVector):
        return value
    if isinstance(value, str):
        return decode(value, schema)
    return AttributeVector(schema, tuple(value))
