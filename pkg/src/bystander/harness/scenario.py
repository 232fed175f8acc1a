"""Scenario files: a scripted photo, its annotated faces and the nearby strangers.

Scenario files are YAML (JSON works too)::

    name: demo
    sessions: 1            # independent repetitions with derived seeds
    threshold: 1
    window_ms: 500
    photo: {width: 640, height: 480, fill: [90, 120, 150], pattern: checker}
    network: {latency_ms: [5, 20], drop_probability: 0.0}
    seeds: {network: 1, policies: 2, noise: 3}
    faces:
      - person: alice
        eyes: [[300, 200], [340, 200]]
        target: true
        smiling: true
        attributes: "----+--+------+-"
        flips: 0           # attributes flipped at random in the prediction
      - person: carol      # a nearby person who is not in the photo
        in_photo: false
        attributes: "+---------------"
    agents:
      - person: bob
        policy: always     # always | never | p=0.3
        profile: "..."     # defaults to the person's annotated attributes

``photo`` may instead be ``{path: image.ppm}``, resolved relative to the
scenario file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..attributes import (
    DEFAULT_SCHEMA,
    DEFAULT_THRESHOLD,
    AttributeParseError,
    AttributeSchema,
    AttributeVector,
    decode,
    encode,
)
from ..facegeom import EyePair, Image, read_ppm
from ..protocol import (
    DEFAULT_WINDOW_MS,
    Always,
    LatencySpec,
    RequestPolicy,
    SessionSetup,
    SimNet,
    StrangerAgent,
    parse_policy,
)
from ..target_filter import DetectedFace

# stream tags keep per-purpose random streams apart even when all seeds are equal
_NET_STREAM, _POLICY_STREAM, _NOISE_STREAM = 11, 22, 33


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending field."""


@dataclass(frozen=True)
class PhotoSpec:
    width: int = 640
    height: int = 480
    fill: tuple[int, int, int] = (128, 128, 128)
    pattern: str = "none"  # none | checker | noise
    path: str | None = None

    def render(self, base_dir: Path | None = None, seed: int = 0) -> Image:
        if self.path is not None:
            p = Path(self.path)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            return read_ppm(p)
        img = np.empty((self.height, self.width, 3), dtype=np.uint8)
        img[:] = self.fill
        if self.pattern == "checker":
            yy, xx = np.mgrid[0:self.height, 0:self.width]
            mask = ((xx // 8) + (yy // 8)) % 2 == 1
            img[mask] = 255 - np.asarray(self.fill, dtype=np.uint8)
        elif self.pattern == "noise":
            rng = np.random.default_rng(seed)
            img = rng.integers(0, 256, size=img.shape, dtype=np.uint8)
        return Image(img)


@dataclass(frozen=True)
class FaceAnnotation:
    person: str
    attributes: AttributeVector
    eyes: EyePair | None = None
    in_photo: bool = True
    target: bool = False
    smiling: bool = False
    flips: int = 0


@dataclass(frozen=True)
class AgentSpec:
    person: str
    profile: AttributeVector
    policy: RequestPolicy = field(default_factory=Always)


@dataclass(frozen=True)
class NetworkSpec:
    latency: LatencySpec = LatencySpec(10, 10)
    drop_probability: float = 0.0


@dataclass(frozen=True)
class Seeds:
    network: int = 0
    policies: int = 0
    noise: int = 0

    @classmethod
    def single(cls, seed: int) -> "Seeds":
        return cls(seed, seed, seed)


@dataclass(frozen=True)
class Scenario:
    faces: tuple[FaceAnnotation, ...]
    agents: tuple[AgentSpec, ...]
    photo: PhotoSpec = PhotoSpec()
    network: NetworkSpec = NetworkSpec()
    seeds: Seeds = Seeds()
    threshold: int = DEFAULT_THRESHOLD
    window_ms: int = DEFAULT_WINDOW_MS
    sessions: int = 1
    sigma: float | None = None
    name: str = "scenario"
    schema: AttributeSchema = DEFAULT_SCHEMA
    base_dir: Path | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "faces", tuple(self.faces))
        object.__setattr__(self, "agents", tuple(self.agents))
        validate(self)

    def with_seeds(self, seeds: Seeds) -> "Scenario":
        return replace(self, seeds=seeds)

    @property
    def in_photo(self) -> list[FaceAnnotation]:
        return [f for f in self.faces if f.in_photo]


@dataclass(frozen=True)
class SessionTruth:
    """Ground truth the metrics compare a session report against."""

    in_photo: tuple[str, ...]
    targets: tuple[str, ...]


def validate(s: Scenario) -> None:
    n = s.schema.size
    persons = [f.person for f in s.faces]
    seen = set()
    for i, p in enumerate(persons):
        if p in seen:
            raise ScenarioError(f"faces[{i}].person: duplicate person id {p!r}")
        seen.add(p)
    agent_ids = [a.person for a in s.agents]
    for i, p in enumerate(agent_ids):
        if agent_ids.index(p) != i:
            raise ScenarioError(f"agents[{i}].person: duplicate person id {p!r}")
    for i, f in enumerate(s.faces):
        if f.attributes.schema != s.schema:
            raise ScenarioError(f"faces[{i}].attributes: schema mismatch")
        if not 0 <= f.flips <= n:
            raise ScenarioError(f"faces[{i}].flips: {f.flips} outside [0, {n}]")
        if f.in_photo:
            if f.eyes is None:
                raise ScenarioError(f"faces[{i}].eyes: required for a person in the photo")
            if s.photo.path is None:
                for eye in (f.eyes.left, f.eyes.right):
                    if not (0 <= eye[0] < s.photo.width and 0 <= eye[1] < s.photo.height):
                        raise ScenarioError(f"faces[{i}].eyes: {eye} outside the {s.photo.width}x{s.photo.height} photo")
        elif f.target:
            raise ScenarioError(f"faces[{i}].target: a target must be in the photo")
    for i, a in enumerate(s.agents):
        if a.profile.schema != s.schema:
            raise ScenarioError(f"agents[{i}].profile: schema mismatch")
    if not 0 <= s.threshold <= n:
        raise ScenarioError(f"threshold: {s.threshold} outside [0, {n}]")
    if s.window_ms < 0:
        raise ScenarioError("window_ms: must be non-negative")
    if s.sessions < 1:
        raise ScenarioError("sessions: must be at least 1")
    if not 0.0 <= s.network.drop_probability <= 1.0:
        raise ScenarioError("network.drop_probability: must lie in [0, 1]")
    if s.sigma is not None and not s.sigma > 0:
        raise ScenarioError("sigma: must be positive")
    if s.photo.pattern not in ("none", "checker", "noise"):
        raise ScenarioError(f"photo.pattern: unknown pattern {s.photo.pattern!r}")
    if s.photo.path is None and (s.photo.width < 1 or s.photo.height < 1):
        raise ScenarioError("photo: width and height must be positive")


# -- realisation -------------------------------------------------------------


def session_id(scenario: Scenario, index: int) -> str:
    return f"{scenario.name}-{index:04d}"


def realize(scenario: Scenario, index: int = 0) -> tuple[SessionSetup, SimNet, SessionTruth]:
    """Build the concrete session ``index``: noisy predictions, seeded agents and network."""
    seeds = scenario.seeds
    photo = scenario.photo.render(scenario.base_dir, seed=seeds.noise)
    n = scenario.schema.size
    faces = []
    for j, ann in enumerate(scenario.faces):
        if not ann.in_photo:
            continue
        predicted = ann.attributes
        if ann.flips:
            rng = np.random.default_rng([seeds.noise, _NOISE_STREAM, index, j])
            predicted = predicted.flipped(rng.choice(n, size=ann.flips, replace=False).tolist())
        faces.append(DetectedFace.from_eyes(ann.person, ann.eyes, predicted, ann.smiling))
    agents = [
        StrangerAgent(
            a.person,
            a.profile,
            a.policy,
            np.random.default_rng([seeds.policies, _POLICY_STREAM, index, k]),
        )
        for k, a in enumerate(scenario.agents)
    ]
    net = SimNet(
        scenario.network.latency,
        scenario.network.drop_probability,
        seed=np.random.SeedSequence([seeds.network, _NET_STREAM, index]),
    )
    setup = SessionSetup(
        session_id(scenario, index),
        photo,
        faces,
        agents,
        window_ms=scenario.window_ms,
        threshold=scenario.threshold,
        sigma=scenario.sigma,
    )
    truth = SessionTruth(
        in_photo=tuple(f.person for f in scenario.faces if f.in_photo),
        targets=tuple(f.person for f in scenario.faces if f.target),
    )
    return setup, net, truth


# -- loading -----------------------------------------------------------------


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ScenarioError(f"{where}.{key}: missing required field")
    return d[key]


def _as_int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{where}: expected an integer, got {v!r}")
    return v


def _as_point(v, where: str) -> tuple[float, float]:
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
        raise ScenarioError(f"{where}: expected [x, y], got {v!r}")
    return float(v[0]), float(v[1])


def _as_vector(v, schema: AttributeSchema, where: str) -> AttributeVector:
    try:
        if isinstance(v, str):
            return decode(v, schema)
        if isinstance(v, list):
            return AttributeVector(schema, tuple(v))
    except (AttributeParseError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    raise ScenarioError(f"{where}: expected an attribute string such as '+-+-...', got {v!r}")


def _known_keys(d: dict, allowed: set[str], where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(extra)}")


def scenario_from_dict(doc: dict[str, Any], base_dir: Path | None = None) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: top level must be a mapping")
    _known_keys(doc, {"name", "sessions", "threshold", "window_ms", "sigma", "photo",
                      "network", "seeds", "faces", "agents", "schema"}, "scenario")

    schema = DEFAULT_SCHEMA
    if "schema" in doc:
        sd = doc["schema"]
        try:
            schema = AttributeSchema(tuple(sd["matching"]), tuple(sd.get("auxiliary", ())))
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"schema: {exc}") from None

    pd = doc.get("photo", {}) or {}
    _known_keys(pd, {"width", "height", "fill", "pattern", "path"}, "photo")
    fill = pd.get("fill", [128, 128, 128])
    if not (isinstance(fill, list) and len(fill) == 3 and all(isinstance(c, int) and 0 <= c <= 255 for c in fill)):
        raise ScenarioError(f"photo.fill: expected [r, g, b] in 0..255, got {fill!r}")
    photo = PhotoSpec(
        width=_as_int(pd.get("width", 640), "photo.width"),
        height=_as_int(pd.get("height", 480), "photo.height"),
        fill=tuple(fill),
        pattern=str(pd.get("pattern", "none")),
        path=pd.get("path"),
    )

    nd = doc.get("network", {}) or {}
    _known_keys(nd, {"latency_ms", "drop_probability"}, "network")
    lat = nd.get("latency_ms", 10)
    try:
        if isinstance(lat, list) and len(lat) == 2:
            latency = LatencySpec(_as_int(lat[0], "network.latency_ms[0]"), _as_int(lat[1], "network.latency_ms[1]"))
        else:
            latency = LatencySpec(_as_int(lat, "network.latency_ms"), lat)
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"network.latency_ms: {exc}") from None
    network = NetworkSpec(latency, float(nd.get("drop_probability", 0.0)))

    sd = doc.get("seeds", {}) or {}
    if isinstance(sd, int):
        seeds = Seeds.single(sd)
    else:
        _known_keys(sd, {"network", "policies", "noise"}, "seeds")
        seeds = Seeds(*(_as_int(sd.get(k, 0), f"seeds.{k}") for k in ("network", "policies", "noise")))

    faces = []
    by_person = {}
    for i, fd in enumerate(doc.get("faces", []) or []):
        where = f"faces[{i}]"
        if not isinstance(fd, dict):
            raise ScenarioError(f"{where}: expected a mapping")
        _known_keys(fd, {"person", "eyes", "in_photo", "target", "smiling", "attributes", "flips"}, where)
        in_photo = bool(fd.get("in_photo", True))
        eyes = None
        if in_photo or "eyes" in fd:
            ev = _require(fd, "eyes", where)
            if not (isinstance(ev, list) and len(ev) == 2):
                raise ScenarioError(f"{where}.eyes: expected [[x1, y1], [x2, y2]]")
            try:
                eyes = EyePair(_as_point(ev[0], f"{where}.eyes[0]"), _as_point(ev[1], f"{where}.eyes[1]"))
            except ValueError as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise ScenarioError(f"{where}.eyes: {exc}") from None
        ann = FaceAnnotation(
            person=str(_require(fd, "person", where)),
            attributes=_as_vector(_require(fd, "attributes", where), schema, f"{where}.attributes"),
            eyes=eyes,
            in_photo=in_photo,
            target=bool(fd.get("target", False)),
            smiling=bool(fd.get("smiling", False)),
            flips=_as_int(fd.get("flips", 0), f"{where}.flips"),
        )
        faces.append(ann)
        by_person.setdefault(ann.person, ann)

    agents = []
    for i, ad in enumerate(doc.get("agents", []) or []):
        where = f"agents[{i}]"
        if not isinstance(ad, dict):
            raise ScenarioError(f"{where}: expected a mapping")
        _known_keys(ad, {"person", "profile", "policy"}, where)
        person = str(_require(ad, "person", where))
        if "profile" in ad:
            profile = _as_vector(ad["profile"], schema, f"{where}.profile")
        elif person in by_person:
            profile = by_person[person].attributes
        else:
            raise ScenarioError(f"{where}.profile: required when the person has no face annotation")
        try:
            policy = parse_policy(ad.get("policy", "always"))
        except ValueError as exc:
            raise ScenarioError(f"{where}.policy: {exc}") from None
        agents.append(AgentSpec(person, profile, policy))

    sigma = doc.get("sigma")
    try:
        return Scenario(
            faces=tuple(faces),
            agents=tuple(agents),
            photo=photo,
            network=network,
            seeds=seeds,
            threshold=_as_int(doc.get("threshold", DEFAULT_THRESHOLD), "threshold"),
            window_ms=_as_int(doc.get("window_ms", DEFAULT_WINDOW_MS), "window_ms"),
            sessions=_as_int(doc.get("sessions", 1), "sessions"),
            sigma=None if sigma is None else float(sigma),
            name=str(doc.get("name", "scenario")),
            schema=schema,
            base_dir=base_dir,
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(f"scenario: {exc}") from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"{path}:{where} cannot parse scenario: {getattr(exc, 'problem', exc)}") from None
    if doc is None:
        raise ScenarioError(f"{path}: empty scenario file")
    try:
        return scenario_from_dict(doc, base_dir=path.parent)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    """Inverse of :func:`scenario_from_dict` (photo paths are kept as written)."""
    photo: dict[str, Any]
    if s.photo.path is not None:
        photo = {"path": s.photo.path}
    else:
        photo = {"width": s.photo.width, "height": s.photo.height, "fill": list(s.photo.fill), "pattern": s.photo.pattern}
    faces = []
    for f in s.faces:
        d: dict[str, Any] = {"person": f.person, "attributes": encode(f.attributes)}
        if f.eyes is not None:
            d["eyes"] = [list(f.eyes.left), list(f.eyes.right)]
        if not f.in_photo:
            d["in_photo"] = False
        d.update(target=f.target, smiling=f.smiling, flips=f.flips)
        faces.append(d)
    doc: dict[str, Any] = {
        "name": s.name,
        "sessions": s.sessions,
        "threshold": s.threshold,
        "window_ms": s.window_ms,
        "photo": photo,
        "network": {
            "latency_ms": [s.network.latency.min_ms, s.network.latency.max_ms],
            "drop_probability": s.network.drop_probability,
        },
        "seeds": {"network": s.seeds.network, "policies": s.seeds.policies, "noise": s.seeds.noise},
        "faces": faces,
        "agents": [{"person": a.person, "profile": encode(a.profile), "policy": str(a.policy)} for a in s.agents],
    }
    if s.sigma is not None:
        doc["sigma"] = s.sigma
    if s.schema != DEFAULT_SCHEMA:
        doc["schema"] = {"matching": list(s.schema.matching_names), "auxiliary": list(s.schema.auxiliary_names)}
    return doc
