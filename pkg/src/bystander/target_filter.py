"""Decide which detected faces are the photographer's intended subjects.

A face counts as a target when at least two of three cues hold: the person
is smiling, the face is no more than 10% smaller than the largest face, and
the face sits in the middle horizontal third of the photo.  Targets are
never blurred.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

from .attributes import AttributeVector
from .facegeom import EyePair, FaceRegion, blur_square_from_eyes, in_central_region

SIZE_TOLERANCE = 0.10
RULES_REQUIRED = 2


@dataclass(frozen=True)
class DetectedFace:
    id: Hashable
    region: FaceRegion
    eyes: EyePair
    predicted: AttributeVector
    smiling: bool = False

    def __post_init__(self) -> None:
        expected = blur_square_from_eyes(self.eyes)
        if (
            abs(expected.side - self.region.side) > 1e-6
            or abs(expected.center[0] - self.region.center[0]) > 1e-6
            or abs(expected.center[1] - self.region.center[1]) > 1e-6
        ):
            raise ValueError(f"face {self.id!r}: region does not match its eye geometry")

    @classmethod
    def from_eyes(cls, id: Hashable, eyes: EyePair, predicted: AttributeVector, smiling: bool = False) -> "DetectedFace":
        return cls(id, blur_square_from_eyes(eyes), eyes, predicted, smiling)

    @property
    def side(self) -> float:
        return self.region.side


@dataclass(frozen=True)
class FilterVerdict:
    face_id: Hashable
    rule_smiling: bool
    rule_size: bool
    rule_central: bool

    @property
    def rules_met(self) -> int:
        return int(self.rule_smiling) + int(self.rule_size) + int(self.rule_central)

    @property
    def is_target(self) -> bool:
        return self.rules_met >= RULES_REQUIRED


def rule_smiling(face: DetectedFace) -> bool:
    return bool(face.smiling)


def rule_size(face: DetectedFace, largest_side: float) -> bool:
    """Relative shortfall of the face's side against the largest side is at most 10%."""
    if largest_side <= 0:
        raise ValueError("largest_side must be positive")
    return (largest_side - face.side) / largest_side <= SIZE_TOLERANCE


def rule_central(face: DetectedFace, image_width: int) -> bool:
    return in_central_region(image_width, face.eyes.midpoint[0])


def filter_targets(faces: Sequence[DetectedFace], image_width: int) -> list[FilterVerdict]:
    if not faces:
        return []
    largest = max(f.side for f in faces)
    return [
        FilterVerdict(
            face_id=f.id,
            rule_smiling=rule_smiling(f),
            rule_size=rule_size(f, largest),
            rule_central=rule_central(f, image_width),
        )
        for f in faces
    ]
