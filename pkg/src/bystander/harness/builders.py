"""Synthetic populations and the standard one-target, two-stranger photo."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..attributes import DEFAULT_SCHEMA, AttributeSchema, AttributeVector, attribute_diff
from ..facegeom import EyePair
from ..protocol import Always, LatencySpec, Never, RequestPolicy
from .metrics import CONSISTENCY_DIFF_COUNTS, SweepTrial, sample_flip_count
from .scenario import (
    AgentSpec,
    FaceAnnotation,
    NetworkSpec,
    PhotoSpec,
    Scenario,
    Seeds,
)

# Most facial attributes are absent for most people, so random people agree on
# many of them; a 20% presence rate gives realistic chance collisions.
DEFAULT_PREVALENCE = 0.2


def random_profiles(
    count: int,
    rng: np.random.Generator,
    prevalence: float | Sequence[float] = 0.5,
    schema: AttributeSchema = DEFAULT_SCHEMA,
) -> list[AttributeVector]:
    p = np.broadcast_to(np.asarray(prevalence, dtype=np.float64), (schema.size,))
    draws = rng.random((count, schema.size)) < p
    return [AttributeVector(schema, tuple(np.where(row, 1, -1).tolist())) for row in draws]


def distinct_profiles(
    count: int,
    rng: np.random.Generator,
    min_diff: int,
    schema: AttributeSchema = DEFAULT_SCHEMA,
    max_tries: int = 10_000,
) -> list[AttributeVector]:
    """Uniform random profiles, pairwise at least ``min_diff`` attributes apart."""
    out: list[AttributeVector] = []
    for _ in range(max_tries):
        if len(out) == count:
            break
        cand = random_profiles(1, rng, 0.5, schema)[0]
        if all(attribute_diff(cand, o) >= min_diff for o in out):
            out.append(cand)
    if len(out) < count:
        raise RuntimeError(f"could not draw {count} profiles {min_diff} apart")
    return out


def noisy_copy(v: AttributeVector, flips: int, rng: np.random.Generator) -> AttributeVector:
    return v.flipped(rng.choice(v.schema.size, size=flips, replace=False).tolist())


def build_sweep_batch(
    n_persons: int = 50,
    seed: int = 0,
    prevalence: float | Sequence[float] = DEFAULT_PREVALENCE,
    diff_counts: Sequence[int] = CONSISTENCY_DIFF_COUNTS,
    schema: AttributeSchema = DEFAULT_SCHEMA,
) -> list[SweepTrial]:
    """``n_persons`` same-person pairs plus ``n_persons`` different-person pairs.

    Each person gets two "photos": the second differs from the first in a
    random number of attributes drawn from ``diff_counts``.  Different-person
    trials pair each person's first photo with another person's second photo.
    """
    if n_persons < 2:
        raise ValueError("need at least two persons")
    rng = np.random.default_rng(seed)
    people = random_profiles(n_persons, rng, prevalence, schema)
    second = [noisy_copy(p, sample_flip_count(rng, diff_counts), rng) for p in people]
    trials = [SweepTrial(p, q, True) for p, q in zip(people, second)]
    for i, p in enumerate(people):
        j = int(rng.integers(n_persons - 1))
        j = j if j < i else j + 1
        trials.append(SweepTrial(p, second[j], False))
    return trials


# Standard photo: a smiling target in the middle, two smaller strangers at the sides.
PHOTO_W, PHOTO_H = 640, 480
TARGET_EYES = EyePair((300.0, 200.0), (340.0, 200.0))
STRANGER_EYES = (
    EyePair((68.0, 220.0), (93.0, 220.0)),
    EyePair((548.0, 220.0), (573.0, 220.0)),
)


def three_person_scenario(
    target: AttributeVector,
    strangers: Sequence[tuple[AttributeVector, RequestPolicy]],
    nearby: Sequence[AttributeVector] = (),
    *,
    nearby_policy: RequestPolicy = Always(),
    flips: int = 0,
    seeds: Seeds = Seeds(),
    latency_ms: int = 10,
    window_ms: int = 500,
    threshold: int = 1,
    sessions: int = 1,
    name: str = "three",
) -> Scenario:
    """One target and up to two in-photo strangers, plus nearby strangers who are not pictured."""
    if len(strangers) > len(STRANGER_EYES):
        raise ValueError("at most two in-photo strangers")
    faces = [FaceAnnotation("target", target, TARGET_EYES, target=True, smiling=True, flips=flips)]
    agents = [AgentSpec("target", target, Never())]
    for k, (profile, policy) in enumerate(strangers):
        pid = f"stranger{k + 1}"
        faces.append(FaceAnnotation(pid, profile, STRANGER_EYES[k], flips=flips))
        agents.append(AgentSpec(pid, profile, policy))
    for k, profile in enumerate(nearby):
        agents.append(AgentSpec(f"nearby{k + 1}", profile, nearby_policy))
    return Scenario(
        faces=tuple(faces),
        agents=tuple(agents),
        photo=PhotoSpec(PHOTO_W, PHOTO_H, (90, 120, 150), "checker"),
        network=NetworkSpec(LatencySpec(latency_ms, latency_ms)),
        seeds=seeds,
        threshold=threshold,
        window_ms=window_ms,
        sessions=sessions,
        name=name,
    )
