"""Session-level protection and filtering rates, and the matching-threshold sweep."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ..attributes import AttributeVector, attribute_diff
from ..protocol import SessionReport
from .scenario import SessionTruth


class EmptyBatchError(ValueError):
    pass


def _pairs(reports: Sequence[SessionReport], truths: Sequence[SessionTruth]):
    if len(reports) != len(truths):
        raise ValueError(f"{len(reports)} reports but {len(truths)} ground-truth records")
    if not reports:
        raise EmptyBatchError("no sessions to evaluate")
    return list(zip(reports, truths))


def requesting_strangers_in_photo(report: SessionReport, truth: SessionTruth) -> set[str]:
    targets = set(truth.targets)
    return {p for p in set(report.requesters) & set(truth.in_photo) if p not in targets}


def is_protected(report: SessionReport, truth: SessionTruth) -> bool | None:
    """Every in-photo stranger who asked is blurred; None when nobody in the photo asked."""
    asking = requesting_strangers_in_photo(report, truth)
    if not asking:
        return None
    return asking <= report.blurred_faces


def has_false_blur(report: SessionReport, truth: SessionTruth) -> bool:
    """Some in-photo face that did not ask for it was blurred."""
    innocent = set(truth.in_photo) - set(report.requesters)
    return bool(innocent & report.blurred_faces)


def filter_correct(report: SessionReport, truth: SessionTruth) -> bool:
    """All true targets were recognised and no stranger was mistaken for one."""
    verdict = {v.face_id: v.is_target for v in report.verdicts}
    targets = set(truth.targets)
    return all(verdict.get(p, False) == (p in targets) for p in truth.in_photo)


def true_protection_rate(reports: Sequence[SessionReport], truths: Sequence[SessionTruth]) -> Fraction:
    """Share of sessions, among those where some in-photo stranger asked, that blurred every asker."""
    flags = [is_protected(r, t) for r, t in _pairs(reports, truths)]
    eligible = [f for f in flags if f is not None]
    if not eligible:
        raise EmptyBatchError("no session has a requesting stranger in the photo")
    return Fraction(sum(eligible), len(eligible))


def false_protection_rate(reports: Sequence[SessionReport], truths: Sequence[SessionTruth]) -> Fraction:
    pairs = _pairs(reports, truths)
    return Fraction(sum(has_false_blur(r, t) for r, t in pairs), len(pairs))


def false_filtering_rate(reports: Sequence[SessionReport], truths: Sequence[SessionTruth]) -> Fraction:
    pairs = _pairs(reports, truths)
    return Fraction(sum(not filter_correct(r, t) for r, t in pairs), len(pairs))


def summarize(reports: Sequence[SessionReport], truths: Sequence[SessionTruth]) -> dict[str, float | None]:
    def rate(fn):
        try:
            return float(fn(reports, truths))
        except EmptyBatchError:
            return None

    return {
        "sessions": len(reports),
        "true_protection_rate": rate(true_protection_rate),
        "false_protection_rate": rate(false_protection_rate),
        "false_filtering_rate": rate(false_filtering_rate),
    }


# -- threshold sweep -----------------------------------------------------------

# Number of differing predicted attributes between two photos of the same
# person, as counts over 20 observed pairs for 0, 1, ..., 6 differences.
CONSISTENCY_DIFF_COUNTS = (8, 4, 2, 2, 2, 1, 1)


@dataclass(frozen=True)
class SweepTrial:
    a: AttributeVector
    b: AttributeVector
    same_person: bool


@dataclass(frozen=True)
class SweepRow:
    threshold: int
    true_positives: int
    false_positives: int
    same_trials: int
    different_trials: int


def threshold_sweep(trials: Sequence[SweepTrial], thresholds: Iterable[int]) -> list[SweepRow]:
    """Count same-person pairs accepted (TP) and different-person pairs accepted (FP) per threshold."""
    if not trials:
        raise EmptyBatchError("empty sweep batch")
    diffs = [(attribute_diff(t.a, t.b), t.same_person) for t in trials]
    n_same = sum(same for _, same in diffs)
    rows = []
    for th in thresholds:
        if th < 0:
            raise ValueError("thresholds must be non-negative")
        tp = sum(1 for d, same in diffs if same and d <= th)
        fp = sum(1 for d, same in diffs if not same and d <= th)
        rows.append(SweepRow(th, tp, fp, n_same, len(diffs) - n_same))
    return rows


def sweep_table(rows: Sequence[SweepRow]) -> str:
    head = "threshold,true_positives,false_positives,same_trials,different_trials"
    lines = [head] + [
        f"{r.threshold},{r.true_positives},{r.false_positives},{r.same_trials},{r.different_trials}"
        for r in rows
    ]
    return "\n".join(lines) + "\n"


def sample_flip_count(rng: np.random.Generator, counts: Sequence[int] = CONSISTENCY_DIFF_COUNTS) -> int:
    p = np.asarray(counts, dtype=np.float64)
    return int(rng.choice(len(p), p=p / p.sum()))
