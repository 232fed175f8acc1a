"""JSON persistence for session reports.

A report file looks like::

    {
      "format": "bystander-report", "version": 1,
      "scenario": "demo",
      "metrics": {"sessions": 1, "true_protection_rate": 1.0, ...},
      "sessions": [
        {
          "session_id": "demo-0000",
          "image": "demo-0000.ppm",          # relative to the report file
          "truth": {"in_photo": [...], "targets": [...]},
          "trace": [[time_ms, event, src, dst, message], ...],
          "verdicts": [{"face": id, "smiling": b, "size": b, "central": b, "target": b}],
          "matches": [{"requester": id, "face": id, "diff": n, "matched": b}],
          "plan": [{"face": id, "requesters": [...]}],
          "requesters": [...], "collected": [...],
          "ignored": [{"requester": id, "time_ms": t, "reason": r}],
          "messages": {"NOTICE": {"sent": n, "delivered": n, "dropped": n, "pending": n}, ...},
          "outcome": {"protected": b | null, "false_blur": b, "filter_correct": b}
        }
      ]
    }

Keys are written in a fixed order so identical runs give identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

from ..protocol import (
    MESSAGE_KINDS,
    IgnoredRequest,
    MatchEntry,
    PlannedBlur,
    SessionReport,
    TraceEvent,
)
from ..target_filter import FilterVerdict
from .metrics import filter_correct, has_false_blur, is_protected, summarize
from .scenario import SessionTruth

REPORT_FORMAT = "bystander-report"
REPORT_VERSION = 1


class ReportError(ValueError):
    pass


def session_to_dict(report: SessionReport, truth: SessionTruth) -> dict[str, Any]:
    return {
        "session_id": report.session_id,
        "image": report.image_path,
        "truth": {"in_photo": list(truth.in_photo), "targets": list(truth.targets)},
        "trace": [[e.time_ms, e.event, e.src, e.dst, e.message] for e in report.trace],
        "verdicts": [
            {
                "face": v.face_id,
                "smiling": v.rule_smiling,
                "size": v.rule_size,
                "central": v.rule_central,
                "target": v.is_target,
            }
            for v in report.verdicts
        ],
        "matches": [
            {"requester": m.requester_id, "face": m.face_id, "diff": m.diff, "matched": m.matched}
            for m in report.match_table
        ],
        "plan": [{"face": p.face_id, "requesters": list(p.requester_ids)} for p in report.plan],
        "requesters": list(report.requesters),
        "collected": list(report.collected),
        "ignored": [{"requester": i.requester_id, "time_ms": i.time_ms, "reason": i.reason} for i in report.ignored],
        "messages": {k: dict(report.message_counts[k]) for k in MESSAGE_KINDS},
        "outcome": {
            "protected": is_protected(report, truth),
            "false_blur": has_false_blur(report, truth),
            "filter_correct": filter_correct(report, truth),
        },
    }


def session_from_dict(d: dict[str, Any]) -> tuple[SessionReport, SessionTruth]:
    try:
        verdicts = []
        for v in d["verdicts"]:
            fv = FilterVerdict(v["face"], v["smiling"], v["size"], v["central"])
            if fv.is_target != v["target"]:
                raise ReportError(f"{d['session_id']}: verdict for {v['face']!r} contradicts its rules")
            verdicts.append(fv)
        report = SessionReport(
            session_id=d["session_id"],
            trace=[TraceEvent(*e) for e in d["trace"]],
            verdicts=verdicts,
            match_table=[MatchEntry(m["requester"], m["face"], m["diff"], m["matched"]) for m in d["matches"]],
            plan=[PlannedBlur(p["face"], tuple(p["requesters"])) for p in d["plan"]],
            requesters=list(d["requesters"]),
            collected=list(d["collected"]),
            ignored=[IgnoredRequest(i["requester"], i["time_ms"], i["reason"]) for i in d["ignored"]],
            message_counts={k: dict(v) for k, v in d["messages"].items()},
            image_path=d.get("image"),
        )
        truth = SessionTruth(tuple(d["truth"]["in_photo"]), tuple(d["truth"]["targets"]))
    except (KeyError, TypeError) as exc:
        raise ReportError(f"malformed session record: {exc!r}") from None
    check_session(report)
    return report, truth


def check_session(report: SessionReport) -> None:
    """Protocol invariants every stored session must satisfy."""
    sid = report.session_id
    targets = {v.face_id for v in report.verdicts if v.is_target}
    matched = {(m.requester_id, m.face_id) for m in report.match_table if m.matched}
    planned = [p.face_id for p in report.plan]
    if len(planned) != len(set(planned)):
        raise ReportError(f"{sid}: a face is planned more than once")
    for p in report.plan:
        if p.face_id in targets:
            raise ReportError(f"{sid}: target face {p.face_id!r} is in the blur plan")
        if not p.requester_ids:
            raise ReportError(f"{sid}: face {p.face_id!r} planned without a request")
        for r in p.requester_ids:
            if (r, p.face_id) not in matched:
                raise ReportError(f"{sid}: face {p.face_id!r} planned for unmatched requester {r!r}")
            if r not in report.collected:
                raise ReportError(f"{sid}: plan cites uncollected request from {r!r}")
    for m in report.match_table:
        if m.matched and m.face_id in targets:
            raise ReportError(f"{sid}: target face {m.face_id!r} marked as matched")
    for kind, c in report.message_counts.items():
        if c["sent"] != c["delivered"] + c["dropped"] + c["pending"]:
            raise ReportError(f"{sid}: {kind} message counts do not add up")


def report_to_dict(name: str, sessions: Sequence[tuple[SessionReport, SessionTruth]]) -> dict[str, Any]:
    reports = [r for r, _ in sessions]
    truths = [t for _, t in sessions]
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "scenario": name,
        "metrics": summarize(reports, truths) if sessions else {"sessions": 0},
        "sessions": [session_to_dict(r, t) for r, t in sessions],
    }


def dumps_report(name: str, sessions: Sequence[tuple[SessionReport, SessionTruth]]) -> str:
    return json.dumps(report_to_dict(name, sessions), indent=2) + "\n"


def write_report(path, name: str, sessions: Sequence[tuple[SessionReport, SessionTruth]]) -> None:
    Path(path).write_text(dumps_report(name, sessions))


def load_report(path) -> tuple[str, list[tuple[SessionReport, SessionTruth]]]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path}: not JSON ({exc})") from None
    if doc.get("format") != REPORT_FORMAT or doc.get("version") != REPORT_VERSION:
        raise ReportError(f"{path}: not a {REPORT_FORMAT} v{REPORT_VERSION} file")
    return doc["scenario"], [session_from_dict(d) for d in doc["sessions"]]
