"""Photographer/stranger blur-request protocol over a simulated network.

When a photo is taken, the photographer broadcasts a capture notice.  Each
nearby stranger may answer with a blur request carrying their precomputed
attribute vector.  Requests are collected for a fixed window of simulated
time, then every non-target face whose predicted attributes lie within the
matching threshold of some request is blurred.

Everything runs on a single-threaded event loop driven by simulated
milliseconds; randomness comes only from explicitly seeded generators.
"""

from __future__ import annotations

import enum
import heapq
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .attributes import (
    DEFAULT_SCHEMA,
    DEFAULT_THRESHOLD,
    AttributeSchema,
    AttributeVector,
    attribute_diff,
    decode,
    encode,
)
from .facegeom import FaceRegion, Image, blur_region
from .target_filter import DetectedFace, FilterVerdict, filter_targets

log = logging.getLogger(__name__)

DEFAULT_WINDOW_MS = 500


class ProtocolError(RuntimeError):
    pass


class MessageFormatError(ValueError):
    pass


def _check_token(value: str, what: str) -> str:
    value = str(value)
    if not value or any(c.isspace() for c in value):
        raise MessageFormatError(f"{what} must be a non-empty token without whitespace: {value!r}")
    return value


@dataclass(frozen=True)
class CaptureNotice:
    session_id: str
    photographer_id: str
    kind = "NOTICE"

    def encode(self) -> str:
        return f"NOTICE {self.session_id} {self.photographer_id}"


@dataclass(frozen=True)
class BlurRequest:
    session_id: str
    requester_id: str
    attributes: AttributeVector
    kind = "REQ"

    def encode(self) -> str:
        return f"REQ {self.session_id} {self.requester_id} {encode(self.attributes)}"


@dataclass(frozen=True)
class SessionClosed:
    session_id: str
    kind = "CLOSE"

    def encode(self) -> str:
        return f"CLOSE {self.session_id}"


ProtoMessage = CaptureNotice | BlurRequest | SessionClosed
MESSAGE_KINDS = ("NOTICE", "REQ", "CLOSE")


def decode_message(line: str, schema: AttributeSchema = DEFAULT_SCHEMA) -> ProtoMessage:
    parts = line.split()
    if not parts:
        raise MessageFormatError("empty message")
    head, args = parts[0], parts[1:]
    if head == "NOTICE" and len(args) == 2:
        return CaptureNotice(args[0], args[1])
    if head == "REQ" and len(args) == 3:
        return BlurRequest(args[0], args[1], decode(args[2], schema))
    if head == "CLOSE" and len(args) == 1:
        return SessionClosed(args[0])
    raise MessageFormatError(f"malformed message: {line!r}")


# -- simulated transport ----------------------------------------------------


@dataclass(frozen=True)
class LatencySpec:
    """One-way delay in whole milliseconds, uniform over ``[min_ms, max_ms]``."""

    min_ms: int = 10
    max_ms: int = 10

    def __post_init__(self) -> None:
        if self.min_ms < 0 or self.max_ms < self.min_ms:
            raise ValueError(f"invalid latency range [{self.min_ms}, {self.max_ms}]")

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.min_ms, self.max_ms + 1))


@dataclass(frozen=True)
class TraceEvent:
    time_ms: int
    event: str  # send | deliver | drop | late | timer
    src: str
    dst: str
    message: str


Handler = Callable[[ProtoMessage, str, int], None]

_DELIVERY, _TIMER = 0, 1


class SimNet:
    """Discrete-event message network.

    Events fire in order of simulated time.  At equal times message
    deliveries run before timers; within each class, insertion order wins.
    """

    def __init__(self, latency: LatencySpec = LatencySpec(), drop_probability: float = 0.0, seed: int = 0):
        if not 0.0 <= drop_probability <= 1.0:
            raise ValueError("drop_probability must lie in [0, 1]")
        self.latency = latency
        self.drop_probability = drop_probability
        self.rng = np.random.default_rng(seed)
        self.now = 0
        self.trace: list[TraceEvent] = []
        self.sent: Counter[str] = Counter()
        self.delivered: Counter[str] = Counter()
        self.dropped: Counter[str] = Counter()
        self._queue: list = []
        self._seq = 0
        self._nodes: dict[str, Handler] = {}

    def register(self, node_id: str, handler: Handler) -> None:
        if node_id in self._nodes:
            raise ProtocolError(f"node {node_id!r} already registered")
        self._nodes[node_id] = handler

    @property
    def node_ids(self) -> list[str]:
        return list(self._nodes)

    def _push(self, time_ms: int, priority: int, item) -> None:
        heapq.heappush(self._queue, (time_ms, priority, self._seq, item))
        self._seq += 1

    def send(self, src: str, dst: str, msg: ProtoMessage) -> None:
        if dst not in self._nodes:
            raise ProtocolError(f"unknown destination {dst!r}")
        self.sent[msg.kind] += 1
        # both draws happen for every message so the streams stay aligned
        lost = self.rng.random() < self.drop_probability
        delay = self.latency.sample(self.rng)
        line = msg.encode()
        self.trace.append(TraceEvent(self.now, "send", src, dst, line))
        if lost:
            self.dropped[msg.kind] += 1
            self.trace.append(TraceEvent(self.now, "drop", src, dst, line))
            return
        self._push(self.now + delay, _DELIVERY, (src, dst, msg))

    def schedule(self, delay_ms: int, callback: Callable[[], None], label: str = "timer") -> None:
        self._push(self.now + int(delay_ms), _TIMER, (label, callback))

    def note(self, event: str, src: str, dst: str, message: str) -> None:
        self.trace.append(TraceEvent(self.now, event, src, dst, message))

    def pending(self) -> Counter[str]:
        out: Counter[str] = Counter()
        for _, priority, _, item in self._queue:
            if priority == _DELIVERY:
                out[item[2].kind] += 1
        return out

    def run(self, until: int | None = None) -> None:
        while self._queue:
            if until is not None and self._queue[0][0] > until:
                break
            time_ms, priority, _, item = heapq.heappop(self._queue)
            self.now = time_ms
            if priority == _DELIVERY:
                src, dst, msg = item
                self.delivered[msg.kind] += 1
                self.trace.append(TraceEvent(time_ms, "deliver", src, dst, msg.encode()))
                self._nodes[dst](msg, src, time_ms)
            else:
                label, callback = item
                self.trace.append(TraceEvent(time_ms, "timer", "", "", label))
                callback()
        if until is not None:
            self.now = max(self.now, until)

    def message_counts(self) -> dict[str, dict[str, int]]:
        pending = self.pending()
        return {
            kind: {
                "sent": self.sent[kind],
                "delivered": self.delivered[kind],
                "dropped": self.dropped[kind],
                "pending": pending[kind],
            }
            for kind in MESSAGE_KINDS
        }


# -- strangers ---------------------------------------------------------------


@dataclass(frozen=True)
class Always:
    def decide(self, rng: np.random.Generator) -> bool:
        return True

    def __str__(self) -> str:
        return "always"


@dataclass(frozen=True)
class Never:
    def decide(self, rng: np.random.Generator) -> bool:
        return False

    def __str__(self) -> str:
        return "never"


@dataclass(frozen=True)
class WithProbability:
    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"request probability must lie in [0, 1], got {self.p}")

    def decide(self, rng: np.random.Generator) -> bool:
        return bool(rng.random() < self.p)

    def __str__(self) -> str:
        return f"p={self.p!r}"


RequestPolicy = Always | Never | WithProbability


def parse_policy(value) -> RequestPolicy:
    """``"always"``, ``"never"``, a probability, or ``"p=0.3"``."""
    if isinstance(value, (Always, Never, WithProbability)):
        return value
    if isinstance(value, bool):
        return Always() if value else Never()
    if isinstance(value, (int, float)):
        return WithProbability(float(value))
    text = str(value).strip().lower()
    if text == "always":
        return Always()
    if text == "never":
        return Never()
    if text.startswith("p="):
        text = text[2:]
    try:
        return WithProbability(float(text))
    except ValueError:
        raise ValueError(f"unknown request policy {value!r}") from None


@dataclass
class StrangerAgent:
    agent_id: str
    profile: AttributeVector
    policy: RequestPolicy = field(default_factory=Always)
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0), repr=False)

    def __post_init__(self) -> None:
        _check_token(self.agent_id, "agent id")

    def on_notice(self, notice: CaptureNotice) -> BlurRequest | None:
        if self.policy.decide(self.rng):
            return BlurRequest(notice.session_id, self.agent_id, self.profile)
        return None

    def attach(self, net: SimNet) -> None:
        def handle(msg: ProtoMessage, src: str, time_ms: int) -> None:
            if isinstance(msg, CaptureNotice):
                request = self.on_notice(msg)
                if request is not None:
                    net.send(self.agent_id, src, request)

        net.register(self.agent_id, handle)


# -- photographer --------------------------------------------------------------


class SessionState(enum.Enum):
    FRESH = "fresh"
    COLLECTING = "collecting"
    MATCHING = "matching"
    DONE = "done"


@dataclass(frozen=True)
class MatchEntry:
    requester_id: str
    face_id: Hashable
    diff: int
    matched: bool


@dataclass(frozen=True)
class PlannedBlur:
    face_id: Hashable
    requester_ids: tuple[str, ...]


@dataclass(frozen=True)
class IgnoredRequest:
    requester_id: str
    time_ms: int
    reason: str


@dataclass
class PhotographerSession:
    session_id: str
    photo: Image
    faces: list[DetectedFace]
    window_ms: int = DEFAULT_WINDOW_MS
    threshold: int = DEFAULT_THRESHOLD
    state: SessionState = SessionState.FRESH
    opened_ms: int = 0
    requests: dict[str, BlurRequest] = field(default_factory=dict)
    request_times: dict[str, int] = field(default_factory=dict)
    ignored: list[IgnoredRequest] = field(default_factory=list)
    verdicts: list[FilterVerdict] = field(default_factory=list)
    match_table: list[MatchEntry] = field(default_factory=list)
    plan: list[PlannedBlur] = field(default_factory=list)

    def __post_init__(self) -> None:
        _check_token(self.session_id, "session id")
        if self.window_ms < 0:
            raise ValueError("window_ms must be non-negative")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        ids = [f.id for f in self.faces]
        if len(set(ids)) != len(ids):
            raise ValueError("face ids must be unique within a session")

    @property
    def close_ms(self) -> int:
        return self.opened_ms + self.window_ms

    def on_request(self, request: BlurRequest, arrival_ms: int) -> bool:
        """Collect ``request`` if the window is still open; a repeat requester replaces its earlier request."""
        reason = None
        if request.session_id != self.session_id:
            reason = "unknown-session"
        elif self.state is not SessionState.COLLECTING or arrival_ms > self.close_ms:
            reason = "late"
        if reason is not None:
            self.ignored.append(IgnoredRequest(request.requester_id, arrival_ms, reason))
            log.info("session %s: ignored request from %s at %d ms (%s)",
                     self.session_id, request.requester_id, arrival_ms, reason)
            return False
        self.requests.pop(request.requester_id, None)
        self.requests[request.requester_id] = request
        self.request_times[request.requester_id] = arrival_ms
        return True

    def finalize(self) -> list[PlannedBlur]:
        if self.state is SessionState.DONE:
            raise ProtocolError(f"session {self.session_id} already finalized")
        if self.state is not SessionState.COLLECTING:
            raise ProtocolError(f"session {self.session_id} is not collecting requests")
        self.state = SessionState.MATCHING
        self.verdicts = filter_targets(self.faces, self.photo.width)
        self.match_table, self.plan = plan_blurs(
            self.faces, self.verdicts, list(self.requests.values()), self.threshold
        )
        self.state = SessionState.DONE
        return self.plan


def plan_blurs(
    faces: Sequence[DetectedFace],
    verdicts: Sequence[FilterVerdict],
    requests: Sequence[BlurRequest],
    threshold: int,
) -> tuple[list[MatchEntry], list[PlannedBlur]]:
    """Match every request against every face; targets are scored but never planned."""
    table = []
    matched_by: dict[Hashable, list[str]] = {f.id: [] for f in faces}
    for req in requests:
        for face, verdict in zip(faces, verdicts):
            diff = attribute_diff(req.attributes, face.predicted)
            hit = not verdict.is_target and diff <= threshold
            table.append(MatchEntry(req.requester_id, face.id, diff, hit))
            if hit:
                matched_by[face.id].append(req.requester_id)
    plan = [PlannedBlur(f.id, tuple(matched_by[f.id])) for f in faces if matched_by[f.id]]
    return table, plan


class Photographer:
    """Network node owning any number of capture sessions."""

    def __init__(self, photographer_id: str, net: SimNet):
        self.photographer_id = _check_token(photographer_id, "photographer id")
        self.net = net
        self.sessions: dict[str, PhotographerSession] = {}
        net.register(photographer_id, self._handle)

    def _handle(self, msg: ProtoMessage, src: str, time_ms: int) -> None:
        if isinstance(msg, BlurRequest):
            session = self.sessions.get(msg.session_id)
            if session is None:
                self.net.note("late", src, self.photographer_id, msg.encode())
                return
            if not session.on_request(msg, time_ms):
                self.net.note("late", src, self.photographer_id, msg.encode())

    def capture(self, session: PhotographerSession, recipients: Sequence[str] | None = None) -> None:
        """Open ``session``: broadcast a capture notice and start the collection window.

        A photo without faces needs no requests; the session completes at once
        with an empty plan.
        """
        if session.session_id in self.sessions:
            raise ProtocolError(f"session id {session.session_id!r} already used")
        if session.state is not SessionState.FRESH:
            raise ProtocolError(f"session {session.session_id} was already captured")
        self.sessions[session.session_id] = session
        session.opened_ms = self.net.now
        session.state = SessionState.COLLECTING
        if not session.faces:
            session.finalize()
            return
        if recipients is None:
            recipients = [n for n in self.net.node_ids if n != self.photographer_id]
        notice = CaptureNotice(session.session_id, self.photographer_id)
        for node in recipients:
            self.net.send(self.photographer_id, node, notice)

        def close() -> None:
            session.finalize()
            for node in recipients:
                self.net.send(self.photographer_id, node, SessionClosed(session.session_id))

        self.net.schedule(session.window_ms, close, label=f"close {session.session_id}")


def apply_blur_plan(
    photo: Image,
    faces: Sequence[DetectedFace],
    plan: Sequence[PlannedBlur],
    sigma: float | Callable[[FaceRegion], float] | None = None,
) -> Image:
    """Blur each planned face's square once; ``sigma=None`` uses side/8 per face."""
    by_id = {f.id: f for f in faces}
    out = photo
    for item in plan:
        if item.face_id not in by_id:
            raise KeyError(f"blur plan references unknown face {item.face_id!r}")
        region = by_id[item.face_id].region
        s = sigma(region) if callable(sigma) else sigma
        out = blur_region(out, region, s)
    return out


# -- one end-to-end session ---------------------------------------------------


@dataclass
class SessionSetup:
    session_id: str
    photo: Image
    faces: list[DetectedFace]
    agents: list[StrangerAgent]
    photographer_id: str = "photographer"
    window_ms: int = DEFAULT_WINDOW_MS
    threshold: int = DEFAULT_THRESHOLD
    sigma: float | None = None


@dataclass
class SessionReport:
    session_id: str
    trace: list[TraceEvent]
    verdicts: list[FilterVerdict]
    match_table: list[MatchEntry]
    plan: list[PlannedBlur]
    requesters: list[str]  # agents that sent a request, in sending order
    collected: list[str]
    ignored: list[IgnoredRequest]
    message_counts: dict[str, dict[str, int]]
    output: Image | None = field(default=None, compare=False, repr=False)
    image_path: str | None = None

    @property
    def blurred_faces(self) -> set:
        return {p.face_id for p in self.plan}


def run_session(setup: SessionSetup, net: SimNet) -> SessionReport:
    """Capture, collect requests, finalize and blur; returns the full audit record."""
    photographer = Photographer(setup.photographer_id, net)
    for agent in setup.agents:
        agent.attach(net)
    session = PhotographerSession(
        setup.session_id, setup.photo, list(setup.faces), setup.window_ms, setup.threshold
    )
    photographer.capture(session)
    net.run()
    if session.state is not SessionState.DONE:
        raise ProtocolError(f"session {session.session_id} did not finish")
    output = apply_blur_plan(setup.photo, session.faces, session.plan, setup.sigma)
    requesters = [
        ev.src for ev in net.trace if ev.event == "send" and ev.message.startswith("REQ ")
    ]
    return SessionReport(
        session_id=session.session_id,
        trace=list(net.trace),
        verdicts=list(session.verdicts),
        match_table=list(session.match_table),
        plan=list(session.plan),
        requesters=requesters,
        collected=list(session.requests),
        ignored=list(session.ignored),
        message_counts=net.message_counts(),
        output=output,
    )
