"""In-process controller message fabric with exact accounting.

Models the three controller-plane interfaces as one synchronous pub/sub
bus. Every published message increments a per-(interface, kind) counter
exactly once, regardless of how many subscribers see it; a message may also
carry a batch count so that per-user indication floods can be accounted
without materializing one object per report. Delivery order is the
subscription registration order, which keeps runs deterministic.

Interfaces and the kinds allowed on each:

* E2 (near-real-time): setup, subscription_req, subscription_resp,
  indication, control_req, control_ack
* A1 (policy): policy
* O1 (management): pm_report
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

E2 = "E2"
A1 = "A1"
O1 = "O1"

SETUP = "setup"
SUBSCRIPTION_REQ = "subscription_req"
SUBSCRIPTION_RESP = "subscription_resp"
INDICATION = "indication"
CONTROL_REQ = "control_req"
CONTROL_ACK = "control_ack"
POLICY = "policy"
PM_REPORT = "pm_report"

LEGAL_KINDS: dict[str, frozenset[str]] = {
    E2: frozenset({SETUP, SUBSCRIPTION_REQ, SUBSCRIPTION_RESP, INDICATION,
                   CONTROL_REQ, CONTROL_ACK}),
    A1: frozenset({POLICY}),
    O1: frozenset({PM_REPORT}),
}

# payloads of these kinds are small dicts worth keeping in the log
_LOGGED_PAYLOAD_KINDS = frozenset({CONTROL_REQ, CONTROL_ACK, POLICY})


class IllegalMessage(ValueError):
    """Interface/kind pair outside the legal set; the message is not
    counted or delivered."""


@dataclass
class Message:
    interface: str
    kind: str
    t_s: float
    source: str
    destination: str
    payload: Any = None
    count: int = 1  # batched indications carry the number of reports


@dataclass(frozen=True)
class LogRecord:
    t_s: float
    interface: str
    kind: str
    source: str
    destination: str
    count: int
    payload: Any = None


@dataclass
class Counters:
    by_kind: dict[tuple[str, str], int] = field(default_factory=dict)

    def get(self, interface: str, kind: str) -> int:
        return self.by_kind.get((interface, kind), 0)

    def total(self, interface: str) -> int:
        return sum(v for (itf, _), v in self.by_kind.items() if itf == interface)

    def grand_total(self) -> int:
        return sum(self.by_kind.values())


class RicBus:
    def __init__(self, keep_log: bool = False):
        self._subs: list[tuple[str, str, Callable[[Message], None], str]] = []
        self._counts: dict[tuple[str, str], int] = {}
        self.log: list[LogRecord] | None = [] if keep_log else None

    def subscribe(self, interface: str, kind: str,
                  callback: Callable[[Message], None], name: str = "") -> None:
        if kind not in LEGAL_KINDS.get(interface, frozenset()):
            raise IllegalMessage(f"cannot subscribe to {kind!r} on {interface}")
        self._subs.append((interface, kind, callback, name))

    def publish(self, msg: Message) -> int:
        """Validate, count once, log, then deliver synchronously to every
        matching subscriber in registration order. Returns the number of
        deliveries."""
        if msg.kind not in LEGAL_KINDS.get(msg.interface, frozenset()):
            raise IllegalMessage(f"kind {msg.kind!r} is not legal on {msg.interface}")
        if msg.count < 1:
            raise ValueError("message count must be >= 1")
        key = (msg.interface, msg.kind)
        self._counts[key] = self._counts.get(key, 0) + msg.count
        if self.log is not None:
            payload = msg.payload if msg.kind in _LOGGED_PAYLOAD_KINDS else None
            self.log.append(LogRecord(msg.t_s, msg.interface, msg.kind,
                                      msg.source, msg.destination, msg.count, payload))
        delivered = 0
        for itf, kind, callback, _ in self._subs:
            if itf == msg.interface and kind == msg.kind:
                callback(msg)
                delivered += 1
        return delivered

    def snapshot_counters(self) -> Counters:
        return Counters(by_kind=dict(self._counts))
