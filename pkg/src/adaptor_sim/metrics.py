"""Per-packet records reduced to the quantities that get plotted.

Net reward per packet is delivery reward minus accumulated transmission
cost; J_N is its mean over terminated packets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .engine import Outcome, PacketRecord

DEFAULT_WINDOW = 50
TAIL_FRACTION = 0.2
ROUNDS_PER_SECOND = 1.0


class EmptyLogError(ValueError):
    pass


@dataclass
class MetricsLog:
    records: list[PacketRecord] = field(default_factory=list)
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        stamps = [r.terminated_at for r in self.records]
        if stamps != sorted(stamps):
            raise ValueError("records must be ordered by terminated_at")

    def tail(self, fraction: float = TAIL_FRACTION) -> MetricsLog:
        """Last `fraction` of packets (at least one), used for converged behavior."""
        k = max(1, math.ceil(len(self.records) * fraction))
        return MetricsLog(self.records[-k:], self.window)


def _records(log):
    recs = log.records if isinstance(log, MetricsLog) else list(log)
    if not recs:
        raise EmptyLogError("no terminated packets")
    return recs


def j_n(log) -> float:
    recs = _records(log)
    return sum(r.reward - r.cost_sum for r in recs) / len(recs)


def delivery_ratio(log) -> float:
    recs = _records(log)
    return sum(r.outcome is Outcome.DELIVERED for r in recs) / len(recs)


def mean_cost(log) -> float:
    recs = _records(log)
    return sum(r.cost_sum for r in recs) / len(recs)


def mean_transmissions(log) -> float:
    """Transmissions spent per delivered packet; inf when nothing was delivered."""
    recs = _records(log)
    delivered = sum(r.outcome is Outcome.DELIVERED for r in recs)
    tx = sum(r.transmissions for r in recs)
    return tx / delivered if delivered else math.inf


def transmissions_series(log, window: int = DEFAULT_WINDOW) -> list[tuple[int, float]]:
    """Trailing-window transmissions per delivered packet.

    One point per terminated packet once the window is full; a window wider
    than the log gives a single point over all records.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    recs = log.records if isinstance(log, MetricsLog) else list(log)
    if not recs:
        return []
    w = min(window, len(recs))
    tx = delivered = 0
    out = []
    for k, r in enumerate(recs):
        tx += r.transmissions
        delivered += r.outcome is Outcome.DELIVERED
        if k >= w:
            old = recs[k - w]
            tx -= old.transmissions
            delivered -= old.outcome is Outcome.DELIVERED
        if k >= w - 1:
            out.append((r.terminated_at, tx / delivered if delivered else math.inf))
    return out


def to_seconds(round_index: int, rounds_per_second: float = ROUNDS_PER_SECOND) -> float:
    return round_index / rounds_per_second
