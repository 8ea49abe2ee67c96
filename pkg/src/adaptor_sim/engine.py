"""Round-based simulation of one packet at a time over a lossy topology.

Every round is one handshake: the holder broadcasts DATA, the reception set
is drawn, each receiver ACKs with its EBS, the holder decides and announces
the decision in an FO packet, then (adaptor policy only) updates its table.

RNG discipline: a single ``random.Random(seed)`` stream per run. In each
round the channel draws come first (one per static neighbor of the holder,
ascending id), followed by the decision draws of the active policy.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from enum import Enum

from .netmodel import Topology, sample_reception_set
from .oracle import optimal_policy, value_iteration
from .protocol import (
    RELAY,
    RETRANSMIT,
    TERMINATE,
    Action,
    Data,
    LearnerState,
    absorb_acks,
    make_ack,
    make_fo,
    relay,
    relay_decision,
    set_key,
    update,
)

POLICIES = ("adaptor", "genie", "random")
DEFAULT_CAP = 1000


class Outcome(str, Enum):
    DELIVERED = "Delivered"
    DROPPED = "Dropped"
    CAP_HIT = "CapHit"


@dataclass(frozen=True)
class PacketRecord:
    packet_id: int
    outcome: Outcome
    transmissions: int
    cost_sum: float
    reward: float
    terminated_at: int

    @property
    def net(self) -> float:
        return self.reward - self.cost_sum


@dataclass
class RunConfig:
    topology: Topology
    packets: int
    seed: int = 0
    max_transmissions_per_packet: int = DEFAULT_CAP
    policy: str = "adaptor"

    def __post_init__(self):
        if self.packets < 1:
            raise ValueError("packets must be >= 1")
        if self.max_transmissions_per_packet < 1:
            raise ValueError("max_transmissions_per_packet must be >= 1")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")


@dataclass
class RoundOutcome:
    reception: frozenset
    decision: Action
    holder: int  # holder for the next round
    outcome: Outcome | None = None  # set when the packet terminated this round


@dataclass
class RunResult:
    records: list[PacketRecord]
    learners: list[LearnerState]
    trace: list[RoundOutcome] = field(default_factory=list)


def random_policy_decision(S, rng: random.Random) -> Action:
    """Baseline: uniform over relays and retransmit; coin flip when nobody heard."""
    if S:
        choices = [relay(j) for j in set_key(S)] + [RETRANSMIT]
        return choices[rng.randrange(len(choices))]
    return RETRANSMIT if rng.random() < 0.5 else TERMINATE


class Simulator:
    def __init__(self, config: RunConfig, keep_trace: bool = False):
        self.config = config
        t = self.topology = config.topology
        self.rng = random.Random(config.seed)
        self.learners = [LearnerState(i, t.costs[i]) for i in range(t.node_count)]
        self.failures = sorted(t.failures, key=lambda f: f.at_transmission)
        self.failed: frozenset = frozenset()
        self.clock = 0  # global transmission index
        self.keep_trace = keep_trace
        self.trace: list[RoundOutcome] = []
        self._genie = None
        self._genie_for = None

    def _refresh_failures(self):
        dead = {f.node for f in self.failures if f.at_transmission <= self.clock}
        if len(dead) != len(self.failed):
            self.failed = frozenset(dead)

    def _genie_decide(self, i, S):
        if self._genie is None or self._genie_for != self.failed:
            # the genie knows the live topology, failures included
            t = self.topology.without_nodes(self.failed) if self.failed else self.topology
            self._genie = optimal_policy(value_iteration(t), t)
            self._genie_for = self.failed
        return self._genie(i, S)

    def step_round(self, holder: int, packet_id: int) -> RoundOutcome:
        t = self.topology
        dst = t.destination
        self._refresh_failures()
        self.clock += 1
        data = Data(packet_id, holder)
        S = sample_reception_set(t, data.transmitter, self.rng, self.failed)
        acks = {j: make_ack(self.learners[j]) for j in sorted(S)}

        policy = self.config.policy
        ack_ebs = {j: ack.ebs for j, ack in acks.items()}
        if policy == "adaptor":
            absorb_acks(self.learners[holder], S, ack_ebs, dst, t.reward)
            a = relay_decision(self.learners[holder], S, dst, self.rng)
        elif policy == "genie":
            a = self._genie_decide(holder, S)
        else:
            a = random_policy_decision(S, self.rng)
        fo = make_fo(a)
        if policy == "adaptor":
            update(self.learners[holder], S, fo.decision, ack_ebs, dst, t.reward)

        if a.kind == RELAY:
            if a.target == dst:
                out = RoundOutcome(S, a, a.target, Outcome.DELIVERED)
            else:
                out = RoundOutcome(S, a, a.target)
        elif a == RETRANSMIT:
            out = RoundOutcome(S, a, holder)
        else:
            out = RoundOutcome(S, a, holder, Outcome.DROPPED)
        if self.keep_trace:
            self.trace.append(out)
        return out

    def send_packet(self, packet_id: int) -> PacketRecord:
        t = self.topology
        holder = t.source
        tx = 0
        cost = 0.0
        outcome = Outcome.CAP_HIT
        cap = self.config.max_transmissions_per_packet
        while tx < cap:
            cost += t.costs[holder]
            tx += 1
            r = self.step_round(holder, packet_id)
            if r.outcome is not None:
                outcome = r.outcome
                break
            holder = r.holder
        reward = t.reward if outcome is Outcome.DELIVERED else 0.0
        return PacketRecord(packet_id, outcome, tx, cost, reward, self.clock)

    def run(self) -> RunResult:
        records = [self.send_packet(m) for m in range(self.config.packets)]
        return RunResult(records, self.learners, self.trace)


def run(config: RunConfig, keep_trace: bool = False) -> RunResult:
    return Simulator(config, keep_trace).run()


RECORD_FIELDS = ("packet_id", "outcome", "transmissions", "cost_sum", "reward", "terminated_at")


def fmt(x: float) -> str:
    return repr(float(x))


def write_records(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([r.packet_id, r.outcome.value, r.transmissions,
                        fmt(r.cost_sum), fmt(r.reward), r.terminated_at])


def read_records(path) -> list[PacketRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [PacketRecord(int(row["packet_id"]), Outcome(row["outcome"]),
                             int(row["transmissions"]), float(row["cost_sum"]),
                             float(row["reward"]), int(row["terminated_at"]))
                for row in csv.DictReader(fh)]

