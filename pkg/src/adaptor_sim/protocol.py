"""Per-node learner: score tables, ACK/FO messages, relay choice and update.

Each node keeps, per reception set S and action a, a score, a visit count,
and a count of how often S was observed. Its estimated best score (EBS) is the value of holding a
packet: minus its own transmission cost, plus the empirically weighted best
score over the reception sets seen so far.

Relay scores follow the freshest EBS heard in ACKs: a neighbor's EBS is
already its own running estimate, so averaging it again only adds lag.
Retransmit scores are sample averages of bootstrapped returns.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

RELAY = "relay"
RETRANSMIT_KIND = "retransmit"
TERMINATE_KIND = "terminate"


class ProtocolError(RuntimeError):
    """A handshake invariant was broken; indicates a simulator bug."""


class Action(NamedTuple):
    kind: str
    target: int = -1

    def __str__(self):
        return f"relay:{self.target}" if self.kind == RELAY else self.kind

    @property
    def order(self) -> tuple:
        # relays ascending by id, then retransmit, then terminate
        if self.kind == RELAY:
            return (0, self.target)
        return (1, 0) if self.kind == RETRANSMIT_KIND else (2, 0)


RETRANSMIT = Action(RETRANSMIT_KIND)
TERMINATE = Action(TERMINATE_KIND)


def relay(j: int) -> Action:
    return Action(RELAY, j)


def parse_action(text: str) -> Action:
    if text == RETRANSMIT_KIND:
        return RETRANSMIT
    if text == TERMINATE_KIND:
        return TERMINATE
    kind, _, j = text.partition(":")
    if kind != RELAY or not j.isdigit():
        raise ValueError(f"bad action {text!r}")
    return relay(int(j))


def set_key(S) -> tuple[int, ...]:
    """Canonical table key for a reception set."""
    return tuple(sorted(S))


def format_set(S) -> str:
    return "+".join(str(j) for j in set_key(S))


def actions(i: int, S, destination: int) -> list[Action]:
    return [relay(j) for j in set_key(S)] + [RETRANSMIT, TERMINATE]


def reward_of(S, a: Action, destination: int, R: float) -> float:
    return R if a.kind == RELAY and a.target == destination else 0.0


def epsilon(seen: int) -> float:
    """Exploration probability after `seen` observations of a reception set.

    Decreasing to zero with a divergent sum (GLIE). The square root keeps
    enough exploration flowing to nodes several hops from the source.
    """
    return 1.0 / math.sqrt(seen + 1)


@dataclass(frozen=True)
class Data:
    packet_id: int
    transmitter: int


@dataclass(frozen=True)
class Ack:
    sender: int
    ebs: float


@dataclass(frozen=True)
class Fo:
    decision: Action


@dataclass
class LearnerState:
    owner: int
    cost: float = 1.0
    # scores[S][a]; missing entries read as 0
    scores: dict = field(default_factory=dict)
    visits: dict = field(default_factory=dict)
    seen: dict = field(default_factory=dict)
    ebs: float = 0.0
    updates: int = 0

    def score(self, S, a: Action) -> float:
        return self.scores.get(set_key(S), {}).get(a, 0.0)

    def visit(self, S, a: Action) -> int:
        return self.visits.get((set_key(S), a), 0)

    def seen_count(self, S) -> int:
        return self.seen.get(set_key(S), 0)

    def best_score(self, S) -> float:
        # untried actions (and terminate) score 0, so the max is never below 0
        row = self.scores.get(set_key(S))
        return max(0.0, max(row.values())) if row else 0.0


def make_ack(state: LearnerState) -> Ack:
    return Ack(state.owner, state.ebs)


def make_fo(decision: Action) -> Fo:
    return Fo(decision)


def absorb_acks(state: LearnerState, S, ack_ebs: Mapping[int, float],
                destination: int, R: float) -> LearnerState:
    """ACK phase: set each Relay(j) score for j in S from what j just reported."""
    row = state.scores.setdefault(set_key(S), {})
    for j in set_key(S):
        if j == destination:
            row[relay(j)] = R
        elif j in ack_ebs:
            row[relay(j)] = ack_ebs[j]
    return state


def greedy(state: LearnerState, S, destination: int) -> Action:
    acts = actions(state.owner, S, destination)
    row = state.scores.get(set_key(S), {})
    best = acts[0]
    best_v = row.get(best, 0.0)
    for a in acts[1:]:
        v = row.get(a, 0.0)
        if v > best_v:
            best, best_v = a, v
    return best


def relay_decision(state: LearnerState, S, destination: int, rng: random.Random) -> Action:
    """Epsilon-greedy choice over A(S), epsilon taken from N(S).

    Draw order: one uniform for the explore test, then (only when
    exploring) one index draw.
    """
    if rng.random() < epsilon(state.seen_count(S)):
        acts = actions(state.owner, S, destination)
        return acts[rng.randrange(len(acts))]
    return greedy(state, S, destination)


def update(state: LearnerState, S, a: Action, ack_ebs: Mapping[int, float],
           destination: int, R: float) -> LearnerState:
    """Apply the update phase for decision `a` on reception set S.

    Counters v(S, a) and N(S) advance; the score of a relay action becomes
    its target, other actions move toward theirs with rate 1/v(S, a). The
    node's EBS is then recomputed.
    """
    key = set_key(S)
    if a.kind == RELAY:
        if a.target not in key:
            raise ProtocolError(f"node {state.owner}: relay to {a.target} not in S={key}")
        if a.target != destination and a.target not in ack_ebs:
            raise ProtocolError(f"node {state.owner}: no EBS from chosen relay {a.target}")
    v = state.visits.get((key, a), 0) + 1
    state.visits[(key, a)] = v
    state.seen[key] = state.seen.get(key, 0) + 1
    state.updates += 1

    if a.kind == RELAY and a.target != destination:
        cont = ack_ebs[a.target]
    elif a.kind == RETRANSMIT_KIND:
        cont = state.ebs
    else:
        cont = 0.0
    target = reward_of(S, a, destination, R) + cont
    row = state.scores.setdefault(key, {})
    if a.kind == RELAY:
        row[a] = target
    else:
        old = row.get(a, 0.0)
        row[a] = old + (target - old) / v

    total = 0
    acc = 0.0
    for k, n in state.seen.items():
        total += n
        acc += n * state.best_score(k)
    state.ebs = -state.cost + acc / total
    return state
