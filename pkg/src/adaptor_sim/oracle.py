"""Genie-aided optimal routing from full knowledge of the topology.

The value of holding the packet at node i solves

    V(i) = -c_i + E_S[ max(R * [dst in S], max_{j in S, j != dst} V(j), V(i), 0) ]

where S is the random reception set of one broadcast from i. The
expectation is enumerated exactly over all subsets of the neighbors, and
nodes are swept Gauss-Seidel style, each one solving its own scalar
fixed point exactly (the right-hand side is piecewise linear in V(i)).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .netmodel import Topology, sample_reception_set
from .protocol import RETRANSMIT, TERMINATE, Action, actions, set_key

DEGREE_LIMIT = 20


class OracleError(RuntimeError):
    pass


@dataclass
class OracleValues:
    v: list[float]
    policy: dict  # (node, set key) -> Action
    residual: float
    iterations: int


@dataclass(frozen=True)
class _Outcomes:
    members: np.ndarray  # (k, d) bool
    probs: np.ndarray  # (k,)
    nbrs: tuple[int, ...]


def _exact_outcomes(t: Topology, i: int) -> _Outcomes:
    nbrs = t.neighbors(i)
    d = len(nbrs)
    idx = np.arange(2 ** d)[:, None]
    members = ((idx >> np.arange(d)[None, :]) & 1).astype(bool)
    p = np.array([t.links[(i, j)] for j in nbrs], dtype=float)
    probs = np.where(members, p, 1.0 - p).prod(axis=1)
    keep = probs > 0
    return _Outcomes(members[keep], probs[keep], nbrs)


def _sampled_outcomes(t: Topology, i: int, samples: int, seed: int) -> _Outcomes:
    nbrs = t.neighbors(i)
    if not nbrs:
        return _exact_outcomes(t, i)
    p = np.array([t.links[(i, j)] for j in nbrs], dtype=float)
    rng = np.random.default_rng([seed, i])
    draws = rng.random((samples, len(nbrs))) < p
    uniq, counts = np.unique(draws, axis=0, return_counts=True)
    return _Outcomes(uniq.reshape(-1, len(nbrs)).astype(bool), counts / samples, nbrs)


def solve_self_consistent(a: np.ndarray, q: np.ndarray, cost: float) -> float:
    """Smallest x with x = -cost + sum(q * max(a, x)), all a >= 0, sum(q) = 1.

    g(x) = rhs - x is non-increasing and piecewise linear with kinks at the
    distinct values of `a`; locate the segment holding the root, then solve
    the linear piece.
    """
    order = np.argsort(a, kind="stable")
    a = a[order]
    q = q[order]
    vals, start = np.unique(a, return_index=True)
    qs = np.add.reduceat(q, start)
    qa = qs * vals
    below = np.concatenate(([0.0], np.cumsum(qs)))  # mass strictly below vals[k]
    above = np.concatenate((np.cumsum(qa[::-1])[::-1], [0.0]))  # sum q*a for a >= vals[k]
    for k, x in enumerate(vals):
        g = -cost + below[k] * x + above[k] - x
        if g <= 0:
            if k == 0:
                # root at or below the smallest kink: max(a, x) == a everywhere
                return float(-cost + above[0])
            return float((-cost + above[k]) / (1.0 - below[k]))
    # unreachable: at the top kink g = -cost <= 0
    return float(vals[-1])


def value_iteration(t: Topology, tol: float = 1e-10, max_iter: int = 10_000,
                    mode: str = "exact", samples: int = 100_000, seed: int = 0,
                    degree_limit: int = DEGREE_LIMIT) -> OracleValues:
    n, dst, R = t.node_count, t.destination, t.reward
    if mode == "exact":
        deg = t.max_degree()
        if deg > degree_limit:
            raise OracleError(f"node degree {deg} exceeds exact enumeration limit "
                              f"{degree_limit}; use mode='monte_carlo'")
        outcomes = [_exact_outcomes(t, i) for i in range(n)]
    elif mode == "monte_carlo":
        outcomes = [_sampled_outcomes(t, i, samples, seed) for i in range(n)]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    V = np.zeros(n)
    V[dst] = R
    residual = math.inf
    it = 0
    while it < max_iter:
        it += 1
        residual = 0.0
        for i in range(n):
            if i == dst:
                continue
            o = outcomes[i]
            vals = np.array([R if j == dst else V[j] for j in o.nbrs], dtype=float)
            if o.nbrs:
                best = np.maximum(np.where(o.members, vals, 0.0).max(axis=1), 0.0)
            else:
                best = np.zeros(len(o.probs))
            x = solve_self_consistent(best, o.probs, t.costs[i])
            residual = max(residual, abs(x - V[i]))
            V[i] = x
        if residual < tol:
            break
    else:
        raise OracleError(f"value iteration did not converge in {max_iter} sweeps "
                          f"(residual {residual:.3g})")

    values = OracleValues([float(x) for x in V], {}, residual, it)
    decide = optimal_policy(values, t)
    for i in range(n):
        if i == dst:
            continue
        o = outcomes[i]
        for row in o.members:
            S = frozenset(j for j, m in zip(o.nbrs, row) if m)
            values.policy[(i, set_key(S))] = decide(i, S)
    return values


def action_value(values: OracleValues, t: Topology, i: int, a: Action) -> float:
    if a == TERMINATE:
        return 0.0
    if a == RETRANSMIT:
        return values.v[i]
    return t.reward if a.target == t.destination else values.v[a.target]


def optimal_policy(values: OracleValues, t: Topology):
    """Return a decision rule (node, S) -> Action maximizing the oracle value."""

    def decide(i: int, S) -> Action:
        acts = actions(i, S, t.destination)
        best, best_v = acts[0], action_value(values, t, i, acts[0])
        for a in acts[1:]:
            v = action_value(values, t, i, a)
            if v > best_v:
                best, best_v = a, v
        return best

    return decide


@dataclass(frozen=True)
class TxEstimate:
    mean: float
    stderr: float
    delivered: int
    trials: int


def expected_transmissions(values: OracleValues, t: Topology, rng: random.Random,
                           trials: int = 10_000, cap: int = 1000) -> TxEstimate:
    """Monte Carlo mean transmissions per delivered packet under the optimal policy."""
    decide = optimal_policy(values, t)
    counts = []
    for _ in range(trials):
        holder, tx = t.source, 0
        while tx < cap:
            tx += 1
            S = sample_reception_set(t, holder, rng)
            a = decide(holder, S)
            if a == TERMINATE:
                break
            if a == RETRANSMIT:
                continue
            if a.target == t.destination:
                counts.append(tx)
                break
            holder = a.target
    if not counts:
        return TxEstimate(math.nan, math.nan, 0, trials)
    arr = np.asarray(counts, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return TxEstimate(float(arr.mean()), se, len(arr), trials)

