import heapq
import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptor_sim.engine import RunConfig, run
from adaptor_sim.oracle import (
    OracleError,
    action_value,
    expected_transmissions,
    optimal_policy,
    solve_self_consistent,
    value_iteration,
)
from adaptor_sim.protocol import RETRANSMIT, TERMINATE, actions, relay

from conftest import make_topology


def dijkstra_to(t, dst):
    """Cost of reaching dst when each hop charges the transmitter's cost."""
    dist = {dst: 0.0}
    heap = [(0.0, dst)]
    rev = {}
    for (i, j), p in t.links.items():
        if p > 0:
            rev.setdefault(j, []).append(i)
    while heap:
        d, j = heapq.heappop(heap)
        if d > dist.get(j, math.inf):
            continue
        for i in rev.get(j, []):
            nd = d + t.costs[i]
            if nd < dist.get(i, math.inf):
                dist[i] = nd
                heapq.heappush(heap, (nd, i))
    return dist


def jacobi_bellman(t, sweeps=20_000):
    """Plain synchronous Bellman iteration with brute-force subset enumeration."""
    n, dst, R = t.node_count, t.destination, t.reward
    outcomes = []
    for i in range(n):
        nb = t.neighbors(i)
        rows = []
        for bits in itertools.product([0, 1], repeat=len(nb)):
            prob = 1.0
            for j, b in zip(nb, bits):
                prob *= t.p(i, j) if b else 1 - t.p(i, j)
            rows.append((prob, [j for j, b in zip(nb, bits) if b]))
        outcomes.append(rows)
    V = [0.0] * n
    V[dst] = R
    for _ in range(sweeps):
        new = list(V)
        for i in range(n):
            if i == dst:
                continue
            acc = 0.0
            for prob, S in outcomes[i]:
                opts = [0.0, V[i]] + [R if j == dst else V[j] for j in S]
                acc += prob * max(opts)
            new[i] = -t.costs[i] + acc
        if max(abs(a - b) for a, b in zip(new, V)) < 1e-13:
            return new
        V = new
    return V


def exact_tx_per_delivery(t, values):
    """Absorbing-chain solve of expected transmissions under the optimal policy."""
    decide = optimal_policy(values, t)
    n, dst = t.node_count, t.destination
    A = np.eye(n)
    b = np.zeros(n)
    for i in range(n):
        if i == dst:
            continue
        b[i] = 1.0
        nb = t.neighbors(i)
        for bits in itertools.product([0, 1], repeat=len(nb)):
            prob = 1.0
            for j, bit in zip(nb, bits):
                prob *= t.p(i, j) if bit else 1 - t.p(i, j)
            S = {j for j, bit in zip(nb, bits) if bit}
            a = decide(i, S)
            assert a != TERMINATE
            if a == RETRANSMIT:
                A[i, i] -= prob
            elif a.target != dst:
                A[i, a.target] -= prob
    return np.linalg.solve(A, b)[t.source]


def test_two_node_closed_form(two_node):
    vals = value_iteration(two_node)
    assert vals.v[0] == pytest.approx(10 - 1 / 0.5, abs=1e-12)
    assert vals.v[1] == 10.0
    assert vals.residual < 1e-10


def test_diamond_values_match_brute_force(diamond):
    vals = value_iteration(diamond)
    assert vals.v == pytest.approx(jacobi_bellman(diamond), abs=1e-9)
    assert vals.v[0] == pytest.approx(14 / 3, abs=1e-12)


def test_node_without_path_is_minus_cost():
    t = make_topology(4, {(0, 3): 0.5, (1, 2): 0.8}, costs=[1, 2.5, 1, 1])
    vals = value_iteration(t)
    assert vals.v[1] == pytest.approx(-2.5)
    assert vals.v[2] == pytest.approx(-1.0)


def test_isolated_source():
    t = make_topology(2, {}, costs=[0.7, 1])
    assert value_iteration(t).v[0] == pytest.approx(-0.7)


def random_unit_topology(rng, n=10):
    links = {}
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < 0.25:
                links[(i, j)] = 1.0
    costs = [rng.uniform(0.1, 3.0) for _ in range(n)]
    return make_topology(n, links, R=100.0, costs=costs)


@pytest.mark.parametrize("seed", range(5))
def test_dijkstra_equivalence(seed):
    t = random_unit_topology(random.Random(seed))
    vals = value_iteration(t, tol=1e-12)
    dist = dijkstra_to(t, t.destination)
    for i in range(t.node_count):
        if i == t.destination:
            expected = t.reward
        else:
            expected = max(t.reward - dist.get(i, math.inf), -t.costs[i])
        assert abs(vals.v[i] - expected) < 1e-9


@st.composite
def small_topologies(draw):
    n = draw(st.integers(2, 5))
    links = {}
    for i in range(n):
        for j in range(n):
            if i != j and draw(st.booleans()):
                links[(i, j)] = draw(st.sampled_from([0.1, 0.3, 0.5, 0.8, 1.0]))
    costs = draw(st.lists(st.sampled_from([0.5, 1.0, 2.0]), min_size=n, max_size=n))
    R = draw(st.sampled_from([0.0, 1.0, 5.0, 10.0, 40.0]))
    return make_topology(n, links, R=R, costs=costs)


@settings(max_examples=40, deadline=None)
@given(small_topologies())
def test_matches_jacobi_on_random_graphs(t):
    vals = value_iteration(t, tol=1e-12)
    assert vals.v == pytest.approx(jacobi_bellman(t), abs=1e-7)


@settings(max_examples=40, deadline=None)
@given(small_topologies())
def test_value_bounds_and_policy_membership(t):
    vals = value_iteration(t)
    for i in range(t.node_count):
        if i == t.destination:
            continue
        assert -t.costs[i] - 1e-9 <= vals.v[i] <= t.reward - t.costs[i] + 1e-9
    for (i, key), a in vals.policy.items():
        assert a in actions(i, set(key), t.destination)


@settings(max_examples=30, deadline=None)
@given(small_topologies(), st.floats(0.01, 5.0))
def test_monotone_in_reward(t, delta):
    lo = value_iteration(t).v
    hi = value_iteration(t.with_reward(t.reward + delta)).v
    assert all(b >= a - 1e-9 for a, b in zip(lo, hi))


@pytest.mark.parametrize("R, sign", [(1.5, -1), (2.0, 0), (3.0, 1)])
def test_drop_threshold(R, sign):
    t = make_topology(2, {(0, 1): 0.5}, R=R)
    v = value_iteration(t).v[0]
    if sign == 0:
        assert v == pytest.approx(0.0, abs=1e-12)
    else:
        assert math.copysign(1, v) == sign


def test_degree_limit():
    t = make_topology(5, {(0, j): 0.5 for j in range(1, 5)})
    with pytest.raises(OracleError, match="monte_carlo"):
        value_iteration(t, degree_limit=3)
    mc = value_iteration(t, mode="monte_carlo", samples=50_000, seed=1, degree_limit=3)
    exact = value_iteration(t)
    assert mc.v[0] == pytest.approx(exact.v[0], abs=0.05)


def test_non_convergence_reported():
    t = make_topology(4, {(0, 1): 0.3, (1, 0): 0.3, (1, 2): 0.3, (2, 1): 0.3, (2, 3): 0.3})
    with pytest.raises(OracleError, match="residual"):
        value_iteration(t, tol=1e-14, max_iter=2)


def test_scalar_solve_examples():
    # x = -1 + 0.5*max(10, x) + 0.5*max(0, x)  ->  8
    assert solve_self_consistent(np.array([10.0, 0.0]), np.array([0.5, 0.5]), 1.0) == pytest.approx(8.0)
    # no option ever beats retransmit: root sits below every kink
    assert solve_self_consistent(np.array([0.0]), np.array([1.0]), 2.0) == pytest.approx(-2.0)


def test_policy_examples(two_node, diamond):
    decide = optimal_policy(value_iteration(two_node), two_node)
    assert decide(0, {1}) == relay(1)
    assert decide(0, set()) == RETRANSMIT

    t = make_topology(5, {(0, 1): 0.5, (0, 2): 0.5, (1, 4): 0.9, (2, 4): 0.4})
    vals = value_iteration(t)
    assert vals.v[1] > vals.v[2]
    assert optimal_policy(vals, t)(0, {1, 2}) == relay(1)


def test_policy_never_picks_dominated_action(diamond):
    vals = value_iteration(diamond)
    for (i, key), a in vals.policy.items():
        best = max(action_value(vals, diamond, i, b) for b in actions(i, set(key), 4))
        assert action_value(vals, diamond, i, a) == best


def test_expected_transmissions_two_node(two_node):
    est = expected_transmissions(value_iteration(two_node), two_node, random.Random(0), 10_000)
    assert est.mean == pytest.approx(2.0, abs=0.05)
    assert est.delivered == 10_000


def test_expected_transmissions_unit_chain():
    L = 4
    t = make_topology(L + 1, {(i, i + 1): 1.0 for i in range(L)})
    est = expected_transmissions(value_iteration(t), t, random.Random(0), 100)
    assert est.mean == L and est.stderr == 0.0


DIAMOND_TX = 16 / 3  # 1/0.75 at the source + 2 at a relay + 2 at node 3


def test_diamond_golden_transmissions(diamond):
    vals = value_iteration(diamond)
    assert exact_tx_per_delivery(diamond, vals) == pytest.approx(DIAMOND_TX, abs=1e-12)
    est = expected_transmissions(vals, diamond, random.Random(2), 20_000)
    assert abs(est.mean - DIAMOND_TX) < 3 * est.stderr


def test_rollout_reproduces_source_value(diamond):
    vals = value_iteration(diamond)
    recs = run(RunConfig(diamond, 20_000, seed=3, policy="genie")).records
    nets = np.array([r.reward - r.cost_sum for r in recs])
    se = nets.std(ddof=1) / math.sqrt(len(nets))
    assert abs(nets.mean() - vals.v[0]) < 4 * se


def test_genie_still_delivers_below_threshold():
    # the first transmission is forced; once the destination hears it,
    # relaying (worth R > 0) beats terminating, so delivery ratio stays at p
    t = make_topology(2, {(0, 1): 0.5}, R=0.5)
    vals = value_iteration(t)
    assert vals.v[0] < 0
    assert optimal_policy(vals, t)(0, {1}) == relay(1)
    assert optimal_policy(vals, t)(0, set()) == TERMINATE
    recs = run(RunConfig(t, 4000, seed=0, policy="genie")).records
    ratio = sum(r.reward > 0 for r in recs) / len(recs)
    assert ratio == pytest.approx(0.5, abs=0.03)
