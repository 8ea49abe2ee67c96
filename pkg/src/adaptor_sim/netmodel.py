"""Network description and the lossy broadcast channel.

A topology is a directed graph whose links carry independent Bernoulli
delivery probabilities. Every transmission is a broadcast: each neighbor
of the transmitter hears it independently.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

_TOP_FIELDS = {"nodes", "source", "destination", "reward", "costs", "links", "failures"}
_REQUIRED = ("nodes", "source", "destination", "reward", "links")


class TopologyError(ValueError):
    """Raised when a topology file or definition is invalid."""


@dataclass(frozen=True)
class Failure:
    node: int
    at_transmission: int


@dataclass(frozen=True)
class Topology:
    node_count: int
    source: int
    destination: int
    costs: tuple[float, ...]
    links: Mapping[tuple[int, int], float]
    reward: float
    failures: tuple[Failure, ...] = ()
    _nbrs: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.node_count
        if not isinstance(n, int) or n < 2:
            raise TopologyError(f"nodes: need an integer >= 2, got {n!r}")
        for name in ("source", "destination"):
            v = getattr(self, name)
            if not isinstance(v, int) or not 0 <= v < n:
                raise TopologyError(f"{name}: dangling node reference {v!r}")
        if self.source == self.destination:
            raise TopologyError("source and destination must differ")
        if len(self.costs) != n:
            raise TopologyError(f"costs: expected {n} entries, got {len(self.costs)}")
        for i, c in enumerate(self.costs):
            if c < 0:
                raise TopologyError(f"costs[{i}]: negative cost {c}")
        if self.reward < 0:
            raise TopologyError(f"reward: must be non-negative, got {self.reward}")
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for (i, j), p in self.links.items():
            if not (0 <= i < n and 0 <= j < n):
                raise TopologyError(f"link ({i}, {j}): dangling node reference")
            if i == j:
                raise TopologyError(f"link ({i}, {j}): self-links are not allowed")
            if not 0.0 <= p <= 1.0:
                raise TopologyError(f"link ({i}, {j}): probability out of range: {p}")
            if p > 0:
                nbrs[i].append(j)
        for f in self.failures:
            if not 0 <= f.node < n:
                raise TopologyError(f"failures: dangling node reference {f.node}")
            if f.at_transmission < 0:
                raise TopologyError(f"failures: negative at_transmission {f.at_transmission}")
        object.__setattr__(self, "links", dict(self.links))
        object.__setattr__(self, "_nbrs", tuple(tuple(sorted(x)) for x in nbrs))

    def p(self, i: int, j: int) -> float:
        return self.links.get((i, j), 0.0)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._nbrs[i]

    def max_degree(self) -> int:
        return max(len(x) for x in self._nbrs)

    def without_nodes(self, dead) -> Topology:
        """Copy with every link into or out of `dead` removed."""
        dead = set(dead)
        links = {k: v for k, v in self.links.items() if k[0] not in dead and k[1] not in dead}
        return Topology(self.node_count, self.source, self.destination, self.costs,
                        links, self.reward, self.failures)

    def with_reward(self, reward: float) -> Topology:
        return Topology(self.node_count, self.source, self.destination, self.costs,
                        self.links, reward, self.failures)


def neighbors(t: Topology, i: int) -> tuple[int, ...]:
    return t.neighbors(i)


def sample_reception_set(t: Topology, i: int, rng: random.Random,
                         failed: frozenset = frozenset()) -> frozenset:
    """Draw which neighbors of `i` hear one broadcast.

    Consumes exactly one uniform draw per static neighbor, ascending by id,
    whether or not that neighbor (or `i` itself) has failed. Keeping the
    draw count fixed means a failure never shifts the rest of the stream.
    """
    got = []
    dead_tx = i in failed
    for j in t.neighbors(i):
        u = rng.random()
        if u < t.links[(i, j)] and not dead_tx and j not in failed:
            got.append(j)
    return frozenset(got)


def topology_from_dict(doc: dict) -> Topology:
    if not isinstance(doc, dict):
        raise TopologyError("top level must be a JSON object")
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise TopologyError(f"unknown fields: {sorted(unknown)}")
    for k in _REQUIRED:
        if k not in doc:
            raise TopologyError(f"missing field: {k}")
    n = doc["nodes"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise TopologyError(f"nodes: expected integer, got {n!r}")
    costs = doc.get("costs", [1.0] * n)
    if not isinstance(costs, list) or not all(_is_real(c) for c in costs):
        raise TopologyError("costs: expected an array of reals")
    if not _is_real(doc["reward"]):
        raise TopologyError(f"reward: expected a real, got {doc['reward']!r}")
    links = {}
    if not isinstance(doc["links"], list):
        raise TopologyError("links: expected an array")
    for k, ln in enumerate(doc["links"]):
        where = f"links[{k}]"
        if not isinstance(ln, dict) or set(ln) != {"from", "to", "p"}:
            raise TopologyError(f"{where}: expected object with fields from, to, p")
        i, j, p = ln["from"], ln["to"], ln["p"]
        if not (_is_int(i) and _is_int(j)):
            raise TopologyError(f"{where}: from/to must be integers")
        if not _is_real(p):
            raise TopologyError(f"{where}: p must be a real")
        if not 0.0 <= p <= 1.0:
            raise TopologyError(f"{where}: probability out of range: {p}")
        if (i, j) in links:
            raise TopologyError(f"{where}: duplicate link ({i}, {j})")
        links[(i, j)] = float(p)
    failures = []
    for k, f in enumerate(doc.get("failures", [])):
        if not isinstance(f, dict) or set(f) != {"node", "at_transmission"}:
            raise TopologyError(f"failures[{k}]: expected object with fields node, at_transmission")
        if not (_is_int(f["node"]) and _is_int(f["at_transmission"])):
            raise TopologyError(f"failures[{k}]: node/at_transmission must be integers")
        failures.append(Failure(f["node"], f["at_transmission"]))
    return Topology(
        node_count=n,
        source=doc["source"],
        destination=doc["destination"],
        costs=tuple(float(c) for c in costs),
        links=links,
        reward=float(doc["reward"]),
        failures=tuple(failures),
    )


def load_topology(path) -> Topology:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise TopologyError(f"{path}: cannot read file ({e.strerror})") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise TopologyError(f"{path}: parse failure at line {e.lineno}: {e.msg}") from e
    try:
        return topology_from_dict(doc)
    except TopologyError as e:
        raise TopologyError(f"{path}: {e}") from None


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)
