import json
from pathlib import Path

import pytest

from adaptor_sim.netmodel import Topology, load_topology

ROOT = Path(__file__).resolve().parents[1]
TOPOLOGIES = ROOT / "topologies"


def make_topology(n, links, src=0, dst=None, R=10.0, costs=None, failures=()):
    dst = n - 1 if dst is None else dst
    costs = tuple(costs) if costs is not None else (1.0,) * n
    return Topology(n, src, dst, costs, dict(links), R, tuple(failures))


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


@pytest.fixture
def two_node():
    return load_topology(TOPOLOGIES / "two_node.json")


@pytest.fixture
def diamond():
    return load_topology(TOPOLOGIES / "diamond.json")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
