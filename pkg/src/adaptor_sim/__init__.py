"""Reinforcement-learning opportunistic routing simulator."""

from .engine import Outcome, PacketRecord, RunConfig, run
from .netmodel import Topology, TopologyError, load_topology
from .oracle import OracleValues, value_iteration

__version__ = "0.1.0"
