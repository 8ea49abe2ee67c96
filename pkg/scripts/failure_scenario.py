"""Relay 1 of the diamond disconnects mid-run; traffic should move to relay 2."""

import argparse
from pathlib import Path

from adaptor_sim.engine import RunConfig, run
from adaptor_sim.metrics import MetricsLog, delivery_ratio, mean_transmissions
from adaptor_sim.netmodel import load_topology
from adaptor_sim.protocol import greedy

TOPOLOGIES = Path(__file__).resolve().parents[1] / "topologies"

ap = argparse.ArgumentParser()
ap.add_argument("--packets", type=int, default=8000)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

for name in ("diamond", "diamond_failure"):
    t = load_topology(TOPOLOGIES / f"{name}.json")
    res = run(RunConfig(t, args.packets, seed=args.seed))
    tail = MetricsLog(res.records).tail()
    src = res.learners[t.source]
    print(f"{name:16s} final-20% delivery={delivery_ratio(tail):.4f} "
          f"tx/delivered={mean_transmissions(tail):.3f} source EBS={src.ebs:.3f} "
          f"greedy on S={{2}}: {greedy(src, {2}, t.destination)}")
