"""Converged delivery ratio as the delivery reward R varies.

    python scripts/delivery_vs_reward.py [--topology topologies/two_node.json]
"""

import argparse
import sys
from pathlib import Path

from adaptor_sim.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--topology", default=str(ROOT / "topologies" / "two_node.json"))
    ap.add_argument("--r-min", default="0.5")
    ap.add_argument("--r-max", default="6")
    ap.add_argument("--r-step", default="0.5")
    ap.add_argument("--packets", default="10000")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--out", default="out/delivery_vs_reward")
    a = ap.parse_args()
    code = main(["sweep-r", "--topology", a.topology, "--r-min", a.r_min, "--r-max", a.r_max,
                 "--r-step", a.r_step, "--packets", a.packets, "--seed", a.seed, "--out", a.out])
    if code == 0:
        print((Path(a.out) / "sweep.csv").read_text(), end="")
    sys.exit(code)
