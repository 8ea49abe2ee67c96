"""Transmissions per delivered packet over time: adaptor vs genie vs random.

    python scripts/tx_over_time.py [--topology topologies/diamond.json] [--packets 20000]
"""

import argparse
import sys
from pathlib import Path

from adaptor_sim.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--topology", default=str(ROOT / "topologies" / "diamond.json"))
    ap.add_argument("--packets", default="20000")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--out", default="out/tx_over_time")
    a = ap.parse_args()
    code = main(["compare", "--topology", a.topology, "--packets", a.packets,
                 "--seed", a.seed, "--out", a.out])
    if code == 0:
        print((Path(a.out) / "summary.csv").read_text(), end="")
    sys.exit(code)
