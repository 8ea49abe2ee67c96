"""Command-line experiment runner.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
Diagnostics go to stderr; result files are written to --out.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import metrics
from .engine import POLICIES, Outcome, RunConfig, RunResult, fmt, run, write_records
from .metrics import MetricsLog
from .netmodel import Topology, TopologyError, load_topology
from .oracle import OracleError, value_iteration
from .protocol import format_set

THREADS_ENV = "ADAPTOR_SIM_THREADS"


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return fmt(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


def _workers(jobs: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, min(cap, jobs))


def _run_job(job) -> RunResult:
    topology, packets, seed, policy = job
    return run(RunConfig(topology, packets, seed=seed, policy=policy))


def _run_many(jobs) -> list[RunResult]:
    n = _workers(len(jobs))
    if n == 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(_run_job, jobs))


def _load(path: str) -> Topology:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"topology file not found: {p}")
    try:
        return load_topology(p)
    except TopologyError as e:
        raise ConfigError(str(e)) from None


def _outdir(path: str) -> Path:
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"--out is not a directory: {out}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_packets(n: int) -> None:
    if n < 1:
        raise ConfigError("--packets must be >= 1")


SUMMARY_FIELDS = ("policy", "packets", "delivered", "dropped", "cap_hit",
                  "j_n", "delivery_ratio", "mean_tx",
                  "j_n_tail", "delivery_ratio_tail", "mean_tx_tail")


def summary_row(policy: str, log: MetricsLog) -> list:
    tail = log.tail()
    count = {o: 0 for o in Outcome}
    for r in log.records:
        count[r.outcome] += 1
    return [policy, len(log.records), count[Outcome.DELIVERED], count[Outcome.DROPPED],
            count[Outcome.CAP_HIT],
            _num(metrics.j_n(log)), _num(metrics.delivery_ratio(log)),
            _num(metrics.mean_transmissions(log)),
            _num(metrics.j_n(tail)), _num(metrics.delivery_ratio(tail)),
            _num(metrics.mean_transmissions(tail))]


def dump_learners(path: Path, learners) -> None:
    rows = []
    for st in learners:
        for key in sorted(st.scores):
            for a in sorted(st.scores[key], key=lambda a: a.order):
                rows.append([st.owner, _num(st.ebs), format_set(key), str(a),
                             _num(st.scores[key][a]), st.visit(key, a), st.seen_count(key)])
    _write_csv(path, ("node", "ebs", "reception_set", "action", "score", "visits", "set_count"),
               rows)


_SERIES_GP = """set datafile separator ','
set key autotitle columnhead
set xlabel 'transmission round'
set ylabel 'transmissions per delivered packet'
plot 'series.csv' using 1:2 with lines
"""

_COMPARE_GP = """set datafile separator ','
set key autotitle columnhead
set xlabel 'packet'
set ylabel 'transmissions per delivered packet'
plot for [c=2:4] 'series.csv' using 1:c with lines
"""

_SWEEP_GP = """set datafile separator ','
set key autotitle columnhead
set xlabel 'delivery reward R'
set ylabel 'delivery ratio'
set yrange [0:1.05]
plot 'sweep.csv' using 1:2 with linespoints
"""


def cmd_run(args) -> int:
    t = _load(args.topology)
    _check_packets(args.packets)
    if args.window < 1:
        raise ConfigError("--window must be >= 1")
    out = _outdir(args.out)
    res = run(RunConfig(t, args.packets, seed=args.seed, policy=args.policy))
    log = MetricsLog(res.records, args.window)
    write_records(out / "records.csv", res.records)
    _write_csv(out / "series.csv", ("terminated_at", "tx_per_packet"),
               [(k, _num(v)) for k, v in metrics.transmissions_series(log, args.window)])
    _write_csv(out / "summary.csv", SUMMARY_FIELDS, [summary_row(args.policy, log)])
    if args.policy == "adaptor":
        dump_learners(out / "learner_dump.csv", res.learners)
    _write_text(out / "series.gp", _SERIES_GP)
    cap = sum(r.outcome is Outcome.CAP_HIT for r in res.records)
    if cap:
        print(f"warning: {cap} packet(s) hit the transmission cap", file=sys.stderr)
    return 0


def sweep_values(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0:
        raise ConfigError("--r-step must be > 0")
    if lo > hi:
        raise ConfigError("--r-min must not exceed --r-max")
    if lo < 0:
        raise ConfigError("--r-min must be non-negative")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + k * step, 12) for k in range(n + 1)]


def cmd_sweep_r(args) -> int:
    t = _load(args.topology)
    _check_packets(args.packets)
    rs = sweep_values(args.r_min, args.r_max, args.r_step)
    out = _outdir(args.out)
    jobs = [(t.with_reward(R), args.packets, args.seed, "adaptor") for R in rs]
    rows = []
    for R, res in zip(rs, _run_many(jobs)):
        tail = MetricsLog(res.records).tail()
        rows.append([_num(R), _num(metrics.delivery_ratio(tail)), _num(metrics.j_n(tail)),
                     _num(metrics.mean_transmissions(tail))])
    _write_csv(out / "sweep.csv", ("R", "delivery_ratio", "j_n", "mean_tx"), rows)
    _write_text(out / "sweep.gp", _SWEEP_GP)
    return 0


def cmd_oracle(args) -> int:
    t = _load(args.topology)
    if args.tol <= 0:
        raise ConfigError("--tol must be > 0")
    out = _outdir(args.out)
    vals = value_iteration(t, tol=args.tol, max_iter=args.max_iter)
    _write_csv(out / "values.csv", ("node", "value"),
               [(i, _num(v)) for i, v in enumerate(vals.v)])
    rows = [(i, format_set(key), str(a)) for (i, key), a in sorted(vals.policy.items())]
    _write_csv(out / "policy.csv", ("node", "reception_set", "action"), rows)
    print(f"residual {vals.residual:.3e} after {vals.iterations} iteration(s)")
    return 0


def cmd_compare(args) -> int:
    t = _load(args.topology)
    _check_packets(args.packets)
    out = _outdir(args.out)
    results = _run_many([(t, args.packets, args.seed, p) for p in POLICIES])
    logs = [MetricsLog(r.records) for r in results]
    series = [metrics.transmissions_series(log) for log in logs]
    w = min(metrics.DEFAULT_WINDOW, args.packets)
    rows = []
    for k in range(len(series[0])):
        rows.append([w + k] + [_num(s[k][1]) for s in series])
    _write_csv(out / "series.csv", ("packet",) + POLICIES, rows)
    _write_csv(out / "summary.csv", SUMMARY_FIELDS,
               [summary_row(p, log) for p, log in zip(POLICIES, logs)])
    _write_text(out / "series.gp", _COMPARE_GP)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="adaptor-sim", description="Adaptive opportunistic routing simulator")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="single simulation run")
    p.add_argument("--topology", required=True)
    p.add_argument("--packets", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", choices=POLICIES, default="adaptor")
    p.add_argument("--window", type=int, default=metrics.DEFAULT_WINDOW)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-r", help="delivery ratio as the delivery reward varies")
    p.add_argument("--topology", required=True)
    p.add_argument("--r-min", type=float, required=True)
    p.add_argument("--r-max", type=float, required=True)
    p.add_argument("--r-step", type=float, required=True)
    p.add_argument("--packets", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_r)

    p = sub.add_parser("oracle", help="genie-aided optimal values and policy")
    p.add_argument("--topology", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="adaptor vs genie vs random on identical seeds")
    p.add_argument("--topology", required=True)
    p.add_argument("--packets", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OracleError, RuntimeError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
