"""Benchmark harness: run MMAS variants over seeds and emit JSON or CSV records.

Records go to ``--out`` (or stdout). The aggregate block (per-variant mean,
best, relative error) and the optional Friedman result are printed as JSON
to stdout when ``--out`` is given, otherwise to stderr.
"""

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .colony import MmasConfig, default_threads, run
from .errors import ConfigError
from .instance import build_distance_matrix, load_instance
from .pheromone import MmasParams
from .stats import DEFAULT_ALPHA, friedman_test

SELECTIONS = ("RWM", "WRS")
TABUS = ("LC", "CT", "BT")
ALL_VARIANTS = tuple(f"MMAS-{s}-{t}" for s in SELECTIONS for t in TABUS)
EXTRA_SELECTIONS = ("RWM_CHUNKED",)
DEPOSIT_FLAGS = {"iter": "iteration_best", "global": "global_best"}


@dataclass
class RunRecord:
    instance: str
    variant: str
    seed: int
    best_cost: Optional[int]
    config: dict = field(default_factory=dict)
    history: list = field(default_factory=list)  # [iteration-best, global-best] per iteration
    construction_ms: float = 0.0
    pheromone_ms: float = 0.0
    local_search_ms: float = 0.0
    other_ms: float = 0.0
    wall_ms: float = 0.0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def mean_iteration_cost(self) -> Optional[float]:
        return float(np.mean([h[0] for h in self.history])) if self.history else None


CSV_HEADER = tuple(f.name for f in fields(RunRecord))
_JSON_COLUMNS = ("config", "history")


def parse_variant(label: str) -> tuple:
    """'MMAS-WRS-CT' -> ('WRS', 'CT')."""
    parts = label.split("-")
    if (len(parts) != 3 or parts[0] != "MMAS" or parts[1] not in SELECTIONS + EXTRA_SELECTIONS
            or parts[2] not in TABUS):
        raise ConfigError(f"unknown variant {label!r}; expected MMAS-<RWM|RWM_CHUNKED|WRS>-<LC|CT|BT>")
    return parts[1], parts[2]


# -- output ---------------------------------------------------------------


def records_to_json(records) -> str:
    return json.dumps([asdict(r) for r in records], indent=1)


def records_from_json(text: str) -> list:
    return [RunRecord(**d) for d in json.loads(text)]


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        row = asdict(r)
        w.writerow([json.dumps(row[c]) if c in _JSON_COLUMNS else
                    ("" if row[c] is None else repr(row[c]) if isinstance(row[c], float) else row[c])
                    for c in CSV_HEADER])
    return buf.getvalue()


def records_from_csv(text: str) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError("CSV header does not match the RunRecord layout")
    types = {f.name: f.type for f in fields(RunRecord)}
    out = []
    for row in rows[1:]:
        d = {}
        for name, cell in zip(CSV_HEADER, row):
            if name in _JSON_COLUMNS:
                d[name] = json.loads(cell)
            elif name == "best_cost":
                d[name] = int(cell) if cell else None
            elif types[name] in (float, "float"):
                d[name] = float(cell)
            elif types[name] in (int, "int"):
                d[name] = int(cell)
            else:
                d[name] = cell
        out.append(RunRecord(**d))
    return out


def emit_results(records, fmt: str = "json", out=None) -> str:
    """Serialize records; writes to ``out`` (path or stream) when given."""
    if not records:
        raise ValueError("nothing to emit")
    text = records_to_json(records) if fmt == "json" else records_to_csv(records)
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
    return text


def load_results(path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    return records_from_json(text) if text.lstrip().startswith("[") else records_from_csv(text)


# -- runs -----------------------------------------------------------------


def run_one(dm, instance_name: str, config: MmasConfig) -> RunRecord:
    try:
        res = run(dm, config)
    except Exception as exc:  # reported per run; the CLI exits nonzero
        return RunRecord(instance_name, config.variant, config.seed, None, config.to_dict(),
                         status=f"error: {type(exc).__name__}: {exc}")
    t = res.timings
    return RunRecord(instance_name, config.variant, config.seed, int(res.best.cost), config.to_dict(),
                     [[h.iter_best_cost, h.global_best_cost] for h in res.history],
                     t["construction_ms"], t["pheromone_ms"], t["local_search_ms"], t["other_ms"],
                     res.wall_ms)


def aggregate(records, optimum: Optional[int] = None) -> list:
    """Per-variant summary: runs, mean and best cost, relative error of the mean."""
    out = []
    for v in dict.fromkeys(r.variant for r in records):
        costs = [r.best_cost for r in records if r.variant == v and r.ok]
        row = {"variant": v, "runs": len(costs),
               "failed": sum(1 for r in records if r.variant == v and not r.ok)}
        if costs:
            row["mean"] = float(np.mean(costs))
            row["best"] = int(min(costs))
            if optimum:
                row["relative_error"] = (row["mean"] - optimum) / optimum
                row["optimum_hits"] = sum(1 for c in costs if c == optimum)
        out.append(row)
    return out


def friedman_over_variants(records, alpha: float = DEFAULT_ALPHA):
    """Treatments are variants, blocks are seeds present for every variant."""
    variants = list(dict.fromkeys(r.variant for r in records))
    by = {(r.variant, r.seed): r.best_cost for r in records if r.ok}
    seeds = sorted({s for (_, s) in by if all((v, s) in by for v in variants)})
    return friedman_test([[by[(v, s)] for s in seeds] for v in variants], alpha)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmas-bench", description="Run MAX-MIN Ant System variants on a TSPLIB instance.")
    p.add_argument("--instance", required=True, help="TSPLIB file or bundled instance name")
    p.add_argument("--optimum", type=int, help="known optimum for relative error")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--variant", default="MMAS-RWM-BT", help="label MMAS-<selection>-<tabu>")
    g.add_argument("--all-variants", action="store_true", help="run all six variants")
    p.add_argument("--ants", type=int, help="ants per iteration (default: n)")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--rho", type=float, default=0.5, help="trail retention factor")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--cl", type=int, default=0, help="candidate-list length, 0 = off")
    p.add_argument("--ls", choices=("on", "off"), default="off", help="2-opt local search")
    p.add_argument("--deposit", choices=tuple(DEPOSIT_FLAGS), default="iter")
    p.add_argument("--seeds", type=int, default=1, help="runs per variant")
    p.add_argument("--seed", type=int, default=0, help="base seed; run i uses base + i")
    p.add_argument("--threads", type=int, help="worker threads (default: MMAS_THREADS or 1)")
    p.add_argument("--chunk", type=int, help="chunk size (RWM_CHUNKED) or lanes (WRS)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--friedman", action="store_true", help="Friedman test across variants")
    p.add_argument("--parallel-runs", action="store_true",
                   help="run independent runs concurrently (timings are then not comparable)")
    return p


def configs_from_args(args) -> list:
    variants = ALL_VARIANTS if args.all_variants else (args.variant,)
    threads = args.threads if args.threads is not None else default_threads()
    params = MmasParams(alpha=args.alpha, beta=args.beta, rho=args.rho)
    out = []
    for label in variants:
        sel, tabu = parse_variant(label)
        for i in range(args.seeds):
            out.append(MmasConfig(params=params, ants=args.ants, iterations=args.iterations,
                                  cl=args.cl or None, tabu_kind=tabu, selection_kind=sel,
                                  chunk_or_workers=args.chunk, use_local_search=args.ls == "on",
                                  deposit_source=DEPOSIT_FLAGS[args.deposit],
                                  seed=args.seed + i, threads=threads))
    return out


def run_benchmark(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seeds < 1:
        parser.error("--seeds must be >= 1")
    try:
        inst = load_instance(args.instance)
        configs = configs_from_args(args)
    except (OSError, ConfigError, ValueError) as exc:
        parser.error(str(exc))
    if args.friedman and len({c.variant for c in configs}) < 2:
        parser.error("--friedman needs at least two variants (use --all-variants)")
    if args.friedman and args.seeds < 2:
        parser.error("--friedman needs --seeds >= 2")

    dm = build_distance_matrix(inst)
    if args.parallel_runs:
        with ThreadPoolExecutor(max_workers=os.cpu_count() or 1) as pool:
            records = list(pool.map(lambda c: run_one(dm, inst.name, c), configs))
    else:
        records = [run_one(dm, inst.name, c) for c in configs]

    emit_results(records, args.format, args.out if args.out else sys.stdout)
    summary = {"instance": inst.name, "aggregate": aggregate(records, args.optimum),
               "parallel_runs": args.parallel_runs}
    if args.friedman:
        summary["friedman"] = asdict(friedman_over_variants(records))
    print(json.dumps(summary, indent=1), file=sys.stdout if args.out else sys.stderr)
    failed = [r for r in records if not r.ok]
    for r in failed:
        print(f"run failed: {r.variant} seed {r.seed}: {r.status}", file=sys.stderr)
    return 1 if failed else 0


def main(argv=None) -> None:
    sys.exit(run_benchmark(argv))


if __name__ == "__main__":
    main()
