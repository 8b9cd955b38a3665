"""``art-bench``: run experiment grids and turn their CSV into plot data.

Exit codes: 0 success, 1 usage or configuration error, 2 an experiment cell
failed, 3 selftest mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, ParseError, ValidationError, coerce, parse_config
from .harness import (
    CSV_COLUMNS, MetricsRow, build_for, run_churn_bench, run_failure_bench, run_loadbal_bench,
    run_query_bench,
)
from .lrt import t1_hop_bound

OUT_ENV = "ART_BENCH_OUT"
DEFAULT_OUT = "art-bench-out"

EXPERIMENTS = {
    "build": "build",
    "bench-exact": "exact",
    "bench-range": "range",
    "bench-churn": "churn",
    "bench-failure": "failure",
    "bench-load": "load",
}


class SchemaMismatch(ValueError):
    pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return str(v)
        return format(v, ".6g")
    return str(v)


def format_rows(rows, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()


def parse_grid(spec: str | None) -> list:
    """``"n_clusters=64,256;b=2,4"`` -> ordered list of override dicts."""
    if not spec:
        return [{}]
    axes = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        key, sep, vals = part.partition("=")
        key = key.strip()
        if not sep or not vals.strip():
            raise UsageError(f"bad grid axis {part!r}; expected key=v1,v2")
        try:
            axes.append([(key, coerce(key, v)) for v in vals.split(",")])
        except ValidationError as exc:
            raise UsageError(f"grid: {exc}") from None
    return [dict(cell) for cell in itertools.product(*axes)]


def run_cell(experiment: str, cfg: ExperimentConfig, out: Path | None = None) -> list:
    skel = build_for(cfg)
    if experiment == "build":
        if out is not None:
            (out / f"skeleton-{cfg.config_hash}.txt").write_text(skel.snapshot())
        row = MetricsRow("build", skel.total_peers, skel.n_clusters, skel.b, skel.c, cfg.inner, cfg.distribution,
                         "build", max_routing_entries=skel.max_routing_entries(),
                         cluster_size_max=skel.keyspace.peers_per_cluster, seed=cfg.seed,
                         config_hash=cfg.config_hash)
        return [row]
    if experiment in ("exact", "range"):
        return run_query_bench(skel, cfg, classes=(experiment,)).rows
    if experiment == "churn":
        return run_churn_bench(skel, cfg, snapshots=False).rows
    if experiment == "failure":
        return run_failure_bench(skel, cfg).rows
    if experiment == "load":
        return run_loadbal_bench(skel, cfg).rows
    raise ValueError(experiment)


def error_row(experiment: str, cfg: ExperimentConfig, exc: BaseException) -> MetricsRow:
    return MetricsRow(experiment, 0, cfg.n_clusters, cfg.b, cfg.c, cfg.inner, cfg.distribution,
                      f"error:{type(exc).__name__}", success_rate=0.0, seed=cfg.seed, config_hash=cfg.config_hash)


def run_grid(experiment: str, base: ExperimentConfig, grid: list, out: Path, stdout=None) -> int:
    """Run each cell in grid order, writing ``<out>/<experiment>.csv``; returns exit code."""
    stdout = stdout or sys.stdout
    cells = []
    for overrides in grid:
        try:
            cells.append(base.with_(**overrides))
        except ValidationError as exc:
            raise UsageError(f"grid cell {overrides}: {exc}") from None
    out.mkdir(parents=True, exist_ok=True)
    rows, failed = [], False
    for cfg in cells:
        print(f"# config {cfg.config_hash} {cfg.one_line()}", file=stdout)
        try:
            rows.extend(run_cell(experiment, cfg, out))
        except Exception as exc:  # a failed cell is data, not a crash
            failed = True
            print(f"# error {cfg.config_hash} {type(exc).__name__}: {exc}", file=stdout)
            rows.append(error_row(experiment, cfg, exc))
    path = out / f"{experiment}.csv"
    path.write_text(format_rows(rows))
    print(f"# wrote {path} ({len(rows)} rows)", file=stdout)
    return 2 if failed else 0


# -- report ---------------------------------------------------------------

def read_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise SchemaMismatch(f"{path}: header does not match the expected columns")
        rows = []
        for no, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_COLUMNS):
                raise SchemaMismatch(f"{path}:{no}: expected {len(CSV_COLUMNS)} fields, got {len(rec)}")
            rows.append(dict(zip(CSV_COLUMNS, rec)))
    return rows


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-." else "_" for ch in text)


SERIES_HEADER = "N_total N_clusters hops_mean hops_p50 hops_p99 skeleton_hops_mean t1_bound log2_baseline"


def write_report(csv_path, out: Path, stdout=None) -> list:
    """Plot-data series per (experiment, op_class, distribution, b, inner) plus ``summary.txt``."""
    stdout = stdout or sys.stdout
    rows = [r for r in read_csv(csv_path) if not r["op_class"].startswith("error:")]
    groups: dict[tuple, list] = {}
    for r in rows:
        key = (r["experiment"], r["op_class"], r["distribution"], r["b"], r["inner"])
        groups.setdefault(key, []).append(r)
    out.mkdir(parents=True, exist_ok=True)
    written, summary = [], []
    for key, members in groups.items():
        members.sort(key=lambda r: (int(r["N_clusters"]), int(r["N_total"])))
        b = int(key[3])
        name = out / ("_".join(_slug(k) for k in key) + ".dat")
        lines = [SERIES_HEADER]
        for r in members:
            n = int(r["N_clusters"])
            lines.append(" ".join([
                r["N_total"], r["N_clusters"], r["hops_mean"], r["hops_p50"], r["hops_p99"],
                r["skeleton_hops_mean"], _fmt(_bound(n, b)), _fmt(math.log2(max(n, 1))),
            ]))
        name.write_text("\n".join(lines) + "\n")
        written.append(name)
        summary.append(_summarise(key, members))
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    written.append(out / "summary.txt")
    for p in written:
        print(f"# wrote {p}", file=stdout)
    return written


def _bound(n: int, b: int) -> float:
    return t1_hop_bound(n, b) if n >= b else math.nan


def _summarise(key, members) -> str:
    experiment, op_class, dist, b, inner = key
    b = int(b)
    head = f"{experiment} {op_class} distribution={dist} b={b} inner={inner}"
    out = [head]
    for r in members:
        n = int(r["N_clusters"])
        out.append(f"  N_clusters={n} hops_mean={r['hops_mean']} skeleton_hops_mean={r['skeleton_hops_mean']} "
                   f"t1_bound={_bound(n, b):.6g} log2={math.log2(max(n, 1)):.6g}")
    usable = [r for r in members if int(r["N_clusters"]) > 1 and float(r["skeleton_hops_mean"]) > 0]
    n0 = n1 = h0 = h1 = 0
    if usable:
        n0, h0 = int(usable[0]["N_clusters"]), float(usable[0]["skeleton_hops_mean"])
        n1, h1 = int(usable[-1]["N_clusters"]), float(usable[-1]["skeleton_hops_mean"])
    if n1 > n0:
        ratio, limit = h1 / h0, math.log2(n1) / math.log2(n0)
        verdict = "yes" if ratio < limit else "no"
        out.append(f"  growth skeleton hops {ratio:.6g} vs log2 ratio {limit:.6g}: sub-logarithmic: {verdict}")
    else:
        out.append("  growth: single size, sub-logarithmic: n/a")
    return "\n".join(out)


# -- entry point ----------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="art-bench", description="Simulate an ART overlay and benchmark its routing cost.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        c = sub.add_parser(name)
        c.add_argument("--config", help="key=value configuration file")
        c.add_argument("--seed", type=int, help="override the configured seed")
        c.add_argument("--out", help=f"output directory (default ${OUT_ENV} or {DEFAULT_OUT})")
        c.add_argument("--grid", help='parameter grid, e.g. "n_clusters=1024,16384;b=2,4"')
    r = sub.add_parser("report")
    r.add_argument("csv", help="CSV written by one of the bench commands")
    r.add_argument("--out", help="directory for plot data (default: next to the CSV)")
    s = sub.add_parser("selftest")
    s.add_argument("--quick", action="store_true", help="skip the 256-cluster cases")
    return p


def _out_dir(flag) -> Path:
    return Path(flag or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "selftest":
            from .selftest import run_selftest

            sizes = (16, 64) if args.quick else (16, 64, 256)
            bad = run_selftest(sizes=sizes, log=print)
            print(f"selftest: {'ok' if bad == 0 else f'{bad} mismatches'}")
            return 3 if bad else 0
        if args.command == "report":
            out = Path(args.out) if args.out else Path(args.csv).parent
            write_report(args.csv, out)
            return 0
        base = ExperimentConfig()
        if args.config:
            base = parse_config(Path(args.config).read_text())
        if args.seed is not None:
            base = base.with_(seed=args.seed)
        return run_grid(EXPERIMENTS[args.command], base, parse_grid(args.grid), _out_dir(args.out))
    except (ParseError, ValidationError, UsageError, SchemaMismatch, OSError) as exc:
        print(f"art-bench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
