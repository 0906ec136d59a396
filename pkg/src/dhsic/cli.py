"""Command-line interface: ``dhsic test|simulate|causal|plotdata``.

Results go to stdout as JSON (or TSV); diagnostics go to stderr. Exit code
0 means success, 2 an input problem and 3 a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import re
import sys
from typing import Sequence

import numpy as np

from .api import METHODS, independence_test
from .causal import MethodConfig, dag_rank, enumerate_dags, parse_dags
from .dataset import CONTINUOUS, DISCRETE, Dataset
from .errors import GroupSpecError, InputError, NumericError, ParseError
from .kernels import KernelSpec
from .resampling import DEFAULT_B, PERMUTATION
from .simlab import SCENARIOS, ScenarioConfig, run_scenario

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

PLOT_COLUMNS = ("scenario", "method", "x", "rate", "se")

_RANGE = re.compile(r"^\s*(\d+)\s*(?:-\s*(\d+))?\s*$")


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def parse_group_spec(spec: str, p: int) -> tuple:
    """Parse ``"1-2;3:d"`` into 0-based column groups and kind tags.

    Ranges are 1-based and inclusive; a ``:d`` suffix marks a discrete group.
    Groups must partition the ``p`` columns.
    """
    groups, kinds = [], []
    for part in spec.split(";"):
        body, _, suffix = part.partition(":")
        suffix = suffix.strip().lower()
        if suffix not in ("", "d", "c"):
            raise GroupSpecError(f"unknown group suffix {suffix!r} in {part!r}")
        match = _RANGE.match(body)
        if not match:
            raise GroupSpecError(f"cannot parse group {part!r}")
        lo = int(match.group(1))
        hi = int(match.group(2)) if match.group(2) else lo
        if lo < 1 or hi < lo:
            raise GroupSpecError(f"invalid column range {body.strip()!r}")
        if hi > p:
            raise GroupSpecError(f"group {part.strip()!r} exceeds the {p} columns of the file")
        groups.append(np.arange(lo - 1, hi))
        kinds.append(DISCRETE if suffix == "d" else CONTINUOUS)
    return tuple(groups), tuple(kinds)


def read_table(text: str) -> tuple:
    """Header and float matrix of a CSV document."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError("file is empty")
    header = [h.strip() for h in rows[0]]
    values = []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", row=r)
        out = []
        for c, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"not a number: {cell.strip()!r}", row=r, col=c) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell.strip()!r}", row=r, col=c)
            out.append(v)
        values.append(out)
    if not values:
        raise ParseError("no data rows")
    return header, np.array(values, dtype=np.float64)


def parse_csv(path: str, group_spec: str | None = None) -> Dataset:
    """Load a UTF-8 CSV with a header row into a :class:`Dataset`.

    Without ``group_spec`` every column is its own continuous variable.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        header, values = read_table(fh.read())
    p = values.shape[1]
    if group_spec is None:
        groups, kinds = tuple(np.arange(p)[:, None]), (CONTINUOUS,) * p
    else:
        groups, kinds = parse_group_spec(group_spec, p)
    return Dataset(values, groups, kinds)


def group_spec_of(dataset: Dataset) -> str:
    """Group spec string that reproduces the dataset's grouping when the
    columns are written in group order."""
    parts, start = [], 1
    for g, kind in zip(dataset.groups, dataset.kinds):
        stop = start + g.size - 1
        text = str(start) if stop == start else f"{start}-{stop}"
        parts.append(text + (":d" if kind == DISCRETE else ""))
        start = stop + 1
    return ";".join(parts)


def write_csv(path: str, dataset: Dataset, header: Sequence[str] | None = None) -> str:
    """Write ``dataset`` as CSV (columns in group order, shortest round-trip
    float formatting) and return the group spec for reading it back."""
    cols = np.concatenate(dataset.groups)
    values = dataset.values[:, cols]
    if header is None:
        header = [f"x{c + 1}" for c in range(values.shape[1])]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in values:
            writer.writerow([repr(float(v)) for v in row])
    return group_spec_of(dataset)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _json_number(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def outcome_record(outcome) -> dict:
    return {
        "method": outcome.method,
        "n": int(outcome.n),
        "d": int(outcome.d),
        "statistic": _json_number(outcome.statistic),
        "p_value": _json_number(outcome.p_value),
        "crit_value": _json_number(outcome.crit_value),
        "reject": bool(outcome.reject),
        "alpha": float(outcome.alpha),
        "B": outcome.B,
        "seed": outcome.seed,
        "bandwidths": [_json_number(b) for b in outcome.bandwidths],
    }


def _tsv(rows: list, columns: Sequence[str]) -> str:
    lines = ["\t".join(columns)]
    for r in rows:
        lines.append("\t".join("" if r[c] is None else str(r[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _csv_list(text: str, cast) -> list:
    try:
        return [cast(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"cannot parse list {text!r}") from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _kernel_specs(dataset: Dataset, kernel: str, bandwidth: str):
    if bandwidth == "median":
        bw = "median"
    else:
        try:
            bw = float(bandwidth)
        except ValueError:
            raise InputError(f"bandwidth must be 'median' or a positive number, got {bandwidth!r}") from None
        if not bw > 0:
            raise InputError("bandwidth must be positive")
    specs = []
    for kind in dataset.kinds:
        use_discrete = kernel == "discrete" or (kernel == "auto" and kind == DISCRETE)
        specs.append(KernelSpec.discrete() if use_discrete else KernelSpec.gaussian(bw))
    return specs


def _load(args) -> Dataset:
    ds = parse_csv(args.input, args.groups)
    if args.kernel == "discrete":
        # validates that every column holds integers
        ds = Dataset(ds.values, ds.groups, (DISCRETE,) * ds.d)
    return ds


def cmd_test(args) -> str:
    ds = _load(args)
    specs = _kernel_specs(ds, args.kernel, args.bandwidth)
    out = independence_test(ds, args.method, specs, args.alpha, args.B, args.seed, args.C, args.workers)
    rec = outcome_record(out)
    if args.format == "tsv":
        return _tsv([rec], [k for k in rec if k != "bandwidths"])
    return json.dumps(rec) + "\n"


def cmd_simulate(args) -> str:
    records = []
    grid = itertools.product(
        _csv_list(args.n, int),
        _csv_list(args.method, str),
        _csv_list(args.c, float) if args.c else [1.0],
        _csv_list(args.bandwidth_scale, float) if args.bandwidth_scale else [None],
    )
    for n, method, c, scale in grid:
        if method not in METHODS:
            raise InputError(f"unknown method {method!r}")
        cfg = ScenarioConfig(
            scenario=args.scenario, n=n, d=args.d, m=args.m, method=method, alpha=args.alpha, B=args.B,
            seed=args.seed, C=args.C, c=c, bandwidth_scale=scale, workers=args.workers,
        )
        res = run_scenario(cfg)
        if res.failures:
            print(f"{args.scenario} n={n} {method}: {res.failures} degenerate fits counted as non-rejections",
                  file=sys.stderr)
        records.append(res.to_record())
    if args.format == "tsv":
        cols = list(dict.fromkeys(k for r in records for k in r))
        return _tsv([{c: r.get(c) for c in cols} for r in records], cols)
    return "".join(json.dumps(r) + "\n" for r in records)


def cmd_causal(args) -> str:
    ds = _load(args)
    if args.dags == "all":
        dags = enumerate_dags(ds.d)
    else:
        with open(args.dags, encoding="utf-8") as fh:
            dags = parse_dags(fh.read(), ds.d)
    config = MethodConfig(method=args.method, alpha=args.alpha, B=args.B, C=args.C, seed=args.seed)
    reports = dag_rank(ds, dags, config, split=args.split, workers=args.workers)
    if not args.split:
        print("ranking-only: without --split the p-values order the DAGs but carry no level guarantee",
              file=sys.stderr)
    records = []
    for rank, rep in enumerate(reports, start=1):
        rec = {"rank": rank, **rep.to_dict()}
        rec["statistic"] = _json_number(rec["statistic"])
        records.append(rec)
    if args.format == "tsv":
        return _tsv(records, ["rank", "index", "dag", "p_value", "statistic", "split"])
    return "".join(json.dumps(r) + "\n" for r in records)


def plot_rows(records: Sequence[dict]) -> list:
    """One ``(scenario, method, x, rate, se)`` row per scenario record.

    ``x`` is the swept parameter: ``c``, then ``bandwidth_scale``, then
    ``bandwidth``, falling back to ``n``.
    """
    rows = []
    for rec in records:
        x = rec["n"]
        for key in ("c", "bandwidth_scale", "bandwidth"):
            if rec.get(key) is not None:
                x = rec[key]
                break
        rows.append({"scenario": rec["scenario"], "method": rec["method"], "x": x,
                     "rate": rec["reject_rate"], "se": rec["se"]})
    rows.sort(key=lambda r: (r["scenario"], r["method"], r["x"]))
    return rows


def cmd_plotdata(args) -> str:
    text = sys.stdin.read() if args.input == "-" else open(args.input, encoding="utf-8").read()
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", row=lineno) from None
        missing = {"scenario", "method", "n", "reject_rate", "se"} - set(rec)
        if missing:
            raise ParseError(f"record lacks {sorted(missing)}", row=lineno)
        records.append(rec)
    return _tsv(plot_rows(records), PLOT_COLUMNS)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _level(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def _add_test_flags(p, methods=METHODS):
    p.add_argument("--method", choices=methods, default=PERMUTATION)
    p.add_argument("--alpha", type=_level, default=0.05)
    p.add_argument("--B", type=_positive_int, default=DEFAULT_B, help="number of resamples")
    p.add_argument("--C", type=_positive_int, default=None, help="BMR evaluation points (default n)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--format", choices=("json", "tsv"), default="json")


def _add_data_flags(p):
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--groups", default=None, help='variables as 1-based column ranges, e.g. "1-2;3:d"')
    p.add_argument("--kernel", choices=("gaussian", "discrete", "auto"), default="auto")
    p.add_argument("--bandwidth", default="median", help="'median' or a fixed Gaussian bandwidth")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhsic", description="Joint independence testing with dHSIC.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="test joint independence of the variables in a CSV file")
    _add_data_flags(p)
    _add_test_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="rejection rates of a simulation scenario")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--n", default="100", help="sample size or comma-separated list")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--m", type=_positive_int, default=300, help="replicates")
    p.add_argument("--c", default=None, help="Sim5 noise scale or comma-separated list")
    p.add_argument("--bandwidth-scale", default=None, help="multiple(s) of the median bandwidth")
    _add_test_flags(p, methods=None)  # --method takes a comma-separated list here
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("causal", help="rank candidate DAGs by residual independence")
    _add_data_flags(p)
    p.add_argument("--dags", default="all", help="edge-list file, or 'all' to enumerate (d <= 4)")
    p.add_argument("--split", action="store_true", help="fit on the first half, test on the second")
    _add_test_flags(p)
    p.set_defaults(func=cmd_causal)

    p = sub.add_parser("plotdata", help="turn simulate JSON lines into a TSV table")
    p.add_argument("--input", default="-", help="JSON lines file ('-' for stdin)")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numerical error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
