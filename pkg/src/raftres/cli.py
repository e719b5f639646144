"""``raft-res`` command-line front end."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import casestudies, estimators, galileo, importance
from .engine import TraceController, TraceLog
from .estimators import Budget, DegenerateBatches
from .importance import EnginePilots, NoAscent, ThresholdScheme
from .rng import RngStream
from .tree import ValidationError

log = logging.getLogger("raftres")

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FE_UNAVAIL = 2
EXIT_NO_ASCENT = 3
EXIT_DEGENERATE = 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    tree_text: str
    metric: str = "unrel"
    T: float = 1000.0
    algorithm: str = "smc"
    thresholds: tuple = ("es", "32")
    effort: int | None = None
    budget: Budget = field(default_factory=lambda: Budget(seconds=60.0))
    replications: int = 1
    seed: int = 0
    confidence: float = 0.95
    warmup: float = 1000.0
    batches: int = 20
    fallback_smc: bool = False
    label: str = ""

    def __post_init__(self):
        if self.metric not in ("unrel", "unavail"):
            raise CliError(EXIT_INVALID, f"unknown metric {self.metric!r}")
        if self.algorithm not in ("smc", "restart", "fe"):
            raise CliError(EXIT_INVALID, f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "fe" and self.metric == "unavail":
            raise CliError(EXIT_FE_UNAVAIL, "Fixed Effort estimates transient metrics only; use --metric unrel")


def _load(text: str):
    try:
        return galileo.load(text)
    except (galileo.GalileoError, ValidationError, ValueError) as exc:
        raise CliError(EXIT_INVALID, f"invalid tree: {exc}") from exc


def select_scheme(cfg: RunConfig, tree, model) -> ThresholdScheme:
    method, *args = cfg.thresholds
    horizon = cfg.T if cfg.metric == "unrel" else None
    if method == "manual":
        if len(args) != 1:
            raise CliError(EXIT_INVALID, "manual thresholds take one argument like 3:4,7:4")
        scheme = ThresholdScheme.parse(args[0]).check(model.top_max)
    elif method in ("es", "seq"):
        n = int(args[0]) if args else (32 if method == "es" else 8)
        pilots = EnginePilots(tree, model, horizon, cfg.seed)
        if method == "es":
            scheme = importance.select_thresholds_es(model, pilots, N=n)
        else:
            scheme = importance.select_thresholds_seq(model, pilots, n=n)
    else:
        raise CliError(EXIT_INVALID, f"unknown threshold method {method!r}")
    if cfg.algorithm == "fe":
        scheme = scheme.as_semantics("fixed-effort")
    elif cfg.effort is not None and len(scheme):
        scheme = scheme.with_effort(cfg.effort)
    return scheme


def _estimate(cfg: RunConfig, algorithm, tree, scheme, rep, model, kt):
    common = dict(seed=cfg.seed, rep=rep, confidence=cfg.confidence, imodel=model, kt=kt)
    if cfg.metric == "unrel":
        if algorithm == "smc":
            return estimators.smc_unreliability(tree, cfg.T, cfg.budget, **common)
        if algorithm == "restart":
            return estimators.restart_unreliability(tree, cfg.T, scheme, cfg.budget, **common)
        override = cfg.effort
        if override is None and not len(scheme):
            override = int(cfg.thresholds[1]) if len(cfg.thresholds) > 1 and cfg.thresholds[0] != "manual" else 8
        return estimators.fixed_effort_unreliability(
            tree, cfg.T, scheme, cfg.budget, effort_override=override, **common
        )
    steady = dict(warmup=cfg.warmup, batches=cfg.batches, **common)
    if algorithm == "smc":
        return estimators.smc_unavailability(tree, cfg.budget, **steady)
    return estimators.restart_unavailability(tree, scheme, cfg.budget, **steady)


def record(cfg: RunConfig, est, rep: int) -> dict:
    return {
        "replication": rep,
        "metric": est.metric,
        "algorithm": est.algorithm,
        "scheme": est.scheme,
        "estimate": est.point,
        "ci": [est.ci_low, est.ci_high],
        "confidence": est.confidence,
        "null": est.null_estimate,
        "samples": est.samples,
        "seconds": cfg.budget.seconds,
        "budget": cfg.budget.to_dict(),
        "seed": cfg.seed,
    }


def robust_mean(values, m: float = 2.0):
    """Mean after dropping points whose modified Z-score exceeds ``m``."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return None
    med = np.median(x)
    mad = np.median(np.abs(x - med))
    if mad == 0:
        keep = x
    else:
        keep = x[np.abs(0.6745 * (x - med) / mad) <= m]
    return float(keep.mean())


def aggregate(records) -> dict:
    widths = [r["ci"][1] - r["ci"][0] for r in records if not r["null"]]
    return {
        "replications": len(records),
        "non_null": len(widths),
        "mean_width": sum(widths) / len(widths) if widths else None,
        "mean_estimate": sum(r["estimate"] for r in records) / len(records) if records else None,
        "robust_estimate": robust_mean([r["estimate"] for r in records if not r["null"]]),
    }


def execute(cfg: RunConfig) -> dict:
    """Run the full pipeline; returns the JSON-ready report."""
    tree = _load(cfg.tree_text)
    model = importance.build(tree)
    from .engine import compile_tree

    kt = compile_tree(tree, model)
    algorithm = cfg.algorithm
    scheme = None
    notes = []
    if algorithm in ("restart", "fe"):
        try:
            scheme = select_scheme(cfg, tree, model)
        except NoAscent as exc:
            if not cfg.fallback_smc:
                raise CliError(EXIT_NO_ASCENT, f"threshold selection failed: {exc}") from exc
            notes.append(f"threshold selection failed ({exc}); fell back to smc")
            algorithm = "smc"
        except ValueError as exc:
            raise CliError(EXIT_INVALID, str(exc)) from exc
    records = []
    for rep in range(cfg.replications):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                est = _estimate(cfg, algorithm, tree, scheme, rep, model, kt)
            except DegenerateBatches as exc:
                raise CliError(EXIT_DEGENERATE, str(exc)) from exc
        log.info("replication %d: %.6g [%.6g, %.6g] in %.1fs", rep, est.point, est.ci_low, est.ci_high, est.wall_time)
        records.append(record(cfg, est, rep))
    report = {
        "schema": SCHEMA_VERSION,
        "label": cfg.label,
        "metric": "UNAVAIL" if cfg.metric == "unavail" else f"UNREL({cfg.T:g})",
        "algorithm": algorithm,
        "scheme": scheme.to_dict() if scheme is not None else {},
        "records": records,
        "aggregate": aggregate(records),
    }
    if notes:
        report["notes"] = notes
    return report


CSV_FIELDS = ("label", "replication", "metric", "algorithm", "scheme", "estimate", "ci_low", "ci_high",
              "null", "samples", "seconds", "seed")


def to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for rep in reports:
        sch = rep["scheme"]
        sch_txt = " ".join(f"{a}:{b}" for a, b in zip(sch.get("levels", ()), sch.get("efforts", ())))
        for r in rep["records"]:
            w.writerow((rep["label"], r["replication"], r["metric"], r["algorithm"], sch_txt, repr(r["estimate"]),
                        repr(r["ci"][0]), repr(r["ci"][1]), int(r["null"]), r["samples"], r["seconds"], r["seed"]))
    return buf.getvalue()


def _emit(text: str, path: str | None):
    if path and path != "-":
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj, fmt) -> str:
    if fmt == "csv":
        return to_csv(obj if isinstance(obj, list) else [obj])
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(EXIT_INVALID, f"cannot read {path}: {exc}") from exc


def _budget(args) -> Budget:
    if args.budget_seconds is None and args.runs is None and args.horizon is None:
        return Budget(seconds=60.0)
    return Budget(seconds=args.budget_seconds, runs=args.runs, horizon=args.horizon)


# -- commands --------------------------------------------------------------


def cmd_parse(args):
    text = _read(args.file)
    try:
        ast = galileo.parse(text)
    except galileo.GalileoError as exc:
        raise CliError(EXIT_INVALID, str(exc)) from exc
    if args.lower:
        print(_load(text).summary())
    else:
        sys.stdout.write(galileo.format_galileo(ast))
    return EXIT_OK


def cmd_validate(args):
    tree = _load(_read(args.file))
    print(f"ok: {len(tree)} nodes, {len(tree.basic)} basic elements, {len(tree.rboxes)} repair boxes")
    return EXIT_OK


def cmd_dump_ifun(args):
    tree = _load(_read(args.file))
    print(importance.build(tree).dump())
    return EXIT_OK


def cmd_gen(args):
    spec = casestudies.CaseSpec.parse(args.case)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        text = casestudies.generate(spec)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _emit(text, args.output)
    return EXIT_OK


def cmd_thresholds(args):
    cfg = _config(args, _read(args.file))
    tree = _load(cfg.tree_text)
    model = importance.build(tree)
    try:
        scheme = select_scheme(cfg, tree, model)
    except NoAscent as exc:
        raise CliError(EXIT_NO_ASCENT, f"threshold selection failed: {exc}") from exc
    print(scheme)
    return EXIT_OK


def _config(args, text, label="") -> RunConfig:
    return RunConfig(
        tree_text=text,
        metric=args.metric,
        T=args.T,
        algorithm=getattr(args, "algo", "restart"),
        thresholds=tuple(args.thresholds),
        effort=args.effort,
        budget=_budget(args),
        replications=args.replications,
        seed=args.seed,
        confidence=args.confidence,
        warmup=args.warmup,
        batches=args.batches,
        fallback_smc=getattr(args, "fallback_smc", False),
        label=label or getattr(args, "file", ""),
    )


def cmd_run(args):
    cfg = _config(args, _read(args.file))
    report = execute(cfg)
    _emit(_dump(report, args.format), args.output)
    return EXIT_OK


def bench_rows(suite: str, rows=None):
    if suite != "table2":
        raise CliError(EXIT_INVALID, f"unknown suite {suite!r}")
    out = []
    for (fam, p), refs in casestudies.REFERENCE.items():
        name = f"{fam}-{p}"
        if rows and name not in rows:
            continue
        for metric, ref in refs.items():
            out.append((name, metric, ref, casestudies.BUDGETS[(fam, p, metric)]))
    if rows and not out:
        raise CliError(EXIT_INVALID, f"no such row(s): {', '.join(rows)}")
    return out


def cmd_bench(args):
    reports = []
    for name, metric, ref, seconds in bench_rows(args.suite, args.row):
        if args.metric and metric != args.metric.upper():
            continue
        text = casestudies.generate(name)
        algos = args.algos.split(",")
        for algo in algos:
            m = "unavail" if metric == "UNAVAIL" else "unrel"
            if algo == "fe" and m == "unavail":
                continue
            if args.runs is not None or args.horizon is not None:
                budget = Budget(runs=args.runs, horizon=args.horizon, seconds=args.budget_seconds)
            else:
                budget = Budget(seconds=seconds * args.budget_scale if args.budget_seconds is None else args.budget_seconds)
            cfg = RunConfig(
                tree_text=text, metric=m, T=1000.0, algorithm=algo, thresholds=tuple(args.thresholds),
                effort=args.effort, budget=budget, replications=args.replications, seed=args.seed,
                confidence=0.95, warmup=args.warmup, batches=args.batches, fallback_smc=True,
                label=name,
            )
            print(f"{name} {metric} {algo}: {args.replications} x {budget.to_dict()}", file=sys.stderr)
            report = execute(cfg)
            report["reference"] = ref
            reports.append(report)
    _emit(_dump(reports if args.format == "csv" else {"schema": SCHEMA_VERSION, "rows": reports}, args.format),
          args.output)
    return EXIT_OK


def cmd_trace(args):
    tree = _load(_read(args.file))
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="")
    try:
        tc = TraceController(tree, RngStream.from_seed(args.seed), log=TraceLog(out))
        n = 0
        while n < args.max_events:
            if not tc._pending():
                break
            evs = tc.step(args.T)
            if not evs:
                break
            n += len(evs)
            if args.stop_at_top and tc.top:
                break
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# -- argument parsing ------------------------------------------------------


def _add_estimation(p, algo=True):
    p.add_argument("--metric", choices=("unrel", "unavail"), default="unrel")
    p.add_argument("--T", type=float, default=1000.0, help="mission time for unrel (default 1000)")
    if algo:
        p.add_argument("--algo", choices=("smc", "restart", "fe"), default="smc")
    p.add_argument("--thresholds", nargs="+", default=["es", "32"], metavar="SPEC",
                   help="'es N', 'seq n' or 'manual L:E,L:E,...' (default: es 32)")
    p.add_argument("--effort", type=int, help="override splitting / Fixed Effort effort")
    p.add_argument("--budget-seconds", type=float)
    p.add_argument("--runs", type=int, help="count budget: transient runs or Fixed Effort passes")
    p.add_argument("--horizon", type=float, help="simulated-time budget for unavail")
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--warmup", type=float, default=1000.0)
    p.add_argument("--batches", type=int, default=20)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="raft-res", description="Rare-event simulation of repairable dynamic fault trees.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a Galileo file and print it back")
    p.add_argument("file")
    p.add_argument("--lower", action="store_true", help="print the lowered tree instead")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("validate", help="check a tree for well-formedness")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dump-ifun", help="print the derived importance function")
    p.add_argument("file")
    p.set_defaults(func=cmd_dump_ifun)

    p = sub.add_parser("gen", help="generate a case-study tree, e.g. RC-3")
    p.add_argument("case")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("thresholds", help="select and print a threshold scheme")
    p.add_argument("file")
    _add_estimation(p, algo=False)
    p.set_defaults(func=cmd_thresholds, algo="restart")

    p = sub.add_parser("run", help="estimate a metric")
    p.add_argument("file")
    _add_estimation(p)
    p.add_argument("--fallback-smc", action="store_true", help="use smc when no thresholds can be selected")
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run case-study rows of a benchmark suite")
    p.add_argument("--suite", default="table2")
    p.add_argument("--row", action="append", help="row such as RC-3 (repeatable; default all)")
    p.add_argument("--metric", choices=("unrel", "unavail"))
    p.add_argument("--algos", default="smc,restart,fe")
    p.add_argument("--thresholds", nargs="+", default=["seq", "8"])
    p.add_argument("--effort", type=int)
    p.add_argument("--budget-seconds", type=float, help="per-replication budget (default: the row's budget)")
    p.add_argument("--budget-scale", type=float, default=1.0, help="scale the row's budget")
    p.add_argument("--runs", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=float, default=1000.0)
    p.add_argument("--batches", type=int, default=20)
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("trace", help="write a CSV event log of one simulation trace")
    p.add_argument("file")
    p.add_argument("--T", type=float, default=1000.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-events", type=int, default=100_000)
    p.add_argument("--stop-at-top", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_trace)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"raft-res: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
