"""Command line interface.

Every subcommand also reads ``--config FILE``, a text file of ``key = value``
lines whose keys are the long flag names (``burn-in`` or ``burn_in``).
Flags given on the command line override the file.  The exit status is 0
exactly when every tolerance check of the run passes.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .coefficients import KINDS, Scenario, coefficients
from .distributions import IDS, DistributionSpec, curve_table, metadata
from .figures import FIGURES, reproduce_figure, write_curve, write_histograms
from .kicked_top import TAPS, TopConfig, run_monitored_top
from .trajectory import (
    KS_EXACT,
    KS_PHENOMENOLOGICAL,
    OBSERVABLES,
    Histogram,
    TrajectoryConfig,
    default_targets,
    ks_distance,
    run_trajectory,
)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def read_config_file(path) -> dict:
    """``key = value`` pairs; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _emit(summary: dict, out_dir) -> None:
    text = json.dumps(summary, indent=2, default=float)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "summary.json").write_text(text + "\n")
    print(text)


# -- subcommands ----------------------------------------------------------------------------


def _scenario_lambdas(args) -> tuple:
    lams = args.lam or ()
    kind = args.scenario
    needed = {"monitored-one-of-two": 1, "monitored-two-of-two": 2, "monitored-one-of-q": 1}.get(kind, 0)
    nonzero = sum(1 for v in lams if v > 0)
    if kind.startswith("free") and nonzero:
        raise ValueError(f"{kind} takes no measurement strengths")
    if kind.startswith("monitored") and nonzero != needed:
        raise ValueError(f"{kind} needs {needed} nonzero strength(s), got {list(lams)}")
    if kind in ("free-two-qubit", "monitored-one-of-two", "monitored-two-of-two") and args.qubits != 2:
        raise ValueError(f"{kind} needs --qubits 2")
    if kind == "free-single" and args.qubits != 1:
        raise ValueError("free-single needs --qubits 1")
    return lams


def cmd_simulate(args) -> int:
    lams = _scenario_lambdas(args)
    observables = args.observables or tuple(
        o for o in OBSERVABLES if args.qubits == 2 or o in ("r1", "r") or (o == "R" and args.qubits > 1)
    )
    cfg = TrajectoryConfig(
        args.qubits, args.epsilon, lams, steps=args.steps, burn_in=args.burn_in, thinning=args.thin,
        seed=args.seed, observables=observables,
    )
    result = run_trajectory(cfg)
    checks = []
    for obs, (spec, threshold) in default_targets(cfg).items():
        ks = ks_distance(result.samples[obs], spec)
        checks.append({"observable": obs, "dist": metadata(spec), "ks": ks, "threshold": threshold,
                       "passed": ks < threshold})
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_histograms(out / "histograms.csv", result.histograms)
        with open(out / "samples.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cfg.observables)
            for row in zip(*(result.samples[o] for o in cfg.observables)):
                w.writerow([repr(float(v)) for v in row])
    summary = {"config": dict(cfg.as_dict(), scenario=args.scenario), "ks_table": checks,
               "runtime_seconds": result.runtime_seconds, "seed": cfg.seed}
    _emit(summary, args.out)
    return 0 if all(c["passed"] for c in checks) else 1


def _spec_from_args(args) -> DistributionSpec:
    return DistributionSpec(args.dist, args.lam, args.lam2, args.n)


def cmd_analytic(args) -> int:
    spec = _spec_from_args(args)
    x, p, c = curve_table(spec, args.grid)
    if args.out:
        write_curve(args.out, x, p, c)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["x", "pdf", "cdf"])
        for row in zip(x, p, c):
            w.writerow([repr(float(v)) for v in row])
    return 0


def _parse_point(text: str) -> dict:
    point = {}
    for item in _names(text):
        key, value = item.split("=", 1)
        point[key.strip()] = float(value)
    return point


def cmd_coeffs(args) -> int:
    scenario = Scenario(args.scenario, args.n, args.lam, args.lam2)
    cs = coefficients(scenario, _parse_point(args.point))
    out = {
        "scenario": {"kind": scenario.kind, "N": scenario.N, "Lambda": scenario.Lambda, "Lambda2": scenario.Lambda2},
        "drifts": {k: float(v) for k, v in cs.drifts.items()},
        "diffusions": {",".join(k): float(v) for k, v in cs.diffusions.items()},
    }
    print(json.dumps(out, indent=2))
    return 0


def _read_samples(path, column) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    try:
        float(rows[0][0])
        header = None
    except ValueError:
        header, rows = rows[0], rows[1:]
    idx = 0
    if column is not None:
        if header is None or column not in header:
            raise ValueError(f"column {column!r} not found in {path}")
        idx = header.index(column)
    return np.array([float(row[idx]) for row in rows])


def cmd_compare(args) -> int:
    spec = _spec_from_args(args)
    x = _read_samples(args.samples, args.column)
    threshold = args.threshold
    if threshold is None:
        threshold = KS_PHENOMENOLOGICAL if spec.phenomenological else KS_EXACT
    ks = ks_distance(x, spec)
    _emit({"config": {"samples": str(args.samples), "count": int(x.size), "dist": metadata(spec)},
           "ks_table": [{"ks": ks, "threshold": threshold, "passed": ks < threshold}],
           "runtime_seconds": 0.0, "seed": None}, None)
    return 0 if ks < threshold else 1


def cmd_kicked_top(args) -> int:
    cfg = TopConfig(args.j, args.k, args.beta_x, args.beta_y, args.slices, args.lam, args.tap)
    start = time.perf_counter()
    x = run_monitored_top(cfg, args.steps, np.random.default_rng(args.seed))
    runtime = time.perf_counter() - start
    spec = DistributionSpec("M-r-1ofq", cfg.effective_strength, N=cfg.dim)
    ks = ks_distance(x, spec)
    # only the slice-averaged stream has a catalog prediction
    checks = [{"observable": "r", "tap": cfg.tap, "dist": metadata(spec), "ks": ks,
               "threshold": KS_PHENOMENOLOGICAL if cfg.tap == "every-slice" else None,
               "passed": ks < KS_PHENOMENOLOGICAL if cfg.tap == "every-slice" else True}]
    if args.out:
        h = Histogram.uniform((0.0, 1.0))
        h.add(x)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_histograms(Path(args.out) / "histograms.csv", {f"r/{cfg.tap}": h})
    config = {"j": cfg.j, "k": cfg.k, "beta_x": cfg.beta_x, "beta_y": cfg.beta_y, "n_slices": cfg.n_slices,
              "lam": cfg.lam, "Lambda": cfg.effective_strength, "tap": cfg.tap, "periods": args.steps}
    _emit({"config": config, "ks_table": checks, "runtime_seconds": runtime, "seed": args.seed}, args.out)
    return 0 if all(c["passed"] for c in checks) else 1


def cmd_figure(args) -> int:
    report = reproduce_figure(args.id, seed=args.seed, steps=args.steps, out_dir=args.out)
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {report.figure_id} {c.panel}: {c.name} = {c.value:.4f} (limit {c.threshold:g})",
              file=sys.stderr)
    _emit(report.summary(), None)
    return 0 if report.passed else 1


# -- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monitored-dynamics", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="key = value file with defaults for the flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one trajectory and histogram its observables")
    p.add_argument("--scenario", choices=KINDS, default="free-two-qubit")
    p.add_argument("--qubits", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=_floats, default=(), help="strengths per qubit, comma separated")
    p.add_argument("--steps", type=int, default=500_000)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--observables", type=_names, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    for name, helptext in (("analytic", "tabulate a catalog density"), ("compare", "KS distance of samples")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--dist", choices=IDS, required=True)
        p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="effective strength Lambda")
        p.add_argument("--lambda2", dest="lam2", type=float, default=0.0)
        p.add_argument("--n", type=int, default=4)
        if name == "analytic":
            p.add_argument("--grid", type=int, default=201)
            p.add_argument("--out", default=None)
            p.set_defaults(func=cmd_analytic)
        else:
            p.add_argument("--samples", required=True)
            p.add_argument("--column", default=None)
            p.add_argument("--threshold", type=float, default=None)
            p.set_defaults(func=cmd_compare)

    p = sub.add_parser("coeffs", help="closed-form drift and diffusion at a point")
    p.add_argument("--scenario", choices=KINDS, required=True)
    p.add_argument("--point", required=True, help="e.g. r=0.3,R=0.6,C=0.02")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--lambda2", dest="lam2", type=float, default=0.0)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("kicked-top", help="monitored kicked top")
    p.add_argument("--j", type=float, default=7.5)
    p.add_argument("--k", type=float, default=8.0)
    p.add_argument("--beta-x", type=float, default=0.8)
    p.add_argument("--beta-y", type=float, default=2.0)
    p.add_argument("--slices", type=int, default=10)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--tap", choices=TAPS, default="every-slice")
    p.add_argument("--steps", type=int, default=100_000, help="Floquet periods after burn-in")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_kicked_top)

    p = sub.add_parser("figure", help="reproduce one reference figure")
    p.add_argument("--id", choices=FIGURES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_figure)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config_file(known.config)
    command = next((a for a in rest if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if command not in subparsers.choices:
        return
    sub = subparsers.choices[command]
    dests = {}
    for action in sub._actions:
        for opt in action.option_strings:
            dests[opt.lstrip("-").replace("-", "_")] = action.dest
    unknown = sorted(set(values) - set(dests))
    if unknown:
        parser.error(f"unknown keys in {known.config}: {', '.join(unknown)}")
    # string defaults go through each action's type conversion
    sub.set_defaults(**{dests[k]: v for k, v in values.items()})
    for action in sub._actions:
        if action.dest in {dests[k] for k in values}:
            action.required = False


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
