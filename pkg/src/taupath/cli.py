"""Command-line interface: ``taupath {estimate,sweep,bench,validate}``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import bench
from .errors import TaupathError
from .model import load_model
from .sampling import default_workers
from .stats import to_csv, to_json


def _seed_default() -> int:
    raw = os.environ.get("TAUPATH_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise TaupathError(f"TAUPATH_SEED must be an integer, got {raw!r}") from None


def _assignment(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None


def _scenario_args(p: argparse.ArgumentParser):
    p.add_argument("--model", required=True, help="model file or bundled model name")
    p.add_argument("--method", required=True, choices=bench.METHODS)
    p.add_argument("--param", required=True, help="parameter to differentiate against")
    p.add_argument("-T", type=float, required=True, help="final time")
    p.add_argument("-N", type=int, required=True, help="number of samples")
    p.add_argument("--tau-max", type=float, default=None)
    p.add_argument("--m0", type=int, default=10, help="expected auxiliary pairs per sample")
    p.add_argument("--n0", type=int, default=1000, help="pilot runs for the normalizing constant")
    p.add_argument("--h", type=float, default=0.1, help="finite-difference perturbation")
    p.add_argument("--seed", type=int, default=None, help="u64 seed (default $TAUPATH_SEED or 0)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--reference", type=float, default=None, help="reference value for RE")
    p.add_argument("--set", dest="overrides", type=_assignment, action="append", default=[],
                   metavar="NAME=VALUE", help="override a model parameter")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _scenario(ns) -> bench.Scenario:
    return bench.Scenario(
        model=ns.model, method=ns.method, param=ns.param, T=ns.T, N=ns.N, tau_max=ns.tau_max,
        m0=ns.m0, n0=ns.n0, h=ns.h, seed=_seed_default() if ns.seed is None else ns.seed,
        workers=_workers(ns.workers), reference=ns.reference,
        overrides=dict(ns.overrides))


def _workers(n):
    return default_workers() if n is None else n


def _emit(rows, ns) -> Path | None:
    text = to_json(rows) if ns.format == "json" else to_csv(rows)
    if ns.out is None:
        sys.stdout.write(text)
        return None
    path = Path(ns.out)
    path.write_text(text, encoding="utf-8")
    return path


def cmd_estimate(ns) -> int:
    row = bench.run_scenario(_scenario(ns))
    _emit([row], ns)
    return 0


def cmd_sweep(ns) -> int:
    from .plotting import plot_sweep

    rows = bench.run_sweep(_scenario(ns), ns.axis, ns.values)
    path = _emit(rows, ns)
    if path is not None and not ns.no_plot:
        plot_sweep(rows, ns.axis, ns.values, path.with_suffix(".png"))
    return 0


def cmd_bench(ns) -> int:
    from .plotting import plot_methods

    seed = _seed_default() if ns.seed is None else ns.seed
    scenarios = bench.bench_scenarios(ns.preset, ns.N, seed=seed,
                                      workers=_workers(ns.workers), methods=ns.methods,
                                      params=ns.params, m0=ns.m0, n0=ns.n0, h=ns.h)
    rows = []
    for sc in scenarios:
        rows.append(bench.run_scenario(sc))
        print(f"{sc.method:7s} {sc.param:8s} T={sc.T:g} mean={rows[-1].mean:.6g} "
              f"sd={rows[-1].stddev_of_estimator:.3g}", file=sys.stderr)
    path = _emit(rows, ns)
    if path is not None and not ns.no_plot:
        plot_methods(rows, path.with_suffix(".png"), title=ns.preset)
    return 0


def cmd_validate(ns) -> int:
    net = load_model(ns.model)
    print(f"ok: {net.n_species} species, {net.n_reactions} reactions, "
          f"parameters {', '.join(net.param_names) or '(none)'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taupath",
                                     description="Sensitivity estimation for reaction networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="run one estimator")
    _scenario_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="repeat an estimate over tau_max, m0 or volume")
    _scenario_args(p)
    p.add_argument("--axis", required=True, choices=bench.SWEEP_AXES)
    p.add_argument("--values", required=True, type=_float_list)
    p.add_argument("--no-plot", action="store_true", help="skip the PNG written next to --out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="all methods on a bundled model at its reference settings")
    p.add_argument("--preset", required=True, choices=sorted(bench.PRESETS))
    p.add_argument("-N", type=int, default=10_000)
    p.add_argument("--methods", nargs="+", choices=bench.METHODS, default=list(bench.METHODS))
    p.add_argument("--params", nargs="+", default=None)
    p.add_argument("--m0", type=int, default=10)
    p.add_argument("--n0", type=int, default=1000)
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="parse-check a model file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (TaupathError, ValueError, FileNotFoundError, ArithmeticError) as exc:
        print(f"taupath: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
