"""Command-line interface.

Subcommands: ``simulate`` (config to panel+truth files), ``estimate``
(panel to matrix CSV), ``regularize`` (band/threshold a matrix), ``eigen``
(spectrum CSV), ``calibrate`` (threshold-level selection over daily
matrices), and ``bench mse|convergence|mp|permutation`` (study reports).
Reports are CSV; ``--summary`` additionally prints an aligned text table.
Exits 0 on success, 1 with a single ``error: ...`` line on stderr on
failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import harness, regularize
from ._backend import backend_name
from .estimator import (
    arvm_estimate,
    read_matrix_csv,
    write_matrix_csv,
    write_matrix_triplets,
    write_noise_csv,
)
from .panel import load_panel, write_panel
from .simulate import SimConfig, sim_config_from_json, simulate_scenario


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def cmd_simulate(args) -> int:
    config = sim_config_from_json(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    panel, truth = simulate_scenario(config)
    write_panel(panel, args.out_panel)
    write_matrix_csv(truth.gamma_truth, args.out_truth)
    print(
        f"simulated p={config.p} n={config.n} kappa0={config.kappa0} "
        f"{config.sync_mode} noise={config.noise_level} seed={config.seed} "
        f"backend={backend_name()}"
    )
    return 0


def cmd_estimate(args) -> int:
    panel = load_panel(args.panel)
    n = panel.avg_sample_size
    if (args.m is None) == (args.K is None):
        raise ValueError("exactly one of --m and --K must be given")
    m = args.m if args.m is not None else n // args.K
    est, eta = arvm_estimate(panel, m)
    write_matrix_csv(est, args.out)
    if args.noise_out:
        write_noise_csv(eta, args.noise_out, asset_ids=panel.asset_ids)
    print(f"estimated p={panel.p} n={n} m={m} K={est.meta['K']} -> {args.out}")
    return 0


def cmd_regularize(args) -> int:
    vm = read_matrix_csv(args.matrix)
    modes = [args.band is not None, args.threshold is not None, args.quantile is not None]
    if sum(modes) != 1:
        raise ValueError("exactly one of --band, --threshold, --quantile must be given")
    if args.band is not None:
        out = regularize.band(vm, args.band)
        desc = f"band b={args.band}"
    elif args.threshold is not None:
        out = regularize.threshold(vm, args.threshold)
        desc = f"threshold w={args.threshold}"
    else:
        w = regularize.quantile_threshold(vm, args.quantile)
        out = regularize.threshold(vm, w)
        desc = f"quantile a={args.quantile} (w={w:g})"
    if args.sparse:
        write_matrix_triplets(out, args.out)
    else:
        write_matrix_csv(out, args.out)
    kept = int(np.count_nonzero(out.values))
    print(f"{desc}: kept {kept}/{out.p * out.p} entries -> {args.out}")
    return 0


def cmd_eigen(args) -> int:
    vm = read_matrix_csv(args.matrix)
    diag = regularize.eigen_diagnostics(vm)
    diag.to_csv(args.out)
    print(f"largest eigenvalue {diag.largest:g}; spectrum -> {args.out}")
    return 0


def cmd_calibrate(args) -> int:
    matrices = [read_matrix_csv(p) for p in args.matrices]
    a_grid = _parse_floats(args.a_grid) if args.a_grid else harness.default_a_grid()
    result = regularize.calibrate_threshold_lambda(matrices, a_grid)
    result.to_csv(args.out)
    print(f"selected a* = {result.a_star:g}; lambda curve -> {args.out}")
    if args.summary:
        rows = [[f"{a:g}", f"{result.lambda_values[a]:.6g}"] for a in sorted(result.lambda_values)]
        print(harness.format_table(["a", "lambda"], rows))
    return 0


def cmd_bench_mse(args) -> int:
    config = harness.experiment_config_from_json(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    table = harness.run_mse_study(config)
    table.to_csv(args.out)
    print(f"mse study ({len(table.rows)} cells, {table.repetitions} reps) -> {args.out}")
    if args.summary:
        print(table.summary())
    return 0


def cmd_bench_convergence(args) -> int:
    rule = "n_two_thirds" if args.mode == "noisy" else "n_one_third"
    spec = harness.ConvergenceSpec(
        n_list=_parse_ints(args.n_list), K_rule=rule, reps_per_n=args.reps, seed=args.seed or 0
    )
    report = harness.run_convergence_study(spec)
    report.to_csv(args.out)
    print(f"convergence study ({args.mode}) slope {report.slope:.4f} -> {args.out}")
    if args.summary:
        print(report.summary())
    return 0


def cmd_bench_mp(args) -> int:
    report = harness.run_mp_sanity(args.n, args.p, args.reps, seed=args.seed or 0)
    report.to_csv(args.out)
    print(
        f"mean largest eigenvalue {report.mean_largest:.4f} "
        f"(reference {report.reference:.4f}) -> {args.out}"
    )
    if args.summary:
        print(report.summary())
    return 0


def cmd_bench_permutation(args) -> int:
    config = harness.experiment_config_from_json(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    report = harness.run_permutation_study(config)
    report.to_csv(args.out)
    ratios = {r.estimator: r.ratio for r in report.rows}
    print(f"permutation study ratios {ratios} -> {args.out}")
    if args.summary:
        print(report.summary())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hfvol",
        description="Large integrated volatility matrix estimation from noisy tick data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a panel and its ground truth")
    p.add_argument("--config", required=True, help="SimConfig JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out-panel", required=True)
    p.add_argument("--out-truth", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="ARVM estimate from a tick panel CSV")
    p.add_argument("--panel", required=True)
    p.add_argument("--m", type=int, default=None, help="pre-sampling grid size")
    p.add_argument("--K", type=int, default=None, help="number of grid classes (m = floor(n/K))")
    p.add_argument("--out", required=True)
    p.add_argument("--noise-out", default=None, help="also write per-asset noise variances")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("regularize", help="band or threshold a matrix CSV")
    p.add_argument("--matrix", required=True)
    p.add_argument("--band", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--quantile", type=float, default=None)
    p.add_argument("--sparse", action="store_true", help="write sparse i,j,value triplets")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regularize)

    p = sub.add_parser("eigen", help="spectrum of a matrix CSV, negatives truncated")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("calibrate", help="select a threshold quantile level over daily matrices")
    p.add_argument("--matrices", nargs="+", required=True)
    p.add_argument("--a-grid", default=None, help="comma-separated levels in (0,1)")
    p.add_argument("--summary", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    bench = sub.add_parser("bench", help="Monte Carlo studies")
    bsub = bench.add_subparsers(dest="study", required=True)

    p = bsub.add_parser("mse", help="MSE study over a factor grid")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--summary", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_mse)

    p = bsub.add_parser("convergence", help="single-asset convergence-rate study")
    p.add_argument("--mode", choices=("noisy", "noiseless"), required=True)
    p.add_argument("--n-list", default="256,512,1024,2048,4096")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--summary", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_convergence)

    p = bsub.add_parser("mp", help="largest-eigenvalue sanity check vs (1+sqrt(p/n))^2")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--summary", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_mp)

    p = bsub.add_parser("permutation", help="joint permutation experiment")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--summary", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench_permutation)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as err:  # surface one machine-readable line, exit nonzero
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
