"""Command-line interface.

Subcommands:
    fit        estimate mixture parameters from a z-matrix file
    test       fit (or load) parameters, compute lfdrs, apply the rejection rule
    simulate   generate a scenario from a key=value config file
    audit      scan existing results for dominance/lfdr inconsistencies
    replicate  run a scenario end to end over replicates (and an optional grid)

Every run writes a manifest of key=value lines recording the subcommand and
all resolved options (never the output directory or timestamps), so
run_from_manifest() can reproduce a run byte for byte into a fresh directory.
Only a one-line summary is printed to stdout; results go to files.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, fileio
from .estimate import FitOptions, em_fit, estimate_correlation, symmetrize
from .inference import incongruence_audit, reject
from .model import ModelSpec, ZMatrix, lfdr_batch
from .simulate import ScenarioSpec, run_replicates, simulate

_GRID_STEP = 0.25
_GRID_LIMIT = 8.0


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _q_value(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"q must lie strictly between 0 and 1, got {text}")
    return value


def _m_counts(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_model_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", choices=("base", "correlated", "replication"),
                        default="base", help="model variant (default: base)")
    parser.add_argument("--k", type=_positive_int, default=None,
                        help="dimensions per set (default: inferred from the input)")
    parser.add_argument("--m-counts", type=_m_counts, default=None, metavar="M0,M1,...",
                        help="magnitude classes per pattern (default: one each)")
    parser.add_argument("--rho", type=float, default=None,
                        help="shared correlation for the correlated variant")
    parser.add_argument("--estimate-rho", action="store_true",
                        help="estimate the shared correlation from the input")
    parser.add_argument("--max-iter", type=_positive_int, default=10000,
                        help="EM iteration cap (default: 10000)")
    parser.add_argument("--tol", type=float, default=1e-8,
                        help="EM relative log-likelihood tolerance (default: 1e-8)")
    parser.add_argument("--symmetrize", action="store_true",
                        help="balance directional skew by random sign flips first")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compnull",
        description="Composite null testing for sets of z-statistics",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_fit = sub.add_parser("fit", help="estimate mixture parameters from a z-matrix")
    p_fit.add_argument("--input", required=True, help="z-matrix TSV (id, z_1..z_K)")
    p_fit.add_argument("--out-dir", required=True, help="output directory")
    p_fit.add_argument("--seed", type=int, default=0)
    _add_model_options(p_fit)

    p_test = sub.add_parser("test", help="compute lfdrs and apply the rejection rule")
    p_test.add_argument("--input", required=True, help="z-matrix TSV (id, z_1..z_K)")
    p_test.add_argument("--out-dir", required=True, help="output directory")
    p_test.add_argument("--params", default=None,
                        help="existing parameter document (skips fitting)")
    p_test.add_argument("--q", type=_q_value, default=0.1,
                        help="false discovery rate target (default: 0.1)")
    p_test.add_argument("--seed", type=int, default=0)
    _add_model_options(p_test)

    p_sim = sub.add_parser("simulate", help="generate a scenario")
    p_sim.add_argument("--scenario-config", required=True, help="key=value scenario file")
    p_sim.add_argument("--out-dir", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the seed in the scenario config")

    p_audit = sub.add_parser("audit", help="scan results for lfdr/dominance inconsistencies")
    p_audit.add_argument("--results", default=None,
                         help="results TSV from the test subcommand")
    p_audit.add_argument("--input", default=None, help="z-matrix TSV (with --params)")
    p_audit.add_argument("--params", default=None, help="parameter document (with --input)")
    p_audit.add_argument("--out-dir", required=True, help="output directory")
    p_audit.add_argument("--seed", type=int, default=0,
                         help="subsampling seed for very large inputs")

    p_rep = sub.add_parser("replicate", help="run a scenario end to end over replicates")
    p_rep.add_argument("--scenario-config", required=True, help="key=value scenario file")
    p_rep.add_argument("--out-dir", required=True, help="output directory")
    p_rep.add_argument("--replicates", type=_positive_int, default=1)
    p_rep.add_argument("--q", type=_q_value, default=0.1)
    p_rep.add_argument("--seed", type=int, default=None,
                       help="override the seed in the scenario config")
    _add_model_options(p_rep)
    return parser


def _model_spec_from_args(args, k: int, rho: float | None) -> ModelSpec:
    m_counts = args.m_counts if args.m_counts is not None else (1,) * 2**k
    return ModelSpec(
        k=k,
        variant=args.variant,
        m_counts=m_counts,
        rho=rho if args.variant == "correlated" else None,
    )


def _resolve_rho(args, zmat: ZMatrix) -> float | None:
    if args.variant != "correlated":
        if args.rho is not None or args.estimate_rho:
            raise ValueError("--rho/--estimate-rho require --variant correlated")
        return None
    if args.estimate_rho:
        if args.rho is not None:
            raise ValueError("give either --rho or --estimate-rho, not both")
        return estimate_correlation(zmat)
    if args.rho is None:
        raise ValueError("the correlated variant needs --rho or --estimate-rho")
    return args.rho


def _check_k(args, zmat: ZMatrix) -> int:
    if args.k is not None and args.k != zmat.k:
        raise ValueError(f"--k {args.k} does not match the input ({zmat.k} dimensions)")
    return zmat.k


def _model_manifest_entries(args) -> dict:
    return {
        "variant": args.variant,
        "k": "" if args.k is None else args.k,
        "m_counts": "" if args.m_counts is None else ",".join(map(str, args.m_counts)),
        "rho": "" if args.rho is None else args.rho,
        "estimate_rho": args.estimate_rho,
        "max_iter": args.max_iter,
        "tol": args.tol,
        "symmetrize": args.symmetrize,
    }


def _write_manifest(out_dir: Path, subcommand: str, entries: dict) -> None:
    manifest = {"tool": "compnull", "tool_version": __version__, "subcommand": subcommand}
    manifest.update(entries)
    fileio.write_manifest(out_dir / "manifest.txt", manifest)


def _prepare_input(args):
    zmat = fileio.read_zmatrix(args.input)
    if args.symmetrize:
        zmat, _ = symmetrize(zmat, seed=args.seed)
    k = _check_k(args, zmat)
    rho = _resolve_rho(args, zmat)
    return zmat, _model_spec_from_args(args, k, rho)


def cmd_fit(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    zmat, spec = _prepare_input(args)
    options = FitOptions(max_iterations=args.max_iter, tolerance=args.tol, seed=args.seed)
    fit = em_fit(zmat, spec, options)
    fileio.write_params(out_dir / "params.json", spec, fit.params, fit.loglik_trace)
    _write_manifest(out_dir, "fit", {"input": args.input, "seed": args.seed,
                                     **_model_manifest_entries(args)})
    print(
        f"fit: rows={len(zmat)} k={spec.k} variant={spec.variant} "
        f"converged={fit.converged} iterations={fit.iterations} "
        f"loglik={fit.loglik_trace[-1]:.6f}"
    )
    return 0


def _write_lfdr_curve(path, lfdrs: np.ndarray) -> None:
    order = np.sort(lfdrs)
    running = np.cumsum(order) / np.arange(1, order.size + 1)
    rows = [
        {"rank": i + 1, "lfdr": order[i], "running_mean": running[i]}
        for i in range(order.size)
    ]
    fileio.write_table(path, ["rank", "lfdr", "running_mean"], rows)


def _write_lfdr_grid(path, spec: ModelSpec, params) -> None:
    ticks = np.arange(-_GRID_LIMIT, _GRID_LIMIT + _GRID_STEP / 2, _GRID_STEP)
    z1, z2 = np.meshgrid(ticks, ticks, indexing="ij")
    grid = np.column_stack([z1.ravel(), z2.ravel()])
    values = lfdr_batch(grid, spec, params)
    rows = [
        {"z_1": grid[i, 0], "z_2": grid[i, 1], "lfdr": values[i]}
        for i in range(grid.shape[0])
    ]
    fileio.write_table(path, ["z_1", "z_2", "lfdr"], rows)


def cmd_test(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.params is not None:
        zmat = fileio.read_zmatrix(args.input)
        if args.symmetrize:
            zmat, _ = symmetrize(zmat, seed=args.seed)
        spec, params, trace = fileio.read_params(args.params)
        if spec.k != zmat.k:
            raise ValueError(
                f"parameter document is for K={spec.k} but the input has K={zmat.k}"
            )
    else:
        zmat, spec = _prepare_input(args)
        options = FitOptions(max_iterations=args.max_iter, tolerance=args.tol, seed=args.seed)
        fit = em_fit(zmat, spec, options)
        params, trace = fit.params, fit.loglik_trace
    lfdrs = lfdr_batch(zmat, spec, params)
    decision = reject(lfdrs, args.q)
    fileio.write_results(out_dir / "results.tsv", zmat, lfdrs, decision.rejected)
    fileio.write_params(out_dir / "params.json", spec, params, trace)
    _write_lfdr_curve(out_dir / "lfdr_curve.tsv", lfdrs)
    if spec.k == 2:
        _write_lfdr_grid(out_dir / "lfdr_grid.tsv", spec, params)
    _write_manifest(out_dir, "test", {"input": args.input,
                                      "params": args.params or "",
                                      "q": args.q, "seed": args.seed,
                                      **_model_manifest_entries(args)})
    print(
        f"test: rows={len(zmat)} rejected={decision.n_rejected} "
        f"threshold_rank={decision.threshold_rank} q={args.q:g}"
    )
    return 0


def cmd_simulate(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario, _ = fileio.read_scenario_config(args.scenario_config)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    sim = simulate(scenario)
    fileio.write_sim_output(out_dir, sim)
    _write_manifest(out_dir, "simulate", {
        "scenario_config": args.scenario_config,
        "seed": "" if args.seed is None else args.seed,
    })
    print(
        f"simulate: kind={scenario.kind} rows={scenario.n_sets} k={scenario.k} "
        f"mode={scenario.mode} regenerated={sim.n_regenerated}"
    )
    return 0


def cmd_audit(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.results is not None:
        if args.input is not None or args.params is not None:
            raise ValueError("give either --results or --input with --params")
        zmat, lfdrs, _ = fileio.read_results(args.results)
    else:
        if args.input is None or args.params is None:
            raise ValueError("audit needs --results, or --input together with --params")
        zmat = fileio.read_zmatrix(args.input)
        spec, params, _ = fileio.read_params(args.params)
        lfdrs = lfdr_batch(zmat, spec, params)
    report = incongruence_audit(zmat, lfdrs, seed=args.seed)
    rows = [
        {
            "row_more_extreme": zmat.ids[i],
            "row_less_extreme": zmat.ids[j],
            "lfdr_more_extreme": lf_i,
            "lfdr_less_extreme": lf_j,
        }
        for i, j, lf_i, lf_j in report.witness_pairs
    ]
    fileio.write_table(
        out_dir / "audit.tsv",
        ["row_more_extreme", "row_less_extreme", "lfdr_more_extreme", "lfdr_less_extreme"],
        rows,
    )
    _write_manifest(out_dir, "audit", {
        "results": args.results or "",
        "input": args.input or "",
        "params": args.params or "",
        "seed": args.seed,
    })
    print(
        f"audit: rows={len(zmat)} scanned={report.scanned_rows} "
        f"subsampled={report.subsampled} incongruous={report.incongruous_count}"
    )
    return 0


_METRIC_COLUMNS = [
    "grid_param", "grid_value", "replicate", "seed", "failed", "converged",
    "iterations", "n_rejected", "fdp", "power", "incongruous", "n_regenerated",
]
_SUMMARY_COLUMNS = [
    "grid_param", "grid_value", "n_replicates", "n_failed",
    "mean_fdp", "mean_power", "mean_rejected", "mean_incongruous",
]


def cmd_replicate(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario, extra = fileio.read_scenario_config(args.scenario_config)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    grid_param = extra.get("grid_param", "")
    if grid_param:
        if grid_param not in ScenarioSpec.__dataclass_fields__:
            raise ValueError(f"unknown grid parameter {grid_param!r}")
        grid_values = [float(v) for v in extra.get("grid_values", "").split(",") if v]
        if not grid_values:
            raise ValueError("grid_param without grid_values")
    else:
        grid_values = [None]

    rho = args.rho
    if args.variant == "correlated" and rho is None and not args.estimate_rho:
        raise ValueError("the correlated variant needs --rho or --estimate-rho")
    spec = ModelSpec(
        k=scenario.k,
        variant=args.variant,
        m_counts=args.m_counts if args.m_counts is not None else (1,) * 2**scenario.k,
        rho=rho if args.variant == "correlated" else None,
    )
    if args.k is not None and args.k != scenario.k:
        raise ValueError(f"--k {args.k} does not match the scenario ({scenario.k} dimensions)")
    options = FitOptions(max_iterations=args.max_iter, tolerance=args.tol)

    metric_rows = []
    summary_rows = []
    for gi, value in enumerate(grid_values):
        point = scenario
        if value is not None:
            field_type = type(getattr(scenario, grid_param))
            point = replace(scenario, **{grid_param: field_type(value)})
        point = replace(point, seed=point.seed + gi * args.replicates)
        result = run_replicates(
            point,
            spec,
            fit_options=options,
            q=args.q,
            n_replicates=args.replicates,
            symmetrize=args.symmetrize,
            estimate_rho=args.estimate_rho,
        )
        label = grid_param or ""
        shown = "" if value is None else value
        for row in result.rows:
            metric_rows.append({"grid_param": label, "grid_value": shown, **row})
        summary_rows.append({
            "grid_param": label,
            "grid_value": shown,
            "n_replicates": result.means["n_replicates"],
            "n_failed": result.means["n_failed"],
            "mean_fdp": result.means["fdp"],
            "mean_power": result.means["power"],
            "mean_rejected": result.means["n_rejected"],
            "mean_incongruous": result.means["incongruous"],
        })
    fileio.write_table(out_dir / "metrics.tsv", _METRIC_COLUMNS, metric_rows)
    fileio.write_table(out_dir / "summary.tsv", _SUMMARY_COLUMNS, summary_rows)
    _write_manifest(out_dir, "replicate", {
        "scenario_config": args.scenario_config,
        "replicates": args.replicates,
        "q": args.q,
        "seed": "" if args.seed is None else args.seed,
        **_model_manifest_entries(args),
    })
    overall = summary_rows[-1]
    print(
        f"replicate: grid_points={len(grid_values)} replicates={args.replicates} "
        f"mean_fdp={overall['mean_fdp']:.4f} mean_power={overall['mean_power']:.4f}"
    )
    return 0


_COMMANDS = {
    "fit": cmd_fit,
    "test": cmd_test,
    "simulate": cmd_simulate,
    "audit": cmd_audit,
    "replicate": cmd_replicate,
}

# manifest keys that map back to boolean flags
_FLAG_KEYS = {"estimate_rho", "symmetrize"}

# manifest keys that are informational, not CLI options
_INFO_KEYS = {"tool", "tool_version", "subcommand"}


def run_from_manifest(manifest_path, out_dir) -> int:
    """Re-run a recorded invocation into a fresh output directory.

    Inputs are read from the same paths recorded in the manifest; with an
    unchanged environment the rewritten outputs are byte-identical.
    """
    entries = fileio.read_manifest(manifest_path)
    if entries.get("tool") != "compnull" or "subcommand" not in entries:
        raise ValueError(f"{manifest_path}: not a compnull manifest")
    argv = [entries["subcommand"], "--out-dir", str(out_dir)]
    for key, value in entries.items():
        if key in _INFO_KEYS or value == "":
            continue
        flag = "--" + key.replace("_", "-")
        if key in _FLAG_KEYS:
            if value == "1":
                argv.append(flag)
        else:
            argv.extend([flag, value])
    return main(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.subcommand](args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
