"""Command line entry points.

Subcommands: simulate, gen-synthetic, estimate, report.  Exit code 0 on
success, 1 on input errors (named in the message), 2 when a solver fails
to converge; nonconvergent estimates still write their best iterate.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .errors import (
    GasNetError,
    InfeasibleDetected,
    NonConvergence,
    SingularJacobian,
    SingularKKT,
)
from .estimate import (
    EstimationOptions,
    Weights,
    load_weights,
    run_estimation,
)
from .network import parse_network
from .nondim import default_scales
from .refinement import refine_graph
from .report import (
    estimation_diagnostics,
    friction_rows,
    read_diagnostics,
    write_diagnostics,
    write_fit_rmse_csv,
    write_friction_csv,
    write_manifest,
    write_state_csv,
    write_withdrawals_csv,
)
from .simulate import (
    NoiseSpec,
    inject_noise,
    simulate_network,
    simulation_diagnostics,
)
from .timeseries import read_measurements, read_profiles, write_measurements

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2

_INPUT_ERRORS = (GasNetError,)
_SOLVER_ERRORS = (NonConvergence, SingularJacobian, SingularKKT, InfeasibleDetected)


def load_mask(path: str) -> tuple[str, ...]:
    """Metering mask file: one junction id per line, '#' starts a comment."""
    with open(path) as fh:
        ids = [
            line.strip() for line in fh
            if line.strip() and not line.lstrip().startswith("#")
        ]
    return tuple(ids)


def _add_grid_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--segment-length", type=float, default=10.0,
        help="target refinement spacing in km (default 10)",
    )
    parser.add_argument(
        "--nt", type=int, default=None,
        help="number of time grid points (default: the profile rows)",
    )


def _config_dict(args: argparse.Namespace, keys: tuple[str, ...]) -> dict:
    return {key: getattr(args, key.replace("-", "_")) for key in keys}


def cmd_simulate(args: argparse.Namespace) -> int:
    network = parse_network(args.network)
    profiles = read_profiles(args.profiles, network)
    state, refined, dae = simulate_network(
        network, profiles, segment_length=args.segment_length * 1e3, n_steps=args.nt
    )
    os.makedirs(args.out, exist_ok=True)
    write_state_csv(os.path.join(args.out, "solution_state.csv"), refined, state)
    n = state.grid.n_steps
    withdrawal = np.zeros((len(network.nonslack_ids()), n))
    for i, jid in enumerate(network.nonslack_ids()):
        if jid in profiles.withdrawal:
            from .timeseries import resample_periodic

            withdrawal[i] = resample_periodic(profiles.withdrawal[jid], n) / refined.scales.flux
    write_withdrawals_csv(
        os.path.join(args.out, "solution_withdrawals.csv"),
        network, refined, withdrawal, state.grid.dt * refined.scales.time,
    )
    diag = simulation_diagnostics(dae, state, withdrawal)
    write_diagnostics(os.path.join(args.out, "diagnostics.json"), diag)
    write_manifest(
        os.path.join(args.out, "manifest.json"),
        {"network": args.network, "profiles": args.profiles},
        _config_dict(args, ("segment_length", "nt")) | _scales_config(refined),
    )
    print(
        "simulate: %d nodes, %d segments, %d steps, residual %.2e, "
        "conservation defect %.2e, lumping ratio %.3f"
        % (refined.n_nodes, refined.n_edges, n, diag["residual_inf"],
           diag["conservation_defect"], diag["lumping_ratio_max"])
    )
    return EXIT_OK


def _scales_config(refined) -> dict:
    s = refined.scales
    return {"scales": {"length": s.length, "density": s.density, "sound_speed": s.sound_speed}}


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    network = parse_network(args.network)
    profiles = read_profiles(args.profiles, network)
    metered = load_mask(args.mask) if args.mask else None
    state, refined, dae = simulate_network(
        network, profiles, segment_length=args.segment_length * 1e3, n_steps=args.nt
    )
    ndprof_ratio = {
        cid: np.interp(
            np.arange(state.grid.n_steps) / state.grid.n_steps,
            np.arange(len(profiles.ratio[cid]) + 1) / len(profiles.ratio[cid]),
            np.append(profiles.ratio[cid], profiles.ratio[cid][0]),
        )
        for cid in profiles.ratio
    }
    noise = NoiseSpec(
        density_rel=args.noise_density,
        withdrawal_rel=args.noise_withdrawal,
        seed=args.seed,
    )
    from .nondim import nondimensionalize_profiles

    scales = refined.scales
    ndprof = nondimensionalize_profiles(network, profiles, scales, args.nt)
    measured = inject_noise(state, ndprof, noise, refined, network, metered)
    known_dt = measured.dt_seconds
    from .timeseries import KnownBoundaries

    known = KnownBoundaries(dt_seconds=known_dt)
    for i, sid in enumerate(network.slack_ids()):
        known.supply_density[sid] = ndprof.supply[i] * scales.density
    for cid, series in ndprof_ratio.items():
        known.ratio[cid] = series
    os.makedirs(args.out, exist_ok=True)
    write_measurements(os.path.join(args.out, "measurements.csv"), measured, known)
    write_state_csv(os.path.join(args.out, "truth_state.csv"), refined, state)
    write_manifest(
        os.path.join(args.out, "manifest.json"),
        {"network": args.network, "profiles": args.profiles}
        | ({"mask": args.mask} if args.mask else {}),
        _config_dict(args, ("segment_length", "nt", "seed"))
        | {"noise_density": args.noise_density, "noise_withdrawal": args.noise_withdrawal}
        | _scales_config(refined),
    )
    print(
        "gen-synthetic: wrote measurements for %d junctions at %d steps (seed %d)"
        % (len(measured.density), state.grid.n_steps, args.seed)
    )
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    network = parse_network(args.network)
    measured, known = read_measurements(args.measurements, network)
    if args.mask:
        keep = set(load_mask(args.mask))
        unknown = keep - set(network.nonslack_ids())
        if unknown:
            raise GasNetError(
                "mask file %s names unknown junctions %s" % (args.mask, sorted(unknown))
            )
        measured.density = {k: v for k, v in measured.density.items() if k in keep}
        measured.withdrawal = {k: v for k, v in measured.withdrawal.items() if k in keep}
    weights = load_weights(args.weights) if args.weights else Weights()
    options = EstimationOptions(
        tol=args.tol,
        max_iter=args.max_iter,
        segment_length=args.segment_length * 1e3,
        n_steps=args.nt,
    )
    scales = default_scales(network.gas)
    solution, problem, _ = run_estimation(
        network, measured, known, scales, weights, options
    )
    os.makedirs(args.out, exist_ok=True)
    refined = problem.refined
    write_state_csv(os.path.join(args.out, "solution_state.csv"), refined, solution.state)
    write_withdrawals_csv(
        os.path.join(args.out, "solution_withdrawals.csv"),
        network, refined, solution.withdrawal,
        solution.state.grid.dt * refined.scales.time,
    )
    rows = friction_rows(refined, solution.friction)
    write_friction_csv(os.path.join(args.out, "friction_estimates.csv"), rows)
    diag = estimation_diagnostics(solution, problem)
    write_fit_rmse_csv(os.path.join(args.out, "fit_rmse.csv"), diag["junction_fit_rmse"])
    write_diagnostics(os.path.join(args.out, "diagnostics.json"), diag)
    write_manifest(
        os.path.join(args.out, "manifest.json"),
        {"network": args.network, "measurements": args.measurements}
        | ({"mask": args.mask} if args.mask else {})
        | ({"weights": args.weights} if args.weights else {}),
        _config_dict(args, ("tol", "max_iter", "segment_length", "nt"))
        | _scales_config(refined),
    )
    print(
        "estimate: %s after %d iterations, objective %.6e, KKT error %.2e "
        "(wall %.1f s)"
        % (solution.status, solution.iterations, solution.objective,
           solution.kkt_error, solution.wall_time)
    )
    return EXIT_OK if solution.converged else EXIT_SOLVER


def cmd_report(args: argparse.Namespace) -> int:
    network = parse_network(args.network)
    diag = read_diagnostics(os.path.join(args.solution, "diagnostics.json"))
    estimates = diag.get("friction_estimates")
    if estimates is None:
        raise GasNetError(
            "diagnostics in %s hold no friction estimates" % args.solution
        )
    scales = default_scales(network.gas)
    from .nondim import nondimensionalize_network

    refined = refine_graph(
        nondimensionalize_network(network, scales), args.segment_length * 1e3 / scales.length
    )
    friction = np.array([
        estimates[pid] for pid in refined.parent_pipe_ids
    ])
    rows = friction_rows(refined, friction)
    os.makedirs(args.out, exist_ok=True)
    write_friction_csv(os.path.join(args.out, "friction_estimates.csv"), rows)
    if diag.get("junction_fit_rmse"):
        write_fit_rmse_csv(os.path.join(args.out, "fit_rmse.csv"), diag["junction_fit_rmse"])
    print("pipe        length_km  prior      estimate   deviation")
    for row in rows:
        print(
            "%-10s %9.2f  %.6f  %.6f  %+8.4f"
            % (row["pipe"], row["length_km"], row["friction_prior"],
               row["friction_estimate"], row["relative_deviation"])
        )
    print(
        "report: %d pipes, max |deviation| %.4f, objective %.6e, converged %s"
        % (len(rows), max(abs(r["relative_deviation"]) for r in rows),
           diag.get("objective", float("nan")), diag.get("converged"))
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gasnet",
        description="Transient gas network simulation and friction estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="solve one period of the dynamics")
    p_sim.add_argument("--network", required=True)
    p_sim.add_argument("--profiles", required=True)
    p_sim.add_argument("--out", default=".")
    _add_grid_args(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_gen = sub.add_parser("gen-synthetic", help="simulate and sample noisy measurements")
    p_gen.add_argument("--network", required=True)
    p_gen.add_argument("--profiles", required=True)
    p_gen.add_argument("--noise-density", type=float, default=0.01)
    p_gen.add_argument("--noise-withdrawal", type=float, default=0.01)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--mask", default=None)
    p_gen.add_argument("--out", default=".")
    _add_grid_args(p_gen)
    p_gen.set_defaults(func=cmd_gen_synthetic)

    p_est = sub.add_parser("estimate", help="jointly estimate state and friction")
    p_est.add_argument("--network", required=True)
    p_est.add_argument("--measurements", required=True)
    p_est.add_argument("--mask", default=None)
    p_est.add_argument("--weights", default=None)
    p_est.add_argument("--tol", type=float, default=1e-4)
    p_est.add_argument("--max-iter", type=int, default=100)
    p_est.add_argument("--out", default=".")
    _add_grid_args(p_est)
    p_est.set_defaults(func=cmd_estimate)

    p_rep = sub.add_parser("report", help="regenerate report tables from a solution")
    p_rep.add_argument("--network", required=True)
    p_rep.add_argument("--solution", required=True, help="directory holding diagnostics.json")
    p_rep.add_argument("--out", default=".")
    p_rep.add_argument("--segment-length", type=float, default=10.0)
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _SOLVER_ERRORS as exc:
        print("solver failure: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER
    except _INPUT_ERRORS as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
