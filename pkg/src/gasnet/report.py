"""Solution artifacts: CSV tables, diagnostics and the run manifest.

Artifacts are deterministic: identical inputs and configuration produce
byte-identical files.  Timing therefore never enters an artifact; wall
time lives on the solution object and in console output only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys

import numpy as np
import scipy

from . import __version__
from .errors import MalformedFile, SchemaViolation
from .estimate import EstimationProblem, EstimationSolution
from .network import GasNetwork
from .nondim import SpaceTimeState, redimensionalize_state
from .refinement import RefinedNetwork


def write_state_csv(path: str, refined: RefinedNetwork, state: SpaceTimeState) -> None:
    """Densities (kg/m3) at every refined node and fluxes (kg/m2/s) per edge."""
    from .timeseries import write_state_table

    dim = redimensionalize_state(state, refined.scales)
    dt = float(dim.times_seconds[1] - dim.times_seconds[0])
    write_state_table(path, dt, refined.node_ids, refined.edge_ids, dim.density, dim.flux)


def write_withdrawals_csv(
    path: str, network: GasNetwork, refined: RefinedNetwork, withdrawal: np.ndarray,
    dt_seconds: float,
) -> None:
    """Withdrawal series (kg/s) for the original non-slack junctions."""
    from .timeseries import _write_table

    flux_scale = refined.scales.flux
    columns = [
        ("d:" + jid, withdrawal[i] * flux_scale)
        for i, jid in enumerate(network.nonslack_ids())
    ]
    _write_table(path, dt_seconds, columns)


def friction_rows(refined: RefinedNetwork, friction: np.ndarray) -> list[dict]:
    rows = []
    for p, pid in enumerate(refined.parent_pipe_ids):
        prior = float(refined.parent_friction[p])
        est = float(friction[p])
        rows.append({
            "pipe": pid,
            "length_km": float(refined.parent_length[p] * refined.scales.length / 1e3),
            "friction_prior": prior,
            "friction_estimate": est,
            "relative_deviation": (est - prior) / prior,
        })
    return rows


def write_friction_csv(path: str, rows: list[dict]) -> None:
    header = ["pipe", "length_km", "friction_prior", "friction_estimate", "relative_deviation"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row["pipe"]] + [repr(float(row[k])) for k in header[1:]])


def read_friction_csv(path: str) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
    except OSError as exc:
        raise MalformedFile("cannot read %s: %s" % (path, exc)) from exc
    out = []
    for row in rows:
        out.append({
            "pipe": row["pipe"],
            "length_km": float(row["length_km"]),
            "friction_prior": float(row["friction_prior"]),
            "friction_estimate": float(row["friction_estimate"]),
            "relative_deviation": float(row["relative_deviation"]),
        })
    return out


def estimation_diagnostics(
    solution: EstimationSolution, problem: EstimationProblem
) -> dict:
    """Deterministic solver and fit statistics for diagnostics.json."""
    refined = problem.refined
    rows = friction_rows(refined, solution.friction)
    deviations = np.array([abs(r["relative_deviation"]) for r in rows])
    diag = {
        "converged": bool(solution.converged),
        "status": solution.status,
        "objective": float(solution.objective),
        "kkt_error": float(solution.kkt_error),
        "constraint_inf": float(solution.constraint_inf),
        "iterations": int(solution.iterations),
        "friction_estimates": {r["pipe"]: r["friction_estimate"] for r in rows},
        "friction_rel_deviation_max": float(deviations.max()),
        "friction_rel_deviation_median": float(np.median(deviations)),
        "lumping_ratio_max": problem.dae.lumping_ratio(solution.state),
    }
    rho_mask = problem.rho_weight > 0.0
    if np.any(rho_mask):
        err = solution.state.density[rho_mask] - problem.rho_target[rho_mask]
        diag["density_fit_rmse"] = float(np.sqrt(np.mean(err**2)))
    d_mask = problem.d_weight > 0.0
    if np.any(d_mask):
        err = solution.withdrawal[d_mask] - problem.d_target[d_mask]
        diag["withdrawal_fit_rmse"] = float(np.sqrt(np.mean(err**2)))
    diag["junction_fit_rmse"] = junction_fit_rows(solution, problem)
    return diag


def junction_fit_rows(
    solution: EstimationSolution, problem: EstimationProblem
) -> dict[str, dict[str, float]]:
    """Per-junction fit RMSE in physical units for every metered junction."""
    refined = problem.refined
    scales = refined.scales
    table: dict[str, dict[str, float]] = {}
    for i in range(refined.n_original - refined.n_slack):
        jid = refined.node_ids[refined.n_slack + i]
        entry = {}
        if problem.rho_weight[i] > 0.0:
            err = solution.state.density[i] - problem.rho_target[i]
            entry["density_rmse"] = float(np.sqrt(np.mean(err**2)) * scales.density)
        if problem.d_weight[i] > 0.0:
            err = solution.withdrawal[i] - problem.d_target[i]
            entry["withdrawal_rmse"] = float(np.sqrt(np.mean(err**2)) * scales.flux)
        if entry:
            table[jid] = entry
    return table


def write_fit_rmse_csv(path: str, table: dict[str, dict[str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["junction", "density_rmse", "withdrawal_rmse"])
        for jid in sorted(table):
            entry = table[jid]
            writer.writerow([
                jid,
                repr(entry["density_rmse"]) if "density_rmse" in entry else "",
                repr(entry["withdrawal_rmse"]) if "withdrawal_rmse" in entry else "",
            ])


def write_diagnostics(path: str, diagnostics: dict) -> None:
    with open(path, "w") as fh:
        json.dump(diagnostics, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_diagnostics(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise MalformedFile("cannot read %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile("%s is not valid JSON: %s" % (path, exc)) from exc
    if not isinstance(data, dict):
        raise SchemaViolation("%s does not hold a diagnostics object" % path)
    return data


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path: str, inputs: dict[str, str], config: dict) -> None:
    """Record input hashes, configuration and library versions."""
    manifest = {
        "inputs": {name: _sha256(p) for name, p in sorted(inputs.items())},
        "config": config,
        "versions": {
            "gasnet": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": "%d.%d.%d" % sys.version_info[:3],
        },
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise MalformedFile("cannot read %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile("%s is not valid JSON: %s" % (path, exc)) from exc
