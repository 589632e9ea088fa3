"""Joint state and friction estimation from periodic measurements.

The decision vector stacks the full space-time state (non-slack densities
and edge fluxes at every grid point), the withdrawal series of every
original non-slack junction, and one friction factor per parent pipe
shared by all of its segments.  The network dynamics enter as equality
constraints, density boxes and friction trust bounds as inequalities, and
the objective is the period integral of weighted squared misfits against
the measured series.  Junctions without measurements carry zero weight but
keep free withdrawal variables, so unmetered demand is reconstructed
rather than assumed.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dae import CircularDae
from .errors import InfeasibleBoxes, MalformedFile, NonConvergence, SchemaViolation
from .ipsolver import IpResult, solve
from .network import GasNetwork
from .nondim import NondimProfiles, Scales, SpaceTimeState, nondimensionalize_network
from .refinement import RefinedNetwork, refine_graph
from .simulate import DEFAULT_SEGMENT_LENGTH, average_boundary, steady_state_solve
from .timeseries import (
    KnownBoundaries,
    MeasurementSet,
    TimeGrid,
    resample_periodic,
)

logger = logging.getLogger(__name__)

FRICTION_LOWER = 0.2
FRICTION_UPPER = 5.0
WITHDRAWAL_BOUND_FACTOR = 10.0


@dataclass(frozen=True)
class Weights:
    """Per-junction misfit weights; scalars apply to every junction."""

    density: dict[str, float] | float = 1.0
    withdrawal: dict[str, float] | float = 1.0

    def density_for(self, jid: str) -> float:
        return _resolve(self.density, jid)

    def withdrawal_for(self, jid: str) -> float:
        return _resolve(self.withdrawal, jid)


def _resolve(spec, jid: str) -> float:
    if isinstance(spec, dict):
        return float(spec.get(jid, spec.get("default", 1.0)))
    return float(spec)


def load_weights(path: str) -> Weights:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise MalformedFile("cannot read weights file %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile("weights file %s is not valid JSON: %s" % (path, exc)) from exc
    if not isinstance(data, dict) or set(data) - {"density", "withdrawal"}:
        raise SchemaViolation(
            "weights file %s must hold only 'density' and 'withdrawal'" % path
        )
    return Weights(
        density=data.get("density", 1.0), withdrawal=data.get("withdrawal", 1.0)
    )


@dataclass(frozen=True)
class EstimationOptions:
    tol: float = 1e-4
    max_iter: int = 100
    mu_init: float = 1e-2
    segment_length: float = DEFAULT_SEGMENT_LENGTH
    n_steps: int | None = None
    friction_lower: float = FRICTION_LOWER
    friction_upper: float = FRICTION_UPPER
    withdrawal_bound_factor: float = WITHDRAWAL_BOUND_FACTOR


@dataclass
class EstimationProblem:
    """Dimensionless least-squares problem over one period."""

    refined: RefinedNetwork
    dae: CircularDae
    grid: TimeGrid
    rho_target: np.ndarray
    rho_weight: np.ndarray
    d_target: np.ndarray
    d_weight: np.ndarray
    d_lower: np.ndarray
    d_upper: np.ndarray
    friction_prior: np.ndarray
    friction_lower: np.ndarray
    friction_upper: np.ndarray
    metered_density: tuple[str, ...] = field(default_factory=tuple)
    metered_withdrawal: tuple[str, ...] = field(default_factory=tuple)


def evaluate_objective(
    problem: EstimationProblem, density: np.ndarray, withdrawal: np.ndarray
) -> float:
    """Period integral of the weighted squared misfits (uniform rule)."""
    dt = problem.grid.dt
    rho_part = problem.rho_weight[:, None] * (density - problem.rho_target) ** 2
    d_part = problem.d_weight[:, None] * (withdrawal - problem.d_target) ** 2
    return float(dt * (rho_part.sum() + d_part.sum()))


def build_estimation_problem(
    network: GasNetwork,
    refined: RefinedNetwork,
    profiles: NondimProfiles,
    measurements: MeasurementSet,
    weights: Weights | None = None,
    options: EstimationOptions | None = None,
) -> EstimationProblem:
    """Assemble targets, weights and bounds in the refined index space.

    Measurement series are rescaled by the refined network's scales and
    resampled periodically onto the profile grid.  Missing series leave
    zero weight; their junctions stay in the problem as free unknowns.
    """
    options = options or EstimationOptions()
    weights = weights or Weights()
    scales = refined.scales
    dae = CircularDae(refined, profiles)
    grid = profiles.grid
    N = grid.n_steps
    b = refined.n_slack
    M, M0 = dae.M, dae.M0

    jindex = network.junction_index
    rho_target = np.zeros((M, N))
    rho_weight = np.zeros(M)
    for jid in sorted(measurements.density):
        row = jindex[jid] - b
        rho_target[row] = resample_periodic(measurements.density[jid], N) / scales.density
        rho_weight[row] = weights.density_for(jid)
    d_target = np.zeros((M0, N))
    d_weight = np.zeros(M0)
    for jid in sorted(measurements.withdrawal):
        row = jindex[jid] - b
        d_target[row] = resample_periodic(measurements.withdrawal[jid], N) / scales.flux
        d_weight[row] = weights.withdrawal_for(jid)

    observed = np.abs(d_target[d_weight > 0.0])
    if observed.size:
        bound = options.withdrawal_bound_factor * float(np.max(observed))
        d_lower = np.full(M0, -bound)
        d_upper = np.full(M0, bound)
    else:
        d_lower = np.full(M0, -np.inf)
        d_upper = np.full(M0, np.inf)
    if np.any(d_lower >= d_upper):
        raise InfeasibleBoxes("withdrawal bounds have empty interior")

    prior = refined.parent_friction.copy()
    return EstimationProblem(
        refined=refined,
        dae=dae,
        grid=grid,
        rho_target=rho_target,
        rho_weight=rho_weight,
        d_target=d_target,
        d_weight=d_weight,
        d_lower=d_lower,
        d_upper=d_upper,
        friction_prior=prior,
        friction_lower=options.friction_lower * prior,
        friction_upper=options.friction_upper * prior,
        metered_density=tuple(sorted(measurements.density)),
        metered_withdrawal=tuple(sorted(measurements.withdrawal)),
    )


class EstimationNlp:
    """SparseNlp view of an EstimationProblem.

    The solver sees friction variables divided by their prior, so every
    bounded variable lives on an O(1) box and a common fraction-to-boundary
    rule treats them evenly.  pack/unpack translate between physical values
    and the scaled decision vector.
    """

    def __init__(self, problem: EstimationProblem):
        self.problem = problem
        dae = problem.dae
        self.dae = dae
        self.layout = dae.layout(with_controls=True)
        self.n = self.layout.n_columns
        M, E, M0, P, N = dae.M, dae.E, dae.M0, dae.P, dae.N
        b = problem.refined.n_slack
        self.scale = np.ones(self.n)
        self.scale[self.layout.off_friction:] = problem.friction_prior
        lower = np.concatenate([
            np.tile(problem.refined.rho_min[b:], N),
            np.full(E * N, -np.inf),
            np.tile(problem.d_lower, N),
            problem.friction_lower,
        ])
        upper = np.concatenate([
            np.tile(problem.refined.rho_max[b:], N),
            np.full(E * N, np.inf),
            np.tile(problem.d_upper, N),
            problem.friction_upper,
        ])
        self.lower = lower / self.scale
        self.upper = upper / self.scale
        dt = problem.grid.dt
        self._hobj = np.concatenate([
            np.tile(2.0 * dt * problem.rho_weight, N),
            np.zeros(E * N),
            np.tile(2.0 * dt * problem.d_weight, N),
            np.zeros(P),
        ])
        self._target = np.concatenate([
            problem.rho_target.T.ravel(),
            np.zeros(E * N),
            problem.d_target.T.ravel(),
            np.zeros(P),
        ])

    def pack(self, density, flux, withdrawal, friction) -> np.ndarray:
        """Physical blocks to the scaled decision vector."""
        return np.concatenate([
            density.T.ravel(), flux.T.ravel(), withdrawal.T.ravel(), friction,
        ]) / self.scale

    def unpack(self, x: np.ndarray):
        """Scaled decision vector to physical blocks."""
        dae = self.dae
        M, E, M0, N = dae.M, dae.E, dae.M0, dae.N
        xp = x * self.scale
        density = xp[: M * N].reshape(N, M).T
        flux = xp[M * N: (M + E) * N].reshape(N, E).T
        withdrawal = xp[(M + E) * N: (M + E) * N + M0 * N].reshape(N, M0).T
        friction = xp[self.layout.off_friction:]
        return density, flux, withdrawal, friction

    def objective(self, x: np.ndarray) -> float:
        diff = x * self.scale - self._target
        return float(0.5 * (self._hobj * diff) @ diff)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.scale * (self._hobj * (x * self.scale - self._target))

    def constraints(self, x: np.ndarray) -> np.ndarray:
        density, flux, withdrawal, friction = self.unpack(x)
        return self.dae.residual(density, flux, withdrawal, friction, smooth=True)

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        density, flux, _, friction = self.unpack(x)
        J = self.dae.jacobian(density, flux, friction, with_controls=True, smooth=True)
        return (J @ sp.diags(self.scale)).tocsr()

    def hessian(self, x: np.ndarray, y: np.ndarray) -> sp.csr_matrix:
        _, flux, _, friction = self.unpack(x)
        H = self.dae.constraint_hessian(y, flux, friction, smooth=True)
        D = sp.diags(self.scale)
        return (D @ H @ D + sp.diags(self._hobj * self.scale**2)).tocsr()


@dataclass
class EstimationSolution:
    state: SpaceTimeState
    withdrawal: np.ndarray
    friction: np.ndarray
    objective: float
    kkt_error: float
    constraint_inf: float
    iterations: int
    wall_time: float
    converged: bool
    status: str


def initial_point(problem: EstimationProblem, profiles: NondimProfiles) -> np.ndarray:
    """Steady state at the period-mean measured withdrawals.

    Withdrawal variables start on the measured series where metered and at
    zero elsewhere; friction starts on the prior.
    """
    dae = problem.dae
    refined = problem.refined
    nlp = EstimationNlp(problem)
    d_mean = np.where(problem.d_weight > 0.0, problem.d_target.mean(axis=1), 0.0)
    supply_mean, _, ratios_mean = average_boundary(profiles)
    try:
        rho_s, phi_s = steady_state_solve(
            refined, supply_mean, d_mean, ratios_mean, problem.friction_prior
        )
    except NonConvergence:
        logger.warning("steady-state warm start failed, using flat initialization")
        rho_s = np.full(dae.M, float(np.mean(supply_mean)))
        phi_s = np.zeros(dae.E)
    N = dae.N
    density = np.tile(rho_s[:, None], (1, N))
    flux = np.tile(phi_s[:, None], (1, N))
    withdrawal = np.where(
        (problem.d_weight > 0.0)[:, None], problem.d_target, 0.0
    )
    return nlp.pack(density, flux, withdrawal, problem.friction_prior.copy())


def solve_estimation(
    problem: EstimationProblem,
    profiles: NondimProfiles,
    options: EstimationOptions | None = None,
    x0: np.ndarray | None = None,
) -> EstimationSolution:
    options = options or EstimationOptions()
    nlp = EstimationNlp(problem)
    if x0 is None:
        x0 = initial_point(problem, profiles)
    start = time.perf_counter()
    result: IpResult = solve(
        nlp, x0, tol=options.tol, max_iter=options.max_iter, mu_init=options.mu_init
    )
    wall = time.perf_counter() - start
    density, flux, withdrawal, friction = nlp.unpack(result.x)
    state = SpaceTimeState(
        grid=problem.grid,
        supply=problem.dae.supply.copy(),
        density=density,
        flux=flux,
    )
    if not result.converged:
        logger.warning(
            "estimation stopped with status %r at KKT error %g",
            result.status, result.kkt_error,
        )
    return EstimationSolution(
        state=state,
        withdrawal=withdrawal,
        friction=friction,
        objective=float(evaluate_objective(problem, density, withdrawal)),
        kkt_error=result.kkt_error,
        constraint_inf=result.constraint_inf,
        iterations=result.iterations,
        wall_time=wall,
        converged=result.converged,
        status=result.status,
    )


def run_estimation(
    network: GasNetwork,
    measurements: MeasurementSet,
    known: KnownBoundaries,
    scales: Scales,
    weights: Weights | None = None,
    options: EstimationOptions | None = None,
) -> tuple[EstimationSolution, EstimationProblem, NondimProfiles]:
    """Full pipeline from parsed inputs to a solved estimation problem."""
    options = options or EstimationOptions()
    ndnet = nondimensionalize_network(network, scales)
    n_steps = options.n_steps or measurements.n_steps
    horizon = measurements.n_steps * measurements.dt_seconds / scales.time
    grid = TimeGrid(horizon=horizon, n_steps=n_steps)
    b = network.n_slack
    supply = np.empty((b, n_steps))
    for i, sid in enumerate(network.slack_ids()):
        supply[i] = resample_periodic(known.supply_density[sid], n_steps) / scales.density
    ratio = {
        cid: resample_periodic(known.ratio[cid], n_steps)
        for cid, _, _ in ndnet.compressors
    }
    profiles = NondimProfiles(
        grid=grid,
        supply=supply,
        withdrawal=np.zeros((len(network.nonslack_ids()), n_steps)),
        ratio=ratio,
    )
    refined = refine_graph(ndnet, options.segment_length / scales.length)
    problem = build_estimation_problem(
        network, refined, profiles, measurements, weights, options
    )
    solution = solve_estimation(problem, profiles, options)
    return solution, problem, profiles
