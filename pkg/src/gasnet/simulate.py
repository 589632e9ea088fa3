"""Steady and periodic transient solves, synthetic measurement generation.

The transient solver treats the whole period as one nonlinear system: all
grid points are solved simultaneously with Newton's method, so the
periodicity of the circular grid is built into the solution rather than
reached by marching to a limit cycle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dae import CircularDae, _g, _g_prime
from .errors import DimensionMismatch, NonConvergence, SingularJacobian
from .network import GasNetwork
from .nondim import (
    NondimProfiles,
    Scales,
    SpaceTimeState,
    default_scales,
    nondimensionalize,
)
from .refinement import RefinedNetwork, refine_graph
from .timeseries import MeasurementSet, ProfileSet

logger = logging.getLogger(__name__)

DEFAULT_SEGMENT_LENGTH = 10.0e3


def average_boundary(profiles: NondimProfiles):
    """Period means of the boundary series, for steady-state solves."""
    ratios = {cid: float(np.mean(r)) for cid, r in profiles.ratio.items()}
    return profiles.supply.mean(axis=1), profiles.withdrawal.mean(axis=1), ratios


def steady_state_solve(
    refined: RefinedNetwork,
    supply: np.ndarray,
    withdrawal: np.ndarray,
    ratios: dict[str, float] | None = None,
    friction: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the time-invariant balance for non-slack densities and fluxes.

    supply holds one density per slack node, withdrawal one mass flow per
    original non-slack junction.  Returns (density, flux) over the refined
    non-slack nodes and edges.
    """
    b = refined.n_slack
    M = refined.n_nonslack
    E = refined.n_edges
    M0 = refined.n_original - b
    if supply.shape != (b,) or withdrawal.shape != (M0,):
        raise DimensionMismatch(
            "expected %d supply densities and %d withdrawals, got %r and %r"
            % (b, M0, supply.shape, withdrawal.shape)
        )
    lam = refined.parent_friction if friction is None else np.asarray(friction)
    lam_seg = lam[refined.parent]
    geo = refined.length * refined.scales.length / refined.diameter
    area = refined.area
    tail, head = refined.tail, refined.head

    alpha_lo = np.ones(E)
    alpha_hi = np.ones(E)
    for cid, k, end in refined.compressor_edges:
        value = 1.0 if ratios is None else ratios[cid]
        if end == "lo":
            alpha_lo[k] = value
        else:
            alpha_hi[k] = value

    d_full = np.zeros(M)
    d_full[:M0] = withdrawal

    # nodal flow balance rows as a sparse operator on flux
    rows = np.concatenate([head, tail])
    cols = np.concatenate([np.arange(E), np.arange(E)])
    vals = np.concatenate([area, -area])
    keep = rows >= b
    AX = sp.coo_matrix(
        (vals[keep], (rows[keep] - b, cols[keep])), shape=(M, E)
    ).tocsr()

    def residual(x: np.ndarray) -> np.ndarray:
        rho, phi = x[:M], x[M:]
        dens = np.concatenate([supply, rho])
        r_mass = -4.0 * (AX @ phi - d_full)
        rho_lo = alpha_lo * dens[tail]
        rho_hi = alpha_hi * dens[head]
        r_mom = geo * lam_seg * _g(phi, smooth=True) + rho_hi**2 - rho_lo**2
        return np.concatenate([r_mass, r_mom])

    def jacobian(x: np.ndarray) -> sp.csr_matrix:
        rho, phi = x[:M], x[M:]
        dens = np.concatenate([supply, rho])
        J_mass = sp.hstack([sp.csr_matrix((M, M)), -4.0 * AX])
        diag_phi = sp.diags(geo * lam_seg * _g_prime(phi, smooth=True))
        r_idx, c_idx, v = [], [], []
        for end, alpha, sign in ((tail, alpha_lo, -2.0), (head, alpha_hi, 2.0)):
            sel = end >= b
            r_idx.append(np.arange(E)[sel])
            c_idx.append(end[sel] - b)
            v.append(sign * alpha[sel] ** 2 * dens[end[sel]])
        J_rho = sp.coo_matrix(
            (np.concatenate(v), (np.concatenate(r_idx), np.concatenate(c_idx))),
            shape=(E, M),
        )
        return sp.vstack([J_mass, sp.hstack([J_rho, diag_phi])]).tocsr()

    rho0 = np.full(M, float(np.mean(supply)))
    phi0 = spla.lsqr(AX, d_full, atol=1e-14, btol=1e-14)[0]
    x = np.concatenate([rho0, phi0])
    x = _newton(residual, jacobian, x, tol, max_iter, what="steady state")
    rho, phi = x[:M], x[M:]
    lo, hi = refined.rho_min[b:], refined.rho_max[b:]
    if np.any(rho < lo) or np.any(rho > hi):
        worst = int(np.argmax(np.maximum(lo - rho, rho - hi)))
        logger.warning(
            "steady density at node %s leaves its box [%g, %g]: %g",
            refined.node_ids[b + worst], lo[worst], hi[worst], rho[worst],
        )
    return rho, phi


def _newton(residual, jacobian, x, tol, max_iter, what):
    r = residual(x)
    best = float(np.max(np.abs(r)))
    for iteration in range(max_iter):
        norm = float(np.max(np.abs(r)))
        if norm <= tol:
            return x
        J = jacobian(x)
        step = _solve_square(J, -r, what)
        alpha, merit = 1.0, float(r @ r)
        for _ in range(40):
            x_try = x + alpha * step
            r_try = residual(x_try)
            if float(r_try @ r_try) <= (1.0 - 1e-4 * alpha) * merit:
                break
            alpha *= 0.5
        else:
            raise NonConvergence(
                "%s Newton stalled at residual %g after %d iterations"
                % (what, norm, iteration)
            )
        x, r = x_try, r_try
        best = min(best, float(np.max(np.abs(r))))
    if float(np.max(np.abs(r))) <= tol:
        return x
    raise NonConvergence(
        "%s Newton did not reach %g in %d iterations (best %g)"
        % (what, tol, max_iter, best)
    )


def _solve_square(J: sp.spmatrix, rhs: np.ndarray, what: str) -> np.ndarray:
    J = J.tocsc()
    for bump in (0.0, 1e-12, 1e-9):
        try:
            lu = spla.splu(J + bump * sp.identity(J.shape[0], format="csc") if bump else J)
        except RuntimeError:
            continue
        step = lu.solve(rhs)
        if np.all(np.isfinite(step)):
            return step
    raise SingularJacobian("%s Jacobian could not be factorized" % what)


def transient_simulate(
    refined: RefinedNetwork,
    profiles: NondimProfiles,
    friction: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> SpaceTimeState:
    """Solve one full period of the network dynamics.

    All N_t grid points are unknowns of a single Newton solve initialized
    from the steady state at the period-mean boundary conditions.
    """
    dae = CircularDae(refined, profiles)
    M, E, N = dae.M, dae.E, dae.N
    supply_mean, withdrawal_mean, ratios_mean = average_boundary(profiles)
    rho_s, phi_s = steady_state_solve(
        refined, supply_mean, withdrawal_mean, ratios_mean, friction
    )

    def unpack(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rho = x[: M * N].reshape(N, M).T
        phi = x[M * N:].reshape(N, E).T
        return rho, phi

    def residual(x: np.ndarray) -> np.ndarray:
        rho, phi = unpack(x)
        return dae.residual(rho, phi, profiles.withdrawal, friction, smooth=True)

    def jacobian(x: np.ndarray) -> sp.csr_matrix:
        rho, phi = unpack(x)
        return dae.jacobian(rho, phi, friction, with_controls=False, smooth=True)

    x0 = np.concatenate([np.tile(rho_s, N), np.tile(phi_s, N)])
    x = _newton(residual, jacobian, x0, tol, max_iter, what="transient")
    rho, phi = unpack(x)
    return SpaceTimeState(
        grid=profiles.grid, supply=profiles.supply.copy(), density=rho, flux=phi
    )


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative density noise and flow-scaled withdrawal noise."""

    density_rel: float
    withdrawal_rel: float
    seed: int


def inject_noise(
    state: SpaceTimeState,
    profiles: NondimProfiles,
    noise: NoiseSpec,
    refined: RefinedNetwork,
    network: GasNetwork,
    metered_ids: tuple[str, ...] | None = None,
) -> MeasurementSet:
    """Sample noisy measurements from a simulated state.

    Densities get iid relative Gaussian noise; withdrawals get additive
    Gaussian noise scaled per junction by its peak absolute flow.  Only the
    listed junctions (default: all original non-slack) are metered.
    Identical seeds reproduce identical measurements.
    """
    scales = refined.scales
    b = refined.n_slack
    if metered_ids is None:
        metered_ids = network.nonslack_ids()
    jindex = network.junction_index
    for jid in metered_ids:
        if jid not in jindex or jindex[jid] < b:
            raise DimensionMismatch("cannot meter junction %r" % jid)
    rng = np.random.default_rng(noise.seed)
    dt_seconds = state.grid.dt * scales.time
    out = MeasurementSet(dt_seconds=dt_seconds)
    for jid in sorted(metered_ids):
        row = jindex[jid] - b
        rho = state.density[row] * scales.density
        out.density[jid] = rho * (1.0 + noise.density_rel * rng.standard_normal(len(rho)))
    for jid in sorted(metered_ids):
        row = jindex[jid] - b
        flow = profiles.withdrawal[row] * scales.flux
        scale = float(np.max(np.abs(flow)))
        out.withdrawal[jid] = flow + noise.withdrawal_rel * scale * rng.standard_normal(len(flow))
    return out


def simulation_diagnostics(
    dae: CircularDae, state: SpaceTimeState, withdrawal: np.ndarray
) -> dict:
    """Model-consistency numbers reported after every simulation."""
    res = dae.residual(state.density, state.flux, withdrawal, smooth=True)
    ratio = dae.lumping_ratio(state)
    if ratio > 0.05:
        logger.warning(
            "lumped segments see end-density spreads up to %.3f; "
            "consider a smaller segment length", ratio,
        )
    return {
        "residual_inf": float(np.max(np.abs(res))),
        "conservation_defect": dae.conservation_defect(state, withdrawal),
        "lumping_ratio_max": ratio,
    }


def simulate_network(
    network: GasNetwork,
    profiles: ProfileSet,
    scales: Scales | None = None,
    segment_length: float = DEFAULT_SEGMENT_LENGTH,
    n_steps: int | None = None,
) -> tuple[SpaceTimeState, RefinedNetwork, CircularDae]:
    """Parse-to-solution convenience pipeline for a dimensional problem."""
    if scales is None:
        scales = default_scales(network.gas)
    ndnet, ndprof = nondimensionalize(network, profiles, scales, n_steps)
    refined = refine_graph(ndnet, segment_length / scales.length)
    state = transient_simulate(refined, ndprof)
    return state, refined, CircularDae(refined, ndprof)
