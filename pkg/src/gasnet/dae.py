"""Lumped network dynamics on a circular time grid.

Discrete model per refined edge k and non-slack node j, all dimensionless:

    mass (node j):      sum over incident edges of X*Lh*(d/dt of weighted
                        end densities) = 4 * (inflow - withdrawal)
    momentum (edge k):  Lh_k * K_k * phi_k|phi_k| + rho_out^2 - rho_in^2 = 0

with K_k = l0 * friction_k / diameter_k, rho_in/rho_out the compressor
weighted end densities, and time derivatives realized as central
differences that wrap around the period.  Density rises across a boosting
compressor and falls along the flow direction.

Residual stacking: for each grid point n, first the non-slack mass rows,
then the edge momentum rows, so the vector has length (M + E) * N.

phi|phi| is smoothed to phi*sqrt(phi^2 + eps^2) inside solver residuals so
Newton steps stay differentiable through flow reversals; reporting paths
use the exact form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, MissingRatio
from .nondim import NondimProfiles, SpaceTimeState
from .refinement import RefinedNetwork
from .timeseries import TimeGrid

SMOOTHING_EPS = 1e-8


def _g(phi: np.ndarray, smooth: bool) -> np.ndarray:
    if smooth:
        return phi * np.sqrt(phi**2 + SMOOTHING_EPS**2)
    return phi * np.abs(phi)


def _g_prime(phi: np.ndarray, smooth: bool) -> np.ndarray:
    if smooth:
        root = np.sqrt(phi**2 + SMOOTHING_EPS**2)
        return root + phi**2 / root
    return 2.0 * np.abs(phi)


def _g_second(phi: np.ndarray, smooth: bool) -> np.ndarray:
    if smooth:
        root = np.sqrt(phi**2 + SMOOTHING_EPS**2)
        return phi * (2.0 * phi**2 + 3.0 * SMOOTHING_EPS**2) / root**3
    return 2.0 * np.sign(phi)


@dataclass(frozen=True)
class IncidenceMatrices:
    """Oriented incidence and the diagonal coefficients of the model.

    A has +1 where an edge enters a node and -1 where it leaves; A_s/A_d
    are its slack and non-slack row blocks.  lengths is the segment length
    diagonal, areas the cross sections (m2), fric_coef the momentum
    coefficients l0*friction/diameter per edge.
    """

    A: sp.csr_matrix
    A_s: sp.csr_matrix
    A_d: sp.csr_matrix
    lengths: np.ndarray
    areas: np.ndarray
    fric_coef: np.ndarray


def build_incidence(refined: RefinedNetwork) -> IncidenceMatrices:
    V, E = refined.n_nodes, refined.n_edges
    rows = np.concatenate([refined.head, refined.tail])
    cols = np.concatenate([np.arange(E), np.arange(E)])
    vals = np.concatenate([np.ones(E), -np.ones(E)])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(V, E)).tocsr()
    b = refined.n_slack
    fric = refined.scales.length * refined.friction / refined.diameter
    return IncidenceMatrices(
        A=A,
        A_s=A[:b],
        A_d=A[b:],
        lengths=refined.length.copy(),
        areas=refined.area.copy(),
        fric_coef=fric,
    )


def build_weighted_incidence(
    refined: RefinedNetwork, ratios: dict[str, float]
) -> sp.csr_matrix:
    """Incidence with compressor ratios in place of the affected unit entries.

    ratios maps compressor id to its value at one instant; ids bound in the
    refined network must all be present.
    """
    E = refined.n_edges
    alpha_lo = np.ones(E)
    alpha_hi = np.ones(E)
    for cid, k, end in refined.compressor_edges:
        if cid not in ratios:
            raise MissingRatio("no ratio value for compressor %r" % cid)
        if end == "lo":
            alpha_lo[k] = ratios[cid]
        else:
            alpha_hi[k] = ratios[cid]
    rows = np.concatenate([refined.head, refined.tail])
    cols = np.concatenate([np.arange(E), np.arange(E)])
    vals = np.concatenate([alpha_hi, -alpha_lo])
    return sp.coo_matrix((vals, (rows, cols)), shape=(refined.n_nodes, E)).tocsr()


def momentum_residual(
    node_density: np.ndarray,
    phi: np.ndarray,
    B: sp.spmatrix,
    lengths: np.ndarray,
    fric_coef: np.ndarray,
    smooth: bool = False,
) -> np.ndarray:
    """Matrix-form momentum residual at one instant.

    node_density covers all nodes (slack first), phi all edges; B is the
    weighted incidence at the same instant.
    """
    node_density = np.asarray(node_density, dtype=float)
    phi = np.asarray(phi, dtype=float)
    V, E = B.shape
    if node_density.shape != (V,) or phi.shape != (E,):
        raise DimensionMismatch(
            "expected %d node densities and %d fluxes, got %r and %r"
            % (V, E, node_density.shape, phi.shape)
        )
    Bt = B.T
    u = Bt @ node_density
    v = abs(Bt) @ node_density
    return lengths * fric_coef * _g(phi, smooth) + u * v


def mass_residual(
    density: np.ndarray,
    supply: np.ndarray,
    phi_n: np.ndarray,
    withdrawal_n: np.ndarray,
    inc: IncidenceMatrices,
    B_n: sp.spmatrix,
    grid: TimeGrid,
    n: int,
) -> np.ndarray:
    """Matrix-form non-slack mass balance at grid point n.

    density (non-slack) and supply (slack) are full trajectories because
    the circular central difference reaches the neighbouring grid points;
    phi_n and withdrawal_n are the slices at n.  withdrawal_n covers all
    non-slack rows (zero at auxiliary junctions).
    """
    M, N = density.shape
    b = supply.shape[0]
    if supply.shape[1] != N or N != grid.n_steps:
        raise DimensionMismatch("trajectory widths disagree with the grid")
    if B_n.shape[0] != b + M:
        raise DimensionMismatch("weighted incidence rows disagree with the state")
    d_rho = (density[:, grid.wrap(n + 1)] - density[:, grid.wrap(n - 1)]) / (2 * grid.dt)
    d_sup = (supply[:, grid.wrap(n + 1)] - supply[:, grid.wrap(n - 1)]) / (2 * grid.dt)
    XL = sp.diags(inc.areas * inc.lengths)
    abs_Ad = abs(inc.A_d)
    B_s, B_d = B_n[:b], B_n[b:]
    C_d = abs_Ad @ XL @ abs(B_d.T)
    C_s = abs_Ad @ XL @ abs(B_s.T)
    flow = inc.A_d @ (inc.areas * phi_n)
    return C_d @ d_rho - 4.0 * (flow - withdrawal_n) + C_s @ d_sup


@dataclass(frozen=True)
class VariableLayout:
    """Column layout shared by the simulator and the estimator.

    State columns come first (densities then fluxes, grouped by grid
    point); when controls are included, withdrawal columns for the original
    non-slack junctions follow, then one friction column per parent pipe.
    """

    n_nonslack: int
    n_edges: int
    n_withdrawal: int
    n_pipes: int
    n_steps: int
    with_controls: bool

    @property
    def off_phi(self) -> int:
        return self.n_nonslack * self.n_steps

    @property
    def off_withdrawal(self) -> int:
        return (self.n_nonslack + self.n_edges) * self.n_steps

    @property
    def off_friction(self) -> int:
        return self.off_withdrawal + self.n_withdrawal * self.n_steps

    @property
    def n_columns(self) -> int:
        if self.with_controls:
            return self.off_friction + self.n_pipes
        return self.off_withdrawal

    def rho_col(self, j, n):
        return np.asarray(n) * self.n_nonslack + np.asarray(j)

    def phi_col(self, k, n):
        return self.off_phi + np.asarray(n) * self.n_edges + np.asarray(k)

    def withdrawal_col(self, j, n):
        return self.off_withdrawal + np.asarray(n) * self.n_withdrawal + np.asarray(j)

    def friction_col(self, p):
        return self.off_friction + np.asarray(p)


class CircularDae:
    """Residual, Jacobian and curvature of the space-time system.

    Precomputes the time-dependent compressor weights and the constant
    (linear) mass-balance Jacobian structure once per refined network and
    profile set; momentum entries are refreshed per evaluation.
    """

    def __init__(self, refined: RefinedNetwork, profiles: NondimProfiles):
        self.refined = refined
        self.grid = profiles.grid
        N = self.grid.n_steps
        E = refined.n_edges
        b = refined.n_slack
        self.M = refined.n_nonslack
        self.M0 = refined.n_original - b
        self.E = E
        self.P = len(refined.parent_pipe_ids)
        self.N = N
        if profiles.supply.shape != (b, N):
            raise DimensionMismatch(
                "supply profile shape %r does not fit %d slack nodes on %d steps"
                % (profiles.supply.shape, b, N)
            )
        if profiles.withdrawal.shape != (self.M0, N):
            raise DimensionMismatch(
                "withdrawal profile shape %r does not fit %d junctions on %d steps"
                % (profiles.withdrawal.shape, self.M0, N)
            )
        self.supply = profiles.supply
        self.known_withdrawal = profiles.withdrawal

        self.alpha_lo = np.ones((E, N))
        self.alpha_hi = np.ones((E, N))
        for cid, k, end in refined.compressor_edges:
            if cid not in profiles.ratio:
                raise MissingRatio("no ratio series for compressor %r" % cid)
            if end == "lo":
                self.alpha_lo[k] = profiles.ratio[cid]
            else:
                self.alpha_hi[k] = profiles.ratio[cid]

        self.geo = refined.length * refined.scales.length / refined.diameter
        self.area = refined.area
        self.tail = refined.tail
        self.head = refined.head
        self.parent = refined.parent
        self.n_rows = (self.M + E) * N
        self._build_constant_jacobian()
        self._build_momentum_structure()

    # node index helpers: refined nodes 0..b-1 slack, b.. non-slack
    def _nonslack_row(self, nodes: np.ndarray) -> np.ndarray:
        return nodes - self.refined.n_slack

    def layout(self, with_controls: bool) -> VariableLayout:
        return VariableLayout(self.M, self.E, self.M0, self.P, self.N, with_controls)

    def _node_density(self, density: np.ndarray, n: int) -> np.ndarray:
        return np.concatenate([self.supply[:, n], density[:, n]])

    def _expand_withdrawal(self, withdrawal: np.ndarray) -> np.ndarray:
        full = np.zeros((self.M, self.N))
        full[: self.M0] = withdrawal
        return full

    def residual(
        self,
        density: np.ndarray,
        flux: np.ndarray,
        withdrawal: np.ndarray,
        friction: np.ndarray | None = None,
        smooth: bool = True,
    ) -> np.ndarray:
        """Stacked residual; friction defaults to the refined parent values."""
        M, E, N = self.M, self.E, self.N
        if density.shape != (M, N) or flux.shape != (E, N):
            raise DimensionMismatch(
                "state shapes %r, %r do not fit (%d, %d) nodes/edges on %d steps"
                % (density.shape, flux.shape, M, E, N)
            )
        if withdrawal.shape != (self.M0, N):
            raise DimensionMismatch("withdrawal shape %r does not fit" % (withdrawal.shape,))
        lam = self.refined.parent_friction if friction is None else np.asarray(friction)
        lam_seg = lam[self.parent]

        dt = self.grid.dt
        d_rho = (np.roll(density, -1, axis=1) - np.roll(density, 1, axis=1)) / (2 * dt)
        d_sup = (np.roll(self.supply, -1, axis=1) - np.roll(self.supply, 1, axis=1)) / (2 * dt)
        d_all = np.vstack([d_sup, d_rho])

        XL = (self.area * self.refined.length)[:, None]
        q = XL * (self.alpha_lo * d_all[self.tail] + self.alpha_hi * d_all[self.head])
        mass_full = np.zeros((self.refined.n_nodes, N))
        np.add.at(mass_full, self.tail, q)
        np.add.at(mass_full, self.head, q)
        flow_full = np.zeros((self.refined.n_nodes, N))
        np.add.at(flow_full, self.head, self.area[:, None] * flux)
        np.add.at(flow_full, self.tail, -self.area[:, None] * flux)
        b = self.refined.n_slack
        r_mass = mass_full[b:] - 4.0 * (flow_full[b:] - self._expand_withdrawal(withdrawal))

        dens_all = np.vstack([self.supply, density])
        rho_lo = self.alpha_lo * dens_all[self.tail]
        rho_hi = self.alpha_hi * dens_all[self.head]
        r_mom = (self.geo * lam_seg)[:, None] * _g(flux, smooth) + rho_hi**2 - rho_lo**2

        out = np.empty((N, M + E))
        out[:, :M] = r_mass.T
        out[:, M:] = r_mom.T
        return out.ravel()

    def _build_constant_jacobian(self) -> None:
        """Mass rows are linear; assemble their entries once."""
        M, E, N, b = self.M, self.E, self.N, self.refined.n_slack
        dt = self.grid.dt
        layout = self.layout(with_controls=True)
        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        vals: list[np.ndarray] = []
        edges = np.arange(E)
        ns = np.arange(N)
        XL = self.area * self.refined.length

        def mass_row(nodes: np.ndarray, n: np.ndarray) -> np.ndarray:
            return n * (M + E) + (nodes - b)

        # d/dt coupling: rows at each incident end, columns at each weighted end
        for row_end in (self.tail, self.head):
            row_ok = row_end >= b
            for col_end, alpha in ((self.tail, self.alpha_lo), (self.head, self.alpha_hi)):
                col_ok = col_end >= b
                k_sel = edges[row_ok & col_ok]
                if len(k_sel) == 0:
                    continue
                for shift, sign in ((1, 1.0), (-1, -1.0)):
                    kk, nn = np.meshgrid(k_sel, ns, indexing="ij")
                    rows.append(mass_row(row_end[kk], nn).ravel())
                    cols.append(
                        layout.rho_col(col_end[kk] - b, (nn + shift) % N).ravel()
                    )
                    vals.append(
                        (sign / (2 * dt) * XL[kk] * alpha[kk, nn]).ravel()
                    )
        # flux coupling
        for end, sign in ((self.tail, 4.0), (self.head, -4.0)):
            k_sel = edges[end >= b]
            if len(k_sel):
                kk, nn = np.meshgrid(k_sel, ns, indexing="ij")
                rows.append(mass_row(end[kk], nn).ravel())
                cols.append(layout.phi_col(kk, nn).ravel())
                vals.append(np.broadcast_to((sign * self.area[k_sel])[:, None], kk.shape).ravel())
        # withdrawal coupling
        jj, nn = np.meshgrid(np.arange(self.M0), ns, indexing="ij")
        rows.append((nn * (M + E) + jj).ravel())
        cols.append(layout.withdrawal_col(jj, nn).ravel())
        vals.append(np.full(jj.size, 4.0))

        self._mass_rows = np.concatenate(rows)
        self._mass_cols = np.concatenate(cols)
        self._mass_vals = np.concatenate(vals)
        self._mass_is_state = self._mass_cols < layout.off_withdrawal

    def _build_momentum_structure(self) -> None:
        M, E, N, b = self.M, self.E, self.N, self.refined.n_slack
        layout = self.layout(with_controls=True)
        edges = np.arange(E)
        ns = np.arange(N)
        kk, nn = np.meshgrid(edges, ns, indexing="ij")
        row = nn * (M + E) + M + kk
        self._mom_row_phi = row.ravel()
        self._mom_col_phi = layout.phi_col(kk, nn).ravel()
        self._mom_kk, self._mom_nn = kk, nn

        tail_ok = self.tail >= b
        head_ok = self.head >= b
        self._mom_tail_sel = edges[tail_ok]
        self._mom_head_sel = edges[head_ok]
        kt, nt = np.meshgrid(self._mom_tail_sel, ns, indexing="ij")
        kh, nh = np.meshgrid(self._mom_head_sel, ns, indexing="ij")
        self._mom_row_tail = (nt * (M + E) + M + kt).ravel()
        self._mom_col_tail = layout.rho_col(self.tail[kt] - b, nt).ravel()
        self._mom_kt, self._mom_nt = kt, nt
        self._mom_row_head = (nh * (M + E) + M + kh).ravel()
        self._mom_col_head = layout.rho_col(self.head[kh] - b, nh).ravel()
        self._mom_kh, self._mom_nh = kh, nh

        self._mom_row_lam = row.ravel()
        self._mom_col_lam = layout.friction_col(self.parent[kk]).ravel()

    def jacobian(
        self,
        density: np.ndarray,
        flux: np.ndarray,
        friction: np.ndarray | None = None,
        with_controls: bool = False,
        smooth: bool = True,
    ) -> sp.csr_matrix:
        """Exact Jacobian of the stacked residual in the shared layout."""
        lam = self.refined.parent_friction if friction is None else np.asarray(friction)
        lam_seg = lam[self.parent]
        layout = self.layout(with_controls)
        dens_all = np.vstack([self.supply, density])

        gp = _g_prime(flux, smooth)
        vals_phi = (self.geo * lam_seg)[:, None] * gp
        rho_t = self.alpha_lo * dens_all[self.tail]
        rho_h = self.alpha_hi * dens_all[self.head]
        vals_tail = (-2.0 * self.alpha_lo * rho_t)[self._mom_kt, self._mom_nt].ravel()
        vals_head = (2.0 * self.alpha_hi * rho_h)[self._mom_kh, self._mom_nh].ravel()

        if with_controls:
            mass_rows, mass_cols, mass_vals = (
                self._mass_rows, self._mass_cols, self._mass_vals,
            )
        else:
            keep = self._mass_is_state
            mass_rows = self._mass_rows[keep]
            mass_cols = self._mass_cols[keep]
            mass_vals = self._mass_vals[keep]
        rows = [mass_rows, self._mom_row_phi, self._mom_row_tail, self._mom_row_head]
        cols = [mass_cols, self._mom_col_phi, self._mom_col_tail, self._mom_col_head]
        vals = [mass_vals, vals_phi.ravel(), vals_tail, vals_head]
        if with_controls:
            vals_lam = self.geo[:, None] * _g(flux, smooth)
            rows.append(self._mom_row_lam)
            cols.append(self._mom_col_lam)
            vals.append(vals_lam.ravel())
        J = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_rows, layout.n_columns),
        )
        return J.tocsr()

    def constraint_hessian(
        self,
        y: np.ndarray,
        flux: np.ndarray,
        friction: np.ndarray | None = None,
        smooth: bool = True,
    ) -> sp.csr_matrix:
        """sum_i y_i * Hess(residual_i) in the control layout.

        Mass rows are linear, so only momentum rows contribute: a diagonal
        in phi, a diagonal in rho (constant curvature of the squared end
        densities) and a phi-friction coupling.
        """
        lam = self.refined.parent_friction if friction is None else np.asarray(friction)
        lam_seg = lam[self.parent]
        layout = self.layout(with_controls=True)
        M, E = self.M, self.E
        y_mom = y.reshape(self.N, M + E)[:, M:].T  # (E, N)

        rows = [self._mom_col_phi]
        cols = [self._mom_col_phi]
        vals = [(y_mom * (self.geo * lam_seg)[:, None] * _g_second(flux, smooth)).ravel()]

        cross = (y_mom * self.geo[:, None] * _g_prime(flux, smooth)).ravel()
        rows += [self._mom_col_phi, self._mom_col_lam]
        cols += [self._mom_col_lam, self._mom_col_phi]
        vals += [cross, cross]

        y_tail = y_mom[self._mom_kt, self._mom_nt]
        alo = self.alpha_lo[self._mom_kt, self._mom_nt]
        rows.append(self._mom_col_tail)
        cols.append(self._mom_col_tail)
        vals.append((-2.0 * alo**2 * y_tail).ravel())
        y_head = y_mom[self._mom_kh, self._mom_nh]
        ahi = self.alpha_hi[self._mom_kh, self._mom_nh]
        rows.append(self._mom_col_head)
        cols.append(self._mom_col_head)
        vals.append((2.0 * ahi**2 * y_head).ravel())

        H = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(layout.n_columns, layout.n_columns),
        )
        return H.tocsr()

    def edge_end_fluxes(self, state: SpaceTimeState) -> tuple[np.ndarray, np.ndarray]:
        """Recover per-end fluxes from the lumped mean flux and the densities.

        The half-difference flux follows from the lumped mass balance of
        each segment; entering flux is phi - phi_minus, leaving flux is
        phi + phi_minus.
        """
        dt = self.grid.dt
        dens_all = np.vstack([state.supply, state.density])
        d_all = (np.roll(dens_all, -1, axis=1) - np.roll(dens_all, 1, axis=1)) / (2 * dt)
        phi_minus = -(self.refined.length[:, None] / 4.0) * (
            self.alpha_lo * d_all[self.tail] + self.alpha_hi * d_all[self.head]
        )
        return state.flux - phi_minus, state.flux + phi_minus

    def lumping_ratio(self, state: SpaceTimeState) -> float:
        """Max relative spread of weighted end densities over edges and times."""
        dens_all = np.vstack([state.supply, state.density])
        rho_lo = self.alpha_lo * dens_all[self.tail]
        rho_hi = self.alpha_hi * dens_all[self.head]
        return float(np.max(np.abs(rho_hi - rho_lo) / (rho_hi + rho_lo)))

    def conservation_defect(self, state: SpaceTimeState, withdrawal: np.ndarray) -> float:
        """Relative gap between period-total supplied and withdrawn mass."""
        phi_in, phi_out = self.edge_end_fluxes(state)
        b = self.refined.n_slack
        inflow = np.zeros((self.refined.n_nodes, self.N))
        np.add.at(inflow, self.head, self.area[:, None] * phi_out)
        np.add.at(inflow, self.tail, -self.area[:, None] * phi_in)
        supplied = -float(inflow[:b].sum()) * self.grid.dt
        withdrawn = float(withdrawal.sum()) * self.grid.dt
        scale = max(abs(supplied), abs(withdrawn), 1e-30)
        return abs(supplied - withdrawn) / scale


def assemble_spacetime_residual(
    state: SpaceTimeState,
    profiles: NondimProfiles,
    refined: RefinedNetwork,
    withdrawal: np.ndarray | None = None,
    friction: np.ndarray | None = None,
    smooth: bool = True,
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Residual vector plus the sparsity pattern of its state Jacobian."""
    dae = CircularDae(refined, profiles)
    w = profiles.withdrawal if withdrawal is None else withdrawal
    res = dae.residual(state.density, state.flux, w, friction, smooth)
    J = dae.jacobian(state.density, state.flux, friction, with_controls=False, smooth=smooth)
    pattern = J.tocoo()
    return res, (pattern.row, pattern.col)
