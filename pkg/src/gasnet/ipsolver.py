"""Sparse barrier trust-region method for equality-constrained NLPs with
box bounds.

Solves

    min f(x)   s.t.  c(x) = 0,   l <= x <= u

through a barrier continuation: for a decreasing sequence of barrier
parameters mu the method approximately solves

    min f(x) - mu sum log(x - l) - mu sum log(u - x)   s.t.  c(x) = 0.

Each barrier problem is attacked with a Byrd-Omojokun composite trust
region step: a dogleg normal step reduces the linearized constraints, a
projected conjugate-gradient tangential step reduces the barrier quadratic
inside the null space of the constraint Jacobian, and an l2 exact-penalty
ratio test with a second-order correction governs acceptance.  Steps are
measured in the affine-scaled metric D = (Sigma + I)^(-1/2), where Sigma
is the barrier curvature, so variables settling onto a bound keep moving
in log scale instead of freezing the radius.  All projections reuse one
sparse LU factorization of [[I, J_s^T], [J_s, -delta I]] per iteration.
A fraction-to-boundary rule keeps iterates strictly feasible with respect
to their boxes.

Optimality is measured at mu = 0 with dual completion: equality
multipliers come from a weighted least-squares fit, bound duals take the
sign-feasible part of the remaining gradient, and the reported KKT error
is the largest of the unabsorbed stationarity residual, the constraint
violation, and the complementarity slip of the completed duals.  The
barrier parameter follows the monotone schedule
mu <- max(mu_min, min(0.2 mu, mu^1.5)) once the scaled barrier residual
falls below 10 mu.  Nearly-optimal starts are detected up front and jump
straight to mu_min, where full primal-dual Newton steps finish in a few
iterations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InfeasibleBoxes, InfeasibleDetected, SingularKKT

logger = logging.getLogger(__name__)

KAPPA_EPS = 10.0
KAPPA_MU = 0.2
THETA_MU = 1.5
TAU_MIN = 0.99
DELTA_C = 1e-11
TR_INIT = 1.0
TR_MAX = 1e4
TR_ETA = 1e-4
TR_EXPAND = 2.5
TR_SHRINK = 0.3
CG_TOL = 0.01


class SparseNlp(Protocol):
    """Problem interface consumed by solve()."""

    n: int
    lower: np.ndarray
    upper: np.ndarray

    def objective(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    def constraints(self, x: np.ndarray) -> np.ndarray: ...

    def jacobian(self, x: np.ndarray) -> sp.spmatrix: ...

    def hessian(self, x: np.ndarray, y: np.ndarray) -> sp.spmatrix: ...


@dataclass
class IpResult:
    x: np.ndarray
    y: np.ndarray
    z_lower: np.ndarray
    z_upper: np.ndarray
    objective: float
    kkt_error: float
    constraint_inf: float
    mu: float
    iterations: int
    converged: bool
    status: str


def _interior_start(x0, lower, upper):
    x = np.array(x0, dtype=float)
    has_l = np.isfinite(lower)
    has_u = np.isfinite(upper)
    both = has_l & has_u
    if np.any(lower[both] >= upper[both]):
        bad = int(np.argmax(lower[both] >= upper[both]))
        raise InfeasibleBoxes(
            "empty variable box [%r, %r]" % (lower[both][bad], upper[both][bad])
        )
    pad_l = np.where(
        both,
        np.minimum(1e-2 * np.maximum(1.0, np.abs(lower)), 1e-2 * (upper - lower)),
        1e-2 * np.maximum(1.0, np.abs(lower)),
    )
    pad_u = np.where(
        both,
        np.minimum(1e-2 * np.maximum(1.0, np.abs(upper)), 1e-2 * (upper - lower)),
        1e-2 * np.maximum(1.0, np.abs(upper)),
    )
    x[has_l] = np.maximum(x[has_l], lower[has_l] + pad_l[has_l])
    x[has_u] = np.minimum(x[has_u], upper[has_u] - pad_u[has_u])
    return x, has_l, has_u


def _least_squares_multipliers(J, rhs):
    try:
        y = spla.lsqr(J.T.tocsr(), -rhs, atol=1e-10, btol=1e-10, iter_lim=300)[0]
    except Exception:
        return np.zeros(J.shape[0])
    if not np.all(np.isfinite(y)) or np.max(np.abs(y), initial=0.0) > 1e6:
        return np.zeros(J.shape[0])
    return y


class _Projector:
    """Null-space projection and least-norm solves off one factorization.

    Wraps the LU of [[I, J^T], [J, -delta I]].  project(r) returns the
    component of r orthogonal to the constraint gradients; least_norm(b)
    returns the minimum-norm v with J v ~= -b... see each method.
    """

    def __init__(self, J: sp.spmatrix, n: int, m: int):
        self.J = J.tocsr()
        self.n = n
        self.m = m
        K = sp.bmat(
            [[sp.identity(n), self.J.T], [self.J, -DELTA_C * sp.identity(m)]],
            format="csc",
        )
        try:
            self.lu = spla.splu(K)
        except RuntimeError as exc:
            raise SingularKKT("augmented projection system is singular: %s" % exc) from exc

    def project(self, r: np.ndarray) -> np.ndarray:
        """Orthogonal projection of r onto the null space of J."""
        sol = self.lu.solve(np.concatenate([r, np.zeros(self.m)]))
        return sol[: self.n]

    def least_norm(self, b: np.ndarray) -> np.ndarray:
        """Minimum-norm v with J v = b."""
        sol = self.lu.solve(np.concatenate([np.zeros(self.n), b]))
        return sol[: self.n]

    def multipliers(self, r: np.ndarray) -> np.ndarray:
        """Least-squares y minimizing || r + J^T y ||."""
        sol = self.lu.solve(np.concatenate([r, np.zeros(self.m)]))
        return -sol[self.n:]


def _dogleg_normal(proj: _Projector, c: np.ndarray, radius: float) -> np.ndarray:
    """Approximately minimize ||c + J v|| inside a ball of the given radius."""
    J = proj.J
    g = J.T @ c  # gradient of 0.5||c + Jv||^2 at v = 0
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0.0:
        return np.zeros(proj.n)
    Jg = J @ g
    curve = float(Jg @ Jg)
    if curve <= 0.0:
        return np.zeros(proj.n)
    v_cauchy = -(g_norm**2 / curve) * g
    v_newton = -proj.least_norm(c)
    n_cauchy = float(np.linalg.norm(v_cauchy))
    n_newton = float(np.linalg.norm(v_newton))
    if n_newton <= radius:
        return v_newton
    if n_cauchy >= radius:
        return (radius / n_cauchy) * v_cauchy
    # walk the dogleg segment from the Cauchy point toward the Newton point
    d = v_newton - v_cauchy
    a = float(d @ d)
    b = 2.0 * float(v_cauchy @ d)
    cc = n_cauchy**2 - radius**2
    t = (-b + np.sqrt(max(b * b - 4 * a * cc, 0.0))) / (2 * a) if a > 0 else 0.0
    return v_cauchy + t * d


def _projected_cg(
    proj,
    W: sp.spmatrix,
    grad: np.ndarray,
    v: np.ndarray,
    radius: float,
    max_cg: int,
    rtol: float,
) -> np.ndarray:
    """Steihaug-Toint CG for the tangential step inside the null space of J.

    Minimizes 0.5 (v+t)^T W (v+t) + grad^T (v+t) over J t = 0 and
    ||v + t|| <= radius, starting at t = 0; stops on the trust-region
    boundary, on negative curvature, or at the given relative tolerance.
    """
    n = len(grad)
    t = np.zeros(n)
    r = proj.project(grad + W @ v)
    rho = float(r @ r)
    rho0 = rho
    if rho0 == 0.0:
        return t
    p = -r
    for _ in range(max_cg):
        Wp = W @ p
        curv = float(p @ Wp)
        if curv <= 1e-14 * float(p @ p):
            # negative curvature: follow p to the trust-region boundary
            tau = _boundary_tau(v + t, p, radius)
            return t + tau * p
        alpha = rho / curv
        t_next = t + alpha * p
        if np.linalg.norm(v + t_next) >= radius:
            tau = _boundary_tau(v + t, p, radius)
            return t + tau * p
        t = t_next
        r = r + alpha * proj.project(Wp)
        rho_next = float(r @ r)
        if rho_next <= rtol**2 * rho0:
            return t
        p = -r + (rho_next / rho) * p
        rho = rho_next
    return t


def _boundary_tau(base: np.ndarray, direction: np.ndarray, radius: float) -> float:
    """Largest tau >= 0 with ||base + tau * direction|| = radius."""
    a = float(direction @ direction)
    if a == 0.0:
        return 0.0
    b = 2.0 * float(base @ direction)
    c = float(base @ base) - radius**2
    disc = max(b * b - 4 * a * c, 0.0)
    return (-b + np.sqrt(disc)) / (2 * a)


class _IdentityProjector:
    """Projection onto the whole space, for problems without constraints."""

    def __init__(self, n: int):
        self.n = n

    def project(self, r: np.ndarray) -> np.ndarray:
        return r


def _newton_step(W, J, rhs, n, m):
    """Regularized solve of the KKT system for the given residual."""
    delta = 0.0
    for _ in range(8):
        K = sp.bmat(
            [[W + sp.diags(np.full(n, delta)) if delta else W, J.T],
             [J, -DELTA_C * sp.identity(m)]],
            format="csc",
        )
        try:
            sol = spla.splu(K).solve(rhs)
        except RuntimeError:
            sol = None
        if sol is not None and np.all(np.isfinite(sol)):
            return sol[:n], sol[n:]
        delta = max(1e-8, 10.0 * delta)
    return None, None


def solve(
    problem: SparseNlp,
    x0: np.ndarray,
    tol: float = 1e-4,
    max_iter: int = 100,
    mu_init: float = 1e-2,
) -> IpResult:
    lower = np.asarray(problem.lower, dtype=float)
    upper = np.asarray(problem.upper, dtype=float)
    n = problem.n
    x, has_l, has_u = _interior_start(x0, lower, upper)
    mu_min = tol / 10.0

    def slacks(x):
        sl = np.where(has_l, x - lower, 1.0)
        su = np.where(has_u, upper - x, 1.0)
        return sl, su

    def complete_duals(g, J, y, sl, su):
        """Best admissible bound duals for the current gradient residual."""
        r = g + (J.T @ y if len(y) else 0.0)
        zl = np.where(has_l, np.maximum(r, 0.0), 0.0)
        zu = np.where(has_u, np.maximum(-r, 0.0), 0.0)
        stat = float(np.max(np.abs(r - zl + zu), initial=0.0))
        comp = float(
            max(np.max(sl * zl, initial=0.0), np.max(su * zu, initial=0.0))
        )
        return zl, zu, stat, comp

    def kkt_measure(g, c, J, y, sl, su):
        """(error, stat, feas, comp) of the dual-completed KKT system."""
        zl, zu, stat, comp = complete_duals(g, J, y, sl, su)
        feas = float(np.max(np.abs(c), initial=0.0))
        return max(stat, feas, comp), stat, feas, comp

    def barrier_value(x_val, f_val, mu_val):
        sl_v, su_v = slacks(x_val)
        if np.any(sl_v[has_l] <= 0.0) or np.any(su_v[has_u] <= 0.0):
            return np.inf
        return f_val - mu_val * (
            np.log(sl_v[has_l]).sum() + np.log(su_v[has_u]).sum()
        )

    def boundary_cap(x_val, direction, tau):
        sl_v, su_v = slacks(x_val)
        cap = 1.0
        neg = has_l & (direction < 0)
        if np.any(neg):
            cap = min(cap, float(np.min(-tau * sl_v[neg] / direction[neg])))
        pos = has_u & (direction > 0)
        if np.any(pos):
            cap = min(cap, float(np.min(tau * su_v[pos] / direction[pos])))
        return cap

    g = problem.gradient(x)
    c = problem.constraints(x)
    J = problem.jacobian(x).tocsr()
    m = len(c)
    y = _least_squares_multipliers(J, g) if m else np.zeros(0)
    sl, su = slacks(x)

    # probe whether the start is already nearly optimal before committing to
    # the barrier continuation; warm starts then finish with Newton steps
    e_probe = kkt_measure(g, c, J, y, sl, su)[0]
    mu = mu_min if e_probe <= 10.0 * tol else mu_init

    radius = TR_INIT
    nu = 1.0
    iterations = 0
    status = "max_iter"
    converged = False
    max_cg = max(30, min(200, 2 * int(np.sqrt(n))))

    for _ in range(max_iter):
        sl, su = slacks(x)
        e0, stat0, feas0, comp0 = kkt_measure(g, c, J, y, sl, su)
        if e0 <= tol:
            converged, status = True, "optimal"
            break

        grad_bar = g - np.where(has_l, mu / sl, 0.0) + np.where(has_u, mu / su, 0.0)
        stat_bar = float(np.max(np.abs(grad_bar + (J.T @ y if m else 0.0)),
                                initial=0.0))
        near_optimal = e0 <= 10.0 * tol
        if near_optimal:
            mu = mu_min
        else:
            while max(stat_bar, feas0) <= KAPPA_EPS * mu and mu > mu_min:
                mu = max(mu_min, min(KAPPA_MU * mu, mu**THETA_MU))
                grad_bar = (g - np.where(has_l, mu / sl, 0.0)
                            + np.where(has_u, mu / su, 0.0))
                stat_bar = float(np.max(np.abs(grad_bar + (J.T @ y if m else 0.0)),
                                        initial=0.0))
        polish = near_optimal or (
            mu <= mu_min * (1.0 + 1e-9) and feas0 <= 100.0 * tol
        )
        tau = max(TAU_MIN, 1.0 - mu)

        sigma = (np.where(has_l, mu / sl**2, 0.0)
                 + np.where(has_u, mu / su**2, 0.0))
        H = problem.hessian(x, y)
        W = (H + sp.diags(sigma)).tocsr()
        # affine scaling: measure the trust region in the metric that makes
        # the barrier curvature O(1), so variables settling onto a bound can
        # keep moving in log scale instead of freezing the radius
        D = 1.0 / np.sqrt(sigma + 1.0)
        Dmat = sp.diags(D)
        W_s = (Dmat @ W @ Dmat).tocsr()
        grad_s = D * grad_bar
        if m:
            J_s = (J @ Dmat).tocsr()
            proj = _Projector(J_s, n, m)
        else:
            proj = _IdentityProjector(n)

        if polish and m:
            # endgame: full primal-dual Newton step on the KKT system
            rhs = -np.concatenate([grad_bar + J.T @ y, c])
            dx, dy = _newton_step(W, J, rhs, n, m)
            if dx is not None:
                alpha = min(1.0, boundary_cap(x, dx, tau))
                x_try = x + alpha * dx
                g_try = problem.gradient(x_try)
                c_try = problem.constraints(x_try)
                J_try = problem.jacobian(x_try).tocsr()
                y_try = y + alpha * dy
                sl_t, su_t = slacks(x_try)
                e_try = kkt_measure(g_try, c_try, J_try, y_try, sl_t, su_t)[0]
                if e_try < e0:
                    x, g, c, J, y = x_try, g_try, c_try, J_try, y_try
                    iterations += 1
                    logger.debug(
                        "iter %d: newton endgame alpha=%.2e kkt=%.2e mu=%.1e",
                        iterations, alpha, e_try, mu,
                    )
                    continue

        # composite trust-region step on the mu-barrier problem, computed in
        # the scaled variables and mapped back through D
        rtol_cg = min(CG_TOL, np.sqrt(max(stat_bar, 1e-16)))
        if m:
            v_s = _dogleg_normal(proj, c, 0.8 * radius)
        else:
            v_s = np.zeros(n)
        t_s = _projected_cg(proj, W_s, grad_s, v_s, radius, max_cg, rtol_cg)
        dx_s = v_s + t_s
        dx = D * dx_s

        step_norm = float(np.linalg.norm(dx_s))
        if step_norm <= 1e-12 * max(1.0, float(np.linalg.norm(x))):
            # the barrier problem is solved at this mu: refresh the
            # multipliers and push mu toward its floor
            if m:
                y = proj.multipliers(grad_s)
            if mu > mu_min:
                mu = max(mu_min, min(KAPPA_MU * mu, mu**THETA_MU))
            iterations += 1
            continue
        beta = min(1.0, boundary_cap(x, dx, tau))
        dx_cut = beta * dx

        f = problem.objective(x)
        phi = barrier_value(x, f, mu)
        c_norm = float(np.linalg.norm(c))
        c_lin = float(np.linalg.norm(c + J @ dx_cut)) if m else 0.0
        quad = float(grad_bar @ dx_cut + 0.5 * (dx_cut @ (W @ dx_cut)))
        vpred = c_norm - c_lin
        # raise the penalty weight until the model predicts decrease
        if m and vpred > 0.0 and quad > 0.0:
            nu = max(nu, quad / ((1.0 - 0.3) * vpred) + 1e-4)
        pred = -quad + nu * vpred
        if pred <= 0.0 and m and vpred > 0.0:
            nu = max(nu * 2.0, 2.0 * abs(quad) / vpred)
            pred = -quad + nu * vpred

        merit = phi + nu * c_norm

        def trial_merit(x_try):
            f_try = problem.objective(x_try)
            c_try = problem.constraints(x_try)
            return (
                barrier_value(x_try, f_try, mu)
                + nu * float(np.linalg.norm(c_try)),
                c_try,
            )

        x_try = x + dx_cut
        merit_try, c_try = trial_merit(x_try)
        ratio = (merit - merit_try) / pred if pred > 0.0 else -np.inf
        soc_used = False
        if ratio < TR_ETA and m:
            # second-order correction for the constraint overshoot
            d_soc = dx_cut - D * proj.least_norm(c_try)
            beta_soc = min(1.0, boundary_cap(x, d_soc, tau))
            x_soc = x + beta_soc * d_soc
            merit_soc, c_soc = trial_merit(x_soc)
            ratio_soc = (merit - merit_soc) / pred if pred > 0.0 else -np.inf
            if ratio_soc >= TR_ETA:
                x_try, merit_try, c_try, ratio = x_soc, merit_soc, c_soc, ratio_soc
                soc_used = True

        iterations += 1
        if ratio >= TR_ETA and np.isfinite(merit_try):
            if ratio >= 0.25 and step_norm >= 0.8 * radius:
                # any healthy boundary-hitting step earns a larger radius;
                # freezing it on middling ratios turns long valleys into
                # thousands of radius-capped crawl steps
                radius = min(TR_MAX, TR_EXPAND * radius)
            elif ratio < 0.25:
                radius = max(TR_SHRINK * step_norm, 1e-12)
        else:
            radius = max(TR_SHRINK * min(radius, step_norm), 1e-12)
            if radius <= 1e-11:
                if float(np.max(np.abs(c), initial=0.0)) > tol:
                    raise InfeasibleDetected(
                        "trust region collapsed at constraint violation %g"
                        % float(np.max(np.abs(c), initial=0.0))
                    )
                status = "stalled"
                break
            logger.debug(
                "iter %d: step rejected ratio=%.2e radius=%.2e mu=%.1e nu=%.1e",
                iterations, ratio, radius, mu, nu,
            )
            continue

        x = x_try
        c = c_try
        g = problem.gradient(x)
        J = problem.jacobian(x).tocsr()
        if m:
            # weighted least-squares multipliers off the factorization at
            # hand; the slightly stale Jacobian is fine for an estimate
            sl, su = slacks(x)
            grad_bar_new = (g - np.where(has_l, mu / sl, 0.0)
                            + np.where(has_u, mu / su, 0.0))
            y_new = proj.multipliers(D * grad_bar_new)
            if np.all(np.isfinite(y_new)):
                y = y_new
        logger.debug(
            "iter %d: f=%.6e feas=%.2e stat=%.2e mu=%.1e radius=%.2e ratio=%.2f "
            "nu=%.1e quad=%+.1e vpred=%.1e%s",
            iterations, problem.objective(x), float(np.max(np.abs(c), initial=0.0)),
            stat0, mu, radius, ratio, nu, quad, vpred, " soc" if soc_used else "",
        )

    sl, su = slacks(x)
    e0, _, feas, _ = kkt_measure(g, c, J, y, sl, su)
    if not converged and e0 <= tol:
        converged, status = True, "optimal"
    zl, zu, _, _ = complete_duals(g, J, y, sl, su)
    return IpResult(
        x=x,
        y=y,
        z_lower=zl,
        z_upper=zu,
        objective=problem.objective(x),
        kkt_error=e0,
        constraint_inf=feas,
        mu=mu,
        iterations=iterations,
        converged=converged,
        status=status,
    )
