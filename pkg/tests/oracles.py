"""Independent reference implementations used to check the package.

Everything here is written as plain scalar loops straight from the lumped
segment model:

    momentum, edge k (tail t -> head h, dimensionless length Lh):
        Lh * (l0 * friction / diameter) * phi|phi|
            + (alpha_hi * rho_h)^2 - (alpha_lo * rho_t)^2  =  0

    mass, non-slack node j, grid point n (central difference, circular):
        sum over edges k touching j of
            X_k * Lh_k * (alpha_lo_k[n] * drho_tail + alpha_hi_k[n] * drho_head)
        = 4 * ( sum_{k: head=j} X_k phi_k[n] - sum_{k: tail=j} X_k phi_k[n]
                - d_j[n] )

No arrays are vectorized over edges or nodes on purpose: agreement with the
package's matrix evaluation to 1e-12 is then meaningful evidence rather than
the same code run twice.
"""

from __future__ import annotations

import math

import numpy as np

SMOOTHING_EPS = 1e-8


def g_exact(phi: float) -> float:
    return phi * abs(phi)


def g_smooth(phi: float) -> float:
    return phi * math.sqrt(phi * phi + SMOOTHING_EPS * SMOOTHING_EPS)


def momentum_rows(
    tail,
    head,
    seg_length,
    diameter,
    friction_seg,
    length_scale,
    alpha_lo_n,
    alpha_hi_n,
    node_density_n,
    phi_n,
    smooth: bool,
):
    """Per-edge momentum residuals at one grid point, as a python list."""
    g = g_smooth if smooth else g_exact
    out = []
    for k in range(len(tail)):
        coef = seg_length[k] * length_scale * friction_seg[k] / diameter[k]
        rho_in = alpha_lo_n[k] * node_density_n[tail[k]]
        rho_out = alpha_hi_n[k] * node_density_n[head[k]]
        out.append(coef * g(phi_n[k]) + rho_out**2 - rho_in**2)
    return out


def mass_rows(
    tail,
    head,
    seg_length,
    area,
    n_slack,
    n_nodes,
    alpha_lo,
    alpha_hi,
    dens_traj,
    phi,
    withdrawal_full,
    dt,
    n,
):
    """Per-node mass residuals (non-slack rows) at grid point n.

    dens_traj has one row per node (slack rows first) and one column per
    grid point; withdrawal_full covers every non-slack node (zeros at
    auxiliary junctions).
    """
    n_steps = dens_traj.shape[1]
    nxt, prv = (n + 1) % n_steps, (n - 1) % n_steps
    out = []
    for j in range(n_slack, n_nodes):
        acc = 0.0
        flow = 0.0
        for k in range(len(tail)):
            t, h = tail[k], head[k]
            if t != j and h != j:
                continue
            drho_t = (dens_traj[t, nxt] - dens_traj[t, prv]) / (2.0 * dt)
            drho_h = (dens_traj[h, nxt] - dens_traj[h, prv]) / (2.0 * dt)
            acc += area[k] * seg_length[k] * (
                alpha_lo[k, n] * drho_t + alpha_hi[k, n] * drho_h
            )
            if h == j:
                flow += area[k] * phi[k, n]
            if t == j:
                flow -= area[k] * phi[k, n]
        out.append(acc - 4.0 * (flow - withdrawal_full[j - n_slack, n]))
    return out


def full_residual(
    refined, alpha_lo, alpha_hi, supply, density, phi, withdrawal, friction, dt, smooth
):
    """Stacked residual over the whole circular grid, scalar loops only.

    Layout matches the package contract: for each grid point, first the
    non-slack mass rows, then the edge momentum rows.  friction is given
    per parent pipe.
    """
    n_steps = supply.shape[1]
    dens_traj = np.vstack([supply, density])
    withdrawal_full = np.zeros((refined.n_nonslack, n_steps))
    withdrawal_full[: withdrawal.shape[0]] = withdrawal
    friction_seg = [friction[refined.parent[k]] for k in range(refined.n_edges)]
    out = []
    for n in range(n_steps):
        out.extend(
            mass_rows(
                refined.tail, refined.head, refined.length, refined.area,
                refined.n_slack, refined.n_nodes, alpha_lo, alpha_hi,
                dens_traj, phi, withdrawal_full, dt, n,
            )
        )
        out.extend(
            momentum_rows(
                refined.tail, refined.head, refined.length, refined.diameter,
                friction_seg, refined.scales.length,
                alpha_lo[:, n], alpha_hi[:, n], dens_traj[:, n], phi[:, n],
                smooth,
            )
        )
    return np.array(out)


def steady_edge_rho_out(rho_in: float, coef: float, phi: float) -> float:
    """Closed form of the edge momentum balance solved for the out density."""
    return math.sqrt(rho_in**2 - coef * phi * abs(phi))


def steady_edge_rho_out_bisect(rho_in: float, coef: float, phi: float) -> float:
    """Same root found by bisection on the residual, no algebra reused."""
    lo, hi = 0.0, max(2.0 * rho_in, 1.0)

    def f(rho_out: float) -> float:
        return coef * phi * abs(phi) + rho_out**2 - rho_in**2

    if f(hi) < 0.0:
        raise AssertionError("bisection bracket too small")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def edge_end_fluxes(refined, alpha_lo, alpha_hi, supply, density, phi, dt):
    """Entering and leaving flux per edge from the segment mass balance.

    The lumped segment stores mass at rate X*Lh*d/dt(weighted end density
    sum)/4 split symmetrically, so the end fluxes are phi -/+ phi_half with
    phi_half = -(Lh/4)*(alpha_lo*drho_tail + alpha_hi*drho_head).
    """
    n_steps = supply.shape[1]
    dens = np.vstack([supply, density])
    phi_in = np.empty_like(phi)
    phi_out = np.empty_like(phi)
    for k in range(refined.n_edges):
        for n in range(n_steps):
            nxt, prv = (n + 1) % n_steps, (n - 1) % n_steps
            drho_t = (dens[refined.tail[k], nxt] - dens[refined.tail[k], prv]) / (2 * dt)
            drho_h = (dens[refined.head[k], nxt] - dens[refined.head[k], prv]) / (2 * dt)
            half = -(refined.length[k] / 4.0) * (
                alpha_lo[k, n] * drho_t + alpha_hi[k, n] * drho_h
            )
            phi_in[k, n] = phi[k, n] - half
            phi_out[k, n] = phi[k, n] + half
    return phi_in, phi_out


def period_mass_totals(refined, alpha_lo, alpha_hi, supply, density, phi, withdrawal, dt):
    """Total supplied and withdrawn mass over one period, scalar sums.

    Supplied mass enters at slack nodes: for an edge whose tail is slack the
    entering flux leaves that node, for an edge whose head is slack the
    leaving flux arrives there (counted negative).
    """
    phi_in, phi_out = edge_end_fluxes(
        refined, alpha_lo, alpha_hi, supply, density, phi, dt
    )
    n_steps = supply.shape[1]
    supplied = 0.0
    for k in range(refined.n_edges):
        for n in range(n_steps):
            if refined.tail[k] < refined.n_slack:
                supplied += refined.area[k] * phi_in[k, n] * dt
            if refined.head[k] < refined.n_slack:
                supplied -= refined.area[k] * phi_out[k, n] * dt
    withdrawn = float(withdrawal.sum()) * dt
    return supplied, withdrawn


def random_network_dict(rng: np.random.Generator, n_nodes: int) -> dict:
    """Connected random network document: spanning tree plus a few chords.

    Node 0 is the slack junction; compressors land on a random subset of
    pipes with random orientation.
    """
    names = ["N%02d" % i for i in range(n_nodes)]
    junctions = [
        {
            "id": names[i],
            "kind": "slack" if i == 0 else "non-slack",
            "density_min": 10.0,
            "density_max": 60.0,
        }
        for i in range(n_nodes)
    ]
    edges = set()
    pipes = []

    def add_pipe(a: int, b: int) -> None:
        pid = "E%02d" % len(pipes)
        if rng.random() < 0.5:
            a, b = b, a
        pipes.append({
            "id": pid,
            "from": names[a],
            "to": names[b],
            "length": float(rng.uniform(5e3, 60e3)),
            "diameter": float(rng.uniform(0.3, 0.95)),
            "friction": float(rng.uniform(0.008, 0.02)),
        })
        edges.add(frozenset((a, b)))

    for i in range(1, n_nodes):
        add_pipe(int(rng.integers(0, i)), i)
    for _ in range(int(rng.integers(0, n_nodes))):
        a, b = rng.integers(0, n_nodes, size=2)
        if a != b and frozenset((int(a), int(b))) not in edges:
            add_pipe(int(a), int(b))

    compressors = []
    for p, pipe in enumerate(pipes):
        if rng.random() < 0.3:
            compressors.append({
                "id": "C%02d" % p,
                "pipe": pipe["id"],
                "orientation": "+" if rng.random() < 0.5 else "-",
            })
    return {
        "gas": {"sound_speed": 377.0},
        "junctions": junctions,
        "pipes": pipes,
        "compressors": compressors,
    }
