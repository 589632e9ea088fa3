"""Built-in example systems: a six-node delivery network and a randomized
network at the scale of a real transmission system.

Profiles are evaluated from smooth closed-form daily shapes, so the same
physical scenario can be sampled on any grid resolution; refining the grid
refines the data instead of interpolating it.
"""

from __future__ import annotations

import math

import numpy as np

from .network import GasNetwork, network_from_dict
from .nondim import default_scales, nondimensionalize
from .refinement import refine_graph
from .simulate import steady_state_solve
from .timeseries import ProfileSet

SOUND_SPEED = 377.0
GAS_CONSTANT = 518.28
TEMPERATURE = 300.0
DAY_SECONDS = 86400.0
MILE = 1609.344
PAPER_TOTAL_MILES = 444.25


def _gas_dict() -> dict:
    return {
        "sound_speed": SOUND_SPEED,
        "gas_constant": GAS_CONSTANT,
        "temperature": TEMPERATURE,
        "compressibility": SOUND_SPEED**2 / (GAS_CONSTANT * TEMPERATURE),
    }


def six_node_network() -> GasNetwork:
    """Five pipes in a small delivery tree with one boosted supply line."""
    doc = {
        "gas": _gas_dict(),
        "junctions": [
            {"id": "J0", "kind": "slack"},
            {"id": "J1", "kind": "non-slack"},
            {"id": "J2", "kind": "non-slack"},
            {"id": "J3", "kind": "non-slack"},
            {"id": "J4", "kind": "non-slack"},
            {"id": "J5", "kind": "non-slack"},
        ],
        "pipes": [
            {"id": "P1", "from": "J0", "to": "J1", "length": 30e3, "diameter": 0.9, "friction": 0.011},
            {"id": "P2", "from": "J1", "to": "J2", "length": 45e3, "diameter": 0.75, "friction": 0.012},
            {"id": "P3", "from": "J2", "to": "J3", "length": 25e3, "diameter": 0.6, "friction": 0.010},
            {"id": "P4", "from": "J2", "to": "J4", "length": 35e3, "diameter": 0.6, "friction": 0.013},
            {"id": "P5", "from": "J1", "to": "J5", "length": 20e3, "diameter": 0.5, "friction": 0.014},
        ],
        "compressors": [
            {"id": "C1", "pipe": "P1", "orientation": "+"},
        ],
    }
    return network_from_dict(doc, source="six_node_network")


def six_node_profiles(
    n_steps: int = 24, period_seconds: float = DAY_SECONDS
) -> ProfileSet:
    """Daily sinusoidal boundary conditions sampled on n_steps points.

    The compressor ratio is constant over the period so the discrete
    period-total mass balance telescopes exactly.
    """
    t = np.arange(n_steps) / n_steps  # fraction of the period
    w = 2.0 * math.pi * t
    profiles = ProfileSet(dt_seconds=period_seconds / n_steps)
    profiles.supply_density["J0"] = 29.6 + 0.6 * np.sin(w)
    profiles.withdrawal["J1"] = 10.0 + 4.0 * np.sin(w + 1.0)
    profiles.withdrawal["J2"] = 12.0 + 5.0 * np.cos(w)
    profiles.withdrawal["J3"] = 35.0 + 12.0 * np.sin(w + 0.5)
    profiles.withdrawal["J4"] = 28.0 + 10.0 * np.sin(w + 2.0)
    profiles.withdrawal["J5"] = 22.0 + 8.0 * np.sin(2.0 * w)
    profiles.ratio["C1"] = np.full(n_steps, 1.25)
    return profiles


def paper_scale_network(seed: int = 7) -> GasNetwork:
    """Randomized 78-junction, 95-pipe, 4-compressor transmission network.

    Topology is a random spanning tree plus chords; pipe lengths are drawn
    lognormally and rescaled so the system totals 444.25 miles.  Withdrawal
    magnitudes are balanced against the single supply so the steady state
    keeps every density inside its box (see paper_scale_profiles).
    """
    rng = np.random.default_rng(seed)
    n_nodes, n_pipes, n_comp = 78, 95, 4

    parents = [int(rng.integers(0, i)) for i in range(1, n_nodes)]
    edges = [(p, i) for i, p in enumerate(parents, start=1)]
    existing = {frozenset(e) for e in edges}
    while len(edges) < n_pipes:
        a, b = rng.integers(0, n_nodes, size=2)
        if a == b or frozenset((int(a), int(b))) in existing:
            continue
        edges.append((int(a), int(b)))
        existing.add(frozenset((int(a), int(b))))

    lengths = rng.lognormal(mean=math.log(6.5e3), sigma=0.55, size=n_pipes)
    lengths = np.clip(lengths, 1.5e3, 32.0e3)
    lengths *= PAPER_TOTAL_MILES * MILE / lengths.sum()
    diameters = rng.choice([0.5, 0.6, 0.75, 0.9], size=n_pipes, p=[0.2, 0.3, 0.3, 0.2])
    frictions = rng.uniform(0.009, 0.018, size=n_pipes)

    comp_pipes = sorted(int(p) for p in rng.choice(n_pipes, size=n_comp, replace=False))

    doc = {
        "gas": _gas_dict(),
        "junctions": [
            {"id": "N%02d" % (i + 1), "kind": "slack" if i == 0 else "non-slack"}
            for i in range(n_nodes)
        ],
        "pipes": [
            {
                "id": "P%02d" % (k + 1),
                "from": "N%02d" % (edges[k][0] + 1),
                "to": "N%02d" % (edges[k][1] + 1),
                "length": float(lengths[k]),
                "diameter": float(diameters[k]),
                "friction": float(frictions[k]),
            }
            for k in range(n_pipes)
        ],
        "compressors": [
            {"id": "C%d" % (i + 1), "pipe": "P%02d" % (p + 1), "orientation": "+"}
            for i, p in enumerate(comp_pipes)
        ],
    }
    return network_from_dict(doc, source="paper_scale_network")


def paper_scale_profiles(
    network: GasNetwork,
    n_steps: int = 24,
    seed: int = 7,
    period_seconds: float = DAY_SECONDS,
) -> ProfileSet:
    """Daily boundary conditions scaled until the steady state is in-box.

    Roughly half of the junctions withdraw, with random phases; the total
    draw is reduced geometrically until the period-mean steady state keeps
    a safety margin to every density box, so the transient stays feasible.
    """
    rng = np.random.default_rng(seed + 1)
    t = np.arange(n_steps) / n_steps
    w = 2.0 * math.pi * t

    profiles = ProfileSet(dt_seconds=period_seconds / n_steps)
    slack_id = network.slack_ids()[0]
    profiles.supply_density[slack_id] = 30.0 + 0.5 * np.sin(w)
    for comp in network.compressors:
        base = float(rng.uniform(1.12, 1.28))
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        profiles.ratio[comp.id] = base + 0.03 * np.sin(w + phase)

    nonslack = network.nonslack_ids()
    n_loads = len(nonslack) // 2 + 6
    load_ids = sorted(rng.choice(nonslack, size=n_loads, replace=False))
    bases = rng.uniform(2.0, 11.0, size=n_loads)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=n_loads)
    amps = rng.uniform(0.15, 0.3, size=n_loads)

    scales = default_scales(network.gas)
    factor = 1.0
    for _ in range(20):
        withdrawal = {
            jid: factor * bases[i] * (1.0 + amps[i] * np.sin(w + phases[i]))
            for i, jid in enumerate(load_ids)
        }
        profiles.withdrawal = withdrawal
        ndnet, ndprof = nondimensionalize(network, profiles, scales, n_steps)
        refined = refine_graph(ndnet, 10.0e3 / scales.length)
        supply_mean = ndprof.supply.mean(axis=1)
        d_mean = ndprof.withdrawal.mean(axis=1)
        ratios_mean = {cid: float(np.mean(r)) for cid, r in ndprof.ratio.items()}
        try:
            rho, _ = steady_state_solve(refined, supply_mean, d_mean, ratios_mean)
        except Exception:
            factor *= 0.7
            continue
        b = refined.n_slack
        lo = refined.rho_min[b:] + 0.08
        hi = refined.rho_max[b:] - 0.08
        if np.all(rho > lo) and np.all(rho < hi):
            return profiles
        factor *= 0.8
    raise RuntimeError("could not balance synthetic withdrawals")


def paper_scale_mask(network: GasNetwork, n_metered: int = 31, seed: int = 7) -> tuple[str, ...]:
    """Deterministic choice of metered junctions."""
    rng = np.random.default_rng(seed + 2)
    picked = rng.choice(network.nonslack_ids(), size=n_metered, replace=False)
    return tuple(sorted(picked))
