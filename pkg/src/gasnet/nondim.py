"""Reference scales and conversion between SI and dimensionless fields.

Scaling follows the wave structure of the isothermal equations: lengths by
l0, times by l0/a, densities by rho0, fluxes by a*rho0.  Withdrawal mass
flows (kg/s) are scaled by a*rho0 as well, with pipe cross sections kept in
m2, so nodal balances keep their form without an extra area scale.
Friction factors are dimensionless already and pipe diameters stay in
meters; the momentum coefficient l0*friction/diameter absorbs the length
scale where it appears.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ScaleMismatch
from .network import GasNetwork, GasProperties, pressure_to_density
from .timeseries import ProfileSet, TimeGrid, resample_periodic

DEFAULT_LENGTH_SCALE = 50.0e3
DEFAULT_REFERENCE_PRESSURE = 5.0e6


@dataclass(frozen=True)
class Scales:
    """Reference length (m), density (kg/m3) and sound speed (m/s)."""

    length: float
    density: float
    sound_speed: float

    def __post_init__(self) -> None:
        for name in ("length", "density", "sound_speed"):
            if not getattr(self, name) > 0.0:
                raise ScaleMismatch("scale %s must be positive" % name)

    @property
    def time(self) -> float:
        return self.length / self.sound_speed

    @property
    def flux(self) -> float:
        return self.sound_speed * self.density


def default_scales(
    gas: GasProperties,
    length: float = DEFAULT_LENGTH_SCALE,
    reference_pressure: float = DEFAULT_REFERENCE_PRESSURE,
) -> Scales:
    """Length 50 km and the density of gas at 5 MPa unless overridden."""
    return Scales(length, pressure_to_density(reference_pressure, gas), gas.sound_speed)


def check_scales(scales: Scales, gas: GasProperties) -> None:
    a = gas.sound_speed
    if abs(scales.sound_speed - a) > 1e-9 * a:
        raise ScaleMismatch(
            "scale sound speed %r does not match the gas (%r)"
            % (scales.sound_speed, a)
        )


@dataclass(frozen=True)
class NondimNetwork:
    """Network reduced to index arrays with dimensionless lengths and boxes.

    Junction order matches GasNetwork (slack first); tail/head hold junction
    positions per pipe.  Diameters and areas stay dimensional (m, m2).
    """

    scales: Scales
    junction_ids: tuple[str, ...]
    n_slack: int
    rho_min: np.ndarray
    rho_max: np.ndarray
    pipe_ids: tuple[str, ...]
    tail: np.ndarray
    head: np.ndarray
    length: np.ndarray
    diameter: np.ndarray
    friction: np.ndarray
    area: np.ndarray
    compressors: tuple[tuple[str, int, str], ...]


@dataclass(frozen=True)
class NondimProfiles:
    """Boundary series on a dimensionless circular grid.

    supply has one row per slack junction, withdrawal one row per non-slack
    junction, both in network order; ratio is keyed by compressor id.
    """

    grid: TimeGrid
    supply: np.ndarray
    withdrawal: np.ndarray
    ratio: dict[str, np.ndarray]


@dataclass(frozen=True)
class SpaceTimeState:
    """One period of a (possibly refined) network's dimensionless state.

    supply covers slack nodes, density the non-slack nodes, flux the edges;
    all arrays have one column per grid point.
    """

    grid: TimeGrid
    supply: np.ndarray
    density: np.ndarray
    flux: np.ndarray

    def node_density(self) -> np.ndarray:
        return np.vstack([self.supply, self.density])


@dataclass(frozen=True)
class DimensionalState:
    """SI mirror of SpaceTimeState: kg/m3 densities, kg/m2/s fluxes."""

    times_seconds: np.ndarray
    density: np.ndarray
    flux: np.ndarray


def nondimensionalize_network(network: GasNetwork, scales: Scales) -> NondimNetwork:
    check_scales(scales, network.gas)
    jindex = network.junction_index
    rho_min = np.array([j.density_min for j in network.junctions]) / scales.density
    rho_max = np.array([j.density_max for j in network.junctions]) / scales.density
    pindex = network.pipe_index
    return NondimNetwork(
        scales=scales,
        junction_ids=tuple(j.id for j in network.junctions),
        n_slack=network.n_slack,
        rho_min=rho_min,
        rho_max=rho_max,
        pipe_ids=tuple(p.id for p in network.pipes),
        tail=np.array([jindex[p.from_id] for p in network.pipes], dtype=int),
        head=np.array([jindex[p.to_id] for p in network.pipes], dtype=int),
        length=np.array([p.length for p in network.pipes]) / scales.length,
        diameter=np.array([p.diameter for p in network.pipes]),
        friction=np.array([p.friction for p in network.pipes]),
        area=np.array([p.area for p in network.pipes]),
        compressors=tuple(
            (c.id, pindex[c.pipe_id], c.orientation) for c in network.compressors
        ),
    )


def nondimensionalize_profiles(
    network: GasNetwork,
    profiles: ProfileSet,
    scales: Scales,
    n_steps: int | None = None,
) -> NondimProfiles:
    """Scale boundary series and optionally resample them to n_steps points."""
    check_scales(scales, network.gas)
    profiles.validate(network)
    n_src = profiles.n_steps
    n = n_src if n_steps is None else n_steps
    grid = TimeGrid(horizon=profiles.horizon_seconds / scales.time, n_steps=n)

    def take(series: np.ndarray) -> np.ndarray:
        return resample_periodic(series, n)

    slack_ids = network.slack_ids()
    nonslack_ids = network.nonslack_ids()
    supply = np.empty((len(slack_ids), n))
    for i, sid in enumerate(slack_ids):
        supply[i] = take(profiles.supply_density[sid]) / scales.density
    withdrawal = np.zeros((len(nonslack_ids), n))
    for i, jid in enumerate(nonslack_ids):
        if jid in profiles.withdrawal:
            withdrawal[i] = take(profiles.withdrawal[jid]) / scales.flux
    ratio = {cid: take(profiles.ratio[cid]) for cid, _, _ in
             nondimensionalize_network(network, scales).compressors}
    return NondimProfiles(grid=grid, supply=supply, withdrawal=withdrawal, ratio=ratio)


def nondimensionalize(
    network: GasNetwork,
    profiles: ProfileSet,
    scales: Scales,
    n_steps: int | None = None,
) -> tuple[NondimNetwork, NondimProfiles]:
    return (
        nondimensionalize_network(network, scales),
        nondimensionalize_profiles(network, profiles, scales, n_steps),
    )


def redimensionalize_state(state: SpaceTimeState, scales: Scales) -> DimensionalState:
    """Map a dimensionless state back to SI units."""
    return DimensionalState(
        times_seconds=state.grid.times() * scales.time,
        density=state.node_density() * scales.density,
        flux=state.flux * scales.flux,
    )


def nondimensionalize_state(
    dim_state: DimensionalState, scales: Scales, n_slack: int
) -> SpaceTimeState:
    """Exact inverse of redimensionalize_state."""
    n = dim_state.density.shape[1]
    if dim_state.flux.shape[1] != n or len(dim_state.times_seconds) != n:
        raise DimensionMismatch("state arrays disagree on the number of time points")
    horizon = n * float(dim_state.times_seconds[1] - dim_state.times_seconds[0])
    grid = TimeGrid(horizon=horizon / scales.time, n_steps=n)
    density = dim_state.density / scales.density
    return SpaceTimeState(
        grid=grid,
        supply=density[:n_slack],
        density=density[n_slack:],
        flux=dim_state.flux / scales.flux,
    )
