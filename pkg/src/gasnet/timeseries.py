"""Time grids, boundary profiles, measurements and their CSV forms.

All series in this module live on a circular grid: a file with N rows at
spacing dt covers one period T = N*dt, row 0 is t = 0 and the sample after
row N-1 wraps to row 0.  No duplicate terminal row is stored.

CSV layout is a `time` column in seconds followed by one column per series.
Boundary profile files use bare ids; the role of each column (supply
density kg/m3, withdrawal mass flow kg/s, compressor ratio) follows from
what the id names in the network.  Measurement files prefix every column
with its role: `s:` supply density, `alpha:` compressor ratio, `rho:`
measured density, `d:` measured withdrawal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvariantViolation,
    MalformedFile,
    MissingRatio,
    SchemaViolation,
)
from .network import GasNetwork

MIN_STEPS = 4


@dataclass(frozen=True)
class TimeGrid:
    """Uniform circular grid with n_steps distinct points over one period."""

    horizon: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise InvariantViolation("time horizon must be positive")
        if self.n_steps < MIN_STEPS:
            raise InvariantViolation(
                "circular grid needs at least %d steps, got %d"
                % (MIN_STEPS, self.n_steps)
            )

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def wrap(self, n: int) -> int:
        return n % self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt


@dataclass
class ProfileSet:
    """Dimensional boundary conditions for one period.

    supply_density is keyed by slack junction id (kg/m3), withdrawal by
    non-slack junction id (kg/s, positive out of the network), ratio by
    compressor id (dimensionless, at least 1 where the compressor boosts).
    """

    dt_seconds: float
    supply_density: dict[str, np.ndarray] = field(default_factory=dict)
    withdrawal: dict[str, np.ndarray] = field(default_factory=dict)
    ratio: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        for group in (self.supply_density, self.withdrawal, self.ratio):
            for series in group.values():
                return len(series)
        raise InvariantViolation("profile set holds no series")

    @property
    def horizon_seconds(self) -> float:
        return self.dt_seconds * self.n_steps

    def validate(self, network: GasNetwork) -> None:
        n = self.n_steps
        for name, group in (
            ("supply", self.supply_density),
            ("withdrawal", self.withdrawal),
            ("ratio", self.ratio),
        ):
            for key, series in group.items():
                if len(series) != n:
                    raise DimensionMismatch(
                        "%s series %r has %d rows, expected %d"
                        % (name, key, len(series), n)
                    )
        for sid in network.slack_ids():
            if sid not in self.supply_density:
                raise SchemaViolation("no supply density series for slack junction %r" % sid)
        for comp in network.compressors:
            if comp.id not in self.ratio:
                raise MissingRatio("no ratio series for compressor %r" % comp.id)
            if np.any(self.ratio[comp.id] < 1.0):
                raise InvariantViolation(
                    "compressor %r ratio drops below 1" % comp.id
                )
        for sid, series in self.supply_density.items():
            if np.any(series <= 0.0):
                raise InvariantViolation("supply density at %r is not positive" % sid)


@dataclass
class MeasurementSet:
    """Observed series at metered junctions; key presence is the mask."""

    dt_seconds: float
    density: dict[str, np.ndarray] = field(default_factory=dict)
    withdrawal: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        for group in (self.density, self.withdrawal):
            for series in group.values():
                return len(series)
        raise InvariantViolation("measurement set holds no series")

    def metered_ids(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.density) | set(self.withdrawal)))


@dataclass
class KnownBoundaries:
    """Series the estimator treats as given rather than estimated."""

    dt_seconds: float
    supply_density: dict[str, np.ndarray] = field(default_factory=dict)
    ratio: dict[str, np.ndarray] = field(default_factory=dict)


def resample_periodic(values: np.ndarray, n_target: int) -> np.ndarray:
    """Linear interpolation with periodic wrap onto n_target uniform points."""
    values = np.asarray(values, dtype=float)
    n_src = len(values)
    if n_src == n_target:
        return values.copy()
    xp = np.arange(n_src + 1) / n_src
    fp = np.append(values, values[0])
    x = np.arange(n_target) / n_target
    return np.interp(x, xp, fp)


def _read_table(path: str) -> tuple[list[str], np.ndarray]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise MalformedFile("cannot read %s: %s" % (path, exc)) from exc
    if len(rows) < 2:
        raise MalformedFile("%s has no data rows" % path)
    header = [name.strip() for name in rows[0]]
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    except ValueError as exc:
        raise MalformedFile("%s contains a non-numeric cell: %s" % (path, exc)) from exc
    if data.shape[1] != len(header):
        raise MalformedFile("%s has ragged rows" % path)
    if len(header) != len(set(header)):
        raise SchemaViolation("%s repeats a column name" % path)
    if header[0] != "time":
        raise SchemaViolation("%s must start with a 'time' column" % path)
    return header, data


def _check_time_axis(path: str, times: np.ndarray) -> float:
    if len(times) < MIN_STEPS:
        raise InvariantViolation(
            "%s has %d rows, need at least %d" % (path, len(times), MIN_STEPS)
        )
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0.0 or np.any(np.abs(steps - dt) > 1e-9 * dt):
        raise InvariantViolation("%s time column is not uniformly spaced" % path)
    if abs(times[0]) > 1e-9 * dt:
        raise InvariantViolation("%s time column must start at 0" % path)
    return dt


def read_profiles(path: str, network: GasNetwork) -> ProfileSet:
    """Load a boundary profile CSV, resolving column roles via the network.

    Every slack junction and every compressor must have a column; junction
    withdrawal columns are optional and default to zero.
    """
    header, data = _read_table(path)
    dt = _check_time_axis(path, data[:, 0])
    junctions = {j.id: j for j in network.junctions}
    compressors = {c.id for c in network.compressors}
    profiles = ProfileSet(dt_seconds=dt)
    for col, name in enumerate(header[1:], start=1):
        series = data[:, col].copy()
        if name in compressors:
            profiles.ratio[name] = series
        elif name in junctions:
            if junctions[name].slack:
                profiles.supply_density[name] = series
            else:
                profiles.withdrawal[name] = series
        else:
            raise SchemaViolation(
                "%s column %r names no junction or compressor" % (path, name)
            )
    profiles.validate(network)
    return profiles


def write_profiles(path: str, profiles: ProfileSet) -> None:
    columns: list[tuple[str, np.ndarray]] = []
    for group in (profiles.supply_density, profiles.withdrawal, profiles.ratio):
        for name in sorted(group):
            columns.append((name, group[name]))
    _write_table(path, profiles.dt_seconds, columns)


def read_measurements(
    path: str, network: GasNetwork
) -> tuple[MeasurementSet, KnownBoundaries]:
    """Load a measurement CSV with role-prefixed columns."""
    header, data = _read_table(path)
    dt = _check_time_axis(path, data[:, 0])
    junctions = {j.id: j for j in network.junctions}
    compressors = {c.id for c in network.compressors}
    measured = MeasurementSet(dt_seconds=dt)
    known = KnownBoundaries(dt_seconds=dt)
    for col, name in enumerate(header[1:], start=1):
        if ":" not in name:
            raise SchemaViolation(
                "%s column %r lacks a role prefix (s:, alpha:, rho:, d:)" % (path, name)
            )
        role, _, ident = name.partition(":")
        series = data[:, col].copy()
        if role == "s":
            if ident not in junctions or not junctions[ident].slack:
                raise SchemaViolation("%s column %r names no slack junction" % (path, name))
            known.supply_density[ident] = series
        elif role == "alpha":
            if ident not in compressors:
                raise SchemaViolation("%s column %r names no compressor" % (path, name))
            known.ratio[ident] = series
        elif role == "rho":
            if ident not in junctions or junctions[ident].slack:
                raise SchemaViolation(
                    "%s column %r names no non-slack junction" % (path, name)
                )
            measured.density[ident] = series
        elif role == "d":
            if ident not in junctions or junctions[ident].slack:
                raise SchemaViolation(
                    "%s column %r names no non-slack junction" % (path, name)
                )
            measured.withdrawal[ident] = series
        else:
            raise SchemaViolation("%s column %r has unknown role %r" % (path, name, role))
    for sid in network.slack_ids():
        if sid not in known.supply_density:
            raise SchemaViolation("%s lacks supply column s:%s" % (path, sid))
    for comp in network.compressors:
        if comp.id not in known.ratio:
            raise MissingRatio("%s lacks ratio column alpha:%s" % (path, comp.id))
    return measured, known


def write_measurements(
    path: str, measured: MeasurementSet, known: KnownBoundaries
) -> None:
    columns: list[tuple[str, np.ndarray]] = []
    for name in sorted(known.supply_density):
        columns.append(("s:" + name, known.supply_density[name]))
    for name in sorted(known.ratio):
        columns.append(("alpha:" + name, known.ratio[name]))
    for name in sorted(measured.density):
        columns.append(("rho:" + name, measured.density[name]))
    for name in sorted(measured.withdrawal):
        columns.append(("d:" + name, measured.withdrawal[name]))
    _write_table(path, measured.dt_seconds, columns)


def _write_table(path: str, dt: float, columns: list[tuple[str, np.ndarray]]) -> None:
    if not columns:
        raise InvariantViolation("refusing to write a table with no series")
    n = len(columns[0][1])
    for name, series in columns:
        if len(series) != n:
            raise DimensionMismatch("column %r length differs" % name)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + [name for name, _ in columns])
        for row in range(n):
            writer.writerow(
                [repr(float(row * dt))] + [repr(float(series[row])) for _, series in columns]
            )


def write_state_table(
    path: str,
    dt: float,
    node_ids: tuple[str, ...],
    edge_ids: tuple[str, ...],
    densities: np.ndarray,
    fluxes: np.ndarray,
) -> None:
    """Write one period of nodal densities (kg/m3) and edge fluxes (kg/m2/s)."""
    columns = [("rho:" + nid, densities[i]) for i, nid in enumerate(node_ids)]
    columns += [("phi:" + eid, fluxes[k]) for k, eid in enumerate(edge_ids)]
    _write_table(path, dt, columns)


def read_series_table(path: str) -> tuple[float, dict[str, np.ndarray]]:
    """Read any table written by this module back into named series."""
    header, data = _read_table(path)
    dt = _check_time_axis(path, data[:, 0])
    return dt, {name: data[:, col].copy() for col, name in enumerate(header[1:], start=1)}
