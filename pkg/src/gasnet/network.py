"""Gas network data model, file ingestion and equation of state.

A network is a connected directed graph.  Junctions are either slack
(supply density prescribed over time) or non-slack (withdrawal flow
prescribed, measured, or estimated).  Pipes carry geometry and a friction
factor.  A compressor boosts density multiplicatively at one end of its
pipe; its time-varying ratio arrives with the boundary profiles, not with
the static topology.

All quantities here are SI: lengths m, diameters m, areas m2, densities
kg/m3, pressures Pa, mass flows kg/s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    InvariantViolation,
    MalformedFile,
    NegativeDensity,
    NegativePressure,
    NonpositiveFactor,
    SchemaViolation,
)

SLACK = "slack"
NONSLACK = "non-slack"

DEFAULT_PRESSURE_MIN = 3.0e6
DEFAULT_PRESSURE_MAX = 6.0e6

_GAS_KEYS = {"sound_speed", "compressibility", "gas_constant", "temperature"}
_JUNCTION_KEYS = {"id", "kind", "density_min", "density_max"}
_PIPE_KEYS = {"id", "from", "to", "length", "diameter", "friction", "area"}
_COMPRESSOR_KEYS = {"id", "pipe", "orientation"}


@dataclass(frozen=True)
class GasProperties:
    """Isothermal ideal-gas description, p = a^2 rho.

    The squared sound speed equals Z * R * T.  Any of the three factors may
    be omitted in input files as long as the sound speed itself is given or
    derivable; consistency is checked to 1e-9 relative when all four are
    present.
    """

    sound_speed: float
    compressibility: float | None = None
    gas_constant: float | None = None
    temperature: float | None = None

    def __post_init__(self) -> None:
        if not self.sound_speed > 0.0:
            raise InvariantViolation("sound speed must be positive")
        parts = (self.compressibility, self.gas_constant, self.temperature)
        if all(v is not None for v in parts):
            zrt = parts[0] * parts[1] * parts[2]
            a2 = self.sound_speed**2
            if abs(zrt - a2) > 1e-9 * max(abs(a2), 1.0):
                raise InvariantViolation(
                    "gas properties inconsistent: Z*R*T = %r but sound_speed^2 = %r"
                    % (zrt, a2)
                )


def make_gas_properties(
    sound_speed: float | None = None,
    compressibility: float | None = None,
    gas_constant: float | None = None,
    temperature: float | None = None,
) -> GasProperties:
    """Build GasProperties, deriving the sound speed from Z, R, T if absent."""
    if sound_speed is None:
        parts = (compressibility, gas_constant, temperature)
        if any(v is None for v in parts):
            raise SchemaViolation(
                "gas needs sound_speed, or all of compressibility, "
                "gas_constant and temperature"
            )
        zrt = parts[0] * parts[1] * parts[2]
        if not zrt > 0.0:
            raise InvariantViolation("Z*R*T must be positive")
        sound_speed = math.sqrt(zrt)
    return GasProperties(sound_speed, compressibility, gas_constant, temperature)


@dataclass(frozen=True)
class Junction:
    """Network node with a density box used as an estimation constraint."""

    id: str
    slack: bool
    density_min: float
    density_max: float


@dataclass(frozen=True)
class Pipe:
    """Directed edge; the direction fixes the sign convention of its flux."""

    id: str
    from_id: str
    to_id: str
    length: float
    diameter: float
    friction: float
    area: float


@dataclass(frozen=True)
class Compressor:
    """Density booster attached to one end of a pipe.

    Orientation '+' boosts the density entering the pipe at its from-end,
    '-' boosts the density delivered at its to-end.
    """

    id: str
    pipe_id: str
    orientation: str


@dataclass(frozen=True)
class GasNetwork:
    """Validated, deterministically ordered network.

    Junctions are ordered slack-first and lexicographically by id inside
    each group; pipes and compressors lexicographically by id.  Positions
    in these tuples are the canonical indices used by every downstream
    matrix.
    """

    gas: GasProperties
    junctions: tuple[Junction, ...]
    pipes: tuple[Pipe, ...]
    compressors: tuple[Compressor, ...]

    @property
    def n_slack(self) -> int:
        return sum(1 for j in self.junctions if j.slack)

    @property
    def junction_index(self) -> dict[str, int]:
        return {j.id: i for i, j in enumerate(self.junctions)}

    @property
    def pipe_index(self) -> dict[str, int]:
        return {p.id: i for i, p in enumerate(self.pipes)}

    @property
    def total_length(self) -> float:
        return float(sum(p.length for p in self.pipes))

    def slack_ids(self) -> tuple[str, ...]:
        return tuple(j.id for j in self.junctions if j.slack)

    def nonslack_ids(self) -> tuple[str, ...]:
        return tuple(j.id for j in self.junctions if not j.slack)


def pressure_to_density(pressure, gas: GasProperties):
    """Convert pressure (Pa) to density (kg/m3) through p = a^2 rho."""
    p = np.asarray(pressure, dtype=float)
    if np.any(p < 0.0):
        raise NegativePressure("pressure must be nonnegative, got %r" % pressure)
    rho = p / gas.sound_speed**2
    return float(rho) if np.isscalar(pressure) else rho


def density_to_pressure(density, gas: GasProperties):
    """Inverse of pressure_to_density."""
    rho = np.asarray(density, dtype=float)
    if np.any(rho < 0.0):
        raise NegativeDensity("density must be nonnegative, got %r" % density)
    p = rho * gas.sound_speed**2
    return float(p) if np.isscalar(density) else p


def apply_efficiency_factor(network: GasNetwork, factor: float) -> GasNetwork:
    """Scale every pipe's friction factor by a derating factor.

    Used to fold pipe aging or fitting losses into the friction model.
    Factor 1.0 returns an equal network; factors compose multiplicatively.
    """
    if not factor > 0.0:
        raise NonpositiveFactor("efficiency factor must be positive, got %r" % factor)
    pipes = tuple(replace(p, friction=p.friction * factor) for p in network.pipes)
    return replace(network, pipes=pipes)


def _require_keys(obj: dict, allowed: set, required: set, what: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaViolation("%s must be an object" % what)
    extra = set(obj) - allowed
    if extra:
        raise SchemaViolation("%s has unknown fields %s" % (what, sorted(extra)))
    missing = required - set(obj)
    if missing:
        raise SchemaViolation("%s missing fields %s" % (what, sorted(missing)))


def _number(obj: dict, key: str, what: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaViolation("%s field %r must be a number" % (what, key))
    return float(v)


def network_from_dict(data: dict, source: str = "<dict>") -> GasNetwork:
    """Validate a decoded JSON document and build the network."""
    _require_keys(
        data,
        {"gas", "junctions", "pipes", "compressors"},
        {"gas", "junctions", "pipes"},
        "network document %s" % source,
    )
    _require_keys(data["gas"], _GAS_KEYS, set(), "gas")
    gas_fields = {k: _number(data["gas"], k, "gas") for k in data["gas"]}
    gas = make_gas_properties(**gas_fields)

    junctions = []
    seen_ids: set[str] = set()
    rho_min_default = pressure_to_density(DEFAULT_PRESSURE_MIN, gas)
    rho_max_default = pressure_to_density(DEFAULT_PRESSURE_MAX, gas)
    if not isinstance(data["junctions"], list) or not data["junctions"]:
        raise SchemaViolation("junctions must be a non-empty list")
    for row in data["junctions"]:
        _require_keys(row, _JUNCTION_KEYS, {"id", "kind"}, "junction %r" % row)
        jid = row["id"]
        if not isinstance(jid, str) or not jid:
            raise SchemaViolation("junction id must be a non-empty string")
        if jid in seen_ids:
            raise InvariantViolation("duplicate id %r" % jid)
        seen_ids.add(jid)
        kind = row["kind"]
        if kind not in (SLACK, NONSLACK):
            raise SchemaViolation(
                "junction %r kind must be %r or %r, got %r"
                % (jid, SLACK, NONSLACK, kind)
            )
        lo = _number(row, "density_min", "junction %r" % jid) if "density_min" in row else rho_min_default
        hi = _number(row, "density_max", "junction %r" % jid) if "density_max" in row else rho_max_default
        if not 0.0 < lo < hi:
            raise InvariantViolation(
                "junction %r density box [%r, %r] is empty or nonpositive" % (jid, lo, hi)
            )
        junctions.append(Junction(jid, kind == SLACK, lo, hi))
    junctions.sort(key=lambda j: (not j.slack, j.id))
    if not any(j.slack for j in junctions):
        raise InvariantViolation("network has no slack junction")

    jindex = {j.id: i for i, j in enumerate(junctions)}
    pipes = []
    pipe_ids: set[str] = set()
    if not isinstance(data["pipes"], list) or not data["pipes"]:
        raise SchemaViolation("pipes must be a non-empty list")
    for row in data["pipes"]:
        _require_keys(
            row, _PIPE_KEYS, {"id", "from", "to", "length", "diameter", "friction"},
            "pipe %r" % row.get("id", row) if isinstance(row, dict) else "pipe",
        )
        pid = row["id"]
        if not isinstance(pid, str) or not pid:
            raise SchemaViolation("pipe id must be a non-empty string")
        if pid in pipe_ids or pid in seen_ids:
            raise InvariantViolation("duplicate id %r" % pid)
        pipe_ids.add(pid)
        for end in ("from", "to"):
            if row[end] not in jindex:
                raise InvariantViolation(
                    "pipe %r references unknown junction %r" % (pid, row[end])
                )
        if row["from"] == row["to"]:
            raise InvariantViolation("pipe %r is a self-loop" % pid)
        length = _number(row, "length", "pipe %r" % pid)
        diameter = _number(row, "diameter", "pipe %r" % pid)
        friction = _number(row, "friction", "pipe %r" % pid)
        if length <= 0.0 or diameter <= 0.0 or friction <= 0.0:
            raise InvariantViolation(
                "pipe %r needs positive length, diameter and friction" % pid
            )
        area_circ = math.pi * diameter**2 / 4.0
        if "area" in row:
            area = _number(row, "area", "pipe %r" % pid)
            if abs(area - area_circ) > 1e-9 * area_circ:
                raise InvariantViolation(
                    "pipe %r area %r inconsistent with diameter (expected %r)"
                    % (pid, area, area_circ)
                )
        else:
            area = area_circ
        pipes.append(Pipe(pid, row["from"], row["to"], length, diameter, friction, area))
    pipes.sort(key=lambda p: p.id)

    pindex = {p.id: i for i, p in enumerate(pipes)}
    compressors = []
    comp_ids: set[str] = set()
    for row in data.get("compressors", []):
        _require_keys(row, _COMPRESSOR_KEYS, _COMPRESSOR_KEYS, "compressor %r" % row)
        cid = row["id"]
        if not isinstance(cid, str) or not cid:
            raise SchemaViolation("compressor id must be a non-empty string")
        if cid in comp_ids or cid in seen_ids or cid in pipe_ids:
            raise InvariantViolation("duplicate id %r" % cid)
        comp_ids.add(cid)
        if row["pipe"] not in pindex:
            raise InvariantViolation(
                "compressor %r references unknown pipe %r" % (cid, row["pipe"])
            )
        if row["orientation"] not in ("+", "-"):
            raise SchemaViolation(
                "compressor %r orientation must be '+' or '-'" % cid
            )
        compressors.append(Compressor(cid, row["pipe"], row["orientation"]))
    compressors.sort(key=lambda c: c.id)
    per_pipe = [c.pipe_id for c in compressors]
    if len(per_pipe) != len(set(per_pipe)):
        raise InvariantViolation("more than one compressor on a single pipe")

    network = GasNetwork(gas, tuple(junctions), tuple(pipes), tuple(compressors))
    _check_connected(network, source)
    return network


def _check_connected(network: GasNetwork, source: str) -> None:
    n = len(network.junctions)
    jindex = network.junction_index
    rows = [jindex[p.from_id] for p in network.pipes]
    cols = [jindex[p.to_id] for p in network.pipes]
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp != 1:
        raise InvariantViolation(
            "network %s is disconnected (%d components)" % (source, n_comp)
        )


def parse_network(path: str) -> GasNetwork:
    """Read and validate a network JSON file.

    Raises MalformedFile when the file cannot be decoded, SchemaViolation
    for missing or unknown fields, InvariantViolation for semantic problems
    (broken references, disconnected graph, no slack junction, empty
    density boxes).  Error messages name the offending entity.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise MalformedFile("cannot read network file %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile("network file %s is not valid JSON: %s" % (path, exc)) from exc
    return network_from_dict(data, source=path)


def network_to_dict(network: GasNetwork) -> dict:
    """Serialize to the same document layout parse_network accepts."""
    gas: dict[str, float] = {"sound_speed": network.gas.sound_speed}
    for key in ("compressibility", "gas_constant", "temperature"):
        value = getattr(network.gas, key)
        if value is not None:
            gas[key] = value
    return {
        "gas": gas,
        "junctions": [
            {
                "id": j.id,
                "kind": SLACK if j.slack else NONSLACK,
                "density_min": j.density_min,
                "density_max": j.density_max,
            }
            for j in network.junctions
        ],
        "pipes": [
            {
                "id": p.id,
                "from": p.from_id,
                "to": p.to_id,
                "length": p.length,
                "diameter": p.diameter,
                "friction": p.friction,
                "area": p.area,
            }
            for p in network.pipes
        ],
        "compressors": [
            {"id": c.id, "pipe": c.pipe_id, "orientation": c.orientation}
            for c in network.compressors
        ],
    }


def save_network(network: GasNetwork, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(network), fh, indent=2)
        fh.write("\n")
