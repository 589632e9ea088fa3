"""Spatial refinement of pipes into lumped segments.

Long pipes are split into n equal segments so every segment length Lh
falls inside the admissible window

    delta * L / (delta + L)  <  Lh  <  delta

for target spacing delta (all dimensionless).  The open interval
(L/delta, L/delta + 1) contains the admissible segment counts; the
implementation picks n = ceil(L/delta + 1e-12), which lands on the upper
boundary of the window only when L is an exact multiple of delta, and that
boundary equality is accepted within 1e-12.

Auxiliary junctions inserted between segments are non-slack, withdraw
nothing, are never metered, and inherit the intersection of their parent
pipe's endpoint density boxes.  Original junctions keep their positions,
so index arrays built before refinement stay valid for the first
n_original nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleRefinement
from .nondim import NondimNetwork, Scales

_WINDOW_SLACK = 1e-12


def segment_count(length: float, delta: float) -> int:
    """Number of equal segments placing L/n inside the admissible window."""
    if not delta > 0.0:
        raise InfeasibleRefinement("segment spacing must be positive, got %r" % delta)
    if not length > 0.0:
        raise InfeasibleRefinement("pipe length must be positive, got %r" % length)
    n = max(1, math.ceil(length / delta + _WINDOW_SLACK))
    check_window(length, delta, n)
    return n


def check_window(length: float, delta: float, n: int) -> None:
    """Verify L/n sits inside the window, with 1e-12 slack at the boundary."""
    seg = length / n
    lower = delta * length / (delta + length)
    tol = _WINDOW_SLACK * max(1.0, delta)
    if seg >= delta + tol or seg <= lower - tol:
        raise InfeasibleRefinement(
            "segment length %r outside window (%r, %r) for L=%r delta=%r n=%d"
            % (seg, lower, delta, length, delta, n)
        )


@dataclass(frozen=True)
class RefinedNetwork:
    """Segment-level graph produced by refine_graph.

    Nodes: original junctions first (slack before non-slack, as in the
    source network), auxiliary junctions after.  Edges are segments ordered
    by parent pipe; parent maps each segment to its pipe, which carries the
    shared friction factor estimated per pipe rather than per segment.
    """

    scales: Scales
    node_ids: tuple[str, ...]
    n_slack: int
    n_original: int
    rho_min: np.ndarray
    rho_max: np.ndarray
    edge_ids: tuple[str, ...]
    tail: np.ndarray
    head: np.ndarray
    length: np.ndarray
    diameter: np.ndarray
    area: np.ndarray
    friction: np.ndarray
    parent: np.ndarray
    parent_pipe_ids: tuple[str, ...]
    parent_length: np.ndarray
    parent_friction: np.ndarray
    compressor_edges: tuple[tuple[str, int, str], ...]

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    @property
    def n_nonslack(self) -> int:
        return self.n_nodes - self.n_slack

    @property
    def is_aux(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.n_original:] = True
        return mask


def refine_graph(ndnet: NondimNetwork, delta: float) -> RefinedNetwork:
    """Split every pipe into segments admissible at spacing delta."""
    node_ids = list(ndnet.junction_ids)
    rho_min = list(ndnet.rho_min)
    rho_max = list(ndnet.rho_max)
    n_original = len(node_ids)

    edge_ids: list[str] = []
    tail: list[int] = []
    head: list[int] = []
    length: list[float] = []
    diameter: list[float] = []
    area: list[float] = []
    friction: list[float] = []
    parent: list[int] = []
    first_edge = np.empty(len(ndnet.pipe_ids), dtype=int)
    last_edge = np.empty(len(ndnet.pipe_ids), dtype=int)

    for p, pid in enumerate(ndnet.pipe_ids):
        n_seg = segment_count(float(ndnet.length[p]), delta)
        seg_len = float(ndnet.length[p]) / n_seg
        t, h = int(ndnet.tail[p]), int(ndnet.head[p])
        box_lo = max(float(ndnet.rho_min[t]), float(ndnet.rho_min[h]))
        box_hi = min(float(ndnet.rho_max[t]), float(ndnet.rho_max[h]))
        if not box_lo < box_hi:
            raise InfeasibleRefinement(
                "pipe %r endpoint density boxes do not overlap" % pid
            )
        chain = [t]
        for i in range(1, n_seg):
            node_ids.append("%s@%d" % (pid, i))
            rho_min.append(box_lo)
            rho_max.append(box_hi)
            chain.append(len(node_ids) - 1)
        chain.append(h)
        first_edge[p] = len(edge_ids)
        for i in range(n_seg):
            edge_ids.append(pid if n_seg == 1 else "%s#%d" % (pid, i + 1))
            tail.append(chain[i])
            head.append(chain[i + 1])
            length.append(seg_len)
            diameter.append(float(ndnet.diameter[p]))
            area.append(float(ndnet.area[p]))
            friction.append(float(ndnet.friction[p]))
            parent.append(p)
        last_edge[p] = len(edge_ids) - 1

    compressor_edges = tuple(
        (cid, int(first_edge[p] if orient == "+" else last_edge[p]),
         "lo" if orient == "+" else "hi")
        for cid, p, orient in ndnet.compressors
    )
    return RefinedNetwork(
        scales=ndnet.scales,
        node_ids=tuple(node_ids),
        n_slack=ndnet.n_slack,
        n_original=n_original,
        rho_min=np.array(rho_min),
        rho_max=np.array(rho_max),
        edge_ids=tuple(edge_ids),
        tail=np.array(tail, dtype=int),
        head=np.array(head, dtype=int),
        length=np.array(length),
        diameter=np.array(diameter),
        area=np.array(area),
        friction=np.array(friction),
        parent=np.array(parent, dtype=int),
        parent_pipe_ids=ndnet.pipe_ids,
        parent_length=ndnet.length.copy(),
        parent_friction=ndnet.friction.copy(),
        compressor_edges=compressor_edges,
    )
