"""Lane association: match a vehicle to the lane node(s) it travels on.

Pure functions over an immutable map; safe for concurrent per-agent use.
Candidate selection applies, in order: a proximity limit, a heading
alignment gate, nearest-node seeding, and an upstream walk that adds the
nearest node of each diverging sibling lane found within the arc-length
budget. When no node survives, the result is an explicit fallback (the
caller then uses statistical intention points instead).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .map_model import AgentTrack, VectorMap

MIN_MOVE_FOR_HEADING = 0.1  # m; below this the state heading field is trusted


@dataclass(frozen=True)
class AssocConfig:
    heading_threshold: float = math.pi / 4   # rad
    proximity_limit: float = 5.0             # m
    backwards_look: float = 10.0             # m of upstream arc length

    def __post_init__(self):
        for name in ("heading_threshold", "proximity_limit", "backwards_look"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class AssociationResult:
    """Candidate lane nodes as (segment id, node index, distance) tuples.

    ``fallback`` is true iff no candidate exists.
    """

    candidates: tuple[tuple[int, int, float], ...]
    fallback: bool

    def __post_init__(self):
        if self.fallback != (len(self.candidates) == 0):
            raise ValueError("fallback must hold exactly when candidates is empty")


def angular_difference(a: float, b: float) -> float:
    """Absolute angle between two headings, wrapped to [0, pi]."""
    return abs(math.remainder(a - b, math.tau))


def derive_heading(track: AgentTrack) -> float:
    """Heading from the last two valid history positions, if the agent moved.

    Falls back to the current state's heading field when the displacement
    is at most 0.1 m (stationary or near-stationary agents).
    """
    valid = [s for s in track.history if s.valid]
    if len(valid) >= 2:
        prev, cur = valid[-2], valid[-1]
        dx, dy = cur.x - prev.x, cur.y - prev.y
        if math.hypot(dx, dy) > MIN_MOVE_FOR_HEADING:
            return math.atan2(dy, dx)
    return track.current_state.heading


def lane_heading_at(vmap: VectorMap, segment_id: int, node_index: int) -> float:
    """Direction of the lane at a node: node i towards node i+1.

    The last node reuses the direction of the final polyline piece.
    """
    nodes = vmap.segments[segment_id].nodes
    i = node_index
    if i == nodes.shape[0] - 1:
        i -= 1
    d = nodes[i + 1] - nodes[i]
    return math.atan2(d[1], d[0])


def _passes(vmap, sid, ni, dist, heading, cfg) -> bool:
    return (dist <= cfg.proximity_limit
            and angular_difference(lane_heading_at(vmap, sid, ni), heading)
            <= cfg.heading_threshold)


def _nearest_on_segment(vmap: VectorMap, sid: int, point: np.ndarray):
    nodes = vmap.segments[sid].nodes
    d = np.hypot(*(nodes - point).T)
    i = int(d.argmin())
    return i, float(d[i])


def _branch_candidates(vmap, seed_sid, seed_idx, point, heading, cfg):
    """Walk upstream from the seed and gather diverging-branch candidates.

    At every segment whose end is reached within the arc budget and that
    has multiple exits, the nearest node of each sibling exit (other than
    the lane walked down from) is tested against the proximity and
    heading gates.
    """
    out = []
    best_spent: dict[int, float] = {}
    seed_seg = vmap.segments[seed_sid]
    # (segment whose start we stand at, upstream arc length spent so far)
    stack = [(seed_sid, float(seed_seg.arc_offsets[seed_idx]))]
    while stack:
        sid, spent = stack.pop()
        if spent > cfg.backwards_look:
            continue
        seg = vmap.segments[sid]
        start = seg.nodes[0]
        for eid in seg.entry_ids:
            entry = vmap.segments[eid]
            spent_e = spent + float(np.hypot(*(entry.nodes[-1] - start)))
            if spent_e > cfg.backwards_look:
                continue
            if best_spent.get(eid, math.inf) <= spent_e:
                continue
            best_spent[eid] = spent_e
            if len(entry.exit_ids) > 1:
                for sib in entry.exit_ids:
                    if sib == sid:
                        continue
                    ni, d = _nearest_on_segment(vmap, sib, point)
                    if _passes(vmap, sib, ni, d, heading, cfg):
                        out.append((sib, ni, d))
            stack.append((eid, spent_e + entry.total_arc))
    return out


def associate(vmap: VectorMap, track: AgentTrack,
              cfg: AssocConfig | None = None) -> AssociationResult:
    """Associate a vehicle with its current lane node(s).

    Returns the seed (nearest node passing the proximity and heading
    gates) plus any diverging-branch nodes found by the upstream walk,
    deduplicated and sorted by distance. fallback=True when nothing
    qualifies.
    """
    if track.object_class != "vehicle":
        raise ValueError("lane association is defined for vehicles only")
    cfg = cfg or AssocConfig()
    point = track.current_state.position
    heading = derive_heading(track)

    pool = vmap.nearest_nodes(point, cfg.proximity_limit)
    aligned = [(sid, ni, d) for sid, ni, d in pool
               if angular_difference(lane_heading_at(vmap, sid, ni), heading)
               <= cfg.heading_threshold]
    if not aligned:
        return AssociationResult((), fallback=True)

    seed = aligned[0]  # pool is sorted by (distance, segment id, node index)
    found = {(seed[0], seed[1]): seed[2]}
    for sid, ni, d in _branch_candidates(vmap, seed[0], seed[1], point,
                                         heading, cfg):
        found.setdefault((sid, ni), d)
    ordered = sorted(((sid, ni, d) for (sid, ni), d in found.items()),
                     key=lambda c: (c[2], c[0], c[1]))
    return AssociationResult(tuple(ordered), fallback=False)
