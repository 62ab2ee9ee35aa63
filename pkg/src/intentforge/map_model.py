"""Vectorized lane-map scenario model: map geometry, agent tracks, file I/O.

A scenario file is UTF-8 JSON with the following layout (canonical form:
sorted keys, compact separators, floats rendered with 6 decimal places,
trailing newline):

    {
      "map": {"segments": [
          {"entries": [], "exits": [7], "id": 3,
           "left": {"change_ok": 1, "id": 4} | null,
           "nodes": [[x, y], ...],
           "right": null,
           "speed_limit_mps": 13.4112},
          ...]},
      "scenario_id": "...",
      "tracks": [
          {"agent_id": "a0", "class": "vehicle",
           "future":  [[t, x, y, heading, speed, valid], ...],   # 80 rows
           "history": [[t, x, y, heading, speed, valid], ...],   # 11 rows
           "length_m": 4.8, "width_m": 2.1},
          ...],
      "tracks_to_predict": ["a0", ...]
    }

Positions are meters in a shared global frame, headings are radians in
(-pi, pi], speeds in m/s, timestamps are integer sample indices at 10 Hz.
Invalid states (valid == 0) carry no numeric guarantees and must be
skipped by consumers.

Parsing validates the schema and the structural invariants (symmetric
segment connectivity, mutual neighbor references, node spacing in
(0, 2] m). Scenarios are normalized on construction (segments keyed and
ordered by id, tracks ordered by agent id) so structurally equal
scenarios serialize to identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

HISTORY_LEN = 11        # 1 s of past plus the current sample, 10 Hz
FUTURE_LEN = 80         # 8 s ground-truth horizon, 10 Hz
SAMPLE_HZ = 10
MAX_NODE_SPACING = 2.0  # m; bounds the node-vs-polyline distance error
MPH_TO_MPS = 0.44704

OBJECT_CLASSES = ("vehicle", "pedestrian", "cyclist")


class ScenarioError(ValueError):
    """Base class for scenario file and model errors."""


class MalformedScenario(ScenarioError):
    """Input bytes are not syntactically valid scenario JSON."""


class SchemaViolation(ScenarioError):
    """A field is missing, has the wrong type, or an illegal value."""


class InvariantViolation(ScenarioError):
    """Structurally valid input breaks a model invariant."""


@dataclass(frozen=True)
class LaneNeighbor:
    segment_id: int
    change_ok: bool


@dataclass(eq=False)
class LaneSegment:
    """A directed lane polyline with connectivity metadata.

    ``nodes`` is an (N, 2) float array of lane-center points ordered in
    the direction of travel. ``arc_offsets[i]`` is the polyline distance
    from the segment start to node i.
    """

    id: int
    nodes: np.ndarray
    speed_limit_mps: float
    exit_ids: tuple[int, ...] = ()
    entry_ids: tuple[int, ...] = ()
    left: Optional[LaneNeighbor] = None
    right: Optional[LaneNeighbor] = None
    arc_offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 2:
            raise InvariantViolation(
                f"segment {self.id}: needs at least 2 nodes of shape (N, 2)")
        if not np.isfinite(nodes).all():
            raise InvariantViolation(f"segment {self.id}: non-finite node coordinate")
        if not (isinstance(self.speed_limit_mps, (int, float))
                and math.isfinite(self.speed_limit_mps) and self.speed_limit_mps > 0):
            raise InvariantViolation(f"segment {self.id}: speed limit must be > 0")
        spacing = np.hypot(*(nodes[1:] - nodes[:-1]).T)
        if (spacing <= 0.0).any():
            raise InvariantViolation(f"segment {self.id}: duplicate consecutive nodes")
        if (spacing > MAX_NODE_SPACING).any():
            raise InvariantViolation(
                f"segment {self.id}: node spacing exceeds {MAX_NODE_SPACING} m")
        nodes.flags.writeable = False
        offsets = np.concatenate(([0.0], np.cumsum(spacing)))
        offsets.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "arc_offsets", offsets)
        object.__setattr__(self, "exit_ids", tuple(self.exit_ids))
        object.__setattr__(self, "entry_ids", tuple(self.entry_ids))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def total_arc(self) -> float:
        return float(self.arc_offsets[-1])

    def __eq__(self, other):
        if not isinstance(other, LaneSegment):
            return NotImplemented
        return (self.id == other.id
                and self.speed_limit_mps == other.speed_limit_mps
                and self.exit_ids == other.exit_ids
                and self.entry_ids == other.entry_ids
                and self.left == other.left
                and self.right == other.right
                and np.array_equal(self.nodes, other.nodes))


_GRID_CELL = 16.0


class _GridIndex:
    """Uniform-grid point index; query semantics identical to a linear scan."""

    def __init__(self, positions: np.ndarray):
        self._positions = positions
        cells = np.floor(positions / _GRID_CELL).astype(np.int64)
        buckets: dict[tuple[int, int], list[int]] = {}
        for i, key in enumerate(map(tuple, cells)):
            buckets.setdefault(key, []).append(i)
        self._buckets = {k: np.asarray(v, dtype=np.int64) for k, v in buckets.items()}
        self._cell_min = cells.min(axis=0)
        self._cell_max = cells.max(axis=0)

    def candidates(self, point: np.ndarray, radius: float) -> np.ndarray:
        # clamp to occupied cells so huge radii stay cheap
        lo = np.maximum(np.floor((point - radius) / _GRID_CELL).astype(np.int64),
                        self._cell_min)
        hi = np.minimum(np.floor((point + radius) / _GRID_CELL).astype(np.int64),
                        self._cell_max)
        hits = [self._buckets[key]
                for cx in range(lo[0], hi[0] + 1)
                for cy in range(lo[1], hi[1] + 1)
                if (key := (cx, cy)) in self._buckets]
        if not hits:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(hits)


class VectorMap:
    """Immutable lane-segment map with a spatial index over lane nodes."""

    def __init__(self, segments: Iterable[LaneSegment]):
        by_id: dict[int, LaneSegment] = {}
        for seg in segments:
            if seg.id in by_id:
                raise InvariantViolation(f"duplicate segment id {seg.id}")
            by_id[seg.id] = seg
        self.segments: dict[int, LaneSegment] = dict(sorted(by_id.items()))
        self._validate_connectivity()

        seg_ids, node_idx, pos = [], [], []
        for sid, seg in self.segments.items():
            seg_ids.append(np.full(seg.n_nodes, sid, dtype=np.int64))
            node_idx.append(np.arange(seg.n_nodes, dtype=np.int64))
            pos.append(seg.nodes)
        if seg_ids:
            self.node_seg_ids = np.concatenate(seg_ids)
            self.node_indices = np.concatenate(node_idx)
            self.node_positions = np.concatenate(pos, axis=0)
        else:
            self.node_seg_ids = np.empty(0, dtype=np.int64)
            self.node_indices = np.empty(0, dtype=np.int64)
            self.node_positions = np.empty((0, 2))
        for arr in (self.node_seg_ids, self.node_indices, self.node_positions):
            arr.flags.writeable = False
        self._grid = _GridIndex(self.node_positions) if seg_ids else None

    def _validate_connectivity(self):
        for sid, seg in self.segments.items():
            for ref in (*seg.exit_ids, *seg.entry_ids):
                if ref not in self.segments:
                    raise InvariantViolation(
                        f"segment {sid} references unknown segment {ref}")
            for b in seg.exit_ids:
                if sid not in self.segments[b].entry_ids:
                    raise InvariantViolation(
                        f"segment {sid} lists exit {b} but segment {b} "
                        f"does not list entry {sid}")
            for b in seg.entry_ids:
                if sid not in self.segments[b].exit_ids:
                    raise InvariantViolation(
                        f"segment {sid} lists entry {b} but segment {b} "
                        f"does not list exit {sid}")
            for side, attr, back in (("left", seg.left, "right"),
                                     ("right", seg.right, "left")):
                if attr is None:
                    continue
                if attr.segment_id not in self.segments:
                    raise InvariantViolation(
                        f"segment {sid} references unknown {side} neighbor "
                        f"{attr.segment_id}")
                other = getattr(self.segments[attr.segment_id], back)
                if other is None or other.segment_id != sid:
                    raise InvariantViolation(
                        f"segment {sid} has {side} neighbor {attr.segment_id} "
                        f"without a mutual {back} reference")

    @property
    def n_nodes(self) -> int:
        return int(self.node_positions.shape[0])

    def nearest_nodes(self, point, radius: float) -> list[tuple[int, int, float]]:
        """All lane nodes within ``radius`` of ``point``.

        Sorted by Euclidean distance, ties broken by (segment id, node
        index). Equivalent to a linear scan over every node.
        """
        if radius <= 0:
            raise ValueError("radius must be > 0")
        if self._grid is None:
            return []
        p = np.asarray(point, dtype=np.float64)
        idx = self._grid.candidates(p, radius)
        if idx.size == 0:
            return []
        d = np.hypot(*(self.node_positions[idx] - p).T)
        keep = d <= radius
        idx, d = idx[keep], d[keep]
        sid, ni = self.node_seg_ids[idx], self.node_indices[idx]
        order = np.lexsort((ni, sid, d))
        return [(int(sid[i]), int(ni[i]), float(d[i])) for i in order]

    def __eq__(self, other):
        if not isinstance(other, VectorMap):
            return NotImplemented
        return self.segments == other.segments


def nearest_lane_nodes(vmap: VectorMap, point, radius: float):
    return vmap.nearest_nodes(point, radius)


def point_to_polyline_distance(point, nodes) -> float:
    """Minimal distance from ``point`` to the polyline through ``nodes``."""
    p = np.asarray(point, dtype=np.float64)
    pts = np.asarray(nodes, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("polyline needs at least 2 nodes")
    a, b = pts[:-1], pts[1:]
    ab = b - a
    denom = (ab * ab).sum(axis=1)
    t = np.zeros(len(a))
    nz = denom > 0
    t[nz] = ((p - a[nz]) * ab[nz]).sum(axis=1) / denom[nz]
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return float(np.hypot(*(closest - p).T).min())


@dataclass(frozen=True)
class AgentState:
    timestamp_index: int
    x: float
    y: float
    heading: float
    speed: float
    valid: bool

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class AgentTrack:
    """One agent: class, dimensions, 11-step history, 80-step future."""

    agent_id: str
    object_class: str
    length_m: float
    width_m: float
    history: list[AgentState]
    future: list[AgentState]

    def __post_init__(self):
        if self.object_class not in OBJECT_CLASSES:
            raise SchemaViolation(
                f"track {self.agent_id}: class must be one of "
                f"{'|'.join(OBJECT_CLASSES)}, got {self.object_class!r}")
        if len(self.history) != HISTORY_LEN:
            raise InvariantViolation(
                f"track {self.agent_id}: history must have {HISTORY_LEN} states")
        if len(self.future) != FUTURE_LEN:
            raise InvariantViolation(
                f"track {self.agent_id}: future must have {FUTURE_LEN} states")
        if not self.history[-1].valid:
            raise InvariantViolation(
                f"track {self.agent_id}: current state (last history entry) "
                f"must be valid")
        for st in (*self.history, *self.future):
            if not st.valid:
                continue
            vals = (st.x, st.y, st.heading, st.speed)
            if not all(math.isfinite(v) for v in vals):
                raise InvariantViolation(
                    f"track {self.agent_id}: non-finite value in valid state "
                    f"at t={st.timestamp_index}")
            if not (-math.pi < st.heading <= math.pi):
                raise InvariantViolation(
                    f"track {self.agent_id}: heading out of (-pi, pi] at "
                    f"t={st.timestamp_index}")

    @property
    def current_state(self) -> AgentState:
        return self.history[-1]

    @cached_property
    def future_xy(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.future])

    @cached_property
    def future_valid(self) -> np.ndarray:
        return np.array([s.valid for s in self.future], dtype=bool)

    def gt_endpoint(self) -> Optional[np.ndarray]:
        """Ground-truth position at the 8 s horizon, or None if invalid."""
        last = self.future[-1]
        return last.position if last.valid else None


@dataclass(eq=False)
class Scenario:
    scenario_id: str
    vector_map: VectorMap
    tracks: list[AgentTrack]
    tracks_to_predict: tuple[str, ...]

    def __post_init__(self):
        ids = [t.agent_id for t in self.tracks]
        if len(set(ids)) != len(ids):
            raise SchemaViolation("duplicate agent_id in tracks")
        self.tracks = sorted(self.tracks, key=lambda t: t.agent_id)
        self.tracks_to_predict = tuple(sorted(set(self.tracks_to_predict)))
        known = set(ids)
        for aid in self.tracks_to_predict:
            if aid not in known:
                raise InvariantViolation(
                    f"tracks_to_predict references unknown agent {aid!r}")
        self._by_id = {t.agent_id: t for t in self.tracks}

    def track(self, agent_id: str) -> AgentTrack:
        return self._by_id[agent_id]

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.scenario_id == other.scenario_id
                and self.tracks_to_predict == other.tracks_to_predict
                and self.tracks == other.tracks
                and self.vector_map == other.vector_map)


# -- parsing ---------------------------------------------------------------

def _expect(cond: bool, path: str, reason: str):
    if not cond:
        raise SchemaViolation(f"{path}: {reason}")


def _num(value, path: str) -> float:
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool)
            and math.isfinite(value), path, "expected finite number")
    return float(value)


def _parse_neighbor(obj, path: str) -> Optional[LaneNeighbor]:
    if obj is None:
        return None
    _expect(isinstance(obj, dict), path, "expected object or null")
    _expect("id" in obj and "change_ok" in obj, path,
            "neighbor needs fields id, change_ok")
    _expect(isinstance(obj["id"], int), f"{path}.id", "expected integer")
    _expect(obj["change_ok"] in (0, 1), f"{path}.change_ok", "expected 0 or 1")
    return LaneNeighbor(obj["id"], bool(obj["change_ok"]))


def _parse_segment(obj, path: str) -> LaneSegment:
    _expect(isinstance(obj, dict), path, "expected object")
    for key in ("id", "speed_limit_mps", "nodes", "exits", "entries",
                "left", "right"):
        _expect(key in obj, path, f"missing field {key!r}")
    _expect(isinstance(obj["id"], int), f"{path}.id", "expected integer")
    nodes = obj["nodes"]
    _expect(isinstance(nodes, list) and len(nodes) >= 2, f"{path}.nodes",
            "expected array of at least 2 points")
    parsed = []
    for i, pt in enumerate(nodes):
        _expect(isinstance(pt, list) and len(pt) == 2, f"{path}.nodes[{i}]",
                "expected [x, y]")
        parsed.append([_num(pt[0], f"{path}.nodes[{i}][0]"),
                       _num(pt[1], f"{path}.nodes[{i}][1]")])
    for key in ("exits", "entries"):
        refs = obj[key]
        _expect(isinstance(refs, list) and all(isinstance(r, int) for r in refs),
                f"{path}.{key}", "expected array of segment ids")
    return LaneSegment(
        id=obj["id"],
        nodes=np.array(parsed),
        speed_limit_mps=_num(obj["speed_limit_mps"], f"{path}.speed_limit_mps"),
        exit_ids=tuple(obj["exits"]),
        entry_ids=tuple(obj["entries"]),
        left=_parse_neighbor(obj["left"], f"{path}.left"),
        right=_parse_neighbor(obj["right"], f"{path}.right"),
    )


def _parse_states(rows, path: str, expected_len: int) -> list[AgentState]:
    _expect(isinstance(rows, list) and len(rows) == expected_len, path,
            f"expected array of {expected_len} states")
    out = []
    for i, row in enumerate(rows):
        rpath = f"{path}[{i}]"
        _expect(isinstance(row, list) and len(row) == 6, rpath,
                "expected [t, x, y, heading, speed, valid]")
        t, x, y, h, v, ok = row
        _expect(isinstance(t, int), f"{rpath}[0]", "expected integer timestamp")
        _expect(ok in (0, 1), f"{rpath}[5]", "expected valid flag 0 or 1")
        if ok:
            out.append(AgentState(t, _num(x, rpath), _num(y, rpath),
                                  _num(h, rpath), _num(v, rpath), True))
        else:
            # invalid states carry no guarantees; normalize non-finite
            # fields so canonical re-serialization stays valid JSON
            vals = [float(f) if isinstance(f, (int, float))
                    and math.isfinite(f) else 0.0 for f in (x, y, h, v)]
            out.append(AgentState(t, *vals, False))
    return out


def _parse_track(obj, path: str) -> AgentTrack:
    _expect(isinstance(obj, dict), path, "expected object")
    for key in ("agent_id", "class", "length_m", "width_m", "history", "future"):
        _expect(key in obj, path, f"missing field {key!r}")
    _expect(isinstance(obj["agent_id"], str), f"{path}.agent_id",
            "expected string")
    return AgentTrack(
        agent_id=obj["agent_id"],
        object_class=obj["class"],
        length_m=_num(obj["length_m"], f"{path}.length_m"),
        width_m=_num(obj["width_m"], f"{path}.width_m"),
        history=_parse_states(obj["history"], f"{path}.history", HISTORY_LEN),
        future=_parse_states(obj["future"], f"{path}.future", FUTURE_LEN),
    )


def parse_scenario(data: bytes | str) -> Scenario:
    """Parse and validate a scenario file; raises ScenarioError subclasses."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedScenario(f"not UTF-8: {exc}") from None
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedScenario(f"invalid JSON: {exc}") from None
    _expect(isinstance(obj, dict), "$", "expected top-level object")
    for key in ("scenario_id", "map", "tracks", "tracks_to_predict"):
        _expect(key in obj, "$", f"missing field {key!r}")
    _expect(isinstance(obj["scenario_id"], str), "scenario_id", "expected string")
    _expect(isinstance(obj["map"], dict) and "segments" in obj["map"],
            "map", "expected object with field 'segments'")
    segs_raw = obj["map"]["segments"]
    _expect(isinstance(segs_raw, list), "map.segments", "expected array")
    segments = [_parse_segment(s, f"map.segments[{i}]")
                for i, s in enumerate(segs_raw)]
    tracks_raw = obj["tracks"]
    _expect(isinstance(tracks_raw, list), "tracks", "expected array")
    tracks = [_parse_track(t, f"tracks[{i}]") for i, t in enumerate(tracks_raw)]
    ttp = obj["tracks_to_predict"]
    _expect(isinstance(ttp, list) and all(isinstance(a, str) for a in ttp),
            "tracks_to_predict", "expected array of agent id strings")
    return Scenario(
        scenario_id=obj["scenario_id"],
        vector_map=VectorMap(segments),
        tracks=tracks,
        tracks_to_predict=tuple(ttp),
    )


# -- canonical serialization ------------------------------------------------

def _fmt_float(x: float) -> str:
    if x == 0.0:  # normalize -0.0
        x = 0.0
    return format(x, ".6f")


def _emit(value, out: list[str]):
    if value is None:
        out.append("null")
    elif isinstance(value, bool):
        out.append("1" if value else "0")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(_fmt_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _emit(item, out)
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _emit(value[key], out)
        out.append("}")
    else:
        raise TypeError(f"cannot serialize {type(value)!r}")


def _state_row(s: AgentState) -> list:
    return [s.timestamp_index, s.x, s.y, s.heading, s.speed, 1 if s.valid else 0]


def _neighbor_obj(n: Optional[LaneNeighbor]):
    return None if n is None else {"id": n.segment_id, "change_ok": n.change_ok}


def write_scenario(scenario: Scenario) -> bytes:
    """Serialize to canonical bytes; equal scenarios yield identical output."""
    obj = {
        "scenario_id": scenario.scenario_id,
        "map": {"segments": [
            {
                "id": seg.id,
                "speed_limit_mps": float(seg.speed_limit_mps),
                "nodes": [[float(x), float(y)] for x, y in seg.nodes],
                "exits": list(seg.exit_ids),
                "entries": list(seg.entry_ids),
                "left": _neighbor_obj(seg.left),
                "right": _neighbor_obj(seg.right),
            }
            for seg in scenario.vector_map.segments.values()
        ]},
        "tracks": [
            {
                "agent_id": t.agent_id,
                "class": t.object_class,
                "length_m": float(t.length_m),
                "width_m": float(t.width_m),
                "history": [_state_row(s) for s in t.history],
                "future": [_state_row(s) for s in t.future],
            }
            for t in scenario.tracks
        ],
        "tracks_to_predict": list(scenario.tracks_to_predict),
    }
    out: list[str] = []
    _emit(obj, out)
    out.append("\n")
    return "".join(out).encode("utf-8")
