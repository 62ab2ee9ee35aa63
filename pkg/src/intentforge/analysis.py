"""Prediction-quality analysis over externally supplied prediction files.

Covers dataset filtering, displacement metrics (minADE / minFDE / miss
rate), ground-truth deviation from the legal road graph, sliding-window
smoothing, and the deviation-vs-minFDE curve.

Miss-rate thresholds follow the Waymo Open Motion benchmark definition:
lateral / longitudinal boxes of (1.0, 2.0) m at 3 s, (1.8, 3.6) m at
5 s, (3.0, 6.0) m at 8 s, oriented by the ground-truth heading at the
horizon and scaled by the agent's current speed v with factor 0.5 for
v <= 1.4 m/s, 1.0 for v >= 11 m/s, linear in between. Boundary hits are
inclusive (a mode exactly on the threshold counts as a hit).
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .lane_assoc import AssocConfig, associate
from .map_model import FUTURE_LEN, AgentTrack
from .road_graph import ReachabilitySet

HORIZON_STEP = {3: 29, 5: 49, 8: 79}   # future index at 10 Hz

MR_LATERAL = {3: 1.0, 5: 1.8, 8: 3.0}
MR_LONGITUDINAL = {3: 2.0, 5: 3.6, 8: 6.0}
MR_SPEED_LOW, MR_SPEED_HIGH = 1.4, 11.0
MR_SCALE_LOW, MR_SCALE_HIGH = 0.5, 1.0

MAX_PLAUSIBLE_SPEED = 60.0   # m/s between consecutive valid GT samples
PARKED_DISPLACEMENT = 1.0    # m of total GT path length over 8 s
MAX_MODES = 6


@dataclass(eq=False)
class PredictionSet:
    """Up to 6 predicted trajectories of 80 global-frame points each."""

    agent_id: str
    trajectories: np.ndarray     # (m, 80, 2)
    confidences: np.ndarray      # (m,)

    def __post_init__(self):
        traj = np.asarray(self.trajectories, dtype=np.float64)
        conf = np.asarray(self.confidences, dtype=np.float64)
        if traj.ndim != 3 or traj.shape[2] != 2 or traj.shape[1] != FUTURE_LEN:
            raise ValueError(
                f"trajectories must have shape (m, {FUTURE_LEN}, 2)")
        m = traj.shape[0]
        if not 1 <= m <= MAX_MODES:
            raise ValueError(f"need 1..{MAX_MODES} modes, got {m}")
        if conf.shape != (m,):
            raise ValueError("one confidence per mode required")
        if (conf < 0).any() or (conf > 1).any():
            raise ValueError("confidences must lie in [0, 1]")
        if conf.sum() > 1 + 1e-6:
            raise ValueError("confidences must sum to <= 1")
        self.trajectories = traj
        self.confidences = conf

    @property
    def n_modes(self) -> int:
        return int(self.trajectories.shape[0])


def _horizon_state(gt: AgentTrack, horizon: int):
    if horizon not in HORIZON_STEP:
        raise ValueError("horizon must be one of 3, 5, 8 (seconds)")
    state = gt.future[HORIZON_STEP[horizon]]
    if not state.valid:
        raise ValueError(f"ground truth invalid at the {horizon} s horizon")
    return state


def min_fde(pred: PredictionSet, gt: AgentTrack, horizon: int) -> float:
    """Minimum over modes of the final displacement at the horizon step."""
    state = _horizon_state(gt, horizon)
    pts = pred.trajectories[:, HORIZON_STEP[horizon], :]
    return float(np.hypot(pts[:, 0] - state.x, pts[:, 1] - state.y).min())


def min_ade(pred: PredictionSet, gt: AgentTrack, horizon: int) -> float:
    """Minimum over modes of the mean displacement over valid GT steps up
    to (and including) the horizon step."""
    if horizon not in HORIZON_STEP:
        raise ValueError("horizon must be one of 3, 5, 8 (seconds)")
    end = HORIZON_STEP[horizon] + 1
    valid = gt.future_valid[:end]
    if not valid.any():
        raise ValueError("no valid ground-truth step up to the horizon")
    gt_xy = gt.future_xy[:end][valid]
    diff = pred.trajectories[:, :end, :][:, valid, :] - gt_xy[None, :, :]
    per_mode = np.hypot(diff[..., 0], diff[..., 1]).mean(axis=1)
    return float(per_mode.min())


def miss_threshold_scale(current_speed: float) -> float:
    if current_speed <= MR_SPEED_LOW:
        return MR_SCALE_LOW
    if current_speed >= MR_SPEED_HIGH:
        return MR_SCALE_HIGH
    frac = (current_speed - MR_SPEED_LOW) / (MR_SPEED_HIGH - MR_SPEED_LOW)
    return MR_SCALE_LOW + (MR_SCALE_HIGH - MR_SCALE_LOW) * frac


def miss_rate(pred: PredictionSet, gt: AgentTrack, horizon: int) -> int:
    """1 if no mode endpoint is inside the benchmark threshold box around
    the GT endpoint (oriented by GT heading), else 0."""
    state = _horizon_state(gt, horizon)
    scale = miss_threshold_scale(gt.current_state.speed)
    lat_t = MR_LATERAL[horizon] * scale
    lon_t = MR_LONGITUDINAL[horizon] * scale
    c, s = math.cos(state.heading), math.sin(state.heading)
    pts = pred.trajectories[:, HORIZON_STEP[horizon], :]
    ex, ey = pts[:, 0] - state.x, pts[:, 1] - state.y
    lon = c * ex + s * ey
    lat = -s * ex + c * ey
    hit = (np.abs(lat) <= lat_t) & (np.abs(lon) <= lon_t)
    return 0 if hit.any() else 1


def gt_deviation(gt: AgentTrack, reach_set: ReachabilitySet,
                 mode: str = "node") -> float:
    """Smallest distance from the GT 8 s endpoint to the reachable road
    graph.

    node mode measures to reachable nodes; polyline mode measures to the
    lane pieces between reachable nodes that are consecutive within a
    segment (isolated reachable nodes still count as points), so
    polyline <= node <= polyline + spacing / 2.
    """
    endpoint = gt.gt_endpoint()
    if endpoint is None:
        raise ValueError("ground truth invalid at the 8 s horizon")
    if len(reach_set) == 0:
        raise ValueError("empty reachability set")
    d_nodes = np.hypot(*(reach_set.positions - endpoint).T)
    if mode == "node":
        return float(d_nodes.min())
    if mode != "polyline":
        raise ValueError("mode must be 'node' or 'polyline'")
    best = float(d_nodes.min())
    sid = reach_set.seg_ids
    ni = reach_set.node_indices
    pos = reach_set.positions
    order = np.lexsort((ni, sid))
    sid, ni, pos = sid[order], ni[order], pos[order]
    consecutive = (sid[1:] == sid[:-1]) & (ni[1:] == ni[:-1] + 1)
    if consecutive.any():
        a = pos[:-1][consecutive]
        b = pos[1:][consecutive]
        ab = b - a
        denom = (ab * ab).sum(axis=1)
        t = np.clip(((endpoint - a) * ab).sum(axis=1) / denom, 0.0, 1.0)
        closest = a + t[:, None] * ab
        best = min(best, float(np.hypot(*(closest - endpoint).T).min()))
    return best


def detect_parked(track: AgentTrack) -> bool:
    """True iff the GT path length over the horizon is under 1 m."""
    xy = track.future_xy[track.future_valid]
    if xy.shape[0] < 2:
        return True
    steps = np.hypot(*(xy[1:] - xy[:-1]).T)
    return float(steps.sum()) < PARKED_DISPLACEMENT


def _implausible_gt(track: AgentTrack) -> bool:
    idx = np.nonzero(track.future_valid)[0]
    if idx.size < 2:
        return False
    xy = track.future_xy[idx]
    dt = np.diff(idx) / 10.0
    speed = np.hypot(*(xy[1:] - xy[:-1]).T) / dt
    return bool((speed > MAX_PLAUSIBLE_SPEED).any())


@dataclass
class FilterReport:
    total: int = 0
    excluded_non_vehicle: int = 0
    excluded_no_dynamic: int = 0
    excluded_invalid_gt: int = 0
    remaining: int = 0

    def consistent(self) -> bool:
        return self.total == (self.remaining + self.excluded_non_vehicle
                              + self.excluded_no_dynamic
                              + self.excluded_invalid_gt)


FilteredItem = namedtuple("FilteredItem",
                          ["scenario", "track", "association", "prediction"])


def filter_dataset(scenarios, predictions=None,
                   assoc_cfg: AssocConfig | None = None):
    """Keep prediction targets suitable for scene-conditioned intents.

    Walks every track in tracks_to_predict and drops, in order:
    non-vehicles, vehicles without a valid lane association, and tracks
    with an invalid 8 s endpoint or implausible GT (inter-step speed
    above 60 m/s). ``predictions`` optionally maps agent_id to a
    per-model dict and is attached to the surviving items.
    """
    assoc_cfg = assoc_cfg or AssocConfig()
    predictions = predictions or {}
    report = FilterReport()
    kept: list[FilteredItem] = []
    for scenario in scenarios:
        for agent_id in scenario.tracks_to_predict:
            track = scenario.track(agent_id)
            report.total += 1
            if track.object_class != "vehicle":
                report.excluded_non_vehicle += 1
                continue
            assoc = associate(scenario.vector_map, track, assoc_cfg)
            if assoc.fallback:
                report.excluded_no_dynamic += 1
                continue
            if track.gt_endpoint() is None or _implausible_gt(track):
                report.excluded_invalid_gt += 1
                continue
            report.remaining += 1
            kept.append(FilteredItem(scenario, track, assoc,
                                     predictions.get(agent_id)))
    assert report.consistent()
    return kept, report


def moving_average(values, window: int) -> np.ndarray:
    """Trailing arithmetic mean over each contiguous window; output length
    is len(values) - window + 1."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > x.shape[0]:
        raise ValueError(
            f"window {window} exceeds sequence length {x.shape[0]}")
    cs = np.concatenate(([0.0], np.cumsum(x)))
    return (cs[window:] - cs[:-window]) / window


@dataclass
class DeviationRecord:
    agent_id: str
    deviation: float
    min_fde_8s: dict[str, float] = field(default_factory=dict)
    parked: bool = False

    def __post_init__(self):
        if self.deviation < 0:
            raise ValueError("deviation must be >= 0")


def deviation_curve(records, window: int, exclude_parked: bool = False):
    """Smoothed minFDE-vs-deviation table.

    Records are sorted by ascending deviation; each model's minFDE column
    is smoothed with a trailing moving average. Returns (model_names,
    rows) where each row is (rank index, deviation at that rank,
    smoothed minFDE per model). Rank indices follow the sorted order, so
    the table serves both the sorted-index and the deviation-keyed view.
    """
    recs = [r for r in records if not (exclude_parked and r.parked)]
    if not recs:
        raise ValueError("no records to analyze")
    models = sorted(recs[0].min_fde_8s)
    for r in recs:
        if sorted(r.min_fde_8s) != models:
            raise ValueError("records disagree on the model set")
    if window > len(recs):
        raise ValueError(f"window {window} exceeds record count {len(recs)}")
    recs.sort(key=lambda r: (r.deviation, r.agent_id))
    smoothed = {m: moving_average([r.min_fde_8s[m] for r in recs], window)
                for m in models}
    rows = []
    for i in range(len(recs) - window + 1):
        rank = i + window - 1
        rows.append((rank, recs[rank].deviation,
                     *(float(smoothed[m][i]) for m in models)))
    return models, rows


def coverage(points, gt_endpoint) -> float:
    """Distance from the agent-frame GT endpoint to the nearest intention
    point; a desk-scale proxy for anchor quality."""
    pts = points.points if hasattr(points, "points") else np.asarray(points)
    p = np.asarray(gt_endpoint, dtype=np.float64)
    return float(np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1]).min())
