import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import line_nodes, scenario_of, seg, stationary_track, vehicle_track
from intentforge.analysis import (DeviationRecord, FilterReport, PredictionSet,
                                  coverage, detect_parked, deviation_curve,
                                  filter_dataset, gt_deviation, min_ade,
                                  min_fde, miss_rate, moving_average)
from intentforge.intention import dynamic_intents, to_agent_frame, KMeansConfig
from intentforge.map_model import VectorMap
from intentforge.road_graph import ReachabilitySet


def reach_of(positions) -> ReachabilitySet:
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    return ReachabilitySet(np.zeros(n, dtype=np.int64),
                           np.arange(n, dtype=np.int64),
                           positions, np.zeros(n), budget=8.0)


def pred_of(agent_id, *trajectories, confidences=None) -> PredictionSet:
    traj = np.asarray(trajectories, dtype=float)
    if confidences is None:
        confidences = np.full(traj.shape[0], 1.0 / traj.shape[0])
    return PredictionSet(agent_id, traj, np.asarray(confidences))


def gt_modes(track, *offsets):
    """One mode per offset, each the GT future shifted by a constant."""
    return [track.future_xy + np.asarray(off, dtype=float) for off in offsets]


# -- min_fde / min_ade ---------------------------------------------------------

def test_min_fde_exact_mode():
    track = vehicle_track((0, 0), speed=6.0)
    pred = pred_of("a0", *gt_modes(track, (0, 0), (5, 5)))
    for horizon in (3, 5, 8):
        assert min_fde(pred, track, horizon) == 0.0


def test_min_fde_picks_best_mode():
    track = vehicle_track((0, 0), speed=6.0)
    pred = pred_of("a0", *gt_modes(track, (0, 3.0), (0, 1.0)))
    assert min_fde(pred, track, 8) == pytest.approx(1.0)


def test_min_fde_invalid_horizon_state():
    valid = np.ones(80, dtype=bool)
    valid[79] = False
    track = vehicle_track((0, 0), speed=6.0, future_valid=valid)
    pred = pred_of("a0", *gt_modes(track, (0, 0)))
    with pytest.raises(ValueError):
        min_fde(pred, track, 8)
    assert min_fde(pred, track, 5) == 0.0


def test_min_fde_matches_exhaustive_scan():
    rng = np.random.default_rng(0)
    track = vehicle_track((0, 0), speed=6.0)
    for _ in range(20):
        modes = rng.uniform(-50, 50, size=(6, 80, 2))
        pred = PredictionSet("a0", modes, np.full(6, 1 / 6))
        for horizon, step in ((3, 29), (5, 49), (8, 79)):
            gt_pos = track.future_xy[step]
            expected = min(float(np.hypot(*(modes[m, step] - gt_pos)))
                           for m in range(6))
            assert min_fde(pred, track, horizon) == pytest.approx(expected)


def test_min_ade_exact_mode():
    track = vehicle_track((0, 0), speed=6.0)
    assert min_ade(pred_of("a0", *gt_modes(track, (0, 0))), track, 8) == 0.0


def test_min_ade_constant_offset():
    track = vehicle_track((0, 0), speed=6.0)
    pred = pred_of("a0", *gt_modes(track, (0, 2.0)))
    assert min_ade(pred, track, 8) == pytest.approx(2.0)


def test_min_ade_matches_exhaustive_scan():
    rng = np.random.default_rng(1)
    valid = rng.random(80) > 0.2
    valid[79] = True
    track = vehicle_track((0, 0), speed=6.0, future_valid=valid)
    modes = rng.uniform(-50, 50, size=(4, 80, 2))
    pred = PredictionSet("a0", modes, np.full(4, 0.25))
    for horizon, step in ((3, 29), (5, 49), (8, 79)):
        per_mode = []
        for m in range(4):
            disp = [float(np.hypot(*(modes[m, i] - track.future_xy[i])))
                    for i in range(step + 1) if valid[i]]
            per_mode.append(sum(disp) / len(disp))
        assert min_ade(pred, track, horizon) == pytest.approx(min(per_mode))


def test_min_ade_bounded_by_argmin_mode_max_step():
    rng = np.random.default_rng(2)
    track = vehicle_track((0, 0), speed=6.0)
    for _ in range(20):
        modes = rng.uniform(-30, 30, size=(3, 80, 2))
        pred = PredictionSet("a0", modes, np.full(3, 1 / 3))
        ade = min_ade(pred, track, 8)
        best = np.argmin([
            np.hypot(*(modes[m] - track.future_xy).T).mean()
            for m in range(3)])
        max_step = float(np.hypot(*(modes[best] - track.future_xy).T).max())
        assert ade <= max_step + 1e-12


# -- miss_rate -------------------------------------------------------------------

def test_miss_rate_hit_on_exact_endpoint():
    track = vehicle_track((0, 0), speed=6.0)
    assert miss_rate(pred_of("a0", *gt_modes(track, (0, 0))), track, 8) == 0


def test_miss_rate_all_far():
    track = vehicle_track((0, 0), speed=6.0)
    pred = pred_of("a0", *gt_modes(track, (50, 0), (0, 50)))
    assert miss_rate(pred, track, 8) == 1


def test_miss_rate_boundary_inclusive():
    # heading 0, speed 20 (scale 1): lateral threshold at 8 s is 3.0 m
    track = vehicle_track((0, 0), heading=0.0, speed=20.0)
    on_edge = pred_of("a0", *gt_modes(track, (0.0, 3.0)))
    beyond = pred_of("a0", *gt_modes(track, (0.0, 3.0000001)))
    assert miss_rate(on_edge, track, 8) == 0
    assert miss_rate(beyond, track, 8) == 1


def test_miss_rate_speed_scaling():
    # slow agent (scale 0.5): 8 s lateral threshold shrinks to 1.5 m
    slow = vehicle_track((0, 0), heading=0.0, speed=1.0)
    pred = pred_of("a0", *gt_modes(slow, (0.0, 2.0)))
    assert miss_rate(pred, slow, 8) == 1
    fast = vehicle_track((0, 0), heading=0.0, speed=20.0)
    pred = pred_of("a0", *gt_modes(fast, (0.0, 2.0)))
    assert miss_rate(pred, fast, 8) == 0


# -- gt_deviation ----------------------------------------------------------------

def lane_reach(length=50.0):
    xs = np.arange(0, length + 0.25, 0.5)
    return reach_of(np.stack([xs, np.zeros_like(xs)], axis=1))


def endpoint_track(endpoint, start=(0.0, 0.0)):
    future = np.linspace(start, endpoint, 80)
    return vehicle_track(start, speed=6.0, future_xy=future)


def test_gt_deviation_zero_on_node():
    track = endpoint_track((10.0, 0.0))
    assert gt_deviation(track, lane_reach(), "node") == 0.0
    assert gt_deviation(track, lane_reach(), "polyline") == 0.0


def test_gt_deviation_perpendicular_offset():
    track = endpoint_track((10.25, 2.5))
    node_d = gt_deviation(track, lane_reach(), "node")
    poly_d = gt_deviation(track, lane_reach(), "polyline")
    assert 2.5 <= node_d <= 2.5125
    assert node_d == pytest.approx(math.hypot(2.5, 0.25))
    assert poly_d == pytest.approx(2.5)


def test_gt_deviation_matches_linear_scan():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-40, 40, size=(150, 2))
    rset = reach_of(pts)
    for _ in range(30):
        endpoint = rng.uniform(-60, 60, 2)
        track = endpoint_track(endpoint)
        expected = float(np.hypot(*(pts - endpoint).T).min())
        assert gt_deviation(track, rset, "node") == expected


def test_gt_deviation_isolated_nodes_polyline():
    # non-consecutive node indices: polyline mode degrades to points
    rset = ReachabilitySet(np.zeros(2, dtype=np.int64),
                           np.array([0, 5], dtype=np.int64),
                           np.array([[0.0, 0.0], [10.0, 0.0]]),
                           np.zeros(2), 8.0)
    track = endpoint_track((5.0, 1.0))
    assert gt_deviation(track, rset, "polyline") == pytest.approx(
        math.hypot(5.0, 1.0))


def test_gt_deviation_requires_valid_endpoint():
    valid = np.ones(80, dtype=bool)
    valid[79] = False
    track = vehicle_track((0, 0), speed=6.0, future_valid=valid)
    with pytest.raises(ValueError):
        gt_deviation(track, lane_reach(), "node")


# -- detect_parked ---------------------------------------------------------------

def test_parked_zero_motion():
    assert detect_parked(stationary_track((5.0, 5.0))) is True


def test_parked_moving_vehicle():
    assert detect_parked(vehicle_track((0, 0), speed=10.0)) is False


def test_parked_boundary_creep():
    future = np.stack([np.linspace(0, 0.99, 80), np.zeros(80)], axis=1)
    track = vehicle_track((0, 0), speed=0.0, future_xy=future)
    assert detect_parked(track) is True


# -- filter_dataset ---------------------------------------------------------------

def make_filter_scenario():
    vm = VectorMap([seg(0, line_nodes((-50, 0), (150, 0)))])
    tracks = []
    # 6 clean vehicles
    for i in range(6):
        tracks.append(vehicle_track((i * 2.0, 0.0), speed=8.0,
                                    agent_id=f"veh{i}"))
    # 4 pedestrians
    for i in range(4):
        tracks.append(vehicle_track((i * 2.0, 0.0), speed=1.5,
                                    agent_id=f"ped{i}",
                                    object_class="pedestrian"))
    # 3 vehicles far off-road (6 m): no association
    for i in range(3):
        tracks.append(vehicle_track((i * 2.0, 6.0), speed=8.0,
                                    agent_id=f"off{i}"))
    # 4 vehicles with an invalid 8 s endpoint
    bad_end = np.ones(80, dtype=bool)
    bad_end[79] = False
    for i in range(4):
        tracks.append(vehicle_track((i * 2.0, 0.0), speed=8.0,
                                    agent_id=f"inv{i}", future_valid=bad_end))
    # 3 vehicles teleporting (> 60 m/s between steps)
    for i in range(3):
        future = np.stack([np.linspace(0.6, 48, 80), np.zeros(80)], axis=1)
        future[40:, 0] += 50.0
        tracks.append(vehicle_track((i * 2.0, 0.0), speed=8.0,
                                    agent_id=f"jump{i}", future_xy=future))
    return scenario_of(vm, tracks)


def test_filter_counts_match_hand_enumeration():
    items, report = filter_dataset([make_filter_scenario()])
    assert report == FilterReport(total=20, excluded_non_vehicle=4,
                                  excluded_no_dynamic=3,
                                  excluded_invalid_gt=7, remaining=6)
    assert report.consistent()
    assert sorted(it.track.agent_id for it in items) == [
        f"veh{i}" for i in range(6)]


def test_filter_attaches_predictions():
    scenario = make_filter_scenario()
    track = scenario.track("veh0")
    preds = {"veh0": {"m": pred_of("veh0", *gt_modes(track, (0, 0)))}}
    items, _ = filter_dataset([scenario], preds)
    by_id = {it.track.agent_id: it.prediction for it in items}
    assert by_id["veh0"] is not None and by_id["veh1"] is None


# -- moving_average ----------------------------------------------------------------

def test_moving_average_constant():
    got = moving_average(np.full(10, 4.2), 3)
    assert got == pytest.approx(np.full(8, 4.2))


def test_moving_average_window_one_identity():
    x = np.array([3.0, -1.0, 7.5])
    assert np.array_equal(moving_average(x, 1), x)


def test_moving_average_hand_example():
    assert moving_average([1, 2, 3, 4], 2) == pytest.approx([1.5, 2.5, 3.5])


def test_moving_average_window_too_large():
    with pytest.raises(ValueError):
        moving_average([1.0, 2.0], 3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60),
       st.floats(-100, 100))
def test_moving_average_constant_shift(values, c):
    x = np.asarray(values)
    w = max(1, len(values) // 2)
    shifted = moving_average(x + c, w)
    assert shifted == pytest.approx(moving_average(x, w) + c, abs=1e-8)


def test_moving_average_matches_naive():
    rng = np.random.default_rng(8)
    for _ in range(50):
        n = int(rng.integers(1, 200))
        w = int(rng.integers(1, n + 1))
        x = rng.uniform(-100, 100, n)
        naive = np.array([x[i:i + w].mean() for i in range(n - w + 1)])
        assert moving_average(x, w) == pytest.approx(naive, abs=1e-9)


# -- deviation_curve ----------------------------------------------------------------

def rec(aid, dev, fde, parked=False, model="m"):
    if isinstance(fde, dict):
        return DeviationRecord(aid, dev, fde, parked)
    return DeviationRecord(aid, dev, {model: fde}, parked)


def test_curve_flat_for_constant_fde():
    records = [rec(f"a{i}", 0.0, 2.5) for i in range(10)]
    models, rows = deviation_curve(records, 4)
    assert models == ["m"]
    assert len(rows) == 7
    assert all(row[2] == pytest.approx(2.5) for row in rows)


def test_curve_preserves_constant_gap():
    rng = np.random.default_rng(4)
    records = []
    for i in range(40):
        base = float(rng.uniform(0.5, 4.0))
        records.append(rec(f"a{i}", float(rng.uniform(0, 10)),
                           {"a": base, "b": base - 0.2}))
    models, rows = deviation_curve(records, 7)
    assert models == ["a", "b"]
    for _, _, fa, fb in rows:
        assert fa - fb == pytest.approx(0.2)


def test_curve_matches_naive_oracle():
    rng = np.random.default_rng(5)
    records = [rec(f"a{i:03d}", float(rng.uniform(0, 8)),
                   float(rng.uniform(0, 5))) for i in range(60)]
    window = 3
    _, rows = deviation_curve(records, window)
    ordered = sorted(records, key=lambda r: (r.deviation, r.agent_id))
    for out_i, (rank, dev, fde) in enumerate(rows):
        chunk = ordered[out_i:out_i + window]
        assert rank == out_i + window - 1
        assert dev == ordered[rank].deviation
        assert fde == pytest.approx(
            sum(r.min_fde_8s["m"] for r in chunk) / window)


def test_curve_excludes_parked():
    records = [rec("a0", 0.0, 1.0), rec("a1", 1.0, 9.0, parked=True),
               rec("a2", 2.0, 3.0)]
    _, rows = deviation_curve(records, 1, exclude_parked=True)
    assert [row[2] for row in rows] == pytest.approx([1.0, 3.0])


def test_curve_window_too_large():
    with pytest.raises(ValueError):
        deviation_curve([rec("a0", 0.0, 1.0)], 2)


# -- coverage -----------------------------------------------------------------------

def test_coverage_exact_hit():
    pts = np.array([[0.0, 0.0], [5.0, 5.0]])
    assert coverage(pts, (5.0, 5.0)) == 0.0


def test_coverage_nearest_point():
    pts = np.array([[99.0, 0.0], [0.0, 0.0]])
    assert coverage(pts, (100.0, 0.0)) == pytest.approx(1.0)


def test_coverage_matches_linear_scan():
    rng = np.random.default_rng(6)
    for _ in range(20):
        pts = rng.uniform(-50, 50, size=(64, 2))
        p = rng.uniform(-80, 80, 2)
        expected = min(float(np.hypot(*(q - p))) for q in pts)
        assert coverage(pts, p) == pytest.approx(expected)


def test_dynamic_coverage_bounded_by_cluster_radius():
    """On-graph endpoints are covered within the widest K-means cluster."""
    rng = np.random.default_rng(7)
    xs = np.arange(0, 160, 0.5)
    nodes = np.stack([xs, np.zeros_like(xs)], axis=1)
    rset = reach_of(nodes)
    track = vehicle_track((0.0, 0.0), speed=10.0)
    dyn = dynamic_intents(rset, track, KMeansConfig(k=16, seed=0))
    local = np.array([to_agent_frame(p, track) for p in nodes])
    d = np.hypot(*(local[:, None, :] - dyn.points[None, :, :]).T).T
    max_radius = float(d.min(axis=1).max())
    for _ in range(20):
        endpoint = nodes[rng.integers(len(nodes))]
        cov = coverage(dyn, to_agent_frame(endpoint, track))
        assert cov <= max_radius + 1e-9
