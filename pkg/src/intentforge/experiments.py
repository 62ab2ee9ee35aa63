"""Runnable experiment pipelines over synthetic scenario suites.

These back the scripts in scripts/: the mixed-ratio coverage table
(how strongly to weight scene-conditioned points against statistical
ones when pooling) and the coverage proxy comparing static, dynamic,
and mixed intention sets against ground-truth endpoints.
"""

from __future__ import annotations

import numpy as np

from .analysis import coverage
from .intention import (IntentionPointSet, KMeansConfig, MixConfig,
                        dynamic_intents, mixed_intents, static_intents,
                        to_agent_frame)
from .lane_assoc import AssocConfig, associate
from .map_model import AgentTrack, Scenario
from .road_graph import GraphConfig, build_graph, reach
from .scenario_gen import generate_suite


def agent_frame_endpoint(track: AgentTrack):
    """Ground-truth 8 s endpoint in the agent frame, or None if invalid."""
    endpoint = track.gt_endpoint()
    if endpoint is None:
        return None
    return to_agent_frame(endpoint, track)


def pooled_static(scenarios, object_class: str = "vehicle",
                  cfg: KMeansConfig | None = None) -> IntentionPointSet:
    """Statistical intention points from every valid endpoint of the
    given class across a scenario corpus."""
    cfg = cfg or KMeansConfig()
    endpoints = []
    for scenario in scenarios:
        for track in scenario.tracks:
            if track.object_class != object_class:
                continue
            local = agent_frame_endpoint(track)
            if local is not None:
                endpoints.append(local)
    if not endpoints:
        raise ValueError(f"no valid {object_class} endpoints in the corpus")
    return static_intents(np.asarray(endpoints), object_class, cfg)


def scene_dynamic(scenario: Scenario, track: AgentTrack,
                  assoc_cfg: AssocConfig | None = None,
                  graph_cfg: GraphConfig | None = None,
                  kmeans_cfg: KMeansConfig | None = None):
    """Association -> reachability -> dynamic points for one agent.

    Returns (association, reach_set, dynamic_set); the latter two are
    None when the association falls back.
    """
    assoc = associate(scenario.vector_map, track, assoc_cfg or AssocConfig())
    if assoc.fallback:
        return assoc, None, None
    graph = build_graph(scenario.vector_map, graph_cfg or GraphConfig())
    reach_set = reach(graph, assoc, graph_cfg or GraphConfig())
    dyn = dynamic_intents(reach_set, track, kmeans_cfg or KMeansConfig())
    return assoc, reach_set, dyn


def mixed_ratio_table(n_scenes: int = 500, seed: int = 0,
                      ratios=(1.0, 3.0, 5.0),
                      kmeans_cfg: KMeansConfig | None = None):
    """Coverage of mixed intention points at several dynamic:static
    weight ratios over one synthetic suite.

    Returns rows of (ratio label, scenes used, mean coverage in m);
    deterministic in (n_scenes, seed, ratios).
    """
    kmeans_cfg = kmeans_cfg or KMeansConfig()
    suite = generate_suite(n_scenes, seed)
    stat = pooled_static(suite, "vehicle", kmeans_cfg)
    sums = {r: 0.0 for r in ratios}
    used = 0
    for scenario in suite:
        track = scenario.track(scenario.tracks_to_predict[0])
        endpoint = agent_frame_endpoint(track)
        if endpoint is None:
            continue
        _, _, dyn = scene_dynamic(scenario, track, kmeans_cfg=kmeans_cfg)
        if dyn is None:
            continue
        used += 1
        for r in ratios:
            mixed = mixed_intents(dyn, stat, MixConfig(r, 1.0), kmeans_cfg)
            sums[r] += coverage(mixed, endpoint)
    if used == 0:
        raise ValueError("no scene produced dynamic intention points")
    return [(f"{r:g}:1", used, sums[r] / used) for r in ratios]


def coverage_proxy(n_scenes: int = 1000, seed: int = 0,
                   kmeans_cfg: KMeansConfig | None = None,
                   mix_cfg: MixConfig | None = None):
    """Per-scene coverage of static, dynamic, and mixed sets over a
    follow-lane suite (every GT endpoint on the road graph)."""
    kmeans_cfg = kmeans_cfg or KMeansConfig()
    mix_cfg = mix_cfg or MixConfig()
    suite = generate_suite(n_scenes, seed, behaviors=("follow_lane",))
    stat = pooled_static(suite, "vehicle", kmeans_cfg)
    out = {"static": [], "dynamic": [], "mixed": []}
    skipped = 0
    for scenario in suite:
        track = scenario.track(scenario.tracks_to_predict[0])
        endpoint = agent_frame_endpoint(track)
        if endpoint is None:
            skipped += 1
            continue
        _, _, dyn = scene_dynamic(scenario, track, kmeans_cfg=kmeans_cfg)
        if dyn is None:
            skipped += 1
            continue
        mixed = mixed_intents(dyn, stat, mix_cfg, kmeans_cfg)
        out["static"].append(coverage(stat, endpoint))
        out["dynamic"].append(coverage(dyn, endpoint))
        out["mixed"].append(coverage(mixed, endpoint))
    return {k: np.asarray(v) for k, v in out.items()} | {"skipped": skipped}
