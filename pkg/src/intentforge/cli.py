"""Command-line entry point: gen, intents, analyze, dump-roadgraph.

Wires scenario ingestion -> lane association -> road graph -> intention
points -> analysis. Every option can come from a JSON config file
(--config) and be overridden on the command line; the env var
INTENTFORGE_SEED overrides the default seed when --seed is absent.
Exit codes: 0 success, 1 runtime/data error, 2 usage/config error.

All CSV output uses 6-decimal fixed floats and deterministic row order
(scenario id, agent id), so reruns with identical inputs, config, and
seed are byte-identical regardless of --jobs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from .analysis import (DeviationRecord, PredictionSet, detect_parked,
                       deviation_curve, filter_dataset, gt_deviation, min_fde)
from .experiments import agent_frame_endpoint, pooled_static
from .intention import (IntentionPointSet, KMeansConfig, MixConfig,
                        dynamic_intents, mixed_intents, static_intents)
from .lane_assoc import AssocConfig, associate
from .map_model import ScenarioError, parse_scenario, write_scenario
from .road_graph import GraphConfig, build_graph, reach
from .scenario_gen import BEHAVIORS, TEMPLATES, GenSpec, generate, generate_suite
from .analysis import coverage as coverage_of

SEED_ENV = "INTENTFORGE_SEED"

_DEFAULTS = {
    "heading_threshold": math.pi / 4,
    "proximity_limit": 5.0,
    "backwards_look": 10.0,
    "time_budget": 8.0,
    "speed_offset": 6.7056,
    "k": 64,
    "max_iterations": 100,
    "tolerance": 1e-6,
    "seed": 0,
    "dynamic_weight": 3.0,
    "static_weight": 1.0,
    "window": 7500,
    "deviation_mode": "node",
    "exclude_parked": False,
}


class UsageError(Exception):
    """Bad arguments or config; maps to exit code 2."""


class DataError(Exception):
    """Unreadable or inconsistent input data; maps to exit code 1."""


@dataclass
class RunConfig:
    assoc: AssocConfig
    graph: GraphConfig
    kmeans: KMeansConfig
    mix: MixConfig
    window: int
    deviation_mode: str
    exclude_parked: bool


def _resolve_config(args) -> RunConfig:
    values = dict(_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise DataError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in loaded.items():
            if key not in _DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = val
    if os.environ.get(SEED_ENV):
        try:
            values["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer") from None
    for key in _DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    try:
        return RunConfig(
            assoc=AssocConfig(values["heading_threshold"],
                              values["proximity_limit"],
                              values["backwards_look"]),
            graph=GraphConfig(values["time_budget"], values["speed_offset"]),
            kmeans=KMeansConfig(values["k"], values["max_iterations"],
                                values["tolerance"], values["seed"]),
            mix=MixConfig(values["dynamic_weight"], values["static_weight"]),
            window=int(values["window"]),
            deviation_mode=values["deviation_mode"],
            exclude_parked=bool(values["exclude_parked"]),
        )
    except ValueError as exc:
        raise UsageError(f"config violation: {exc}") from None


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if os.environ.get(SEED_ENV):
        try:
            return int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer") from None
    return 0


def _load_scenarios(paths):
    files = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(p.glob("*.json")))
        elif p.is_file():
            files.append(p)
        else:
            raise DataError(f"no such scenario file or directory: {raw}")
    if not files:
        raise DataError("no scenario files found")
    scenarios = []
    for f in sorted(set(files)):
        try:
            scenarios.append(parse_scenario(f.read_bytes()))
        except (OSError, ScenarioError) as exc:
            raise DataError(f"{f}: {exc}") from None
    scenarios.sort(key=lambda s: s.scenario_id)
    seen: set[str] = set()
    for s in scenarios:
        for t in s.tracks:
            if t.agent_id in seen:
                raise DataError(f"agent id {t.agent_id!r} appears in more "
                                f"than one scenario")
            seen.add(t.agent_id)
    return scenarios


def _f6(x) -> str:
    x = float(x)
    if x == 0.0:
        x = 0.0
    return format(x, ".6f")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- gen ---------------------------------------------------------------------

def cmd_gen(args) -> int:
    seed = _resolve_seed(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.suite is not None:
        if args.suite < 1:
            raise UsageError("--suite must be >= 1")
        scenarios = generate_suite(args.suite, seed)
    else:
        if args.template is None:
            raise UsageError("--template is required unless --suite is given")
        try:
            spec = GenSpec(args.template, seed, args.speed_limit, args.behavior)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        scenarios = [generate(spec)]
    for s in scenarios:
        (out_dir / f"{s.scenario_id}.json").write_bytes(write_scenario(s))
    print(f"wrote {len(scenarios)} scenario file(s) to {out_dir}")
    return 0


# -- intents -----------------------------------------------------------------

def _static_sets(scenarios, classes, endpoints_file, cfg: RunConfig):
    """One statistical point set per object class, from an endpoints CSV
    (columns class,x,y) or pooled from the scenario corpus."""
    sets: dict[str, IntentionPointSet] = {}
    if endpoints_file:
        pools: dict[str, list] = {}
        try:
            lines = Path(endpoints_file).read_text().splitlines()
        except OSError as exc:
            raise DataError(f"cannot read endpoints file: {exc}") from None
        if not lines or lines[0].strip() != "class,x,y":
            raise DataError("endpoints file must start with header class,x,y")
        for ln in lines[1:]:
            if not ln.strip():
                continue
            cls, x, y = ln.split(",")
            pools.setdefault(cls, []).append((float(x), float(y)))
        for cls in classes:
            if cls not in pools:
                raise DataError(f"endpoints file has no rows for class {cls!r}")
            sets[cls] = static_intents(np.asarray(pools[cls]), cls, cfg.kmeans)
        return sets
    for cls in classes:
        try:
            sets[cls] = pooled_static(scenarios, cls, cfg.kmeans)
        except ValueError as exc:
            raise DataError(str(exc)) from None
    return sets


def _intents_for_scenario(scenario, kind, static_sets, cfg: RunConfig):
    rows, dump_rows = [], []
    graph = None
    for agent_id in scenario.tracks_to_predict:
        track = scenario.track(agent_id)
        fallback = False
        if kind == "static":
            points = static_sets[track.object_class]
            kind_out = "static"
        else:
            assoc = None
            if track.object_class == "vehicle":
                assoc = associate(scenario.vector_map, track, cfg.assoc)
            if assoc is None or assoc.fallback:
                fallback = True
                points = static_sets[track.object_class]
                kind_out = "static"
            else:
                if graph is None:
                    graph = build_graph(scenario.vector_map, cfg.graph)
                reach_set = reach(graph, assoc, cfg.graph)
                dump_rows.extend(
                    (scenario.scenario_id, agent_id, _f6(p[0]), _f6(p[1]),
                     _f6(t))
                    for _, _, p, t in reach_set.entries())
                dyn = dynamic_intents(reach_set, track, cfg.kmeans)
                if kind == "dynamic":
                    points, kind_out = dyn, "dynamic"
                else:
                    points = mixed_intents(dyn, static_sets["vehicle"],
                                           cfg.mix, cfg.kmeans)
                    kind_out = "mixed"
        for idx, (x, y) in enumerate(points.points):
            rows.append((agent_id, kind_out, str(idx), _f6(x), _f6(y),
                         "1" if fallback else "0"))
    return rows, dump_rows


def cmd_intents(args) -> int:
    cfg = _resolve_config(args)
    scenarios = _load_scenarios(args.scenarios)
    classes = sorted({s.track(a).object_class
                      for s in scenarios for a in s.tracks_to_predict})
    static_sets = _static_sets(scenarios, classes, args.endpoints, cfg)
    worker = partial(_intents_for_scenario, kind=args.kind,
                     static_sets=static_sets, cfg=cfg)
    results = _pmap(worker, scenarios, args.jobs)
    rows = [r for rows_i, _ in results for r in rows_i]
    rows.sort(key=lambda r: (r[0], r[1], int(r[2])))
    _write_csv(args.out, ("agent_id", "kind", "idx", "x", "y", "fallback"), rows)
    if args.dump_roadgraph:
        dump = [d for _, dump_i in results for d in dump_i]
        dump.sort(key=lambda d: (d[0], d[1], float(d[4]), float(d[2]),
                                 float(d[3])))
        _write_csv(args.dump_roadgraph,
                   ("scenario_id", "agent_id", "x", "y", "arrival_s"), dump)
    return 0


# -- analyze -----------------------------------------------------------------

def _load_prediction_csv(path) -> dict[str, PredictionSet]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read predictions: {exc}") from None
    header = "agent_id,mode_idx,confidence,step,x,y"
    if not lines or lines[0].strip() != header:
        raise DataError(f"{path}: expected header {header!r}")
    acc: dict[str, dict[int, dict]] = {}
    for i, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        parts = ln.split(",")
        if len(parts) != 6:
            raise DataError(f"{path}:{i}: expected 6 columns")
        aid, mode, conf, step, x, y = parts
        mode, step = int(mode), int(step)
        modes = acc.setdefault(aid, {})
        slot = modes.setdefault(mode, {"conf": float(conf), "pts": {}})
        slot["pts"][step] = (float(x), float(y))
    out = {}
    for aid, modes in acc.items():
        traj, conf = [], []
        for mode in sorted(modes):
            pts = modes[mode]["pts"]
            if sorted(pts) != list(range(80)):
                raise DataError(
                    f"{path}: agent {aid} mode {mode} must have steps 0..79")
            traj.append([pts[s] for s in range(80)])
            conf.append(modes[mode]["conf"])
        try:
            out[aid] = PredictionSet(aid, np.asarray(traj), np.asarray(conf))
        except ValueError as exc:
            raise DataError(f"{path}: agent {aid}: {exc}") from None
    return out


def _analyze_scenario(bundle, model_names, cfg: RunConfig, static_set):
    scenario, entries = bundle
    graph = build_graph(scenario.vector_map, cfg.graph)
    records, cov_rows, skipped = [], [], 0
    for track, assoc, preds in entries:
        reach_set = reach(graph, assoc, cfg.graph)
        deviation = gt_deviation(track, reach_set, cfg.deviation_mode)
        endpoint = agent_frame_endpoint(track)
        dyn = dynamic_intents(reach_set, track, cfg.kmeans)
        mixed = mixed_intents(dyn, static_set, cfg.mix, cfg.kmeans)
        for kind, pts in (("static", static_set), ("dynamic", dyn),
                          ("mixed", mixed)):
            cov_rows.append((track.agent_id, kind,
                             _f6(coverage_of(pts, endpoint))))
        if preds is None or any(m not in preds for m in model_names):
            skipped += 1
            continue
        records.append(DeviationRecord(
            track.agent_id, deviation,
            {m: min_fde(preds[m], track, 8) for m in model_names},
            detect_parked(track)))
    return records, cov_rows, skipped


def cmd_analyze(args) -> int:
    cfg = _resolve_config(args)
    scenarios = _load_scenarios(args.scenarios)
    if not args.predictions:
        raise UsageError("at least one --predictions NAME=PATH is required")
    by_model = {}
    for spec in args.predictions:
        if "=" not in spec:
            raise UsageError("--predictions expects NAME=PATH")
        name, path = spec.split("=", 1)
        if name in by_model:
            raise UsageError(f"duplicate prediction model name {name!r}")
        by_model[name] = _load_prediction_csv(path)
    model_names = sorted(by_model)
    merged: dict[str, dict[str, PredictionSet]] = {}
    for name, preds in by_model.items():
        for aid, ps in preds.items():
            merged.setdefault(aid, {})[name] = ps

    items, report = filter_dataset(scenarios, merged, cfg.assoc)
    try:
        static_set = pooled_static(scenarios, "vehicle", cfg.kmeans)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    by_scenario: dict[str, tuple] = {}
    for item in items:
        by_scenario.setdefault(item.scenario.scenario_id,
                               (item.scenario, []))[1].append(
            (item.track, item.association, item.prediction))
    bundles = [by_scenario[sid] for sid in sorted(by_scenario)]
    worker = partial(_analyze_scenario, model_names=model_names, cfg=cfg,
                     static_set=static_set)
    results = _pmap(worker, bundles, args.jobs)

    records = [r for recs, _, _ in results for r in recs]
    cov_rows = sorted((c for _, covs, _ in results for c in covs),
                      key=lambda c: (c[0], c[1]))
    skipped = sum(s for _, _, s in results)
    if skipped:
        print(f"warning: skipped {skipped} agent(s) lacking predictions "
              f"for every model", file=sys.stderr)
    try:
        models, rows = deviation_curve(records, cfg.window, cfg.exclude_parked)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "deviation_curve.csv",
               ("rank", "deviation_m", *(f"minfde_{m}" for m in models)),
               [(str(rank), _f6(dev), *map(_f6, fdes))
                for rank, dev, *fdes in rows])
    _write_csv(out_dir / "filter_report.csv",
               ("total", "excluded_non_vehicle", "excluded_no_dynamic",
                "excluded_invalid_gt", "remaining",
                "skipped_missing_prediction"),
               [tuple(map(str, (report.total, report.excluded_non_vehicle,
                                report.excluded_no_dynamic,
                                report.excluded_invalid_gt, report.remaining,
                                skipped)))])
    _write_csv(out_dir / "coverage.csv",
               ("agent_id", "kind", "coverage_m"), cov_rows)
    return 0


# -- dump-roadgraph ----------------------------------------------------------

def cmd_dump_roadgraph(args) -> int:
    cfg = _resolve_config(args)
    scenarios = _load_scenarios(args.scenarios)
    rows = []
    for scenario in scenarios:
        graph = build_graph(scenario.vector_map, cfg.graph)
        for agent_id in scenario.tracks_to_predict:
            track = scenario.track(agent_id)
            if track.object_class != "vehicle":
                continue
            assoc = associate(scenario.vector_map, track, cfg.assoc)
            if assoc.fallback:
                print(f"note: {agent_id} has no lane association; skipped",
                      file=sys.stderr)
                continue
            reach_set = reach(graph, assoc, cfg.graph)
            rows.extend(
                (scenario.scenario_id, agent_id, _f6(p[0]), _f6(p[1]), _f6(t))
                for _, _, p, t in reach_set.entries())
    rows.sort(key=lambda r: (r[0], r[1], float(r[4]), float(r[2]), float(r[3])))
    _write_csv(args.out, ("scenario_id", "agent_id", "x", "y", "arrival_s"),
               rows)
    return 0


# -- parser ------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser, analysis: bool = False):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--heading-threshold", dest="heading_threshold", type=float)
    p.add_argument("--proximity-limit", dest="proximity_limit", type=float)
    p.add_argument("--backwards-look", dest="backwards_look", type=float)
    p.add_argument("--time-budget", dest="time_budget", type=float)
    p.add_argument("--speed-offset", dest="speed_offset", type=float)
    p.add_argument("--dynamic-weight", dest="dynamic_weight", type=float)
    p.add_argument("--static-weight", dest="static_weight", type=float)
    p.add_argument("--jobs", type=int, default=1)
    if analysis:
        p.add_argument("--window", type=int)
        p.add_argument("--deviation-mode", dest="deviation_mode",
                       choices=("node", "polyline"))
        p.add_argument("--exclude-parked", dest="exclude_parked",
                       action="store_const", const=True, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intentforge",
        description="Scene-conditioned, statistical, and hybrid trajectory "
                    "intention points over vectorized lane maps")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate synthetic scenario files")
    p_gen.add_argument("--template", choices=TEMPLATES)
    p_gen.add_argument("--behavior", choices=BEHAVIORS, default="follow_lane")
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--speed-limit", dest="speed_limit", type=float,
                       default=13.4112)
    p_gen.add_argument("--suite", type=int,
                       help="generate N randomized scenarios instead")
    p_gen.add_argument("-o", "--out", required=True, help="output directory")
    p_gen.set_defaults(func=cmd_gen)

    p_int = sub.add_parser("intents", help="emit intention point CSV")
    p_int.add_argument("scenarios", nargs="+",
                       help="scenario files or directories")
    p_int.add_argument("--kind", choices=("static", "dynamic", "mixed"),
                       required=True)
    p_int.add_argument("--endpoints",
                       help="CSV (class,x,y) of endpoints for static points")
    p_int.add_argument("--dump-roadgraph", dest="dump_roadgraph",
                       help="also dump reachability sets to this CSV")
    p_int.add_argument("-o", "--out", required=True, help="output CSV")
    _add_config_flags(p_int)
    p_int.set_defaults(func=cmd_intents)

    p_an = sub.add_parser("analyze",
                          help="deviation / minFDE / coverage analysis")
    p_an.add_argument("scenarios", nargs="+")
    p_an.add_argument("--predictions", action="append", default=[],
                      metavar="NAME=PATH")
    p_an.add_argument("-o", "--out", required=True, help="output directory")
    _add_config_flags(p_an, analysis=True)
    p_an.set_defaults(func=cmd_analyze)

    p_dump = sub.add_parser("dump-roadgraph",
                            help="dump reachability sets as CSV")
    p_dump.add_argument("scenarios", nargs="+")
    p_dump.add_argument("-o", "--out", required=True, help="output CSV")
    _add_config_flags(p_dump)
    p_dump.set_defaults(func=cmd_dump_roadgraph)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
