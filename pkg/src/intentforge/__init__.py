"""Scene-conditioned, statistical, and hybrid trajectory intention points
over vectorized lane maps, plus map-conformance analysis tooling."""

from .analysis import (DeviationRecord, FilterReport, PredictionSet, coverage,
                       detect_parked, deviation_curve, filter_dataset,
                       gt_deviation, min_ade, min_fde, miss_rate,
                       moving_average)
from .intention import (IntentionPointSet, KMeansConfig, MixConfig,
                        dynamic_intents, from_agent_frame, mixed_intents,
                        static_intents, to_agent_frame, weighted_kmeans)
from .lane_assoc import (AssocConfig, AssociationResult, associate,
                         derive_heading, lane_heading_at)
from .map_model import (AgentState, AgentTrack, InvariantViolation,
                        LaneNeighbor, LaneSegment, MalformedScenario,
                        Scenario, ScenarioError, SchemaViolation, VectorMap,
                        nearest_lane_nodes, parse_scenario,
                        point_to_polyline_distance, write_scenario)
from .road_graph import (GraphConfig, ReachabilitySet, RoadGraph, build_graph,
                         reach, travel_time)
from .scenario_gen import GenSpec, generate, generate_suite

__version__ = "0.1.0"
