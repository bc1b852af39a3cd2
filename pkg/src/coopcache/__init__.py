"""Cache-network simulation and optimal placement under (K, r) cooperation policies."""

__version__ = "0.1.0"

from .exceptions import (ConfigurationError, CoopCacheError, InstanceTooLarge, MetricError,
                         ParameterError, ParseError, ValidationError)
from .topology import (PathTable, Topology, assign_roles, betweenness_centrality,
                       generate_scale_free, load_edge_list, reachable_set, route_to_cp,
                       searchable_set, shortest_paths)
from .workload import Catalog, RequestStream, build_catalog, sample_requests, zipf_popularity
from .policy import (CooperationPolicy, PolicyType, classify, init_overhead, overhead_report,
                     per_change_overhead)
from .optimizer import (Instance, Placement, brute_force_oracle, cost_matrix, serve_request,
                        solve_placement, validate_placement)
from .simulator import SimulationConfig, Trace, run_simulation, snapshot_placement
from .metrics import (MetricsReport, ParetoPoint, byte_hit_rate, coupling_factor,
                      footprint_reduction, pareto_front, pearson, popularity_per_bit)
from .experiment import (SweepConfig, SweepResult, corner_points, run_sweep, tertile_shares,
                         write_sweep)
