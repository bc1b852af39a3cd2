"""(K, r) cooperation policies, their taxonomy and signalling overheads."""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ParameterError
from .topology import searchable_set, shortest_paths

__all__ = [
    "CooperationPolicy",
    "PolicyType",
    "OverheadReport",
    "classify",
    "init_overhead",
    "per_change_overhead",
    "overhead_report",
]


@dataclass(frozen=True)
class CooperationPolicy:
    """At most ``k_max`` replicas per item network-wide; search ``radius`` hops."""

    k_max: int
    radius: int

    def __post_init__(self):
        if self.k_max < 1:
            raise ParameterError(f"K must be >= 1, got {self.k_max}")
        if self.radius < 0:
            raise ParameterError(f"r must be >= 0, got {self.radius}")


class PolicyType(enum.Enum):
    TYPE_I = "I"      # small r, small K: weak cooperation
    TYPE_II = "II"    # small r, large K: en-route caching
    TYPE_III = "III"  # large r, small K: storage acts as one cache
    TYPE_IV = "IV"    # large r, large K: strong cooperation


@dataclass(frozen=True)
class OverheadReport:
    init_messages: int
    init_item_announcements: int
    per_change_messages: int
    computation_per_request: int

    def to_dict(self):
        return asdict(self)


def classify(policy, g=None, r_threshold=1, k_threshold=2):
    """Map a policy onto the four cooperation types.

    ``r <= r_threshold`` counts as a small radius and ``K <= k_threshold`` as
    a small replica budget. The topology argument is accepted for API
    symmetry and does not influence the result.
    """
    if r_threshold < 0 or k_threshold < 0:
        raise ParameterError("thresholds must be non-negative")
    small_r = policy.radius <= r_threshold
    small_k = policy.k_max <= k_threshold
    if small_r:
        return PolicyType.TYPE_I if small_k else PolicyType.TYPE_II
    return PolicyType.TYPE_III if small_k else PolicyType.TYPE_IV


def _ball_sizes(g, radius, paths):
    paths = paths if paths is not None else shortest_paths(g)
    d = paths.dist[:g.n_routers, :g.n_routers]
    return (d <= radius).sum(axis=1)


def init_overhead(g, policy, capacities, paths=None):
    """Exact message counts of the initial content exchange.

    Every router sends one message to each other router of its searchable
    set and announces each of its ``C_j`` stored items to each of them.

    Returns
    -------
    (int, int)
        ``(init_messages, init_item_announcements)``.
    """
    caps = np.broadcast_to(np.asarray(capacities, dtype=np.int64), (g.n_routers,))
    if np.any(caps < 0):
        raise ParameterError("capacities must be non-negative")
    peers = _ball_sizes(g, policy.radius, paths) - 1
    return int(peers.sum()), int((caps * peers).sum())


def per_change_overhead(g, policy, j, paths=None):
    """Messages a router sends to its r-hop neighbours after a cache change."""
    return len(searchable_set(g, j, policy.radius, paths)) - 1


def overhead_report(g, policy, capacities, paths=None):
    """Worst-case overheads over all routers, as exact counts."""
    msgs, items = init_overhead(g, policy, capacities, paths)
    sizes = _ball_sizes(g, policy.radius, paths)
    return OverheadReport(
        init_messages=msgs,
        init_item_announcements=items,
        per_change_messages=int(sizes.max() - 1),
        computation_per_request=int(sizes.max()),
    )
