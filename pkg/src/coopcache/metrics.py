"""Byte hit rate, footprint reduction, coupling factor and Pareto fronts."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import MetricError, ParameterError

__all__ = [
    "MetricsReport",
    "ParetoPoint",
    "byte_hit_rate",
    "footprint_reduction",
    "popularity_per_bit",
    "pearson",
    "coupling_factor",
    "pareto_front",
]


@dataclass
class MetricsReport:
    K: int
    r: int
    bhr: float
    fpr: float
    cpf: float
    reps: int = 1
    se_bhr: float = 0.0
    se_fpr: float = 0.0
    se_cpf: float = 0.0
    request_count: int = 0
    overheads: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class ParetoPoint:
    K: int
    r: int
    bhr: float
    fpr: float
    cpf: float = 0.0
    reps: int = 1
    se_bhr: float = 0.0
    se_fpr: float = 0.0
    se_cpf: float = 0.0

    def __post_init__(self):
        if self.reps < 1:
            raise ParameterError("a Pareto point needs at least one repetition")


def _window(trace, window):
    w = trace.window if window is None else window
    size = np.asarray(trace.size[w], dtype=float)
    if size.size == 0:
        raise MetricError("empty measurement window")
    return w, size


def byte_hit_rate(trace, window=None):
    """Fraction of requested bytes served by in-network caches.

    ``window`` defaults to the post-warm-up records of ``trace``.
    """
    w, size = _window(trace, window)
    return float(np.dot(size, trace.hit[w]) / size.sum())


def footprint_reduction(trace, window=None):
    """One minus the byte-hop volume relative to fetching everything from the CP.

    Byte-hops are aggregated per client router before summing, matching a
    grouping of requests by the router they arrive at.
    """
    w, size = _window(trace, window)
    clients = np.asarray(trace.client[w])
    hops = np.asarray(trace.hops[w], dtype=float)
    h_max = np.asarray(trace.h_max[w], dtype=float)
    if np.any(h_max < 1):
        raise MetricError("every client must be at least one hop from the CP")
    num = den = 0.0
    for j in np.unique(clients):
        sel = clients == j
        num += float(np.dot(size[sel], hops[sel]))
        den += float(h_max[sel][0] * size[sel].sum())
    return 1.0 - num / den


def popularity_per_bit(X, p, sizes, j):
    """Summed popularity of router ``j``'s items over their summed size (0 if empty)."""
    mask = X.x[:, j]
    total = float(np.sum(np.asarray(sizes)[mask]))
    if total == 0:
        return 0.0
    return float(np.sum(np.asarray(p)[mask]) / total)


def pearson(x, y):
    """Sample Pearson correlation; 0 when either input has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("pearson needs two 1-D vectors of equal length")
    if x.size < 2:
        raise ParameterError("pearson needs at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    return float(np.clip(np.dot(dx, dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def coupling_factor(snapshots, centrality, p, sizes, empty="skip"):
    """Correlation between router centrality and cached popularity per bit.

    Parameters
    ----------
    snapshots : list of Placement
    centrality : array-like
        Betweenness of every router.
    p, sizes : array-like
        Item popularity and size.
    empty : {"skip", "zero"}
        ``"skip"`` averages a router's popularity per bit only over the
        snapshots where its cache holds something and leaves out routers
        that never cache anything. ``"zero"`` scores every empty cache as 0
        and correlates over all routers.

    Returns
    -------
    float
        Pearson coefficient, 0 when fewer than two routers qualify.
    """
    if not snapshots:
        raise MetricError("coupling factor needs at least one snapshot")
    if empty not in ("skip", "zero"):
        raise ParameterError(f"unknown empty-cache rule {empty!r}")
    c_b = np.asarray(centrality, dtype=float)
    m = snapshots[0].n_routers
    if m < 2:
        raise MetricError("coupling factor needs at least two routers")
    sizes = np.asarray(sizes, dtype=float)
    p = np.asarray(p, dtype=float)
    ppb = np.zeros(m)
    seen = np.zeros(m)
    for X in snapshots:
        held = X.x[:, :m]
        mass = sizes @ held
        pop = p @ held
        ppb += np.divide(pop, mass, out=np.zeros(m), where=mass > 0)
        seen += mass > 0
    if empty == "zero":
        return pearson(c_b, ppb / len(snapshots))
    used = seen > 0
    if used.sum() < 2:
        return 0.0
    return pearson(c_b[used], ppb[used] / seen[used])


def pareto_front(points):
    """Points not dominated in (bhr, fpr) when maximizing both, sorted by (K, r)."""
    pts = sorted(points, key=lambda q: (q.K, q.r))
    front = []
    for q in pts:
        dominated = any(
            o.bhr >= q.bhr and o.fpr >= q.fpr and (o.bhr > q.bhr or o.fpr > q.fpr)
            for o in pts)
        if not dominated:
            front.append(q)
    return front
