"""Request-driven cache network simulation under optimal placement."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, ParameterError, ValidationError
from .optimizer import CacheState, Placement, cost_matrix, validate_placement
from .policy import CooperationPolicy
from .topology import reachable_set, route_to_cp, shortest_paths

__all__ = [
    "SimulationConfig",
    "Trace",
    "run_simulation",
    "snapshot_placement",
    "snapshot_points",
    "replay",
    "default_warmup",
]


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of one simulation run.

    ``warmup=None`` selects four times the network-wide number of cache
    slots, capped at half the run. ``validate_every=1`` checks placement
    validity after every request; ``0`` disables the checks.
    """

    capacities: object
    policy: CooperationPolicy
    warmup: int | None = None
    total_requests: int | None = None
    budget: int = 100_000
    seed: int | None = None
    n_snapshots: int = 10
    validate_every: int = 1000
    estimate_popularity: bool = False


def default_warmup(capacities, n_routers, sizes, total):
    caps = np.broadcast_to(np.asarray(capacities), (n_routers,))
    slots = int(caps.sum() // max(1, int(round(float(np.mean(sizes))))))
    return min(4 * slots, total // 2)


def snapshot_points(total, warmup, n_snapshots):
    """Request counts after which the placement is recorded.

    Always includes 0 and ``total``; the rest are spread evenly over the
    post-warm-up part of the run.
    """
    pts = {0, total}
    span = total - warmup
    for t in range(1, n_snapshots + 1):
        pts.add(warmup + (span * t) // n_snapshots)
    return sorted(pts)


@dataclass
class Trace:
    """Per-request records of a run plus placement snapshots.

    Column arrays are indexed by request step. ``changes[t]`` holds the
    ``(admissions, evictions)`` lists applied after request ``t``.
    """

    client: np.ndarray
    item: np.ndarray
    size: np.ndarray
    hit: np.ndarray
    hops: np.ndarray
    h_max: np.ndarray
    admissions: np.ndarray
    evictions: np.ndarray
    msgs: np.ndarray
    status: list
    changes: list
    snapshots: dict
    warmup: int
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.item.size)

    @property
    def window(self):
        return slice(self.warmup, len(self))

    def post_warmup_snapshots(self):
        return [self.snapshots[t] for t in sorted(self.snapshots) if t > self.warmup]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "client", "item", "size", "hit", "hops", "h_max",
                    "admissions", "evictions", "msgs"])
        cols = [self.client, self.item, self.size, self.hit.astype(int), self.hops,
                self.h_max, self.admissions, self.evictions, self.msgs]
        for t, row in enumerate(zip(*(c.tolist() for c in cols))):
            w.writerow([t, *row])
        return buf.getvalue()


def snapshot_to_json(placement):
    """Placement document: cached item ids per router."""
    return json.dumps({"n_items": placement.n_items,
                       "caches": [placement.cached(k) for k in range(placement.n_routers)]})


def snapshot_from_json(text):
    doc = json.loads(text)
    return Placement.from_caches(doc["n_items"], doc["caches"])


def snapshot_placement(trace, at):
    """Placement right after request number ``at`` (0 means before any)."""
    try:
        return trace.snapshots[at]
    except KeyError:
        raise LookupError(f"no snapshot recorded after request {at}") from None


def replay(trace, n_items, n_routers, upto=None):
    """Rebuild a placement by applying the recorded changes from empty caches."""
    x = Placement.empty(n_items, n_routers).x
    for adm, ev in trace.changes[:upto]:
        for i, k in ev:
            x[i, k] = False
        for i, k in adm:
            x[i, k] = True
    return Placement(x)


def run_simulation(g, stream, cfg, catalog, popularity, paths=None):
    """Serve a request stream, re-optimizing caches after every request.

    Caches start empty. Each request is served from the closest reachable
    copy (or the CP), then the optimal admission/eviction plan over the
    delivery path is applied.

    Parameters
    ----------
    g : Topology
        Topology with roles assigned.
    stream : RequestStream
    cfg : SimulationConfig
    catalog : Catalog
    popularity : array-like
        Popularity known to the placement optimizer.
    paths : PathTable, optional
        Precomputed path table of ``g``.

    Returns
    -------
    Trace
    """
    if not g.has_cp:
        raise ConfigurationError("topology has no content provider")
    total = len(stream) if cfg.total_requests is None else cfg.total_requests
    if total > len(stream):
        raise ParameterError("stream shorter than total_requests")
    stream = stream.head(total)
    clients = set(int(c) for c in np.unique(stream.clients))
    if not clients <= set(g.client_nodes):
        raise ConfigurationError("stream uses routers that have no clients")
    m, n_items = g.n_routers, catalog.n_items
    caps = np.broadcast_to(np.asarray(cfg.capacities, dtype=np.int64), (m,))
    if np.any(caps < 0):
        raise ParameterError("capacities must be non-negative")
    warmup = cfg.warmup
    if warmup is None:
        warmup = default_warmup(caps, m, catalog.sizes, total)
    if total and not 0 <= warmup < total:
        raise ParameterError("warm-up must be shorter than the run")

    paths = paths if paths is not None else shortest_paths(g)
    policy = cfg.policy
    costs = cost_matrix(g, paths, policy.radius, rows=g.client_nodes)
    sizes = catalog.sizes
    p = np.asarray(popularity, dtype=float)
    if cfg.estimate_popularity:
        counts = np.zeros(n_items, dtype=np.int64)
        weights = np.zeros(n_items)
    else:
        weights = sizes * p
    state = CacheState(Placement.empty(n_items, m), sizes, weights, caps, costs)

    reach = {j: reachable_set(g, j, policy.radius, paths) for j in clients}
    dist = {j: paths.dist[j].tolist() for j in clients}
    h_max = {j: int(paths.dist[j, g.cp_node]) for j in clients}
    route = {j: tuple(route_to_cp(g, paths, j)) for j in clients}
    ball = ((paths.dist[:m, :m] <= policy.radius).sum(axis=1) - 1).tolist()
    path_cache = {}

    cols = {name: np.zeros(total, dtype=np.int64)
            for name in ("hops", "h_max", "admissions", "evictions", "msgs")}
    hit = np.zeros(total, dtype=bool)
    status, changes = [], []
    points = set(snapshot_points(total, warmup, cfg.n_snapshots))
    snapshots = {0: state.placement()} if 0 in points else {}
    k_max, budget = policy.k_max, cfg.budget
    sizes_l = sizes.tolist()

    for t, (j, u) in enumerate(zip(stream.clients.tolist(), stream.items.tolist())):
        node, hops = state.serve(j, u, reach[j], dist[j], h_max[j])
        if node is None:
            S = route[j]
        else:
            S = path_cache.get((j, node))
            if S is None:
                S = path_cache[(j, node)] = tuple(paths.path(j, node))
        hit[t] = node is not None
        cols["hops"][t] = hops
        cols["h_max"][t] = h_max[j]
        if cfg.estimate_popularity:
            counts[u] += 1
            state.set_weight(u, sizes_l[u] * counts[u])
        holders = state.holders[u]
        if all(k in holders for k in S):
            adm, ev, st = [], [], "exact"
        else:
            adm, ev, _, st, _ = state.solve(u, S, k_max, budget)
        if adm or ev:
            state.apply(adm, ev)
            touched = {k for _, k in adm} | {k for _, k in ev}
            cols["msgs"][t] = sum(ball[k] for k in touched)
        cols["admissions"][t] = len(adm)
        cols["evictions"][t] = len(ev)
        status.append(st)
        changes.append((adm, ev))
        if t + 1 in points:
            snapshots[t + 1] = state.placement()
        if cfg.validate_every and (t + 1) % cfg.validate_every == 0:
            bad = validate_placement(state.placement(), policy, catalog, caps)
            if bad:
                raise ValidationError(f"invalid placement after request {t}: {bad[:3]}")

    return Trace(
        client=stream.clients.copy(), item=stream.items.copy(), size=sizes[stream.items],
        hit=hit, status=status, changes=changes, snapshots=snapshots, warmup=warmup,
        meta={"K": policy.k_max, "r": policy.radius}, **cols)
