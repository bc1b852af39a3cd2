"""Optimal per-request placement under a (K, r) cooperation policy.

After a request for item ``u`` at edge router ``j`` is served, the routers
on the delivery path (the *decision set*) may admit ``u`` and evict items to
make room for it. All other caches stay untouched. Among the feasible
outcomes the solver picks the one minimizing the expected serving cost

    sum_i s_i p_i sum_j min_{k holds i} c[j, k]

where ``j`` ranges over the cost-matrix rows (edge routers), ``k`` over the
holders of ``i`` that ``j`` can reach plus the content provider, and
``c[j, k]`` is the hop distance.

The search is a best-first branch and bound. It first branches on the final
set of holders of ``u`` inside the decision set, then on the eviction sets of
the routers that need room. Bounds use per-copy eviction costs: removing
several copies of one item never costs less than the sum of removing each
copy alone, so the sum of per-copy costs is a valid lower bound.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InstanceTooLarge, ParameterError
from .policy import CooperationPolicy
from .topology import (Topology, assign_roles, reachable_set, route_to_cp,
                       shortest_paths, topology_from_json, topology_to_json)
from .workload import Catalog

__all__ = [
    "Placement",
    "CostMatrix",
    "ServeOutcome",
    "PlacementDecision",
    "Violation",
    "CacheState",
    "Instance",
    "OracleResult",
    "cost_matrix",
    "serve_request",
    "solve_placement",
    "validate_placement",
    "placement_objective",
    "brute_force_oracle",
    "random_instance",
    "dump_instance",
    "load_instance",
]

EXACT = "exact"
HEURISTIC = "heuristic"
TIMEOUT = "timeout"

_EPS = 1e-12
_ADMIT, _EVICT = 0, 1


class Placement:
    """Binary content distribution ``x[i, k]``; the last column is the CP."""

    def __init__(self, x):
        x = np.asarray(x, dtype=bool)
        if x.ndim != 2 or x.shape[1] < 2:
            raise ParameterError("placement must be an N x (M+1) matrix")
        self.x = x

    @classmethod
    def empty(cls, n_items, n_routers):
        x = np.zeros((n_items, n_routers + 1), dtype=bool)
        x[:, -1] = True
        return cls(x)

    @classmethod
    def from_caches(cls, n_items, caches):
        """Build from one iterable of item ids per router."""
        p = cls.empty(n_items, len(caches))
        for k, items in enumerate(caches):
            p.x[list(items), k] = True
        return p

    @property
    def n_items(self):
        return self.x.shape[0]

    @property
    def n_routers(self):
        return self.x.shape[1] - 1

    def cached(self, k):
        return [int(i) for i in np.flatnonzero(self.x[:, k])]

    def holders(self, i):
        return [int(k) for k in np.flatnonzero(self.x[i, :-1])]

    def copy(self):
        return Placement(self.x.copy())

    def __eq__(self, other):
        return isinstance(other, Placement) and np.array_equal(self.x, other.x)

    def __repr__(self):
        return f"Placement(items={self.n_items}, routers={self.n_routers}, copies={int(self.x[:, :-1].sum())})"


@dataclass(frozen=True)
class CostMatrix:
    """Per-byte retrieval cost ``c[row, k]`` for each row router ``rows[row]``.

    Unreachable routers carry ``inf``; column ``cp`` is the content provider.
    """

    rows: tuple
    c: np.ndarray
    cp: int


@dataclass(frozen=True)
class ServeOutcome:
    hit: bool
    serving_node: int
    hops: int
    h_max: int
    path_hit_node: int
    decision_set: tuple


@dataclass
class PlacementDecision:
    placement: Placement
    admissions: list
    evictions: list
    objective_value: float
    solver_status: str
    nodes: int = 0


@dataclass(frozen=True)
class Violation:
    constraint: str
    indices: tuple


def cost_matrix(g, paths, radius, rows=None):
    """Hop-distance costs restricted to each row router's reachable set.

    Parameters
    ----------
    rows : sequence of int, optional
        Routers that receive requests. Defaults to ``g.edge_routers``.
    """
    rows = tuple(g.edge_routers if rows is None else rows)
    cp = g.cp_node
    c = np.full((len(rows), g.n_routers + 1), np.inf)
    for idx, j in enumerate(rows):
        reach = sorted(reachable_set(g, j, radius, paths))
        c[idx, reach] = paths.dist[j, reach]
        c[idx, cp] = paths.dist[j, cp]
    c.setflags(write=False)
    return CostMatrix(rows=rows, c=c, cp=cp)


def _serve(holders_u, reach, dist_j, h_max):
    best = None
    for k in holders_u:
        if k in reach:
            key = (dist_j[k], k)
            if best is None or key < best:
                best = key
    # the CP competes with in-network copies; on equal distance the copy wins
    if best is not None and best[0] <= h_max:
        return best[1], int(best[0])
    return None, h_max


def serve_request(X, g, paths, policy, j, item):
    """Serve one request from the closest reachable copy, else from the CP."""
    reach = reachable_set(g, j, policy.radius, paths)
    h_max = int(paths.dist[j, g.cp_node])
    node, hops = _serve(X.holders(item), reach, paths.dist[j], h_max)
    if node is None:
        return ServeOutcome(False, g.cp_node, h_max, h_max, g.cp_node,
                            tuple(route_to_cp(g, paths, j)))
    return ServeOutcome(True, node, hops, h_max, node, tuple(paths.path(j, node)))


def validate_placement(X, policy, catalog, capacities):
    """List every violated placement invariant (empty when valid)."""
    out = []
    x = X.x
    m = X.n_routers
    caps = np.broadcast_to(np.asarray(capacities), (m,))
    used = catalog.sizes @ x[:, :m]
    for k in np.flatnonzero(used > caps):
        out.append(Violation("capacity", (int(k),)))
    copies = x[:, :m].sum(axis=1)
    for i in np.flatnonzero(copies > policy.k_max):
        out.append(Violation("max_replicas", (int(i),)))
    for i in np.flatnonzero(~x[:, m]):
        out.append(Violation("availability", (int(i),)))
    return out


def placement_objective(X, costs, weights):
    """Expected serving cost of a full placement, evaluated from scratch."""
    x = X.x
    total = 0.0
    for row in costs.c:
        best = np.where(x, row[None, :], np.inf).min(axis=1)
        total += float(np.dot(weights, best))
    return total


class CacheState:
    """Mutable placement with the bookkeeping needed by the solver.

    Keeps per-router contents, per-item holders, the expected serving cost of
    every item and the cost of evicting each stored copy. Only items whose
    holders change are recomputed after a decision.
    """

    def __init__(self, placement, sizes, weights, capacities, costs):
        x = placement.x
        self.n_items, self.n_routers = x.shape[0], x.shape[1] - 1
        self.sizes = [int(s) for s in sizes]
        self.w = [float(v) for v in weights]
        self.cap = [int(c) for c in np.broadcast_to(np.asarray(capacities), (self.n_routers,))]
        self.costs = costs
        self._rows = [row.tolist() for row in costs.c]
        self._rows_cp = [row[costs.cp] for row in self._rows]
        self.cache = [set(int(i) for i in np.flatnonzero(x[:, k])) for k in range(self.n_routers)]
        self.holders = [set() for _ in range(self.n_items)]
        for k, items in enumerate(self.cache):
            for i in items:
                self.holders[i].add(k)
        self.used = [sum(self.sizes[i] for i in items) for items in self.cache]
        self.item_cost = [0.0] * self.n_items
        self.evict_cost = [dict() for _ in range(self.n_routers)]
        for i in range(self.n_items):
            self._refresh(i)

    def cost_of(self, i, hs):
        total = 0.0
        for row, cp in zip(self._rows, self._rows_cp):
            best = cp
            for k in hs:
                v = row[k]
                if v < best:
                    best = v
            total += best
        return self.w[i] * total

    def _refresh(self, i):
        hs = self.holders[i]
        base = self.cost_of(i, hs)
        self.item_cost[i] = base
        for k in hs:
            self.evict_cost[k][i] = self.cost_of(i, hs - {k}) - base

    def set_weight(self, i, w):
        self.w[i] = float(w)
        self._refresh(i)

    def objective(self):
        return math.fsum(self.item_cost)

    def placement(self):
        p = Placement.empty(self.n_items, self.n_routers)
        for k, items in enumerate(self.cache):
            if items:
                p.x[list(items), k] = True
        return p

    def apply(self, admissions, evictions):
        touched = set()
        for i, k in evictions:
            self.cache[k].discard(i)
            self.holders[i].discard(k)
            self.used[k] -= self.sizes[i]
            self.evict_cost[k].pop(i, None)
            touched.add(i)
        for i, k in admissions:
            self.cache[k].add(i)
            self.holders[i].add(k)
            self.used[k] += self.sizes[i]
            touched.add(i)
        for i in touched:
            self._refresh(i)

    def _eviction_options(self, k, need, limit):
        """Minimal eviction sets at router ``k`` freeing ``need`` bytes,
        sorted by summed per-copy cost. Returns ``(options, truncated)``."""
        ev = self.evict_cost[k]
        sizes = self.sizes
        items = sorted(self.cache[k])
        if all(sizes[i] >= need for i in items):
            return sorted((ev[i], (i,)) for i in items), False
        items.sort(key=lambda i: (-sizes[i], i))
        out = []
        truncated = False

        def grow(start, chosen, freed):
            nonlocal truncated
            if truncated:
                return
            if freed >= need:
                # minimal iff dropping the smallest chosen item falls short
                if freed - sizes[chosen[-1]] < need:
                    out.append((sum(ev[i] for i in chosen), tuple(sorted(chosen))))
                    if len(out) >= limit:
                        truncated = True
                return
            for pos in range(start, len(items)):
                i = items[pos]
                chosen.append(i)
                grow(pos + 1, chosen, freed + sizes[i])
                chosen.pop()

        grow(0, [], 0)
        out.sort()
        return out, truncated

    def serve(self, j, item, reach, dist_j, h_max):
        return _serve(self.holders[item], reach, dist_j, h_max)

    def solve(self, u, decision_set, k_max, budget=100_000):
        """Best admission/eviction plan for item ``u`` over ``decision_set``.

        Returns ``(admissions, evictions, delta, status, nodes)`` where
        ``delta`` is the change of the objective (never positive).
        """
        S = list(decision_set)
        hold_u = self.holders[u]
        in_s = set(S)
        outside = [k for k in hold_u if k not in in_s]
        u0 = [k for k in S if k in hold_u]
        free_slots = k_max - len(outside)
        su = self.sizes[u]
        w_u = self.w[u]
        base_u = self.item_cost[u]

        # per-row cost of u from copies outside the decision set
        base_rows = []
        for row, cp in zip(self._rows, self._rows_cp):
            b = cp
            for k in outside:
                if row[k] < b:
                    b = row[k]
            base_rows.append(b)

        hostable = []
        need = {}
        for k in S:
            if k in hold_u:
                hostable.append(k)
            elif su <= self.cap[k]:
                hostable.append(k)
                need[k] = self.used[k] + su - self.cap[k]
        n = len(hostable)
        col = [[row[k] for k in hostable] for row in self._rows]

        # minimum per-row cost for every subset of hostable routers
        row_min = [list(base_rows)]
        for mask in range(1, 1 << n):
            low = (mask & -mask).bit_length() - 1
            prev = row_min[mask & (mask - 1)]
            row_min.append([v if v < c[low] else c[low] for v, c in zip(prev, col)])

        opts_cache = {}
        truncated = False

        def options(k):
            nonlocal truncated
            if k not in opts_cache:
                opts, cut = self._eviction_options(k, need[k], budget)
                truncated = truncated or cut
                opts_cache[k] = opts
            return opts_cache[k]

        candidates = []
        for mask in range(1 << n):
            chosen = [hostable[b] for b in range(n) if mask >> b & 1]
            if len(chosen) > free_slots:
                continue
            admit = [k for k in chosen if k not in hold_u]
            drop = [k for k in u0 if k not in chosen]
            delta_u = w_u * sum(row_min[mask]) - base_u
            lb = delta_u
            for k in admit:
                if need[k] > 0:
                    opts = options(k)
                    if not opts:
                        lb = math.inf
                        break
                    lb += opts[0][0]
            if lb == math.inf:
                continue
            changes = [(u, k, _ADMIT) for k in admit] + [(u, k, _EVICT) for k in drop]
            candidates.append((round(lb, 12), len(admit), sorted(changes), delta_u, admit, drop))
        candidates.sort(key=lambda c: c[:3])

        best = (0.0, 0, ())  # the no-op plan is always feasible
        best_plan = ([], [])
        nodes = 0
        status = EXACT

        def consider(obj, nadm, key, plan):
            nonlocal best, best_plan
            if obj < best[0] - _EPS or (obj <= best[0] + _EPS and (nadm, key) < best[1:]):
                best = (obj, nadm, key)
                best_plan = plan

        for lb, nadm, changes, delta_u, admit, drop in candidates:
            if lb > best[0] + _EPS:
                break
            nodes += 1
            if nodes > budget:
                status = HEURISTIC
                break
            routers = [k for k in admit if need[k] > 0]
            if not routers:
                consider(delta_u, nadm, tuple(changes), ([(u, k) for k in admit], [(u, k) for k in drop]))
                continue
            opts = [options(k) for k in routers]

            def evictions_of(idx):
                return [(i, k) for k, o, t in zip(routers, opts, idx) for i in o[t][1]]

            def key_of(idx):
                return tuple(sorted(changes + [(i, k, _EVICT) for i, k in evictions_of(idx)]))

            start = (0,) * len(routers)
            heap = [(round(delta_u + sum(o[0][0] for o in opts), 12), key_of(start), start)]
            seen = {start}
            while heap:
                vlb, key, idx = heapq.heappop(heap)
                if vlb > best[0] + _EPS:
                    break
                nodes += 1
                if nodes > budget:
                    status = HEURISTIC
                    break
                evs = evictions_of(idx)
                obj = delta_u + self._eviction_delta(evs)
                consider(obj, nadm, key,
                         ([(u, k) for k in admit], [(u, k) for k in drop] + evs))
                for r in range(len(idx)):
                    if idx[r] + 1 < len(opts[r]):
                        nxt = idx[:r] + (idx[r] + 1,) + idx[r + 1:]
                        if nxt not in seen:
                            seen.add(nxt)
                            nlb = delta_u + sum(o[t][0] for o, t in zip(opts, nxt))
                            heapq.heappush(heap, (round(nlb, 12), key_of(nxt), nxt))
            if status != EXACT:
                break

        if truncated and status == EXACT:
            status = HEURISTIC
        admissions, evictions = best_plan
        return sorted(admissions), sorted(evictions), best[0], status, nodes

    def _eviction_delta(self, evictions):
        by_item = defaultdict(list)
        for i, k in evictions:
            by_item[i].append(k)
        total = 0.0
        for i, ks in by_item.items():
            if len(ks) == 1:
                total += self.evict_cost[ks[0]][i]
            else:
                total += self.cost_of(i, self.holders[i] - set(ks)) - self.item_cost[i]
        return total


def solve_placement(X, outcome, request, policy, costs, catalog, p, capacities,
                    budget=100_000):
    """Exact optimal admissions and evictions for one served request.

    Parameters
    ----------
    X : Placement
        Content distribution before the decision.
    outcome : ServeOutcome
        Result of :func:`serve_request`; provides the decision set.
    request : (int, int)
        ``(edge router, item)``.
    policy : CooperationPolicy
    costs : CostMatrix
    catalog : Catalog
    p : array-like
        Popularity of every item.
    capacities : int or array-like
        Cache size of every router in bytes.
    budget : int
        Search-node limit; when exhausted the best plan found so far is
        returned with status ``"heuristic"``.

    Returns
    -------
    PlacementDecision
    """
    _, u = request
    weights = catalog.sizes * np.asarray(p, dtype=float)
    state = CacheState(X, catalog.sizes, weights, capacities, costs)
    adm, ev, _, status, nodes = state.solve(u, outcome.decision_set, policy.k_max, budget)
    state.apply(adm, ev)
    return PlacementDecision(placement=state.placement(), admissions=adm, evictions=ev,
                             objective_value=state.objective(), solver_status=status,
                             nodes=nodes)


@dataclass
class Instance:
    """A self-contained single-request optimization problem."""

    topology: Topology
    capacities: tuple
    policy: CooperationPolicy
    catalog: Catalog
    popularity: np.ndarray
    placement: Placement
    request: tuple
    rows: tuple = field(default=())

    def __post_init__(self):
        if not self.rows:
            self.rows = tuple(self.topology.client_nodes)

    @property
    def weights(self):
        return self.catalog.sizes * np.asarray(self.popularity, dtype=float)

    def prepare(self):
        """Paths, costs and the serve outcome of the instance's request."""
        paths = shortest_paths(self.topology)
        costs = cost_matrix(self.topology, paths, self.policy.radius, self.rows)
        j, u = self.request
        outcome = serve_request(self.placement, self.topology, paths, self.policy, j, u)
        return paths, costs, outcome

    def solve(self, budget=100_000):
        _, costs, outcome = self.prepare()
        return solve_placement(self.placement, outcome, self.request, self.policy, costs,
                               self.catalog, self.popularity, self.capacities, budget)


@dataclass
class OracleResult:
    objective: float
    placements: list
    states: int


def brute_force_oracle(instance, limit=10**6):
    """Exhaustively enumerate every placement allowed for the request.

    Each router of the decision set may keep any subset of its current items
    plus the requested one that fits its capacity; everything else is fixed.
    Every combination satisfying the replica limit is scored from scratch.
    """
    _, costs, outcome = instance.prepare()
    X = instance.placement
    _, u = instance.request
    sizes = instance.catalog.sizes
    caps = np.broadcast_to(np.asarray(instance.capacities), (X.n_routers,))
    S = list(outcome.decision_set)
    choices = []
    for k in S:
        pool = sorted(set(X.cached(k)) | {u})
        subsets = [c for r in range(len(pool) + 1) for c in itertools.combinations(pool, r)
                   if sum(int(sizes[i]) for i in c) <= caps[k]]
        choices.append(subsets)
    total = math.prod(len(c) for c in choices)
    if total > limit:
        raise InstanceTooLarge(f"{total} states exceed the enumeration limit {limit}")
    weights = instance.weights
    m = X.n_routers
    scored = []
    for combo in itertools.product(*choices):
        x = X.x.copy()
        for k, items in zip(S, combo):
            x[:, k] = False
            x[list(items), k] = True
        if np.any(x[:, :m].sum(axis=1) > instance.policy.k_max):
            continue
        cand = Placement(x)
        scored.append((placement_objective(cand, costs, weights), cand))
    best = min(v for v, _ in scored)
    return OracleResult(objective=best,
                        placements=[pl for v, pl in scored if v <= best + 1e-9],
                        states=total)


def _random_connected(rng, n):
    edges = {(int(rng.integers(i)), i) for i in range(1, n)}
    for _ in range(int(rng.integers(0, n))):
        a, b = sorted(int(v) for v in rng.choice(n, size=2, replace=False))
        edges.add((a, b))
    return Topology(n_routers=n, edges=tuple(sorted(edges)), labels=tuple(range(n)))


def random_instance(rng, max_decision=4, max_items=6, max_capacity=2, k_values=(1, 2, None),
                    unit_sizes=False):
    """Draw a small random instance; ``None`` in ``k_values`` stands for K = M."""
    while True:
        n = int(rng.integers(3, 8))
        g = assign_roles(_random_connected(rng, n), client_fraction=1.0,
                         server_candidate_count=2, seed=int(rng.integers(2**31)))
        n_items = int(rng.integers(2, max_items + 1))
        sizes = np.ones(n_items, dtype=np.int64) if unit_sizes else rng.integers(1, 3, size=n_items)
        caps = tuple(int(c) for c in rng.integers(1, max_capacity + 1, size=n))
        k = k_values[int(rng.integers(len(k_values)))]
        k = n if k is None else k
        policy = CooperationPolicy(k_max=k, radius=int(rng.integers(0, 4)))
        p = np.sort(rng.dirichlet(np.ones(n_items)))[::-1]
        caches = [[] for _ in range(n)]
        copies = np.zeros(n_items, dtype=int)
        used = [0] * n
        for _ in range(3 * n):
            i, r = int(rng.integers(n_items)), int(rng.integers(n))
            if i in caches[r] or copies[i] >= k or used[r] + sizes[i] > caps[r]:
                continue
            caches[r].append(i)
            copies[i] += 1
            used[r] += int(sizes[i])
        inst = Instance(
            topology=g, capacities=caps, policy=policy, catalog=Catalog(sizes),
            popularity=p, placement=Placement.from_caches(n_items, caches),
            request=(int(rng.choice(g.client_nodes)), int(rng.integers(n_items))))
        _, _, outcome = inst.prepare()
        if len(outcome.decision_set) <= max_decision:
            return inst


def dump_instance(inst):
    """Serialize an instance to JSON; floats round-trip exactly."""
    doc = {
        "topology": json.loads(topology_to_json(inst.topology)),
        "capacities": [int(c) for c in inst.capacities],
        "policy": {"K": inst.policy.k_max, "r": inst.policy.radius},
        "sizes": [int(s) for s in inst.catalog.sizes],
        "popularity": [float(v) for v in inst.popularity],
        "placement": {str(k): inst.placement.cached(k) for k in range(inst.placement.n_routers)},
        "request": {"client": int(inst.request[0]), "item": int(inst.request[1])},
        "rows": [int(r) for r in inst.rows],
    }
    return json.dumps(doc, sort_keys=True)


def load_instance(text):
    doc = json.loads(text)
    g = topology_from_json(json.dumps(doc["topology"]))
    n_items = len(doc["sizes"])
    caches = [doc["placement"][str(k)] for k in range(g.n_routers)]
    return Instance(
        topology=g,
        capacities=tuple(doc["capacities"]),
        policy=CooperationPolicy(doc["policy"]["K"], doc["policy"]["r"]),
        catalog=Catalog(np.asarray(doc["sizes"])),
        popularity=np.asarray(doc["popularity"], dtype=float),
        placement=Placement.from_caches(n_items, caches),
        request=(doc["request"]["client"], doc["request"]["item"]),
        rows=tuple(doc["rows"]),
    )
