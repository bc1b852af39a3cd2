"""Router graphs: generation, ingestion, role assignment and path queries.

Routers are numbered ``0..M-1``. Once a content provider (CP) is attached it
becomes node ``M`` and hangs off exactly one router, so every router reaches
the CP through that attachment router.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .exceptions import ConfigurationError, ParameterError, ParseError, ValidationError

__all__ = [
    "Topology",
    "PathTable",
    "generate_scale_free",
    "load_edge_list",
    "assign_roles",
    "shortest_paths",
    "betweenness_centrality",
    "centrality_tertiles",
    "searchable_set",
    "route_to_cp",
    "reachable_set",
    "topology_to_json",
    "topology_from_json",
]


@dataclass(frozen=True)
class Topology:
    """Undirected, unweighted router graph with optional roles.

    Parameters
    ----------
    n_routers : int
        Number of routers ``M``; the CP, when attached, is node ``M``.
    edges : tuple of (int, int)
        Router-router links with ``u < v``, sorted.
    edge_routers : tuple of int
        Routers that may receive user requests.
    client_nodes : tuple of int
        Edge routers that actually have clients attached.
    cp_attach : int or None
        Router the CP is linked to, ``None`` before roles are assigned.
    centrality : tuple of float or None
        Normalized betweenness of each router, filled by :func:`assign_roles`.
    labels : tuple of int
        Original node identifiers (from an edge list), indexed by router.
    """

    n_routers: int
    edges: tuple
    edge_routers: tuple = ()
    client_nodes: tuple = ()
    cp_attach: int | None = None
    centrality: tuple | None = None
    labels: tuple = field(default=(), compare=False)

    @property
    def cp_node(self):
        return self.n_routers

    @property
    def has_cp(self):
        return self.cp_attach is not None

    @property
    def n_nodes(self):
        return self.n_routers + 1 if self.has_cp else self.n_routers

    @cached_property
    def adjacency(self):
        """Sorted neighbour tuples for every node, CP included if attached."""
        adj = [[] for _ in range(self.n_nodes)]
        for u, v in self.all_edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @property
    def all_edges(self):
        if self.has_cp:
            return self.edges + ((self.cp_attach, self.cp_node),)
        return self.edges

    def to_networkx(self, include_cp=False):
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes if include_cp else self.n_routers))
        g.add_edges_from(self.all_edges if include_cp else self.edges)
        return g

    def degree(self, node):
        return len(self.adjacency[node])


@dataclass(frozen=True)
class PathTable:
    """All-pairs hop distances plus a canonical next hop per pair.

    ``next_hop[a, b]`` is the smallest-id neighbour of ``a`` lying on a
    shortest path to ``b``; following it greedily yields the lexicographically
    smallest shortest path.
    """

    dist: np.ndarray
    next_hop: np.ndarray

    def path(self, a, b):
        """Canonical shortest path from ``a`` to ``b``, both inclusive."""
        out = [a]
        while a != b:
            a = int(self.next_hop[a, b])
            out.append(a)
        return out

    @property
    def diameter(self):
        return int(self.dist.max())


def _canonical_edges(pairs):
    return tuple(sorted({(min(u, v), max(u, v)) for u, v in pairs}))


def _check_connected(n, edges):
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    if n == 0 or not nx.is_connected(g):
        raise ValidationError("topology graph is not connected")


def generate_scale_free(n, m_attach=2, seed=None):
    """Grow a scale-free router graph by preferential attachment.

    The process starts from a complete graph on ``m_attach + 1`` routers and
    links every new router to ``m_attach`` existing ones with probability
    proportional to their degree.

    Parameters
    ----------
    n : int
        Number of routers, at least 2.
    m_attach : int
        Links added per arriving router, ``1 <= m_attach < n``.
    seed : int, optional
        Seed for the generator; equal seeds give equal graphs.

    Returns
    -------
    Topology
        Graph without roles.
    """
    if n < 2:
        raise ParameterError(f"need at least 2 routers, got {n}")
    if not 1 <= m_attach < n:
        raise ParameterError(f"m_attach must satisfy 1 <= m_attach < n, got {m_attach}")
    g = nx.barabasi_albert_graph(n, m_attach, seed=seed,
                                 initial_graph=nx.complete_graph(m_attach + 1))
    return Topology(n_routers=n, edges=_canonical_edges(g.edges()),
                    labels=tuple(range(n)))


def load_edge_list(text):
    """Parse a whitespace separated ``u v`` edge list.

    Node identifiers may be arbitrary integers; they are relabelled to
    ``0..M-1`` in increasing order and kept in ``Topology.labels``. Blank
    lines and ``#`` comments are ignored, duplicate links collapse.
    """
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'u v', got {raw.strip()!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {raw.strip()!r}", lineno) from None
        if u == v:
            raise ParseError(f"self-loop on node {u}", lineno)
        pairs.append((u, v))
    labels = sorted({x for p in pairs for x in p})
    index = {lab: i for i, lab in enumerate(labels)}
    edges = _canonical_edges((index[u], index[v]) for u, v in pairs)
    _check_connected(len(labels), edges)
    return Topology(n_routers=len(labels), edges=edges, labels=tuple(labels))


def shortest_paths(g):
    """Hop distances and canonical next hops for every node pair."""
    n = g.n_nodes
    rows, cols = [], []
    for u, v in g.all_edges:
        rows += [u, v]
        cols += [v, u]
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    dist = shortest_path(adj, method="D", unweighted=True)
    if not np.all(np.isfinite(dist)):
        raise ValidationError("topology graph is not connected")
    dist = dist.astype(np.int64)
    next_hop = np.empty((n, n), dtype=np.int64)
    for a in range(n):
        next_hop[a, a] = a
        nbrs = np.asarray(g.adjacency[a], dtype=np.int64)
        for b in range(n):
            if b == a:
                continue
            # neighbours are sorted, so the first match is the smallest id
            on_path = nbrs[dist[nbrs, b] == dist[a, b] - 1]
            next_hop[a, b] = on_path[0]
    dist.setflags(write=False)
    next_hop.setflags(write=False)
    return PathTable(dist=dist, next_hop=next_hop)


def betweenness_centrality(g):
    """Normalized shortest-path betweenness of every router.

    Pair dependencies are summed over unordered router pairs and divided by
    ``(M-1)(M-2)/2``. The CP never takes part.
    """
    m = g.n_routers
    if m < 3:
        return np.zeros(m)
    bc = nx.betweenness_centrality(g.to_networkx(include_cp=False), normalized=True)
    return np.array([bc[i] for i in range(m)])


def centrality_tertiles(c_b):
    """Group routers by betweenness rank into three near-equal groups.

    Returns an integer array with 0 for the lowest group and 2 for the
    highest. Ranking ties are broken by the lower router id.
    """
    c_b = np.asarray(c_b, dtype=float)
    order = sorted(range(len(c_b)), key=lambda i: (round(c_b[i], 12), i))
    groups = np.empty(len(c_b), dtype=np.int64)
    for gid, chunk in enumerate(np.array_split(np.asarray(order, dtype=np.int64), 3)):
        groups[chunk] = gid
    return groups


def assign_roles(g, client_fraction=0.3, server_candidate_count=5, seed=None):
    """Pick edge routers and clients and attach the content provider.

    Edge routers are the lowest betweenness tertile. A fraction of them,
    rounded up, is drawn uniformly as client-attached routers. The CP is
    linked to one router drawn uniformly from the ``server_candidate_count``
    most central routers.
    """
    if not 0 < client_fraction <= 1:
        raise ParameterError(f"client_fraction must be in (0, 1], got {client_fraction}")
    if server_candidate_count < 1:
        raise ParameterError("server_candidate_count must be >= 1")
    _check_connected(g.n_routers, g.edges)
    base = replace(g, cp_attach=None, edge_routers=(), client_nodes=())
    c_b = betweenness_centrality(base)
    groups = centrality_tertiles(c_b)
    edge_routers = tuple(int(i) for i in np.flatnonzero(groups == 0))
    if not edge_routers:
        raise ConfigurationError("no edge routers after classification")
    rng = np.random.default_rng(seed)
    n_clients = math.ceil(client_fraction * len(edge_routers) - 1e-9)
    picked = rng.choice(len(edge_routers), size=n_clients, replace=False)
    clients = tuple(sorted(edge_routers[i] for i in picked))
    by_rank = sorted(range(g.n_routers), key=lambda i: (-round(c_b[i], 12), i))
    candidates = by_rank[:server_candidate_count]
    attach = int(candidates[rng.integers(len(candidates))])
    return replace(base, edge_routers=edge_routers, client_nodes=clients,
                   cp_attach=attach, centrality=tuple(float(x) for x in c_b))


def _paths_for(g, paths):
    return paths if paths is not None else shortest_paths(g)


def searchable_set(g, j, r, paths=None):
    """Routers within ``r`` hops of router ``j`` (``j`` included, CP excluded)."""
    if r < 0:
        raise ParameterError("radius must be non-negative")
    d = _paths_for(g, paths).dist[j, :g.n_routers]
    return frozenset(int(k) for k in np.flatnonzero(d <= r))


def route_to_cp(g, paths, j):
    """Routers on the canonical path from ``j`` to the CP, CP excluded.

    The list length equals the hop count from ``j`` to the CP.
    """
    if not g.has_cp:
        raise ConfigurationError("no content provider attached")
    return _paths_for(g, paths).path(j, g.cp_node)[:-1]


def reachable_set(g, j, r, paths=None):
    """Union of the searchable sets of all routers on ``j``'s route to the CP."""
    paths = _paths_for(g, paths)
    out = set()
    for k in route_to_cp(g, paths, j):
        out |= searchable_set(g, k, r, paths)
    return frozenset(out)


def topology_to_json(g):
    c_b = g.centrality if g.centrality is not None else tuple(betweenness_centrality(g))
    doc = {
        "nodes": list(range(g.n_routers)),
        "edges": [list(e) for e in g.edges],
        "edge_routers": list(g.edge_routers),
        "client_nodes": list(g.client_nodes),
        "cp_attach": g.cp_attach,
        "c_b": [float(x) for x in c_b],
    }
    if g.labels and tuple(g.labels) != tuple(range(g.n_routers)):
        doc["labels"] = list(g.labels)
    return json.dumps(doc, sort_keys=True)


def topology_from_json(text):
    doc = json.loads(text)
    n = len(doc["nodes"])
    return Topology(
        n_routers=n,
        edges=_canonical_edges(tuple(e) for e in doc["edges"]),
        edge_routers=tuple(doc.get("edge_routers", ())),
        client_nodes=tuple(doc.get("client_nodes", ())),
        cp_attach=doc.get("cp_attach"),
        centrality=tuple(doc["c_b"]) if doc.get("c_b") is not None else None,
        labels=tuple(doc.get("labels", range(n))),
    )
