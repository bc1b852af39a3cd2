import itertools
from collections import deque

import numpy as np
import pytest

from coopcache.topology import Topology


def make_topology(n, edges, **roles):
    edges = tuple(sorted((min(u, v), max(u, v)) for u, v in edges))
    return Topology(n_routers=n, edges=edges, labels=tuple(range(n)), **roles)


def random_connected(rng, n, extra=None):
    edges = {(int(rng.integers(i)), i) for i in range(1, n)}
    for _ in range(int(rng.integers(0, n + 1)) if extra is None else extra):
        a, b = sorted(int(v) for v in rng.choice(n, size=2, replace=False))
        edges.add((a, b))
    return make_topology(n, edges)


def bfs_distances(adj, src):
    dist = {src: 0}
    queue = deque([src])
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if b not in dist:
                dist[b] = dist[a] + 1
                queue.append(b)
    return dist


def all_shortest_paths(adj, s, t):
    """Every shortest s-t path, by depth-limited enumeration."""
    d = bfs_distances(adj, s)[t]
    out = []

    def walk(path):
        if len(path) - 1 == d:
            if path[-1] == t:
                out.append(list(path))
            return
        for b in adj[path[-1]]:
            if b not in path:
                path.append(b)
                walk(path)
                path.pop()

    walk([s])
    return out


def brute_betweenness(g):
    n = g.n_routers
    adj = {i: [] for i in range(n)}
    for u, v in g.edges:
        adj[u].append(v)
        adj[v].append(u)
    score = np.zeros(n)
    for s, t in itertools.combinations(range(n), 2):
        paths = all_shortest_paths(adj, s, t)
        for v in range(n):
            if v in (s, t):
                continue
            score[v] += sum(v in p for p in paths) / len(paths)
    if n < 3:
        return score
    return score / ((n - 1) * (n - 2) / 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def record(number, ok, detail=""):
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
