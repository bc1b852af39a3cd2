import numpy as np
import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from coopcache.exceptions import ParameterError, ParseError, ValidationError
from coopcache.topology import (assign_roles, betweenness_centrality, centrality_tertiles,
                                generate_scale_free, load_edge_list, reachable_set,
                                route_to_cp, searchable_set, shortest_paths,
                                topology_from_json, topology_to_json)

from conftest import (all_shortest_paths, bfs_distances, brute_betweenness, make_topology,
                      random_connected)


def test_scale_free_50_nodes_connected():
    g = generate_scale_free(50, 2, seed=7)
    assert g.n_routers == 50
    assert nx.is_connected(g.to_networkx())


def test_scale_free_two_nodes_single_edge():
    for seed in range(5):
        assert generate_scale_free(2, 1, seed=seed).edges == ((0, 1),)


def test_scale_free_deterministic():
    assert generate_scale_free(30, 2, seed=3) == generate_scale_free(30, 2, seed=3)
    assert generate_scale_free(30, 2, seed=3) != generate_scale_free(30, 2, seed=4)


@pytest.mark.parametrize("n,m", [(1, 1), (5, 0), (5, 5)])
def test_scale_free_bad_parameters(n, m):
    with pytest.raises(ParameterError):
        generate_scale_free(n, m, seed=0)


def test_scale_free_heavier_tail_than_random():
    g = generate_scale_free(1000, 2, seed=11)
    er = nx.gnm_random_graph(1000, len(g.edges), seed=11)

    def top_decile_share(degrees):
        d = np.sort(np.asarray(degrees))[::-1]
        return d[: len(d) // 10].sum() / d.sum()

    sf = top_decile_share([d for _, d in g.to_networkx().degree()])
    rnd = top_decile_share([d for _, d in er.degree()])
    assert sf > rnd + 0.05


def test_edge_list_path():
    g = load_edge_list("0 1\n1 2")
    assert g.n_routers == 3 and g.edges == ((0, 1), (1, 2))


def test_edge_list_duplicates_and_comments():
    g = load_edge_list("# header\n0 1\n0 1  # again\n\n1 0\n")
    assert g.edges == ((0, 1),)


def test_edge_list_relabels_sparse_ids():
    g = load_edge_list("10 30\n30 20\n")
    assert g.labels == (10, 20, 30)
    assert g.edges == ((0, 2), (1, 2))


def test_edge_list_self_loop():
    with pytest.raises(ParseError, match="line 1"):
        load_edge_list("0 0")


@pytest.mark.parametrize("text,line", [("0 1\n1 2 3", 2), ("0 1\n\nx 2", 3), ("7", 1)])
def test_edge_list_malformed(text, line):
    with pytest.raises(ParseError) as err:
        load_edge_list(text)
    assert err.value.lineno == line


def test_edge_list_disconnected():
    with pytest.raises(ValidationError):
        load_edge_list("0 1\n2 3")


def test_roles_server_among_top_centrality():
    base = generate_scale_free(50, 2, seed=7)
    c_b = betweenness_centrality(base)
    top5 = set(sorted(range(50), key=lambda i: (-c_b[i], i))[:5])
    for seed in range(10):
        g = assign_roles(base, 0.3, 5, seed=seed)
        assert g.cp_attach in top5
        assert g.cp_node == 50 and g.n_nodes == 51
        assert len(g.client_nodes) == int(np.ceil(0.3 * len(g.edge_routers)))
        assert set(g.client_nodes) <= set(g.edge_routers)


def test_roles_edge_routers_are_lowest_tertile():
    base = generate_scale_free(50, 2, seed=7)
    g = assign_roles(base, 0.3, 5, seed=1)
    c_b = np.asarray(g.centrality)
    assert len(g.edge_routers) == 17
    others = [i for i in range(50) if i not in g.edge_routers]
    assert max(c_b[list(g.edge_routers)]) <= min(c_b[others])


def test_roles_full_client_fraction():
    g = assign_roles(generate_scale_free(20, 2, seed=2), 1.0, 5, seed=0)
    assert g.client_nodes == g.edge_routers


def test_roles_deterministic():
    base = generate_scale_free(40, 2, seed=5)
    assert assign_roles(base, 0.3, 5, seed=9) == assign_roles(base, 0.3, 5, seed=9)


def test_roles_bad_parameters():
    base = generate_scale_free(10, 2, seed=5)
    with pytest.raises(ParameterError):
        assign_roles(base, 0.0, 5, seed=0)
    with pytest.raises(ParameterError):
        assign_roles(base, 0.5, 0, seed=0)


def test_cp_adds_one_hop():
    g = assign_roles(generate_scale_free(30, 2, seed=1), 0.3, 5, seed=1)
    d = shortest_paths(g).dist
    assert g.degree(g.cp_node) == 1
    assert np.array_equal(d[:30, g.cp_node], d[:30, g.cp_attach] + 1)
    # router-only centrality is untouched by the CP
    assert np.allclose(g.centrality, betweenness_centrality(g))


def test_distances_path_and_star():
    path = make_topology(3, [(0, 1), (1, 2)])
    assert shortest_paths(path).dist[0, 2] == 2
    star = make_topology(5, [(0, i) for i in range(1, 5)])
    d = shortest_paths(star).dist
    for a in range(1, 5):
        for b in range(1, 5):
            assert d[a, b] == (0 if a == b else 2)


def test_distances_match_bfs(rng):
    for _ in range(30):
        g = random_connected(rng, int(rng.integers(2, 9)))
        pt = shortest_paths(g)
        for s in range(g.n_routers):
            ref = bfs_distances(g.adjacency, s)
            assert [pt.dist[s, t] for t in range(g.n_routers)] == [ref[t] for t in range(g.n_routers)]


def test_path_table_metric_properties(rng):
    g = random_connected(rng, 8)
    d = shortest_paths(g).dist
    assert np.array_equal(d, d.T)
    assert not d.diagonal().any()
    n = g.n_routers
    for a in range(n):
        for b in range(n):
            assert np.all(d[a, b] <= d[a, :] + d[:, b])


def test_canonical_path_is_lexicographic_minimum(rng):
    for _ in range(20):
        g = random_connected(rng, int(rng.integers(3, 9)))
        pt = shortest_paths(g)
        for s in range(g.n_routers):
            for t in range(g.n_routers):
                p = pt.path(s, t)
                assert len(p) - 1 == pt.dist[s, t]
                assert p == min(all_shortest_paths(g.adjacency, s, t))


def test_betweenness_small_cases():
    assert np.allclose(betweenness_centrality(make_topology(3, [(0, 1), (1, 2)])), [0, 1, 0])
    star = betweenness_centrality(make_topology(5, [(0, i) for i in range(1, 5)]))
    assert np.allclose(star, [1, 0, 0, 0, 0])
    assert np.array_equal(betweenness_centrality(make_topology(2, [(0, 1)])), [0, 0])


def test_betweenness_matches_enumeration(rng):
    for _ in range(30):
        g = random_connected(rng, int(rng.integers(3, 9)))
        assert np.allclose(betweenness_centrality(g), brute_betweenness(g), atol=1e-9, rtol=0)


def test_betweenness_range_and_leaves(rng):
    g = generate_scale_free(60, 1, seed=4)
    c_b = betweenness_centrality(g)
    assert np.all((c_b >= 0) & (c_b <= 1))
    for v in range(60):
        if g.degree(v) == 1:
            assert c_b[v] == 0


def test_tertiles_sizes():
    groups = centrality_tertiles(np.arange(50.0))
    assert np.bincount(groups).tolist() == [17, 17, 16]
    assert groups[0] == 0 and groups[-1] == 2


def path_with_cp():
    # 0 - 1 - 2 - 3 with the CP hanging off router 2
    return make_topology(4, [(0, 1), (1, 2), (2, 3)], edge_routers=(0, 3),
                         client_nodes=(0, 3), cp_attach=2)


def test_searchable_set_examples():
    g = path_with_cp()
    pt = shortest_paths(g)
    assert searchable_set(g, 1, 0, pt) == {1}
    assert searchable_set(g, 1, 1, pt) == {0, 1, 2}
    assert searchable_set(g, 0, 10, pt) == {0, 1, 2, 3}


def test_route_to_cp_examples():
    g = path_with_cp()
    pt = shortest_paths(g)
    assert route_to_cp(g, pt, 0) == [0, 1, 2]
    assert route_to_cp(g, pt, 2) == [2]
    assert pt.dist[2, g.cp_node] == 1
    assert route_to_cp(g, pt, 3) == [3, 2]


def test_reachable_set_examples():
    g = make_topology(3, [(0, 1), (1, 2)], edge_routers=(0,), client_nodes=(0,), cp_attach=2)
    pt = shortest_paths(g)
    assert reachable_set(g, 0, 1, pt) == {0, 1, 2}
    assert reachable_set(g, 0, 0, pt) == {0, 1, 2}
    g4 = path_with_cp()
    assert reachable_set(g4, 3, 0) == {3, 2}
    assert reachable_set(g4, 3, 1) == {1, 2, 3}
    assert reachable_set(g4, 3, 5) == {0, 1, 2, 3}


def test_route_length_matches_bfs(rng):
    for seed in range(10):
        g = assign_roles(random_connected(rng, 8), 1.0, 3, seed=seed)
        pt = shortest_paths(g)
        ref = bfs_distances(g.adjacency, g.cp_node)
        for j in g.edge_routers:
            assert len(route_to_cp(g, pt, j)) == ref[j]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 30))
def test_set_monotonicity_and_identity(seed, n):
    rng = np.random.default_rng(seed)
    g = assign_roles(random_connected(rng, n), 0.5, 3, seed=seed)
    pt = shortest_paths(g)
    for j in g.edge_routers:
        assert reachable_set(g, j, 0, pt) == set(route_to_cp(g, pt, j))
    for j in range(n):
        prev = searchable_set(g, j, 0, pt)
        assert j in prev
        for r in range(1, pt.diameter + 1):
            cur = searchable_set(g, j, r, pt)
            assert prev <= cur
            prev = cur
        assert prev == set(range(n))
    for j in g.edge_routers:
        prev = reachable_set(g, j, 0, pt)
        for r in range(1, pt.diameter + 1):
            cur = reachable_set(g, j, r, pt)
            assert prev <= cur
            prev = cur


def test_json_round_trip():
    g = assign_roles(generate_scale_free(20, 2, seed=3), 0.3, 5, seed=3)
    text = topology_to_json(g)
    import json
    doc = json.loads(text)
    assert set(doc) >= {"nodes", "edges", "edge_routers", "client_nodes", "cp_attach", "c_b"}
    back = topology_from_json(text)
    assert back == g
    assert topology_to_json(back) == text
