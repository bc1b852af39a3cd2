"""End-to-end acceptance checks; each prints one PASS/FAIL line."""
import filecmp
import os
import time

import numpy as np
import pytest

from coopcache.experiment import (SweepConfig, corner_points, run_sweep, tertile_shares,
                                  write_sweep)
from coopcache.metrics import byte_hit_rate, footprint_reduction
from coopcache.optimizer import brute_force_oracle, random_instance, validate_placement
from coopcache.policy import CooperationPolicy, init_overhead, overhead_report
from coopcache.topology import (assign_roles, betweenness_centrality, generate_scale_free,
                                reachable_set, route_to_cp, searchable_set, shortest_paths)

from conftest import brute_betweenness, random_connected, record
from test_metrics import trace

DESK_SEED = 2024


@pytest.fixture(scope="module")
def desk():
    t0 = time.perf_counter()
    res = run_sweep(SweepConfig.desk(seed=DESK_SEED))
    return res, time.perf_counter() - t0


def test_criterion_1_optimizer_exactness():
    rng = np.random.default_rng(20240)
    t0 = time.perf_counter()
    bad = []
    for n in range(200):
        inst = random_instance(rng, max_decision=4, max_items=6, max_capacity=2,
                               k_values=(1, 2, None))
        d = inst.solve()
        oracle = brute_force_oracle(inst)
        if (d.solver_status != "exact" or abs(d.objective_value - oracle.objective) > 1e-9
                or validate_placement(d.placement, inst.policy, inst.catalog, inst.capacities)):
            bad.append(n)
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    record(1, ok, f"{200 - len(bad)}/200 match the oracle in {elapsed:.1f}s")
    assert ok, bad


def test_criterion_2_metric_arithmetic():
    checks = [
        byte_hit_rate(trace([1, 1], [1, 1], [0, 0], [3, 3])) == 1.0,
        byte_hit_rate(trace([1, 1], [0, 0], [3, 3], [3, 3])) == 0.0,
        byte_hit_rate(trace([2, 1, 1], [1, 0, 1], [1, 3, 0], [3, 3, 3])) == 0.75,
        footprint_reduction(trace([1, 2], [1, 1], [0, 0], [2, 4], client=[0, 1])) == 1.0,
        footprint_reduction(trace([1, 2], [0, 0], [2, 4], [2, 4], client=[0, 1])) == 0.0,
        footprint_reduction(trace([1, 1], [0, 1], [4, 0], [4, 4])) == 0.5,
    ]
    record(2, all(checks), f"{sum(checks)}/{len(checks)} exact")
    assert all(checks)


def test_criterion_3_centrality_oracle():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(50):
        g = random_connected(rng, int(rng.integers(2, 9)))
        worst = max(worst, float(np.max(np.abs(betweenness_centrality(g) - brute_betweenness(g)))))
    record(3, worst <= 1e-9, f"max error {worst:.2e} over 50 graphs")
    assert worst <= 1e-9


def test_criterion_4_set_identities():
    rng = np.random.default_rng(404)
    failures = checked = 0
    for _ in range(20):
        n = int(rng.integers(8, 40))
        g = assign_roles(generate_scale_free(n, int(rng.integers(1, 4)), seed=int(rng.integers(2**31))),
                         seed=int(rng.integers(2**31)))
        pt = shortest_paths(g)
        for j in g.edge_routers:
            checked += 1
            failures += set(reachable_set(g, j, 0, pt)) != set(route_to_cp(g, pt, j))
            prev_s, prev_r = set(), set()
            for r in range(pt.diameter + 1):
                s_set, r_set = set(searchable_set(g, j, r, pt)), set(reachable_set(g, j, r, pt))
                failures += not (prev_s <= s_set and prev_r <= r_set and s_set <= r_set)
                prev_s, prev_r = s_set, r_set
    record(4, failures == 0, f"{checked} edge routers, {failures} violations")
    assert failures == 0


def test_criterion_5_overhead_counts():
    rng = np.random.default_rng(505)
    ok = True
    for _ in range(10):
        g = generate_scale_free(int(rng.integers(5, 30)), 2, seed=int(rng.integers(2**31)))
        pt = shortest_paths(g)
        m = g.n_routers
        caps = int(rng.integers(1, 6))
        r = int(rng.integers(0, 4))
        expected = sum(len(searchable_set(g, j, r, pt)) - 1 for j in range(m))
        ok &= init_overhead(g, CooperationPolicy(3, r), caps, pt)[0] == expected
        ok &= init_overhead(g, CooperationPolicy(3, 0), caps, pt) == (0, 0)
        full = overhead_report(g, CooperationPolicy(3, pt.diameter), caps, pt)
        ok &= full.init_item_announcements == m * caps * (m - 1)
        ok &= full.init_messages == m * (m - 1)
    record(5, bool(ok), "exact counts on 10 topologies")
    assert ok


def test_criterion_6_pareto_shape(desk):
    res, elapsed = desk
    c = corner_points(res)
    b, cc = c["B"], c["C"]
    r0 = [res.grid[(K, 0)].bhr for K in res.config.k_values]
    peak = int(np.argmax(r0))
    parts = {
        "a": len(res.frontier) >= 2,
        "b": b.bhr > cc.bhr and cc.fpr > b.fpr,
        "c": b.cpf > 0 and cc.cpf < 0,
        "d": all(x <= y for x, y in zip(r0[:peak], r0[1:peak + 1])),
    }
    ok = all(parts.values())
    record(6, ok, f"{parts} B=(K={b.K}, r={b.r}, bhr={b.bhr:.3f}, fpr={b.fpr:.3f}, "
                  f"cpf={b.cpf:+.3f}) C=(K={cc.K}, r={cc.r}, bhr={cc.bhr:.3f}, "
                  f"fpr={cc.fpr:.3f}, cpf={cc.cpf:+.3f}) sweep {elapsed:.0f}s")
    assert ok


def test_criterion_7_placement_migration(desk):
    res, _ = desk
    shares = {}
    for name, q in corner_points(res).items():
        if name in ("B", "C"):
            runs = res.runs[(q.K, q.r)]
            shares[name] = np.mean([
                tertile_shares(run.final, inst["topology"].centrality, res.popularity, res.sizes)
                for run, inst in zip(runs, res.instances)], axis=0)
    low_b, mid_b, high_b = shares["B"]
    low_c, mid_c, high_c = shares["C"]
    ok = high_b > max(low_b, mid_b) and low_c > max(mid_c, high_c)
    record(7, ok, "shares (low, mid, high) B=" + np.array2string(shares["B"], precision=3)
                  + " C=" + np.array2string(shares["C"], precision=3))
    assert ok


def test_criterion_8_determinism(desk, tmp_path):
    res, _ = desk
    a = write_sweep(res, str(tmp_path / "first"))
    b = write_sweep(run_sweep(SweepConfig.desk(seed=DESK_SEED)), str(tmp_path / "second"))
    differing = []
    for root, _, files in os.walk(a):
        rel = os.path.relpath(root, a)
        _, mismatch, errors = filecmp.cmpfiles(root, os.path.join(b, rel), files, shallow=False)
        differing += [os.path.join(rel, f) for f in mismatch + errors]
    n_files = sum(len(f) for _, _, f in os.walk(a))
    ok = not differing and n_files == sum(len(f) for _, _, f in os.walk(b))
    record(8, ok, f"{n_files} files compared, {len(differing)} differ")
    assert ok, differing
