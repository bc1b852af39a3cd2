"""Command-line entry points: sweep, simulate, oracle-check and pareto."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from .exceptions import CoopCacheError
from .experiment import SweepConfig, load_cell_reports, run_sweep, write_frontier, write_sweep
from .metrics import MetricsReport, byte_hit_rate, coupling_factor, footprint_reduction
from .optimizer import brute_force_oracle, dump_instance, random_instance, validate_placement
from .policy import CooperationPolicy, overhead_report
from .simulator import SimulationConfig, run_simulation, snapshot_to_json
from .topology import assign_roles, generate_scale_free, load_edge_list, shortest_paths
from .workload import build_catalog, sample_requests, zipf_popularity


def _int_list(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _add_instance_args(p):
    p.add_argument("--topology", nargs="+", default=["scale-free"], metavar="KIND",
                   help="'scale-free' or 'edge-list FILE'")
    p.add_argument("--nodes", type=int, default=50)
    p.add_argument("--capacity", type=int, default=25)
    p.add_argument("--items", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--requests", type=int, default=20_000)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _edge_list_text(topology):
    kind = topology[0]
    if kind == "scale-free" and len(topology) == 1:
        return None
    if kind == "edge-list" and len(topology) == 2:
        with open(topology[1]) as fh:
            return fh.read()
    raise CoopCacheError("--topology takes 'scale-free' or 'edge-list FILE'")


def cmd_sweep(args):
    cfg = SweepConfig(
        k_values=_int_list(args.k_list), r_values=_int_list(args.r_list), repetitions=args.reps,
        n_nodes=args.nodes, edge_list=_edge_list_text(args.topology), capacity=args.capacity,
        n_items=args.items, alpha=args.alpha, requests=args.requests, warmup=args.warmup,
        seed=args.seed, workers=args.workers)
    t0 = time.perf_counter()
    result = run_sweep(cfg)
    write_sweep(result, args.out)
    for name, q in write_frontier(list(result.grid.values()), args.out).items():
        print(f"{name}: K={q.K} r={q.r} bhr={q.bhr:.4f} fpr={q.fpr:.4f} cpf={q.cpf:+.4f}")
    print(f"wrote {args.out} in {time.perf_counter() - t0:.1f}s")
    return 0


def cmd_simulate(args):
    text = _edge_list_text(args.topology)
    base = generate_scale_free(args.nodes, 2, seed=args.seed) if text is None else load_edge_list(text)
    g = assign_roles(base, seed=args.seed)
    paths = shortest_paths(g)
    catalog = build_catalog(args.items)
    p = zipf_popularity(args.items, args.alpha)
    stream = sample_requests(p, g.client_nodes, args.requests, seed=args.seed)
    policy = CooperationPolicy(args.k, args.r)
    caps = np.full(g.n_routers, args.capacity, dtype=np.int64)
    tr = run_simulation(g, stream, SimulationConfig(caps, policy, warmup=args.warmup),
                        catalog, p, paths=paths)
    report = MetricsReport(
        K=args.k, r=args.r, bhr=byte_hit_rate(tr), fpr=footprint_reduction(tr),
        cpf=coupling_factor(tr.post_warmup_snapshots(), g.centrality, p, catalog.sizes),
        request_count=len(tr), overheads=overhead_report(g, policy, caps, paths).to_dict())
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "trace.csv"), "w") as fh:
        fh.write(tr.to_csv())
    with open(os.path.join(args.out, "metrics.json"), "w") as fh:
        fh.write(json.dumps(asdict(report), sort_keys=True, indent=2) + "\n")
    with open(os.path.join(args.out, "snapshot.json"), "w") as fh:
        fh.write(snapshot_to_json(tr.snapshots[len(tr)]) + "\n")
    print(f"K={args.k} r={args.r} bhr={report.bhr:.4f} fpr={report.fpr:.4f} cpf={report.cpf:+.4f}")
    return 0


def cmd_oracle_check(args):
    rng = np.random.default_rng(args.seed)
    failures = 0
    t0 = time.perf_counter()
    for n in range(args.count):
        inst = random_instance(rng, max_decision=args.max_decision, max_items=args.max_items,
                               max_capacity=args.max_capacity)
        d = inst.solve()
        oracle = brute_force_oracle(inst)
        ok = (d.solver_status == "exact"
              and abs(d.objective_value - oracle.objective) <= 1e-9
              and not validate_placement(d.placement, inst.policy, inst.catalog, inst.capacities))
        if not ok:
            failures += 1
            print(f"instance {n}: solver {d.objective_value!r} oracle {oracle.objective!r}")
            if args.dump:
                os.makedirs(args.dump, exist_ok=True)
                with open(os.path.join(args.dump, f"instance_{n}.json"), "w") as fh:
                    fh.write(dump_instance(inst))
    print(f"{args.count - failures}/{args.count} instances match "
          f"({time.perf_counter() - t0:.1f}s)")
    return 1 if failures else 0


def cmd_pareto(args):
    points = load_cell_reports(args.directory)
    out = args.out or args.directory
    os.makedirs(out, exist_ok=True)
    for name, q in write_frontier(points, out).items():
        print(f"{name}: K={q.K} r={q.r} bhr={q.bhr:.4f} fpr={q.fpr:.4f} cpf={q.cpf:+.4f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="coopcache",
                                     description="(K, r) cooperative caching experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="simulate a (K, r) grid and write all artifacts")
    _add_instance_args(p)
    p.add_argument("--k-list", default="1,2,5,10,25,50")
    p.add_argument("--r-list", default="0,1,2,3,4")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="run a single (K, r) configuration")
    _add_instance_args(p)
    p.add_argument("-K", "--k", type=int, required=True)
    p.add_argument("-r", "--r", type=int, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle-check", help="compare the solver against brute force")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-decision", type=int, default=4)
    p.add_argument("--max-items", type=int, default=6)
    p.add_argument("--max-capacity", type=int, default=2)
    p.add_argument("--dump", default=None, help="directory for failing instances")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("pareto", help="recompute frontier and corners of a sweep directory")
    p.add_argument("directory")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pareto)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CoopCacheError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
