"""(K, r) grid sweeps, Pareto corners and figure-ready exports."""
from __future__ import annotations

import csv
import io
import json
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import networkx as nx
import numpy as np

from . import __version__
from .exceptions import ParameterError
from .metrics import (MetricsReport, ParetoPoint, byte_hit_rate, coupling_factor,
                      footprint_reduction, pareto_front)
from .policy import CooperationPolicy, overhead_report
from .simulator import SimulationConfig, run_simulation
from .topology import (assign_roles, centrality_tertiles, generate_scale_free,
                       load_edge_list, shortest_paths)
from .workload import build_catalog, sample_requests, zipf_popularity

__all__ = [
    "SweepConfig",
    "SweepResult",
    "CellRun",
    "run_sweep",
    "corner_points",
    "boundary_path",
    "top_items",
    "tertile_shares",
    "export_heatmaps",
    "read_heatmap",
    "export_placement_map",
    "write_sweep",
    "write_frontier",
    "load_cell_reports",
]


@dataclass(frozen=True)
class SweepConfig:
    """Everything needed to reproduce a sweep.

    ``edge_list`` holds the text of an edge-list topology; when it is
    ``None`` a fresh scale-free graph of ``n_nodes`` routers is grown for
    every repetition. All cells of one repetition share its topology, roles
    and request stream.
    """

    k_values: tuple = (1, 2, 5, 10, 25, 50)
    r_values: tuple = (0, 1, 2, 3, 4)
    repetitions: int = 10
    n_nodes: int = 50
    m_attach: int = 2
    edge_list: str | None = None
    capacity: int = 25
    n_items: int = 500
    item_size: int = 1
    alpha: float = 0.8
    q: float = 0.0
    requests: int = 20_000
    warmup: int | None = None
    client_fraction: float = 0.3
    server_candidates: int = 5
    n_snapshots: int = 10
    budget: int = 100_000
    estimate_popularity: bool = False
    cpf_empty: str = "skip"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ParameterError("repetitions must be >= 1")
        if not self.k_values or not self.r_values:
            raise ParameterError("K and r grids must be non-empty")
        object.__setattr__(self, "k_values", tuple(sorted(set(int(k) for k in self.k_values))))
        object.__setattr__(self, "r_values", tuple(sorted(set(int(r) for r in self.r_values))))

    @classmethod
    def desk(cls, **kw):
        return cls(**kw)

    @classmethod
    def full_scale(cls, **kw):
        kw.setdefault("n_items", 5000)
        kw.setdefault("repetitions", 50)
        return cls(**kw)

    def manifest_dict(self):
        d = asdict(self)
        d["k_values"] = list(self.k_values)
        d["r_values"] = list(self.r_values)
        d.pop("workers")
        return d


@dataclass
class CellRun:
    bhr: float
    fpr: float
    cpf: float
    msgs_per_request: float
    heuristic_steps: int
    final: object
    overheads: dict


@dataclass
class SweepResult:
    config: SweepConfig
    grid: dict
    runs: dict
    instances: list
    popularity: np.ndarray
    sizes: np.ndarray
    frontier: list = field(default_factory=list)

    def point(self, K, r):
        return self.grid[(K, r)]

    def report(self, K, r):
        pt = self.grid[(K, r)]
        runs = self.runs[(K, r)]
        keys = runs[0].overheads.keys()
        over = {k: float(np.mean([run.overheads[k] for run in runs])) for k in keys}
        return MetricsReport(K=K, r=r, bhr=pt.bhr, fpr=pt.fpr, cpf=pt.cpf, reps=pt.reps,
                             se_bhr=pt.se_bhr, se_fpr=pt.se_fpr, se_cpf=pt.se_cpf,
                             request_count=self.config.requests, overheads=over)


def _rep_seeds(master, rep):
    state = np.random.SeedSequence([master, rep]).generate_state(3)
    return {"topology": int(state[0]), "roles": int(state[1]), "stream": int(state[2])}


def _run_repetition(cfg, rep):
    seeds = _rep_seeds(cfg.seed, rep)
    if cfg.edge_list is None:
        base = generate_scale_free(cfg.n_nodes, cfg.m_attach, seed=seeds["topology"])
    else:
        base = load_edge_list(cfg.edge_list)
    g = assign_roles(base, cfg.client_fraction, cfg.server_candidates, seed=seeds["roles"])
    paths = shortest_paths(g)
    catalog = build_catalog(cfg.n_items, uniform_bytes=cfg.item_size)
    p = zipf_popularity(cfg.n_items, cfg.alpha, cfg.q)
    stream = sample_requests(p, g.client_nodes, cfg.requests, seed=seeds["stream"])
    caps = np.full(g.n_routers, cfg.capacity, dtype=np.int64)
    out = {}
    for K in cfg.k_values:
        for r in cfg.r_values:
            policy = CooperationPolicy(K, r)
            sim_cfg = SimulationConfig(capacities=caps, policy=policy, warmup=cfg.warmup,
                                       budget=cfg.budget, seed=seeds["stream"],
                                       n_snapshots=cfg.n_snapshots,
                                       estimate_popularity=cfg.estimate_popularity)
            try:
                tr = run_simulation(g, stream, sim_cfg, catalog, p, paths=paths)
                w = tr.window
                out[(K, r)] = CellRun(
                    bhr=byte_hit_rate(tr),
                    fpr=footprint_reduction(tr),
                    cpf=coupling_factor(tr.post_warmup_snapshots(), g.centrality, p,
                                        catalog.sizes, empty=cfg.cpf_empty),
                    msgs_per_request=float(tr.msgs[w].mean()),
                    heuristic_steps=sum(s != "exact" for s in tr.status),
                    final=tr.snapshots[len(tr)],
                    overheads=overhead_report(g, policy, caps, paths).to_dict(),
                )
            except Exception as exc:
                raise RuntimeError(f"sweep cell K={K} r={r} repetition={rep} failed: {exc}") from exc
            out[(K, r)].overheads["observed_msgs_per_request"] = out[(K, r)].msgs_per_request
    return {"seeds": seeds, "topology": g, "cells": out}


def _mean_se(values):
    a = np.asarray(values, dtype=float)
    se = float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else 0.0
    return float(a.mean()), se


def run_sweep(cfg):
    """Simulate every (K, r) cell for every repetition and aggregate.

    Repetitions may run in worker processes; results are reduced in
    repetition order, so the outcome does not depend on scheduling.
    """
    reps = range(cfg.repetitions)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_repetition, [cfg] * cfg.repetitions, reps))
    else:
        results = [_run_repetition(cfg, rep) for rep in reps]
    grid, runs = {}, {}
    for K in cfg.k_values:
        for r in cfg.r_values:
            cell = [res["cells"][(K, r)] for res in results]
            bhr, se_b = _mean_se([c.bhr for c in cell])
            fpr, se_f = _mean_se([c.fpr for c in cell])
            cpf, se_c = _mean_se([c.cpf for c in cell])
            grid[(K, r)] = ParetoPoint(K, r, bhr, fpr, cpf, len(cell), se_b, se_f, se_c)
            runs[(K, r)] = cell
    result = SweepResult(
        config=cfg, grid=grid, runs=runs,
        instances=[{"seeds": res["seeds"], "topology": res["topology"]} for res in results],
        popularity=zipf_popularity(cfg.n_items, cfg.alpha, cfg.q),
        sizes=build_catalog(cfg.n_items, uniform_bytes=cfg.item_size).sizes)
    result.frontier = pareto_front(list(grid.values()))
    return result


def _points(result_or_points):
    if isinstance(result_or_points, SweepResult):
        return list(result_or_points.grid.values()), result_or_points.frontier
    pts = list(result_or_points)
    return pts, pareto_front(pts)


def corner_points(result):
    """Operational corners of the explored region.

    A is the (smallest K, smallest r) cell, B the frontier point with the
    highest BHR, C the one with the highest FPR and D the one whose CPF is
    closest to zero. Ties go to the smaller (K, r).
    """
    pts, front = _points(result)
    a = min(pts, key=lambda q: (q.K, q.r))
    b = max(front, key=lambda q: (q.bhr, -q.K, -q.r))
    c = max(front, key=lambda q: (q.fpr, -q.K, -q.r))
    d = min(front, key=lambda q: (abs(q.cpf), q.K, q.r))
    return {"A": a, "B": b, "C": c, "D": d}


def boundary_path(result):
    """Cells visited along A -> B -> C -> A.

    A -> B raises r at the smallest K, B -> C walks the frontier by
    decreasing BHR and C -> A lowers K at the smallest r.
    """
    pts, front = _points(result)
    by_cell = {(q.K, q.r): q for q in pts}
    ks = sorted({q.K for q in pts})
    rs = sorted({q.r for q in pts})
    ab = [by_cell[(ks[0], r)] for r in rs if (ks[0], r) in by_cell]
    bc = sorted(front, key=lambda q: (-q.bhr, q.K, q.r))
    ca = [by_cell[(k, rs[0])] for k in reversed(ks) if (k, rs[0]) in by_cell]
    return [("AB", q) for q in ab] + [("BC", q) for q in bc] + [("CA", q) for q in ca]


def top_items(p, top_fraction):
    """Boolean mask of the most popular items holding ``top_fraction`` of the mass.

    An item is flagged when the mass of all strictly more popular items is
    below the target, so the most popular item is always flagged.
    """
    if not 0 < top_fraction <= 1:
        raise ParameterError("top_fraction must be in (0, 1]")
    p = np.asarray(p, dtype=float)
    order = np.argsort(-p, kind="stable")
    before = np.concatenate(([0.0], np.cumsum(p[order])[:-1]))
    mask = np.zeros(p.size, dtype=bool)
    mask[order] = before < top_fraction * p.sum() * (1 - 1e-12)
    if top_fraction == 1:
        mask[:] = True
    return mask


def tertile_shares(snapshot, centrality, p, sizes, top_fraction=0.1):
    """Share of cached top-popularity bytes held by each centrality tertile."""
    m = snapshot.n_routers
    groups = centrality_tertiles(centrality)
    top = top_items(p, top_fraction)
    held = snapshot.x[top, :m]
    bytes_per_router = np.asarray(sizes)[top] @ held
    shares = np.array([bytes_per_router[groups == t].sum() for t in range(3)], dtype=float)
    total = shares.sum()
    return shares / total if total > 0 else shares


def _fmt(v):
    return repr(float(v))


def export_heatmaps(result, path):
    """Write ``bhr.csv``, ``fpr.csv`` and ``cpf.csv`` (rows K, columns r)."""
    os.makedirs(path, exist_ok=True)
    cfg = result.config
    files = []
    for metric in ("bhr", "fpr", "cpf"):
        name = os.path.join(path, f"{metric}.csv")
        with open(name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K\\r", *cfg.r_values])
            for K in cfg.k_values:
                w.writerow([K, *(_fmt(getattr(result.grid[(K, r)], metric)) for r in cfg.r_values)])
        files.append(name)
    return files


def read_heatmap(name):
    """Parse a heatmap CSV back into ``{(K, r): value}``."""
    with open(name, newline="") as fh:
        rows = list(csv.reader(fh))
    rs = [int(v) for v in rows[0][1:]]
    return {(int(row[0]), r): float(v) for row in rows[1:] for r, v in zip(rs, row[1:])}


def export_placement_map(snapshot, centrality, p, top_fraction, path):
    """Write one CSV row per cached copy: router, centrality, tertile, item, popularity, top flag."""
    top = top_items(p, top_fraction)
    groups = centrality_tertiles(centrality)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["router", "c_b", "c_b_group", "item", "p_i", "is_top"])
        for k in range(snapshot.n_routers):
            for i in snapshot.cached(k):
                w.writerow([k, _fmt(centrality[k]), int(groups[k]), i, _fmt(p[i]), int(top[i])])
    return path


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _point_row(q):
    return [q.K, q.r, _fmt(q.bhr), _fmt(q.fpr), _fmt(q.cpf), q.reps,
            _fmt(q.se_bhr), _fmt(q.se_fpr), _fmt(q.se_cpf)]


_POINT_HEADER = ["K", "r", "bhr", "fpr", "cpf", "reps", "se_bhr", "se_fpr", "se_cpf"]


def write_frontier(points, out):
    """Write ``frontier.csv``, ``corners.json`` and ``boundary.csv`` for a set of points."""
    front = pareto_front(points)
    with open(os.path.join(out, "frontier.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_POINT_HEADER)
        for q in front:
            w.writerow(_point_row(q))
    corners = corner_points(points)
    with open(os.path.join(out, "corners.json"), "w") as fh:
        fh.write(_dump({name: asdict(q) for name, q in corners.items()}))
    with open(os.path.join(out, "boundary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment", *_POINT_HEADER])
        for seg, q in boundary_path(points):
            w.writerow([seg, *_point_row(q)])
    return corners


def write_sweep(result, out, top_fraction=0.1):
    """Write every sweep artifact into directory ``out``.

    Outputs are heatmap CSVs, the frontier, corner and boundary files, one
    MetricsReport JSON per cell, placement maps for the corners (first
    repetition's final placement) and a manifest.
    """
    cfg = result.config
    os.makedirs(os.path.join(out, "cells"), exist_ok=True)
    os.makedirs(os.path.join(out, "placement"), exist_ok=True)
    export_heatmaps(result, out)
    for (K, r) in result.grid:
        with open(os.path.join(out, "cells", f"K{K}_r{r}.json"), "w") as fh:
            fh.write(_dump(asdict(result.report(K, r))))
    corners = write_frontier(list(result.grid.values()), out)
    c_b = result.instances[0]["topology"].centrality
    for name, q in corners.items():
        snap = result.runs[(q.K, q.r)][0].final
        export_placement_map(snap, c_b, result.popularity, top_fraction,
                             os.path.join(out, "placement", f"{name}_K{q.K}_r{q.r}.csv"))
    manifest = {
        "config": cfg.manifest_dict(),
        "seeds": [inst["seeds"] for inst in result.instances],
        "boundary_traversal": "AB: r ascending at min K; BC: frontier by decreasing BHR; "
                              "CA: K descending at min r",
        "versions": {"coopcache": __version__, "numpy": np.__version__,
                     "networkx": nx.__version__, "python": platform.python_version()},
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        fh.write(_dump(manifest))
    return out


def load_cell_reports(directory):
    """Read the per-cell MetricsReport JSON files of a sweep directory."""
    cells = os.path.join(directory, "cells")
    pts = []
    for name in sorted(os.listdir(cells)):
        if name.endswith(".json"):
            with open(os.path.join(cells, name)) as fh:
                d = json.load(fh)
            pts.append(ParetoPoint(d["K"], d["r"], d["bhr"], d["fpr"], d["cpf"], d["reps"],
                                   d["se_bhr"], d["se_fpr"], d["se_cpf"]))
    return sorted(pts, key=lambda q: (q.K, q.r))
