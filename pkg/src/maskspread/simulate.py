"""Agent-based Monte-Carlo of the spreading process by directed bond
percolation, plus an exact enumeration oracle for tiny graphs.

Spreading semantics are semi-directed: every non-loop edge carries two
independent directed transmission attempts, one per direction, and the
attempt u -> v succeeds with the matrix entry indexed (type of u, type of v)
of its layer.  Parallel edges are independent transmission opportunities;
self-loops are skipped.  Because each directed attempt happens at most once,
the final infected set equals the set reachable from the seed in the
percolated directed graph, which is how trials are executed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from .model import MaskSet, ScenarioConfig, TransmissibilityMatrices, build_transmissibility
from .netgen import MultilayerGraph, as_generator, dump_graph, generate_multilayer, read_dump

__all__ = [
    "OutbreakOutcome",
    "TrialSummary",
    "OracleResult",
    "assign_masks",
    "spread_from_seed",
    "spread_many",
    "run_trials",
    "exact_small_graph_oracle",
    "oracle_crosscheck",
    "dump_fixture",
    "load_fixture",
]

_SMALL_GRAPH_N = 512  # below this, plain-Python BFS beats building a sparse matrix


def assign_masks(n: int, masks: MaskSet, rng_seed) -> np.ndarray:
    """I.i.d. categorical mask types (0-based) for all n nodes."""
    rng = as_generator(rng_seed)
    return rng.choice(masks.n_types, size=n, p=masks.m).astype(np.int64)


@dataclass(frozen=True)
class OutbreakOutcome:
    """Final state of one trial; the seed is always infected."""

    infected_total: int
    infected_by_type: np.ndarray
    is_epidemic: bool
    seed_type: int
    n: int
    type_counts: np.ndarray


def _arc_arrays(graph: MultilayerGraph):
    """Both directions of every non-loop edge, tagged by layer."""
    srcs, dsts, school = [], [], []
    for edges, is_school in ((graph.edges_c, False), (graph.edges_s, True)):
        if edges.size == 0:
            continue
        keep = edges[:, 0] != edges[:, 1]
        u, v = edges[keep, 0], edges[keep, 1]
        srcs.extend((u, v))
        dsts.extend((v, u))
        school.append(np.full(2 * u.size, is_school))
    if not srcs:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0, dtype=bool)
    return np.concatenate(srcs), np.concatenate(dsts), np.concatenate(school)


def _transmit_probs(src, dst, school, assignment, T: TransmissibilityMatrices):
    ti, tj = assignment[src], assignment[dst]
    return np.where(school, T.ts[ti, tj], T.tc[ti, tj])


def _reach(n, src, dst, seed_node):
    """Nodes reachable from the seed along open arcs."""
    if n <= _SMALL_GRAPH_N:
        adj = [[] for _ in range(n)]
        for s, d in zip(src.tolist(), dst.tolist()):
            adj[s].append(d)
        visited = np.zeros(n, dtype=bool)
        visited[seed_node] = True
        stack = [int(seed_node)]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not visited[v]:
                    visited[v] = True
                    stack.append(v)
        return np.flatnonzero(visited)
    if src.size == 0:
        return np.array([seed_node], dtype=np.int64)
    g = csr_matrix((np.ones(src.size, dtype=np.int8), (src, dst)), shape=(n, n))
    return breadth_first_order(g, int(seed_node), directed=True, return_predecessors=False)


def _outcome(graph, assignment, reached, seed_node, emergence_threshold, n_types):
    by_type = np.bincount(assignment[reached], minlength=n_types)
    total = int(reached.size)
    return OutbreakOutcome(
        infected_total=total,
        infected_by_type=by_type,
        is_epidemic=total >= emergence_threshold * graph.n,
        seed_type=int(assignment[seed_node]),
        n=graph.n,
        type_counts=np.bincount(assignment, minlength=n_types),
    )


def _spread_with_uniforms(graph, assignment, T, seed_node, uniforms, emergence_threshold):
    # exposed for monotone-coupling tests: fixing the per-attempt uniforms
    # and raising any matrix entry can only grow the open arc set
    src, dst, school = _arc_arrays(graph)
    p = _transmit_probs(src, dst, school, assignment, T)
    open_mask = uniforms < p
    reached = _reach(graph.n, src[open_mask], dst[open_mask], seed_node)
    return _outcome(graph, assignment, reached, seed_node, emergence_threshold, T.tc.shape[0])


def spread_from_seed(
    graph: MultilayerGraph,
    assignment: np.ndarray,
    T: TransmissibilityMatrices,
    seed_node: int,
    rng_seed,
    emergence_threshold: float = 0.05,
) -> OutbreakOutcome:
    """Run one outbreak from ``seed_node`` (SIR single pass)."""
    rng = as_generator(rng_seed)
    src, _, _ = _arc_arrays(graph)
    uniforms = rng.random(src.size)
    return _spread_with_uniforms(graph, assignment, T, seed_node, uniforms, emergence_threshold)


def spread_many(
    graph: MultilayerGraph,
    assignment: np.ndarray,
    T: TransmissibilityMatrices,
    seed_node: int,
    runs: int,
    rng_seed,
) -> np.ndarray:
    """Final outbreak sizes of ``runs`` independent spreads from one seed.

    Identical per-run semantics to :func:`spread_from_seed`, with the arc
    bookkeeping hoisted out of the loop; meant for hammering small fixtures.
    """
    rng = as_generator(rng_seed)
    src, dst, school = _arc_arrays(graph)
    p = _transmit_probs(src, dst, school, assignment, T)
    adj = [[] for _ in range(graph.n)]
    for a, (s, d) in enumerate(zip(src.tolist(), dst.tolist())):
        adj[s].append((a, d))
    sizes = np.empty(runs, dtype=np.int64)
    for r in range(runs):
        open_mask = rng.random(p.size) < p
        visited = [False] * graph.n
        visited[seed_node] = True
        stack = [int(seed_node)]
        count = 1
        while stack:
            u = stack.pop()
            for a, v in adj[u]:
                if open_mask[a] and not visited[v]:
                    visited[v] = True
                    count += 1
                    stack.append(v)
        sizes[r] = count
    return sizes


# ---------------------------------------------------------------------------
# Trial runner


@dataclass(frozen=True)
class TrialSummary:
    """Aggregates over independent trials.

    ``es_*`` fields are conditioned on trials that crossed the emergence
    threshold and are None when no trial did.  ``pe_se`` is the binomial
    standard error sqrt(p (1-p) / trials).
    """

    trials: int
    n_epidemic: int
    pe_hat: float
    pe_se: float
    es_hat: float | None
    es_se: float | None
    es_by_type_hat: np.ndarray | None
    es_by_type_se: np.ndarray | None
    mean_size_unconditional: float


def _one_trial(cfg: ScenarioConfig, entropy: tuple, index: int):
    ss = np.random.SeedSequence(entropy + (index,))
    ss_graph, ss_masks, ss_seed, ss_coins = ss.spawn(4)
    graph = generate_multilayer(cfg, np.random.default_rng(ss_graph))
    assignment = assign_masks(cfg.n, cfg.masks, np.random.default_rng(ss_masks))
    seed_node = int(np.random.default_rng(ss_seed).integers(cfg.n))
    out = spread_from_seed(
        graph,
        assignment,
        build_transmissibility(cfg),
        seed_node,
        np.random.default_rng(ss_coins),
        emergence_threshold=cfg.emergence_threshold,
    )
    return (
        out.is_epidemic,
        out.infected_total,
        tuple(int(x) for x in out.infected_by_type),
        tuple(int(x) for x in out.type_counts),
    )


def _trial_chunk(args):
    cfg, entropy, start, stop = args
    return [(i, _one_trial(cfg, entropy, i)) for i in range(start, stop)]


def _as_entropy(master_seed) -> tuple:
    if isinstance(master_seed, (int, np.integer)):
        return (int(master_seed),)
    return tuple(int(x) for x in master_seed)


def run_trials(cfg: ScenarioConfig, trials: int, master_seed, workers: int = 1) -> TrialSummary:
    """Independent trials, each regenerating graph, masks, seed node, spread.

    Per-trial seeds derive from (master_seed, trial index) only, and results
    are reduced in trial order, so the summary is bit-identical for any
    worker count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    entropy = _as_entropy(master_seed)
    M = cfg.masks.n_types
    results: list = [None] * trials
    if workers <= 1:
        for i in range(trials):
            results[i] = _one_trial(cfg, entropy, i)
    else:
        chunk = max(1, math.ceil(trials / (workers * 8)))
        tasks = [
            (cfg, entropy, start, min(start + chunk, trials))
            for start in range(0, trials, chunk)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for batch in pool.map(_trial_chunk, tasks):
                for i, res in batch:
                    results[i] = res
    is_epi = np.array([r[0] for r in results], dtype=bool)
    totals = np.array([r[1] for r in results], dtype=np.int64)
    by_type = np.array([r[2] for r in results], dtype=np.int64)
    type_counts = np.array([r[3] for r in results], dtype=np.int64)

    n_epi = int(np.count_nonzero(is_epi))
    pe_hat = n_epi / trials
    pe_se = math.sqrt(pe_hat * (1.0 - pe_hat) / trials)
    mean_uncond = float(totals.mean()) / cfg.n
    if n_epi == 0:
        return TrialSummary(trials, 0, pe_hat, pe_se, None, None, None, None, mean_uncond)
    sizes = totals[is_epi] / cfg.n
    es_hat = float(sizes.mean())
    es_se = float(sizes.std(ddof=1) / math.sqrt(n_epi)) if n_epi > 1 else 0.0
    with np.errstate(invalid="ignore"):
        fracs = by_type[is_epi] / type_counts[is_epi]  # 0/0 -> nan where a type is absent
    es_by_type = np.full(M, math.nan)
    es_by_type_se = np.zeros(M)
    for i in range(M):
        col = fracs[:, i]
        col = col[~np.isnan(col)]
        if col.size:
            es_by_type[i] = float(col.mean())
            if col.size > 1:
                es_by_type_se[i] = float(col.std(ddof=1) / math.sqrt(col.size))
    return TrialSummary(
        trials=trials,
        n_epidemic=n_epi,
        pe_hat=pe_hat,
        pe_se=pe_se,
        es_hat=es_hat,
        es_se=es_se,
        es_by_type_hat=es_by_type,
        es_by_type_se=es_by_type_se,
        mean_size_unconditional=mean_uncond,
    )


# ---------------------------------------------------------------------------
# Exact enumeration oracle


@dataclass(frozen=True)
class OracleResult:
    """Exact per-seed outbreak statistics from full enumeration."""

    mean_size: np.ndarray
    size_second_moment: np.ndarray
    exceed_prob: np.ndarray
    threshold_count: int


def exact_small_graph_oracle(
    graph: MultilayerGraph,
    assignment: np.ndarray,
    T: TransmissibilityMatrices,
    threshold_count: int,
) -> OracleResult:
    """Ground truth for the percolation semantics by brute force.

    Enumerates all 2**(2E) open/closed patterns of directed attempts, weights
    each by its product probability, and accumulates the exact expected
    outbreak size, its second moment, and P[size >= threshold_count] for
    every seed node.  Requires 2 * (|edges_c| + |edges_s|) <= 24; cost grows
    as 2**(2E), so keep fixtures well under the cap.
    """
    n_arcs_raw = 2 * (graph.edges_c.shape[0] + graph.edges_s.shape[0])
    if n_arcs_raw > 24:
        raise ValueError(f"too many directed attempts for enumeration: {n_arcs_raw} > 24")
    src, dst, school = _arc_arrays(graph)
    p = _transmit_probs(src, dst, school, assignment, T)
    A = src.size

    active = np.unique(np.concatenate([src, dst])) if A else np.array([], dtype=np.int64)
    local = {int(u): i for i, u in enumerate(active)}
    src_l = np.array([local[int(u)] for u in src], dtype=np.int64)
    dst_l = np.array([local[int(v)] for v in dst], dtype=np.int64)
    na = active.size

    mean = np.zeros(graph.n)
    second = np.zeros(graph.n)
    exceed = np.zeros(graph.n)
    # isolated nodes (or any seed with all arcs elsewhere) infect only themselves
    mean[:] = 1.0
    second[:] = 1.0
    exceed[:] = 1.0 if 1 >= threshold_count else 0.0

    if A == 0:
        return OracleResult(mean, second, exceed, threshold_count)

    chunk_bits = min(A, 16)
    n_configs = 1 << A
    arange_a = np.arange(A)
    for base in range(0, n_configs, 1 << chunk_bits):
        ids = np.arange(base, min(base + (1 << chunk_bits), n_configs), dtype=np.int64)
        bits = (ids[:, None] >> arange_a[None, :]) & 1  # (chunk, A)
        open_bits = bits.astype(bool)
        weights = np.prod(np.where(open_bits, p[None, :], 1.0 - p[None, :]), axis=1)
        for seed_pos, seed in enumerate(active):
            reach = np.zeros((ids.size, na), dtype=bool)
            reach[:, seed_pos] = True
            for _ in range(na):
                changed = False
                for a in range(A):
                    upd = reach[:, src_l[a]] & open_bits[:, a] & ~reach[:, dst_l[a]]
                    if upd.any():
                        reach[upd, dst_l[a]] = True
                        changed = True
                if not changed:
                    break
            sizes = reach.sum(axis=1)
            mean[seed] += float(weights @ (sizes - 1))
            second[seed] += float(weights @ (sizes**2 - 1))
            hit = (sizes >= threshold_count).astype(float) - float(1 >= threshold_count)
            exceed[seed] += float(weights @ hit)
    return OracleResult(mean, second, exceed, threshold_count)


@dataclass(frozen=True)
class CrosscheckResult:
    seed_node: int
    runs: int
    exact_mean: float
    mc_mean: float
    z_mean: float
    exact_exceed: float
    mc_exceed: float
    z_exceed: float
    passed: bool


def oracle_crosscheck(
    graph: MultilayerGraph,
    assignment: np.ndarray,
    T: TransmissibilityMatrices,
    threshold_count: int,
    runs: int,
    rng_seed,
    seed_node: int = 0,
    sigmas: float = 4.0,
) -> CrosscheckResult:
    """Compare Monte-Carlo estimates against the exact enumeration.

    Passes when both the mean outbreak size and the threshold-exceedance
    frequency fall within ``sigmas`` standard errors of the exact values
    (exact standard errors, from the enumerated variance).
    """
    exact = exact_small_graph_oracle(graph, assignment, T, threshold_count)
    sizes = spread_many(graph, assignment, T, seed_node, runs, rng_seed)
    mc_mean = float(sizes.mean())
    mc_exceed = float(np.count_nonzero(sizes >= threshold_count)) / runs

    ex_mean = float(exact.mean_size[seed_node])
    ex_var = max(float(exact.size_second_moment[seed_node]) - ex_mean**2, 0.0)
    ex_exceed = float(exact.exceed_prob[seed_node])

    def z(diff, var):
        se = math.sqrt(var / runs)
        if se == 0.0:
            return 0.0 if diff == 0.0 else math.inf
        return diff / se

    z_mean = z(mc_mean - ex_mean, ex_var)
    z_exceed = z(mc_exceed - ex_exceed, ex_exceed * (1.0 - ex_exceed))
    passed = abs(z_mean) <= sigmas and abs(z_exceed) <= sigmas
    return CrosscheckResult(
        seed_node, runs, ex_mean, mc_mean, z_mean, ex_exceed, mc_exceed, z_exceed, passed
    )


# ---------------------------------------------------------------------------
# Fixture files: edge-list dump plus a mask-assignment line


def dump_fixture(graph, assignment, path, alpha: float = float("nan"), seed: int = 0):
    dump_graph(graph, path, alpha=alpha, seed=seed)
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write("masks " + " ".join(str(int(t)) for t in assignment) + "\n")


def load_fixture(path):
    """Read a fixture file; returns (graph, assignment)."""
    d = read_dump(path)
    if d["masks"] is None:
        raise ValueError(f"fixture {path} is missing the masks line")
    if d["masks"].size != d["n"]:
        raise ValueError(f"fixture {path}: masks line length != n")
    members = np.zeros(d["n"], dtype=bool)
    if d["edges_s"].size:
        members[np.unique(d["edges_s"])] = True
    graph = MultilayerGraph(
        n=d["n"], edges_c=d["edges_c"], edges_s=d["edges_s"], school_members=members
    )
    return graph, d["masks"]
