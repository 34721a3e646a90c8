"""Configuration-model generation of finite two-layer contact networks.

The community layer spans all n nodes; the school layer spans an independent
Bernoulli(alpha) subset.  Each layer draws degrees from its own distribution
and matches stubs uniformly at random, independently of the other layer.
Self-loops and parallel edges are kept (they are standard configuration-model
artifacts and asymptotically rare); consumers decide how to treat them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DegreePMF, ScenarioConfig

__all__ = [
    "MultilayerGraph",
    "sample_colored_degrees",
    "pair_stubs",
    "generate_multilayer",
    "dump_graph",
    "load_graph",
]

_PARITY_REDRAW_LIMIT = 10_000


def as_generator(rng_seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or an existing Generator."""
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


@dataclass(frozen=True)
class MultilayerGraph:
    """Finite two-layer graph: edge lists per layer plus school membership.

    Edges are unordered node pairs stored as (E, 2) integer arrays.  Every
    endpoint of a school edge is a school member by construction.
    """

    n: int
    edges_c: np.ndarray
    edges_s: np.ndarray
    school_members: np.ndarray

    def __post_init__(self):
        for name in ("edges_c", "edges_s", "school_members"):
            arr = np.asarray(getattr(self, name))
            arr = arr.reshape(0, 2) if name != "school_members" and arr.size == 0 else arr
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _draw_degrees(dist: DegreePMF, size: int, rng: np.random.Generator) -> np.ndarray:
    if dist.kind == "poisson":
        return rng.poisson(dist.lam, size=size).astype(np.int64)
    return rng.choice(dist.p.size, size=size, p=dist.p).astype(np.int64)


def _fix_parity(degrees, dist, eligible, rng):
    # Redraw one uniformly chosen eligible node's degree until the stub sum
    # is even.  Preserves the target distribution asymptotically.
    if eligible.size == 0:
        return
    attempts = 0
    while int(degrees.sum()) % 2 == 1:
        attempts += 1
        if attempts > _PARITY_REDRAW_LIMIT:
            raise RuntimeError(
                "cannot reach an even stub sum by redrawing; the degree "
                "distribution admits no even-parity configuration"
            )
        node = eligible[rng.integers(eligible.size)]
        degrees[node] = _draw_degrees(dist, 1, rng)[0]


def sample_colored_degrees(cfg: ScenarioConfig, rng_seed):
    """Draw per-node (community, school) degrees and school membership.

    Non-members get school degree 0.  Each layer's stub sum is forced even
    by the redraw rule above.  Returns (degrees_c, degrees_s, members).
    """
    rng = as_generator(rng_seed)
    degrees_c = _draw_degrees(cfg.dist_c, cfg.n, rng)
    _fix_parity(degrees_c, cfg.dist_c, np.arange(cfg.n), rng)
    members = rng.random(cfg.n) < cfg.alpha
    degrees_s = np.zeros(cfg.n, dtype=np.int64)
    member_idx = np.flatnonzero(members)
    degrees_s[member_idx] = _draw_degrees(cfg.dist_s, member_idx.size, rng)
    _fix_parity(degrees_s, cfg.dist_s, member_idx, rng)
    return degrees_c, degrees_s, members


def pair_stubs(degrees, rng_seed) -> np.ndarray:
    """Uniform random perfect matching on the stub multiset.

    Node i appears in exactly degrees[i] edge endpoints.  Requires an even
    stub sum (guaranteed after the parity fix).
    """
    degrees = np.asarray(degrees, dtype=np.int64)
    if int(degrees.sum()) % 2 == 1:
        raise ValueError("stub sum is odd; parity fix must run first")
    rng = as_generator(rng_seed)
    stubs = np.repeat(np.arange(degrees.size, dtype=np.int64), degrees)
    rng.shuffle(stubs)
    return stubs.reshape(-1, 2)


def generate_multilayer(cfg: ScenarioConfig, rng_seed) -> MultilayerGraph:
    """Sample one two-layer graph; deterministic given the seed."""
    rng = as_generator(rng_seed)
    degrees_c, degrees_s, members = sample_colored_degrees(cfg, rng)
    edges_c = pair_stubs(degrees_c, rng)
    edges_s = pair_stubs(degrees_s, rng)
    return MultilayerGraph(n=cfg.n, edges_c=edges_c, edges_s=edges_s, school_members=members)


def dump_graph(graph: MultilayerGraph, path, alpha: float = float("nan"), seed: int = 0):
    """Write the plain-text edge-list dump: header ``n alpha seed``, then one
    edge per line ``u v c|s``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{graph.n} {alpha!r} {seed}\n")
        for u, v in graph.edges_c:
            fh.write(f"{u} {v} c\n")
        for u, v in graph.edges_s:
            fh.write(f"{u} {v} s\n")


def read_dump(path) -> dict:
    """Parse an edge-list dump; tolerates a trailing ``masks ...`` line
    (appended by simulator fixture files).

    Returns a dict with n, alpha, seed, edges_c, edges_s and masks (an int
    array of per-node mask types, or None when absent).
    """
    edges_c, edges_s = [], []
    masks = None
    with open(path, "r", encoding="utf-8") as fh:
        n_str, alpha_str, seed_str = fh.readline().split()
        n, alpha, seed = int(n_str), float(alpha_str), int(seed_str)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "masks":
                masks = np.array([int(tok) for tok in parts[1:]], dtype=np.int64)
                continue
            u, v, tag = parts
            (edges_c if tag == "c" else edges_s).append((int(u), int(v)))
    return {
        "n": n,
        "alpha": alpha,
        "seed": seed,
        "edges_c": np.array(edges_c, dtype=np.int64).reshape(-1, 2),
        "edges_s": np.array(edges_s, dtype=np.int64).reshape(-1, 2),
        "masks": masks,
    }


def load_graph(path):
    """Inverse of :func:`dump_graph`.

    Returns (graph, alpha, seed).  School membership is reconstructed from
    school-edge endpoints; members whose school degree is 0 are not
    representable in this format.
    """
    d = read_dump(path)
    members = np.zeros(d["n"], dtype=bool)
    if d["edges_s"].size:
        members[np.unique(d["edges_s"])] = True
    graph = MultilayerGraph(
        n=d["n"], edges_c=d["edges_c"], edges_s=d["edges_s"], school_members=members
    )
    return graph, d["alpha"], d["seed"]
