"""Scenario model for two-layer (community + school) contact networks with
mask-wearing heterogeneity.

A scenario bundles the per-layer degree distributions, the school-membership
probability alpha, the per-layer baseline transmissibilities and the mask mix
of the population.  Everything downstream (analytic solver, Monte-Carlo
simulator, sweep harness) consumes only quantities derived here: the pairwise
transmissibility matrices, the joint colored-degree distribution and its
moments.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "MaskSet",
    "DegreePMF",
    "ScenarioConfig",
    "TransmissibilityMatrices",
    "ColoredDegreePMF",
    "DegreeMoments",
    "ScenarioValidationError",
    "scenario_errors",
    "validate_scenario",
    "build_transmissibility",
    "colored_degree_pmf",
    "degree_moments",
    "parse_scenario",
    "load_scenario",
]


class ScenarioValidationError(ValueError):
    """A scenario violated one or more invariants.

    Carries the full list of violations in ``errors`` -- validation never
    stops at the first problem.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MaskSet:
    """Mask-type mix of the population.

    ``m[i]`` is the fraction wearing a type-i mask, ``eps_in[i]`` the
    probability the mask blocks an incoming droplet, ``eps_out[i]`` the
    probability it blocks an outgoing one.  "No mask" is an ordinary type
    with both efficiencies zero; nothing downstream special-cases it.
    Type indices are 0-based everywhere.
    """

    m: np.ndarray
    eps_in: np.ndarray
    eps_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", _frozen_array(self.m))
        object.__setattr__(self, "eps_in", _frozen_array(self.eps_in))
        object.__setattr__(self, "eps_out", _frozen_array(self.eps_out))

    @property
    def n_types(self) -> int:
        return int(self.m.shape[0])

    def errors(self) -> list[str]:
        errs = []
        if self.m.ndim != 1 or self.m.size == 0:
            return ["m must be a nonempty vector"]
        if self.eps_in.shape != self.m.shape or self.eps_out.shape != self.m.shape:
            errs.append("m, eps_in, eps_out must have the same length")
            return errs
        if np.any(self.m < 0.0):
            errs.append("mask fractions must be nonnegative")
        if abs(float(self.m.sum()) - 1.0) > 1e-12:
            errs.append(f"m does not sum to 1 (sum={float(self.m.sum())})")
        for name, eps in (("eps_in", self.eps_in), ("eps_out", self.eps_out)):
            if np.any(eps < 0.0) or np.any(eps > 1.0):
                errs.append(f"{name}: efficiency out of range [0, 1]")
        return errs


@dataclass(frozen=True)
class DegreePMF:
    """Degree distribution of one layer: Poisson(mean) or an explicit pmf.

    Poisson distributions are truncated on demand so that the discarded tail
    mass stays below ``tail_tolerance``; explicit pmfs are used as given.
    """

    kind: str  # "poisson" | "explicit"
    lam: float = 0.0
    p: np.ndarray | None = None
    tail_tolerance: float = 1e-10

    def __post_init__(self):
        if self.p is not None:
            object.__setattr__(self, "p", _frozen_array(self.p))

    @classmethod
    def poisson(cls, lam: float, tail_tolerance: float = 1e-10) -> "DegreePMF":
        return cls(kind="poisson", lam=float(lam), tail_tolerance=tail_tolerance)

    @classmethod
    def explicit(cls, p, tail_tolerance: float = 1e-10) -> "DegreePMF":
        return cls(kind="explicit", p=p, tail_tolerance=tail_tolerance)

    @classmethod
    def parse(cls, text: str, tail_tolerance: float = 1e-10) -> "DegreePMF":
        """Parse ``"poisson:<mean>"`` or ``"explicit:<p0,p1,...>"``."""
        head, _, body = text.partition(":")
        head = head.strip().lower()
        if head == "poisson":
            return cls.poisson(float(body), tail_tolerance)
        if head == "explicit":
            probs = [float(tok) for tok in body.split(",") if tok.strip()]
            return cls.explicit(probs, tail_tolerance)
        raise ValueError(f"unknown degree distribution {text!r}")

    def errors(self) -> list[str]:
        errs = []
        if self.kind == "poisson":
            if not (self.lam >= 0.0 and math.isfinite(self.lam)):
                errs.append(f"poisson mean must be finite and >= 0, got {self.lam}")
        elif self.kind == "explicit":
            if self.p is None or self.p.ndim != 1 or self.p.size == 0:
                return ["explicit pmf must be a nonempty vector"]
            if np.any(self.p < 0.0):
                errs.append("explicit pmf entries must be nonnegative")
            if abs(float(self.p.sum()) - 1.0) > 1e-9:
                errs.append(f"explicit pmf does not sum to 1 (sum={float(self.p.sum())})")
        else:
            errs.append(f"unknown degree distribution kind {self.kind!r}")
        if not (0.0 < self.tail_tolerance < 1.0):
            errs.append("tail_tolerance must be in (0, 1)")
        return errs

    def pmf_array(self) -> np.ndarray:
        """Probabilities over k = 0..k_max.

        For Poisson the truncation point is the smallest k_max whose discarded
        tail mass is below ``tail_tolerance``.
        """
        if self.kind == "explicit":
            return np.asarray(self.p, dtype=float)
        lam = self.lam
        if lam == 0.0:
            return np.array([1.0])
        terms = [math.exp(-lam)]
        total = terms[0]
        k = 0
        while 1.0 - total >= self.tail_tolerance:
            k += 1
            terms.append(terms[-1] * lam / k)
            total += terms[-1]
            if k > 1_000_000:  # unreachable for sane means; guards runaway loops
                raise RuntimeError("poisson truncation did not terminate")
        return np.array(terms)

    @property
    def mean(self) -> float:
        if self.kind == "poisson":
            return self.lam
        k = np.arange(self.p.size)
        return float(np.sum(k * self.p))

    @property
    def second_moment(self) -> float:
        if self.kind == "poisson":
            return self.lam + self.lam**2
        k = np.arange(self.p.size)
        return float(np.sum(k * k * self.p))

    @property
    def factorial_moment2(self) -> float:
        """E[k (k - 1)]."""
        return self.second_moment - self.mean


@dataclass(frozen=True)
class ScenarioConfig:
    """One full model instance.

    ``alpha`` is the probability a node also belongs to the school layer;
    alpha = 0 is the school-closed degenerate case and is allowed.  ``tc``
    and ``ts`` are the baseline (no-mask) transmissibilities per layer.
    The [run] options (``emergence_threshold``, solver ``tol``/``max_iter``
    and the sum ``engine``) ride along so that every consumer sees the same
    numerical settings.
    """

    n: int
    alpha: float
    dist_c: DegreePMF
    dist_s: DegreePMF
    tc: float
    ts: float
    masks: MaskSet
    emergence_threshold: float = 0.05
    tol: float = 1e-10
    max_iter: int = 100_000
    engine: str = "auto"  # auto | poisson | grid


def scenario_errors(cfg: ScenarioConfig) -> list[str]:
    """All invariant violations of ``cfg`` (empty list means valid)."""
    errs = []
    if not (isinstance(cfg.n, (int, np.integer)) and cfg.n >= 1):
        errs.append(f"n must be a positive integer, got {cfg.n!r}")
    if not (0.0 <= cfg.alpha <= 1.0):
        errs.append(f"alpha must be in [0, 1], got {cfg.alpha}")
    for name, t in (("tc", cfg.tc), ("ts", cfg.ts)):
        if not (0.0 <= t <= 1.0):
            errs.append(f"{name} must be in [0, 1], got {t}")
    for name, dist in (("dist_c", cfg.dist_c), ("dist_s", cfg.dist_s)):
        errs.extend(f"{name}: {e}" for e in dist.errors())
    errs.extend(cfg.masks.errors())
    if not (0.0 < cfg.emergence_threshold < 1.0):
        errs.append(f"emergence_threshold must be in (0, 1), got {cfg.emergence_threshold}")
    if not (cfg.tol > 0.0):
        errs.append("tol must be positive")
    if cfg.max_iter < 1:
        errs.append("max_iter must be >= 1")
    if cfg.engine not in ("auto", "poisson", "grid"):
        errs.append(f"engine must be auto|poisson|grid, got {cfg.engine!r}")
    elif cfg.engine == "poisson" and not (cfg.dist_c.kind == "poisson" and cfg.dist_s.kind == "poisson"):
        errs.append("engine=poisson requires both layers to be Poisson")
    return errs


def validate_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    """Return ``cfg`` unchanged if valid, else raise with all violations."""
    errs = scenario_errors(cfg)
    if errs:
        raise ScenarioValidationError(errs)
    return cfg


@dataclass(frozen=True)
class TransmissibilityMatrices:
    """Pairwise transmission probabilities per layer.

    ``tc[i, j]`` is the probability an infected type-i node transmits to a
    susceptible type-j neighbor over a community edge; ``ts`` likewise for
    school edges.  Entries factor as (1-eps_out[i]) (1-eps_in[j]) T_base, so
    both matrices are rank one.
    """

    tc: np.ndarray
    ts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tc", _frozen_array(self.tc))
        object.__setattr__(self, "ts", _frozen_array(self.ts))


def build_transmissibility(cfg: ScenarioConfig) -> TransmissibilityMatrices:
    """Mask-adjusted transmissibility matrices of a validated scenario."""
    out = 1.0 - cfg.masks.eps_out
    inc = 1.0 - cfg.masks.eps_in
    pair = np.outer(out, inc)
    return TransmissibilityMatrices(tc=pair * cfg.tc, ts=pair * cfg.ts)


class ColoredDegreePMF:
    """Joint law of (community degree, school degree) of a random node.

    The school marginal is zero-inflated: with probability 1-alpha the node
    is not a school member and k_s is 0; otherwise k_s follows the school
    layer's distribution.  The community degree is independent of membership.
    """

    def __init__(self, cfg: ScenarioConfig):
        self._p_c = cfg.dist_c.pmf_array()
        self._p_s = cfg.dist_s.pmf_array()
        self.alpha = cfg.alpha

    @property
    def kc_max(self) -> int:
        return self._p_c.size - 1

    @property
    def ks_max(self) -> int:
        return self._p_s.size - 1

    def prob(self, kc: int, ks: int) -> float:
        if kc < 0 or ks < 0 or kc > self.kc_max or ks > self.ks_max:
            return 0.0
        school = self.alpha * self._p_s[ks] + (1.0 - self.alpha) * (ks == 0)
        return float(self._p_c[kc] * school)

    def grid(self) -> np.ndarray:
        """Dense (kc_max+1, ks_max+1) matrix of joint probabilities."""
        g = np.outer(self._p_c, self.alpha * self._p_s)
        g[:, 0] += self._p_c * (1.0 - self.alpha)
        return g

    def marginal_c(self) -> np.ndarray:
        return self._p_c.copy()

    def marginal_s(self) -> np.ndarray:
        out = self.alpha * self._p_s.copy()
        out[0] += 1.0 - self.alpha
        return out


def colored_degree_pmf(cfg: ScenarioConfig) -> ColoredDegreePMF:
    return ColoredDegreePMF(cfg)


@dataclass(frozen=True)
class DegreeMoments:
    """Population-level moments of the colored degree distribution.

    ``mean_ks`` includes the zeros of non-members, i.e. alpha * E[dist_s];
    the cross moment factorizes because the layers are independent.
    """

    mean_kc: float
    mean_ks: float
    mean_kc2: float
    mean_ks2: float
    mean_kcks: float

    @property
    def has_community_edges(self) -> bool:
        return self.mean_kc > 0.0

    @property
    def has_school_edges(self) -> bool:
        """False means type-s edge equations must be skipped, not divided by zero."""
        return self.mean_ks > 0.0


def degree_moments(cfg: ScenarioConfig) -> DegreeMoments:
    mean_kc = cfg.dist_c.mean
    mean_ks = cfg.alpha * cfg.dist_s.mean
    return DegreeMoments(
        mean_kc=mean_kc,
        mean_ks=mean_ks,
        mean_kc2=cfg.dist_c.second_moment,
        mean_ks2=cfg.alpha * cfg.dist_s.second_moment,
        mean_kcks=mean_kc * mean_ks,
    )


# ---------------------------------------------------------------------------
# Scenario files
#
# Ini-style text with sections [layers], [masks], [run]; parsed identically
# by the CLI and the test harness.

def _parse_vector(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def parse_scenario(cp: configparser.ConfigParser) -> ScenarioConfig:
    """Build a (not yet validated) scenario from a parsed config file."""
    layers = cp["layers"]
    masks = cp["masks"]
    run = cp["run"] if cp.has_section("run") else {}

    tail = float(run.get("tail_tolerance", 1e-10))
    cfg = ScenarioConfig(
        n=int(layers["n"]),
        alpha=float(layers["alpha"]),
        dist_c=DegreePMF.parse(layers["dist_c"], tail),
        dist_s=DegreePMF.parse(layers["dist_s"], tail),
        tc=float(layers["tc"]),
        ts=float(layers["ts"]),
        masks=MaskSet(
            m=_parse_vector(masks["m"]),
            eps_in=_parse_vector(masks["eps_in"]),
            eps_out=_parse_vector(masks["eps_out"]),
        ),
        emergence_threshold=float(run.get("emergence_threshold", 0.05)),
        tol=float(run.get("tol", 1e-10)),
        max_iter=int(run.get("max_iter", 100_000)),
        engine=str(run.get("engine", "auto")).strip(),
    )
    return cfg


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path, "r", encoding="utf-8") as fh:
        cp.read_file(fh)
    return validate_scenario(parse_scenario(cp))


def with_axis_value(cfg: ScenarioConfig, path: str, value: float) -> ScenarioConfig:
    """Return a copy of ``cfg`` with one numeric parameter replaced.

    Supported paths: ``alpha``, ``tc``, ``ts``, ``md_c``/``md_s`` (Poisson
    mean degrees), ``eps_in[i]``/``eps_out[i]``, and mask fractions:

    * ``m[i]``       -- set fraction i, re-normalizing the others
                        proportionally;
    * ``m[i]/m[j]``  -- set fraction i, absorbing the change into fraction j
                        only (the rest stay fixed).
    """
    path = path.strip()
    value = float(value)
    if path == "alpha":
        return replace(cfg, alpha=value)
    if path == "tc":
        return replace(cfg, tc=value)
    if path == "ts":
        return replace(cfg, ts=value)
    if path in ("md_c", "md_s"):
        attr = "dist_c" if path == "md_c" else "dist_s"
        dist = getattr(cfg, attr)
        if dist.kind != "poisson":
            raise ValueError(f"{path} requires a Poisson layer, got {dist.kind}")
        return replace(cfg, **{attr: replace(dist, lam=value)})
    if path.startswith(("eps_in[", "eps_out[")):
        field, idx = path[:-1].split("[")
        i = int(idx)
        vec = np.array(getattr(cfg.masks, field))
        vec[i] = value
        return replace(cfg, masks=replace(cfg.masks, **{field: vec}))
    if path.startswith("m["):
        m = np.array(cfg.masks.m)
        if "/" in path:
            left, right = path.split("/")
            i = int(left[2:-1])
            if not right.startswith("m[") or not right.endswith("]"):
                raise ValueError(f"bad mask axis path {path!r}")
            j = int(right[2:-1])
            m[j] += m[i] - value
            m[i] = value
            if m[j] < -1e-12:
                raise ValueError(f"mask axis {path}={value} drives m[{j}] below 0")
            m[j] = max(m[j], 0.0)
        else:
            i = int(path[2:-1])
            rest = 1.0 - m[i]
            if rest <= 0.0:
                raise ValueError(f"cannot re-normalize around m[{i}] = {m[i]}")
            scale = (1.0 - value) / rest
            m *= scale
            m[i] = value
        return replace(cfg, masks=replace(cfg.masks, m=m))
    raise ValueError(f"unknown parameter path {path!r}")
