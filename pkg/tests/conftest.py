import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for _single_layer

from maskspread import DegreePMF, MaskSet, ScenarioConfig

FIXTURE_DIR = Path(__file__).parent / "fixtures"


def make_scenario(
    n=10_000,
    alpha=0.5,
    lam_c=6.0,
    lam_s=8.0,
    tc=0.6,
    ts=0.5,
    m=(0.2, 0.8),
    eps_in=(0.5, 0.0),
    eps_out=(0.6, 0.0),
    **kwargs,
):
    return ScenarioConfig(
        n=n,
        alpha=alpha,
        dist_c=DegreePMF.poisson(lam_c),
        dist_s=DegreePMF.poisson(lam_s),
        tc=tc,
        ts=ts,
        masks=MaskSet(m=m, eps_in=eps_in, eps_out=eps_out),
        **kwargs,
    )


def random_scenario(rng, M=None, alpha=None, engine="auto", n=1000):
    """A random valid scenario for property tests."""
    M = M if M is not None else int(rng.integers(1, 4))
    alpha = alpha if alpha is not None else float(rng.uniform(0.0, 1.0))
    return ScenarioConfig(
        n=n,
        alpha=alpha,
        dist_c=DegreePMF.poisson(float(rng.uniform(0.5, 8.0))),
        dist_s=DegreePMF.poisson(float(rng.uniform(0.5, 8.0))),
        tc=float(rng.uniform(0.05, 1.0)),
        ts=float(rng.uniform(0.05, 1.0)),
        masks=MaskSet(
            m=rng.dirichlet(np.ones(M)),
            eps_in=rng.uniform(0.0, 1.0, M),
            eps_out=rng.uniform(0.0, 1.0, M),
        ),
        engine=engine,
    )


def bisect_root(f, lo, hi, iters=200):
    """Scalar bisection; assumes f(lo) and f(hi) bracket a sign change."""
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
