"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line.  Tolerances are pinned here and nowhere else.

Run with ``pytest tests/test_acceptance.py -v -s``.  The Monte-Carlo
agreement criterion is the slow one (9 grid points x 1000 trials at
n = 10,000); it parallelizes across all available cores.
"""

import dataclasses
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from maskspread import (
    DegreePMF,
    MaskSet,
    ScenarioConfig,
    analyze,
    build_jacobian,
    build_transmissibility,
    load_fixture,
    oracle_crosscheck,
    run_trials,
    spectral_radius,
    with_axis_value,
)
from maskspread.harness import preset_sweep, run_sweep
from conftest import FIXTURE_DIR, bisect_root, make_scenario, random_scenario
from test_jacobian import fd_jacobian
from _single_layer import solve_single_layer

WORKERS = max(1, os.cpu_count() or 1)


def report(name: str, ok: bool, detail: str = ""):
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else ""))
    return ok


def test_analytic_simulation_agreement():
    """Mean-degree grid {2,4,6}^2: simulation within max(0.05, 4 SE) of the
    analytic PE and within 0.05 of the analytic ES at every point."""
    base = preset_sweep("figA").base  # m=[0.2,0.8], eps_out=[0.6,0], eps_in=[0.5,0]
    trials = 1000
    failures = []
    for md1 in (2.0, 4.0, 6.0):
        for md2 in (2.0, 4.0, 6.0):
            cfg = with_axis_value(with_axis_value(base, "md_c", md1), "md_s", md2)
            rep = analyze(cfg)
            sim = run_trials(cfg, trials, (2024, int(md1), int(md2)), workers=WORKERS)
            pe_tol = max(0.05, 4.0 * sim.pe_se)
            pe_ok = abs(sim.pe_hat - rep.pe_avg) <= pe_tol
            if sim.es_hat is None:
                es_ok = rep.es_total <= 0.05  # no epidemic trials observed
                es_diff = rep.es_total
            else:
                es_diff = abs(sim.es_hat - rep.es_total)
                es_ok = es_diff <= 0.05
            if not (pe_ok and es_ok):
                failures.append(
                    f"md=({md1},{md2}): pe {sim.pe_hat:.4f} vs {rep.pe_avg:.4f} "
                    f"(tol {pe_tol:.4f}), es diff {es_diff:.4f}"
                )
    ok = report(
        "analytic-simulation agreement on the mean-degree grid",
        not failures,
        f"9 points, {trials} trials each" + ("; " + "; ".join(failures) if failures else ""),
    )
    assert ok, failures


def test_masked_school_reopening_stays_subcritical():
    """High surgical-mask coverage: rho < 1 and PE < 1e-6 for every alpha,
    and no simulated epidemic in 500 trials per point."""
    base = preset_sweep("figB").base
    failures = []
    for m1 in (0.7, 0.9):
        for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
            cfg = with_axis_value(with_axis_value(base, "alpha", alpha), "m[0]", m1)
            rep = analyze(cfg)
            if not (rep.rho < 1.0 and rep.pe_avg < 1e-6):
                failures.append(f"analytic m1={m1} alpha={alpha}: rho={rep.rho:.4f}")
                continue
            sim = run_trials(cfg, 500, (77, int(10 * m1), int(10 * alpha)), workers=WORKERS)
            if sim.pe_hat != 0.0:
                failures.append(f"sim m1={m1} alpha={alpha}: pe_hat={sim.pe_hat}")
    ok = report(
        "high mask coverage keeps every school-openness level subcritical",
        not failures,
        "; ".join(failures),
    )
    assert ok, failures


def test_source_control_self_protection_tradeoff():
    """Sweeping mask mass from inward-good to outward-good: analytic PE
    nonincreasing and analytic ES nondecreasing (within 1e-9 per step)."""
    rows = run_sweep(preset_sweep("figC", mode="analytic"), master_seed=0)
    pes = [r.pe_analytic for r in rows]
    ess = [r.es_analytic for r in rows]
    pe_ok = all(pes[i + 1] - pes[i] <= 1e-9 for i in range(len(pes) - 1))
    es_ok = all(ess[i + 1] - ess[i] >= -1e-9 for i in range(len(ess) - 1))
    ok = report(
        "outward-good fraction trades emergence off against size",
        pe_ok and es_ok,
        f"pe {pes[0]:.4f}->{pes[-1]:.4f}, es {ess[0]:.4f}->{ess[-1]:.4f}",
    )
    assert ok


def test_closed_form_reductions():
    """(a) single-layer Poisson threshold; (b) the lam*T = 2 scalar fixed
    point; (c) school-closed scenarios match an independent one-layer solver."""
    problems = []

    # (a) M=1, no masks, alpha=0, Poisson(lam): rho = T * lam
    for lam, t in ((4.0, 1.0), (2.5, 0.3), (6.0, 0.17)):
        cfg = make_scenario(alpha=0.0, lam_c=lam, lam_s=1.0, tc=t, ts=0.9,
                            m=[1.0], eps_in=[0.0], eps_out=[0.0])
        rho = spectral_radius(build_jacobian(cfg, build_transmissibility(cfg)))
        if abs(rho - t * lam) > 1e-8:
            problems.append(f"(a) lam={lam} t={t}: rho={rho}")

    # (b) homogeneous lam*T = 2: pe and es equal the root of x = 1 - exp(-2x)
    root = bisect_root(lambda x: (1.0 - math.exp(-2.0 * x)) - x, 1e-9, 1.0)
    for lam_c, lam_s, t in ((1.0, 1.0, 1.0), (2.0, 2.0, 0.5), (3.0, 1.0, 0.5)):
        cfg = make_scenario(alpha=1.0, lam_c=lam_c, lam_s=lam_s, tc=t, ts=t,
                            m=[1.0], eps_in=[0.0], eps_out=[0.0])
        rep = analyze(cfg)
        if abs(rep.pe_avg - root) > 1e-6 or abs(rep.es_total - root) > 1e-6:
            problems.append(f"(b) ({lam_c},{lam_s},{t}): pe={rep.pe_avg} es={rep.es_total}")

    # (c) alpha = 0 equals the independent single-layer M-type solver
    rng = np.random.default_rng(4242)
    for _ in range(20):
        cfg = random_scenario(rng, alpha=0.0)
        rep = analyze(cfg)
        pe, rho, es = solve_single_layer(
            cfg.dist_c.pmf_array(), cfg.masks.m, build_transmissibility(cfg).tc
        )
        if (
            abs(rep.pe_avg - pe) > 1e-8
            or abs(rep.rho - rho) > 1e-8
            or abs(rep.es_total - es) > 1e-8
        ):
            problems.append(f"(c) diff pe={rep.pe_avg - pe:g} rho={rep.rho - rho:g}")

    ok = report("closed-form reductions (threshold, scalar root, single layer)",
                not problems, "; ".join(problems))
    assert ok, problems


def test_jacobian_finite_difference_oracle():
    """Closed-form Jacobian within 1e-4 relative of central differences on
    20 random scenarios covering M in {1,2,3} and alpha in {0, 0.5, 1}."""
    rng = np.random.default_rng(31415)
    alphas = [0.0, 0.5, 1.0]
    worst = 0.0
    for trial in range(20):
        cfg = random_scenario(rng, M=trial % 3 + 1, alpha=alphas[trial % 3])
        cfg = dataclasses.replace(cfg, engine=("poisson", "grid")[trial % 2])
        T = build_transmissibility(cfg)
        J = build_jacobian(cfg, T)
        J_fd = fd_jacobian(cfg, T)
        scale = max(1.0, float(np.abs(J_fd).max()))
        worst = max(worst, float(np.abs(J - J_fd).max()) / scale)
    ok = report("Jacobian matches finite differences", worst <= 1e-4, f"worst rel err {worst:.2e}")
    assert ok


def test_oracle_equivalence_on_fixtures():
    """Monte-Carlo over 1e5 runs within 4 sigma of exact enumeration for
    expected size and threshold exceedance, on all 5 stored fixtures."""
    from maskspread import load_scenario

    cfg = load_scenario(FIXTURE_DIR / "oracle_scenario.cfg")
    T = build_transmissibility(cfg)
    runs = 100_000
    failures = []
    for i, name in enumerate(("pair", "path4", "triangle", "parallel_loop", "star6")):
        graph, assignment = load_fixture(FIXTURE_DIR / f"{name}.txt")
        threshold = graph.n // 2 + 1
        res = oracle_crosscheck(graph, assignment, T, threshold, runs, (555, i))
        if not res.passed:
            failures.append(f"{name}: z_mean={res.z_mean:.2f} z_exceed={res.z_exceed:.2f}")
    ok = report("Monte-Carlo agrees with exact enumeration on all fixtures",
                not failures, "; ".join(failures))
    assert ok, failures


def test_sweep_byte_determinism(tmp_path):
    """The sweep CLI reproduces byte-identical CSV across repeated runs and
    across --threads 1 vs --threads 8."""
    sweep_file = tmp_path / "sweep.cfg"
    sweep_file.write_text(
        "[layers]\nn = 2000\nalpha = 0.5\ndist_c = poisson:4\ndist_s = poisson:4\n"
        "tc = 0.6\nts = 0.5\n"
        "[masks]\nm = 0.2, 0.8\neps_in = 0.5, 0\neps_out = 0.6, 0\n"
        "[run]\nemergence_threshold = 0.05\n"
        "[sweep]\naxis1 = md_c: 3, 5\naxis2 = alpha: 0.2, 0.8\ntrials = 25\nmode = both\n",
        encoding="utf-8",
    )
    outputs = []
    for tag, threads in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / f"{tag}.csv"
        proc = subprocess.run(
            [
                sys.executable, "-m", "maskspread", "sweep",
                "--config", str(sweep_file), "--out", str(out),
                "--seed", "20240817", "--threads", str(threads),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_bytes())
    ok = report(
        "sweep CSV is byte-identical across reruns and thread counts",
        outputs[0] == outputs[1] == outputs[2],
    )
    assert ok
