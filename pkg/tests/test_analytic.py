import dataclasses
import math

import numpy as np
import pytest

from maskspread import (
    ConvergenceError,
    DegreePMF,
    ExtinctionState,
    MaskSet,
    ScenarioConfig,
    SizeState,
    analyze,
    build_jacobian,
    build_transmissibility,
    critical_scaling,
    emergence_probability,
    epidemic_size,
    extinction_step,
    size_step,
    solve_extinction,
    solve_size,
    spectral_radius,
)
from conftest import bisect_root, make_scenario, random_scenario
from _single_layer import solve_single_layer


def homogeneous(lam_c, lam_s, t, alpha=1.0, **kw):
    """M = 1, no masks, equal transmissibility on both layers."""
    return make_scenario(
        alpha=alpha, lam_c=lam_c, lam_s=lam_s, tc=t, ts=t,
        m=[1.0], eps_in=[0.0], eps_out=[0.0], **kw,
    )


class TestExtinctionStep:
    @pytest.mark.parametrize("engine", ["poisson", "grid"])
    def test_all_ones_is_exact_fixed_point(self, engine):
        cfg = dataclasses.replace(make_scenario(), engine=engine)
        T = build_transmissibility(cfg)
        ones = np.ones(2)
        out = extinction_step(ExtinctionState(h_c=ones, h_s=ones), cfg, T)
        assert np.array_equal(out.h_c, ones)
        assert np.array_equal(out.h_s, ones)

    def test_zero_transmission_jumps_to_ones(self, rng):
        cfg = make_scenario(tc=0.0, ts=0.0)
        T = build_transmissibility(cfg)
        state = ExtinctionState(h_c=rng.uniform(0, 1, 2), h_s=rng.uniform(0, 1, 2))
        out = extinction_step(state, cfg, T)
        assert np.all(out.h_c == 1.0) and np.all(out.h_s == 1.0)

    def test_one_step_from_zero_poisson_closed_form(self):
        # M=1, Poisson(2)/Poisson(2), T=0.5: Phi_c(0,0) = e^-2 * e^-2
        cfg = homogeneous(2.0, 2.0, 0.5)
        T = build_transmissibility(cfg)
        zeros = np.zeros(1)
        out = extinction_step(ExtinctionState(h_c=zeros, h_s=zeros), cfg, T)
        expected = 1.0 - 0.5 + 0.5 * math.exp(-2.0) * math.exp(-2.0)
        assert out.h_c[0] == pytest.approx(expected, rel=1e-12)
        assert out.h_s[0] == pytest.approx(expected, rel=1e-12)

    def test_monotone_from_zero(self):
        cfg = make_scenario(lam_c=3.0, lam_s=3.0)
        T = build_transmissibility(cfg)
        state = ExtinctionState(h_c=np.zeros(2), h_s=np.zeros(2))
        for _ in range(60):
            nxt = extinction_step(state, cfg, T)
            assert np.all(nxt.h_c >= state.h_c - 1e-15)
            assert np.all(nxt.h_s >= state.h_s - 1e-15)
            assert np.all(nxt.h_c <= 1.0) and np.all(nxt.h_s <= 1.0)
            state = nxt


class TestSolveExtinction:
    def test_subcritical_returns_ones(self):
        cfg = make_scenario(lam_c=1.0, lam_s=1.0, tc=0.2, ts=0.2, alpha=0.3)
        state = solve_extinction(cfg)
        assert np.max(np.abs(state.h_c - 1.0)) < 1e-8
        assert np.max(np.abs(state.h_s - 1.0)) < 1e-8

    def test_homogeneous_fixed_point_value(self):
        # lam_c + lam_s = 2, T = 1: h solves h = exp(2 (h - 1))
        cfg = homogeneous(1.0, 1.0, 1.0)
        root = bisect_root(lambda h: math.exp(2.0 * (h - 1.0)) - h, 0.0, 0.5)
        assert root == pytest.approx(0.2032, abs=2e-4)
        state = solve_extinction(cfg)
        assert state.h_c[0] == pytest.approx(root, abs=1e-9)
        assert state.h_s[0] == pytest.approx(root, abs=1e-9)

    def test_nonconvergence_raises(self):
        cfg = dataclasses.replace(make_scenario(), max_iter=3)
        with pytest.raises(ConvergenceError):
            solve_extinction(cfg)


class TestEmergence:
    def test_all_ones_state_gives_zero(self):
        cfg = make_scenario()
        T = build_transmissibility(cfg)
        ones = np.ones(2)
        _, pe_avg = emergence_probability(cfg, T, ExtinctionState(h_c=ones, h_s=ones))
        assert pe_avg == 0.0

    @pytest.mark.parametrize("lam_c,lam_s,t", [(1.0, 1.0, 1.0), (2.0, 2.0, 0.5), (3.0, 1.0, 0.5)])
    def test_homogeneous_emergence_value(self, lam_c, lam_s, t):
        # any split with (lam_c + lam_s) * t = 2 gives PE = root of x = 1 - exp(-2x)
        cfg = homogeneous(lam_c, lam_s, t)
        root = bisect_root(lambda x: (1.0 - math.exp(-2.0 * x)) - x, 1e-9, 1.0)
        state = solve_extinction(cfg)
        _, pe_avg = emergence_probability(cfg, build_transmissibility(cfg), state)
        assert pe_avg == pytest.approx(root, abs=1e-8)


class TestSpectralRadius:
    def test_zero_matrix(self):
        assert spectral_radius(np.zeros((4, 4))) == 0.0

    def test_diagonal(self):
        assert spectral_radius(np.diag([0.3, 0.7])) == pytest.approx(0.7, abs=1e-9)

    def test_empty(self):
        assert spectral_radius(np.zeros((0, 0))) == 0.0

    def test_imprimitive_falls_back_to_charpoly(self):
        J = np.array([[0.0, 2.0], [0.5, 0.0]])  # eigenvalues +-1, power iteration cycles
        assert spectral_radius(J, max_iter=50) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
    def test_two_by_two_closed_form(self, alpha):
        # M=1, no masks: rho = T (lam_c + lam_s + sqrt((lam_c - lam_s)^2 + 4 a lam_c lam_s)) / 2
        lam_c, lam_s, t = 4.0, 2.5, 0.3
        cfg = homogeneous(lam_c, lam_s, t, alpha=alpha)
        rho = spectral_radius(build_jacobian(cfg, build_transmissibility(cfg)))
        closed = t * (lam_c + lam_s + math.sqrt((lam_c - lam_s) ** 2 + 4 * alpha * lam_c * lam_s)) / 2
        if alpha == 0.0:
            closed = t * lam_c  # school block drops out entirely
        assert rho == pytest.approx(closed, rel=1e-9)

    def test_matches_dense_eigensolver(self, rng):
        for _ in range(15):
            cfg = random_scenario(rng)
            J = build_jacobian(cfg, build_transmissibility(cfg))
            assert np.all(J >= 0.0)
            dense = float(np.max(np.abs(np.linalg.eigvals(J)))) if J.size else 0.0
            assert spectral_radius(J) == pytest.approx(dense, rel=1e-8, abs=1e-10)


class TestCriticalScaling:
    def test_single_layer_poisson(self):
        cfg = homogeneous(4.0, 1.0, 1.0, alpha=0.0)
        assert critical_scaling(cfg) == pytest.approx(0.25, rel=1e-9)

    def test_linearity(self):
        cfg = homogeneous(4.0, 1.0, 0.5, alpha=0.0)  # rho = 2
        assert critical_scaling(cfg) == pytest.approx(0.5, rel=1e-9)
        sub = homogeneous(4.0, 1.0, 0.2, alpha=0.0)  # rho = 0.8, currently subcritical
        assert critical_scaling(sub) == pytest.approx(1.25, rel=1e-9)

    def test_no_epidemic_signal(self):
        cfg = make_scenario(tc=0.0, ts=0.0)
        assert critical_scaling(cfg) == math.inf

    def test_scaled_scenario_sits_on_threshold(self, rng):
        for _ in range(5):
            cfg = random_scenario(rng)
            theta = critical_scaling(cfg)
            if not math.isfinite(theta):
                continue
            scaled = dataclasses.replace(cfg, tc=cfg.tc * theta, ts=cfg.ts * theta)
            rho = spectral_radius(
                build_jacobian(scaled, build_transmissibility(scaled)), tol=1e-12
            )
            assert rho == pytest.approx(1.0, abs=1e-9)


class TestSizeStep:
    @pytest.mark.parametrize("engine", ["poisson", "grid"])
    def test_all_ones_is_exact_fixed_point(self, engine):
        cfg = dataclasses.replace(make_scenario(), engine=engine)
        T = build_transmissibility(cfg)
        ones = np.ones(2)
        out = size_step(SizeState(q_c=ones, q_s=ones), cfg, T)
        assert np.array_equal(out.q_c, ones)
        assert np.array_equal(out.q_s, ones)

    def test_full_transmission_leaf_probability(self):
        # T=1, state zeros: q_c = P[edge leads to a degree-(1,0) node]
        cfg = ScenarioConfig(
            n=100,
            alpha=0.5,
            dist_c=DegreePMF.explicit([0.1, 0.4, 0.5]),
            dist_s=DegreePMF.explicit([0.3, 0.7]),
            tc=1.0,
            ts=1.0,
            masks=MaskSet(m=[1.0], eps_in=[0.0], eps_out=[0.0]),
        )
        T = build_transmissibility(cfg)
        zeros = np.zeros(1)
        out = size_step(SizeState(q_c=zeros, q_s=zeros), cfg, T)
        # direct sum over the joint grid, written out independently
        pc, ps, a = [0.1, 0.4, 0.5], [0.3, 0.7], 0.5
        mean_kc = sum(k * p for k, p in enumerate(pc))
        expected = 0.0
        for kc, pkc in enumerate(pc):
            for ks, pks in enumerate(ps):
                pd = pkc * (a * pks + (1 - a) * (ks == 0))
                if kc == 1 and ks == 0:
                    expected += pd * kc / mean_kc
        assert out.q_c[0] == pytest.approx(expected, rel=1e-12)

    def test_one_step_from_zero_poisson_closed_form(self):
        cfg = homogeneous(2.0, 2.0, 0.5)
        T = build_transmissibility(cfg)
        zeros = np.zeros(1)
        out = size_step(SizeState(q_c=zeros, q_s=zeros), cfg, T)
        assert out.q_c[0] == pytest.approx(math.exp(-1.0) * math.exp(-1.0), rel=1e-12)

    def test_transposed_orientation_pinned(self):
        # asymmetric eps: the focal node's escape factor must use T[j, i]
        cfg = make_scenario(
            lam_c=4.0, lam_s=0.0, alpha=0.0, tc=1.0, ts=0.5,
            m=[0.5, 0.5], eps_in=[0.9, 0.0], eps_out=[0.0, 0.0],
        )
        T = build_transmissibility(cfg)
        zeros = np.zeros(2)
        out = size_step(SizeState(q_c=zeros, q_s=zeros), cfg, T)
        # type 0 is shielded by its inward efficiency: escape factor
        # u[0] = 1 - sum_j m_j T[j,0] = 1 - 0.1, u[1] = 1 - 1.0
        q = np.exp(4.0 * (np.array([0.9, 0.0]) - 1.0))
        assert np.allclose(out.q_c, q, rtol=1e-12)


class TestEpidemicSize:
    def test_subcritical_size_zero(self):
        cfg = make_scenario(lam_c=1.0, lam_s=1.0, tc=0.2, ts=0.2, alpha=0.3)
        _, es_total = epidemic_size(cfg)
        assert es_total < 1e-8

    @pytest.mark.parametrize("lam_c,lam_s,t", [(1.0, 1.0, 1.0), (2.0, 2.0, 0.5)])
    def test_homogeneous_size_value(self, lam_c, lam_s, t):
        root = bisect_root(lambda x: (1.0 - math.exp(-2.0 * x)) - x, 1e-9, 1.0)
        _, es_total = epidemic_size(homogeneous(lam_c, lam_s, t))
        assert es_total == pytest.approx(root, abs=1e-8)

    def test_monotone_from_zero(self):
        cfg = make_scenario(lam_c=3.0, lam_s=3.0)
        T = build_transmissibility(cfg)
        state = SizeState(q_c=np.zeros(2), q_s=np.zeros(2))
        for _ in range(60):
            nxt = size_step(state, cfg, T)
            assert np.all(nxt.q_c >= state.q_c - 1e-15)
            assert np.all(nxt.q_s >= state.q_s - 1e-15)
            state = nxt


class TestStructuralReductions:
    def test_single_layer_reduction(self, rng):
        # alpha = 0 must match the independently coded one-layer solver
        for _ in range(8):
            cfg = random_scenario(rng, alpha=0.0)
            rep = analyze(cfg)
            p = cfg.dist_c.pmf_array()
            T = build_transmissibility(cfg)
            pe, rho, es = solve_single_layer(p, cfg.masks.m, T.tc)
            assert rep.pe_avg == pytest.approx(pe, abs=1e-8)
            assert rep.rho == pytest.approx(rho, abs=1e-8)
            assert rep.es_total == pytest.approx(es, abs=1e-8)

    def test_layer_symmetry_at_full_membership(self, rng):
        for _ in range(6):
            cfg = random_scenario(rng, alpha=1.0)
            swapped = dataclasses.replace(
                cfg, dist_c=cfg.dist_s, dist_s=cfg.dist_c, tc=cfg.ts, ts=cfg.tc
            )
            a, b = analyze(cfg), analyze(swapped)
            assert a.pe_avg == pytest.approx(b.pe_avg, abs=1e-9)
            assert a.rho == pytest.approx(b.rho, abs=1e-9)
            assert a.es_total == pytest.approx(b.es_total, abs=1e-9)

    def test_homogenization(self, rng):
        # two types with identical efficiencies collapse to one type
        for split in (0.5, 0.2, 0.9):
            two = make_scenario(
                m=[split, 1.0 - split], eps_in=[0.4, 0.4], eps_out=[0.25, 0.25],
                lam_c=5.0, lam_s=3.0, alpha=0.6,
            )
            one = make_scenario(
                m=[1.0], eps_in=[0.4], eps_out=[0.25], lam_c=5.0, lam_s=3.0, alpha=0.6
            )
            a, b = analyze(two), analyze(one)
            assert a.pe_avg == pytest.approx(b.pe_avg, abs=1e-10)
            assert a.rho == pytest.approx(b.rho, abs=1e-10)
            assert a.es_total == pytest.approx(b.es_total, abs=1e-10)

    def test_poisson_fast_path_equals_grid(self, rng):
        checked = 0
        while checked < 8:
            cfg = random_scenario(rng)
            rho = spectral_radius(build_jacobian(cfg, build_transmissibility(cfg)))
            if abs(rho - 1.0) < 0.02:  # keep away from the critical slowdown
                continue
            a = analyze(dataclasses.replace(cfg, engine="poisson"))
            b = analyze(dataclasses.replace(cfg, engine="grid"))
            assert a.pe_avg == pytest.approx(b.pe_avg, abs=1e-8)
            assert a.rho == pytest.approx(b.rho, abs=1e-8)
            assert a.es_total == pytest.approx(b.es_total, abs=1e-8)
            checked += 1

    def test_threshold_consistency(self, rng):
        seen_sub = seen_super = 0
        for _ in range(40):
            cfg = random_scenario(rng)
            rep = analyze(cfg)
            if rep.rho < 1.0 - 1e-3:
                assert rep.pe_avg < 1e-6 and rep.es_total < 1e-6
                seen_sub += 1
            elif rep.rho > 1.0 + 1e-3:
                assert rep.pe_avg > 0.0 and rep.es_total > 0.0
                seen_super += 1
        assert seen_sub >= 3 and seen_super >= 3  # the sample covered both regimes

    def test_report_weighted_averages(self, rng):
        cfg = random_scenario(rng, M=3)
        rep = analyze(cfg)
        assert rep.pe_avg == pytest.approx(float(cfg.masks.m @ rep.pe_by_type), abs=1e-14)
        assert rep.es_total == pytest.approx(float(cfg.masks.m @ rep.es_by_type), abs=1e-14)

    def test_school_only_scenario(self):
        # community layer empty: everything must flow through the s equations
        cfg = make_scenario(lam_c=0.0, lam_s=4.0, alpha=1.0, tc=0.6, ts=0.6,
                            m=[1.0], eps_in=[0.0], eps_out=[0.0])
        rep = analyze(cfg)
        ref = analyze(make_scenario(lam_c=4.0, lam_s=0.0, alpha=0.0, tc=0.6, ts=0.6,
                                    m=[1.0], eps_in=[0.0], eps_out=[0.0]))
        assert rep.pe_avg == pytest.approx(ref.pe_avg, abs=1e-9)
        assert rep.rho == pytest.approx(ref.rho, abs=1e-9)
        assert rep.es_total == pytest.approx(ref.es_total, abs=1e-9)
