"""Tests for the metric split: Hodge decomposition round trips, inverse
metric expansion, and gauge residuals."""

import numpy as np
import pytest

from ekgsim import metric, spectral
from ekgsim.metric import (
    COMP_INDEX,
    MetricPerturbation,
    decompose,
    gauge_residual,
    inverse_metric,
    reconstruct,
    tau_of,
)
from ekgsim.spectral import SpectralScalar

from conftest import random_real_field


def random_perturbation(grid, rng, amplitude=0.02, zero_mean=False):
    c = np.stack([random_real_field(grid, rng, amplitude=amplitude) for _ in range(10)])
    if zero_mean:
        c[:, 0, 0, 0] = 0.0
    return MetricPerturbation(grid, c)


class TestDecompose:
    def test_time_time_only(self, grid8, rng):
        g = grid8
        f = random_real_field(g, rng)
        c = np.zeros((10,) + g.shape, dtype=complex)
        c[COMP_INDEX[(0, 0)]] = f
        h = MetricPerturbation(g, c)
        comps = decompose(h)
        assert np.max(np.abs(comps.F - 0.5 * f)) < 1e-12
        assert np.max(np.abs(comps.Fbar - 0.5 * f)) < 1e-12
        for arr in [comps.rho, comps.omega, comps.Omega, comps.theta]:
            assert np.max(np.abs(arr)) < 1e-12
        assert np.max(np.abs(comps.tau())) < 1e-12

    def test_isotropic_spatial_block(self, grid8, rng):
        """h_jk = delta_jk f resolves into the derived closed forms."""
        g = grid8
        f = random_real_field(g, rng)
        f[0, 0, 0] = 0.0
        c = np.zeros((10,) + g.shape, dtype=complex)
        for j in range(1, 4):
            c[COMP_INDEX[(j, j)]] = f
        h = MetricPerturbation(g, c)
        comps = decompose(h)
        R = [metric._riesz_sym(g, j) for j in range(3)]
        assert np.max(np.abs(comps.F + 0.5 * f)) < 1e-12
        assert np.max(np.abs(comps.Fbar - 0.5 * f)) < 1e-12
        assert np.max(np.abs(comps.tau() - f)) < 1e-12
        for a, b in metric.SPATIAL_PAIRS:
            j, k = a - 1, b - 1
            expect = -(1.0 if j == k else 0.0) * f - R[j] * R[k] * f
            got = comps.theta[metric.SPATIAL_INDEX[(a, b)]]
            assert np.max(np.abs(got - expect)) < 1e-12

    def test_divergence_free_invariants(self, grid8, rng):
        for _ in range(5):
            h = random_perturbation(grid8, rng)
            res = metric.component_invariant_residuals(decompose(h))
            assert max(res.values()) < 1e-10

    def test_trace_identity(self, grid8, rng):
        h = random_perturbation(grid8, rng)
        comps = decompose(h)
        tau_direct = tau_of(h)
        assert np.max(np.abs(comps.tau() - tau_direct.coeffs)) < 1e-10


class TestRoundTrip:
    def test_decompose_then_reconstruct(self, grid8, rng):
        for _ in range(10):
            h = random_perturbation(grid8, rng)
            back = reconstruct(decompose(h))
            assert np.max(np.abs(back.coeffs - h.coeffs)) < 1e-10

    def test_reconstruct_then_decompose(self, grid8, rng):
        h = random_perturbation(grid8, rng)
        comps = decompose(h)
        again = decompose(reconstruct(comps))
        assert np.max(np.abs(again.F - comps.F)) < 1e-10
        assert np.max(np.abs(again.Fbar - comps.Fbar)) < 1e-10
        assert np.max(np.abs(again.rho - comps.rho)) < 1e-10
        assert np.max(np.abs(again.omega - comps.omega)) < 1e-10
        assert np.max(np.abs(again.Omega - comps.Omega)) < 1e-10
        assert np.max(np.abs(again.theta - comps.theta)) < 1e-10

    def test_zero_components_give_zero(self, grid8):
        comps = decompose(MetricPerturbation.zeros(grid8))
        h = reconstruct(comps)
        assert np.max(np.abs(h.coeffs)) == 0.0

    def test_equal_scalars_cancel_in_spatial_block(self, grid8, rng):
        """F = Fbar = f/2 only: h_00 = f and the spatial block vanishes."""
        g = grid8
        f = random_real_field(g, rng)
        f[0, 0, 0] = 0.0
        comps = decompose(MetricPerturbation.zeros(g))
        comps.F = 0.5 * f.astype(complex)
        comps.Fbar = 0.5 * f.astype(complex)
        h = reconstruct(comps)
        assert np.max(np.abs(h.coeffs[COMP_INDEX[(0, 0)]] - f)) < 1e-12
        for a, b in [(0, 1), (0, 2), (0, 3)] + metric.SPATIAL_PAIRS:
            assert np.max(np.abs(h.coeffs[COMP_INDEX[(a, b)]])) < 1e-12

    def test_inconsistent_components_rejected(self, grid8, rng):
        h = random_perturbation(grid8, rng, amplitude=0.05)
        comps = decompose(h)
        comps.omega[0] += 0.01 * comps.omega[0].real + 0.01  # break div-free
        with pytest.raises(ValueError):
            reconstruct(comps)


class TestInverseMetric:
    def test_flat(self, grid8):
        exp = inverse_metric(MetricPerturbation.zeros(grid8))
        assert np.max(np.abs(exp.g1)) == 0.0
        assert np.max(np.abs(exp.g_ge2)) == 0.0

    def test_constant_time_time_geometric_series(self, grid8):
        g = grid8
        cval = 0.08
        c = np.zeros((10,) + g.shape, dtype=complex)
        c[COMP_INDEX[(0, 0)], 0, 0, 0] = cval
        exp = inverse_metric(MetricPerturbation(g, c))
        g1_00 = exp.g1[0, 0]
        ge2_00 = exp.g_ge2[0, 0]
        assert np.max(np.abs(g1_00 + cval)) < 1e-14
        expect = -1.0 / (1.0 - cval) + 1.0 + cval
        assert np.max(np.abs(ge2_00 - expect)) < 1e-13

    def test_identity_against_dense_inverse(self, grid8, rng):
        h = random_perturbation(grid8, rng, amplitude=0.04)
        exp = inverse_metric(h)
        hv = h.full_values()
        assert exp.identity_residual(hv) < 1e-10
        # dense 4x4 inversion oracle at a few points
        full = exp.full_inverse()
        lower = metric.MINKOWSKI[:, :, None, None, None] + hv
        for idx in [(0, 0, 0), (3, 5, 2), (7, 1, 6)]:
            oracle = np.linalg.inv(lower[(slice(None), slice(None)) + idx])
            assert np.max(np.abs(full[(slice(None), slice(None)) + idx] - oracle)) < 1e-11

    def test_divergence_guard(self, grid8):
        g = grid8
        c = np.zeros((10,) + g.shape, dtype=complex)
        c[COMP_INDEX[(0, 0)], 0, 0, 0] = 0.6
        with pytest.raises(ValueError):
            inverse_metric(MetricPerturbation(g, c))


class TestGaugeResidual:
    def test_flat(self, grid8):
        h = MetricPerturbation.zeros(grid8)
        gr = gauge_residual(h, MetricPerturbation.zeros(grid8))
        assert np.max(np.abs(gr.Gamma)) == 0.0
        assert np.max(np.abs(gr.E_ge2)) == 0.0

    def test_pure_gauge_linear_wave(self, grid8):
        """h_ab = d_a xi_b + d_b xi_a for a solution of the free wave
        equation has vanishing linearised gauge one-form."""
        g = grid8
        kvec = 2.0 * np.pi * np.array([1.0, 0.0, 0.0]) / g.length
        om = np.linalg.norm(kvec)
        phase = kvec[0] * g.x[0]
        amp = 1e-3
        # xi_mu = a_mu cos(k.x - om t) at t = 0; xi solves box xi = 0
        a = np.array([0.3, -0.2, 0.5, 0.1]) * amp
        cos, sin = np.cos(phase), np.sin(phase)
        kmu = np.array([-om, kvec[0], 0.0, 0.0])  # d_mu (k.x - om t)
        c = np.zeros((10,) + g.shape, dtype=complex)
        cdt = np.zeros((10,) + g.shape, dtype=complex)
        for (al, be) in metric.COMP_PAIRS:
            i = COMP_INDEX[(al, be)]
            val = -(a[be] * kmu[al] + a[al] * kmu[be]) * sin
            dval = (a[be] * kmu[al] + a[al] * kmu[be]) * om * cos
            c[i] = g.forward(val)
            cdt[i] = g.forward(dval)
        h = MetricPerturbation(g, c)
        dth = MetricPerturbation(g, cdt)
        gr = gauge_residual(h, dth)
        lin = metric.linear_gauge_identity_residual(h, dth, gr)
        assert lin < 1e-10
        # linear part of Gamma = Gamma + E up to quadratic terms  ->
        # Gamma itself is O(amp^2)
        assert gr.sup() < 50.0 * amp**2

    def test_quadratic_tail_matches_dense_contraction(self, grid8, rng):
        g = grid8
        h = random_perturbation(g, rng, amplitude=0.03)
        dth = random_perturbation(g, rng, amplitude=0.03)
        gr = gauge_residual(h, dth)
        dg = metric._first_derivative_values(h, dth)
        ginv1 = inverse_metric(h).g_ge1()
        for mu in range(4):
            oracle = np.zeros(g.shape)
            for a in range(4):
                for b in range(4):
                    oracle += -ginv1[a, b] * dg[a, b, mu] + 0.5 * ginv1[a, b] * dg[mu, a, b]
            assert np.max(np.abs(gr.E_ge2[mu] - oracle)) < 1e-12

    def test_linear_identity_random(self, grid8, rng):
        h = random_perturbation(grid8, rng, amplitude=0.04)
        dth = random_perturbation(grid8, rng, amplitude=0.04)
        gr = gauge_residual(h, dth)
        assert metric.linear_gauge_identity_residual(h, dth, gr) < 1e-10
