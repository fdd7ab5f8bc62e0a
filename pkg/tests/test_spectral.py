"""Tests for the spectral core: transforms, multipliers, shell projections,
and band-limited point evaluation."""

import numpy as np
import pytest

from ekgsim import spectral
from ekgsim.spectral import Grid, SpectralScalar

from conftest import random_real_field


class TestTransforms:
    def test_constant_field_has_only_zero_mode(self, grid8):
        f = SpectralScalar.from_values(grid8, 3.25 * np.ones(grid8.shape))
        assert abs(f.zero_mode() - 3.25) < 1e-13
        rest = f.coeffs.copy()
        rest[0, 0, 0] = 0.0
        assert np.max(np.abs(rest)) < 1e-13

    def test_single_harmonic_two_modes(self, grid8):
        g = grid8
        vals = np.cos(2.0 * np.pi * g.x[0] / g.length)
        f = SpectralScalar.from_values(g, vals)
        assert abs(f.coeffs[1, 0, 0] - 0.5) < 1e-13
        assert abs(f.coeffs[-1, 0, 0] - 0.5) < 1e-13
        rest = f.coeffs.copy()
        rest[1, 0, 0] = rest[-1, 0, 0] = 0.0
        assert np.max(np.abs(rest)) < 1e-13

    def test_round_trip(self, grid8, rng):
        vals = rng.standard_normal(grid8.shape)
        f = SpectralScalar.from_values(grid8, vals)
        # Nyquist convention zeroes part of a white-noise field, so compare
        # against the band-limited representative.
        back = SpectralScalar.from_values(grid8, f.values())
        rel = np.max(np.abs(back.coeffs - f.coeffs)) / np.max(np.abs(f.coeffs))
        assert rel < 1e-13

    def test_matches_direct_fourier_sum_oracle(self, grid8, rng):
        """Forward transform agrees with an O(N^2) direct DFT sum."""
        g = grid8
        c = random_real_field(g, rng)
        vals = g.inverse(c).real
        # direct sum oracle on a handful of modes
        pts = np.stack([g.x[0].ravel(), g.x[1].ravel(), g.x[2].ravel()], axis=1)
        got = g.forward(vals)
        for m in [(0, 0, 0), (1, 0, 0), (2, 3, 1), (-3, 2, -1)]:
            xi = 2.0 * np.pi * np.array(m) / g.length
            oracle = np.sum(vals.ravel() * np.exp(-1j * pts @ xi)) / g.n**3
            assert abs(got[m] - oracle) < 1e-12

    def test_shape_mismatch_raises(self, grid8):
        with pytest.raises(ValueError):
            grid8.forward(np.zeros((4, 4, 4)))

    def test_parseval(self, grid8, rng):
        c = random_real_field(grid8, rng)
        f = SpectralScalar(grid8, c, is_real=True)
        space = grid8.integral(np.abs(f.values()) ** 2)
        freq = grid8.l2_norm_sq(c)
        assert abs(space - freq) < 1e-12 * max(1.0, freq)


class TestMultipliers:
    def test_lambda_wa_eigenfunction(self, grid8):
        g = grid8
        vals = np.cos(2.0 * np.pi * g.x[0] / g.length)
        f = SpectralScalar.from_values(g, vals)
        out = spectral.apply_multiplier(f, spectral.lambda_wa(g))
        expected = (2.0 * np.pi / g.length) * vals
        assert np.max(np.abs(out.values() - expected)) < 1e-13

    def test_riesz_contraction_is_minus_identity(self, grid8, rng):
        """delta_jk R_j R_k = -I on zero-mean fields."""
        g = grid8
        c = random_real_field(g, rng)
        c[0, 0, 0] = 0.0
        f = SpectralScalar(g, c, is_real=True)
        acc = SpectralScalar.zeros(g)
        for j in range(3):
            rj = spectral.riesz(g, j)
            acc = acc + spectral.apply_multiplier(
                spectral.apply_multiplier(f, rj), rj
            )
        assert np.max(np.abs(acc.coeffs + f.coeffs)) < 1e-12

    def test_lambda_kg_scalar_oracle(self, grid8):
        g = grid8
        k0 = np.array([1, 2, 0])
        vals = np.cos(
            2.0 * np.pi * (k0[0] * g.x[0] + k0[1] * g.x[1] + k0[2] * g.x[2]) / g.length
        )
        f = SpectralScalar.from_values(g, vals)
        out = spectral.apply_multiplier(f, spectral.lambda_kg(g))
        scale = np.sqrt(1.0 + np.sum((2.0 * np.pi * k0 / g.length) ** 2))
        assert np.max(np.abs(out.values() - scale * vals)) < 1e-12

    def test_riesz_composition_commutes(self, grid8, rng):
        g = grid8
        f = SpectralScalar(g, random_real_field(g, rng), is_real=True)
        r1, r2 = spectral.riesz(g, 0), spectral.riesz(g, 2)
        a = spectral.apply_multiplier(spectral.apply_multiplier(f, r1), r2)
        b = spectral.apply_multiplier(spectral.apply_multiplier(f, r2), r1)
        assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-14

    def test_real_tag_preserved_by_hermitian_symbols(self, grid8, rng):
        g = grid8
        mults = [
            spectral.riesz(g, 1),
            spectral.lambda_wa(g),
            spectral.lambda_kg(g),
            spectral.derivative(g, 0),
            spectral.inverse_gradient(g),
            spectral.smooth_low(g, 0.25),
        ]
        for trial in range(20):
            f = SpectralScalar(g, random_real_field(g, rng), is_real=True)
            for m in mults:
                out = spectral.apply_multiplier(f, m)
                assert out.is_real
                assert out.reality_defect() < 1e-12

    def test_zero_mode_convention(self, grid8):
        g = grid8
        f = SpectralScalar.from_values(g, np.ones(g.shape))
        for m in [spectral.riesz(g, 0), spectral.inverse_gradient(g, 0.5)]:
            out = spectral.apply_multiplier(f, m)
            assert np.max(np.abs(out.coeffs)) == 0.0


class TestShellProjections:
    def test_disjoint_shell_supports(self, grid16):
        g = grid16
        # field on the |xi| ~ 2^0 shell: single mode with |xi| = 1
        m0 = int(round(g.length / (2.0 * np.pi)))
        vals = np.cos(2.0 * np.pi * m0 * g.x[0] / g.length)
        f = SpectralScalar.from_values(g, vals)
        p0 = spectral.lp_project(f, 0)
        p5 = spectral.lp_project(f, 5)
        assert np.max(np.abs(p0.coeffs - f.coeffs)) < 1e-13
        assert np.max(np.abs(p5.coeffs)) < 1e-13

    def test_shell_partition_of_unity(self, grid16, rng):
        g = grid16
        f = SpectralScalar(g, random_real_field(g, rng), is_real=True)
        total = SpectralScalar.zeros(g)
        for k in g.shell_range():
            total = total + spectral.lp_project(f, k)
        expect = f.coeffs.copy()
        expect[0, 0, 0] = 0.0  # shells exclude the zero mode
        assert np.max(np.abs(total.coeffs - expect)) < 1e-12

    def test_qjk_resums_to_shell_projection(self, grid16, rng):
        g = grid16
        f = SpectralScalar(g, random_real_field(g, rng), is_real=True)
        for k in [-1, 0, 2]:
            pk = spectral.lp_project(f, k)
            total = SpectralScalar.zeros(g)
            for j in g.spatial_shell_range():
                if j < 0 or k + j < 0:
                    continue
                total = total + spectral.qjk_project(f, j, k)
            assert np.max(np.abs(total.coeffs - pk.coeffs)) < 1e-12

    def test_qjk_domain_error(self, grid16, rng):
        f = SpectralScalar(grid16, random_real_field(grid16, rng), is_real=True)
        with pytest.raises(ValueError):
            spectral.qjk_project(f, 1, -4)
        with pytest.raises(ValueError):
            spectral.qjk_project(f, -1, 3)


class TestPointEvaluation:
    def test_constant(self, grid8):
        f = SpectralScalar.from_values(grid8, 2.5 * np.ones(grid8.shape))
        out = f.at_points([[0.3, -0.4, 1.9], [0.0, 0.0, 0.0]])
        assert np.max(np.abs(out - 2.5)) < 1e-13

    def test_harmonic_at_grid_points(self, grid8):
        g = grid8
        vals = np.cos(2.0 * np.pi * g.x[0] / g.length)
        f = SpectralScalar.from_values(g, vals)
        idx = [(0, 0, 0), (3, 1, 2), (7, 7, 7)]
        pts = [[g.x[0][i], g.x[1][i], g.x[2][i]] for i in idx]
        out = f.at_points(pts)
        expect = [vals[i] for i in idx]
        assert np.max(np.abs(out - expect)) < 1e-12

    def test_harmonic_off_grid_closed_form(self, grid8):
        g = grid8
        vals = np.cos(2.0 * np.pi * g.x[0] / g.length)
        f = SpectralScalar.from_values(g, vals)
        x_half = g.x[0][1, 0, 0] + 0.5 * g.dx
        out = f.at_points([[x_half, 0.123, -0.77]])
        assert abs(out[0] - np.cos(2.0 * np.pi * x_half / g.length)) < 1e-12

    def test_periodic_wrapping(self, grid8, rng):
        g = grid8
        f = SpectralScalar(g, random_real_field(g, rng), is_real=True)
        p = np.array([0.37, -0.21, 0.9])
        out1 = f.at_points([p])
        out2 = f.at_points([p + np.array([g.length, -g.length, 2 * g.length])])
        assert abs(out1[0] - out2[0]) < 1e-12


class TestDealiasedProduct:
    def test_product_of_harmonics(self, grid16):
        g = grid16
        a = np.cos(2.0 * np.pi * g.x[0] / g.length)
        b = np.cos(2.0 * np.pi * 2.0 * g.x[0] / g.length)
        ca = g.forward(a)
        cb = g.forward(b)
        prod = g.product(ca, cb)
        expect = g.forward(a * b)  # no aliasing for these low modes
        assert np.max(np.abs(prod - expect)) < 1e-13

    def test_nyquist_zeroed(self, grid8, rng):
        g = grid8
        c = random_real_field(g, rng)
        prod = g.product(c, c)
        assert np.max(np.abs(prod[g.nyquist_mask])) == 0.0


class TestGradedMagnitude:
    def test_tails_exact(self):
        r = np.array([0.0, 0.1, 0.5, 2.0, 3.0, 100.0])
        m = spectral.graded_magnitude(r)
        assert np.allclose(m[:3], r[:3], atol=1e-15)
        assert np.allclose(m[3:], 1.0, atol=1e-12)

    def test_monotone(self):
        r = np.linspace(0.0, 2.5, 1001)
        m = spectral.graded_magnitude(r)
        assert np.all(np.diff(m) >= -1e-15)
