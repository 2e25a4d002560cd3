"""Smoothed frequency quantities, residual identities, and limits.

Reference values for the (2, 3) curve come from an independent quadrature
oracle evaluated inside the tests: the curve has sum_i |Df_i|^2 = 9 |z| and
sum_i |f_i|^2 = 2 |z|^3, so every smoothed quantity reduces to an explicit
one-dimensional radial integral handled by scipy."""

import numpy as np
import pytest
from scipy.integrate import quad

import qbranch as qb


def ramp(t):
    if t <= 0.5:
        return 1.0
    if t <= 1.0:
        return 2.0 - 2.0 * t
    return 0.0


def oracle_curve23(s):
    """Dense-quadrature oracle for the (2,3) curve at scale s (center 0)."""
    # D = int 9 r phi(r/s) * 2 pi r dr
    D = quad(lambda r: 18 * np.pi * r ** 2 * ramp(r / s), 0, s,
             points=[s / 2])[0]
    # H = - int (2 r^3 / r) phi'(r/s) dy = 4 int_{s/2}^{s} r^2 * 2 pi r ... dr
    H = quad(lambda r: 4 * np.pi * r ** 3 * 2, s / 2, s)[0]
    return D, H


class TestDirichletEnergy:
    def test_constant_map_zero(self, small_grid):
        v = np.zeros((2, small_grid.n_rings, small_grid.n_theta, 2))
        v[1, ..., 0] = 3.0
        f = qb.QFunction(grid=small_grid, values=v, monodromy=[0, 1],
                         metadata={})
        assert qb.dirichlet_energy(f, small_grid.r_max) == pytest.approx(
            0.0, abs=1e-12)

    def test_curve23_total_energy(self, curve_cache):
        # independent oracle: int_{B_1} 9|z| = 9 * 2 pi / 3 = 6 pi
        expected = quad(lambda r: 9 * r * 2 * np.pi * r, 0, 1)[0]
        assert expected == pytest.approx(6 * np.pi, rel=1e-12)
        got = qb.dirichlet_energy(curve_cache(2, 3), 1.0)
        assert got == pytest.approx(expected, rel=1e-5)

    def test_quadratic_scaling(self, curve_cache):
        f = curve_cache(2, 3)
        g = f.replace_values(3.0 * f.values)
        assert qb.dirichlet_energy(g, 0.5) == pytest.approx(
            9.0 * qb.dirichlet_energy(f, 0.5), rel=1e-13)

    def test_out_of_range(self, curve_cache):
        with pytest.raises(qb.RangeError):
            qb.dirichlet_energy(curve_cache(2, 3), 2.0)


class TestSmoothedQuantities:
    def test_curve23_at_unit_scale(self, curve_cache):
        f = curve_cache(2, 3)
        D_ref, H_ref = oracle_curve23(1.0)
        assert D_ref == pytest.approx(45 * np.pi / 16, rel=1e-12)
        assert H_ref == pytest.approx(15 * np.pi / 8, rel=1e-12)
        assert qb.smoothed_D(f, r=1.0) == pytest.approx(D_ref, rel=1e-5)
        assert qb.smoothed_H(f, r=1.0) == pytest.approx(H_ref, rel=1e-5)
        assert qb.smoothed_I(f, r=1.0) == pytest.approx(1.5, abs=1e-4)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0, 5 / 3])
    def test_homogeneous_frequency_is_degree(self, full_grid, alpha):
        f = qb.homogeneous_map(alpha, grid=full_grid)
        for s in (1.0, 0.5, 0.25):
            assert qb.smoothed_I(f, r=s) == pytest.approx(alpha, abs=1e-3)

    def test_single_valued_linear_map(self, small_grid):
        f = qb.homogeneous_map(1.0, grid=small_grid)  # the map z -> z
        for s in (1.0, 0.5):
            assert qb.smoothed_I(f, r=s) == pytest.approx(1.0, abs=1e-5)

    def test_degenerate_height_raises(self, small_grid):
        v = np.zeros((1, small_grid.n_rings, small_grid.n_theta, 2))
        f = qb.QFunction(grid=small_grid, values=v, monodromy=[0],
                         metadata={})
        with pytest.raises(qb.DegenerateHeightError):
            qb.smoothed_I(f, r=small_grid.r_max)


class TestAuxiliaryQuantities:
    def test_outer_identity_on_harmonic_homogeneous(self, full_grid):
        f = qb.homogeneous_map(1.5, grid=full_grid)
        q = qb.auxiliary_quantities(f, r=0.5)
        D = qb.smoothed_D(f, r=0.5)
        assert q["E"] == pytest.approx(D, rel=1e-5)

    def test_constant_map_values(self, small_grid):
        v = np.zeros((2, small_grid.n_rings, small_grid.n_theta, 2))
        v[0, ..., 0] = 1.0
        v[1, ..., 0] = -1.0
        f = qb.QFunction(grid=small_grid, values=v, monodromy=[0, 1],
                         metadata={})
        s = small_grid.r_max
        q = qb.auxiliary_quantities(f, r=s)
        assert q["E"] == pytest.approx(0.0, abs=1e-12)
        assert q["G"] == pytest.approx(0.0, abs=1e-12)
        # Sigma = |u|^2 int phi(|y|/s) dy with |u|^2 = 2
        sigma_ref = 2 * quad(lambda r: 2 * np.pi * r * ramp(r / s), 0, s,
                             points=[s / 2])[0]
        assert q["Sigma"] == pytest.approx(sigma_ref, rel=1e-7)

    def test_curve_outer_residual_small(self, curve_cache):
        f = curve_cache(2, 3)
        res = qb.variation_residuals(f, r=0.5)
        assert res["residual_outer"] < 1e-3


class TestVariationResiduals:
    @pytest.mark.parametrize("alpha", [1.5, 5 / 3])
    def test_minimizing_branches_have_tiny_residuals(self, full_grid, alpha):
        f = qb.homogeneous_map(alpha, grid=full_grid)
        res = qb.variation_residuals(f, r=0.5)
        assert res["residual_outer"] < 1e-3
        assert res["residual_inner"] < 1e-3

    def test_non_minimizer_triggers_inner_residual(self, full_grid):
        # the pair {|z| e, -|z| e} has a non-harmonic radial profile; its
        # frequency is 1/2 and the inner identity fails by design
        bad = qb.homogeneous_map(
            1.0, boundary=qb.constant_profile([[1, 0], [-1, 0]]),
            grid=full_grid)
        res = qb.variation_residuals(bad, r=0.5)
        assert res["residual_inner"] > 1e-2
        assert qb.smoothed_I(bad, r=0.5) == pytest.approx(0.5, abs=1e-4)

    def test_constant_map_guarded_as_degenerate(self, small_grid):
        v = np.ones((1, small_grid.n_rings, small_grid.n_theta, 2))
        f = qb.QFunction(grid=small_grid, values=v, monodromy=[0],
                         metadata={})
        res = qb.variation_residuals(f, r=small_grid.r_max)
        assert res["reason"] == "degenerate"
        assert np.isnan(res["residual_outer"])
        assert np.isnan(res["residual_inner"])


class TestProfiles:
    def test_curve23_profile_constant(self, curve_cache, full_grid):
        f = curve_cache(2, 3)
        prof = qb.frequency_profile(f, radii=qb.default_profile_radii(
            full_grid, octaves=2.0))
        for rec in prof.valid_records():
            assert abs(rec.I - 1.5) < 1e-3
            # stored I is exactly the recomputation r D / H
            assert rec.I == rec.r * rec.D / rec.H

    def test_cutoff_limits_agree(self, curve_cache, full_grid):
        f = curve_cache(2, 3)
        radii = qb.default_profile_radii(full_grid, octaves=2.0)
        lim_ramp = qb.frequency_limit(
            qb.frequency_profile(f, radii=radii, cutoff=qb.RAMP))
        lim_sharp = qb.frequency_limit(
            qb.frequency_profile(f, radii=radii, cutoff=qb.SHARP))
        assert lim_sharp["estimate"] == pytest.approx(
            lim_ramp["estimate"], rel=0.01)

    def test_reversed_radii_rejected(self, curve_cache):
        with pytest.raises(ValueError):
            qb.frequency_profile(curve_cache(2, 3), radii=[0.5, 0.25])

    def test_empty_radii_rejected(self, curve_cache):
        with pytest.raises(ValueError):
            qb.frequency_profile(curve_cache(2, 3), radii=[])

    def test_csv_roundtrip_precision(self, curve_cache, full_grid):
        f = curve_cache(2, 3)
        prof = qb.frequency_profile(f, radii=qb.default_profile_radii(
            full_grid, octaves=1.0))
        text = prof.to_csv()
        header, *rows = text.strip().split("\n")
        assert header == "r,D,H,I,E,G,Sigma,res_outer,res_inner,valid"
        first = rows[0].split(",")
        assert float(first[3]) == prof.records[0].I  # 17 digits roundtrip

    def test_thread_count_does_not_change_bytes(self, curve_cache, full_grid):
        f = curve_cache(3, 4)
        radii = qb.default_profile_radii(full_grid, octaves=2.0)
        a = qb.frequency_profile(f, radii=radii, threads=1).to_csv()
        b = qb.frequency_profile(f, radii=radii, threads=4).to_csv()
        assert a == b


class TestFrequencyLimit:
    def test_curve_estimates(self, curve_cache, full_grid):
        radii = qb.default_profile_radii(full_grid, octaves=3.0)
        for (q, p) in [(2, 3), (3, 4)]:
            prof = qb.frequency_profile(curve_cache(q, p), radii=radii)
            lim = qb.frequency_limit(prof)
            assert lim["estimate"] == pytest.approx(p / q, abs=0.02)
            assert lim["spread"] < 0.02

    def test_homogeneous_estimate_exact(self, full_grid):
        f = qb.homogeneous_map(2.0, grid=full_grid)
        prof = qb.frequency_profile(f, radii=qb.default_profile_radii(
            full_grid, octaves=2.0))
        lim = qb.frequency_limit(prof)
        assert lim["estimate"] == pytest.approx(2.0, abs=1e-4)
        assert lim["spread"] < 1e-4

    def test_insufficient_data(self, curve_cache, full_grid):
        f = curve_cache(2, 3)
        prof = qb.frequency_profile(f, radii=[0.5, 0.6, 0.7])
        with pytest.raises(qb.DataError):
            qb.frequency_limit(prof)


class TestInvariances:
    def test_amplitude_invariance(self, curve_cache):
        f = curve_cache(2, 3)
        g = f.replace_values(7.0 * f.values)
        for s in (1.0, 0.25):
            assert abs(qb.smoothed_I(g, r=s) - qb.smoothed_I(f, r=s)) < 1e-12

    def test_scale_invariance_on_aligned_dilations(self, curve_cache):
        f = curve_cache(2, 3)
        g = qb.rescale(f, None, 0.25)
        assert abs(qb.smoothed_I(g, r=0.5) - qb.smoothed_I(f, r=0.125)) < 1e-10

    def test_monotonicity_on_minimizers(self, curve_cache, full_grid):
        radii = qb.default_profile_radii(full_grid, octaves=3.0)
        for (q, p) in [(2, 3), (3, 5)]:
            prof = qb.frequency_profile(curve_cache(q, p), radii=radii)
            I = [rec.I for rec in prof.valid_records()]
            diffs = np.subtract.outer(I, I)  # I[i] - I[j]
            upper = diffs[np.triu_indices(len(I), 1)]
            assert (-upper).min() >= -1e-3  # I(r2) - I(r1) for r2 > r1

    def test_energy_decomposition(self, small_grid, rng):
        from conftest import random_smooth_qfunction
        for _ in range(20):
            q = int(rng.integers(2, 5))
            f = random_smooth_qfunction(small_grid, q, rng)
            D_f = qb.dirichlet_energy(f, small_grid.r_max)
            D_v = qb.dirichlet_energy(qb.average_free_part(f),
                                      small_grid.r_max)
            D_eta = qb.dirichlet_energy(qb.eta_map(f), small_grid.r_max)
            assert abs(D_f - D_v - q * D_eta) <= 1e-10 * abs(D_f)

    def test_decay_sandwich(self, curve_cache):
        # int_{B_rho} |Du|^2 <= rho^(m + 2 I0 - 2) int_{B_1} |Du|^2
        f = curve_cache(2, 3)
        total = qb.dirichlet_energy(f, 1.0)
        for rho in (0.5, 0.25, 0.125):
            lhs = qb.dirichlet_energy(f, rho)
            rhs = rho ** (2 + 2 * 1.5 - 2) * total
            assert lhs <= rhs * 1.02
            assert lhs >= rhs * 0.98


class TestOffCenter:
    def test_recentered_profile_runs(self, curve_cache):
        f = curve_cache(2, 3)
        val = qb.smoothed_I(f, x=(0.3, 0.0), r=0.02)
        assert np.isfinite(val)
        # away from the branch point the map is a pair of regular branches,
        # so the frequency at a regular point is small
        assert 0 <= val < 1.0

    def test_recenter_rejects_grid_overflow(self, curve_cache):
        with pytest.raises(qb.RangeError):
            qb.recenter(curve_cache(2, 3), (1.5, 0.0))
        # too close to the branch point for a multivalued selection
        with pytest.raises(qb.RangeError):
            qb.recenter(curve_cache(2, 3), (1e-4, 0.0))
