"""Tests for the dyadic decomposition and the norm layer."""

import numpy as np
import pytest

from gsqg import (
    BesovParams,
    GridSpec,
    RealField,
    besov_norm,
    build_partition,
    dyadic_block,
    lp_norm,
    sobolev_norm,
)
from gsqg.inequalities import sample_field
from gsqg.spectral import _wavenumbers

GRID = GridSpec(64)
PARTITION = build_partition(GRID)


class TestPartition:
    def test_origin(self):
        chi, phi = PARTITION.chi, PARTITION.phi
        assert chi(0.0) == 1.0
        for j in range(PARTITION.j_max + 1):
            assert phi(0.0 / 2**j) == 0.0

    def test_unit_radius_two_blocks(self):
        chi, phi = PARTITION.chi, PARTITION.phi
        assert abs(chi(1.0) + phi(1.0) - 1.0) < 1e-15
        # only j = 0 overlaps |k| = 1
        for j in range(1, PARTITION.j_max + 1):
            assert phi(1.0 / 2**j) == 0.0

    def test_radius_three_supports(self):
        chi, phi = PARTITION.chi, PARTITION.phi
        assert chi(3.0) == 0.0
        assert phi(3.0) == 0.0  # j = 0: 3 > 8/3
        contributions = {j: float(phi(3.0 / 2**j)) for j in range(PARTITION.j_max + 1)}
        assert all(v == 0.0 for j, v in contributions.items() if j not in (1, 2))
        assert abs(sum(contributions.values()) - 1.0) < 1e-10

    def test_partition_of_unity_on_resolved_magnitudes(self):
        _, _, kmag = _wavenumbers(GRID)
        total = PARTITION.chi(kmag) + sum(
            PARTITION.phi(kmag / 2.0**j) for j in range(PARTITION.j_max + 1)
        )
        assert np.max(np.abs(total - 1.0)) <= 1e-10

    def test_profiles_bounded_and_supported(self):
        r = np.linspace(0.0, 200.0, 40001)
        chi = np.asarray(PARTITION.chi(r))
        phi = np.asarray(PARTITION.phi(r))
        assert np.all((chi >= -1e-15) & (chi <= 1.0 + 1e-15))
        assert np.all((phi >= -1e-15) & (phi <= 1.0 + 1e-15))
        assert np.all(chi[r > 4.0 / 3.0] == 0.0)
        assert np.all(phi[(r < 0.75) | (r > 8.0 / 3.0)] == 0.0)

    def test_j_max_covers_grid(self):
        # largest resolved magnitude still lands below the flat part of chi
        _, _, kmag = _wavenumbers(GRID)
        assert float(np.max(kmag)) / 2.0 ** (PARTITION.j_max + 1) <= 0.75


class TestDyadicBlocks:
    def test_sine_uses_two_blocks(self):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(x1))
        nonzero = []
        total = np.zeros_like(f.values)
        for j in range(-1, PARTITION.j_max + 1):
            b = dyadic_block(f, j, PARTITION)
            total += b.values
            if np.max(np.abs(b.values)) > 1e-13:
                nonzero.append(j)
        assert nonzero == [-1, 0]
        assert np.max(np.abs(total - f.values)) <= 1e-10

    def test_high_mode_misses_low_block(self):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(4 * x1))
        b = dyadic_block(f, -1, PARTITION)
        assert np.max(np.abs(b.values)) < 1e-14

    def test_reconstruction_random(self):
        f = sample_field(GRID, seed=5, index=3, gamma=2.0, band=(1, 20))
        total = sum(
            dyadic_block(f, j, PARTITION).values
            for j in range(-1, PARTITION.j_max + 1)
        )
        assert np.max(np.abs(total - f.values)) <= 1e-10

    def test_out_of_range_rejected(self):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(x1))
        with pytest.raises(ValueError, match="block index"):
            dyadic_block(f, -2, PARTITION)
        with pytest.raises(ValueError, match="block index"):
            dyadic_block(f, PARTITION.j_max + 1, PARTITION)

    def test_separated_blocks_are_disjoint(self):
        f = sample_field(GRID, seed=9, index=0, gamma=2.0, band=(1, 20))
        scale = np.max(np.abs(f.values))
        for i, j in ((-1, 1), (0, 2), (1, 3), (2, 5)):
            twice = dyadic_block(dyadic_block(f, j, PARTITION), i, PARTITION)
            assert np.max(np.abs(twice.values)) <= 1e-12 * scale


class TestLpNorm:
    def test_sine_l2(self):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(x1))
        assert abs(lp_norm(f, 2) - 1.0 / np.sqrt(2.0)) < 1e-14

    def test_sine_linf(self):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(x1))
        assert 1.0 - 1e-6 <= lp_norm(f, np.inf) <= 1.0

    def test_sine_l4_closed_form(self):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(x1))
        closed = (3.0 / 8.0) ** 0.25
        quadrature = float(np.mean(np.abs(f.values) ** 4) ** 0.25)
        assert abs(lp_norm(f, 4) - closed) < 1e-13
        assert abs(lp_norm(f, 4) - quadrature) < 1e-15

    def test_rejects_p_below_one(self):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(x1))
        with pytest.raises(ValueError, match="p must be"):
            lp_norm(f, 0.5)


class TestBesovNorm:
    def test_zero_field(self):
        zero = RealField.zeros(GRID)
        for params in (BesovParams(0, 2, 2), BesovParams(2.5, 4, np.inf), BesovParams(-1, np.inf, 1)):
            assert besov_norm(zero, params, PARTITION) == 0.0

    @pytest.mark.parametrize("s", [0.0, 1.0, 2.5])
    def test_sine_two_block_closed_form(self, s):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(x1))
        chi1 = float(PARTITION.chi(1.0))
        phi1 = float(PARTITION.phi(1.0))
        expected = np.sqrt(chi1**2 + 2.0 ** (2 * s) * phi1**2) * lp_norm(f, 2)
        got = besov_norm(f, BesovParams(s, 2, 2), PARTITION)
        assert abs(got - expected) <= 1e-12 * expected

    def test_b022_comparable_to_l2(self):
        # chi + sum phi = 1 with at most two positive terms at each k, so
        # the squared-block sum sits between 1/2 and 1 of the L^2 norm
        for i in range(30):
            f = sample_field(GRID, seed=123, index=i, gamma=2.5, band=(1, 20))
            ratio = besov_norm(f, BesovParams(0, 2, 2), PARTITION) / lp_norm(f, 2)
            assert np.sqrt(0.5) - 1e-9 <= ratio <= 1.0 + 1e-9

    def test_monotone_in_s_per_field(self):
        for i in range(10):
            f = sample_field(GRID, seed=77, index=i, gamma=2.5, band=(1, 20))
            for p, q in ((2.0, 2.0), (4.0, 1.0), (np.inf, np.inf)):
                norms = [
                    besov_norm(f, BesovParams(s, p, q), PARTITION)
                    for s in (-1.0, 0.0, 0.5, 1.0, 2.5)
                ]
                assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))

    def test_q_inf_is_sup(self):
        f = sample_field(GRID, seed=15, index=0, gamma=2.5, band=(1, 20))
        sup = besov_norm(f, BesovParams(1.0, 2, np.inf), PARTITION)
        summed = besov_norm(f, BesovParams(1.0, 2, 2), PARTITION)
        assert sup <= summed * (1 + 1e-12)


class TestSobolevNorm:
    @pytest.mark.parametrize("s", [0.0, 1.0, 2.5, -1.0])
    def test_sine_closed_form(self, s):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(x1))
        expected = 2.0 ** ((s - 1.0) / 2.0)
        assert abs(sobolev_norm(f, s) - expected) <= 1e-12 * expected

    def test_s_zero_is_l2(self):
        f = sample_field(GRID, seed=4, index=0, gamma=2.5, band=(1, 20))
        assert abs(sobolev_norm(f, 0.0) - lp_norm(f, 2)) <= 1e-12 * lp_norm(f, 2)

    def test_mode_two_h1(self):
        f = RealField.from_function(GRID, lambda x1, x2: np.sin(2 * x1))
        assert abs(sobolev_norm(f, 1.0) - np.sqrt(2.5)) < 1e-13


class TestNormEquivalence:
    @pytest.mark.parametrize("s", [0.0, 1.0, 2.0, 2.5])
    def test_besov_sobolev_ratio_band(self, s):
        grid_fine = GridSpec(128)
        part_fine = build_partition(grid_fine)
        ratios64, ratios128 = [], []
        for i in range(100):
            f64 = sample_field(GRID, seed=2024, index=i, gamma=2.5, band=(1, 21))
            f128 = sample_field(grid_fine, seed=2024, index=i, gamma=2.5, band=(1, 21))
            ratios64.append(
                besov_norm(f64, BesovParams(s, 2, 2), PARTITION) / sobolev_norm(f64, s)
            )
            ratios128.append(
                besov_norm(f128, BesovParams(s, 2, 2), part_fine) / sobolev_norm(f128, s)
            )
        for ratios in (ratios64, ratios128):
            c, C = min(ratios), max(ratios)
            assert C / c <= 4.0
        # the interval is stable under grid refinement
        assert 0.8 <= min(ratios128) / min(ratios64) <= 1.25
        assert 0.8 <= max(ratios128) / max(ratios64) <= 1.25

    def test_lower_integrability_embedding_bounded(self):
        # moving p = 2 to larger p at the critical regularity drop
        s = 2.5
        sups = {}
        for n in (64, 128):
            grid = GridSpec(n)
            part = build_partition(grid)
            worst = 0.0
            for i in range(40):
                f = sample_field(grid, seed=31, index=i, gamma=2.5, band=(1, 21))
                src = besov_norm(f, BesovParams(s, 2, 2), part)
                for p_t in (4.0, np.inf):
                    s_t = s - 2.0 * (0.5 - (0.0 if np.isinf(p_t) else 1.0 / p_t))
                    tgt = besov_norm(f, BesovParams(s_t, p_t, 2), part)
                    worst = max(worst, tgt / src)
            sups[n] = worst
        assert np.isfinite(sups[64]) and np.isfinite(sups[128])
        assert 0.8 <= sups[128] / sups[64] <= 1.25
