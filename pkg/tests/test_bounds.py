import math

import numpy as np
import pytest

import starspec as ss
from starspec.bounds import (
    check_small_angle_scaling,
    nonexistence_threshold,
    scaled_coupling,
    segment_existence_length,
    small_angle_bounds,
)
from starspec.errors import DegenerateAngle
from starspec.geometry import StarConfig
from starspec.kernels import PSI_ONE


class TestScaledCoupling:
    def test_identity(self):
        assert scaled_coupling(0.37, 1.0) == 0.37

    def test_log_cancels(self):
        assert scaled_coupling(2.0, math.exp(2 * math.pi)) == pytest.approx(1.0, abs=1e-14)

    def test_value(self):
        assert scaled_coupling(0.0, 2.0) == pytest.approx(-math.log(2) / (2 * math.pi), rel=1e-14)
        assert scaled_coupling(0.0, 2.0) == pytest.approx(-0.110318, abs=1e-6)


class TestSegmentExistenceLength:
    def test_alpha_zero(self):
        # 2 pi e^{-psi(1)} = 11.19070...
        assert segment_existence_length(0.0) == pytest.approx(11.190808, abs=1e-5)

    def test_exponent_vanishes(self):
        assert segment_existence_length(PSI_ONE / (2 * math.pi)) == pytest.approx(
            2 * math.pi, rel=1e-14
        )

    def test_increasing(self):
        alphas = np.linspace(-1, 1, 20)
        vals = [segment_existence_length(a) for a in alphas]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestNonexistenceThreshold:
    def test_single_arm_L4(self):
        cfg = ss.make_star([(0, 0, 1)], 4.0, 0.0)
        assert nonexistence_threshold(cfg, C=7.0) == 0.0

    def test_antipodal_value(self):
        cfg = ss.make_star(ss.sharp_configuration(2), 4.0, 0.0)
        want = 2.0 * (math.sqrt(2) / (4 * math.pi) * math.log(2.0) + 1.0)
        got = nonexistence_threshold(cfg, C=1.0)
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(2.156, abs=1e-3)

    def test_unordered_halves_the_pair_sum(self):
        cfg = ss.make_star(ss.sharp_configuration(4), 4.0, 0.0)
        full = nonexistence_threshold(cfg, C=0.5)
        half = nonexistence_threshold(cfg, C=0.5, ordered_pairs=False)
        base = cfg.n_arms / (2 * math.pi) * math.log(cfg.arm_length / 4.0)
        assert full - base == pytest.approx(2.0 * (half - base), rel=1e-12)

    def test_diverges_for_closing_angle(self):
        phi = 1e-5
        dirs = np.array([[0, 0, 1.0], [math.sin(phi), 0, math.cos(phi)]])
        cfg = StarConfig(directions=dirs, arm_length=1.0, coupling=0.0)
        assert nonexistence_threshold(cfg, C=1.0) > 5.0

    def test_degenerate_angle(self):
        dirs = np.array([[0, 0, 1.0], [0, 0, 1.0]])
        cfg = StarConfig(directions=dirs, arm_length=1.0, coupling=0.0)
        with pytest.raises(DegenerateAngle):
            nonexistence_threshold(cfg, C=1.0)

    def test_consistent_with_no_bound_states(self):
        # one margin above the threshold at C=0.5 the spectrum is empty
        cfg = ss.make_star(
            [(0, 0, 1), (math.sin(2.0), 0, math.cos(2.0))], 1.0, 0.0
        )
        alpha = nonexistence_threshold(cfg, C=0.5) + 1.0
        assert ss.count_bound_states(cfg, ss.default_mesh(1.0), alpha) == 0

    def test_existence_at_1p1_times_guarantee(self):
        # a segment 10% longer than the guarantee has a bound state
        total = 1.1 * segment_existence_length(0.0)
        cfg = ss.make_star([(0, 0, 1)], total, 0.0)
        assert ss.count_bound_states(cfg, ss.default_mesh(total), 0.0) >= 1


class TestSmallAngleBounds:
    def test_upper_bound_value(self):
        b = small_angle_bounds(0.0, 1.0, 0.1, 1, C=1.0)
        gap = 1.0 - math.cos(0.1)
        want = -2 * math.sqrt(2) * math.exp(2 * PSI_ONE) / math.sqrt(gap) + math.pi**2
        assert b.upper == pytest.approx(want, rel=1e-13)
        assert b.upper == pytest.approx(-2.744, abs=2e-3)

    def test_lower_bound_formula(self):
        b = small_angle_bounds(0.2, 2.0, 0.05, 3, C=0.7)
        gap = 1.0 - math.cos(0.05)
        want = -4 * math.exp(
            2 * (-2 * math.pi * 0.7 - 2 * math.pi * 0.2 + PSI_ONE)
        ) / gap + (3 * math.pi / 2.0) ** 2
        assert b.lower == pytest.approx(want, rel=1e-13)

    def test_level_shift(self):
        b1 = small_angle_bounds(0.0, 2.0, 0.1, 1, C=1.0)
        b3 = small_angle_bounds(0.0, 2.0, 0.1, 3, C=1.0)
        shift = (math.pi / 2.0) ** 2 * (9 - 1)
        assert b3.upper - b1.upper == pytest.approx(shift, rel=1e-12)
        assert b3.lower - b1.lower == pytest.approx(shift, rel=1e-12)

    def test_divergence_rates(self):
        # after removing the level shift, the bounds diverge at exactly the
        # (1-cos phi)^{-1/2} and (1-cos phi)^{-1} rates
        shift = math.pi**2
        up, lo = [], []
        for phi in (1e-2, 1e-3):
            b = small_angle_bounds(0.0, 1.0, phi, 1, C=1.0)
            gap = 1.0 - math.cos(phi)
            up.append((b.upper - shift) * math.sqrt(gap))
            lo.append((b.lower - shift) * gap)
        assert up[0] == pytest.approx(up[1], rel=1e-12)
        assert lo[0] == pytest.approx(lo[1], rel=1e-12)


class TestSmallAngleScaling:
    def test_report_structure(self):
        ladder = [ss.build_mesh(1.0, p, 10, 2.0) for p in (16, 24)]
        rep = check_small_angle_scaling(
            0.0, 1.0, [0.2, 0.1], mesh_ladder=ladder, e_tol=0.5
        )
        assert rep.phi_grid == (0.2, 0.1)
        assert len(rep.energies) == 2
        assert rep.energies[1] < rep.energies[0] < 0.0
        assert rep.upper_ok
        assert rep.fit_points == 2
        assert 0.4 <= rep.exponent <= 1.1
        assert rep.passes
