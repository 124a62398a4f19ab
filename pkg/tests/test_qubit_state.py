import math

import numpy as np
import pytest

from spinwave_bell import (
    Arm,
    ChannelSpec,
    MeasurementSetting,
    TwoQubitState,
    apply_arm_channel,
    apply_werner,
    click_probabilities,
    correlation_expected,
    make_bell_phi_plus,
    rotate_arm,
)
from spinwave_bell.errors import DegenerateChannelError

CANONICAL = [(math.pi / 4, math.pi / 8), (0, math.pi / 8),
             (0, -math.pi / 8), (math.pi / 4, -math.pi / 8)]
SIGNS = [1, 1, 1, -1]


def chsh_of(state):
    return sum(
        sign * correlation_expected(state, MeasurementSetting(ts, ti))
        for (ts, ti), sign in zip(CANONICAL, SIGNS)
    )


def random_state(rng):
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = a @ a.conj().T
    return TwoQubitState(rho / np.trace(rho))


def assert_valid(state):
    rho = state.rho
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
    assert abs(np.trace(rho).real - 1.0) < 1e-12
    assert np.linalg.eigvalsh(rho).min() >= -1e-10


class TestBellState:
    def test_matrix_elements(self):
        rho = make_bell_phi_plus().rho
        expected = np.zeros((4, 4))
        expected[0, 0] = expected[0, 3] = expected[3, 0] = expected[3, 3] = 0.5
        np.testing.assert_allclose(rho, expected, atol=1e-15)

    def test_purity(self):
        assert make_bell_phi_plus().purity() == pytest.approx(1.0)

    def test_marginals_maximally_mixed(self):
        state = make_bell_phi_plus()
        for arm in (Arm.SIGNAL, Arm.IDLER):
            np.testing.assert_allclose(state.partial_trace(arm), np.eye(2) / 2, atol=1e-15)

    def test_invalid_matrices_rejected(self):
        with pytest.raises(ValueError):
            TwoQubitState(np.eye(4))  # trace 4
        bad = np.eye(4) / 4
        bad = bad.astype(complex)
        bad[0, 1] = 0.9  # not Hermitian
        with pytest.raises(ValueError):
            TwoQubitState(bad)


class TestWerner:
    def test_visibility_one_is_identity(self):
        state = make_bell_phi_plus()
        np.testing.assert_allclose(apply_werner(state, 1.0).rho, state.rho, atol=1e-15)

    def test_visibility_zero_is_maximally_mixed(self):
        out = apply_werner(make_bell_phi_plus(), 0.0)
        np.testing.assert_allclose(out.rho, np.eye(4) / 4, atol=1e-15)

    def test_chsh_scales_with_visibility(self):
        # oracle: closed form S = 2 sqrt(2) V for a Werner state
        state = apply_werner(make_bell_phi_plus(), 0.94)
        assert chsh_of(state) == pytest.approx(2 * math.sqrt(2) * 0.94, abs=1e-10)

    def test_out_of_range_rejected(self):
        for v in (-0.1, 1.1):
            with pytest.raises(ValueError):
                apply_werner(make_bell_phi_plus(), v)

    def test_commutes_with_rotation(self):
        rng = np.random.default_rng(7)
        state = random_state(rng)
        for _ in range(5):
            theta = rng.uniform(-math.pi, math.pi)
            a = rotate_arm(apply_werner(state, 0.7), Arm.SIGNAL, theta)
            b = apply_werner(rotate_arm(state, Arm.SIGNAL, theta), 0.7)
            np.testing.assert_allclose(a.rho, b.rho, atol=1e-12)


class TestRotation:
    def test_zero_rotation(self):
        state = make_bell_phi_plus()
        np.testing.assert_allclose(rotate_arm(state, Arm.SIGNAL, 0.0).rho, state.rho)

    def test_half_turn_moves_h_to_v(self):
        state = rotate_arm(make_bell_phi_plus(), Arm.SIGNAL, math.pi / 2)
        p13, *_ = click_probabilities(state, MeasurementSetting(0, 0))
        assert p13 == pytest.approx(0.0, abs=1e-12)

    def test_joint_rotation_invariance(self):
        state = make_bell_phi_plus()
        for theta in np.linspace(-1.5, 1.5, 7):
            rotated = rotate_arm(rotate_arm(state, Arm.SIGNAL, theta), Arm.IDLER, theta)
            np.testing.assert_allclose(rotated.rho, state.rho, atol=1e-12)

    def test_preserves_validity(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            assert_valid(rotate_arm(random_state(rng), Arm.IDLER, rng.uniform(-3, 3)))


class TestArmChannel:
    def test_identity_channel(self):
        state = make_bell_phi_plus()
        out, p = apply_arm_channel(state, Arm.SIGNAL, ChannelSpec.identity())
        assert p == pytest.approx(1.0)
        np.testing.assert_allclose(out.rho, state.rho, atol=1e-14)

    def test_balanced_loss_preserves_state(self):
        # equal H/V transmission 0.54: state unchanged, survival 0.54
        channel = ChannelSpec(trans_h=0.54, trans_v=0.54, depol=0.0)
        state = make_bell_phi_plus()
        out, p = apply_arm_channel(state, Arm.SIGNAL, channel)
        assert p == pytest.approx(0.54, abs=1e-12)
        np.testing.assert_allclose(out.rho, state.rho, atol=1e-12)

    def test_contrast_limited_depolarization(self):
        # 100:1 contrast -> depol 2/101 -> visibility factor 99/101
        channel = ChannelSpec(trans_h=1.0, trans_v=1.0, depol=2.0 / 101.0)
        out, _ = apply_arm_channel(make_bell_phi_plus(), Arm.SIGNAL, channel)
        setting = MeasurementSetting(0.3, -0.2)
        expected = (99.0 / 101.0) * correlation_expected(make_bell_phi_plus(), setting)
        assert correlation_expected(out, setting) == pytest.approx(expected, abs=1e-12)

    def test_degenerate_channel(self):
        channel = ChannelSpec(trans_h=0.0, trans_v=0.0, depol=0.0)
        with pytest.raises(DegenerateChannelError):
            apply_arm_channel(make_bell_phi_plus(), Arm.SIGNAL, channel)

    def test_conditional_state_valid(self):
        rng = np.random.default_rng(11)
        channel = ChannelSpec(trans_h=0.8, trans_v=0.3, depol=0.1, rel_phase=0.4)
        for _ in range(10):
            out, p = apply_arm_channel(random_state(rng), Arm.IDLER, channel)
            assert 0.0 < p <= 1.0
            assert_valid(out)


class TestClickProbabilities:
    def test_perfect_correlation(self):
        probs = click_probabilities(make_bell_phi_plus(), MeasurementSetting(0, 0))
        np.testing.assert_allclose(probs, (0.5, 0.0, 0.0, 0.5), atol=1e-12)

    def test_complementary_bases(self):
        probs = click_probabilities(make_bell_phi_plus(), MeasurementSetting(0, math.pi / 4))
        np.testing.assert_allclose(probs, (0.25,) * 4, atol=1e-12)

    def test_werner_e_at_table_setting(self):
        state = apply_werner(make_bell_phi_plus(), 0.94)
        e = correlation_expected(state, MeasurementSetting(0, math.pi / 8))
        assert e == pytest.approx(0.94 * math.cos(math.pi / 4), abs=1e-12)

    def test_sum_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            setting = MeasurementSetting(rng.uniform(-2, 2), rng.uniform(-2, 2),
                                         flipped=bool(rng.integers(2)))
            assert sum(click_probabilities(random_state(rng), setting)) == \
                pytest.approx(1.0, abs=1e-12)


class TestCorrelation:
    def test_closed_form_random_angles(self):
        state = make_bell_phi_plus()
        rng = np.random.default_rng(42)
        for _ in range(100):
            ts, ti = rng.uniform(-math.pi / 2, math.pi / 2, size=2)
            e = correlation_expected(state, MeasurementSetting(ts, ti))
            assert e == pytest.approx(math.cos(2 * (ts - ti)), abs=1e-10)

    def test_basic_values(self):
        state = make_bell_phi_plus()
        assert correlation_expected(state, MeasurementSetting(0, 0)) == pytest.approx(1.0)
        e = correlation_expected(state, MeasurementSetting(math.pi / 4, math.pi / 8))
        assert e == pytest.approx(math.cos(math.pi / 4), abs=1e-12)

    def test_tsirelson_saturation(self):
        assert chsh_of(make_bell_phi_plus()) == pytest.approx(2 * math.sqrt(2), abs=1e-10)

    def test_flip_invariance_for_symmetric_states(self):
        for state in (make_bell_phi_plus(), apply_werner(make_bell_phi_plus(), 0.8)):
            for ts, ti in CANONICAL:
                plain = correlation_expected(state, MeasurementSetting(ts, ti))
                flipped = correlation_expected(state, MeasurementSetting(ts, ti, flipped=True))
                assert flipped == pytest.approx(plain, abs=1e-10)


class TestMeasurementSetting:
    def test_canonical_range(self):
        s = MeasurementSetting(math.pi / 2, -math.pi)
        assert -math.pi / 2 <= s.theta_s < math.pi / 2
        assert -math.pi / 2 <= s.theta_i < math.pi / 2

    def test_wraparound_is_physical(self):
        # rotations have period pi, so wrapping must not change probabilities
        state = make_bell_phi_plus()
        a = click_probabilities(state, MeasurementSetting(0.3, 0.1))
        b = click_probabilities(state, MeasurementSetting(0.3 + math.pi, 0.1 - math.pi))
        np.testing.assert_allclose(a, b, atol=1e-12)
