import math

import numpy as np
import pytest
from scipy import stats

from spinwave_bell import (
    CorrelationRecord,
    CountMatrix,
    MeasurementSetting,
    apply_werner,
    bell_result,
    bootstrap_sigma,
    chsh_S,
    click_probabilities,
    correlation_E,
    fit_fringe,
    make_bell_phi_plus,
)
from spinwave_bell.analysis import CANONICAL_SETTINGS, CHSH_SIGNS
from spinwave_bell.errors import (
    FitError,
    InsufficientDataError,
    SettingsMismatchError,
)


def matrix_with_counts(setting, counts, flipped=None):
    matrix = CountMatrix(setting=setting)
    matrix.counts += np.asarray(counts, dtype=np.int64)
    if flipped is not None:
        matrix.counts_flipped += np.asarray(flipped, dtype=np.int64)
    matrix.trials = int(matrix.counts.sum() + matrix.counts_flipped.sum())
    return matrix


class TestCorrelationE:
    def test_pure_correlated_counts(self):
        matrix = matrix_with_counts(MeasurementSetting(0, 0), [50, 0, 0, 50])
        e, sigma, n = correlation_E(matrix)
        assert e == 1.0
        assert sigma == 0.0
        assert n == 100

    def test_published_style_uncertainty(self):
        # n = 250 events at E = 0.68 gives the closed-form multinomial sigma
        matrix = matrix_with_counts(MeasurementSetting(0, math.pi / 8), [105, 20, 20, 105])
        e, sigma, n = correlation_E(matrix)
        assert n == 250
        assert e == pytest.approx(0.68)
        assert sigma == pytest.approx(math.sqrt((1 - 0.68**2) / 250), rel=1e-12)
        assert sigma == pytest.approx(0.046, abs=0.001)

    def test_uses_flip_balanced_counts(self):
        matrix = matrix_with_counts(
            MeasurementSetting(0, 0), [10, 0, 0, 10], flipped=[5, 0, 0, 5]
        )
        e, _, n = correlation_E(matrix)
        assert e == 1.0
        assert n == 30

    def test_empty_matrix_rejected(self):
        with pytest.raises(InsufficientDataError):
            correlation_E(CountMatrix(setting=MeasurementSetting(0, 0)))


class TestChshS:
    def records(self, e_values, sigma=0.05):
        return [
            CorrelationRecord(ts, ti, e, sigma, 250)
            for (ts, ti), e in zip(CANONICAL_SETTINGS, e_values)
        ]

    def test_published_combination(self):
        # signed sum of one published data set: 0.67 + 0.66 + 0.68 - (-0.65)
        s, sigma_s = chsh_S(self.records([0.67, 0.66, 0.68, -0.65], sigma=0.05))
        assert s == pytest.approx(2.66, abs=1e-12)
        assert sigma_s == pytest.approx(0.05 * 2.0, rel=1e-12)

    def test_second_published_combination(self):
        s, _ = chsh_S(self.records([0.65, 0.78, 0.58, -0.54]))
        assert s == pytest.approx(2.55, abs=1e-12)

    def test_order_independent(self):
        records = self.records([0.7, 0.6, 0.65, -0.68])
        s_a, _ = chsh_S(records)
        s_b, _ = chsh_S(list(reversed(records)))
        assert s_a == s_b

    def test_wrong_setting_rejected(self):
        records = self.records([0.7, 0.6, 0.65, -0.68])
        records[1] = CorrelationRecord(0.3, 0.1, 0.5, 0.05, 250)
        with pytest.raises(SettingsMismatchError):
            chsh_S(records)

    def test_duplicate_setting_rejected(self):
        records = self.records([0.7, 0.6, 0.65, -0.68])
        records[1] = records[0]
        with pytest.raises(SettingsMismatchError):
            chsh_S(records)

    def test_wrong_count_rejected(self):
        with pytest.raises(SettingsMismatchError):
            chsh_S(self.records([0.7, 0.6, 0.65, -0.68])[:3])

    def test_tsirelson_bound_over_random_states(self):
        # no two-qubit state can push the canonical combination past 2 sqrt(2)
        rng = np.random.default_rng(10)
        bound = 2 * math.sqrt(2)
        from spinwave_bell.qubit_state import TwoQubitState, correlation_expected

        for _ in range(200):
            a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            rho = a @ a.conj().T
            state = TwoQubitState(rho / np.trace(rho))
            s = sum(
                sign * correlation_expected(state, MeasurementSetting(ts, ti))
                for (ts, ti), sign in zip(CANONICAL_SETTINGS, CHSH_SIGNS)
            )
            assert abs(s) <= bound + 1e-9


class TestBellResult:
    def test_werner_dataset(self):
        # exact expected counts for a V = 0.9 Werner state, n = 10000 each
        state = apply_werner(make_bell_phi_plus(), 0.9)
        matrices = []
        for ts, ti in CANONICAL_SETTINGS:
            probs = np.array(click_probabilities(state, MeasurementSetting(ts, ti)))
            counts = np.round(probs * 10_000).astype(int)
            matrices.append(matrix_with_counts(MeasurementSetting(ts, ti), counts))
        result = bell_result(matrices)
        assert result.s_value == pytest.approx(2 * math.sqrt(2) * 0.9, abs=1e-3)
        assert result.violates
        assert result.total_events == sum(m.counts.sum() for m in matrices)

    def test_json_fields(self):
        import json

        matrices = [
            matrix_with_counts(MeasurementSetting(ts, ti), [80, 10, 10, 80])
            for ts, ti in CANONICAL_SETTINGS
        ]
        data = json.loads(bell_result(matrices).to_json())
        assert set(data) == {
            "e_values", "S", "sigma_S", "total_events", "violates_classical_bound",
        }
        assert len(data["e_values"]) == 4


class TestBootstrap:
    def test_agrees_with_closed_form(self):
        matrix = matrix_with_counts(MeasurementSetting(0, math.pi / 8), [100, 25, 25, 100])
        e, sigma, _ = correlation_E(matrix)
        boot = bootstrap_sigma(matrix, resamples=20_000, rng=np.random.default_rng(11))
        assert boot == pytest.approx(sigma, rel=0.05)

    def test_balanced_counts(self):
        # E = 0 with n = 200: sigma = 1/sqrt(200)
        matrix = matrix_with_counts(MeasurementSetting(0, 0), [50, 50, 50, 50])
        boot = bootstrap_sigma(matrix, resamples=20_000, rng=np.random.default_rng(12))
        assert boot == pytest.approx(1.0 / math.sqrt(200), rel=0.05)

    def test_minimum_resamples(self):
        matrix = matrix_with_counts(MeasurementSetting(0, 0), [50, 50, 50, 50])
        with pytest.raises(ValueError):
            bootstrap_sigma(matrix, resamples=10, rng=np.random.default_rng(0))


class TestFringeFit:
    def synthetic(self, rng, amplitude=0.95, phase=0.4, offset=0.0, sigma=0.05,
                  n_points=12):
        theta = np.linspace(-math.pi / 2, math.pi / 2, n_points, endpoint=False)
        e = amplitude * np.cos(phase - 2.0 * theta) + offset
        noisy = e + rng.standard_normal(n_points) * sigma
        return [(t, v, sigma) for t, v in zip(theta, noisy)]

    def test_noise_free_recovery(self):
        rng = np.random.default_rng(13)
        points = self.synthetic(rng, sigma=0.0)
        points = [(t, v, 0.0) for t, v, _ in points]
        fit = fit_fringe(points)
        assert fit.amplitude == pytest.approx(0.95, abs=1e-10)
        assert fit.phase == pytest.approx(0.4, abs=1e-10)
        assert fit.offset == pytest.approx(0.0, abs=1e-10)
        assert fit.residual_rms < 1e-10

    def test_amplitude_reported_nonnegative(self):
        theta = np.linspace(-math.pi / 2, math.pi / 2, 10, endpoint=False)
        points = [(t, -0.8 * math.cos(2 * t), 0.01) for t in theta]
        fit = fit_fringe(points)
        assert fit.amplitude == pytest.approx(0.8, abs=1e-9)
        assert abs(fit.phase) == pytest.approx(math.pi, abs=1e-9)

    def test_parameter_pulls_are_normal(self):
        # claimed 1-sigma errors must match the actual estimator scatter
        rng = np.random.default_rng(14)
        pulls_a, pulls_c = [], []
        for _ in range(500):
            fit = fit_fringe(self.synthetic(rng))
            pulls_a.append((fit.amplitude - 0.95) / fit.param_sigma[0])
            pulls_c.append((fit.offset - 0.0) / fit.param_sigma[2])
        for pulls in (pulls_a, pulls_c):
            pulls = np.asarray(pulls)
            assert abs(pulls.mean()) < 0.2
            assert pulls.std() == pytest.approx(1.0, abs=0.15)
            assert stats.kstest(pulls, "norm").pvalue > 0.01

    def test_free_frequency_mode(self):
        rng = np.random.default_rng(15)
        fit = fit_fringe(self.synthetic(rng, sigma=0.02), fit_frequency=True)
        assert fit.frequency == pytest.approx(2.0, rel=0.02)
        assert 2 * math.pi / fit.frequency == pytest.approx(math.pi, rel=0.02)

    def test_too_few_points(self):
        with pytest.raises(FitError):
            fit_fringe([(0.0, 1.0, 0.1)] * 3)

    def test_narrow_span_rejected(self):
        theta = np.linspace(0.0, 0.3, 8)
        with pytest.raises(FitError):
            fit_fringe([(t, math.cos(2 * t), 0.05) for t in theta])

    def test_degenerate_angles_rejected(self):
        points = [(0.0, 1.0, 0.1)] * 4 + [(math.pi / 2, -1.0, 0.1)] * 4
        with pytest.raises(FitError):
            fit_fringe(points)

    def test_werner_visibility_from_synthetic_counts(self):
        # multinomial fringe data: fitted amplitude recovers the visibility
        visibility = 0.85
        state = apply_werner(make_bell_phi_plus(), visibility)
        rng = np.random.default_rng(16)
        theta = np.linspace(-math.pi / 2, math.pi / 2, 12, endpoint=False)
        points = []
        for t in theta:
            probs = np.array(click_probabilities(state, MeasurementSetting(0.0, t)))
            draw = rng.multinomial(2000, probs)
            e = (draw[0] + draw[3] - draw[1] - draw[2]) / 2000
            points.append((t, e, math.sqrt((1 - e * e) / 2000)))
        fit = fit_fringe(points)
        assert abs(fit.amplitude - visibility) < 2.5 * fit.param_sigma[0]
        assert abs(fit.phase) < 3 * fit.param_sigma[1]
