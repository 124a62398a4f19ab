"""Correlation and CHSH statistics with count-statistics uncertainties.

E is estimated from the flip-balanced coincidence counts; its uncertainty
uses the multinomial closed form sqrt((1 - E^2)/n), with a bootstrap
estimator available as an internal cross-check.  The fringe fitter is a
weighted linear least squares with the angular frequency fixed at 2 by the
half-waveplate physics (a free-frequency diagnostic mode exists).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .counting import CountMatrix
from .errors import FitError, InsufficientDataError, SettingsMismatchError
from .qubit_state import MeasurementSetting

# Canonical CHSH settings and their signs in S.
CANONICAL_SETTINGS = (
    (math.pi / 4, math.pi / 8),
    (0.0, math.pi / 8),
    (0.0, -math.pi / 8),
    (math.pi / 4, -math.pi / 8),
)
CHSH_SIGNS = (1.0, 1.0, 1.0, -1.0)
ANGLE_TOL = 1e-9


@dataclass(frozen=True)
class CorrelationRecord:
    theta_s: float
    theta_i: float
    e: float
    sigma: float
    n_events: int


@dataclass(frozen=True)
class BellResult:
    """Four correlation values plus the CHSH parameter and its uncertainty."""

    e_values: tuple[CorrelationRecord, ...]
    s_value: float
    sigma_s: float
    total_events: int

    @property
    def violates(self) -> bool:
        return abs(self.s_value) > 2.0

    def to_dict(self) -> dict:
        return {
            "e_values": [
                {
                    "theta_s": rec.theta_s,
                    "theta_i": rec.theta_i,
                    "E": rec.e,
                    "sigma": rec.sigma,
                    "n_events": rec.n_events,
                }
                for rec in self.e_values
            ],
            "S": self.s_value,
            "sigma_S": self.sigma_s,
            "total_events": self.total_events,
            "violates_classical_bound": self.violates,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def correlation_E(matrix: CountMatrix) -> tuple[float, float, int]:
    """E = (C13 + C24 - C14 - C23)/n from the flip-balanced counts."""
    counts = matrix.combined()
    n = int(counts.sum())
    if n == 0:
        raise InsufficientDataError(f"no coincidences at setting {matrix.setting}")
    c13, c14, c23, c24 = (int(c) for c in counts)
    e = (c13 + c24 - c14 - c23) / n
    sigma = math.sqrt(max(1.0 - e * e, 0.0) / n)
    return e, sigma, n


def chsh_S(records) -> tuple[float, float]:
    """Signed CHSH combination of four correlation records.

    Records must match the canonical settings (any order, no duplicates).
    sigma_S adds the individual sigmas in quadrature.
    """
    records = list(records)
    if len(records) != 4:
        raise SettingsMismatchError(f"need 4 correlation values, got {len(records)}")
    s = 0.0
    var = 0.0
    used = [False] * 4
    for rec in records:
        for i, (ts, ti) in enumerate(CANONICAL_SETTINGS):
            if abs(rec.theta_s - ts) < ANGLE_TOL and abs(rec.theta_i - ti) < ANGLE_TOL:
                if used[i]:
                    raise SettingsMismatchError(f"duplicate setting ({ts}, {ti})")
                used[i] = True
                s += CHSH_SIGNS[i] * rec.e
                var += rec.sigma**2
                break
        else:
            raise SettingsMismatchError(
                f"({rec.theta_s}, {rec.theta_i}) is not a canonical CHSH setting"
            )
    return s, math.sqrt(var)


def bell_result(matrices) -> BellResult:
    """Assemble a BellResult from the four canonical count matrices."""
    records = []
    for matrix in matrices:
        e, sigma, n = correlation_E(matrix)
        records.append(
            CorrelationRecord(matrix.setting.theta_s, matrix.setting.theta_i, e, sigma, n)
        )
    s, sigma_s = chsh_S(records)
    return BellResult(
        e_values=tuple(records),
        s_value=s,
        sigma_s=sigma_s,
        total_events=sum(rec.n_events for rec in records),
    )


def bootstrap_sigma(
    matrix: CountMatrix, resamples: int, rng: np.random.Generator
) -> float:
    """Standard deviation of E over multinomial resamples of the counts."""
    if resamples < 100:
        raise ValueError(f"resamples must be >= 100, got {resamples}")
    counts = matrix.combined()
    n = int(counts.sum())
    if n == 0:
        raise InsufficientDataError(f"no coincidences at setting {matrix.setting}")
    draws = rng.multinomial(n, counts / n, size=resamples)
    e = (draws[:, 0] + draws[:, 3] - draws[:, 1] - draws[:, 2]) / n
    return float(e.std())


@dataclass(frozen=True)
class FringeFit:
    """Sinusoid fit E(theta_i) = A cos(phase - freq*theta_i) + offset.

    The amplitude is reported nonnegative; the phase carries the sign.
    param_sigma holds the claimed 1-sigma errors on (amplitude, phase,
    offset) from the weighted-least-squares covariance.
    """

    amplitude: float
    phase: float
    offset: float
    residual_rms: float
    frequency: float = 2.0
    param_sigma: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def evaluate(self, theta_i) -> np.ndarray:
        theta_i = np.asarray(theta_i, dtype=float)
        return self.amplitude * np.cos(self.phase - self.frequency * theta_i) + self.offset


def fit_fringe(points, fit_frequency: bool = False) -> FringeFit:
    """Weighted least squares of E vs theta_i with fixed angular frequency 2.

    `points` is an iterable of (theta_i, E, sigma); sigma <= 0 entries get
    unit weight.  With fit_frequency=True the angular frequency is fitted
    too (diagnostic mode, nonlinear).
    """
    pts = np.array([[t, e, s] for t, e, s in points], dtype=float)
    if pts.shape[0] < 4:
        raise FitError(f"need at least 4 points, got {pts.shape[0]}")
    theta, e, sigma = pts[:, 0], pts[:, 1], pts[:, 2]
    if theta.max() - theta.min() < math.pi / 2 - 1e-9:
        raise FitError("points must span at least half a fringe period (pi/2)")
    weights = np.where(sigma > 0.0, 1.0 / np.maximum(sigma, 1e-12), 1.0)

    design = np.stack([np.cos(2.0 * theta), np.sin(2.0 * theta), np.ones_like(theta)], axis=1)
    wd = design * weights[:, None]
    if np.linalg.matrix_rank(wd) < 3:
        raise FitError("rank-deficient fringe design (degenerate angle set)")
    coef, *_ = np.linalg.lstsq(wd, e * weights, rcond=None)
    a, b, c = coef
    amplitude = math.hypot(a, b)
    phase = math.atan2(b, a)
    freq = 2.0

    if fit_frequency:

        def model(th, amp, ph, off, f):
            return amp * np.cos(ph - f * th) + off

        popt, _ = curve_fit(
            model, theta, e, p0=[amplitude, phase, c, 2.0],
            sigma=np.where(sigma > 0.0, sigma, 1.0), absolute_sigma=True, maxfev=10000,
        )
        amplitude, phase, c, freq = popt
        if amplitude < 0.0:
            amplitude = -amplitude
            phase = math.atan2(math.sin(phase + math.pi), math.cos(phase + math.pi))

    fitted = amplitude * np.cos(phase - freq * theta) + c
    residual_rms = float(np.sqrt(np.mean((fitted - e) ** 2)))

    # Covariance of the linear parameters, propagated to (A, phase, offset).
    cov = np.linalg.inv(wd.T @ wd)
    if amplitude > 0.0:
        jac = np.array(
            [
                [a / amplitude, b / amplitude, 0.0],
                [-b / amplitude**2, a / amplitude**2, 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        cov_polar = jac @ cov @ jac.T
        param_sigma = tuple(float(x) for x in np.sqrt(np.diag(cov_polar)))
    else:
        param_sigma = (float(np.sqrt(cov[0, 0])), math.inf, float(np.sqrt(cov[2, 2])))

    return FringeFit(
        amplitude=float(amplitude),
        phase=float(phase),
        offset=float(c),
        residual_rms=residual_rms,
        frequency=float(freq),
        param_sigma=param_sigma,
    )
