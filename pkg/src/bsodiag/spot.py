"""Streaming peaks-over-threshold outlier detection.

An initial window calibrates a high empirical threshold t and fits a
generalized Pareto distribution (GPD) to the excesses over t; the anomaly
boundary is

    z_q = t + (sigma/gamma) * ((q * n / N_t)^(-gamma) - 1)

with the gamma -> 0 limit z_q = t - sigma * ln(q * n / N_t), where n is the
number of observations seen and N_t the number of excesses (peaks). In the
diagnosis stream, values above z_q are outliers; values in (t, z_q] become
new peaks and trigger a refit.

Sparse dimensions that cannot support a fit (fewer than a configurable
number of non-zero calibration points, or no excesses above t at all) are
marked cold; a cold detector flags any positive value. New alert types that
first appear near an outage are exactly the cold case, so this fallback is
the intended detector for them rather than an error path.

GPD fitting follows Grimshaw's reduction of the likelihood equations to a
scalar root search, with a method-of-moments fallback and the exponential
(gamma = 0) candidate always considered; the shape is clipped to
[-0.5, 2] for robustness on tiny peak sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

GAMMA_CLIP = (-0.5, 2.0)


@dataclass(frozen=True)
class SpotState:
    """Immutable detector state; stepping returns a new state."""

    threshold: float
    shape: float
    scale: float
    anomaly_threshold: float
    peaks: tuple[float, ...]
    n_seen: int
    q: float
    cold: bool = False


def _gpd_loglik(excesses: np.ndarray, gamma: float, sigma: float) -> float:
    n = len(excesses)
    if sigma <= 0:
        return -math.inf
    if abs(gamma) < 1e-12:
        return -n * math.log(sigma) - float(excesses.sum()) / sigma
    z = 1.0 + gamma * excesses / sigma
    if np.any(z <= 0):
        return -math.inf
    return -n * math.log(sigma) - (1.0 + 1.0 / gamma) * float(np.log(z).sum())


def _grimshaw_candidates(excesses: np.ndarray) -> list[tuple[float, float]]:
    """Candidate (gamma, sigma) pairs from the likelihood root equation.

    With u(x) = mean(1/(1+x*Y)) and v(x) = mean(log(1+x*Y)), stationary
    points of the profile likelihood satisfy u(x)*(1+v(x)) = 1 for
    x = gamma/sigma in (-1/max(Y), inf), x != 0.
    """
    y_max = float(excesses.max())
    y_mean = float(excesses.mean())
    if y_max <= 0 or y_mean <= 0:
        return []

    def w(x: float) -> float:
        z = 1.0 + x * excesses
        if np.any(z <= 0):
            return math.nan
        u = float(np.mean(1.0 / z))
        v = float(np.mean(np.log(z)))
        return u * (1.0 + v) - 1.0

    candidates: list[tuple[float, float]] = []
    lo = -1.0 / y_max
    # Scan brackets on both sides of 0 (x=0 is always a trivial root).
    grids: list[np.ndarray] = []
    eps_pos = 1e-8 / y_mean
    grids.append(np.geomspace(eps_pos, 100.0 / y_mean, 30))
    eps_neg = 1e-8 / y_max
    grids.append(-np.geomspace(eps_neg, -lo * (1 - 1e-8), 30))
    for grid in grids:
        vals = [w(x) for x in grid]
        for (x0, w0), (x1, w1) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
            if math.isnan(w0) or math.isnan(w1) or w0 * w1 > 0:
                continue
            try:
                root = brentq(w, min(x0, x1), max(x0, x1), xtol=1e-14, maxiter=100)
            except (ValueError, RuntimeError):
                continue
            z = 1.0 + root * excesses
            if np.any(z <= 0):
                continue
            gamma = float(np.mean(np.log(z)))
            if abs(root) < 1e-12 or abs(gamma) < 1e-8:
                continue  # indistinguishable from the exponential candidate
            sigma = gamma / root
            if sigma > 0:
                candidates.append((gamma, sigma))
    return candidates


def _moments_candidate(excesses: np.ndarray) -> Optional[tuple[float, float]]:
    m = float(excesses.mean())
    s2 = float(excesses.var())
    if s2 <= 0 or m <= 0:
        return None
    ratio = m * m / s2
    gamma = 0.5 * (1.0 - ratio)
    sigma = 0.5 * m * (ratio + 1.0)
    if sigma <= 0:
        return None
    return gamma, sigma


def fit_gpd(excesses: Sequence[float]) -> tuple[float, float]:
    """Fit (gamma, sigma) to positive excesses; best candidate by likelihood."""
    y = np.asarray(excesses, dtype=float)
    if len(y) == 0 or np.any(y <= 0):
        raise ValueError("excesses must be a non-empty positive sequence")
    candidates = _grimshaw_candidates(y)
    if not candidates:
        mom = _moments_candidate(y)
        if mom is not None:
            candidates.append(mom)
    candidates.append((0.0, float(y.mean())))  # exponential tail
    gamma, sigma = max(candidates, key=lambda c: _gpd_loglik(y, *c))
    gamma = min(max(gamma, GAMMA_CLIP[0]), GAMMA_CLIP[1])
    return gamma, sigma


def _anomaly_threshold(
    t: float, gamma: float, sigma: float, q: float, n: int, n_peaks: int
) -> float:
    ratio = q * n / n_peaks
    if abs(gamma) < 1e-12:
        z = t - sigma * math.log(ratio)
    else:
        z = t + (sigma / gamma) * (ratio ** (-gamma) - 1.0)
    return max(z, t)


def _cold_state(n: int, q: float) -> SpotState:
    return SpotState(
        threshold=0.0,
        shape=0.0,
        scale=1.0,
        anomaly_threshold=0.0,
        peaks=(),
        n_seen=n,
        q=q,
        cold=True,
    )


def spot_init(
    init_values: Sequence[float],
    q: float = 1e-4,
    init_quantile: float = 0.98,
    min_nonzero: int = 10,
) -> SpotState:
    """Calibrate a detector from initial-window values.

    Returns a cold state when the window has fewer than ``min_nonzero``
    non-zero points or no excesses above the calibration quantile (e.g.
    all-constant input).
    """
    values = np.asarray(init_values, dtype=float)
    n = len(values)
    if n == 0 or np.count_nonzero(values) < min_nonzero:
        return _cold_state(n, q)
    t = float(np.quantile(values, init_quantile))
    peaks = values[values > t] - t
    if len(peaks) == 0:
        return _cold_state(n, q)
    gamma, sigma = fit_gpd(peaks)
    z = _anomaly_threshold(t, gamma, sigma, q, n, len(peaks))
    return SpotState(
        threshold=t,
        shape=gamma,
        scale=sigma,
        anomaly_threshold=z,
        peaks=tuple(float(p) for p in peaks),
        n_seen=n,
        q=q,
        cold=False,
    )


def spot_step(state: SpotState, x: float) -> tuple[SpotState, bool]:
    """Process one diagnosis-window value; returns (new state, is_outlier).

    Outliers do not update the model. Values in (t, z_q] are added to the
    peak set and the boundary is refit; everything else only advances the
    observation count.
    """
    n = state.n_seen + 1
    if state.cold:
        return replace(state, n_seen=n), x > 0
    if x > state.anomaly_threshold:
        return replace(state, n_seen=n), True
    if x > state.threshold:
        peaks = state.peaks + (float(x) - state.threshold,)
        gamma, sigma = fit_gpd(np.asarray(peaks))
        z = _anomaly_threshold(state.threshold, gamma, sigma, state.q, n, len(peaks))
        return (
            SpotState(
                threshold=state.threshold,
                shape=gamma,
                scale=sigma,
                anomaly_threshold=z,
                peaks=peaks,
                n_seen=n,
                q=state.q,
                cold=False,
            ),
            False,
        )
    return replace(state, n_seen=n), False
