"""Error norms, convergence regression and wave statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def broken_l2_error(u, reference, space):
    """Broken L2 norm of u minus a pointwise reference function (None = zero)."""
    return space.broken_l2(u, reference)


def transfer_error(u_coarse, coarse_space, u_fine, fine_space):
    """Broken L2 distance between a coarse field and a finer reference field.

    Integration uses the fine mesh cubature; exact when the meshes are nested.
    """
    xq, yq = fine_space.xq.ravel(), fine_space.yq.ravel()
    e, rows = coarse_space.point_evaluator(np.column_stack([xq, yq]))
    uc = np.sum(rows * u_coarse[e], axis=1).reshape(fine_space.xq.shape)
    uf = fine_space.to_cub(u_fine)
    return float(np.sqrt(np.sum((uc - uf) ** 2 * fine_space.wq)))


@dataclass
class RateFit:
    slope: float
    intercept: float
    monotone: bool

    def __str__(self):
        flag = "" if self.monotone else " (non-monotone)"
        return f"{self.slope:.3f}{flag}"


def convergence_rate(dx, errors):
    """Least-squares slope of log(error) against log(dx).

    Non-monotone sequences are flagged (not rejected).
    """
    dx = np.asarray(dx, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(dx) < 2 or len(dx) != len(e):
        raise ValueError("need at least two (dx, error) pairs of equal length")
    if np.any(e <= 0) or np.any(dx <= 0):
        raise ValueError("errors and mesh sizes must be positive")
    order = np.argsort(dx)
    slope, intercept = np.polyfit(np.log(dx[order]), np.log(e[order]), 1)
    monotone = bool(np.all(np.diff(e[order]) > 0))
    return RateFit(float(slope), float(intercept), monotone)


def convergence_table(results):
    """results: {(variable, k): (dx list, error list)} -> {(variable, k): RateFit}."""
    return {key: convergence_rate(*val) for key, val in results.items()}


@dataclass
class WaveStats:
    height: float
    period: float
    n_waves: int

    @property
    def empty(self):
        return self.n_waves == 0


EMPTY_STATS = WaveStats(height=np.nan, period=np.nan, n_waves=0)


def zero_upcrossings(t, z):
    """Interpolated times of upward zero crossings of z(t)."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    idx = np.flatnonzero((z[:-1] < 0.0) & (z[1:] >= 0.0))
    frac = -z[idx] / (z[idx + 1] - z[idx])
    return t[idx] + frac * (t[idx + 1] - t[idx]), idx


def zero_upcrossing_stats(t, eta, window=None):
    """Mean wave height and period by the zero up-crossing method.

    The signal is demeaned over the window. Each wave runs from one upward
    crossing to the next; its height is max minus min inside. Returns
    EMPTY_STATS with fewer than two crossings.
    """
    t = np.asarray(t, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, eta = t[sel], eta[sel]
    if len(t) < 3:
        return EMPTY_STATS
    z = eta - eta.mean()
    if np.ptp(z) == 0.0:
        return EMPTY_STATS
    tc, idx = zero_upcrossings(t, z)
    if len(tc) < 2:
        return EMPTY_STATS
    heights = [z[i0 + 1:i1 + 1].max() - z[i0 + 1:i1 + 1].min() for i0, i1 in zip(idx[:-1], idx[1:])]
    return WaveStats(height=float(np.mean(heights)), period=float(np.mean(np.diff(tc))), n_waves=len(heights))


def harmonic_amplitudes(t, eta, period, n_harmonics=3, window=None):
    """Amplitudes of the first harmonics of a periodic signal by least squares.

    Uses an integer number of periods inside the window when possible.
    """
    t = np.asarray(t, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, eta = t[sel], eta[sel]
    omega = 2.0 * np.pi / period
    cols = [np.ones_like(t)]
    for n in range(1, n_harmonics + 1):
        cols += [np.cos(n * omega * t), np.sin(n * omega * t)]
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, eta, rcond=None)
    return np.hypot(coef[1::2], coef[2::2])


def crest(x, eta):
    """Position (parabolic refinement) and value of the maximum of a sampled profile."""
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    i = int(np.argmax(eta))
    if 0 < i < len(x) - 1:
        y0, y1, y2 = eta[i - 1], eta[i], eta[i + 1]
        den = y0 - 2 * y1 + y2
        if den < 0:
            d = 0.5 * (y0 - y2) / den
            h = 0.5 * (x[i + 1] - x[i - 1])
            return x[i] + d * h, y1 - 0.25 * (y0 - y2) * d
    return x[i], eta[i]
