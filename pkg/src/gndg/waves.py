"""Analytic wave states: solitary wave and linear monochromatic waves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .swe import G

ALPHA = 1.159


def dispersion_omega2(kappa, h0, alpha=ALPHA, g=G):
    """omega^2 of the alpha-enhanced model: g h0 k^2 (1 + (alpha-1) B) / (1 + alpha B), B = (k h0)^2 / 3."""
    B = (kappa * h0) ** 2 / 3.0
    return g * h0 * kappa ** 2 * (1.0 + (alpha - 1.0) * B) / (1.0 + alpha * B)


def wavenumber(period, h0, alpha=ALPHA, g=G):
    """Wavenumber of a linear wave with the given period in the alpha-enhanced model."""
    omega = 2.0 * np.pi / period
    k_long = omega / np.sqrt(g * h0)
    f = lambda kk: dispersion_omega2(kk, h0, alpha, g) - omega ** 2
    hi = k_long
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 1e6 / h0:
            raise ValueError("no wavenumber for this period (dispersion relation saturates)")
    return brentq(f, 0.5 * k_long, hi, xtol=1e-14, rtol=1e-14)


def soliton_parameters(eps, h0, g=G):
    """(kappa, c) of the solitary wave of relative amplitude eps on depth h0."""
    kappa = np.sqrt(3.0 * eps / (4.0 * h0 ** 2 * (1.0 + eps)))
    c = np.sqrt(g * h0 * (1.0 + eps))
    return kappa, c


def soliton_state(eps, h0, x0, t, x, y=None, g=G):
    """(eta, qx, qy) of the solitary wave on flat bottom b = 0 at time t.

    h = h0 + eps h0 sech^2(kappa (x - x0 - c t)), u = c (1 - h0/h), v = 0.
    """
    if eps <= 0 or h0 <= 0:
        raise ValueError("eps and h0 must be positive")
    kappa, c = soliton_parameters(eps, h0, g)
    x = np.asarray(x, dtype=float)
    h = h0 + eps * h0 / np.cosh(kappa * (x - x0 - c * t)) ** 2
    u = c * (1.0 - h0 / h)
    return np.array([h, h * u, np.zeros_like(h)])


def smooth_ramp(t, t_ramp):
    """0 -> 1 over [0, t_ramp] with zero slope at both ends."""
    if t_ramp <= 0.0:
        return 1.0
    s = np.clip(t / t_ramp, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * s))


@dataclass
class MonochromaticWave:
    """Linear progressive wave zeta = a sin(omega t - kappa (x - x_ref)), q = c_p zeta.

    The wavenumber solves the alpha-model dispersion relation; q = c_p zeta
    satisfies linear mass conservation exactly for the generated wave.
    """

    amplitude: float
    period: float
    h0: float
    eta_rest: float = None
    x_ref: float = 0.0
    direction: float = 1.0
    t_ramp: float = 0.0
    alpha: float = ALPHA
    g: float = G

    def __post_init__(self):
        if self.eta_rest is None:
            self.eta_rest = self.h0
        self.kappa = wavenumber(self.period, self.h0, self.alpha, self.g)
        self.omega = 2.0 * np.pi / self.period
        self.celerity = self.omega / self.kappa
        self.wavelength = 2.0 * np.pi / self.kappa

    def __call__(self, x, y, t):
        x = np.asarray(x, dtype=float)
        zeta = self.amplitude * smooth_ramp(t, self.t_ramp) * np.sin(
            self.omega * t - self.direction * self.kappa * (x - self.x_ref))
        return np.array([self.eta_rest + zeta, self.direction * self.celerity * zeta, np.zeros_like(zeta)])


@dataclass
class SolitaryWave:
    eps: float
    h0: float
    x0: float
    g: float = G

    def __call__(self, x, y, t):
        return soliton_state(self.eps, self.h0, self.x0, t, x, y, self.g)


@dataclass
class RestState:
    eta_rest: float

    def __call__(self, x, y, t):
        x = np.asarray(x, dtype=float)
        return np.array([np.full_like(x, self.eta_rest), np.zeros_like(x), np.zeros_like(x)])
