"""CFL time step and SSP Runge-Kutta integrators with stage-wise limiting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import reference_element
from .swe import NumericalAbort

# Spiteri-Ruuth SSP(5,4) coefficients
_SSP54 = dict(
    a1=0.391752226571890,
    b2=(0.444370493651235, 0.555629506348765, 0.368410593050371),
    b3=(0.620101851488403, 0.379898148511597, 0.251891774271694),
    b4=(0.178079954393132, 0.821920045606868, 0.544974750228521),
    b5=(0.517231671970585, 0.096059710526147, 0.063692468666290, 0.386708617503269, 0.226007483236906),
)


@dataclass
class TimeControls:
    safety: float = 0.9
    t: float = 0.0
    t_max: float = 0.0
    dt: float = 0.0
    order: int = 3

    @staticmethod
    def default_order(k):
        """2 for k=1, 3 for k=2, 4 for k>=3."""
        return 2 if k <= 1 else (3 if k == 2 else 4)


def cfl_factor(k):
    """(2/3) times the first normalized Gauss-Lobatto weight of the positivity rule."""
    return 2.0 / 3.0 * reference_element(k).pos_rule.omega1


def compute_dt(ctx, mesh, k, safety=0.9, cap=np.inf, per_element=False):
    """Largest stable step  safety * min_T (2/3) w1 |T| / (lambda p_T), capped by ``cap``.

    The global Lax-Friedrichs speed ``ctx.a`` is used on every element (the
    flux dissipation is global); ``per_element=True`` uses ctx.lam and skips
    dry elements instead. Returns ``cap`` when no element carries a speed.
    """
    fac = cfl_factor(k)
    if per_element:
        lam = np.asarray(ctx.lam)
        wet = lam > 0.0
        if not np.any(wet):
            return float(cap)
        dt = safety * fac * np.min(mesh.area[wet] / (lam[wet] * mesh.perimeter[wet]))
    else:
        if ctx.a <= 0.0:
            return float(cap)
        dt = safety * fac * np.min(mesh.area / mesh.perimeter) / ctx.a
    return float(min(dt, cap))


def _identity(u):
    return u


def _check(u, stage):
    if not np.all(np.isfinite(u)):
        raise NumericalAbort(f"non-finite value in Runge-Kutta stage {stage}")
    return u


def ssp_rk_step(u, rhs, dt, order=3, limiter=None):
    """Advance u by one SSP-RK step of the given order (2, 3 or 4).

    ``rhs(u)`` returns du/dt; ``limiter(u)`` is applied to every stage output,
    so each right-hand side is evaluated on a limited state. The input is
    assumed to be limited already.
    """
    lim = _identity if limiter is None else limiter
    L = rhs
    if order == 1:
        return lim(_check(u + dt * L(u), 1))
    if order == 2:
        u1 = lim(_check(u + dt * L(u), 1))
        return lim(_check(0.5 * u + 0.5 * (u1 + dt * L(u1)), 2))
    if order == 3:
        u1 = lim(_check(u + dt * L(u), 1))
        u2 = lim(_check(0.75 * u + 0.25 * (u1 + dt * L(u1)), 2))
        return lim(_check(u / 3.0 + 2.0 / 3.0 * (u2 + dt * L(u2)), 3))
    if order == 4:
        c = _SSP54
        u1 = lim(_check(u + c["a1"] * dt * L(u), 1))
        a, b, d = c["b2"]
        u2 = lim(_check(a * u + b * u1 + d * dt * L(u1), 2))
        a, b, d = c["b3"]
        u3 = lim(_check(a * u + b * u2 + d * dt * L(u2), 3))
        a, b, d = c["b4"]
        L3 = L(u3)
        u4 = lim(_check(a * u + b * u3 + d * dt * L3, 4))
        e2, e3, f3, e4, f4 = c["b5"]
        return lim(_check(e2 * u2 + e3 * u3 + f3 * dt * L3 + e4 * u4 + f4 * dt * L(u4), 5))
    raise ValueError(f"unsupported SSP-RK order {order}")


def observed_order(errors, steps):
    """Least-squares slope of log(error) against log(step)."""
    e = np.log(np.asarray(errors, dtype=float))
    h = np.log(np.asarray(steps, dtype=float))
    return float(np.polyfit(h, e, 1)[0])


def scalar_ode_order(order, lam=-1.0, t_end=1.0, n_steps=(10, 20, 40, 80)):
    """Observed order of ssp_rk_step on y' = lam*y, y(0) = 1."""
    errs, dts = [], []
    for n in n_steps:
        dt = t_end / n
        y = np.array([1.0])
        for _ in range(n):
            y = ssp_rk_step(y, lambda v: lam * v, dt, order)
        errs.append(abs(y[0] - np.exp(lam * t_end)))
        dts.append(dt)
    return observed_order(errs, dts), errs
