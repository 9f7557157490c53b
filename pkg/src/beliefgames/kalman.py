"""Scalar Kalman estimation of an opponent's constant cost type.

The hidden state is a constant, so the filter reduces to

    tau_hat' = (P / R) (y - tau_hat)
    P'       = -P^2 / R

with measurement noise variance R.  P has the exact solution
P(t) = P0 R / (t P0 + R), used by default instead of integrating its ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonFiniteStateError, TraceCoverageError
from .signals import SignalTrace


@dataclass(frozen=True)
class KalmanBelief:
    tau_hat: float
    P: float
    R: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("tau_hat", "P", "R", "t"):
            if not math.isfinite(getattr(self, name)):
                raise NonFiniteStateError(f"non-finite Kalman field {name}")
        if self.P <= 0.0:
            raise ValueError(f"error variance P must be positive, got {self.P}")
        if self.R <= 0.0:
            raise ValueError(f"noise variance R must be positive, got {self.R}")
        if self.t < 0.0:
            raise ValueError(f"belief clock must be non-negative, got {self.t}")


def kalman_derivative(b: KalmanBelief, y: float) -> tuple[float, float]:
    """Rates of change of (tau_hat, P) given observation y."""
    if not math.isfinite(y):
        raise ValueError(f"observation must be finite, got {y}")
    gain = b.P / b.R
    return gain * (y - b.tau_hat), -b.P * b.P / b.R


def step_discrete_kalman(b: KalmanBelief, y: float, dt: float) -> KalmanBelief:
    """One explicit-Euler update scaled by dt."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    d_tau, d_p = kalman_derivative(b, y)
    return KalmanBelief(
        tau_hat=b.tau_hat + dt * d_tau,
        P=b.P + dt * d_p,
        R=b.R,
        t=b.t + dt,
    )


def variance_closed_form(p0: float, r: float, elapsed: float) -> float:
    """Exact error variance after ``elapsed`` time: p0*r / (elapsed*p0 + r)."""
    return p0 * r / (elapsed * p0 + r)


def mean_closed_form(trace: SignalTrace, p0: float, r: float, t: float) -> float:
    """Closed-form estimate p0 * integral(y) / (t p0 + r); valid for tau_hat(0) = 0."""
    return p0 * trace.integral(0.0, t) / (t * p0 + r)


def _exact_steps(total: float, step: float, what: str) -> int:
    if step <= 0.0:
        raise ValueError(f"{what}: step size must be positive, got {step}")
    q = total / step
    r = round(q)
    if abs(q - r) > 1e-9 * max(1.0, abs(q)):
        raise ValueError(f"{what}: {step} does not divide {total}")
    return int(r)


def _rk4_pair(tau, p, r, y, h, p_exact):
    # p_exact(s) gives the exact variance at relative stage time s when the
    # closed form is in use; otherwise P rides along in the integrator.
    if p_exact is not None:

        def rates(s, state_tau, _state_p):
            ps = p_exact(s)
            return (ps / r) * (y - state_tau), 0.0

    else:

        def rates(_s, state_tau, state_p):
            return (state_p / r) * (y - state_tau), -state_p * state_p / r

    k1t, k1p = rates(0.0, tau, p)
    k2t, k2p = rates(0.5 * h, tau + 0.5 * h * k1t, p + 0.5 * h * k1p)
    k3t, k3p = rates(0.5 * h, tau + 0.5 * h * k2t, p + 0.5 * h * k2p)
    k4t, k4p = rates(h, tau + h * k3t, p + h * k3p)
    tau_next = tau + h * (k1t + 2.0 * (k2t + k3t) + k4t) / 6.0
    p_next = p + h * (k1p + 2.0 * (k2p + k3p) + k4p) / 6.0
    return tau_next, p_next


def integrate_kalman(
    b: KalmanBelief,
    trace: SignalTrace,
    duration: float,
    h: float,
    p_mode: str = "exact",
) -> KalmanBelief:
    """Advance the filter by ``duration`` under the held observation signal.

    ``p_mode="exact"`` (default) propagates P by its closed form and
    integrates only tau_hat; ``p_mode="ode"`` integrates both, which exists
    for cross-checking the closed form.
    """
    if p_mode not in ("exact", "ode"):
        raise ValueError(f"unknown p_mode {p_mode!r}")
    if duration < 0.0:
        raise ValueError("duration must be non-negative")
    n = _exact_steps(duration, h, "integrate_kalman duration")
    _exact_steps(trace.dt, h, "integrate_kalman hold interval")
    if not trace.covers(b.t, b.t + duration):
        raise TraceCoverageError(
            f"trace [{trace.t0!r}, {trace.end!r}) does not cover the update "
            f"window [{b.t!r}, {b.t + duration!r}]"
        )
    tau, p = b.tau_hat, b.P
    for i in range(n):
        t_rel = i * h
        y = trace.value_at(b.t + t_rel + 0.5 * h)
        if p_mode == "exact":
            p_exact = lambda s, base=t_rel: variance_closed_form(b.P, b.R, base + s)
            tau, _ = _rk4_pair(tau, p, b.R, y, h, p_exact)
            p = variance_closed_form(b.P, b.R, t_rel + h)
        else:
            tau, p = _rk4_pair(tau, p, b.R, y, h, None)
    return KalmanBelief(tau_hat=tau, P=p, R=b.R, t=b.t + duration)


@dataclass(frozen=True)
class KalmanPath:
    t: np.ndarray
    tau_hat: np.ndarray
    P: np.ndarray

    def write_csv(self, path: str | Path, player: int = 1) -> None:
        lines = [f"t,tau_hat_{player},P_{player}"]
        for i in range(self.t.size):
            lines.append(f"{self.t[i]:.17g},{self.tau_hat[i]:.17g},{self.P[i]:.17g}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def kalman_path(
    b: KalmanBelief,
    trace: SignalTrace,
    duration: float,
    h: float,
    p_mode: str = "exact",
) -> KalmanPath:
    """Like :func:`integrate_kalman`, recording every grid point."""
    n = _exact_steps(duration, h, "kalman_path duration")
    t = b.t + h * np.arange(n + 1)
    tau_arr = np.empty(n + 1)
    p_arr = np.empty(n + 1)
    tau_arr[0], p_arr[0] = b.tau_hat, b.P
    state = b
    for i in range(n):
        state = integrate_kalman(state, trace, h, h, p_mode=p_mode)
        tau_arr[i + 1], p_arr[i + 1] = state.tau_hat, state.P
    return KalmanPath(t=t, tau_hat=tau_arr, P=p_arr)
