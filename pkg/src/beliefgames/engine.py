"""Coupled simulation: pollution stock, belief filters, equilibrium controls.

The filters evolve autonomously from the signal traces, the controls are a
function of the current beliefs only (linear-state game), and the stock
integrates the controls, so the coupled system is advanced with one
fixed-step fourth-order sweep whose stages re-solve the equilibrium from the
stage-level beliefs.  Signals are zero-order-hold and the step size divides
the hold interval, so no step straddles a signal jump.

Two updating schemes are supported: "continuous" integrates the belief ODEs,
"discrete" applies Euler jumps once per signal epoch (at the end of each
hold interval, which keeps kappa/alpha at epoch boundaries identical across
schemes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .equilibrium import (
    EPS_SINGULAR,
    GameParams,
    control_kernel,
    known_state_equilibrium,
)
from .errors import (
    DegenerateDiscountError,
    NonFiniteStateError,
    TraceCoverageError,
)
from .kalman import KalmanBelief, step_discrete_kalman
from .normal_gamma import NormalGammaBelief, step_discrete
from .signals import (
    SignalTrace,
    TraceSeed,
    _sample_count,
    sample_cost_trace,
    sample_ecological_trace,
)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _broadcast(value, n: int, name: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * n
    out = tuple(float(v) for v in value)
    if len(out) != n:
        raise ValueError(f"{name} needs one entry per player, got {len(out)}")
    return out


@dataclass(frozen=True)
class Scenario:
    """Game constants plus the true signal laws and the belief priors."""

    params: GameParams
    mu_true: float
    sigma: float
    mu0: float = 0.0
    kappa0: float = 1.0
    alpha0: float = 2.0
    beta0: float = 1.0
    tau0: tuple[float, ...] | float = 0.0
    p0: tuple[float, ...] | float = 1.0
    r: tuple[float, ...] | float = 0.25

    def __post_init__(self):
        n = self.params.n
        object.__setattr__(self, "tau0", _broadcast(self.tau0, n, "tau0"))
        object.__setattr__(self, "p0", _broadcast(self.p0, n, "p0"))
        object.__setattr__(self, "r", _broadcast(self.r, n, "r"))
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.kappa0 <= 0.0 or self.alpha0 <= 0.0 or self.beta0 < 0.0:
            raise ValueError("prior hyperparameters out of range")
        if any(v <= 0.0 for v in self.p0) or any(v <= 0.0 for v in self.r):
            raise ValueError("p0 and r entries must be positive")

    def motion_prior(self) -> NormalGammaBelief:
        return NormalGammaBelief(self.mu0, self.kappa0, self.alpha0, self.beta0)

    def payoff_prior(self, player: int) -> KalmanBelief:
        return KalmanBelief(self.tau0[player], self.p0[player], self.r[player])


@dataclass(frozen=True)
class SimConfig:
    scheme: str = "continuous"
    dt_signal: float = 0.02
    h_ode: float = 0.02
    horizon: float = 10.0
    dynamics_mode: str = "realized"
    clamp_controls: bool = False
    control_refresh: str = "step"

    def __post_init__(self):
        if self.scheme not in ("continuous", "discrete"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dynamics_mode not in ("realized", "expected"):
            raise ValueError(f"unknown dynamics_mode {self.dynamics_mode!r}")
        if self.control_refresh not in ("step", "epoch"):
            raise ValueError(f"unknown control_refresh {self.control_refresh!r}")
        if self.dt_signal <= 0.0 or self.h_ode <= 0.0 or self.horizon <= 0.0:
            raise ValueError("dt_signal, h_ode, horizon must be positive")
        _exact_ratio(self.dt_signal, self.h_ode, "dt_signal/h_ode")


@dataclass(frozen=True)
class TraceSet:
    ecological: SignalTrace
    cost: tuple[SignalTrace, ...]


def default_traces(scn: Scenario, cfg: SimConfig, seed: TraceSeed | int) -> TraceSet:
    """Seeded traces for one run; stream 0 is ecological, stream j+1 is cost j."""
    base = seed.seed if isinstance(seed, TraceSeed) else int(seed)
    eco = sample_ecological_trace(
        scn.mu_true,
        scn.sigma,
        cfg.dt_signal,
        cfg.horizon,
        TraceSeed(base, 0),
        label="ecological",
    )
    cost = tuple(
        sample_cost_trace(
            scn.params.tau[j],
            scn.r[j],
            cfg.dt_signal,
            cfg.horizon,
            TraceSeed(base, j + 1),
            label=f"cost_{j + 1}",
        )
        for j in range(scn.params.n)
    )
    return TraceSet(ecological=eco, cost=cost)


@dataclass(frozen=True)
class Trajectory:
    """Time-gridded record of the coupled run; per-player columns are 2-d."""

    t: np.ndarray
    S: np.ndarray
    x_real: np.ndarray
    x_bar: np.ndarray
    var_mu: np.ndarray
    tau_bar: np.ndarray
    P: np.ndarray
    u: np.ndarray

    @property
    def n_players(self) -> int:
        return self.tau_bar.shape[1]

    def header(self) -> str:
        n = self.n_players
        cols = ["t", "S", "x_real", "x_bar", "var_mu"]
        cols += [f"tau_bar_{j + 1}" for j in range(n)]
        cols += [f"P_{j + 1}" for j in range(n)]
        cols += [f"u_{j + 1}" for j in range(n)]
        return ",".join(cols)

    def to_csv(self, path: str | Path) -> None:
        lines = [self.header()]
        n = self.n_players
        for i in range(self.t.size):
            cells = [
                f"{self.t[i]:.17g}",
                f"{self.S[i]:.17g}",
                f"{self.x_real[i]:.17g}",
                f"{self.x_bar[i]:.17g}",
                f"{self.var_mu[i]:.17g}",
            ]
            cells += [f"{self.tau_bar[i, j]:.17g}" for j in range(n)]
            cells += [f"{self.P[i, j]:.17g}" for j in range(n)]
            cells += [f"{self.u[i, j]:.17g}" for j in range(n)]
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _exact_ratio(total: float, step: float, what: str) -> int:
    q = total / step
    r = round(q)
    if r < 1 or abs(q - r) > 1e-9 * max(1.0, abs(q)):
        raise ValueError(f"{what}: {step} does not divide {total}")
    return int(r)


def _validate_traces(traces: TraceSet, cfg: SimConfig, n: int) -> None:
    needed = _sample_count(cfg.horizon, cfg.dt_signal)
    all_traces = (traces.ecological,) + tuple(traces.cost)
    if len(traces.cost) != n:
        raise ValueError(f"need {n} cost traces, got {len(traces.cost)}")
    for tr in all_traces:
        if abs(tr.dt - cfg.dt_signal) > 1e-9 * cfg.dt_signal:
            raise TraceCoverageError(
                f"trace {tr.label!r} hold interval {tr.dt} != dt_signal {cfg.dt_signal}"
            )
        if abs(tr.t0) > 1e-12:
            raise TraceCoverageError(f"trace {tr.label!r} must start at t=0")
        if len(tr) < needed:
            raise TraceCoverageError(
                f"trace {tr.label!r} has {len(tr)} samples, needs {needed} "
                f"to cover horizon {cfg.horizon}"
            )


def simulate(
    scn: Scenario,
    cfg: SimConfig,
    traces: TraceSet | None = None,
    seed: TraceSeed | int | None = None,
) -> Trajectory:
    """Advance the coupled system over the horizon.

    Exactly one of ``traces`` and ``seed`` must be given.  At each grid point
    the controls are re-solved from current beliefs; the stock uses the
    realized signal x(t) in "realized" mode or the current estimate in
    "expected" mode.
    """
    if (traces is None) == (seed is None):
        raise ValueError("provide exactly one of traces= or seed=")
    if traces is None:
        traces = default_traces(scn, cfg, seed)
    _validate_traces(traces, cfg, scn.params.n)
    if cfg.scheme == "continuous":
        return _run_continuous(scn, cfg, traces)
    return _run_discrete(scn, cfg, traces)


class _Recorder:
    def __init__(self, n_pts: int, n: int):
        self.t = np.empty(n_pts)
        self.S = np.empty(n_pts)
        self.x_real = np.empty(n_pts)
        self.x_bar = np.empty(n_pts)
        self.var_mu = np.empty(n_pts)
        self.tau_bar = np.empty((n_pts, n))
        self.P = np.empty((n_pts, n))
        self.u = np.empty((n_pts, n))

    def write(self, idx, t, s_val, x_real, x_bar, var, tau_row, p_row, u_row):
        self.t[idx] = t
        self.S[idx] = s_val
        self.x_real[idx] = x_real
        self.x_bar[idx] = x_bar
        self.var_mu[idx] = var
        self.tau_bar[idx] = tau_row
        self.P[idx] = p_row
        self.u[idx] = u_row

    def build(self) -> Trajectory:
        return Trajectory(
            t=self.t,
            S=self.S,
            x_real=self.x_real,
            x_bar=self.x_bar,
            var_mu=self.var_mu,
            tau_bar=self.tau_bar,
            P=self.P,
            u=self.u,
        )


def _guard_finite(t: float, mu: float, beta: float, tau_hat, s_val: float) -> None:
    if (
        not math.isfinite(mu)
        or not math.isfinite(beta)
        or not math.isfinite(s_val)
        or any(not math.isfinite(v) for v in tau_hat)
    ):
        raise NonFiniteStateError(f"non-finite state encountered at t={t:.6g}")


def _guard_published_coefficient(t: float, x_bar: float, delta: float, rho: float):
    if abs(1.0 - x_bar * delta - rho) <= EPS_SINGULAR:
        raise DegenerateDiscountError(
            f"1 - x_bar*delta - rho singular at t={t:.6g} (x_bar={x_bar:.6g})"
        )


def _run_continuous(scn: Scenario, cfg: SimConfig, traces: TraceSet) -> Trajectory:
    p = scn.params
    n = p.n
    a, tau_true, delta, rho = p.a, p.tau, p.delta, p.rho
    h = cfg.h_ode
    n_steps = _exact_ratio(cfg.horizon, h, "horizon/h_ode")
    spe = _exact_ratio(cfg.dt_signal, h, "dt_signal/h_ode")
    eco = traces.ecological.values
    costs = [tr.values for tr in traces.cost]
    kappa0, alpha0 = scn.kappa0, scn.alpha0
    p0, r = scn.p0, scn.r
    realized = cfg.dynamics_mode == "realized"
    clamp = cfg.clamp_controls
    per_stage = cfg.control_refresh == "step"

    mu = scn.mu0
    beta = scn.beta0
    tau_hat = list(scn.tau0)
    s_val = p.s0

    rec = _Recorder(n_steps + 1, n)

    def p_exact(j: int, t: float) -> float:
        return p0[j] * r[j] / (t * p0[j] + r[j])

    def controls_at(x_bar, tau_bar):
        u = control_kernel(a, tau_true, tau_bar, x_bar, delta, rho)
        if clamp:
            u = [v if v > 0.0 else 0.0 for v in u]
        return u

    def record(idx: int, t: float, epoch: int) -> None:
        _guard_finite(t, mu, beta, tau_hat, s_val)
        _guard_published_coefficient(t, mu, delta, rho)
        kappa = kappa0 + t
        alpha = alpha0 + 0.5 * t
        var = beta / (kappa * (alpha - 1.0)) if alpha > 1.0 else math.nan
        u = u_frozen if not per_stage else controls_at(mu, tau_hat)
        rec.write(
            idx,
            t,
            s_val,
            eco[min(epoch, len(eco) - 1)],
            mu,
            var,
            tau_hat,
            [p_exact(j, t) for j in range(n)],
            u,
        )

    u_frozen = controls_at(mu, tau_hat)
    record(0, 0.0, 0)
    h2 = 0.5 * h
    for i in range(n_steps):
        t = i * h
        k = i // spe
        x = eco[k]
        ys = [costs[j][k] for j in range(n)]
        if not per_stage and i % spe == 0:
            u_frozen = controls_at(mu, tau_hat)

        def stage(s, mu_s, beta_s, tau_s, stock_s):
            kap = kappa0 + t + s
            den = kap + 1.0
            innov = x - mu_s
            d_mu = innov / den
            d_beta = kap * innov * innov / (2.0 * den)
            d_tau = [
                (p_exact(j, t + s) / r[j]) * (ys[j] - tau_s[j]) for j in range(n)
            ]
            u = u_frozen if not per_stage else controls_at(mu_s, tau_s)
            total_u = sum(u)
            xd = x if realized else mu_s
            d_stock = xd * total_u - (1.0 - xd * delta) * stock_s
            return d_mu, d_beta, d_tau, d_stock

        k1 = stage(0.0, mu, beta, tau_hat, s_val)
        k2 = stage(
            h2,
            mu + h2 * k1[0],
            beta + h2 * k1[1],
            [tau_hat[j] + h2 * k1[2][j] for j in range(n)],
            s_val + h2 * k1[3],
        )
        k3 = stage(
            h2,
            mu + h2 * k2[0],
            beta + h2 * k2[1],
            [tau_hat[j] + h2 * k2[2][j] for j in range(n)],
            s_val + h2 * k2[3],
        )
        k4 = stage(
            h,
            mu + h * k3[0],
            beta + h * k3[1],
            [tau_hat[j] + h * k3[2][j] for j in range(n)],
            s_val + h * k3[3],
        )
        sixth = h / 6.0
        mu += sixth * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0])
        beta += sixth * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])
        tau_hat = [
            tau_hat[j] + sixth * (k1[2][j] + 2.0 * (k2[2][j] + k3[2][j]) + k4[2][j])
            for j in range(n)
        ]
        s_val += sixth * (k1[3] + 2.0 * (k2[3] + k3[3]) + k4[3])
        record(i + 1, (i + 1) * h, (i + 1) // spe)
    return rec.build()


def _run_discrete(scn: Scenario, cfg: SimConfig, traces: TraceSet) -> Trajectory:
    p = scn.params
    n = p.n
    a, tau_true, delta, rho = p.a, p.tau, p.delta, p.rho
    h = cfg.h_ode
    dt = cfg.dt_signal
    n_steps = _exact_ratio(cfg.horizon, h, "horizon/h_ode")
    spe = _exact_ratio(dt, h, "dt_signal/h_ode")
    eco = traces.ecological.values
    costs = [tr.values for tr in traces.cost]
    realized = cfg.dynamics_mode == "realized"
    clamp = cfg.clamp_controls

    motion = scn.motion_prior()
    payoff = [scn.payoff_prior(j) for j in range(n)]
    s_val = p.s0

    rec = _Recorder(n_steps + 1, n)

    def controls_now():
        u = control_kernel(
            a, tau_true, tuple(b.tau_hat for b in payoff), motion.mu_hat, delta, rho
        )
        if clamp:
            u = [v if v > 0.0 else 0.0 for v in u]
        return u

    def record(idx: int, t: float, epoch: int, u) -> None:
        tau_row = [b.tau_hat for b in payoff]
        _guard_finite(t, motion.mu_hat, motion.beta, tau_row, s_val)
        _guard_published_coefficient(t, motion.mu_hat, delta, rho)
        var = (
            motion.estimator_variance() if motion.alpha > 1.0 else math.nan
        )
        rec.write(
            idx,
            t,
            s_val,
            eco[min(epoch, len(eco) - 1)],
            motion.mu_hat,
            var,
            tau_row,
            [b.P for b in payoff],
            u,
        )

    u_epoch = controls_now()
    record(0, 0.0, 0, u_epoch)
    h2 = 0.5 * h
    for i in range(n_steps):
        k = i // spe
        if i % spe == 0:
            u_epoch = controls_now()
        total_u = sum(u_epoch)
        xd = eco[k] if realized else motion.mu_hat
        drive = xd * total_u
        lam = 1.0 - xd * delta
        # RK4 on dS = drive - lam*S (constant coefficients within the epoch)
        k1 = drive - lam * s_val
        k2 = drive - lam * (s_val + h2 * k1)
        k3 = drive - lam * (s_val + h2 * k2)
        k4 = drive - lam * (s_val + h * k3)
        s_val += h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4)
        if (i + 1) % spe == 0:
            # End of epoch k: absorb the signal that was held over it.
            motion = step_discrete(motion, eco[k], dt)
            payoff = [
                step_discrete_kalman(payoff[j], costs[j][k], dt) for j in range(n)
            ]
            u_epoch = controls_now()
        record(i + 1, (i + 1) * h, (i + 1) // spe, u_epoch)
    return rec.build()


@dataclass(frozen=True)
class SchemeGap:
    """Sup-norm gaps between the discrete and continuous runs for one dt."""

    dt_signal: float
    x_bar: float
    tau_bar: float
    u: float
    stock: float


def compare_schemes(
    scn: Scenario,
    cfg: SimConfig,
    dt_list: list[float],
    seed: TraceSeed | int,
) -> list[SchemeGap]:
    """Run both schemes per dt on signals subsampled from one fine trace.

    One trace set is generated at the finest dt; each coarser dt receives the
    fine values at its own epochs, so both schemes at every level see
    identical signals and the gaps isolate the updating scheme.
    """
    if not dt_list:
        raise ValueError("dt_list must be non-empty")
    dt_fine = min(dt_list)
    strides = {dt: _exact_ratio(dt, dt_fine, f"dt={dt} vs dt_fine") for dt in dt_list}
    _exact_ratio(dt_fine, cfg.h_ode, "dt_fine/h_ode")
    fine = default_traces(scn, replace(cfg, dt_signal=dt_fine), seed)
    rows = []
    for dt in dt_list:
        stride = strides[dt]
        tset = TraceSet(
            ecological=fine.ecological.subsample(stride),
            cost=tuple(c.subsample(stride) for c in fine.cost),
        )
        cfg_dt = replace(cfg, dt_signal=dt)
        cont = simulate(scn, replace(cfg_dt, scheme="continuous"), traces=tset)
        disc = simulate(scn, replace(cfg_dt, scheme="discrete"), traces=tset)
        rows.append(
            SchemeGap(
                dt_signal=dt,
                x_bar=float(np.max(np.abs(cont.x_bar - disc.x_bar))),
                tau_bar=float(np.max(np.abs(cont.tau_bar - disc.tau_bar))),
                u=float(np.max(np.abs(cont.u - disc.u))),
                stock=float(np.max(np.abs(cont.S - disc.S))),
            )
        )
    return rows


@dataclass(frozen=True)
class DiagnosticsWindow:
    """Sup-norm convergence gaps over one time window of a trajectory."""

    t_lo: float
    t_hi: float
    x_gap: float
    tau_gap: float
    var_mu: float
    p_max: float
    control_gap: float

    def as_dict(self) -> dict:
        return {
            "t_lo": self.t_lo,
            "t_hi": self.t_hi,
            "x_gap": self.x_gap,
            "tau_gap": self.tau_gap,
            "var_mu": self.var_mu,
            "p_max": self.p_max,
            "control_gap": self.control_gap,
        }


def window_diagnostics(
    traj: Trajectory, scn: Scenario, t_lo: float, t_hi: float
) -> DiagnosticsWindow:
    """Sup of |x_bar - mu|, |tau_bar - tau|, var_mu, P, and the distance of the
    controls from the full-information controls, over [t_lo, t_hi]."""
    mask = (traj.t >= t_lo - 1e-12) & (traj.t <= t_hi + 1e-12)
    if not mask.any():
        raise ValueError(f"window [{t_lo}, {t_hi}] contains no grid points")
    u_known = np.array(known_state_equilibrium(scn.params, scn.mu_true).controls)
    tau_true = np.array(scn.params.tau)
    return DiagnosticsWindow(
        t_lo=t_lo,
        t_hi=t_hi,
        x_gap=float(np.max(np.abs(traj.x_bar[mask] - scn.mu_true))),
        tau_gap=float(np.max(np.abs(traj.tau_bar[mask] - tau_true))),
        var_mu=float(np.max(traj.var_mu[mask])),
        p_max=float(np.max(traj.P[mask])),
        control_gap=float(np.max(np.abs(traj.u[mask] - u_known))),
    )


def convergence_diagnostics(
    traj: Trajectory, scn: Scenario, tail_fraction: float = 0.05
) -> DiagnosticsWindow:
    """Diagnostics over the trailing ``tail_fraction`` of the horizon."""
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    t_end = float(traj.t[-1])
    return window_diagnostics(traj, scn, t_end * (1.0 - tail_fraction), t_end)


@dataclass(frozen=True)
class PayoffEstimate:
    value: float
    tail_bound: float


def discounted_payoff(
    traj: Trajectory, p: GameParams, player: int, t_trunc: float
) -> PayoffEstimate:
    """Truncated discounted payoff of one player by trapezoid quadrature.

    The tail bound is exp(-rho*t_trunc) * C / rho with C the largest
    instantaneous-payoff magnitude observed anywhere on the trajectory.
    """
    if t_trunc > traj.t[-1] + 1e-9:
        raise ValueError("t_trunc exceeds the simulated horizon")
    total_u = traj.u.sum(axis=1)
    g_full = traj.u[:, player] * (p.a[player] - total_u) - p.tau[player] * traj.S
    mask = traj.t <= t_trunc + 1e-12
    t = traj.t[mask]
    value = float(_trapezoid(np.exp(-p.rho * t) * g_full[mask], t))
    c_bound = float(np.max(np.abs(g_full)))
    tail = math.exp(-p.rho * t_trunc) * c_bound / p.rho
    return PayoffEstimate(value=value, tail_bound=tail)
