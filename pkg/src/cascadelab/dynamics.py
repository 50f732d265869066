"""Time integration of cascade systems and trajectory diagnostics.

Two steppers: the classic fixed-step fourth-order Runge-Kutta scheme and an
embedded Fehlberg 4(5) pair with proportional step control.  Both operate
on a CascadeSystem, which binds a coupling table to its dissipation and
forcing so the right-hand side is a single call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, IntegrationError, NumericError
from .invariants import WeightMatrix, energy
from .models import (
    CouplingTable,
    DissipationSpec,
    ForcingSpec,
    ShellState,
    _pow,
    as_shell_array,
    build_goy,
    build_s2_diag,
)
from .stationary import energy_slope

__all__ = [
    "CascadeSystem",
    "IntegratorSpec",
    "Trajectory",
    "SpectrumReport",
    "GoyCorrespondence",
    "GoyCheckReport",
    "step_rk4",
    "integrate",
    "drift_report",
    "time_avg_spectrum",
    "goy_map",
    "check_goy_correspondence",
]

_METHODS = ("rk4", "rk45")


@dataclass(frozen=True)
class IntegratorSpec:
    """Integration plan.

    ``dt`` is the fixed step for rk4 and the initial step for rk45; the
    embedded pair then keeps the component-wise error below
    abs_tol + rel_tol * |V| while holding the step inside
    [dt_min, dt_max].  Samples are recorded every ``sample_stride`` accepted
    steps, always including t = 0 and the final time.
    """

    method: str = "rk4"
    dt: float = 1e-3
    duration: float = 1.0
    sample_stride: int = 1
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    dt_min: float = 1e-12
    dt_max: float = 1.0

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ConfigurationError(f"method must be one of {_METHODS}, got {self.method!r}")
        for name in ("dt", "rel_tol", "abs_tol", "dt_min", "dt_max"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise ConfigurationError(f"{name} must be a positive finite number")
            object.__setattr__(self, name, value)
        duration = float(self.duration)
        if not math.isfinite(duration) or duration < 0.0:
            raise ConfigurationError("duration must be finite and >= 0")
        object.__setattr__(self, "duration", duration)
        if duration > 0.0 and self.dt > duration:
            raise ConfigurationError(f"dt={self.dt} exceeds duration={duration}")
        if self.sample_stride < 1:
            raise ConfigurationError("sample_stride must be at least 1")
        if self.dt_min > self.dt_max:
            raise ConfigurationError("dt_min must not exceed dt_max")


@dataclass(frozen=True, eq=False)
class CascadeSystem:
    """A coupling table bound to dissipation, forcing, and its scale ratio."""

    table: CouplingTable
    dissipation: DissipationSpec | None = None
    forcing: ForcingSpec | None = None
    p: float | None = None

    @property
    def r(self) -> int:
        return self.table.r

    @property
    def scale_ratio(self) -> float | None:
        if self.p is not None:
            return self.p
        return self.table.spec.p if self.table.spec is not None else None

    @cached_property
    def _bound(self) -> tuple:
        ii, ia, ib, cc = self.table._arrays
        nu_diag = None
        nu_matrix = None
        if self.dissipation is not None and not self.dissipation.is_zero:
            if self.dissipation.matrix is not None:
                nu_matrix = self.dissipation.as_matrix(None, self.r)
            else:
                p = self.scale_ratio
                if p is None:
                    raise ConfigurationError(
                        "the dissipation power law needs the model's scale ratio p"
                    )
                nu_diag = self.dissipation.diagonal(p, self.r)
        f_vec = None
        if self.forcing is not None and not self.forcing.is_zero:
            f_vec = self.forcing.vector(self.r)
        return ii, ia, ib, cc, nu_diag, nu_matrix, f_vec

    def rhs(self, v: np.ndarray) -> np.ndarray:
        ii, ia, ib, cc, nu_diag, nu_matrix, f_vec = self._bound
        out = np.zeros(self.r + 1)
        if cc.size:
            # overflow surfaces as a non-finite stage in the integrator check
            with np.errstate(over="ignore", invalid="ignore"):
                np.add.at(out, ii, cc * v[ia] * v[ib])
        if nu_diag is not None:
            out -= nu_diag * v
        elif nu_matrix is not None:
            out -= nu_matrix @ v
        if f_vec is not None:
            out += f_vec
        return out


def _checked_stage(system: CascadeSystem, v: np.ndarray, stage: str, t: float) -> np.ndarray:
    k = system.rhs(v)
    if not np.all(np.isfinite(k)):
        shell = int(np.flatnonzero(~np.isfinite(k))[0])
        raise IntegrationError(
            f"non-finite derivative at shell {shell} in stage {stage} near t={t:.6g}"
        )
    return k


def step_rk4(
    system: CascadeSystem, state: "ShellState | np.ndarray", dt: float, t: float = 0.0
) -> np.ndarray:
    """One classic fourth-order Runge-Kutta step of size dt."""
    if dt <= 0.0 or not math.isfinite(dt):
        raise ConfigurationError(f"dt must be positive and finite, got {dt}")
    v = as_shell_array(state, system.r)
    k1 = _checked_stage(system, v, "k1", t)
    k2 = _checked_stage(system, v + 0.5 * dt * k1, "k2", t)
    k3 = _checked_stage(system, v + 0.5 * dt * k2, "k3", t)
    k4 = _checked_stage(system, v + dt * k3, "k4", t)
    return v + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


# Fehlberg 4(5) tableau.  The fifth-order combination propagates the
# solution; the difference of the two rows estimates the local error.
_FEHLBERG_C = (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_FEHLBERG_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_FEHLBERG_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0)
_FEHLBERG_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0)


def _step_rkf45(
    system: CascadeSystem, v: np.ndarray, dt: float, t: float
) -> tuple[np.ndarray, float]:
    """One embedded step: returns the fifth-order update and the error ratio
    max_i |err_i| / (abs_tol-free scale is applied by the caller)."""
    ks = []
    for stage in range(6):
        u = v.copy()
        for m, a in enumerate(_FEHLBERG_A[stage]):
            u += dt * a * ks[m]
        ks.append(_checked_stage(system, u, f"k{stage + 1}", t))
    v5 = v.copy()
    err = np.zeros_like(v)
    for m in range(6):
        v5 += dt * _FEHLBERG_B5[m] * ks[m]
        err += dt * (_FEHLBERG_B5[m] - _FEHLBERG_B4[m]) * ks[m]
    return v5, err


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution of a cascade run.

    The first sample is always the initial state at t = 0; the last is the
    final state.  ``energy`` carries the per-sample total energy when the
    scale ratio is known, ``helicity`` the optional second form.
    """

    times: np.ndarray
    states: np.ndarray
    energy: np.ndarray | None
    helicity: np.ndarray | None
    meta: dict

    @property
    def r(self) -> int:
        return self.states.shape[1] - 1

    @property
    def n_samples(self) -> int:
        return self.times.size

    def to_csv(self) -> str:
        header = "t," + ",".join(f"V{i}" for i in range(self.states.shape[1]))
        lines = [header]
        for k in range(self.times.size):
            row = [f"{self.times[k]:.17g}"]
            row.extend(f"{x:.17g}" for x in self.states[k])
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def integrate(
    system: CascadeSystem,
    state0: "ShellState | np.ndarray",
    spec: IntegratorSpec,
    h_weights: WeightMatrix | None = None,
) -> Trajectory:
    """Advance the system to spec.duration and record sampled states."""
    v = as_shell_array(state0, system.r).copy()
    p = system.scale_ratio

    times = [0.0]
    states = [v.copy()]
    meta: dict = {
        "method": spec.method,
        "dt": spec.dt,
        "duration": spec.duration,
        "sample_stride": spec.sample_stride,
        "scale_ratio": p,
    }

    if spec.duration == 0.0:
        meta.update({"n_steps": 0, "n_accepted": 0, "n_rejected": 0})
        return _finish_trajectory(times, states, meta, p, h_weights)

    if spec.method == "rk4":
        n_steps = max(1, int(round(spec.duration / spec.dt)))
        t = 0.0
        for k in range(1, n_steps + 1):
            v = step_rk4(system, v, spec.dt, t)
            t = k * spec.dt
            if k % spec.sample_stride == 0 or k == n_steps:
                times.append(t)
                states.append(v.copy())
        meta.update({"n_steps": n_steps, "n_accepted": n_steps, "n_rejected": 0})
        return _finish_trajectory(times, states, meta, p, h_weights)

    # rk45: proportional control on the embedded error estimate.
    t = 0.0
    dt = min(max(spec.dt, spec.dt_min), spec.dt_max)
    accepted = 0
    rejected = 0
    dt_used_min = math.inf
    dt_used_max = 0.0
    end = spec.duration
    while t < end * (1.0 - 1e-15):
        dt = min(dt, end - t)
        v5, err = _step_rkf45(system, v, dt, t)
        scale = spec.abs_tol + spec.rel_tol * np.maximum(np.abs(v), np.abs(v5))
        ratio = float(np.max(np.abs(err) / scale))
        if ratio <= 1.0:
            t += dt
            v = v5
            accepted += 1
            dt_used_min = min(dt_used_min, dt)
            dt_used_max = max(dt_used_max, dt)
            if accepted % spec.sample_stride == 0 or t >= end * (1.0 - 1e-15):
                times.append(t)
                states.append(v.copy())
        else:
            rejected += 1
            if dt <= spec.dt_min * (1.0 + 1e-12):
                raise IntegrationError(
                    f"step size underflow at t={t:.6g}: error ratio {ratio:.3g} at dt_min"
                )
        factor = 5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
        dt = min(spec.dt_max, max(spec.dt_min, dt * factor))
    meta.update(
        {
            "n_steps": accepted + rejected,
            "n_accepted": accepted,
            "n_rejected": rejected,
            "dt_used_min": dt_used_min if accepted else None,
            "dt_used_max": dt_used_max if accepted else None,
        }
    )
    return _finish_trajectory(times, states, meta, p, h_weights)


def _finish_trajectory(
    times: list[float],
    states: list[np.ndarray],
    meta: dict,
    p: float | None,
    h_weights: WeightMatrix | None,
) -> Trajectory:
    t_arr = np.array(times)
    s_arr = np.array(states)
    e_arr = None
    if p is not None:
        e_arr = np.array([energy(s, p)[0] for s in s_arr])
    h_arr = None
    if h_weights is not None:
        h_arr = np.array([h_weights.quad(s) for s in s_arr])
    return Trajectory(times=t_arr, states=s_arr, energy=e_arr, helicity=h_arr, meta=meta)


# Reference magnitudes below this floor are treated as exact zeros when
# forming relative drifts.
_DRIFT_FLOOR = 1e-300


def drift_report(
    traj: Trajectory,
    weights: "Mapping[str, WeightMatrix] | Sequence[WeightMatrix]",
) -> dict[str, float]:
    """Max relative drift |Q(t) - Q(0)| / max(|Q(0)|, floor) per invariant."""
    if isinstance(weights, Mapping):
        named = dict(weights)
    else:
        named = {f"Q{k}": w for k, w in enumerate(weights)}
    out: dict[str, float] = {}
    for name, w in named.items():
        q = np.array([w.quad(s) for s in traj.states])
        q0 = q[0]
        denom = max(abs(q0), _DRIFT_FLOOR)
        out[name] = float(np.max(np.abs(q - q0)) / denom)
    return out


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Time-averaged shell energies and their fitted spectral slope."""

    shell_energy: np.ndarray
    slope: float
    window: tuple[float, float]
    n_samples: int

    def to_csv(self) -> str:
        lines = ["shell,E_i"]
        lines.extend(f"{i},{e:.17g}" for i, e in enumerate(self.shell_energy))
        return "\n".join(lines) + "\n"


def time_avg_spectrum(
    traj: Trajectory,
    window: tuple[float, float] | None = None,
    shells: Sequence[int] | None = None,
) -> SpectrumReport:
    """Average E_i over the samples inside the window and fit the slope."""
    p = traj.meta.get("scale_ratio")
    if p is None:
        raise ConfigurationError("trajectory does not record a scale ratio")
    t0, t1 = window if window is not None else (float(traj.times[0]), float(traj.times[-1]))
    if t1 < t0:
        raise ConfigurationError(f"window must have t0 <= t1, got {(t0, t1)}")
    mask = (traj.times >= t0) & (traj.times <= t1)
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise ConfigurationError(f"no samples inside window {(t0, t1)}")
    w = (1.0 - 1.0 / p) * np.array([_pow(p, i) for i in range(traj.states.shape[1])])
    mean_sq = np.mean(traj.states[mask] ** 2, axis=0)
    shell_energy = w * mean_sq
    slope = energy_slope(shell_energy, p, shells)
    return SpectrumReport(
        shell_energy=shell_energy, slope=slope, window=(float(t0), float(t1)), n_samples=n
    )


@dataclass(frozen=True)
class GoyCorrespondence:
    """Parameter map identifying the gamma = -1/2 diagonal cascade with a
    GOY system.

    lam = p, eps = 1 + sqrt(p), a = h0 (1 - 1/p)**3 (p - sqrt(p)); states
    map by v_i = p**(i/2) V_i.  Under the map the geometric GOY invariant
    sum (eps - 1)**(-i) v_i**2 pulls back to the diagonal weight
    p**((gamma + 1) i) on V.
    """

    p: float
    h0: float
    lam: float
    eps: float
    a: float
    scaling_exponent: float = 0.5

    def to_goy_state(self, state: "ShellState | np.ndarray") -> np.ndarray:
        v = state.v if isinstance(state, ShellState) else np.asarray(state, dtype=float)
        scale = np.array([_pow(self.p, self.scaling_exponent * i) for i in range(v.size)])
        return scale * v

    def from_goy_state(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        scale = np.array([_pow(self.p, -self.scaling_exponent * i) for i in range(v.size)])
        return scale * v

    def diag_table(self, r: int) -> CouplingTable:
        return build_s2_diag(self.p, r, -0.5, self.h0)

    def goy_table(self, r: int) -> CouplingTable:
        return build_goy(self.lam, self.eps, self.a, r)


def goy_map(p: float, h0: float = 1.0) -> GoyCorrespondence:
    """Parameters of the GOY system equivalent to build_s2_diag at gamma=-1/2."""
    if p <= 1.0:
        raise ConfigurationError(f"scale ratio p must exceed 1, got {p}")
    root = math.sqrt(p)
    return GoyCorrespondence(
        p=float(p),
        h0=float(h0),
        lam=float(p),
        eps=1.0 + root,
        a=float(h0) * (1.0 - 1.0 / p) ** 3 * (p - root),
    )


@dataclass(frozen=True)
class GoyCheckReport:
    """Numeric verification of the GOY correspondence on seeded states."""

    p: float
    h0: float
    lam: float
    eps: float
    a: float
    r: int
    n_states: int
    seed: int
    tol: float
    interior: tuple[int, int]
    max_scaled_mismatch_interior: float
    max_scaled_mismatch_all: float
    max_weight_pullback_error: float
    passes: bool

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "h0": self.h0,
            "lambda": self.lam,
            "eps": self.eps,
            "a": self.a,
            "r": self.r,
            "n_states": self.n_states,
            "seed": self.seed,
            "tol": self.tol,
            "interior": list(self.interior),
            "max_scaled_mismatch_interior": self.max_scaled_mismatch_interior,
            "max_scaled_mismatch_all": self.max_scaled_mismatch_all,
            "max_weight_pullback_error": self.max_weight_pullback_error,
            "passes": self.passes,
        }


def check_goy_correspondence(
    p: float,
    r: int = 20,
    h0: float = 1.0,
    n_states: int = 100,
    seed: int = 0,
    tol: float = 1e-12,
) -> GoyCheckReport:
    """Verify on seeded random states that p**(i/2)-scaled diagonal dynamics
    equals the mapped GOY dynamics, mismatches normalized by the per-shell
    absolute GOY term mass."""
    corr = goy_map(p, h0)
    diag = corr.diag_table(r)
    goy = corr.goy_table(r)
    up = np.array([_pow(p, 0.5 * i) for i in range(r + 1)])
    lo_int = 2 * diag.max_offset
    hi_int = r - 2 * diag.max_offset
    if lo_int > hi_int:
        raise ConfigurationError(f"r={r} leaves no interior shells for the comparison")

    worst_interior = 0.0
    worst_all = 0.0
    for k in range(n_states):
        rng = np.random.default_rng((seed, k))
        big_v = rng.uniform(-1.0, 1.0, r + 1)
        small_v = up * big_v
        lhs = up * diag.quadratic_rhs(big_v)
        rhs = goy.quadratic_rhs(small_v)
        scale = goy.term_scale(small_v)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(scale > 0.0, np.abs(lhs - rhs) / scale, 0.0)
        worst_all = max(worst_all, float(np.max(rel)))
        worst_interior = max(worst_interior, float(np.max(rel[lo_int : hi_int + 1])))

    # The geometric GOY weight pulled back through the state map must equal
    # the diagonal weight with exponent gamma + 1 = 1/2.
    pulled = np.array([(corr.eps - 1.0) ** (-i) * _pow(p, i) for i in range(r + 1)])
    target = np.array([_pow(p, 0.5 * i) for i in range(r + 1)])
    weight_err = float(np.max(np.abs(pulled / target - 1.0)))

    passes = worst_interior <= tol and weight_err <= tol
    return GoyCheckReport(
        p=float(p),
        h0=float(h0),
        lam=corr.lam,
        eps=corr.eps,
        a=corr.a,
        r=int(r),
        n_states=int(n_states),
        seed=int(seed),
        tol=float(tol),
        interior=(lo_int, hi_int),
        max_scaled_mismatch_interior=worst_interior,
        max_scaled_mismatch_all=worst_all,
        max_weight_pullback_error=weight_err,
        passes=passes,
    )
