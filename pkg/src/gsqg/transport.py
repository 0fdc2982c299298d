"""Linear transport with a prescribed nonlocal velocity.

The equation dw/dt + u . grad w = g is integrated with classical RK4 in
time and spectral derivatives in space; the quadratic product is formed
pointwise and dealiased with the 2/3 rule. Velocities come from a
provider: either a closed form u(x, t) or a scalar trajectory frozen in
time whose nodes are turned into velocities by the multiplier laws.
A direct integrator for the self-consistent (nonlinear) velocity is
included for cross-validation of fixed points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .littlewood_paley import BesovParams, besov_norm, build_partition, sobolev_norm
from .spectral import (
    GridSpec,
    RealField,
    VectorField,
    VelocityLaw,
    _dealias_mask,
    _velocity_symbols,
    _wavenumbers,
    compute_velocity,
    validate_alpha,
)

__all__ = [
    "Trajectory",
    "FrozenVelocity",
    "AnalyticVelocity",
    "TransportError",
    "advection_rhs",
    "stable_dt",
    "rk4_step",
    "solve_transport",
    "solve_nonlinear",
    "GrowthReport",
    "growth_bound_check",
    "besov_velocity_norm",
]

_CFL_EPS = 1e-12
_MAX_HALVINGS = 6


class TransportError(RuntimeError):
    """Raised when a transport solve cannot be completed."""

    def __init__(self, message: str, t: float | None = None, dt: float | None = None):
        super().__init__(message)
        self.t = t
        self.dt = dt


class _Instability(Exception):
    def __init__(self, t: float, dt: float, reason: str):
        self.t = t
        self.dt = dt
        self.reason = reason


@dataclass(frozen=True)
class Trajectory:
    """Fields stored at uniformly spaced times t_0 = 0 < ... < t_K = T."""

    grid: GridSpec
    times: np.ndarray
    fields: tuple[RealField, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or len(times) != len(self.fields):
            raise ValueError("times and fields must have matching lengths")
        if len(times) < 1 or times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if len(times) > 1:
            steps = np.diff(times)
            if np.any(steps <= 0.0):
                raise ValueError("times must be strictly increasing")
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise ValueError("trajectory times must be uniformly spaced")
        for f in self.fields:
            if f.grid != self.grid:
                raise ValueError("all trajectory fields must share the trajectory grid")
            if not np.all(np.isfinite(f.values)):
                raise ValueError("trajectory contains non-finite fields")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_nodes(self) -> int:
        return len(self.times) - 1

    def __len__(self) -> int:
        return len(self.fields)


class FrozenVelocity:
    """Velocity from a fixed scalar trajectory.

    Node scalars are converted to velocities by the multiplier law; in
    between nodes the scalar coefficients are interpolated in time with
    a 4-point Lagrange rule (degree drops near the ends and for short
    trajectories), which is exact at the nodes.
    """

    def __init__(self, source: Trajectory, alpha: float, law: VelocityLaw):
        self.grid = source.grid
        self.alpha = validate_alpha(alpha)
        self.law = law
        self.times = source.times
        n = self.grid.n
        coeffs = np.empty((len(source), n, n), dtype=np.complex128)
        for i, f in enumerate(source.fields):
            c = np.fft.fft2(f.values) / (n * n)
            rms = np.sqrt(np.sum(np.abs(c) ** 2))
            if abs(c[0, 0]) > 1e-10 * max(rms, 1e-300):
                raise ValueError(
                    f"trajectory node {i} is not mean-zero (mean = {c[0, 0].real:.3e})"
                )
            c[0, 0] = 0.0
            coeffs[i] = c
        self._coeffs = coeffs
        self._m1, self._m2 = _velocity_symbols(self.grid, self.alpha, self.law)

    def _interpolated_coeffs(self, t: float) -> np.ndarray:
        K = len(self.times) - 1
        if K == 0:
            return self._coeffs[0]
        step = float(self.times[1] - self.times[0])
        tau = min(max(t / step, 0.0), float(K))
        window = min(4, K + 1)
        i0 = int(min(max(math.floor(tau) - (window - 1) // 2, 0), K - window + 1))
        xi = tau - i0
        offsets = np.arange(window)
        c = np.zeros_like(self._coeffs[0])
        for m in range(window):
            w = 1.0
            for l in range(window):
                if l != m:
                    w *= (xi - offsets[l]) / (m - l)
            c += w * self._coeffs[i0 + m]
        return c

    def velocity(self, t: float) -> VectorField:
        c = self._interpolated_coeffs(t)
        n = self.grid.n
        u1 = np.real(np.fft.ifft2(self._m1 * c * (n * n)))
        u2 = np.real(np.fft.ifft2(self._m2 * c * (n * n)))
        return VectorField(RealField(self.grid, u1), RealField(self.grid, u2))


class AnalyticVelocity:
    """Velocity from a closed form fn(x1, x2, t) -> (u1, u2)."""

    def __init__(self, grid: GridSpec, fn: Callable):
        self.grid = grid
        self._fn = fn
        self._mesh = grid.mesh()

    def velocity(self, t: float) -> VectorField:
        x1, x2 = self._mesh
        u1, u2 = self._fn(x1, x2, t)
        u1 = np.broadcast_to(np.asarray(u1, dtype=np.float64), x1.shape)
        u2 = np.broadcast_to(np.asarray(u2, dtype=np.float64), x1.shape)
        return VectorField(
            RealField(self.grid, np.array(u1)), RealField(self.grid, np.array(u2))
        )


def _rhs_values(
    grid: GridSpec,
    w_values: np.ndarray,
    u: VectorField,
    g_values: Optional[np.ndarray],
) -> np.ndarray:
    """-dealias(u . grad w) + g on raw sample arrays."""
    n = grid.n
    k1, k2, _ = _wavenumbers(grid)
    what = np.fft.fft2(w_values)
    wx = np.real(np.fft.ifft2(1j * k1 * what))
    wy = np.real(np.fft.ifft2(1j * k2 * what))
    adv = u.u1.values * wx + u.u2.values * wy
    adv_hat = np.fft.fft2(adv) * _dealias_mask(grid)
    rhs = -np.real(np.fft.ifft2(adv_hat))
    if g_values is not None:
        rhs = rhs + g_values
    return rhs


def advection_rhs(w: RealField, u: VectorField, g: RealField | None = None) -> RealField:
    """Transport tendency -dealias(u . grad w) + g.

    The gradient is spectral, the product is formed pointwise in
    physical space, and only the product is dealiased.
    """
    if u.grid != w.grid or (g is not None and g.grid != w.grid):
        raise ValueError("advection inputs must share a grid")
    if not np.all(np.isfinite(w.values)):
        raise ValueError("advected field has non-finite samples")
    g_values = g.values if g is not None else None
    return RealField(w.grid, _rhs_values(w.grid, w.values, u, g_values))


def stable_dt(u: VectorField, grid: GridSpec, cfl: float) -> float:
    """CFL time step cfl * h / max speed, guarded against zero velocity."""
    if not 0.0 < cfl <= 1.0:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    speed = max(
        float(np.max(np.abs(u.u1.values))),
        float(np.max(np.abs(u.u2.values))),
        _CFL_EPS,
    )
    return cfl * grid.spacing / speed


def _sample_forcing(
    forcing: Optional[Callable], mesh, t: float
) -> Optional[np.ndarray]:
    if forcing is None:
        return None
    x1, x2 = mesh
    return np.asarray(forcing(x1, x2, t), dtype=np.float64)


def _rk4_update(
    grid: GridSpec,
    w: np.ndarray,
    u_start: VectorField,
    u_mid: VectorField,
    u_end: VectorField,
    g_start,
    g_mid,
    g_end,
    dt: float,
) -> np.ndarray:
    k1 = _rhs_values(grid, w, u_start, g_start)
    k2 = _rhs_values(grid, w + 0.5 * dt * k1, u_mid, g_mid)
    k3 = _rhs_values(grid, w + 0.5 * dt * k2, u_mid, g_mid)
    k4 = _rhs_values(grid, w + dt * k3, u_end, g_end)
    out = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out - np.mean(out)


def rk4_step(
    w: RealField,
    provider,
    forcing: Optional[Callable],
    t: float,
    dt: float,
) -> RealField:
    """One classical RK4 step; output is re-projected to mean zero."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    mesh = w.grid.mesh()
    u_start = provider.velocity(t)
    u_mid = provider.velocity(t + 0.5 * dt)
    u_end = provider.velocity(t + dt)
    out = _rk4_update(
        w.grid,
        w.values,
        u_start,
        u_mid,
        u_end,
        _sample_forcing(forcing, mesh, t),
        _sample_forcing(forcing, mesh, t + 0.5 * dt),
        _sample_forcing(forcing, mesh, t + dt),
        dt,
    )
    if not np.all(np.isfinite(out)):
        raise TransportError(f"non-finite state after RK4 step at t = {t:.6g}", t=t, dt=dt)
    return RealField(w.grid, out)


def _check_mean_zero(w0: RealField):
    scale = float(np.max(np.abs(w0.values)))
    if abs(float(np.mean(w0.values))) > 1e-10 * max(scale, 1e-300):
        raise ValueError(f"initial datum must be mean-zero (mean = {w0.mean():.3e})")


def _march_frozen(
    w0: RealField,
    provider,
    forcing: Optional[Callable],
    T: float,
    n_nodes: int,
    m: int,
) -> Trajectory:
    grid = w0.grid
    mesh = grid.mesh()
    dt = T / (n_nodes * m)
    fields = [w0]
    w = w0.values.copy()
    u_start = provider.velocity(0.0)
    for node in range(n_nodes):
        limit = stable_dt(u_start, grid, 1.0)
        if dt > limit * (1.0 + 1e-9):
            raise _Instability(
                node * m * dt, dt, f"dt = {dt:.3e} exceeds CFL bound {limit:.3e}"
            )
        for sub in range(m):
            t_now = (node * m + sub) * dt
            u_mid = provider.velocity(t_now + 0.5 * dt)
            u_end = provider.velocity(t_now + dt)
            w = _rk4_update(
                grid,
                w,
                u_start,
                u_mid,
                u_end,
                _sample_forcing(forcing, mesh, t_now),
                _sample_forcing(forcing, mesh, t_now + 0.5 * dt),
                _sample_forcing(forcing, mesh, t_now + dt),
                dt,
            )
            if not np.all(np.isfinite(w)):
                raise _Instability(t_now, dt, "non-finite state after step")
            u_start = u_end
        fields.append(RealField(grid, w.copy()))
    return Trajectory(grid, np.linspace(0.0, T, n_nodes + 1), tuple(fields))


def solve_transport(
    w0: RealField,
    provider,
    forcing: Optional[Callable],
    T: float,
    dt: float,
    n_nodes: int = 32,
) -> Trajectory:
    """Integrate the transport equation to time T and store n_nodes + 1 nodes.

    The internal step divides the node spacing evenly and never exceeds
    the requested dt. If the CFL audit fails or the state goes
    non-finite, the whole solve restarts with the step halved, up to
    6 halvings.
    """
    if T <= 0.0 or dt <= 0.0:
        raise ValueError(f"T and dt must be positive, got T={T}, dt={dt}")
    if n_nodes < 1:
        raise ValueError(f"need at least one output node, got {n_nodes}")
    if provider.grid != w0.grid:
        raise ValueError("provider grid does not match the initial datum")
    _check_mean_zero(w0)
    delta = T / n_nodes
    m = max(1, math.ceil(delta / dt - 1e-12))
    last: _Instability | None = None
    for halving in range(_MAX_HALVINGS + 1):
        try:
            return _march_frozen(w0, provider, forcing, T, n_nodes, m * 2**halving)
        except _Instability as exc:
            last = exc
    assert last is not None
    raise TransportError(
        f"transport solve unstable after {_MAX_HALVINGS} dt halvings "
        f"(last failure at t = {last.t:.6g} with dt = {last.dt:.3e}: {last.reason})",
        t=last.t,
        dt=last.dt,
    )


def _self_consistent_velocity(
    grid: GridSpec, w_values: np.ndarray, alpha: float, law: VelocityLaw
) -> VectorField:
    return compute_velocity(
        RealField(grid, w_values - np.mean(w_values)), alpha, law
    )


def _march_nonlinear(
    theta0: RealField, alpha: float, law: VelocityLaw, T: float, n_nodes: int, m: int
) -> Trajectory:
    grid = theta0.grid
    dt = T / (n_nodes * m)
    fields = [theta0]
    w = theta0.values.copy()
    for node in range(n_nodes):
        u_now = _self_consistent_velocity(grid, w, alpha, law)
        limit = stable_dt(u_now, grid, 1.0)
        if dt > limit * (1.0 + 1e-9):
            raise _Instability(
                node * m * dt, dt, f"dt = {dt:.3e} exceeds CFL bound {limit:.3e}"
            )
        for sub in range(m):
            t_now = (node * m + sub) * dt
            k1 = _rhs_values(grid, w, _self_consistent_velocity(grid, w, alpha, law), None)
            w2 = w + 0.5 * dt * k1
            k2 = _rhs_values(grid, w2, _self_consistent_velocity(grid, w2, alpha, law), None)
            w3 = w + 0.5 * dt * k2
            k3 = _rhs_values(grid, w3, _self_consistent_velocity(grid, w3, alpha, law), None)
            w4 = w + dt * k3
            k4 = _rhs_values(grid, w4, _self_consistent_velocity(grid, w4, alpha, law), None)
            w = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            w = w - np.mean(w)
            if not np.all(np.isfinite(w)):
                raise _Instability(t_now, dt, "non-finite state after step")
        fields.append(RealField(grid, w.copy()))
    return Trajectory(grid, np.linspace(0.0, T, n_nodes + 1), tuple(fields))


def solve_nonlinear(
    theta0: RealField,
    alpha: float,
    law: VelocityLaw,
    T: float,
    dt: float,
    n_nodes: int = 32,
) -> Trajectory:
    """Direct RK4 integration with the velocity recomputed from the
    current state at every stage. Reference solution for fixed points."""
    if T <= 0.0 or dt <= 0.0:
        raise ValueError(f"T and dt must be positive, got T={T}, dt={dt}")
    if n_nodes < 1:
        raise ValueError(f"need at least one output node, got {n_nodes}")
    alpha = validate_alpha(alpha)
    _check_mean_zero(theta0)
    delta = T / n_nodes
    m = max(1, math.ceil(delta / dt - 1e-12))
    last: _Instability | None = None
    for halving in range(_MAX_HALVINGS + 1):
        try:
            return _march_nonlinear(theta0, alpha, law, T, n_nodes, m * 2**halving)
        except _Instability as exc:
            last = exc
    assert last is not None
    raise TransportError(
        f"nonlinear solve unstable after {_MAX_HALVINGS} dt halvings "
        f"(last failure at t = {last.t:.6g} with dt = {last.dt:.3e}: {last.reason})",
        t=last.t,
        dt=last.dt,
    )


@dataclass(frozen=True)
class GrowthReport:
    """Observed Sobolev-norm growth of a transported field."""

    times: tuple[float, ...]
    log_growth: tuple[float, ...]
    rate: float
    sup_source_norm: float
    s: float
    alpha: float
    bound: float | None = None

    @property
    def within_bound(self) -> bool | None:
        if self.bound is None:
            return None
        return self.rate <= self.bound


def growth_bound_check(
    traj: Trajectory,
    theta_source: Trajectory,
    s: float,
    alpha: float,
    bound: float | None = None,
) -> GrowthReport:
    """Fit the exponential growth rate of ||w(t)||_{H^s}.

    The rate is log(||w(T)|| / ||w(0)||) divided by T times the sup of
    the source trajectory's H^s norm, the normalization under which a
    single constant should cover a whole ensemble of sources.
    """
    if traj.grid != theta_source.grid:
        raise ValueError("trajectory grids do not match")
    if not np.allclose(traj.times[-1], theta_source.times[-1], rtol=1e-9):
        raise ValueError("trajectory horizons do not match")
    h0 = sobolev_norm(traj.fields[0], s)
    if h0 == 0.0:
        raise ValueError("initial field has zero Sobolev norm")
    log_growth = tuple(
        float(np.log(sobolev_norm(f, s) / h0)) for f in traj.fields
    )
    sup_src = max(sobolev_norm(f, s) for f in theta_source.fields)
    denom = traj.horizon * sup_src
    final = log_growth[-1]
    if denom == 0.0:
        rate = 0.0 if abs(final) < 1e-13 else math.inf
    else:
        rate = final / denom
    return GrowthReport(
        times=tuple(float(t) for t in traj.times),
        log_growth=log_growth,
        rate=rate,
        sup_source_norm=sup_src,
        s=s,
        alpha=alpha,
        bound=bound,
    )


def besov_velocity_norm(theta: RealField, alpha: float, s: float) -> float:
    """Besov B^s_{1/alpha, 2} size of the divergence-free velocity.

    Only defined for 0 < alpha < 1/2; at alpha = 1/2 the exponent
    degenerates and the Sobolev/Riesz route applies instead.
    """
    alpha = validate_alpha(alpha)
    if alpha == 0.5:
        raise ValueError("alpha = 1/2 degenerates to p = 2; use sobolev_norm instead")
    u = compute_velocity(theta, alpha, VelocityLaw.PERP)
    partition = build_partition(theta.grid)
    params = BesovParams(s=s, p=1.0 / alpha, q=2.0)
    return max(
        besov_norm(u.u1, params, partition),
        besov_norm(u.u2, params, partition),
    )
