"""Classical trajectories and their K-geodesic diagnostics.

A trajectory is integrated with Newton's law; ``g_oo`` is then attached
either along it (``v^2/c^2``) or as the energy-shell field
``2 (E - V) / (m c^2)``, and the geodesic, isotropy, closure and
four-momentum relations are checked step by step.

Step quantities use a cubic Hermite mid-state built from the two endpoint
states and their accelerations::

    x_m = (x0 + x1)/2 + h (v0 - v1)/8,    v_m = (v0 + v1)/2 + h (a0 - a1)/8
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, StepError, SuperluminalError
from .geometry import EPS, KMetricField, assemble_connection, torsion_closure
from .potentials import Particle, Potential


@dataclass(frozen=True)
class State:
    t: float
    x: np.ndarray
    v: np.ndarray
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))
        if np.linalg.norm(self.v) >= self.c:
            raise SuperluminalError(f"|v| = {np.linalg.norm(self.v):.17g} >= c = {self.c}")


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    particle: Particle
    potential: Potential
    scheme: str
    h: float
    c: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return len(self.t) - 1

    def energy(self):
        return 0.5 * self.particle.m * np.sum(self.v**2, axis=-1) + self.potential.V(self.x, self.t)

    def mid_states(self):
        """Hermite mid-step ``(t_m, x_m, v_m)`` for every step."""
        h = np.diff(self.t)[:, None]
        x0, x1, v0, v1, a0, a1 = self.x[:-1], self.x[1:], self.v[:-1], self.v[1:], self.a[:-1], self.a[1:]
        xm = 0.5 * (x0 + x1) + h * (v0 - v1) / 8.0
        vm = 0.5 * (v0 + v1) + h * (a0 - a1) / 8.0
        return self.t[:-1] + 0.5 * h[:, 0], xm, vm


def integrate_newton(particle, potential, initial, h, n, scheme="rk4"):
    """Integrate ``m dv/dt = -grad V`` for ``n`` steps of size ``h``.

    ``scheme`` is ``"rk4"`` (classical fourth order) or ``"leapfrog"``
    (kick-drift-kick velocity Verlet).  Raises :class:`SuperluminalError`
    as soon as ``|v| >= c`` and :class:`StepError` on a non-finite state.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    if scheme not in ("rk4", "leapfrog"):
        raise ValueError(f"unknown scheme {scheme!r}")
    m, c = particle.m, initial.c

    def accel(x, t):
        return -potential.grad_V(x, t) / m

    ts = initial.t + h * np.arange(n + 1)
    xs = np.empty((n + 1, 3))
    vs = np.empty((n + 1, 3))
    acc = np.empty((n + 1, 3))
    x, v = initial.x.copy(), initial.v.copy()
    a = accel(x, ts[0])
    xs[0], vs[0], acc[0] = x, v, a
    for i in range(n):
        t = ts[i]
        if scheme == "rk4":
            k1x, k1v = v, a
            k2x = v + 0.5 * h * k1v
            k2v = accel(x + 0.5 * h * k1x, t + 0.5 * h)
            k3x = v + 0.5 * h * k2v
            k3v = accel(x + 0.5 * h * k2x, t + 0.5 * h)
            k4x = v + h * k3v
            k4v = accel(x + h * k3x, t + h)
            x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        else:
            v_half = v + 0.5 * h * a
            x = x + h * v_half
            v = v_half + 0.5 * h * accel(x, t + h)
        a = accel(x, ts[i + 1])
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v)) and np.all(np.isfinite(a))):
            raise StepError(f"non-finite state at step {i + 1}")
        if v @ v >= c * c:
            raise SuperluminalError(f"|v| reached c at step {i + 1} (t = {ts[i + 1]:.17g})")
        xs[i + 1], vs[i + 1], acc[i + 1] = x, v, a
    return Trajectory(ts, xs, vs, acc, particle, potential, scheme, h, c)


def goo_on_trajectory(traj, strict=False):
    """``g_oo = v^2 / c^2`` at every state, plus a list of flagged states.

    Flags are ``(index, "turning_point")`` for ``v = 0`` (more precisely
    ``g_oo <= eps``).  With ``strict`` a flagged state raises
    :class:`DomainError` instead.
    """
    g = np.sum(traj.v**2, axis=-1) / traj.c**2
    flags = [(int(i), "turning_point") for i in np.flatnonzero(g <= EPS)]
    flags += [(int(i), "superluminal") for i in np.flatnonzero(g >= 1.0)]
    flags.sort()
    if strict and flags:
        raise DomainError(f"g_oo singular at states {[i for i, _ in flags]}")
    return g, flags


def goo_field_from_energy(particle, potential, E, c=1.0, region=None):
    """Energy-shell field ``g_oo(x) = 2 (E - V(x)) / (m c^2)``.

    Reproduces ``v^2/c^2`` on every trajectory of energy ``E``.  Raises
    :class:`DomainError` if the classically allowed region is empty or, when
    ``region`` points are given, if ``g_oo`` leaves ``(0, 1)`` on them.
    """
    m = particle.m
    if potential.v_min is not None and E <= potential.v_min:
        raise DomainError(f"E = {E} is not above min V = {potential.v_min}")
    scale = 2.0 / (m * c * c)

    def goo(x, t=0.0):
        return scale * (E - potential.V(x, t))

    def grad(x, t=0.0):
        return -scale * potential.grad_V(x, t)

    metric = KMetricField(goo, grad, None, c, label=f"{potential.kind}@E={E:.17g}")
    if region is not None:
        g = metric.value(np.asarray(region, dtype=float))
        if np.any(g <= 0.0) or np.any(g >= 1.0):
            raise DomainError("g_oo leaves (0, 1) inside the requested region")
    return metric


def metric_for(traj, E=None):
    """Energy-shell field for a trajectory, with ``E`` taken from its first state."""
    if E is None:
        E = float(traj.energy()[0])
    return goo_field_from_energy(traj.particle, traj.potential, E, traj.c)


def _four_velocity(v, c):
    return np.concatenate([np.full(v.shape[:-1] + (1,), c), v], axis=-1)


def singular_steps(traj, metric):
    """Boolean mask of steps touching the guard band of ``g_oo``."""
    tm, xm, _ = traj.mid_states()
    g_nodes = metric.value(traj.x, traj.t)
    g_mid = metric.value(xm, tm)
    bad_node = (g_nodes <= metric.eps) | (g_nodes >= 1.0 - metric.eps)
    bad_mid = (g_mid <= metric.eps) | (g_mid >= 1.0 - metric.eps)
    return bad_node[:-1] | bad_node[1:] | bad_mid


def isotropy_residual(traj, metric):
    """Normalized chord residual ``1 - |dx|^2 / (g_oo c^2 dt^2)`` per step.

    ``g_oo`` is evaluated at the chord midpoint; steps where it is not
    positive give ``nan``.
    """
    dt = np.diff(traj.t)
    dx = np.diff(traj.x, axis=0)
    g = metric.value(0.5 * (traj.x[:-1] + traj.x[1:]), traj.t[:-1] + 0.5 * dt)
    denom = g * metric.c**2 * dt**2
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (denom - np.sum(dx**2, axis=-1)) / denom
    r[~(g > 0)] = np.nan
    return r


def _momentum(m, c, g, v):
    return m * _four_velocity(v, c) / np.sqrt(1.0 - g)[..., None]


def _transport_rate(metric, x, t, v):
    """``-Gamma^mu_{nu o} p^0 u^nu / p^0`` at states, ``u = dx/dt``."""
    u = _four_velocity(v, metric.c)
    conn = assemble_connection(metric, x, t, direction=u)
    return -np.einsum("...mn,...n->...m", conn.gamma_k[..., :, :, 0], u)


@dataclass
class GeodesicResidual:
    residual: np.ndarray      # (n, 4) raw per-step residual, nan on excluded steps
    normalized: np.ndarray    # (n,) max_mu |R^mu| / (p^0 h)
    excluded: np.ndarray      # indices of steps skipped for singular torsion


def geodesic_residual(traj, metric):
    """Per-step residual of ``dp^mu + Gamma_k^mu_{nu o} p^0 dx^nu = 0``.

    ``dp^mu`` is the difference of endpoint momenta ``m u^mu / sqrt(1 - g)``;
    the connection term is integrated over the step with Simpson's rule on
    the Hermite mid-state.  The local error is fifth order, so the
    normalized residual converges at the integrator order (capped at 4).
    """
    n = traj.n_steps
    m, c = traj.particle.m, metric.c
    bad = singular_steps(traj, metric)
    ok = np.flatnonzero(~bad)
    R = np.full((n, 4), np.nan)
    norm = np.full(n, np.nan)
    if ok.size:
        tm, xm, vm = traj.mid_states()
        t0, t1 = traj.t[ok], traj.t[ok + 1]
        x0, x1, v0, v1 = traj.x[ok], traj.x[ok + 1], traj.v[ok], traj.v[ok + 1]
        g0, g1, gm = metric.value(x0, t0), metric.value(x1, t1), metric.value(xm[ok], tm[ok])
        p0, p1, pm = _momentum(m, c, g0, v0), _momentum(m, c, g1, v1), _momentum(m, c, gm, vm[ok])
        f0 = _transport_rate(metric, x0, t0, v0) * p0[:, :1]
        f1 = _transport_rate(metric, x1, t1, v1) * p1[:, :1]
        fm = _transport_rate(metric, xm[ok], tm[ok], vm[ok]) * pm[:, :1]
        h = (t1 - t0)[:, None]
        R[ok] = (p1 - p0) - h / 6.0 * (f0 + 4.0 * fm + f1)
        norm[ok] = np.max(np.abs(R[ok]), axis=-1) / (p0[:, 0] * h[:, 0])
    return GeodesicResidual(R, norm, np.flatnonzero(bad))


def eq10_residual(traj, metric):
    """Torsion-closure residual per step at the Hermite mid-state.

    The displacement is the tangent ``(1, v_m / c)`` per unit ``x^0``, and the
    spatial torsion is built along the same direction.
    """
    n = traj.n_steps
    bad = singular_steps(traj, metric)
    ok = np.flatnonzero(~bad)
    out = np.full(n, np.nan)
    if ok.size:
        tm, xm, vm = traj.mid_states()
        u = _four_velocity(vm[ok], metric.c) / metric.c
        out[ok] = torsion_closure(metric, xm[ok], tm[ok], u, u)
    return out


@dataclass
class FourMomentumReport:
    p0: np.ndarray              # closed form m c (1 - g)^(-1/2)
    p: np.ndarray               # spatial components
    p0_transported: np.ndarray
    max_rel_drift: float
    excluded_steps: list
    reanchored: list = field(default_factory=list)


def four_momentum(traj, metric, mask=None):
    """Closed-form ``p^0`` against ``p^0`` transported by the connection.

    Transport integrates ``d ln p^0 = -Gamma_k^0_{nu o} dx^nu`` step by step
    (Simpson on the Hermite mid-state).  A singular step cannot be crossed:
    the transported value is re-anchored to the closed form after it and the
    step is listed.  ``mask`` (per state) restricts where drift is measured.
    """
    m, c = traj.particle.m, metric.c
    g = metric.value(traj.x, traj.t)
    inside = (g > metric.eps) & (g < 1.0 - metric.eps)
    p0 = np.full(len(g), np.nan)
    p0[inside] = m * c / np.sqrt(1.0 - g[inside])
    p = p0[:, None] * traj.v / c

    bad = singular_steps(traj, metric)
    ok = np.flatnonzero(~bad)
    incr = np.full(traj.n_steps, np.nan)
    if ok.size:
        tm, xm, vm = traj.mid_states()
        r0 = _transport_rate(metric, traj.x[ok], traj.t[ok], traj.v[ok])[:, 0]
        r1 = _transport_rate(metric, traj.x[ok + 1], traj.t[ok + 1], traj.v[ok + 1])[:, 0]
        rm = _transport_rate(metric, xm[ok], tm[ok], vm[ok])[:, 0]
        incr[ok] = np.diff(traj.t)[ok] / 6.0 * (r0 + 4.0 * rm + r1)

    log_p = np.empty(len(g))
    log_p[0] = np.log(p0[0]) if inside[0] else np.nan
    reanchored = []
    for i in range(traj.n_steps):
        if bad[i] or not np.isfinite(log_p[i]):
            log_p[i + 1] = np.log(p0[i + 1]) if inside[i + 1] else np.nan
            reanchored.append(i + 1)
        else:
            log_p[i + 1] = log_p[i] + incr[i]
    transported = np.exp(log_p)
    rel = np.abs(transported - p0) / p0
    sel = np.isfinite(rel) if mask is None else (np.isfinite(rel) & np.asarray(mask))
    drift = float(np.max(rel[sel])) if np.any(sel) else 0.0
    return FourMomentumReport(p0, p, transported, drift, [int(i) for i in np.flatnonzero(bad)], reanchored)


def proper_time(traj, metric, convention="b"):
    """Cumulative proper time with ``dtau = (1 - g)^(-1/2) dt`` (a) or ``(1 - g)^(+1/2) dt`` (b).

    Each step is integrated with Simpson's rule on the Hermite mid-state.
    """
    power = {"a": -0.5, "b": 0.5}[convention]
    tm, xm, _ = traj.mid_states()
    g = metric.value(traj.x, traj.t)
    gm = metric.value(xm, tm)
    if np.any(g >= 1.0) or np.any(gm >= 1.0):
        raise DomainError("g_oo >= 1 along trajectory")
    rate, rate_m = (1.0 - g) ** power, (1.0 - gm) ** power
    tau = np.zeros(len(g))
    tau[1:] = np.cumsum(np.diff(traj.t) / 6.0 * (rate[:-1] + 4.0 * rate_m + rate[1:]))
    return tau


def proper_time_consistency(traj, metric, rtol=1e-5):
    """Which ``dtau`` convention makes ``m c dt/dtau`` equal the closed-form ``p^0``.

    ``dt/dtau`` is the derivative of a cubic spline through ``(tau_i, t_i)``.
    """
    g = metric.value(traj.x, traj.t)
    m, c = traj.particle.m, metric.c
    p0 = m * c / np.sqrt(1.0 - g)
    report = {"rtol": rtol, "conventions": {}}
    for conv in ("a", "b"):
        tau = proper_time(traj, metric, conv)
        dt_dtau = CubicSpline(tau, traj.t).derivative()(tau)
        mismatch = float(np.max(np.abs(m * c * dt_dtau - p0) / p0))
        report["conventions"][conv] = {"max_rel_mismatch": mismatch, "consistent": mismatch <= rtol}
    report["self_consistent"] = [k for k, v in report["conventions"].items() if v["consistent"]]
    return report


@dataclass
class StepDiagnostics:
    goo: np.ndarray             # per state, v^2/c^2
    iso: np.ndarray             # per step
    geo: np.ndarray             # per step, normalized max
    eq10: np.ndarray            # per step
    p0: np.ndarray              # per state, closed form
    excluded: np.ndarray        # per step bool
    flags: list                 # per state list of tokens
    turning_steps: list
    near_turning_steps: list


def diagnose(traj, metric, goo_below_fraction=0.0):
    """All per-step diagnostics with exclusion bookkeeping.

    Steps touching a turning point (``g_oo`` in the guard band) are always
    excluded.  With ``goo_below_fraction > 0``, steps whose endpoint ``g_oo``
    falls below that fraction of the trajectory maximum are excluded as
    ``near_turning`` (for an oscillator, 0.19 keeps ``|x| < 0.9 A``).
    """
    goo, _ = goo_on_trajectory(traj)
    g_field = metric.value(traj.x, traj.t)
    turning = singular_steps(traj, metric)
    near = np.zeros_like(turning)
    if goo_below_fraction > 0:
        low = g_field < goo_below_fraction * np.max(g_field)
        near = (low[:-1] | low[1:]) & ~turning
    excluded = turning | near
    flags = [[] for _ in range(len(goo))]
    for i in np.flatnonzero(goo <= EPS):
        flags[i].append("turning_point")
    for i in np.flatnonzero(near):
        for j in (i, i + 1):
            if "near_turning" not in flags[j] and "turning_point" not in flags[j]:
                flags[j].append("near_turning")
    fm = four_momentum(traj, metric)
    return StepDiagnostics(
        goo, isotropy_residual(traj, metric), geodesic_residual(traj, metric).normalized,
        eq10_residual(traj, metric), fm.p0, excluded, flags,
        [int(i) for i in np.flatnonzero(turning)], [int(i) for i in np.flatnonzero(near)],
    )


CSV_HEADER = ["t", "x", "y", "z", "vx", "vy", "vz", "goo", "p0",
              "iso_res", "geo_res_max", "eq10_res", "flags"]


def fmt(value):
    return format(float(value), ".17g")


def write_trajectory_csv(path, traj, diag):
    """Trajectory export; step diagnostics sit on the row of the step's first state."""
    n = traj.n_steps
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(n + 1):
            step = (diag.iso[i], diag.geo[i], diag.eq10[i]) if i < n else (np.nan,) * 3
            row = [traj.t[i], *traj.x[i], *traj.v[i], diag.goo[i], diag.p0[i], *step]
            w.writerow([fmt(v) for v in row] + [";".join(diag.flags[i])])
