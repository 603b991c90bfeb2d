"""Maximal Lyapunov exponents of test-particle motion.

The tangent flow ``d(dx)/dt = dv, d(dv)/dt = -Hess V dx / m`` is integrated
alongside Newton's equations with RK4 and renormalized every
``renorm_interval``; the exponent is the mean log stretch per unit time.
Batches of initial conditions are advanced together.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, KFieldError, NonConvergedWarning, StepError, SuperluminalError

STABLE_TOL = 1e-2


def _lyapunov_batch(particle, potential, x0, v0, w0, horizon, renorm_interval, h, c):
    """Raw exponents at the full horizon and at half of it, shape ``(B,)`` each."""
    m = particle.m
    k = max(1, int(round(renorm_interval / h)))
    h = renorm_interval / k
    n_renorm = max(2, int(round(horizon / renorm_interval)))
    half = n_renorm // 2

    B = len(x0)
    y = np.empty((B, 12))
    y[:, 0:3], y[:, 3:6] = x0, v0
    w = w0 / np.linalg.norm(w0, axis=-1, keepdims=True)
    y[:, 6:9], y[:, 9:12] = w[:, :3], w[:, 3:]
    dy = np.empty_like(y)

    def rhs(y, t):
        x = y[:, 0:3]
        dy[:, 0:3] = y[:, 3:6]
        dy[:, 3:6] = potential.grad_V(x, t)
        dy[:, 6:9] = y[:, 9:12]
        dy[:, 9:12] = np.einsum("bij,bj->bi", potential.hess_V(x, t), y[:, 6:9])
        dy[:, 3:6] *= -1.0 / m
        dy[:, 9:12] *= -1.0 / m
        return dy.copy()

    log_sum = np.zeros(B)
    log_half = None
    t = 0.0
    for j in range(n_renorm):
        for _ in range(k):
            k1 = rhs(y, t)
            k2 = rhs(y + 0.5 * h * k1, t + 0.5 * h)
            k3 = rhs(y + 0.5 * h * k2, t + 0.5 * h)
            k4 = rhs(y + h * k3, t + h)
            y += (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            t += h
        x, v, dx = y[:, 0:3], y[:, 3:6], y[:, 6:9]
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v)) and np.all(np.isfinite(dx))):
            raise StepError(f"non-finite state in tangent flow after t = {t:g}")
        if np.any(np.sum(v * v, axis=-1) >= c * c):
            raise SuperluminalError(f"|v| reached c in tangent flow at t = {t:g}")
        norm = np.sqrt(np.sum(y[:, 6:12] ** 2, axis=-1))
        log_sum += np.log(norm)
        y[:, 6:12] /= norm[:, None]
        if j + 1 == half:
            log_half = log_sum.copy()
    T = n_renorm * renorm_interval
    return log_sum / T, log_half / (half * renorm_interval)


def _initial_tangent(potential, rng, n):
    """Seeded random unit tangents; confined to the (x, v_x) plane for 1-D potentials."""
    w = rng.normal(size=(n, 6))
    if potential.ndim == 1:
        w[:, [1, 2, 4, 5]] = 0.0
    return w


def _not_converged(lam, lam_half, tol):
    return np.abs(lam - lam_half) > 0.1 * np.maximum(np.abs(lam), tol)


@dataclass
class LyapunovEstimate:
    lam: float          # max(raw, 0)
    raw: float
    raw_half: float
    horizon: float
    renorm_interval: float
    converged: bool


def max_lyapunov(particle, potential, initial, horizon=1e3, renorm_interval=1.0, h=0.05,
                 seed=0, tol=STABLE_TOL):
    """Maximal Lyapunov exponent from one initial state.

    The initial tangent vector is a seeded random unit vector in phase space.
    Emits :class:`NonConvergedWarning` when the estimates at ``horizon/2``
    and ``horizon`` differ by more than 10% (relative to ``max(|lam|, tol)``).
    """
    rng = np.random.default_rng(seed)
    w0 = _initial_tangent(potential, rng, 1)
    lam, lam_half = _lyapunov_batch(
        particle, potential, initial.x[None], initial.v[None], w0,
        horizon, renorm_interval, h, initial.c,
    )
    bad = bool(_not_converged(lam, lam_half, tol)[0])
    if bad:
        warnings.warn(
            f"Lyapunov estimate not converged: {lam_half[0]:.6g} at T/2 vs {lam[0]:.6g} at T",
            NonConvergedWarning, stacklevel=2,
        )
    return LyapunovEstimate(max(float(lam[0]), 0.0), float(lam[0]), float(lam_half[0]),
                            horizon, renorm_interval, not bad)


def axis_shell_sampler(particle, potential, E, n, rng, extent=5.0, resolution=20001):
    """Seeded states on the energy shell with positions on the x axis.

    Positions are uniform over the classically allowed part of
    ``[-extent, extent]``; velocity directions are uniform on the sphere, or
    ``+-x`` for potentials that depend on x only.
    """
    xs = np.linspace(-extent, extent, resolution)
    pts = np.zeros((resolution, 3))
    pts[:, 0] = xs
    allowed = xs[potential.V(pts) <= E]
    if allowed.size == 0:
        raise DomainError(f"no classically allowed motion at E = {E}")
    x = np.zeros((n, 3))
    x[:, 0] = rng.choice(allowed, size=n)
    speed = np.sqrt(np.maximum(2.0 * (E - potential.V(x)) / particle.m, 0.0))
    if potential.ndim == 1:
        d = np.zeros((n, 3))
        d[:, 0] = rng.choice([-1.0, 1.0], size=n)
    else:
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return x, speed[:, None] * d


@dataclass
class StabilityScan:
    energies: list
    lambda_max: list
    lambda_raw: list
    classification: list
    tol: float
    horizon: float
    renorm_interval: float
    seed: int
    failures: dict = field(default_factory=dict)
    not_converged: list = field(default_factory=list)

    def unstable_band(self):
        return [E for E, cls in zip(self.energies, self.classification) if cls == "unstable"]


def stationary_scan(particle, potential, energies, sampler=axis_shell_sampler, n_samples=8,
                    horizon=1e3, renorm_interval=1.0, h=0.05, seed=0, tol=STABLE_TOL, c=1.0):
    """Largest Lyapunov exponent over sampled shell states, per energy.

    Energies whose shell cannot be sampled or whose flow fails are recorded
    in ``failures`` and classified ``"error"``; the scan carries on.  All
    remaining samples are integrated as one batch, so the output depends only
    on the inputs and ``seed``.
    """
    energies = [float(E) for E in energies]
    lam_max = [float("nan")] * len(energies)
    lam_raw = [float("nan")] * len(energies)
    cls = ["error"] * len(energies)
    failures, not_conv = {}, []
    xs, vs, ws, owner = [], [], [], []
    for i, E in enumerate(energies):
        rng = np.random.default_rng([seed, i])
        try:
            x, v = sampler(particle, potential, E, n_samples, rng)
            if np.any(np.sum(v * v, axis=-1) >= c * c):
                raise SuperluminalError(f"shell speed at E = {E} reaches c")
        except KFieldError as exc:
            failures[i] = f"{type(exc).__name__}: {exc}"
            continue
        xs.append(x)
        vs.append(v)
        ws.append(_initial_tangent(potential, rng, len(x)))
        owner += [i] * len(x)
    if owner:
        owner = np.array(owner)
        try:
            lam, lam_half = _lyapunov_batch(particle, potential, np.concatenate(xs), np.concatenate(vs),
                                            np.concatenate(ws), horizon, renorm_interval, h, c)
        except KFieldError:
            lam, lam_half = _per_energy_fallback(particle, potential, xs, vs, ws, owner, horizon,
                                                 renorm_interval, h, c, failures)
        for i in np.unique(owner):
            sel = owner == i
            if not np.all(np.isfinite(lam[sel])):
                continue
            j = int(np.argmax(lam[sel]))
            raw = float(lam[sel][j])
            lam_raw[i] = raw
            lam_max[i] = max(raw, 0.0)
            cls[i] = "stable" if abs(raw) <= tol else "unstable"
            if _not_converged(lam[sel], lam_half[sel], tol)[j]:
                not_conv.append(int(i))
    return StabilityScan(energies, lam_max, lam_raw, cls, tol, horizon, renorm_interval, seed,
                         failures, not_conv)


def _per_energy_fallback(particle, potential, xs, vs, ws, owner, horizon, renorm, h, c, failures):
    lam = np.full(len(owner), np.nan)
    lam_half = np.full(len(owner), np.nan)
    start = 0
    for x, v, w in zip(xs, vs, ws):
        i = owner[start]
        sl = slice(start, start + len(x))
        try:
            lam[sl], lam_half[sl] = _lyapunov_batch(particle, potential, x, v, w, horizon, renorm, h, c)
        except KFieldError as exc:
            failures[int(i)] = f"{type(exc).__name__}: {exc}"
        start += len(x)
    return lam, lam_half


SCAN_HEADER = ["E", "lambda_max", "classification", "horizon", "renorm", "seed"]


def write_scan_csv(path, scan):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_HEADER)
        for E, lam, cls in zip(scan.energies, scan.lambda_max, scan.classification):
            w.writerow([format(E, ".17g"), format(lam, ".17g"), cls,
                        format(scan.horizon, ".17g"), format(scan.renorm_interval, ".17g"), scan.seed])
