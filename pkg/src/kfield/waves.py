"""Scalar wave operator on constant-g_oo backgrounds and dispersion checks.

The de Rham operator on 1-forms is not constructed here.  What is checked is
the scalar d'Alembertian of ``dS^2 = g c^2 dt^2 - dx^2`` in 1+1 dimensions,

    (1 / (g c^2)) d_t^2 f - d_x^2 f,

discretized with second-order central differences on a space-periodic grid.
Its null plane waves travel at ``c sqrt(g)``, the particle speed on the
isotropic surface.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, StabilityError


@dataclass(frozen=True)
class Grid1p1:
    nx: int
    nt: int
    dx: float
    dt: float
    periodic: bool = True

    @classmethod
    def periodic_box(cls, length, nx, nt, cfl, goo, c=1.0):
        """Grid with ``dt = cfl * dx * sqrt(goo) / c``."""
        dx = length / nx
        return cls(nx, nt, dx, cfl * dx * np.sqrt(goo) / c, True)

    @property
    def x(self):
        return self.dx * np.arange(self.nx)

    @property
    def t(self):
        return self.dt * np.arange(self.nt)

    def cfl_number(self, goo, c=1.0):
        return np.sqrt(goo) * c * self.dt / self.dx

    def check_cfl(self, goo, c=1.0):
        if self.cfl_number(goo, c) > 1.0:
            raise StabilityError(
                f"dt = {self.dt:g} exceeds dx sqrt(g)/c = {self.dx * np.sqrt(goo) / c:g}"
            )


@dataclass(frozen=True)
class PlaneWaveProbe:
    omega: float
    kx: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.amplitude == 0:
            raise ValueError("probe amplitude must be non-zero")

    def sample(self, grid, complex_valued=False):
        phase = self.kx * grid.x[None, :] - self.omega * grid.t[:, None]
        if complex_valued:
            return self.amplitude * np.exp(1j * phase)
        return self.amplitude * np.cos(phase)


@dataclass
class DispersionResult:
    probe: PlaneWaveProbe
    residual: float
    classification: str
    goo: float = float("nan")

    @property
    def phase_velocity(self):
        return self.probe.omega / self.probe.kx


def _check_goo(goo):
    if not 0.0 < goo <= 1.0:
        raise DomainError(f"constant g_oo must lie in (0, 1], got {goo}")


def apply_k_dalembert(field, goo, grid, c=1.0):
    """Discrete ``(1/(g c^2)) d_t^2 - d_x^2`` on a ``(nt, nx)`` field.

    Returns the ``(nt - 2, nx)`` interior time levels.  Space is periodic
    when ``grid.periodic``; otherwise the two boundary columns are dropped too.
    """
    _check_goo(goo)
    f = np.asarray(field)
    d_tt = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / grid.dt**2
    mid = f[1:-1]
    if grid.periodic:
        d_xx = (np.roll(mid, -1, axis=1) - 2.0 * mid + np.roll(mid, 1, axis=1)) / grid.dx**2
        return d_tt / (goo * c * c) - d_xx
    d_xx = (mid[:, 2:] - 2.0 * mid[:, 1:-1] + mid[:, :-2]) / grid.dx**2
    return d_tt[:, 1:-1] / (goo * c * c) - d_xx


def step_wave(u_prev, u_now, goo, grid, c=1.0):
    """One explicit leapfrog step of the K-wave equation (periodic in space)."""
    _check_goo(goo)
    grid.check_cfl(goo, c)
    lap = (np.roll(u_now, -1) - 2.0 * u_now + np.roll(u_now, 1)) / grid.dx**2
    return 2.0 * u_now - u_prev + goo * c * c * grid.dt**2 * lap


def probe_residual(probe, goo, grid, c=1.0):
    """Max-norm of the operator applied to the sampled probe, per unit amplitude."""
    out = apply_k_dalembert(probe.sample(grid), goo, grid, c)
    return float(np.max(np.abs(out)) / abs(probe.amplitude))


def _symbol(omega, kx, goo, grid, c):
    """Signed discrete symbol, read off the stencil applied to ``exp(i(kx - wt))``."""
    patch = Grid1p1(3, 3, grid.dx, grid.dt, periodic=False)
    z = PlaneWaveProbe(omega, kx).sample(patch, complex_valued=True)
    return float((apply_k_dalembert(z, goo, patch, c)[0, 0] / z[1, 1]).real)


def null_dispersion_scan(goo, kxs, grid, c=1.0, classify_tol=None):
    """For each ``kx``, the frequency that zeroes the discrete operator.

    Phase velocities should approach ``c sqrt(goo)`` at second order in ``dx``.
    """
    _check_goo(goo)
    results = []
    for kx in kxs:
        w_cont = c * np.sqrt(goo) * abs(kx)
        nyq = np.pi / grid.dt
        hi = min(2.0 * w_cont, 0.999 * nyq)
        omega = brentq(_symbol, 0.0 + 1e-12 * w_cont, hi, args=(kx, goo, grid, c), xtol=1e-15, rtol=4 * np.finfo(float).eps)
        probe = PlaneWaveProbe(omega, kx)
        res = probe_residual(probe, goo, grid, c)
        scale = omega**2 / (goo * c * c) + kx**2
        tol = classify_tol if classify_tol is not None else 1e-8 * scale
        results.append(DispersionResult(probe, res, "null" if res <= tol else "off-shell", goo))
    return results


def phase_velocity_errors(results, c=1.0):
    return np.array([abs(r.phase_velocity - c * np.sqrt(r.goo)) for r in results])


def on_shell_energy(p, V, m, c=1.0):
    """Positive-frequency root of ``(E - V)^2 = c^2 p^2 + m^2 c^4``."""
    return V + np.sqrt(c * c * p * p + m * m * c**4)


def kg_dispersion_residual(probe, V, m, c=1.0, hbar=1.0):
    """``|(E - V)^2 - c^2 p^2 - m^2 c^4| / (E^2 + 1)`` for ``E = hbar w``, ``p = hbar k``.

    This is the Klein-Gordon operator applied to the plane wave in closed
    form (the Laplacian contributes ``-k^2``).  The mass term is ``m^2 c^4``.
    """
    E = hbar * probe.omega
    p = hbar * probe.kx
    return abs((E - V) ** 2 - c * c * p * p - m * m * c**4) / (E * E + 1.0)


def classify_kg(probe, V, m, c=1.0, hbar=1.0, tol=1e-12):
    r = kg_dispersion_residual(probe, V, m, c, hbar)
    if r > tol:
        return DispersionResult(probe, r, "off-shell")
    return DispersionResult(probe, r, "null" if m == 0 else "massive")


DISPERSION_HEADER = ["goo", "kx", "omega_best", "phase_velocity", "residual"]


def write_dispersion_csv(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DISPERSION_HEADER)
        for r in results:
            w.writerow([format(float(v), ".17g") for v in
                        (r.goo, r.probe.kx, r.probe.omega, r.phase_velocity, r.residual)])
