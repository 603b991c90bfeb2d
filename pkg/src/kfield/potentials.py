"""Test-particle potentials with analytic gradients and Hessians.

All callables accept positions of shape ``(..., 3)`` and a time argument
(ignored: every bundled potential is static).
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class Particle:
    m: float = 1.0
    e: float = 0.0  # carried for bookkeeping; no electromagnetic coupling

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"particle mass must be positive, got {self.m}")


@dataclass(frozen=True)
class Potential:
    kind: str
    V: Callable
    grad_V: Callable
    hess_V: Callable
    params: dict = field(default_factory=dict)
    v_min: Optional[float] = None  # global minimum of V, None if unbounded below
    ndim: int = 3                  # 1 for potentials depending on x only

    def force(self, x, t=0.0):
        return -self.grad_V(np.asarray(x, dtype=float), t)


def _shape(x):
    return np.shape(x)[:-1]


def free():
    return Potential(
        "free",
        lambda x, t=0.0: np.zeros(_shape(x)),
        lambda x, t=0.0: np.zeros(np.shape(x)),
        lambda x, t=0.0: np.zeros(_shape(x) + (3, 3)),
        {}, v_min=0.0,
    )


def harmonic(k, center=(0.0, 0.0, 0.0)):
    """``V = k |x - x0|^2 / 2``; ``k < 0`` gives the inverted oscillator."""
    x0 = np.asarray(center, dtype=float)
    return Potential(
        "harmonic",
        lambda x, t=0.0: 0.5 * k * np.sum((x - x0) ** 2, axis=-1),
        lambda x, t=0.0: k * (x - x0),
        lambda x, t=0.0: np.broadcast_to(k * np.eye(3), _shape(x) + (3, 3)).copy(),
        {"k": k, "center": list(x0)},
        v_min=0.0 if k >= 0 else None,
    )


def coulomb(alpha, center=(0.0, 0.0, 0.0)):
    """``V = -alpha / |x - x0|`` (attractive for ``alpha > 0``)."""
    x0 = np.asarray(center, dtype=float)

    def grad(x, t=0.0):
        d = x - x0
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        return alpha * d / r**3

    def hess(x, t=0.0):
        d = x - x0
        r = np.linalg.norm(d, axis=-1)[..., None, None]
        return alpha * (np.eye(3) / r**3 - 3.0 * d[..., :, None] * d[..., None, :] / r**5)

    return Potential(
        "coulomb",
        lambda x, t=0.0: -alpha / np.linalg.norm(x - x0, axis=-1),
        grad, hess, {"alpha": alpha, "center": list(x0)},
        v_min=None if alpha > 0 else 0.0,
    )


def uniform_field(F):
    """Constant force ``F``: ``V = -F . x``."""
    F = np.asarray(F, dtype=float)
    return Potential(
        "uniform-field",
        lambda x, t=0.0: -np.asarray(x) @ F,
        lambda x, t=0.0: np.broadcast_to(-F, np.shape(x)).copy(),
        lambda x, t=0.0: np.zeros(_shape(x) + (3, 3)),
        {"F": list(F)},
        v_min=None if np.any(F) else 0.0,
    )


def double_well(scale=1.0):
    """``V = scale (x^2 - 1)^2`` along the x axis; barrier top ``V(0) = scale``."""
    def V(x, t=0.0):
        return scale * (np.asarray(x)[..., 0] ** 2 - 1.0) ** 2

    def grad(x, t=0.0):
        x = np.asarray(x)
        out = np.zeros(np.shape(x))
        out[..., 0] = 4.0 * scale * x[..., 0] * (x[..., 0] ** 2 - 1.0)
        return out

    def hess(x, t=0.0):
        x = np.asarray(x)
        out = np.zeros(_shape(x) + (3, 3))
        out[..., 0, 0] = scale * (12.0 * x[..., 0] ** 2 - 4.0)
        return out

    return Potential("double-well", V, grad, hess, {"scale": scale}, v_min=0.0, ndim=1)


def user_table(xs, values):
    """Tabulated ``V(x)`` along the x axis, interpolated by a natural cubic spline."""
    spline = CubicSpline(np.asarray(xs, dtype=float), np.asarray(values, dtype=float),
                         bc_type="natural")
    d1, d2 = spline.derivative(1), spline.derivative(2)

    def grad(x, t=0.0):
        x = np.asarray(x)
        out = np.zeros(np.shape(x))
        out[..., 0] = d1(x[..., 0])
        return out

    def hess(x, t=0.0):
        x = np.asarray(x)
        out = np.zeros(_shape(x) + (3, 3))
        out[..., 0, 0] = d2(x[..., 0])
        return out

    return Potential(
        "user-table", lambda x, t=0.0: spline(np.asarray(x)[..., 0]), grad, hess,
        {"x": list(map(float, xs)), "V": list(map(float, values))},
        v_min=float(np.min(values)), ndim=1,
    )


KINDS = {
    "free": (free, []),
    "harmonic": (harmonic, ["k"]),
    "coulomb": (coulomb, ["alpha"]),
    "uniform-field": (uniform_field, ["F"]),
    "double-well": (double_well, []),
    "user-table": (user_table, ["x", "V"]),
}

OPTIONAL = {
    "harmonic": ["center"],
    "coulomb": ["center"],
    "double-well": ["scale"],
}


def make_potential(kind, params=None):
    params = dict(params or {})
    try:
        factory, required = KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown potential kind {kind!r}") from None
    missing = [k for k in required if k not in params]
    if missing:
        raise KeyError(missing[0])
    if kind == "user-table":
        return user_table(params["x"], params["V"])
    return factory(**params)
