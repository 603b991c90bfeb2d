"""Metric, connection, torsion and nonmetricity of the K-manifold.

Coordinates are ``x^0 = c t`` followed by Cartesian ``x, y, z``.  The line
element is ``dS^2 = g_oo c^2 dt^2 - dx^2 - dy^2 - dz^2``; only ``g_oo`` varies.
Spatial indices are lowered with the Euclidean metric (``v_i = v^i``), the
convention under which the mass-shell condition ``dx_i dp^i = dx^0 dp^0``
holds.

Array layouts (leading axes broadcast over evaluation points):

* Christoffel / torsion / connection tables ``T[..., mu, omega, nu]`` hold
  ``T^mu_{omega nu}``.
* Nonmetricity ``Q[..., mu, nu, omega]`` holds ``Q_{mu nu omega}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NonFiniteError, SingularTorsionError

EPS = 1e-9
INDEX_NAMES = "oxyz"


def _zeros_like_t(x, t):
    x = np.asarray(x, dtype=float)
    return np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(t)))


@dataclass(frozen=True)
class KMetricField:
    """Scalar coefficient ``g_oo(x, t)`` with analytic derivatives.

    ``goo``, ``grad_goo`` and ``dgoo_dt`` take positions of shape ``(..., 3)``
    and times broadcastable to ``(...)``.  ``grad_goo`` returns ``(..., 3)``.
    """

    goo: Callable
    grad_goo: Callable
    dgoo_dt: Optional[Callable] = None
    c: float = 1.0
    eps: float = EPS
    label: str = ""

    @property
    def three_metric(self):
        return np.eye(3)

    @property
    def static(self):
        return self.dgoo_dt is None

    def value(self, x, t=0.0):
        return np.asarray(self.goo(np.asarray(x, dtype=float), t), dtype=float)

    def gradient(self, x, t=0.0):
        g = np.asarray(self.grad_goo(np.asarray(x, dtype=float), t), dtype=float)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("g_oo gradient is not finite")
        return g

    def time_derivative(self, x, t=0.0):
        if self.dgoo_dt is None:
            return _zeros_like_t(x, t)
        d = np.asarray(self.dgoo_dt(np.asarray(x, dtype=float), t), dtype=float)
        if not np.all(np.isfinite(d)):
            raise NonFiniteError("g_oo time derivative is not finite")
        return d

    def four_gradient(self, x, t=0.0):
        """``d_nu g_oo`` for nu = 0..3, with ``d_0 = (1/c) d_t``."""
        grad = self.gradient(x, t)
        dt = np.broadcast_to(self.time_derivative(x, t), grad.shape[:-1])
        return np.concatenate([(dt / self.c)[..., None], grad], axis=-1)

    def checked(self, x, t=0.0, error=DomainError):
        g = self.value(x, t)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("g_oo is not finite")
        bad = (g <= self.eps) | (g >= 1.0 - self.eps)
        if np.any(bad):
            raise error(
                f"g_oo outside ({self.eps:g}, 1 - {self.eps:g}): "
                f"min={g.min():.17g}, max={g.max():.17g}"
            )
        return g

    def metric4(self, x, t=0.0):
        g = self.value(x, t)
        out = np.zeros(g.shape + (4, 4))
        out[..., 0, 0] = g
        out[..., 1, 1] = out[..., 2, 2] = out[..., 3, 3] = -1.0
        return out

    def scaled(self, factor):
        """Same field multiplied by ``factor`` (used for fault injection)."""
        dt = None
        if self.dgoo_dt is not None:
            dt = lambda x, t: factor * self.dgoo_dt(x, t)
        return KMetricField(
            lambda x, t: factor * self.goo(x, t),
            lambda x, t: factor * self.grad_goo(x, t),
            dt, self.c, self.eps, f"{self.label}*{factor:g}",
        )


def constant_metric(value, c=1.0):
    return KMetricField(
        lambda x, t: np.full(np.broadcast_shapes(np.shape(x)[:-1], np.shape(t)), float(value)),
        lambda x, t: np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(t)) + (3,)),
        None, c, label=f"const({value:g})",
    )


def lower_index(metric, vector, x, t=0.0):
    """Lower a contravariant 4-vector with the four-metric."""
    return np.einsum("...mn,...n->...m", metric.metric4(x, t), vector)


def raise_index(metric, covector, x, t=0.0):
    inv = np.linalg.inv(metric.metric4(x, t))
    return np.einsum("...mn,...n->...m", inv, covector)


def christoffel_at(metric, x, t=0.0):
    """All Christoffel symbols ``{^mu_{omega nu}}`` of the four-metric.

    With only ``g_oo`` varying the non-zero entries are::

        {^o_oo} = d_0 g / 2g,   {^o_oi} = {^o_io} = d_i g / 2g,   {^i_oo} = d_i g / 2
    """
    g = metric.checked(x, t)
    dg = metric.four_gradient(x, t)
    out = np.zeros(g.shape + (4, 4, 4))
    out[..., 0, 0, :] = dg / (2.0 * g[..., None])
    out[..., 0, 1:, 0] = dg[..., 1:] / (2.0 * g[..., None])
    out[..., 1:, 0, 0] = dg[..., 1:] / 2.0
    return out


def torsion_choice(metric, x, t=0.0):
    """``S^o_{nu o} = d_nu ln((1 - g)/g) / 2`` for nu = 0..3."""
    g = metric.checked(x, t, error=SingularTorsionError)
    dg = metric.four_gradient(x, t)
    return -dg / (2.0 * (g * (1.0 - g))[..., None])


def _velocity_ratio(direction):
    u = np.asarray(direction, dtype=float)
    if np.any(u[..., 0] == 0.0):
        raise DomainError("direction has zero time component")
    return u[..., 1:] / u[..., :1]


def spatial_torsion(metric, x, t, direction):
    """``S^i_{nu o}`` along an isotropic direction ``u^mu``.

    Fixed by demanding that the geodesic equation reproduce the motion with
    acceleration ``c^2 grad(g)/2 + v d_t g / 2g`` (Newton's law for the
    energy-shell field in the static case).  Returns ``(..., 3, 4)``.
    """
    g = metric.checked(x, t, error=SingularTorsionError)
    dg = metric.four_gradient(x, t)
    beta = _velocity_ratio(direction)                    # v^i / c
    out = -beta[..., :, None] * dg[..., None, :] / (2.0 * (1.0 - g))[..., None, None]
    accel = dg[..., 1:] / 2.0 + beta * (dg[..., :1] / (2.0 * g[..., None]))   # a^i / c^2
    out[..., :, 0] -= accel + dg[..., 1:] / 2.0
    return out


def nonmetricity_at(metric, torsion_S, x, t=0.0):
    """Nonmetricity table: ``Q_ooo = 2 g S^o_oo``, ``Q_ioo = -d_i g``, rest zero.

    ``torsion_S`` is either a full ``(..., 4, 4, 4)`` torsion table or the
    ``(..., 4)`` vector of ``S^o_{nu o}`` components.
    """
    g = metric.checked(x, t)
    S = np.asarray(torsion_S, dtype=float)
    s_ooo = S[..., 0, 0, 0] if S.ndim == g.ndim + 3 else S[..., 0]
    out = np.zeros(g.shape + (4, 4, 4))
    out[..., 0, 0, 0] = 2.0 * g * s_ooo
    out[..., 1:, 0, 0] = -metric.gradient(x, t)
    return out


def raised_nonmetricity(metric, Q, x, t=0.0):
    """``Q^mu_{omega nu} = g^{mu gamma}(Q_{omega nu gamma} + Q_{nu gamma omega} - Q_{gamma omega nu})``."""
    ginv = np.linalg.inv(metric.metric4(x, t))
    comb = (
        np.einsum("...wng->...gwn", Q)
        + np.einsum("...ngw->...gwn", Q)
        - Q
    )
    return np.einsum("...mg,...gwn->...mwn", ginv, comb)


def torsion_time_component(metric, x, t, direction):
    """Contracted ``S^o_{oj} dx^j = -{^o_oj} dx^j - 2 S^o_oo dx^0``."""
    dx = np.asarray(direction, dtype=float)
    chris = christoffel_at(metric, x, t)
    s_oo = torsion_choice(metric, x, t)[..., 0]
    return -np.einsum("...j,...j->...", chris[..., 0, 0, 1:], dx[..., 1:]) - 2.0 * s_oo * dx[..., 0]


def torsion_mixed_components(metric, x, t, direction):
    """Contracted ``S^o_{ij} dx^j`` and ``S^i_{oj} dx^j`` (each ``(..., 3)``)."""
    dx = np.asarray(direction, dtype=float)
    chris = christoffel_at(metric, x, t)
    s_o_ij = (-np.einsum("...ij,...j->...i", chris[..., 0, 1:, 1:], dx[..., 1:])
              + chris[..., 0, 1:, 0] * dx[..., :1])
    s_i_oj = (-np.einsum("...ij,...j->...i", chris[..., 1:, 0, 1:], dx[..., 1:])
              + chris[..., 1:, 0, 0] * dx[..., :1])
    return s_o_ij, s_i_oj


def torsion_closure(metric, x, t, displacement, momentum):
    """Signed residual (left minus right) of the spatial-torsion closure relation.

    ``S^j_{nu o} dx^nu dx_j = ({^o_{nu o}} + S^o_{nu o}) dx^nu dx^o - {^j_{nu o}} dx^nu dx_j``
    with ``S^j_{nu o}`` built along ``momentum``.
    """
    dx = np.asarray(displacement, dtype=float)
    chris = christoffel_at(metric, x, t)
    s_o = torsion_choice(metric, x, t)
    s_i = spatial_torsion(metric, x, t, momentum)
    lhs = np.einsum("...jn,...n,...j->...", s_i, dx, dx[..., 1:])
    time_part = np.einsum("...n,...n->...", chris[..., 0, :, 0] + s_o, dx) * dx[..., 0]
    space_part = np.einsum("...jn,...n,...j->...", chris[..., 1:, :, 0], dx, dx[..., 1:])
    return lhs - (time_part - space_part)


@dataclass
class ConnectionSet:
    christoffel: np.ndarray
    torsion_S: np.ndarray
    nonmetricity_Q: np.ndarray
    gamma_k: np.ndarray
    point: tuple
    direction: Optional[np.ndarray] = None
    contracted: dict = field(default_factory=dict)

    def to_dict(self):
        """Flat JSON-compatible dump keyed like ``"Gamma^o_ox"`` (single point only)."""
        if self.christoffel.ndim != 3:
            raise ValueError("to_dict needs a connection evaluated at a single point")
        n = INDEX_NAMES
        out = {}
        for a in range(4):
            for b in range(4):
                for d in range(4):
                    up = f"^{n[a]}_{n[b]}{n[d]}"
                    out["Christoffel" + up] = float(self.christoffel[a, b, d])
                    out["S" + up] = float(self.torsion_S[a, b, d])
                    out["Gamma" + up] = float(self.gamma_k[a, b, d])
                    out[f"Q_{n[a]}{n[b]}{n[d]}"] = float(self.nonmetricity_Q[a, b, d])
        for key, val in self.contracted.items():
            out[key] = np.asarray(val).tolist()
        return out


def assemble_connection(metric, x, t=0.0, direction=None):
    """Christoffel symbols, torsion, nonmetricity and ``Gamma_k = {} + S``.

    Stored torsion entries are ``S^o_{nu o}`` (log-ratio choice) and, when an
    isotropic ``direction`` is supplied, ``S^i_{nu o}``.  The contracted
    identities for ``S^o_{oj}``, ``S^o_{ij}``, ``S^i_{oj}`` exist only along a
    displacement and are kept in ``contracted``; they are not split into
    components.  Every other torsion entry is zero.
    """
    x = np.asarray(x, dtype=float)
    chris = christoffel_at(metric, x, t)
    S = np.zeros_like(chris)
    S[..., 0, :, 0] = torsion_choice(metric, x, t)
    contracted = {}
    if direction is not None:
        direction = np.asarray(direction, dtype=float)
        S[..., 1:, :, 0] = spatial_torsion(metric, x, t, direction)
        s_o_ij, s_i_oj = torsion_mixed_components(metric, x, t, direction)
        contracted = {
            "S^o_oj dx^j": torsion_time_component(metric, x, t, direction),
            "S^o_ij dx^j": s_o_ij,
            "S^i_oj dx^j": s_i_oj,
        }
    Q = nonmetricity_at(metric, S, x, t)
    return ConnectionSet(chris, S, Q, chris + S, (x, t), direction, contracted)


def embedding_constraints(metric, x, t, direction):
    """Rows of the embedding conditions evaluated along ``direction``.

    Returns a dict with

    * ``"gamma_i_oj"``: ``2 Gamma^i_{oj} dx^j + Q^i_{o w} dx^w`` (``(..., 3)``)
    * ``"Q_i_jw"``: ``Q^i_{jw} dx^w`` (``(..., 3, 3)``)
    * ``"gamma_o_ij"``: ``2 Gamma^o_{ij} dx^j + Q^o_{i w} dx^w`` (``(..., 3)``)
    * ``"gamma_o_oj"``: ``2 Gamma^o_{oj} dx^j + Q^o_{o w} dx^w`` (``(...)``)

    The first three vanish identically with the contracted torsion identities.
    The last equals ``-2({^o_oj} dx^j + S^o_oo dx^0)`` with the literal
    ``S^o_{oj}`` identity and does not vanish for non-constant ``g_oo``.
    """
    dx = np.asarray(direction, dtype=float)
    conn = assemble_connection(metric, x, t, dx)
    chris = conn.christoffel
    Qup = raised_nonmetricity(metric, conn.nonmetricity_Q, x, t)
    s_o_ij, s_i_oj = conn.contracted["S^o_ij dx^j"], conn.contracted["S^i_oj dx^j"]
    s_o_oj = conn.contracted["S^o_oj dx^j"]
    gamma_i_oj = np.einsum("...ij,...j->...i", chris[..., 1:, 0, 1:], dx[..., 1:]) + s_i_oj
    gamma_o_ij = np.einsum("...ij,...j->...i", chris[..., 0, 1:, 1:], dx[..., 1:]) + s_o_ij
    gamma_o_oj = np.einsum("...j,...j->...", chris[..., 0, 0, 1:], dx[..., 1:]) + s_o_oj
    return {
        "gamma_i_oj": 2.0 * gamma_i_oj + np.einsum("...iw,...w->...i", Qup[..., 1:, 0, :], dx),
        "Q_i_jw": np.einsum("...ijw,...w->...ij", Qup[..., 1:, 1:, :], dx),
        "gamma_o_ij": 2.0 * gamma_o_ij + np.einsum("...iw,...w->...i", Qup[..., 0, 1:, :], dx),
        "gamma_o_oj": 2.0 * gamma_o_oj + np.einsum("...w,...w->...", Qup[..., 0, 0, :], dx),
    }
