"""Finite-difference oracles for the analytic geometry.

These routines only ever call ``metric.goo`` (never the analytic gradients)
and use the general Christoffel formula on the full 4x4 metric, so they are
independent of the closed forms in :mod:`kfield.geometry`.
"""
import numpy as np


def fd_step(coord):
    return 1e-5 * (1.0 + np.abs(coord))


def _shift(x, t, c, nu, delta):
    x = np.array(x, dtype=float, copy=True)
    t = np.asarray(t, dtype=float)
    if nu == 0:
        return x, t + delta / c
    x[..., nu - 1] += delta
    return x, t


def fd_partial(f, x, t, c, nu):
    """Central difference ``d_nu f`` with ``x^0 = c t``."""
    x = np.asarray(x, dtype=float)
    coord = c * np.asarray(t, dtype=float) if nu == 0 else x[..., nu - 1]
    h = fd_step(coord)
    xp, tp = _shift(x, t, c, nu, h)
    xm, tm = _shift(x, t, c, nu, -h)
    diff = np.asarray(f(xp, tp) - f(xm, tm))
    h = np.asarray(h)
    return diff / (2.0 * h.reshape(h.shape + (1,) * (diff.ndim - h.ndim)))


def metric4_fn(metric):
    def g4(x, t):
        g = np.asarray(metric.goo(x, t), dtype=float)
        out = np.zeros(g.shape + (4, 4))
        out[..., 0, 0] = g
        for i in range(1, 4):
            out[..., i, i] = -1.0
        return out
    return g4


def fd_christoffel(metric, x, t=0.0):
    """``{^mu_{omega nu}} = g^{mu l}(d_w g_{l n} + d_n g_{l w} - d_l g_{w n}) / 2``."""
    g4 = metric4_fn(metric)
    dg = np.stack([fd_partial(g4, x, t, metric.c, lam) for lam in range(4)], axis=-3)
    # dg[..., lam, a, b] = d_lam g_ab
    ginv = np.linalg.inv(g4(np.asarray(x, dtype=float), t))
    lower = (np.einsum("...wln->...lwn", dg)
             + np.einsum("...nlw->...lwn", dg)
             - dg)
    return 0.5 * np.einsum("...ml,...lwn->...mwn", ginv, lower)


def fd_torsion_choice(metric, x, t=0.0):
    """Half the finite-difference gradient of ``ln((1 - g)/g)``."""
    def logratio(xx, tt):
        g = np.asarray(metric.goo(xx, tt), dtype=float)
        return np.log((1.0 - g) / g)
    return 0.5 * np.stack([fd_partial(logratio, x, t, metric.c, nu) for nu in range(4)], axis=-1)


def fd_nonmetricity(metric, x, t=0.0):
    g = np.asarray(metric.goo(np.asarray(x, dtype=float), t), dtype=float)
    s_oo = fd_torsion_choice(metric, x, t)[..., 0]
    out = np.zeros(g.shape + (4, 4, 4))
    out[..., 0, 0, 0] = 2.0 * g * s_oo
    for i in range(1, 4):
        out[..., i, 0, 0] = -fd_partial(metric.goo, x, t, metric.c, i)
    return out


def fd_gradient(f, x, t=0.0):
    return np.stack([fd_partial(f, x, t, 1.0, i) for i in range(1, 4)], axis=-1)
