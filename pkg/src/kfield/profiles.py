"""Seeded random smooth g_oo profiles for oracle and property checks."""
import numpy as np

from .geometry import KMetricField


def sine_profile(base, amps, wavevectors, freqs, phases, c=1.0, static=False):
    """``g(x, t) = base + sum_k a_k sin(q_k . x + w_k t + phi_k)`` with exact derivatives."""
    amps = np.asarray(amps, dtype=float)
    q = np.asarray(wavevectors, dtype=float).reshape(len(amps), 3)
    w = np.zeros(len(amps)) if static else np.asarray(freqs, dtype=float)
    phi = np.asarray(phases, dtype=float)

    def arg(x, t):
        x = np.asarray(x, dtype=float)
        return x @ q.T + np.asarray(t, dtype=float)[..., None] * w + phi

    def goo(x, t):
        return base + np.sin(arg(x, t)) @ amps

    def grad(x, t):
        return (np.cos(arg(x, t)) * amps) @ q

    def dt(x, t):
        return np.cos(arg(x, t)) @ (amps * w)

    return KMetricField(goo, grad, None if static else dt, c, label="sine-profile")


def random_profile(rng, n_modes=3, static=False, c=1.0):
    """Smooth profile with values confined to ``[0.1, 0.9]``."""
    base = rng.uniform(0.35, 0.65)
    room = min(base - 0.1, 0.9 - base)
    raw = rng.uniform(0.2, 1.0, n_modes)
    amps = raw / raw.sum() * room * rng.uniform(0.3, 1.0)
    amps *= rng.choice([-1.0, 1.0], n_modes)
    q = rng.normal(0.0, 1.5, (n_modes, 3))
    freqs = rng.normal(0.0, 1.5, n_modes)
    phases = rng.uniform(0.0, 2 * np.pi, n_modes)
    return sine_profile(base, amps, q, freqs, phases, c=c, static=static)
