"""Null plane waves of the discrete d'Alembertian on constant backgrounds.

Waves on a background g_oo travel at c sqrt(g_oo), the speed a particle has
on the same isotropic surface.  The discrete error shrinks fourfold per grid
halving.
"""
import numpy as np

from kfield.waves import Grid1p1, PlaneWaveProbe, kg_dispersion_residual, null_dispersion_scan, on_shell_energy


def main():
    for goo in (0.04, 0.25, 0.81):
        errs = []
        for nx in (64, 128, 256):
            grid = Grid1p1.periodic_box(2 * np.pi, nx, 3, 0.5, goo)
            r = null_dispersion_scan(goo, [3.0], grid)[0]
            errs.append(abs(r.phase_velocity - np.sqrt(goo)))
        print(f"g_oo={goo:4.2f}  target {np.sqrt(goo):.3f}  errors " + " ".join(f"{e:.2e}" for e in errs)
              + f"  ratios {errs[0] / errs[1]:.2f} {errs[1] / errs[2]:.2f}")

    m, V, p = 1.0, 0.2, 0.3
    E = on_shell_energy(p, V, m)
    print(f"\nmassive on-shell energy for m={m}, V={V}, p={p}: E = {E:.12f}")
    print(f"Klein-Gordon residual there: {kg_dispersion_residual(PlaneWaveProbe(E, p), V, m):.1e}")


if __name__ == "__main__":
    main()
