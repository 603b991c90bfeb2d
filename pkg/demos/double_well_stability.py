"""Lyapunov scan of the double well V = (x^2 - 1)^2.

Energies far from the barrier top give exponents at the finite-horizon floor;
the separatrix at E = 1 stands out.
"""
from kfield.potentials import Particle, double_well
from kfield.stability import stationary_scan


def main():
    energies = [0.25, 0.5, 0.75, 0.9, 0.99, 1.0, 1.01, 1.1, 1.5, 2.0]
    scan = stationary_scan(Particle(1.0), double_well(), energies, horizon=1e3, c=10.0)
    for E, lam, cls in zip(scan.energies, scan.lambda_raw, scan.classification):
        bar = "#" * int(round(lam * 2000))
        print(f"E={E:5.2f}  lambda={lam:.4f}  {cls:8s} {bar}")
    print(f"unstable band: {scan.unstable_band()}")


if __name__ == "__main__":
    main()
