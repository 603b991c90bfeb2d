"""Build the K-field connection at one point and compare it with finite differences.

The field is g_oo = 1 - x^2 at x = 0.5, where g_oo = 0.75 and d_x g_oo = -1.
"""
import numpy as np

from kfield.geometry import KMetricField, assemble_connection, embedding_constraints
from kfield.oracle import fd_christoffel


def main():
    metric = KMetricField(
        lambda x, t: 1.0 - x[..., 0] ** 2,
        lambda x, t: np.stack([-2 * x[..., 0], 0 * x[..., 0], 0 * x[..., 0]], -1),
    )
    point = np.array([0.5, 0.0, 0.0])
    v = np.sqrt(0.75)
    direction = np.array([1.0, v, 0.0, 0.0])     # isotropic: |v|^2 = g_oo c^2

    conn = assemble_connection(metric, point, 0.0, direction)
    table = conn.to_dict()
    print("non-zero components:")
    for key, val in table.items():
        if isinstance(val, float) and val != 0.0:
            print(f"  {key:22s} {val:+.12f}")

    gap = np.max(np.abs(conn.christoffel - fd_christoffel(metric, point)))
    print(f"\nmax |analytic - finite difference| over all Christoffels: {gap:.2e}")

    rows = embedding_constraints(metric, point, 0.0, direction)
    print("\nembedding rows along the isotropic direction:")
    for key, val in rows.items():
        print(f"  {key:10s} max |.| = {np.max(np.abs(val)):.3e}")
    print("(the time row keeps -2({^o_oj} dx^j + S^o_oo dx^0) and is expected to be non-zero)")


if __name__ == "__main__":
    main()
