"""Curvature of the standard metric as the penalty grows.

Penalizing many-body directions bends the unitary group: the Ricci
entries of easy two-body words turn strongly negative, hard words
become strongly positive, and the scalar curvature goes negative once
n >= 3 and q is large.  A few steps of the normalized Ricci flow show the
weights drifting back toward the bi-invariant metric.

    python demos/curvature_tour.py
"""

from qcgeom.curvature import (
    average_sectional_curvature,
    ricci_by_weight,
    ricci_flow_step,
    scalar_curvature,
    standard_weight_penalties,
)
from qcgeom.metric import PenaltyMetric


def main():
    print("scalar curvature R(n, q = 4^n): closed form / contraction")
    for n in (1, 2, 3, 4, 5):
        q = 4.0**n
        print(f"  n = {n}: {scalar_curvature(n, q):14.6g} {scalar_curvature(n, q, 'contraction'):14.6g}")

    n, q = 3, 64.0
    rc = ricci_by_weight(standard_weight_penalties(n, q), n)
    print(f"\nRicci entries by word weight at n = {n}, q = {q:g}")
    for w in range(1, n + 1):
        print(f"  weight {w}: {rc[w]:12.4f}")

    w = standard_weight_penalties(n, q)[1:]
    print("\nnormalized Ricci flow of the weight penalties (ds = 1e-5)")
    for k in range(6):
        print(f"  step {k * 10:3d}: " + "  ".join(f"{x:9.4f}" for x in w))
        for _ in range(10):
            w = ricci_flow_step(w, n, 1e-5)

    # the plane average of K equals R / (m (m - 1)), m = 4**n - 1
    m = PenaltyMetric.standard(2, 1.0)
    mc = average_sectional_curvature(m, samples=20_000, seed=1)
    R = scalar_curvature(2, 1.0)
    print(f"\nn = 2, q = 1: mean sectional curvature {mc.mean:.5f} +- {mc.stderr:.5f}, R / (15 * 14) = {R / 210:.5f}")


if __name__ == "__main__":
    main()
