"""Ancilla extensions and Boolean oracles.

Any special extension V of U (one that returns the ancillas to |0>) can be
wrapped in a four-gate circuit whose unitary does not depend on which V
was used.  This script builds two different special extensions of a
random two-qubit unitary, checks that both circuits agree with the
canonical extension, and prints the oracle pair for the AND function.

    python demos/ancilla_extension.py
"""

import numpy as np

from qcgeom.deform import haar_unitary
from qcgeom.extension import boolean_unitaries, canonical_extension, extension_circuit, special_extension_check


def main():
    n, m = 2, 2
    U = haar_unitary(n, 3)

    V1 = np.kron(U, np.eye(2**m))
    # a second special extension: scramble the ancilla states orthogonal to |0>
    rng = np.random.default_rng(4)
    Z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    Q, _ = np.linalg.qr(Z)
    W = np.eye(2**m, dtype=complex)
    W[1:, 1:] = Q
    V2 = np.kron(np.eye(2**n), W) @ V1

    for name, V in (("U x I", V1), ("scrambled", V2)):
        ext, special, _ = special_extension_check(V, U)
        print(f"{name:>10}: extension {ext}, special {special}")

    Um = canonical_extension(U, m)
    d1 = np.abs(extension_circuit(V1, n, m) - Um).max()
    d2 = np.abs(extension_circuit(V2, n, m) - Um).max()
    print(f"circuit vs canonical extension: {d1:.1e}, {d2:.1e}")
    print(f"canonical extension is special: {special_extension_check(Um, U)[:2]}")

    Uf, Vf = boolean_unitaries("0001")
    print("\nAND oracle U_f (columns are inputs |x1 x2 z>):")
    print("  " + " ".join(str(int(np.argmax(Uf[:, k]))) for k in range(8)))
    print(f"phase oracle V_f diagonal: {np.diag(Vf).astype(int).tolist()}")


if __name__ == "__main__":
    main()
