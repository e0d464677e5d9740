"""Standalone pre-build script: distance measures between |0> and |+>.

Computes T(|0><0|, |+><+|) and F(|0><0|, |+><+|) from first principles
(explicit 2x2 eigendecomposition, no package imports) so the values can be
frozen into the test suite as independent constants.

Run:  python3 oracles/distance_constants.py
"""

import math


def eig2(a, b, c, d):
    """Eigenvalues of the real symmetric 2x2 matrix [[a, b], [c, d]]."""
    tr = a + d
    det = a * d - b * c
    disc = math.sqrt(tr * tr - 4.0 * det)
    return (tr + disc) / 2.0, (tr - disc) / 2.0


def main():
    # rho = |0><0| = [[1,0],[0,0]],  sigma = |+><+| = [[.5,.5],[.5,.5]]
    # diff = rho - sigma
    lam1, lam2 = eig2(0.5, -0.5, -0.5, -0.5)
    tdist = 0.5 * (abs(lam1) + abs(lam2))
    print("eigenvalues of rho - sigma:", lam1, lam2)
    print("T(|0>,|+>) =", repr(tdist))
    print("sqrt(2)/2  =", repr(math.sqrt(2.0) / 2.0))

    # For pure states fidelity is |<0|+>| = 1/sqrt(2); cross-check via the
    # general formula Tr|sqrt(rho) sqrt(sigma)|: sqrt of a rank-1 projector is
    # itself, so Tr|rho sigma| = sum of singular values of rho @ sigma.
    # rho @ sigma = [[.5,.5],[0,0]] ; singular value = sqrt(.25+.25)
    sv = math.sqrt(0.25 + 0.25)
    print("F(|0>,|+>) =", repr(sv))


if __name__ == "__main__":
    main()
