"""Standalone pre-build script: dyadic acceptance target for completeness repair.

Scans all dyadic rationals with denominator up to 2^10 and reports the one
with the smallest denominator inside [(3c+s)/4, c] (ties toward smaller
value), for the headline parameters c = 2/3, s = 1/3.

Run:  python3 oracles/alpha_scan.py
"""

from fractions import Fraction


def smallest_dyadic(lo, hi, max_den=1 << 10):
    d = 1
    while d <= max_den:
        hits = [Fraction(n, d) for n in range(0, d + 1)
                if lo <= Fraction(n, d) <= hi]
        if hits:
            return min(hits)
        d *= 2
    return None


def main():
    c, s = Fraction(2, 3), Fraction(1, 3)
    lo = (3 * c + s) / 4
    print("interval:", lo, "..", c)
    alpha = smallest_dyadic(lo, c)
    print("alpha =", alpha)
    assert alpha == Fraction(5, 8)


if __name__ == "__main__":
    main()
