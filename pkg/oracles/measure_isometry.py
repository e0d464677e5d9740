"""Standalone pre-build script: deferred-measurement isometry for one wire.

Hand-expands the 4x2 isometry that replaces a single computational-basis
measurement on a 1-qubit circuit: the wire is copied onto a fresh environment
wire, so |b> on the data wire maps to |b>|b> on (data, env).

Run:  python3 oracles/measure_isometry.py
"""


def main():
    # Basis order on the output: |data env> = |00>, |01>, |10>, |11>.
    # Column b of the isometry is the image of |b>.
    iso = [[0.0, 0.0] for _ in range(4)]
    for b in (0, 1):
        iso[b * 2 + b][b] = 1.0  # |b> -> |b>|b>
    for row in iso:
        print(row)
    # Columns must be orthonormal: V^T V = I.
    for i in (0, 1):
        for j in (0, 1):
            dot = sum(iso[r][i] * iso[r][j] for r in range(4))
            print("col", i, "· col", j, "=", dot)


if __name__ == "__main__":
    main()
