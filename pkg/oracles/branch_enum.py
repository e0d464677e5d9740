"""Standalone pre-build script: two-branch acceptance decomposition by hand.

A 2-turn verifier on one message qubit and one private qubit:
  V1: put the private qubit into |+> (Hadamard), then measure it (pinching).
  V2: accept iff the private qubit is |1>, with a twist — if the measured
      outcome was 1 the verifier also requires the message qubit to be |1>.
Realized here concretely: acceptance projector on (M, W) applied per branch.

The prover controls M and sends |1>.  Hand enumeration:
  branch u=0 (prob 1/2): W collapsed to |0>, acceptance 0.
  branch u=1 (prob 1/2): W collapsed to |1>, M=|1> -> acceptance 1.
Total acceptance = 0*1/2 + 1*1/2 = 1/2.

This freezes the expected branch map {"0": (0.5, 0.0), "1": (0.5, 1.0)}.

Run:  python3 oracles/branch_enum.py
"""

import math


def main():
    inv = 1.0 / math.sqrt(2.0)
    # state of W after V1 before pinching: inv|0> + inv|1>
    branches = {"0": inv * inv, "1": inv * inv}
    accept = {"0": 0.0, "1": 1.0}  # prover sends M=|1>
    total = sum(branches[u] * accept[u] for u in branches)
    print("branches:", branches)
    print("conditional acceptance:", accept)
    print("total acceptance:", total)
    assert abs(total - 0.5) < 1e-15


if __name__ == "__main__":
    main()
