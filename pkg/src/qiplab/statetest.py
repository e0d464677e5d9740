"""State distinguishability toolchain.

Individual-product state distinguishability instances (tuples of small
prepared states judged pairwise far or close), exact trace-distance
decisions, and the reduction that turns a sound verifier plus a claimed
zero-knowledge simulator into such an instance: consecutive simulated
snapshots, pushed through one verifier action, must agree on the private
register — or their accumulated drift lower-bounds the product distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import circuits, linalg
from .circuits import (CircuitAction, ProverStrategy, VerifierSpec,
                       apply_isometry_vec, apply_unitary_vec, gate_raw,
                       gate_to_json, gate_from_json)
from .errors import ArgumentError, ValidationError

PROMISE_FLOOR = 1e-3


# ---------------------------------------------------------------------------
# State preparation circuits
# ---------------------------------------------------------------------------

@dataclass
class StatePrepCircuit:
    """Unitary circuit run on |0...0> with a designated output wire set;
    non-output wires are traced out."""

    circuit: CircuitAction
    output_qubits: tuple

    def __post_init__(self):
        if self.circuit.kind != "unitary":
            raise ValidationError("state preparation must be unitary")
        self.output_qubits = tuple(sorted(set(self.output_qubits)))
        if not self.output_qubits:
            raise ValidationError("output set must be non-empty")
        n = self.circuit.in_qubits
        if any(not 0 <= w < n for w in self.output_qubits):
            raise ValidationError(f"output wires must lie in [0, {n})")

    @property
    def output_count(self) -> int:
        return len(self.output_qubits)


def prepare_state(c: StatePrepCircuit) -> linalg.DensityMatrix:
    """Run the circuit on |0...0> and trace out the non-output wires."""
    n = c.circuit.in_qubits
    vec = np.zeros(2 ** n, dtype=complex)
    vec[0] = 1.0
    for g in c.circuit.gates:
        vec = apply_unitary_vec(vec, n, g.unitary(), g.wires)
    rho = np.outer(vec, vec.conj())
    out = linalg.partial_trace_mat(rho, [2] * n, list(c.output_qubits))
    return linalg.DensityMatrix(out, qubit_dims=[c.output_count])


def state_prep_from_vector(vec, n: int,
                           output_qubits=None) -> StatePrepCircuit:
    """Preparation circuit for an explicit pure state on n <= 3 wires: the
    vector is completed to a unitary whose first column is the state."""
    v = np.asarray(vec, dtype=complex).ravel()
    if v.size != 2 ** n:
        raise ArgumentError(f"vector length {v.size} != 2^{n}")
    if n > 3:
        raise ArgumentError("dense preparation is limited to 3 wires")
    v = v / np.linalg.norm(v)
    basis = np.eye(2 ** n, dtype=complex)
    basis[:, 0] = v
    q, _ = np.linalg.qr(basis)
    q *= (q[:, 0].conj() @ v) / abs(q[:, 0].conj() @ v)
    action = CircuitAction("unitary", n, [gate_raw(q, *range(n))])
    return StatePrepCircuit(
        action, tuple(range(n)) if output_qubits is None else output_qubits)


# ---------------------------------------------------------------------------
# Instances and decisions
# ---------------------------------------------------------------------------

@dataclass
class IndivProdInstance:
    """k pairs of preparation circuits with far/close thresholds.

    Yes-promise: some pair is at trace distance >= alpha/k; no-promise: every
    pair is within delta.  The gap alpha - delta*k must clear the promise
    floor so the two conditions are mutually exclusive.
    """

    k: int
    pairs: list
    alpha: float
    delta: float
    promise_floor: float = PROMISE_FLOOR
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k != len(self.pairs):
            raise ValidationError(
                f"k={self.k} but {len(self.pairs)} pairs given")
        if self.alpha - self.delta * self.k < self.promise_floor:
            raise ValidationError(
                f"alpha - delta*k = {self.alpha - self.delta * self.k:.3e} "
                f"below promise floor {self.promise_floor:.3e}")
        for i, (q, qp) in enumerate(self.pairs):
            if q.output_count != qp.output_count:
                raise ValidationError(
                    f"pair {i}: output sizes {q.output_count} != "
                    f"{qp.output_count}")


@dataclass
class Decision:
    verdict: str              # "yes" | "no" | "promise-violation"
    distances: list
    witness_index: int | None
    report: str


def pair_distances(inst: IndivProdInstance) -> list:
    return [linalg.trace_distance(prepare_state(q), prepare_state(qp))
            for q, qp in inst.pairs]


def decide_indivprod(inst: IndivProdInstance) -> Decision:
    """Exact-distance verdict: yes if some pair reaches alpha/k, no if every
    pair stays within delta, promise-violation otherwise (with the full
    per-index distance report)."""
    ds = pair_distances(inst)
    thr = inst.alpha / inst.k
    for j, d in enumerate(ds):
        if d >= thr:
            return Decision("yes", ds, j,
                            f"pair {j}: distance {d:.6f} >= alpha/k "
                            f"= {thr:.6f}")
    if all(d <= inst.delta for d in ds):
        return Decision("no", ds, None,
                        f"all {inst.k} distances <= delta = {inst.delta}")
    bad = max(range(inst.k), key=lambda j: ds[j])
    return Decision("promise-violation", ds, bad,
                    f"pair {bad}: distance {ds[bad]:.6f} lies strictly "
                    f"between delta = {inst.delta} and alpha/k = {thr:.6f}")


def product_distance_bounds(inst: IndivProdInstance,
                            dim_cap: int = linalg.DEFAULT_DIM_CAP):
    """(lower, upper, exact) for the distance between the full product
    states: max_j T_j <= T(⊗σ_j, ⊗σ'_j) <= Σ_j T_j, with the exact middle
    value computed when the product dimension fits the cap."""
    ds = pair_distances(inst)
    lower = max(ds) if ds else 0.0
    upper = float(sum(ds))
    total_dim = 1
    for q, _ in inst.pairs:
        total_dim *= 2 ** q.output_count
    exact = None
    if total_dim <= dim_cap:
        left = linalg.tensor_all(
            [prepare_state(q).mat for q, _ in inst.pairs], dim_cap=dim_cap)
        right = linalg.tensor_all(
            [prepare_state(qp).mat for _, qp in inst.pairs],
            dim_cap=dim_cap)
        exact = linalg.trace_distance(left, right)
    return lower, upper, exact


# ---------------------------------------------------------------------------
# Hardness-instance construction
# ---------------------------------------------------------------------------

def _compose_with_action(prep: StatePrepCircuit, action: CircuitAction,
                         outputs) -> StatePrepCircuit:
    """Append a verifier action's gates (acting on the circuit's leading
    wires) to a preparation circuit."""
    n = prep.circuit.in_qubits
    if action.in_qubits > n:
        raise ArgumentError(
            f"simulator circuit has {n} wires but the verifier action "
            f"needs {action.in_qubits}")
    gates = list(prep.circuit.gates) + list(action.gates)
    return StatePrepCircuit(CircuitAction("unitary", n, gates), outputs)


def build_hardness_instance(verifier: VerifierSpec, simulators,
                            c: float, s: float,
                            sim_error: float = 1e-4) -> IndivProdInstance:
    """Reduce (sound verifier, claimed simulator) to a product-state
    distinguishability instance.

    ``simulators`` lists l+1 preparation circuits for the claimed snapshots
    on (M, W) before the first verifier action and after each prover reply.
    Pair j compares the private-register marginal of the j-th claimed
    snapshot pushed through verifier action j against the next claimed
    snapshot; honest data makes every pair identical, while a simulator
    whose final snapshot accepts with probability c against a verifier of
    value at most s must drift by alpha in product distance.
    """
    if verifier.kind != "unitary":
        raise ArgumentError("hardness construction needs a unitary verifier")
    from . import sdp as sdp_mod
    verifier = sdp_mod.normalize_turn_parity(verifier)
    l = verifier.rounds
    if l < 2:
        raise ArgumentError(
            f"need at least 2 rounds for a meaningful chain, got {l}")
    if len(simulators) != l + 1:
        raise ArgumentError(
            f"need {l + 1} simulator circuits, got {len(simulators)}")
    if not 0 <= s < c <= 1:
        raise ArgumentError("need 0 <= s < c <= 1")
    n = verifier.q_M + verifier.q_W
    w_wires = tuple(range(verifier.q_M, n))
    m_turns = verifier.turns
    alpha = (math.sqrt(c) - math.sqrt(s)) ** 2 / (2 * m_turns - 4)
    delta = 2 * sim_error

    pairs = []
    for j in range(1, l + 1):
        xi_j = _compose_with_action(simulators[j - 1], verifier.actions[j - 1],
                                    w_wires)
        xi_p = StatePrepCircuit(simulators[j].circuit, w_wires)
        pairs.append((xi_j, xi_p))

    # The construction assumes the claimed final snapshot accepts with
    # probability c; report any deviation instead of normalizing.
    final = _compose_with_action(simulators[l], verifier.actions[l],
                                 (verifier.output_qubit,))
    acc = float(np.real(prepare_state(final).mat[1, 1]))
    meta = {"claimed_acceptance": acc, "acceptance_target": c,
            "acceptance_deviation": abs(acc - c), "c": c, "s": s,
            "rounds": l, "turns": m_turns}
    return IndivProdInstance(l, pairs, alpha, delta, meta=meta)


def check_simulator_consistency(verifier: VerifierSpec, simulators,
                                prover: ProverStrategy) -> list:
    """Trace distances between each claimed snapshot and the true view.

    Entry 0 compares against the initial (M, W) state; entry j >= 1 against
    the reduced state on (M, W) after the prover's j-th reply under the
    given strategy.
    """
    from . import sdp as sdp_mod
    verifier = sdp_mod.normalize_turn_parity(verifier)
    if verifier.kind == "almost-unitary":
        verifier = circuits.isometric_lift(verifier)
    l = verifier.rounds
    if len(simulators) != l + 1:
        raise ArgumentError(
            f"need {l + 1} simulator circuits, got {len(simulators)}")
    n = verifier.q_M + verifier.q_W
    q_Q = prover.q_Q
    prover.qubits(verifier.q_M)
    if len(prover.actions) < l:
        raise ArgumentError(f"prover supplies {len(prover.actions)} actions "
                            f"for {l} rounds")

    vec = np.zeros(2 ** (q_Q + n), dtype=complex)
    vec[0] = 1.0
    total = q_Q + n
    mw = list(range(q_Q, q_Q + n))

    def view(v, wires_now):
        rho = np.outer(v, v.conj())
        return linalg.partial_trace_mat(rho, [2] * wires_now, mw)

    out = [linalg.trace_distance(prepare_state(simulators[0]).mat,
                                 view(vec, total))]
    for j in range(l):
        iso = circuits.to_isometry(verifier.actions[j])
        vec = apply_isometry_vec(vec, total, iso, mw)
        total = int(round(math.log2(vec.size)))
        vec = apply_unitary_vec(vec, total, prover.actions[j],
                                list(range(q_Q + verifier.q_M)))
        out.append(linalg.trace_distance(
            prepare_state(simulators[j + 1]).mat, view(vec, total)))
    return out


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------

def prep_to_json(c: StatePrepCircuit) -> dict:
    return {"in_qubits": c.circuit.in_qubits,
            "gates": [gate_to_json(g) for g in c.circuit.gates],
            "output_qubits": list(c.output_qubits)}


def prep_from_json(d: dict) -> StatePrepCircuit:
    try:
        action = CircuitAction("unitary", int(d["in_qubits"]),
                               [gate_from_json(g) for g in d["gates"]])
        return StatePrepCircuit(action, tuple(d["output_qubits"]))
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"malformed preparation JSON: {exc}") from exc


def instance_to_json(inst: IndivProdInstance) -> dict:
    return {"schema": "qiplab-indivprod-1",
            "k": inst.k, "alpha": inst.alpha, "delta": inst.delta,
            "pairs": [{"Q": prep_to_json(q), "Qp": prep_to_json(qp)}
                      for q, qp in inst.pairs]}


def instance_from_json(d: dict) -> IndivProdInstance:
    try:
        pairs = [(prep_from_json(p["Q"]), prep_from_json(p["Qp"]))
                 for p in d["pairs"]]
        return IndivProdInstance(int(d["k"]), pairs, float(d["alpha"]),
                                 float(d["delta"]))
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"malformed instance JSON: {exc}") from exc
