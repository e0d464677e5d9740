"""Verifier/prover circuit model and protocol state evolution.

A verifier is a tuple of actions (one per verifier turn) on the message
register M and the private register W.  Actions come in three kinds:

* ``unitary`` — gates from {H, T, CNOT, SWAP, RawUnitary} only;
* ``almost-unitary`` — additionally contains pinching ``Measure`` gates
  (computational-basis dephasing of single wires);
* ``isometric`` — additionally contains ``Ancilla`` gates appending fresh
  |0> wires that stay live (the reversible generalization where environment
  registers are kept unmeasured).

Wire order is big-endian (wire 0 is the most significant ket position).
Protocol simulation keeps a branch list of pure states on (Q, M, W, env...),
splitting branches at each pinching measurement; this is equivalent to the
deferred-measurement picture with the environment measured at the end.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (ArgumentError, CompatibilityError, SizeError,
                     ValidationError)
from . import linalg

# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------

H_MAT = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
T_MAT = np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex)
X_MAT = np.array([[0, 1], [1, 0]], dtype=complex)
CNOT_MAT = np.array([[1, 0, 0, 0],
                     [0, 1, 0, 0],
                     [0, 0, 0, 1],
                     [0, 0, 1, 0]], dtype=complex)
SWAP_MAT = np.array([[1, 0, 0, 0],
                     [0, 0, 1, 0],
                     [0, 1, 0, 0],
                     [0, 0, 0, 1]], dtype=complex)
CCX_MAT = np.eye(8, dtype=complex)
CCX_MAT[[6, 7]] = CCX_MAT[[7, 6]]

_FIXED_GATES = {"H": H_MAT, "T": T_MAT, "CNOT": CNOT_MAT, "SWAP": SWAP_MAT}
_WIRE_COUNT = {"H": 1, "T": 1, "CNOT": 2, "SWAP": 2, "Measure": 1,
               "Ancilla": 0}


@dataclass(frozen=True)
class Gate:
    """One circuit gate; ``matrix`` is set only for RawUnitary."""

    kind: str
    wires: tuple[int, ...] = ()
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind in _WIRE_COUNT:
            if len(self.wires) != _WIRE_COUNT[self.kind]:
                raise ArgumentError(
                    f"{self.kind} takes {_WIRE_COUNT[self.kind]} wires, "
                    f"got {self.wires}")
            if self.matrix is not None:
                raise ArgumentError(f"{self.kind} carries no matrix")
        elif self.kind == "RawUnitary":
            if self.matrix is None:
                raise ArgumentError("RawUnitary requires a matrix")
            m = linalg.as_matrix(self.matrix)
            k = len(self.wires)
            if not 1 <= k <= 3:
                raise ValidationError(
                    f"RawUnitary acts on 1..3 wires, got {k}")
            if m.shape != (2 ** k, 2 ** k):
                raise ArgumentError(
                    f"RawUnitary matrix shape {m.shape} does not match "
                    f"{k} wires")
            if not linalg.is_unitary(m):
                raise ValidationError("RawUnitary matrix is not unitary")
            object.__setattr__(self, "matrix", m)
        else:
            raise ArgumentError(f"unknown gate kind {self.kind!r}")
        if len(set(self.wires)) != len(self.wires):
            raise ArgumentError(f"repeated wires in {self.kind} gate")

    def unitary(self) -> np.ndarray:
        if self.kind in _FIXED_GATES:
            return _FIXED_GATES[self.kind]
        if self.kind == "RawUnitary":
            return self.matrix
        raise ArgumentError(f"{self.kind} gate has no unitary")


def gate_h(w): return Gate("H", (w,))
def gate_t(w): return Gate("T", (w,))
def gate_x(w): return Gate("RawUnitary", (w,), X_MAT)
def gate_cnot(c, t): return Gate("CNOT", (c, t))
def gate_swap(a, b): return Gate("SWAP", (a, b))
def gate_ccx(a, b, t): return Gate("RawUnitary", (a, b, t), CCX_MAT)
def gate_raw(matrix, *wires): return Gate("RawUnitary", tuple(wires), matrix)
def gate_measure(w): return Gate("Measure", (w,))
def gate_ancilla(): return Gate("Ancilla", ())


def remap_gates(gates, wire_map) -> list[Gate]:
    """Relabel gate wires through a mapping (dict or callable)."""
    f = wire_map if callable(wire_map) else wire_map.__getitem__
    out = []
    for g in gates:
        out.append(Gate(g.kind, tuple(f(w) for w in g.wires), g.matrix))
    return out


def inverse_gates(gates) -> list[Gate]:
    """Gate list implementing the inverse of a unitary gate list."""
    out = []
    for g in reversed(list(gates)):
        if g.kind in ("H", "CNOT", "SWAP"):
            out.append(g)
        elif g.kind == "T":
            out.append(gate_raw(T_MAT.conj().T, g.wires[0]))
        elif g.kind == "RawUnitary":
            out.append(Gate("RawUnitary", g.wires, g.matrix.conj().T))
        else:
            raise ArgumentError(f"cannot invert {g.kind} gate")
    return out


def controlled_gates(gates, control) -> list[Gate]:
    """Control an entire unitary gate list on one extra wire.

    Each gate grows by one wire, so inputs may only contain gates on at most
    two wires.
    """
    out = []
    for g in gates:
        u = g.unitary()
        k = len(g.wires)
        if k > 2:
            raise SizeError(
                "cannot control a 3-wire gate within the 3-wire raw-gate "
                "bound")
        cu = np.eye(2 ** (k + 1), dtype=complex)
        cu[2 ** k:, 2 ** k:] = u
        out.append(Gate("RawUnitary", (control,) + g.wires, cu))
    return out


def mcx_gates(controls, target, negated=(), dirty=()) -> list[Gate]:
    """Multi-controlled X from Toffolis, borrowing dirty ancilla wires.

    ``negated`` lists control wires that trigger on |0>; ``dirty`` supplies
    scratch wires whose state is restored (one is needed for 3 controls, two
    for 4).  Supports up to 4 controls — enough for the counter logic at desk
    scale.
    """
    controls = list(controls)
    pre = [gate_x(w) for w in negated]
    k = len(controls)
    if k == 0:
        core = [gate_x(target)]
    elif k == 1:
        core = [gate_cnot(controls[0], target)]
    elif k == 2:
        core = [gate_ccx(controls[0], controls[1], target)]
    elif k in (3, 4):
        if len(dirty) < k - 2:
            raise SizeError(f"{k}-control X needs {k - 2} dirty wires")
        a = dirty[0]
        # C^k X = (C^{k-1}X -> a ; CCX(a, c_k -> t)) twice: the a-dependent
        # terms cancel whatever a held, and a is restored.
        inner = mcx_gates(controls[:-1], a, dirty=dirty[1:])
        step = inner + [gate_ccx(a, controls[-1], target)]
        core = step + step
    else:
        raise SizeError(f"{k}-control X not supported (cap 4)")
    return pre + core + pre


# ---------------------------------------------------------------------------
# Circuit actions and verifier/prover specs
# ---------------------------------------------------------------------------

ACTION_KINDS = ("unitary", "almost-unitary", "isometric")


@dataclass
class CircuitAction:
    """One verifier turn: ordered gates on ``in_qubits`` wires.

    Measure/Ancilla gates create environment wires; a gate may address an
    environment wire of the same action once created, using indices starting
    at ``in_qubits`` in creation order.  ``measured_wires`` records which
    environment wires are measured at end of turn (automatic for
    almost-unitary actions).
    """

    kind: str
    in_qubits: int
    gates: list[Gate] = field(default_factory=list)
    measured_wires: frozenset[int] = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ArgumentError(f"unknown action kind {self.kind!r}")
        if self.in_qubits < 1:
            raise ArgumentError("action needs at least one wire")
        env = 0
        measured = []
        for g in self.gates:
            if g.kind == "Measure":
                if self.kind != "almost-unitary":
                    raise ValidationError(
                        f"Measure gate in {self.kind} action")
                if g.wires[0] >= self.in_qubits + env:
                    raise ArgumentError(
                        f"Measure wire {g.wires[0]} out of range")
                measured.append(self.in_qubits + env)
                env += 1
            elif g.kind == "Ancilla":
                if self.kind != "isometric":
                    raise ValidationError(
                        f"Ancilla gate in {self.kind} action")
                env += 1
            else:
                for w in g.wires:
                    if w >= self.in_qubits + env:
                        raise ArgumentError(
                            f"gate wire {w} out of range "
                            f"({self.in_qubits}+{env} available)")
                    if w in measured:
                        raise ArgumentError(
                            "measurement-record wires are inaccessible")
        if self.measured_wires is None:
            self.measured_wires = frozenset(measured)
        else:
            self.measured_wires = frozenset(self.measured_wires)
            if self.kind == "almost-unitary" and \
                    self.measured_wires != frozenset(measured):
                raise ValidationError(
                    "measured_wires inconsistent with deferred-measurement "
                    "expansion")

    @property
    def env_qubits(self) -> int:
        return sum(1 for g in self.gates if g.kind in ("Measure", "Ancilla"))

    @property
    def measure_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == "Measure")


def identity_action(n: int) -> CircuitAction:
    return CircuitAction("unitary", n, [])


def action_from_unitary(u: np.ndarray, n: int) -> CircuitAction:
    """Wrap a dense unitary on n <= 3 wires as a single-gate action."""
    if n > 3:
        raise SizeError("dense unitaries are limited to 3 wires; supply a "
                        "gate list instead")
    return CircuitAction("unitary", n, [gate_raw(u, *range(n))])


def to_isometry(action: CircuitAction) -> np.ndarray:
    """Deferred-measurement isometry of an action.

    Output shape 2^(in+e) x 2^in with e = Measure + Ancilla count; column b
    is the image of basis state |b>.  Measure gates become entangling copies
    onto fresh environment wires (appended at the end of the wire order);
    unitary actions return the plain unitary.
    """
    n = action.in_qubits
    mat = np.eye(2 ** n, dtype=complex)
    wires = n
    for g in action.gates:
        if g.kind == "Measure":
            mat = _append_zero_wire(mat, wires)
            wires += 1
            mat = _apply_rows(mat, wires, CNOT_MAT, (g.wires[0], wires - 1))
        elif g.kind == "Ancilla":
            mat = _append_zero_wire(mat, wires)
            wires += 1
        else:
            mat = _apply_rows(mat, wires, g.unitary(), g.wires)
    return mat


def _append_zero_wire(mat: np.ndarray, wires: int) -> np.ndarray:
    """Tensor a |0> wire at the end of the row space."""
    rows, cols = mat.shape
    out = np.zeros((2 * rows, cols), dtype=complex)
    out[0::2] = mat
    return out


def _apply_rows(mat: np.ndarray, n: int, u: np.ndarray, wires) -> np.ndarray:
    """Apply a small unitary on the given row wires of a 2^n x C matrix."""
    k = len(wires)
    cols = mat.shape[1]
    t = mat.reshape((2,) * n + (cols,))
    t = np.moveaxis(t, wires, range(k))
    t = t.reshape(2 ** k, -1)
    t = u @ t
    t = t.reshape((2,) * k + (2,) * (n - k) + (cols,))
    t = np.moveaxis(t, range(k), wires)
    return t.reshape(2 ** n, cols)


def apply_unitary_vec(vec: np.ndarray, n: int, u: np.ndarray,
                      wires) -> np.ndarray:
    """Apply a small unitary to the given wires of an n-wire state vector."""
    return _apply_rows(vec.reshape(-1, 1), n, u, wires).reshape(-1)


def apply_isometry_vec(vec: np.ndarray, n: int, iso: np.ndarray,
                       in_wires) -> np.ndarray:
    """Apply an isometry to the given wires of an n-wire state vector.

    The isometry's output wires are (inputs..., env...); the env wires are
    appended at the end of the global wire order, matching the simulation
    convention.  Returns a state on n + e wires.
    """
    k = len(in_wires)
    e = int(round(np.log2(iso.shape[0]))) - k
    t = vec.reshape((2,) * n)
    t = np.moveaxis(t, in_wires, range(k))
    t = t.reshape(2 ** k, -1)
    t = iso @ t
    # Front block is now (inputs..., env...); restore inputs, push env last.
    t = t.reshape((2,) * (k + e) + (2,) * (n - k))
    t = np.moveaxis(t, range(k, k + e), range(n, n + e))
    t = np.moveaxis(t, range(k), in_wires)
    return t.reshape(-1)


def kraus_operators(action: CircuitAction) -> list[np.ndarray]:
    """Kraus operators of an action as a channel on its input wires.

    Measured environment wires are summed over (pinching); unmeasured ones
    (Ancilla) remain as extra output dimensions, so each operator has shape
    2^(in+e_live) x 2^in.
    """
    iso = to_isometry(action)
    n, e = action.in_qubits, action.env_qubits
    if e == 0:
        return [iso]
    measured = sorted(w - n for w in action.measured_wires)
    if not measured:
        return [iso]
    t = iso.reshape((2 ** n,) + (2,) * e + (2 ** n,))
    out = []
    for bits in range(2 ** len(measured)):
        idx = [slice(None)] * (e + 2)
        for pos, ax in enumerate(measured):
            idx[1 + ax] = (bits >> (len(measured) - 1 - pos)) & 1
        k = t[tuple(idx)].reshape(-1, 2 ** n)
        out.append(k)
    return out


@dataclass
class VerifierSpec:
    """Register sizes, ordered verifier actions, and the output qubit.

    ``actions`` lists (V_1, ..., V_{l+1}); ``output_qubit`` indexes into the
    concatenated (M, W) wires; ``starts_with`` records which party sends the
    first message, which fixes the declared turn count.
    """

    q_M: int
    q_W: int
    actions: list[CircuitAction]
    output_qubit: int
    starts_with: str = "verifier"
    provenance: dict | None = None

    def __post_init__(self):
        if self.starts_with not in ("verifier", "prover"):
            raise ArgumentError(f"bad starts_with {self.starts_with!r}")
        if not self.actions:
            raise ArgumentError("verifier needs at least one action")
        n = self.q_M + self.q_W
        if not 0 <= self.output_qubit < n:
            raise ArgumentError("output qubit out of range")
        for j, a in enumerate(self.actions):
            if a.in_qubits != n:
                raise ArgumentError(
                    f"action {j} has in_qubits {a.in_qubits} != q_M+q_W={n}")

    @property
    def turns(self) -> int:
        k = len(self.actions)
        return 2 * (k - 1) if self.starts_with == "verifier" else 2 * k - 1

    @property
    def rounds(self) -> int:
        """Number of prover actions l."""
        k = len(self.actions)
        return k - 1 if self.starts_with == "verifier" else k

    @property
    def kind(self) -> str:
        kinds = {a.kind for a in self.actions}
        if "almost-unitary" in kinds:
            return "almost-unitary"
        if "isometric" in kinds:
            return "isometric"
        return "unitary"

    def pinched_bits(self) -> int:
        """Total measured environment bits over non-final actions."""
        return sum(a.measure_count for a in self.actions[:-1])


@dataclass
class ProverStrategy:
    """Ordered prover unitaries on (Q, M)."""

    q_Q: int
    actions: list[np.ndarray]

    def __post_init__(self):
        self.actions = [linalg.as_matrix(a) for a in self.actions]
        for j, a in enumerate(self.actions):
            d = a.shape[0]
            if a.shape != (d, d) or not linalg.is_unitary(a, tol=1e-9):
                raise ValidationError(f"prover action {j} is not unitary")

    def qubits(self, q_M: int) -> None:
        d = 2 ** (self.q_Q + q_M)
        for a in self.actions:
            if a.shape[0] != d:
                raise CompatibilityError(
                    f"prover action dim {a.shape[0]} != 2^(q_Q+q_M)={d}")


@dataclass
class Caps:
    """Explicit stand-ins for the O(log n) space bounds."""

    q_mw_cap: int = 12
    measure_cap: int = 16
    turn_cap: int = 64
    dim_cap: int = linalg.DEFAULT_DIM_CAP


def validate_verifier(spec: VerifierSpec, caps: Caps | None = None) -> list:
    """Report cap violations (empty list means ok)."""
    caps = caps or Caps()
    out = []
    n = spec.q_M + spec.q_W
    if n > caps.q_mw_cap:
        out.append(f"q_M+q_W={n} exceeds cap {caps.q_mw_cap}")
    if spec.turns > caps.turn_cap:
        out.append(f"turn count {spec.turns} exceeds cap {caps.turn_cap}")
    for j, a in enumerate(spec.actions):
        if a.in_qubits != n:
            out.append(f"action {j}: in_qubits {a.in_qubits} != {n}")
        if a.measure_count > caps.measure_cap:
            out.append(f"action {j}: {a.measure_count} measurements exceed "
                       f"cap {caps.measure_cap}")
    return out


# ---------------------------------------------------------------------------
# Protocol simulation
# ---------------------------------------------------------------------------

def _run_branches(verifier: VerifierSpec, prover: ProverStrategy):
    """Evolve the branch list through the alternating action sequence.

    Returns (branches, total_wires) where each branch is (outcome_string,
    unnormalized state vector) on wires [Q | M | W | live env...].
    """
    prover.qubits(verifier.q_M)
    if len(prover.actions) != verifier.rounds:
        raise CompatibilityError(
            f"prover supplies {len(prover.actions)} actions, verifier "
            f"expects {verifier.rounds}")
    q_Q, q_M, q_W = prover.q_Q, verifier.q_M, verifier.q_W
    n = q_Q + q_M + q_W
    vec = np.zeros(2 ** n, dtype=complex)
    vec[0] = 1.0
    branches = [("", vec)]
    pm = list(range(q_Q + q_M))  # prover wires (Q, M)

    seq = []
    if verifier.starts_with == "prover":
        for j, a in enumerate(verifier.actions):
            seq.append(("P", j))
            seq.append(("V", j))
    else:
        for j, a in enumerate(verifier.actions):
            seq.append(("V", j))
            if j < len(verifier.actions) - 1:
                seq.append(("P", j))

    for who, j in seq:
        if who == "P":
            u = prover.actions[j]
            branches = [(u_str, apply_unitary_vec(v, n, u, pm))
                        for u_str, v in branches]
        else:
            branches, n = _apply_verifier_action(
                branches, n, verifier.actions[j], q_Q, verifier.q_M,
                verifier.q_W)
    return branches, n


def _apply_verifier_action(branches, n, action, q_Q, q_M, q_W):
    env_map = []  # action-relative env index -> global wire
    base = q_Q  # action wires 0.. map to global q_Q+...

    def glob(w):
        if w < action.in_qubits:
            return base + w
        return env_map[w - action.in_qubits]

    for g in action.gates:
        if g.kind == "Measure":
            target = glob(g.wires[0])
            env_map.append(None)  # record slot; no live wire is kept
            new = []
            for u_str, v in branches:
                t = v.reshape((2,) * n)
                t = np.moveaxis(t, target, 0)
                for b in (0, 1):
                    proj = np.zeros_like(t)
                    proj[b] = t[b]
                    pv = np.moveaxis(proj, 0, target).reshape(-1)
                    if np.vdot(pv, pv).real > 1e-30:
                        new.append((u_str + str(b), pv))
            branches = new
        elif g.kind == "Ancilla":
            env_map.append(n)
            branches = [(u_str, np.kron(v.reshape(-1, 1),
                                        np.array([[1.0], [0.0]])).reshape(-1))
                        for u_str, v in branches]
            n += 1
        else:
            wires = tuple(glob(w) for w in g.wires)
            u = g.unitary()
            branches = [(u_str, apply_unitary_vec(v, n, u, wires))
                        for u_str, v in branches]
    return branches, n


def run_protocol(verifier: VerifierSpec, prover: ProverStrategy) -> float:
    """Probability that the designated output qubit measures 1."""
    branches, n = _run_branches(verifier, prover)
    out = prover.q_Q + verifier.output_qubit
    total = 0.0
    for _, v in branches:
        t = np.moveaxis(v.reshape((2,) * n), out, 0)
        total += float(np.vdot(t[1], t[1]).real)
    return min(max(total, 0.0), 1.0)


def branch_probabilities(verifier: VerifierSpec, prover: ProverStrategy):
    """Map from pinching outcome string u to (probability, conditional
    acceptance); probabilities sum to 1 and the weighted acceptance equals
    run_protocol."""
    branches, n = _run_branches(verifier, prover)
    out = prover.q_Q + verifier.output_qubit
    result = {}
    for u_str, v in branches:
        p = float(np.vdot(v, v).real)
        t = np.moveaxis(v.reshape((2,) * n), out, 0)
        acc = float(np.vdot(t[1], t[1]).real)
        if u_str in result:
            p0, a0 = result[u_str]
            result[u_str] = (p0 + p, a0 + acc)
        else:
            result[u_str] = (p, acc)
    return {u: (p, (a / p if p > 0 else 0.0)) for u, (p, a) in result.items()}


def isometric_lift(verifier: VerifierSpec) -> VerifierSpec:
    """Deferred-measurement lift: Measure gates become entangling copies to
    live environment wires, turning an almost-unitary verifier into an
    isometric one with the same acceptance statistics."""
    new_actions = []
    for a in verifier.actions:
        if a.kind != "almost-unitary":
            new_actions.append(a)
            continue
        gates, env = [], 0
        for g in a.gates:
            if g.kind == "Measure":
                gates.append(gate_ancilla())
                gates.append(gate_cnot(g.wires[0], a.in_qubits + env))
                env += 1
            else:
                gates.append(g)
        new_actions.append(CircuitAction("isometric", a.in_qubits, gates))
    return VerifierSpec(verifier.q_M, verifier.q_W, new_actions,
                        verifier.output_qubit, verifier.starts_with,
                        provenance={"transform": "isometric_lift",
                                    "input": spec_hash(verifier)})


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------

def gate_to_json(g: Gate) -> dict:
    d = {"kind": g.kind, "wires": list(g.wires)}
    if g.matrix is not None:
        d["matrix"] = linalg.mat_to_json(g.matrix)
    return d


def gate_from_json(d: dict) -> Gate:
    matrix = linalg.mat_from_json(d["matrix"]) if "matrix" in d else None
    return Gate(d["kind"], tuple(d.get("wires", ())), matrix)


def spec_to_json(spec: VerifierSpec) -> dict:
    d = {
        "q_M": spec.q_M,
        "q_W": spec.q_W,
        "actions": [{"kind": a.kind,
                     "gates": [gate_to_json(g) for g in a.gates]}
                    for a in spec.actions],
        "output_qubit": spec.output_qubit,
        "starts_with": spec.starts_with,
    }
    if spec.provenance:
        d["provenance"] = spec.provenance
    return d


def spec_from_json(d: dict) -> VerifierSpec:
    try:
        n = int(d["q_M"]) + int(d["q_W"])
        actions = [CircuitAction(a["kind"], n,
                                 [gate_from_json(g) for g in a["gates"]])
                   for a in d["actions"]]
        return VerifierSpec(int(d["q_M"]), int(d["q_W"]), actions,
                            int(d["output_qubit"]),
                            d.get("starts_with", "verifier"),
                            d.get("provenance"))
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"malformed circuit JSON: {exc}") from exc


def spec_hash(spec: VerifierSpec) -> str:
    """Stable content hash used for transform provenance trails."""
    d = spec_to_json(spec)
    d.pop("provenance", None)
    blob = json.dumps(d, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
