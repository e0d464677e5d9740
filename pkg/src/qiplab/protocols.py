"""Protocol transforms and concrete protocol generators.

Verifier-to-verifier compilers: perfect completeness repair (two extra
turns and a two-qubit reference-state check), sequential repetition with
counter registers and prover-assisted cleanup, parallel repetition with an
AND of output qubits, turn-halving of (4m+1)-turn systems via a
coin-selected forward/backward execution, and the single-coin compilation of
3-turn systems.

Concrete protocols: the multiset-fingerprinting 3-SAT protocol (executed in
classical-message form — the verifier measures every incoming message in the
computational basis, and soundness reduces to classical messages) and the
top-down SAC¹ circuit game.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import circuits
from .circuits import (CircuitAction, Gate, VerifierSpec, controlled_gates,
                       gate_ccx, gate_cnot, gate_h, gate_raw, gate_swap,
                       gate_x, inverse_gates, mcx_gates, remap_gates,
                       spec_hash, X_MAT)
from .errors import (ArgumentError, ParameterError, SizeError)


# ---------------------------------------------------------------------------
# Multiset fingerprinting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FingerprintParams:
    p: int
    r: int
    b: int
    ell: int

    def __post_init__(self):
        lo, hi = (self.b * self.ell) ** 2, 2 * (self.b * self.ell) ** 2
        if not (lo <= self.p <= hi and _is_prime(self.p)):
            raise ArgumentError(
                f"p={self.p} is not a prime in [{lo}, {hi}]")
        if not 1 <= self.r <= self.p - 1:
            raise ArgumentError(f"r={self.r} out of [1, p-1]")


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def fingerprint(multiset, params: FingerprintParams) -> int:
    """Order-independent product Π (x + r) mod p over the multiset."""
    acc = 1
    for x in multiset:
        if not 0 <= x < (1 << params.b):
            raise ArgumentError(
                f"element {x} not representable in {params.b} bits")
        acc = acc * (x + params.r) % params.p
    return acc


def choose_fingerprint_params(b: int, ell: int,
                              rng: np.random.Generator,
                              max_trials: int = 10 ** 4) -> FingerprintParams:
    """Uniform prime p in [(b·ell)², 2(b·ell)²] by rejection sampling, then
    uniform r in [1, p-1]."""
    if b * ell < 2:
        raise ArgumentError("b*ell must be at least 2")
    lo, hi = (b * ell) ** 2, 2 * (b * ell) ** 2
    for _ in range(max_trials):
        p = int(rng.integers(lo, hi + 1))
        if _is_prime(p):
            r = int(rng.integers(1, p))
            return FingerprintParams(p, r, b, ell)
    raise ParameterError("no prime found within the trial cap")


def collision_rate_bound(b: int, ell: int) -> float:
    """Analytic collision-rate bound with its hidden constant taken as 1."""
    return (math.log2(b) + math.log2(ell)) / (b * ell) + 1 / (b * b * ell)


# ---------------------------------------------------------------------------
# Classical protocol plumbing
# ---------------------------------------------------------------------------

@dataclass
class ClassicalProtocolSpec:
    """Classical-message protocol in enumerable form.

    ``play(strategy, coin)`` runs the deterministic verifier against one
    deterministic prover strategy and one coin value; ``strategies`` yields
    the (finite, pruned) strategy space; coins are either an explicit list
    (exact averaging) or a sampler.
    """

    name: str
    turns: list
    coin_space: list | None
    coin_sampler: object
    strategy_count: int
    strategies: object
    play: object


# ---------------------------------------------------------------------------
# 3-SAT protocol (classical-message form)
# ---------------------------------------------------------------------------

@dataclass
class Cnf3Formula:
    num_vars: int
    clauses: list  # list of 3-tuples of signed literals (1-based)

    def __post_init__(self):
        for cl in self.clauses:
            if len(cl) != 3:
                raise ArgumentError("every clause needs exactly 3 literals")
            for lit in cl:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ArgumentError(f"literal {lit} out of range")

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @property
    def bits(self) -> int:
        """Encoding width per triple: 2⌈log n⌉ + ⌈log k⌉ + 1, with n and k
        clamped to ≥ 2 so degenerate toys still fit the packed fields."""
        n = max(self.num_vars, 2)
        k = max(self.num_clauses, 2)
        return 2 * math.ceil(math.log2(n)) + math.ceil(math.log2(k)) + 1

    @property
    def ell(self) -> int:
        return 3 * self.num_clauses

    def encode_triple(self, lit: int, clause: int, value: bool) -> int:
        """Pack (literal, clause index, value) into a < 2^bits integer."""
        n = max(self.num_vars, 2)
        k = max(self.num_clauses, 2)
        var_bits = math.ceil(math.log2(n))
        cl_bits = math.ceil(math.log2(k))
        var = abs(lit) - 1
        sign = 1 if lit < 0 else 0
        word = ((var << 1 | sign) << cl_bits | clause) << 1 | int(value)
        assert word < (1 << self.bits)
        return word

    def satisfied_by(self, assignment) -> bool:
        return all(any(self.literal_value(lit, assignment) for lit in cl)
                   for cl in self.clauses)

    @staticmethod
    def literal_value(lit: int, assignment) -> bool:
        v = bool(assignment[abs(lit) - 1])
        return (not v) if lit < 0 else v


def parse_dimacs(text: str) -> Cnf3Formula:
    n = None
    clauses = []
    current = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) < 4 or parts[1] != "cnf":
                raise ArgumentError(f"bad problem line: {line!r}")
            n = int(parts[2])
            continue
        for tok in line.split():
            v = int(tok)
            if v == 0:
                if not current:
                    continue
                while len(current) < 3:  # pad to width 3 (same semantics)
                    current.append(current[-1])
                if len(current) > 3:
                    raise ArgumentError("clause with more than 3 literals")
                clauses.append(tuple(current))
                current = []
            else:
                current.append(v)
    if current:
        while len(current) < 3:
            current.append(current[-1])
        clauses.append(tuple(current))
    if n is None:
        raise ArgumentError("missing 'p cnf' line")
    return Cnf3Formula(n, clauses)


def _phase1_order(formula: Cnf3Formula):
    """Expected (literal, clause, position) stream of the Consistency Check:
    sorted by variable, then clause index, then the literal itself."""
    items = []
    for ci, cl in enumerate(formula.clauses):
        for pos, lit in enumerate(cl):
            items.append((abs(lit), ci, lit, pos))
    items.sort()
    return [(lit, ci) for _, ci, lit, _ in items]


def phase1_multiset(formula: Cnf3Formula, assignment):
    """Enc(φ(α)) in Consistency Check order."""
    return [formula.encode_triple(
        lit, ci, formula.literal_value(lit, assignment))
        for lit, ci in _phase1_order(formula)]


def phase2_multiset(formula: Cnf3Formula, clause_values):
    """Per-clause triples; clause_values[i] is a 3-tuple of literal values."""
    out = []
    for ci, cl in enumerate(formula.clauses):
        for lit, v in zip(cl, clause_values[ci]):
            out.append(formula.encode_triple(lit, ci, bool(v)))
    return out


def run_3sat_transcript(formula: Cnf3Formula, params: FingerprintParams,
                        phase1, phase2):
    """Execute the verifier on a full transcript of decoded triples.

    ``phase1`` is the Consistency Check triple list (lit, clause, value);
    ``phase2`` the Satisfiability Check list.  Returns (accept, detail).
    """
    expected = _phase1_order(formula)
    if len(phase1) != len(expected):
        return False, "wrong Consistency Check length"
    f_var = 1
    last_var, last_val = None, None
    for (lit, ci, v), (elit, eci) in zip(phase1, expected):
        if (lit, ci) != (elit, eci):
            return False, f"unexpected triple ({lit},{ci}) in phase 1"
        var_val = (not v) if lit < 0 else bool(v)
        if abs(lit) == last_var and var_val != last_val:
            return False, f"inconsistent values for variable {abs(lit)}"
        last_var, last_val = abs(lit), var_val
        f_var = f_var * (formula.encode_triple(lit, ci, bool(v))
                         + params.r) % params.p
    f_cl = 1
    idx = 0
    for ci, cl in enumerate(formula.clauses):
        vals = []
        for lit in cl:
            if idx >= len(phase2):
                return False, "wrong Satisfiability Check length"
            plit, pci, pv = phase2[idx]
            idx += 1
            if (plit, pci) != (lit, ci):
                return False, f"unexpected triple ({plit},{pci}) in phase 2"
            vals.append(bool(pv))
            f_cl = f_cl * (formula.encode_triple(lit, ci, bool(pv))
                           + params.r) % params.p
        if not any(vals):
            return False, f"clause {ci} claimed unsatisfied"
    if idx != len(phase2):
        return False, "wrong Satisfiability Check length"
    if f_var != f_cl:
        return False, f"fingerprint mismatch {f_var} != {f_cl}"
    return True, "fingerprints match"


def honest_3sat_prover(formula: Cnf3Formula, assignment):
    """Transcript of the honest prover for a satisfying assignment."""
    if not formula.satisfied_by(assignment):
        raise ArgumentError("assignment does not satisfy the formula")
    phase1 = [(lit, ci, formula.literal_value(lit, assignment))
              for lit, ci in _phase1_order(formula)]
    phase2 = []
    for ci, cl in enumerate(formula.clauses):
        for lit in cl:
            phase2.append((lit, ci, formula.literal_value(lit, assignment)))
    return {"phase1": phase1, "phase2": phase2}


def _sat_strategies(formula: Cnf3Formula):
    """Pruned deterministic prover strategies: one truth assignment for the
    Consistency Check, and per-clause satisfying value triples for the
    Satisfiability Check (everything else is rejected deterministically)."""
    n, k = formula.num_vars, formula.num_clauses
    sat_vals = [v for v in itertools.product((False, True), repeat=3)
                if any(v)]
    assignments = list(itertools.product((False, True), repeat=n))
    clause_choices = list(itertools.product(sat_vals, repeat=k))
    for a in assignments:
        for cv in clause_choices:
            yield (a, cv)


def _sat_strategy_count(formula: Cnf3Formula) -> int:
    return 2 ** formula.num_vars * 7 ** formula.num_clauses


def build_3sat_protocol(formula: Cnf3Formula,
                        params: FingerprintParams) -> ClassicalProtocolSpec:
    """Protocol instance at fixed fingerprint parameters (the coin)."""
    expected = _phase1_order(formula)

    def play(strategy, coin):
        a, cv = strategy
        phase1 = [(lit, ci, formula.literal_value(lit, a))
                  for lit, ci in expected]
        phase2 = []
        for ci, cl in enumerate(formula.clauses):
            for lit, v in zip(cl, cv[ci]):
                phase2.append((lit, ci, v))
        ok, _ = run_3sat_transcript(formula, coin, phase1, phase2)
        return ok

    turns = ([f"triple<=2^{formula.bits}"] * formula.ell +
             [f"triple<=2^{formula.bits}"] * formula.ell)
    return ClassicalProtocolSpec(
        name="3sat-fingerprint",
        turns=turns,
        coin_space=[params],
        coin_sampler=None,
        strategy_count=_sat_strategy_count(formula),
        strategies=lambda: _sat_strategies(formula),
        play=play,
    )


def forced_multisets(formula: Cnf3Formula):
    """Distinct encoded multisets reachable by pruned strategies.

    Returns (A, B): A from assignments (Consistency Check side), B from
    per-clause satisfying values (Satisfiability Check side), each a sorted
    list of sorted tuples.
    """
    a_set = {tuple(sorted(phase1_multiset(formula, a)))
             for a in itertools.product((False, True),
                                        repeat=formula.num_vars)}
    sat_vals = [v for v in itertools.product((False, True), repeat=3)
                if any(v)]
    b_set = set()
    for cv in itertools.product(sat_vals, repeat=formula.num_clauses):
        b_set.add(tuple(sorted(phase2_multiset(formula, cv))))
    return sorted(a_set), sorted(b_set)


def sat_soundness_study(formula: Cnf3Formula, draws: int,
                        rng: np.random.Generator) -> dict:
    """Monte-Carlo soundness study over sampled (p, r).

    Per draw, the classical prover's best acceptance equals 1 iff some
    reachable Consistency/Satisfiability multiset pair shares a fingerprint
    (equal multisets always do); the aggregate is the mean of the per-draw
    maxima.  Also reports the collision rate restricted to distinct pairs.
    """
    a_list, b_list = forced_multisets(formula)
    a_arr = np.array(a_list, dtype=np.int64)
    b_arr = np.array(b_list, dtype=np.int64)
    equal_pair = bool(set(a_list) & set(b_list))
    accept = 0
    distinct_collisions = 0
    params_used = []
    for _ in range(draws):
        pr = choose_fingerprint_params(formula.bits, formula.ell, rng)
        params_used.append(pr)
        fa = _fingerprint_rows(a_arr, pr)
        fb = _fingerprint_rows(b_arr, pr)
        inter = np.intersect1d(fa, fb)
        hit = inter.size > 0
        accept += 1 if hit else 0
        if hit and not equal_pair:
            distinct_collisions += 1
        elif hit and equal_pair:
            # count collisions among distinct pairs only
            fa_set = {}
            for row, f in zip(a_list, fa):
                fa_set.setdefault(int(f), set()).add(row)
            for row, f in zip(b_list, fb):
                match = fa_set.get(int(f))
                if match and any(r != row for r in match):
                    distinct_collisions += 1
                    break
    return {
        "draws": draws,
        "acceptance_rate": accept / draws,
        "distinct_collision_rate": distinct_collisions / draws,
        "analytic_bound": collision_rate_bound(formula.bits, formula.ell),
        "satisfiable_route": equal_pair,
    }


def _fingerprint_rows(arr: np.ndarray, params: FingerprintParams):
    acc = np.ones(arr.shape[0], dtype=np.int64)
    for col in range(arr.shape[1]):
        acc = acc * ((arr[:, col] + params.r) % params.p) % params.p
    return acc


# ---------------------------------------------------------------------------
# SAC¹ circuit game
# ---------------------------------------------------------------------------

@dataclass
class Sac1Gate:
    id: str
    kind: str          # "or" | "and" | "leaf"
    children: tuple = ()
    literal: int = 0   # signed 1-based input index for leaves


@dataclass
class Sac1Circuit:
    gates: dict
    output: str
    depth_cap: int = 16

    def __post_init__(self):
        if self.output not in self.gates:
            raise ArgumentError("output gate missing")
        for g in self.gates.values():
            if g.kind == "and" and len(g.children) != 2:
                raise ArgumentError(f"AND gate {g.id} must have fan-in 2")
            if g.kind == "or" and len(g.children) < 1:
                raise ArgumentError(f"OR gate {g.id} needs children")
            if g.kind == "leaf" and g.literal == 0:
                raise ArgumentError(f"leaf {g.id} needs a literal")
            for c in g.children:
                if c not in self.gates:
                    raise ArgumentError(f"gate {g.id} references missing {c}")
        self.depth = self._depth()
        if self.depth > self.depth_cap:
            raise SizeError(f"depth {self.depth} exceeds cap {self.depth_cap}")

    def _depth(self) -> int:
        memo = {}
        visiting = set()

        def d(gid):
            if gid in memo:
                return memo[gid]
            if gid in visiting:
                raise ArgumentError("circuit contains a cycle")
            visiting.add(gid)
            g = self.gates[gid]
            out = 0 if g.kind == "leaf" else 1 + max(d(c) for c in g.children)
            visiting.discard(gid)
            memo[gid] = out
            return out

        return d(self.output)


def sac1_from_json(data: dict) -> Sac1Circuit:
    try:
        gates = {}
        for g in data["gates"]:
            gates[g["id"]] = Sac1Gate(
                g["id"], g["kind"], tuple(g.get("children", ())),
                int(g.get("literal", 0)))
        return Sac1Circuit(gates, data["output"])
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"malformed SAC1 JSON: {exc}") from exc


def sac1_to_json(c: Sac1Circuit) -> dict:
    out = []
    for g in c.gates.values():
        d = {"id": g.id, "kind": g.kind}
        if g.kind == "leaf":
            d["literal"] = g.literal
        else:
            d["children"] = list(g.children)
        out.append(d)
    return {"gates": out, "output": c.output}


def sac1_game_value(circuit: Sac1Circuit, x) -> Fraction:
    """Exact game value: max at OR, mean at AND, literal truth at leaves."""
    memo = {}

    def val(gid) -> Fraction:
        if gid in memo:
            return memo[gid]
        g = circuit.gates[gid]
        if g.kind == "leaf":
            v = bool(x[abs(g.literal) - 1])
            out = Fraction(1 if ((not v) if g.literal < 0 else v) else 0)
        elif g.kind == "or":
            out = max(val(c) for c in g.children)
        else:
            out = (val(g.children[0]) + val(g.children[1])) / 2
        memo[gid] = out
        return out

    return val(circuit.output)


def build_sac1_protocol(circuit: Sac1Circuit, x) -> ClassicalProtocolSpec:
    """Top-down game: the prover selects OR children, the verifier selects
    AND children by fair coins; at a leaf the selected literal must be true.

    Strategies assign a child to every OR position of the unfolded game
    tree; coins are bit vectors consumed one per AND along the walk.
    """
    or_positions = []
    max_ands = 0
    stack = [((), circuit.output, 0)]
    count = 1
    while stack:
        pos, gid, ands = stack.pop()
        g = circuit.gates[gid]
        max_ands = max(max_ands, ands)
        if g.kind == "leaf":
            continue
        if g.kind == "or":
            or_positions.append((pos, gid, len(g.children)))
            count *= len(g.children)
            for i, c in enumerate(g.children):
                stack.append((pos + (i,), c, ands))
        else:
            for i, c in enumerate(g.children):
                stack.append((pos + (i,), c, ands + 1))
    or_positions.sort()

    def strategies():
        keys = [p for p, _, _ in or_positions]
        fanins = [f for _, _, f in or_positions]
        for combo in itertools.product(*[range(f) for f in fanins]):
            yield dict(zip(keys, combo))

    def play(strategy, coin):
        pos, gid = (), circuit.output
        ands = 0
        while True:
            g = circuit.gates[gid]
            if g.kind == "leaf":
                v = bool(x[abs(g.literal) - 1])
                return (not v) if g.literal < 0 else v
            if g.kind == "or":
                i = strategy[pos]
            else:
                i = coin[ands]
                ands += 1
            pos, gid = pos + (i,), g.children[i]

    coin_space = list(itertools.product((0, 1), repeat=max_ands))
    return ClassicalProtocolSpec(
        name="sac1-game",
        turns=["child-selection"] * (circuit.depth + 1),
        coin_space=coin_space,
        coin_sampler=None,
        strategy_count=max(count, 1),
        strategies=strategies,
        play=play,
    )


# ---------------------------------------------------------------------------
# Transform: perfect completeness (two extra turns)
# ---------------------------------------------------------------------------

def select_dyadic_alpha(c: float, s: float,
                        max_den: int = 1 << 10) -> Fraction:
    """Smallest-denominator dyadic in [(3c+s)/4, c], ties toward smaller."""
    lo = (3 * Fraction(c).limit_denominator(10 ** 9)
          + Fraction(s).limit_denominator(10 ** 9)) / 4
    hi = Fraction(c).limit_denominator(10 ** 9)
    den = 1
    while den <= max_den:
        hits = [Fraction(num, den) for num in range(0, den + 1)
                if lo <= Fraction(num, den) <= hi]
        if hits:
            return min(hits)
        den *= 2
    raise ParameterError(
        f"no dyadic with denominator <= {max_den} in [{lo}, {hi}]")


def _gamma_check_unitary(alpha: Fraction) -> np.ndarray:
    """Unitary on (Z, Z', O) flipping O iff (Z, Z') is in the |γ> state,
    |γ> = sqrt(1-α)|00> + sqrt(α)|11>."""
    a = float(alpha)
    gamma = np.array([np.sqrt(1 - a), 0, 0, np.sqrt(a)], dtype=complex)
    proj = np.outer(gamma, gamma.conj())
    eye4 = np.eye(4, dtype=complex)
    return np.kron(proj, X_MAT) + np.kron(eye4 - proj, np.eye(2))


def perfect_completeness_transform(verifier: VerifierSpec, c: float,
                                   s: float) -> VerifierSpec:
    """Completeness repair: pseudo-copy the output qubit, hand the whole
    private register to the prover, and test the returned qubit together
    with the copy against the reference state |γ>.

    Adds two turns; yes-side value becomes 1, no-side value is bounded by
    1 - (c-s)²/2.
    """
    if not 0 <= s < c <= 1:
        raise ArgumentError("need 0 <= s < c <= 1")
    if verifier.output_qubit < verifier.q_M:
        raise ArgumentError(
            "the output qubit must lie in the private register W")
    alpha = select_dyadic_alpha(c, s)
    q_M, q_W = verifier.q_M, verifier.q_W
    q_Mn = max(q_M, q_W)
    q_Wn = q_W + 2
    n_new = q_Mn + q_Wn

    def wmap(w):
        return w if w < q_M else q_Mn + (w - q_M)

    z = wmap(verifier.output_qubit)
    z_prime = q_Mn + q_W
    out = q_Mn + q_W + 1

    new_actions = []
    for a in verifier.actions[:-1]:
        new_actions.append(CircuitAction(
            a.kind, n_new, remap_gates(a.gates, wmap)))
    last = verifier.actions[-1]
    gates = remap_gates(last.gates, wmap)
    gates.append(gate_cnot(z, z_prime))
    for t in range(q_W):
        gates.append(gate_swap(t, q_Mn + t))
    new_actions.append(CircuitAction(last.kind, n_new, gates))
    new_actions.append(CircuitAction(
        "unitary", n_new,
        [gate_swap(0, z), gate_raw(_gamma_check_unitary(alpha),
                                   z, z_prime, out)]))
    return VerifierSpec(
        q_Mn, q_Wn, new_actions, out, verifier.starts_with,
        provenance={"transform": "perfect_completeness",
                    "c": c, "s": s, "alpha": str(alpha),
                    "input": spec_hash(verifier)})


# ---------------------------------------------------------------------------
# Transform: sequential repetition with counters
# ---------------------------------------------------------------------------

def repetition_count(k: int, c: float, s: float) -> int:
    """Iterations needed to push soundness error below 2^-k after the
    completeness repair."""
    per_round = 1 - (c - s) ** 2 / 2
    return math.ceil(k / math.log2(1 / per_round))


def sequential_repetition(verifier: VerifierSpec, r: int,
                          caps: circuits.Caps | None = None) -> VerifierSpec:
    """Run the (perfect-completeness) verifier r times in sequence, counting
    accepts in Ŝ and prover cleanups in T̂; accept iff Cnt_acc = r and
    Cnt_clean = r - 1."""
    if r < 1:
        raise ArgumentError("r must be >= 1")
    from . import sdp as sdp_mod
    verifier = sdp_mod.normalize_turn_parity(verifier)
    if r == 1:
        return VerifierSpec(
            verifier.q_M, verifier.q_W, verifier.actions,
            verifier.output_qubit, verifier.starts_with,
            provenance={"transform": "sequential_repetition", "r": 1,
                        "input": spec_hash(verifier)})
    caps = caps or circuits.Caps()
    q_M, q_W = verifier.q_M, verifier.q_W
    q_Mn = max(q_M, q_W)
    s_bits = math.ceil(math.log2(r + 1))
    t_bits = max(1, math.ceil(math.log2(r)))
    base = q_Mn
    q_Wn = q_W + s_bits + t_bits + 1
    n_new = q_Mn + q_Wn
    if n_new > caps.q_mw_cap:
        raise SizeError(f"q_M+q_W={n_new} exceeds cap {caps.q_mw_cap}")

    def wmap(w):
        return w if w < q_M else base + (w - q_M)

    s_wires = [base + q_W + i for i in range(s_bits)]        # little-endian
    t_wires = [base + q_W + s_bits + i for i in range(t_bits)]
    out = base + q_W + s_bits + t_bits
    z_hat = wmap(verifier.output_qubit)

    def dirty_pool(used):
        return [w for w in range(n_new) if w not in used]

    def ctl_increment(wires, control, negated):
        """Increment the little-endian counter, controlled as given."""
        gates = []
        for i in range(len(wires) - 1, -1, -1):
            ctl = list(control) + wires[:i]
            used = set(ctl) | {wires[i]}
            gates += mcx_gates(ctl, wires[i], negated=negated,
                               dirty=dirty_pool(used))
        return gates

    k_act = len(verifier.actions)
    new_actions = []
    for it in range(r):
        prefix = []
        if it > 0:
            # Prover-assisted cleanup: bump Cnt_clean iff the message
            # register holds all-zero, then refill W from it.
            prefix += ctl_increment(t_wires, list(range(q_Mn)),
                                    negated=list(range(q_Mn)))
            for t in range(q_W):
                prefix.append(gate_swap(t, base + t))
        for j, a in enumerate(verifier.actions):
            gates = remap_gates(a.gates, wmap)
            if j == 0:
                gates = prefix + gates
            if j == k_act - 1:
                gates = gates + ctl_increment(s_wires, [z_hat], negated=[])
                if it == r - 1:
                    # Accept iff Ŝ = r and T̂ = r - 1.
                    ctl = s_wires + t_wires
                    neg = [w for i, w in enumerate(s_wires)
                           if not (r >> i) & 1]
                    neg += [w for i, w in enumerate(t_wires)
                            if not ((r - 1) >> i) & 1]
                    used = set(ctl) | {out}
                    gates = gates + mcx_gates(ctl, out, negated=neg,
                                              dirty=dirty_pool(used))
            new_actions.append(CircuitAction(a.kind, n_new, gates))
    return VerifierSpec(
        q_Mn, q_Wn, new_actions, out, "verifier",
        provenance={"transform": "sequential_repetition", "r": r,
                    "input": spec_hash(verifier)})


# ---------------------------------------------------------------------------
# Transform: parallel repetition
# ---------------------------------------------------------------------------

def parallel_repetition(verifier: VerifierSpec, k: int,
                        caps: circuits.Caps | None = None) -> VerifierSpec:
    """k interleaved copies with the AND of the copies' output qubits."""
    if k < 1:
        raise ArgumentError("k must be >= 1")
    caps = caps or circuits.Caps()
    q_M, q_W = verifier.q_M, verifier.q_W
    q_Mn, q_Wn = k * q_M, k * q_W + 1
    n_new = q_Mn + q_Wn
    if n_new > caps.q_mw_cap:
        raise SizeError(f"q_M+q_W={n_new} exceeds cap {caps.q_mw_cap}")

    def wmap(copy):
        def f(w):
            if w < q_M:
                return copy * q_M + w
            return k * q_M + copy * q_W + (w - q_M)
        return f

    out = n_new - 1
    new_actions = []
    for j, a in enumerate(verifier.actions):
        gates = []
        for copy in range(k):
            gates += remap_gates(a.gates, wmap(copy))
        if j == len(verifier.actions) - 1:
            zs = [wmap(copy)(verifier.output_qubit) for copy in range(k)]
            used = set(zs) | {out}
            dirty = [w for w in range(n_new) if w not in used]
            gates += mcx_gates(zs, out, dirty=dirty)
        new_actions.append(CircuitAction(a.kind, n_new, gates))
    return VerifierSpec(
        q_Mn, q_Wn, new_actions, out, verifier.starts_with,
        provenance={"transform": "parallel_repetition", "k": k,
                    "input": spec_hash(verifier)})


# ---------------------------------------------------------------------------
# Transforms: turn-halving and single-coin compilation
# ---------------------------------------------------------------------------

def _check_small_unitary(verifier: VerifierSpec, what: str):
    if verifier.q_M + verifier.q_W > 2 or verifier.q_M < 1:
        raise SizeError(
            f"{what} supports q_M + q_W <= 2 (coin-controlled actions must "
            f"fit the 3-wire raw-gate bound)")
    for a in verifier.actions:
        if a.kind != "unitary":
            raise ArgumentError(f"{what} requires unitary actions")
        for g in a.gates:
            if len(g.wires) > 2:
                raise SizeError(
                    f"{what} requires gates on <= 2 wires so they can be "
                    f"coin-controlled")


def _coin_layout(verifier: VerifierSpec):
    q_M, q_W = verifier.q_M, verifier.q_W
    q_Mn = q_M + q_W + 1            # original M, W-transfer slots, coin half
    q_Wn = q_W + 2                  # original W, kept coin, output

    def wmap(w):
        return w if w < q_M else q_Mn + (w - q_M)

    layout = {
        "wmap": wmap,
        "slots": [q_M + t for t in range(q_W)],
        "coin_send": q_M + q_W,
        "coin": q_Mn + q_W,
        "out": q_Mn + q_W + 1,
        "w_wires": [q_Mn + t for t in range(q_W)],
        "n_new": q_Mn + q_Wn,
    }
    return q_Mn, q_Wn, layout


def _forward_backward_gates(verifier: VerifierSpec, lay,
                            fwd_action: CircuitAction | None,
                            bwd_action: CircuitAction | None):
    """Coin-multiplexed gates: forward action on coin=0, inverse backward
    action on coin=1."""
    gates = []
    if fwd_action is not None:
        inner = controlled_gates(
            remap_gates(fwd_action.gates, lay["wmap"]), lay["coin"])
        gates += [gate_x(lay["coin"])] + inner + [gate_x(lay["coin"])]
    if bwd_action is not None:
        inv = inverse_gates(remap_gates(bwd_action.gates, lay["wmap"]))
        gates += controlled_gates(inv, lay["coin"])
    return gates


def _accept_gates(verifier: VerifierSpec, lay):
    """Write the verdict into the output wire: on coin=0 copy the original
    output qubit, on coin=1 require the private register to be all-zero."""
    z = lay["wmap"](verifier.output_qubit)
    gates = mcx_gates([lay["coin"], z], lay["out"], negated=[lay["coin"]])
    gates += mcx_gates([lay["coin"]] + lay["w_wires"], lay["out"],
                       negated=lay["w_wires"],
                       dirty=[w for w in range(lay["n_new"])
                              if w not in set(lay["w_wires"])
                              | {lay["coin"], lay["out"]}])
    return gates


def turn_halving(verifier: VerifierSpec) -> VerifierSpec:
    """Compile a (4m+1)-turn unitary system into 2m+1 turns.

    The prover opens with the mid-protocol snapshot; a coin (an EPR half
    kept in the private register) selects either finishing the protocol
    forward or unwinding it backward to the all-zero start.
    """
    turns = verifier.turns
    if turns < 5 or (turns - 1) % 4 != 0:
        raise ArgumentError(
            f"turn-halving needs 4m+1 turns, got {turns}")
    _check_small_unitary(verifier, "turn_halving")
    m = (turns - 1) // 4
    acts = verifier.actions          # V_1 .. V_{2m+1}
    q_Mn, q_Wn, lay = _coin_layout(verifier)

    first = [gate_swap(s, w) for s, w in zip(lay["slots"], lay["w_wires"])]
    first += [gate_h(lay["coin"]), gate_cnot(lay["coin"], lay["coin_send"])]
    first += _forward_backward_gates(verifier, lay, acts[m], None)
    new_actions = [CircuitAction("unitary", lay["n_new"], first)]
    for j in range(2, m + 1):
        gates = _forward_backward_gates(
            verifier, lay, acts[m + j - 1], acts[m + 1 - j])
        new_actions.append(CircuitAction("unitary", lay["n_new"], gates))
    gates = _forward_backward_gates(verifier, lay, acts[2 * m], acts[0])
    gates += _accept_gates(verifier, lay)
    new_actions.append(CircuitAction("unitary", lay["n_new"], gates))
    return VerifierSpec(
        q_Mn, q_Wn, new_actions, lay["out"], "prover",
        provenance={"transform": "turn_halving", "m": m,
                    "input": spec_hash(verifier)})


def single_coin_qmaml(verifier3: VerifierSpec) -> VerifierSpec:
    """Compile a 3-turn system into message / one public coin / message."""
    if verifier3.turns != 3:
        raise ArgumentError(
            f"single-coin compilation needs a 3-turn input, got "
            f"{verifier3.turns}")
    _check_small_unitary(verifier3, "single_coin_qmaml")
    acts = verifier3.actions          # V_1, V_2
    q_Mn, q_Wn, lay = _coin_layout(verifier3)
    first = [gate_swap(s, w) for s, w in zip(lay["slots"], lay["w_wires"])]
    first += [gate_h(lay["coin"]), gate_cnot(lay["coin"], lay["coin_send"])]
    new_actions = [CircuitAction("unitary", lay["n_new"], first)]
    gates = _forward_backward_gates(verifier3, lay, acts[1], acts[0])
    gates += _accept_gates(verifier3, lay)
    new_actions.append(CircuitAction("unitary", lay["n_new"], gates))
    return VerifierSpec(
        q_Mn, q_Wn, new_actions, lay["out"], "prover",
        provenance={"transform": "single_coin_qmaml",
                    "input": spec_hash(verifier3)})
