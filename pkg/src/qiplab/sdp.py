"""The two SDP formulations for optimal-prover acceptance.

The first program computes the exact value ω(V) for unitary/isometric
verifiers: one PSD block per round holding the snapshot state on
(M', W, E_j, ..., E_1) just after the prover's j-th message, constrained so
that tracing out the message register matches the verifier-evolved previous
snapshot (the prover can do anything on its own side — purification freedom —
but cannot touch W or the environments).

The second program computes the branch-local upper approximation ω̂(V)|^u for
almost-unitary verifiers: unnormalized blocks on (M', W) with both the
partial-trace and total-trace matching constraints projected onto the
pinching outcome u_j of each round.

Constraints are stored structurally as signed terms Tr_lead(A X A†) summed to
a Hermitian right-hand side; ``scalarize`` materializes the flat
Σ Tr(A_i X_i) = b form for external cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import circuits, linalg
from .circuits import CircuitAction, VerifierSpec, identity_action
from .errors import (ArgumentError, ConvergenceError, InfeasibleError,
                     ScopeError)


# ---------------------------------------------------------------------------
# Program representation
# ---------------------------------------------------------------------------

@dataclass
class SdpTerm:
    """One contribution sign * Tr_lead(A X_block A†) of dimension keep_dim.

    The traced factor is the leading subsystem of A's output space, so A has
    shape (t * keep_dim, block_dim) for some traced dimension t.
    """

    block: int
    op: np.ndarray
    sign: float
    keep_dim: int

    def traced_dim(self) -> int:
        return self.op.shape[0] // self.keep_dim

    def value(self, x: np.ndarray) -> np.ndarray:
        y = self.op @ x @ self.op.conj().T
        t = self.traced_dim()
        return self.sign * linalg.partial_trace_mat(
            y, [t, self.keep_dim], [1])

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Adjoint map: sign * A† (I_t ⊗ Y) A."""
        t = self.traced_dim()
        lifted = np.kron(np.eye(t, dtype=complex), y)
        return self.sign * (self.op.conj().T @ lifted @ self.op)


@dataclass
class SdpConstraint:
    terms: list[SdpTerm]
    rhs: np.ndarray  # Hermitian keep_dim x keep_dim
    kind: str = ""   # honesty | ptrace | trace (metadata)

    def residual(self, blocks) -> float:
        acc = -linalg.as_matrix(self.rhs).astype(complex)
        for t in self.terms:
            acc = acc + t.value(blocks[t.block])
        return float(np.linalg.norm(acc))


@dataclass
class SdpProgram:
    """Block-structured Hermitian SDP: maximize Σ Tr(C_j X_j) subject to the
    listed equality constraints and X_j ⪰ 0."""

    blocks: list[tuple[str, int]]
    objective: dict[int, np.ndarray]
    constraints: list[SdpConstraint]
    meta: dict = field(default_factory=dict)

    def objective_value(self, xs) -> float:
        return float(sum(np.real(np.trace(c @ xs[j]))
                         for j, c in self.objective.items()))

    def scalarize(self):
        """Flatten to scalar rows Σ_j Tr(A_{i,j} X_j) = b_i (real b_i),
        expanding each matrix constraint over a Hermitian operator basis."""
        rows = []
        for con in self.constraints:
            d = con.rhs.shape[0] if con.rhs.ndim == 2 else 1
            for hb in _hermitian_basis(d):
                coeffs = {}
                for t in con.terms:
                    lifted = np.kron(np.eye(t.traced_dim(), dtype=complex),
                                     hb)
                    a = t.sign * (t.op.conj().T @ lifted @ t.op)
                    coeffs[t.block] = coeffs.get(t.block, 0) + a
                b = float(np.real(np.trace(hb @ con.rhs)))
                rows.append((coeffs, b))
        return rows


def _hermitian_basis(d: int):
    for k in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[k, k] = 1.0
        yield e
    s = 1 / np.sqrt(2)
    for k in range(d):
        for m in range(k + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[k, m] = s
            e[m, k] = s
            yield e
            e = np.zeros((d, d), dtype=complex)
            e[k, m] = 1j * s
            e[m, k] = -1j * s
            yield e


# ---------------------------------------------------------------------------
# Program builders
# ---------------------------------------------------------------------------

def normalize_turn_parity(verifier: VerifierSpec) -> VerifierSpec:
    """Prepend a dummy verifier turn sending |0...0> when the prover moves
    first, so every program sees an even turn count."""
    if verifier.starts_with == "verifier":
        return verifier
    n = verifier.q_M + verifier.q_W
    return VerifierSpec(verifier.q_M, verifier.q_W,
                        [identity_action(n)] + list(verifier.actions),
                        verifier.output_qubit, "verifier",
                        provenance={"transform": "parity_normalization",
                                    "input": circuits.spec_hash(verifier)})


def _output_projector(n_wires: int, wire: int) -> np.ndarray:
    p1 = np.array([[0, 0], [0, 1]], dtype=complex)
    mats = [p1 if i == wire else np.eye(2, dtype=complex)
            for i in range(n_wires)]
    return linalg.tensor_all(mats)


def build_first_sdp(verifier: VerifierSpec) -> SdpProgram:
    """Exact program for ω(V) (Eq.-style: one block per round).

    Block j lives on (M', W, E_j, ..., E_1) — newest environment first, so
    each lifted action is a plain Kronecker product with the identity on the
    older environments.
    """
    for a in verifier.actions:
        if a.kind == "almost-unitary":
            raise ScopeError(
                "first SDP covers unitary/isometric verifiers only; use "
                "build_second_sdp (or isometric_lift) for almost-unitary "
                "actions")
    verifier = normalize_turn_parity(verifier)
    q_M, q_W = verifier.q_M, verifier.q_W
    n = q_M + q_W
    d_M, d_W = 2 ** q_M, 2 ** q_W
    l = verifier.rounds
    if l < 1:
        raise ArgumentError("verifier has no prover turns")

    isos = [circuits.to_isometry(a) for a in verifier.actions]
    envs = [a.env_qubits for a in verifier.actions]

    blocks = []
    constraints = []
    e_acc = 0
    prev_keep = None  # dim of (W, E...) after action j
    for j in range(l):
        e_acc += envs[j]
        keep = d_W * 2 ** e_acc
        blocks.append((f"rho_{j + 1}", d_M * keep))
        # Lifted action: isometry on (M, W, E_new) ⊗ identity on older envs.
        lifted = np.kron(isos[j], np.eye(2 ** (e_acc - envs[j]),
                                         dtype=complex))
        if j == 0:
            rho0 = np.zeros((2 ** n, 2 ** n), dtype=complex)
            rho0[0, 0] = 1.0
            rhs = linalg.partial_trace_mat(
                lifted @ rho0 @ lifted.conj().T, [d_M, keep], [1])
            constraints.append(SdpConstraint(
                [SdpTerm(0, np.eye(d_M * keep, dtype=complex), 1.0, keep)],
                rhs, kind="honesty"))
        else:
            constraints.append(SdpConstraint(
                [SdpTerm(j, np.eye(d_M * keep, dtype=complex), 1.0, keep),
                 SdpTerm(j - 1, lifted, -1.0, keep)],
                np.zeros((keep, keep)), kind="ptrace"))
        constraints.append(SdpConstraint(
            [SdpTerm(j, np.eye(d_M * keep, dtype=complex), 1.0, 1)],
            np.array([[1.0]]), kind="trace"))
        prev_keep = keep

    # Acceptance operator: evolve through the final action, project the
    # output qubit onto |1>, sum over the final environment.
    final = np.kron(isos[l], np.eye(2 ** e_acc, dtype=complex))
    proj = _output_projector(n + envs[l], verifier.output_qubit)
    proj = np.kron(proj, np.eye(2 ** e_acc, dtype=complex))
    objective = {l - 1: final.conj().T @ proj @ final}
    return SdpProgram(blocks, objective, constraints,
                      meta={"formulation": "first", "rounds": l,
                            "q_M": q_M, "q_W": q_W})


def branch_strings(verifier: VerifierSpec) -> list[str]:
    """All pinching outcome strings u over the non-final actions."""
    bits = verifier.pinched_bits()
    return [format(i, f"0{bits}b") if bits else ""
            for i in range(2 ** bits)]


def build_second_sdp(verifier: VerifierSpec, u: str) -> SdpProgram:
    """Branch-local program for ω̂(V)|^u on an almost-unitary verifier.

    Blocks are unnormalized states on (M', W); each round's honesty and
    trace-matching constraints are projected onto outcome u_j.
    """
    verifier = normalize_turn_parity(verifier)
    q_M, q_W = verifier.q_M, verifier.q_W
    n = q_M + q_W
    d_M, d_W = 2 ** q_M, 2 ** q_W
    l = verifier.rounds
    if l < 1:
        raise ArgumentError("verifier has no prover turns")
    pin_bits = [a.measure_count for a in verifier.actions[:l]]
    if len(u) != sum(pin_bits):
        raise ArgumentError(
            f"outcome string length {len(u)} != measured bits "
            f"{sum(pin_bits)}")
    if u and set(u) - {"0", "1"}:
        raise ArgumentError("outcome string must be binary")

    # Per-round branch operators A_j = (I ⊗ <u_j|) V_iso_j on (M, W).
    ops = []
    pos = 0
    for j in range(l):
        iso = circuits.to_isometry(verifier.actions[j])
        e = verifier.actions[j].env_qubits
        if e:
            u_j = int(u[pos:pos + pin_bits[j]], 2)
            pos += pin_bits[j]
            ops.append(iso.reshape(2 ** n, 2 ** e, 2 ** n)[:, u_j, :])
        else:
            ops.append(iso)

    d = d_M * d_W
    blocks = [(f"rho_{j + 1}", d) for j in range(l)]
    constraints = []
    rho0 = np.zeros((d, d), dtype=complex)
    rho0[0, 0] = 1.0
    for j in range(l):
        if j == 0:
            evolved = ops[0] @ rho0 @ ops[0].conj().T
            rhs_pt = linalg.partial_trace_mat(evolved, [d_M, d_W], [1])
            constraints.append(SdpConstraint(
                [SdpTerm(0, np.eye(d, dtype=complex), 1.0, d_W)],
                rhs_pt, kind="honesty"))
            constraints.append(SdpConstraint(
                [SdpTerm(0, np.eye(d, dtype=complex), 1.0, 1)],
                np.array([[np.real(np.trace(evolved))]]), kind="trace"))
        else:
            constraints.append(SdpConstraint(
                [SdpTerm(j, np.eye(d, dtype=complex), 1.0, d_W),
                 SdpTerm(j - 1, ops[j], -1.0, d_W)],
                np.zeros((d_W, d_W)), kind="ptrace"))
            constraints.append(SdpConstraint(
                [SdpTerm(j, np.eye(d, dtype=complex), 1.0, 1),
                 SdpTerm(j - 1, ops[j], -1.0, 1)],
                np.array([[0.0]]), kind="trace"))

    fin = circuits.to_isometry(verifier.actions[l])
    e_fin = verifier.actions[l].env_qubits
    proj = _output_projector(n + e_fin, verifier.output_qubit)
    objective = {l - 1: fin.conj().T @ proj @ fin}
    return SdpProgram(blocks, objective, constraints,
                      meta={"formulation": "second", "rounds": l, "u": u,
                            "q_M": q_M, "q_W": q_W})


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

@dataclass
class SdpSolution:
    blocks: list[np.ndarray]
    objective_value: float
    dual_value: float
    gap: float
    solver: str
    max_residual: float


def _term_superop(t: SdpTerm):
    """Matrix of vec(X) ↦ vec(sign · Tr_lead(A X A†)) in column-major vec
    convention: Σ_i conj(A_i) ⊗ A_i over the k-row slices A_i of A.

    Built sparse: circuit-derived operators are permutation-like, and dense
    rows here would destroy the solver's KKT sparsity.
    """
    import scipy.sparse as sparse

    k = t.keep_dim
    a_full = sparse.csr_matrix(t.op)
    a_full.eliminate_zeros()
    out = None
    for i in range(t.traced_dim()):
        a = a_full[i * k:(i + 1) * k, :]
        piece = sparse.kron(a.conj(), a, format="csr")
        out = piece if out is None else out + piece
    return (t.sign * out).tocsr()


def solve(program: SdpProgram, tol: float = 1e-7) -> SdpSolution:
    """Solve with an interior-point backend; the reported dual value is
    recomputed from the equality multipliers and repaired to exact dual
    feasibility, so dual_value ≥ optimum up to eigenvalue tolerance."""
    import cvxpy as cp

    # When every datum is real the blocks can be taken real symmetric: this
    # halves the embedded PSD cone size, which enters the interior-point
    # scaling blocks quadratically.
    def _real(m):
        arr = m.toarray() if hasattr(m, "toarray") else np.asarray(m)
        return float(np.max(np.abs(arr.imag))) < 1e-14 if \
            np.iscomplexobj(arr) else True

    all_real = (all(_real(t.op) for con in program.constraints
                    for t in con.terms)
                and all(_real(con.rhs) for con in program.constraints)
                and all(_real(c) for c in program.objective.values()))

    xs = [cp.Variable((dim, dim), symmetric=True, name=name) if all_real
          else cp.Variable((dim, dim), hermitian=True, name=name)
          for name, dim in program.blocks]
    cons = [x >> 0 for x in xs]
    eqs = []
    for con in program.constraints:
        expr = None
        for t in con.terms:
            # Hand the solver the precomputed superoperator on vec(X);
            # letting the modeling layer canonicalize A @ X @ A† would
            # materialize the full Kronecker square of A.
            sop = _term_superop(t)
            if all_real:
                sop = sop.real
            piece = sop @ cp.vec(xs[t.block], order="F")
            expr = piece if expr is None else expr + piece
        rhs = linalg.as_matrix(con.rhs).astype(complex)
        eq = expr == (rhs.real if all_real else rhs).flatten(order="F")
        eqs.append(eq)
        cons.append(eq)
    if all_real:
        obj = sum(cp.sum(cp.multiply(np.ascontiguousarray(c.T.real), xs[j]))
                  for j, c in program.objective.items())
    else:
        obj = sum(cp.real(cp.sum(cp.multiply(np.ascontiguousarray(c.T),
                                             xs[j])))
                  for j, c in program.objective.items())
    prob = cp.Problem(cp.Maximize(obj), cons)

    # Interior-point scaling for a PSD cone of embedded dimension n costs
    # O(n^4) memory; past ~96 the projection-based solver is the safe route.
    # On degenerate programs the interior-point solver can stall and report
    # an inaccurate solution a few 1e-3 off; a small static regularization
    # usually restores convergence, so retry before falling back.
    emb = max(dim for _, dim in program.blocks) * (1 if all_real else 2)
    attempts = [
        ("CLARABEL", dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10,
                          tol_feas=1e-10)),
        ("CLARABEL", dict(static_regularization_constant=1e-7)),
        ("SCS", dict(eps=1e-7, max_iters=100000)),
    ]
    if emb > 96:
        attempts = attempts[-1:]

    # Solver status labels are unreliable on degenerate programs
    # ("optimal_inaccurate" runs are sometimes the accurate ones), so rank
    # candidates by their own certificates: worst of primal residual and
    # primal/dual agreement.
    best = None
    for solver, kwargs in attempts:
        try:
            import warnings
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                prob.solve(solver=solver, **kwargs)
        except cp.error.SolverError:
            continue
        if prob.status in ("infeasible", "infeasible_inaccurate"):
            raise InfeasibleError(f"program infeasible ({solver})",
                                  certificate=prob.status)
        if prob.status not in ("optimal", "optimal_inaccurate"):
            continue
        mats = [linalg.psd_clip(np.asarray(x.value)) for x in xs]
        duals = []
        for eq, con in zip(eqs, program.constraints):
            k = con.rhs.shape[0] if con.rhs.ndim == 2 else 1
            duals.append(np.asarray(eq.dual_value).reshape((k, k),
                                                           order="F"))
        primal = program.objective_value(mats)
        dual_value = _certified_dual(program, duals)
        max_res = max(con.residual(mats) for con in program.constraints)
        score = max(max_res, abs(dual_value - primal))
        cand = SdpSolution(mats, primal, dual_value, dual_value - primal,
                           solver, max_res)
        if best is None or score < best[0]:
            best = (score, cand)
        if score <= 1e-6:
            break
    if best is None:
        raise ConvergenceError(f"no solver converged (status {prob.status})")
    return best[1]


def _certified_dual(program: SdpProgram, duals) -> float:
    """Turn solver multipliers into a certified upper bound on the optimum.

    For the Lagrangian L = obj + Σ_c <Y_c, B_c - L_c(X)>, dual feasibility is
    S_j := Σ_c L_c†(Y_c)_j - C_j ⪰ 0 for every block.  Any deficit is
    repaired by shifting the multiplier of the block's trace constraint
    (whose adjoint contributes +δ·I to S_j and only PSD-subtractions to
    earlier blocks), processed from the last block down.
    """
    nb = len(program.blocks)

    def slack(ys):
        s = [np.zeros((dim, dim), dtype=complex)
             for _, dim in program.blocks]
        for con, y in zip(program.constraints, ys):
            y = np.asarray(y, dtype=complex)
            if y.ndim == 0:
                y = y.reshape(1, 1)
            y = (y + y.conj().T) / 2
            for t in con.terms:
                s[t.block] += t.adjoint(y)
        for j, c in program.objective.items():
            s[j] -= c
        return s

    def deficit(s):
        return sum(max(0.0, -float(np.linalg.eigvalsh(m).min()))
                   for m in s)

    best = None
    for sign in (1.0, -1.0):
        ys = [sign * np.asarray(y) for y in duals]
        s = slack(ys)
        d = deficit(s)
        if best is None or d < best[0]:
            best = (d, ys, s)
    _, ys, s = best

    # Locate each block's trace constraint (identity term, keep_dim 1).
    trace_con = {}
    for ci, con in enumerate(program.constraints):
        if con.kind != "trace":
            continue
        for t in con.terms:
            if t.keep_dim == 1 and t.sign > 0:
                trace_con[t.block] = ci
    dual_value = sum(float(np.real(np.trace(
        np.asarray(y).reshape(con.rhs.shape) @ con.rhs)))
        for con, y in zip(program.constraints, ys))

    margin = 1e-12
    for j in range(nb - 1, -1, -1):
        lam = float(np.linalg.eigvalsh(s[j]).min())
        if lam < 0:
            delta = -lam + margin
            ci = trace_con.get(j)
            if ci is None:
                # No handle to repair with; fall back to a crude bound.
                dual_value += delta * program.blocks[j][1]
                continue
            con = program.constraints[ci]
            for t in con.terms:
                s[t.block] += t.adjoint(np.array([[delta]]))
            dual_value += delta * float(np.real(con.rhs[0, 0]))
    return dual_value


def omega(verifier: VerifierSpec, tol: float = 1e-7) -> float:
    """Maximum acceptance probability via the first SDP."""
    sol = solve(build_first_sdp(verifier), tol=tol)
    return min(max(sol.objective_value, 0.0), 1.0)


def omega_hat(verifier: VerifierSpec, u: str, tol: float = 1e-7) -> float:
    """Branch-local approximation ω̂(V)|^u via the second SDP."""
    sol = solve(build_second_sdp(verifier, u), tol=tol)
    return min(max(sol.objective_value, 0.0), 1.0)


# ---------------------------------------------------------------------------
# NP witness checking
# ---------------------------------------------------------------------------

def check_np_witness(verifier: VerifierSpec, u: str, blocks, c: float):
    """Verdict on a claimed witness (u, ρ_1, ..., ρ_l) for acceptance ≥ c.

    Accepts iff every block is Hermitian PSD, all branch-u constraints hold
    within 1e-6 (Frobenius), and the evaluated objective is ≥ c - 1e-6.
    Returns (accepted: bool, reason: str).
    """
    tol = linalg.TOL_BOUND
    try:
        program = build_second_sdp(verifier, u)
    except ArgumentError as exc:
        return False, f"malformed branch string: {exc}"
    if len(blocks) != len(program.blocks):
        return False, (f"expected {len(program.blocks)} blocks, "
                       f"got {len(blocks)}")
    mats = []
    for j, b in enumerate(blocks):
        m = linalg.as_matrix(b)
        if m.shape != (program.blocks[j][1],) * 2:
            return False, f"block {j} has wrong shape {m.shape}"
        if np.max(np.abs(m - m.conj().T)) > tol:
            return False, f"block {j} is not Hermitian within 1e-6"
        if float(np.linalg.eigvalsh((m + m.conj().T) / 2).min()) < -tol:
            return False, f"block {j} is not PSD within 1e-6"
        mats.append(m)
    for ci, con in enumerate(program.constraints):
        r = con.residual(mats)
        if r > tol:
            return False, (f"constraint {ci} ({con.kind}) residual "
                           f"{r:.3e} > 1e-6")
    val = program.objective_value(mats)
    if val < c - tol:
        return False, f"objective {val:.6f} below threshold {c:.6f} - 1e-6"
    return True, f"objective {val:.6f}"


# ---------------------------------------------------------------------------
# JSON round-trip
# ---------------------------------------------------------------------------

def program_to_json(p: SdpProgram) -> dict:
    return {
        "schema": "qiplab-sdp-1",
        "blocks": [{"name": n, "dim": d} for n, d in p.blocks],
        "objective": {str(j): linalg.mat_to_json(c)
                      for j, c in p.objective.items()},
        "constraints": [{
            "kind": con.kind,
            "rhs": linalg.mat_to_json(linalg.as_matrix(con.rhs)),
            "terms": [{"block": t.block, "sign": t.sign,
                       "keep_dim": t.keep_dim,
                       "op": linalg.mat_to_json(t.op)}
                      for t in con.terms],
        } for con in p.constraints],
        "meta": p.meta,
    }


def program_from_json(d: dict) -> SdpProgram:
    try:
        blocks = [(b["name"], int(b["dim"])) for b in d["blocks"]]
        objective = {int(j): linalg.mat_from_json(c)
                     for j, c in d["objective"].items()}
        constraints = [SdpConstraint(
            [SdpTerm(int(t["block"]), linalg.mat_from_json(t["op"]),
                     float(t["sign"]), int(t["keep_dim"]))
             for t in con["terms"]],
            linalg.mat_from_json(con["rhs"]), con.get("kind", ""))
            for con in d["constraints"]]
        return SdpProgram(blocks, objective, constraints, d.get("meta", {}))
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"malformed SDP JSON: {exc}") from exc
