"""Independent verification oracles.

Everything optimized or bounded elsewhere is re-derived here by a separate
route: a see-saw alternating optimization over prover unitaries (lower
bounds ω(V) without touching the SDP), purification-based extraction of a
prover strategy from SDP blocks, and exhaustive enumeration of deterministic
classical prover strategies for the classical-message protocols.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import circuits, linalg
from .circuits import ProverStrategy, VerifierSpec
from .errors import ArgumentError, ScopeError, SizeError


# ---------------------------------------------------------------------------
# See-saw prover optimization
# ---------------------------------------------------------------------------

@dataclass
class SeeSawConfig:
    restarts: int = 8
    iterations: int = 200
    prover_qubits: int | None = None  # default 2*(q_M+q_W)
    rng_seed: int = 0

    def resolve_qubits(self, verifier: VerifierSpec) -> int:
        q = self.prover_qubits
        if q is None:
            q = 2 * (verifier.q_M + verifier.q_W)
        if q < 1 or self.restarts < 1 or self.iterations < 1:
            raise ArgumentError("see-saw counts must be >= 1")
        return q


def _haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _polar(g: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(g)
    return u @ vh


class _Protocol:
    """Density-matrix view of one verifier for the see-saw sweeps.

    Internal wire order is (Q, M, W, E_newest, ..., E_oldest): each action's
    live environment output slots in right after W, so lifting an action is
    a plain Kronecker product.  The order only needs to be self-consistent;
    the reported value is recomputed through run_protocol at the end.
    """

    def __init__(self, verifier: VerifierSpec, q_Q: int):
        self.v = verifier
        self.q_Q = q_Q
        self.d_Q = 2 ** q_Q
        n = verifier.q_M + verifier.q_W
        self.d_MW = 2 ** n
        self.kraus = [circuits.kraus_operators(a) for a in verifier.actions]
        self.live_env = [k[0].shape[0] // 2 ** n for k in self.kraus]
        # Sequence of steps: ("P", j) / ("V", j)
        self.steps = []
        if verifier.starts_with == "prover":
            for j in range(len(verifier.actions)):
                self.steps += [("P", j), ("V", j)]
        else:
            for j in range(len(verifier.actions)):
                self.steps.append(("V", j))
                if j < len(verifier.actions) - 1:
                    self.steps.append(("P", j))

    def _lift(self, k: np.ndarray, d_env_old: int) -> np.ndarray:
        return np.kron(np.kron(np.eye(self.d_Q, dtype=complex), k),
                       np.eye(d_env_old, dtype=complex))

    def acceptance_operator(self, d_total: int) -> np.ndarray:
        wires = int(round(np.log2(d_total)))
        out = self.q_Q + self.v.output_qubit
        mats = [np.array([[0, 0], [0, 1]], dtype=complex) if i == out
                else np.eye(2, dtype=complex) for i in range(wires)]
        return linalg.tensor_all(mats, dim_cap=1 << 30)

    def value_and_updates(self, provers: list[np.ndarray]):
        """Forward states before each prover move and the final value."""
        rho = np.zeros((self.d_Q * self.d_MW,) * 2, dtype=complex)
        rho[0, 0] = 1.0
        d_env = 1
        before_p = []
        for who, j in self.steps:
            if who == "P":
                before_p.append((rho, d_env))
                u = np.kron(provers[j], np.eye(
                    rho.shape[0] // provers[j].shape[0], dtype=complex))
                rho = u @ rho @ u.conj().T
            else:
                new = np.zeros((rho.shape[0] * self.live_env[j],) * 2,
                               dtype=complex)
                for k in self.kraus[j]:
                    op = self._lift(k, d_env)
                    new += op @ rho @ op.conj().T
                rho = new
                d_env *= self.live_env[j]
        pi = self.acceptance_operator(rho.shape[0])
        return before_p, float(np.real(np.trace(pi @ rho)))

    def backward_operators(self, provers: list[np.ndarray]):
        """Heisenberg-evolved acceptance operator after each prover move."""
        # First compute final dimension.
        d_env = 1
        for j in range(len(self.kraus)):
            d_env *= self.live_env[j]
        b = self.acceptance_operator(self.d_Q * self.d_MW * d_env)
        after_p = {}
        env_after = d_env
        for idx in range(len(self.steps) - 1, -1, -1):
            who, j = self.steps[idx]
            if who == "P":
                after_p[j] = b
                u = np.kron(provers[j], np.eye(
                    b.shape[0] // provers[j].shape[0], dtype=complex))
                b = u.conj().T @ b @ u
            else:
                env_after //= self.live_env[j]
                acc = np.zeros((self.d_Q * self.d_MW * env_after,) * 2,
                               dtype=complex)
                for k in self.kraus[j]:
                    op = self._lift(k, env_after)
                    acc += op.conj().T @ b @ op
                b = acc
        return after_p


def see_saw_prover(verifier: VerifierSpec, cfg: SeeSawConfig | None = None):
    """Best prover found by alternating polar-decomposition updates.

    Returns (ProverStrategy, value) with value = run_protocol(verifier,
    strategy); deterministic given cfg.rng_seed, monotone non-decreasing
    across iterations within a restart.
    """
    cfg = cfg or SeeSawConfig()
    q_Q = cfg.resolve_qubits(verifier)
    proto = _Protocol(verifier, q_Q)
    d_p = 2 ** (q_Q + verifier.q_M)
    n_prov = verifier.rounds
    rng = np.random.default_rng(cfg.rng_seed)

    best_val, best_actions = -1.0, None
    for _ in range(cfg.restarts):
        provers = [_haar_unitary(d_p, rng) for _ in range(n_prov)]
        last = -1.0
        for _ in range(cfg.iterations):
            for j in range(n_prov):
                before, _ = proto.value_and_updates(provers)
                after = proto.backward_operators(provers)
                a, d_env = before[j]
                b = after[j]
                # f(P) = Tr[B (P ⊗ I) A (P ⊗ I)†] is maximized step-wise by
                # the polar factor of G = Tr_rest(B (P ⊗ I) A).
                u = np.kron(provers[j], np.eye(
                    a.shape[0] // d_p, dtype=complex))
                g_full = b @ u @ a
                g = linalg.partial_trace_mat(
                    g_full, [d_p, g_full.shape[0] // d_p], [0])
                sv = np.linalg.svd(g, compute_uv=False)
                if sv[-1] < 1e-12 * max(sv[0], 1e-300):
                    # Tie: bias degenerate directions toward the previous
                    # iterate to keep updates deterministic.
                    g = g + 1e-9 * max(sv[0], 1e-12) * provers[j]
                provers[j] = _polar(g)
            _, val = proto.value_and_updates(provers)
            if val <= last + 1e-12:
                last = max(last, val)
                break
            last = val
        if last > best_val:
            best_val, best_actions = last, [p.copy() for p in provers]

    strategy = ProverStrategy(q_Q, best_actions)
    value = circuits.run_protocol(verifier, strategy)
    return strategy, value


# ---------------------------------------------------------------------------
# SDP-solution purification
# ---------------------------------------------------------------------------

def _purification(x: np.ndarray, d_pur: int) -> np.ndarray:
    """Canonical purification of x with a purifier of dimension d_pur,
    ordered (purifier, system)."""
    w, q = np.linalg.eigh((x + x.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    d = x.shape[0]
    if d_pur < d:
        raise ArgumentError("purifier too small")
    vec = np.zeros(d_pur * d, dtype=complex)
    for k in range(d):
        vec += np.sqrt(w[k]) * np.kron(_basis(d_pur, k), q[:, k])
    return vec


def _basis(d, k):
    e = np.zeros(d, dtype=complex)
    e[k] = 1.0
    return e


def purify_strategy(verifier: VerifierSpec, solution) -> ProverStrategy:
    """Extract a prover strategy from first-SDP blocks.

    Round by round, the actual evolved pure state and the canonical
    purification of the solved block are two purifications of the same
    (W, E)-marginal (that is exactly the partial-trace constraint), so a
    unitary on (Q, M) maps one to the other; it is recovered by polar
    decomposition of the overlap matrix, which also tolerates solver noise.
    """
    from . import sdp as sdp_mod

    norm = sdp_mod.normalize_turn_parity(verifier)
    q_M, q_W = norm.q_M, norm.q_W
    l = norm.rounds
    blocks = solution.blocks if hasattr(solution, "blocks") else solution
    if len(blocks) != l:
        raise ArgumentError(f"expected {l} blocks, got {len(blocks)}")
    for a in norm.actions:
        if a.kind == "almost-unitary":
            raise ScopeError("purification applies to the first SDP "
                             "(unitary/isometric verifiers)")

    env_counts = [a.env_qubits for a in norm.actions]
    q_Q = q_M + q_W + sum(env_counts[:l])
    d_QM = 2 ** (q_Q + q_M)

    n = q_M + q_W
    vec = np.zeros(2 ** (q_Q + n), dtype=complex)
    vec[0] = 1.0
    wires = q_Q + n
    actions = []
    e_acc = 0
    for j in range(l):
        iso = circuits.to_isometry(norm.actions[j])
        vec = circuits.apply_isometry_vec(
            vec, wires, iso, list(range(q_Q, q_Q + n)))
        wires += env_counts[j]
        e_acc += env_counts[j]
        # Solved block order is (M, W, E_newest..E_oldest); flip the
        # environments to the chronological simulation order.
        x = blocks[j]
        x = linalg.psd_clip(x)
        tr = float(np.real(np.trace(x)))
        if tr <= 0:
            raise ArgumentError(f"block {j} has nonpositive trace")
        x = x / tr
        x = _env_chronological(x, q_M, q_W, env_counts[:j + 1])
        # Ideal state: Q purifies the block, giving global order (Q,M,W,E..)
        target = _purification(x, 2 ** q_Q)
        # Both states are purifications of the same (W, E)-marginal with the
        # (Q, M) factor as purifier; the connecting unitary acts on (Q, M).
        a = vec.reshape(d_QM, -1)           # rows (Q, M), cols (W, E...)
        bmat = target.reshape(d_QM, -1)
        u = _polar(bmat @ a.conj().T)
        actions.append(u)
        vec = circuits.apply_unitary_vec(vec, wires, u,
                                         list(range(q_Q + q_M)))
    return ProverStrategy(q_Q, actions)


def _env_chronological(x: np.ndarray, q_M: int, q_W: int, env_counts):
    """Permute a block from (M, W, E_j..E_1) to (M, W, E_1..E_j) order."""
    envs = [e for e in env_counts if e]
    if not envs:
        return x
    groups = [q_M, q_W] + [e for e in reversed(env_counts) if e]
    # new order: M, W, then env groups reversed
    perm = [0, 1] + list(range(len(groups) - 1, 1, -1))
    return _permute_groups(x, groups, perm)


def _permute_groups(x: np.ndarray, qubit_groups, perm):
    dims = [2 ** q for q in qubit_groups]
    k = len(dims)
    t = x.reshape(dims + dims)
    axes = perm + [p + k for p in perm]
    t = np.transpose(t, axes)
    d = int(np.prod(dims))
    return t.reshape(d, d)


# ---------------------------------------------------------------------------
# Exhaustive classical-strategy enumeration
# ---------------------------------------------------------------------------

ENUMERATION_CAP = 10 ** 7
EXACT_COIN_CAP = 1 << 16


@dataclass
class EnumerationResult:
    best_strategy: object
    value: float
    exact_value: Fraction | None
    per_coin_max: list[float]
    coins: list
    mode: str  # "exact" | "monte-carlo"


def enumerate_classical(protocol, samples: int | None = None,
                        rng: np.random.Generator | None = None,
                        cap: int = ENUMERATION_CAP) -> EnumerationResult:
    """Exact maximum acceptance over deterministic prover strategies.

    The value is max over strategies of the average over verifier coins
    (coins are private, so the max is outside the average).  Coins are
    averaged exactly when the coin space is small, otherwise Monte-Carlo
    sampled; per-coin maxima are reported alongside for soundness studies.
    """
    count = protocol.strategy_count
    if count > cap:
        raise SizeError(
            f"{count} strategies exceed the enumeration cap {cap}; "
            f"use Monte-Carlo sampling over strategies instead")
    if protocol.coin_space is not None and \
            len(protocol.coin_space) <= EXACT_COIN_CAP and samples is None:
        coins = list(protocol.coin_space)
        mode = "exact"
    else:
        if samples is None or samples < 1:
            raise ArgumentError("coin space too large: pass samples >= 1")
        rng = rng or np.random.default_rng(0)
        coins = [protocol.coin_sampler(rng) for _ in range(samples)]
        mode = "monte-carlo"

    best_strategy, best_hits = None, -1
    per_coin_max = [0] * len(coins)
    for strat in protocol.strategies():
        hits = 0
        for ci, coin in enumerate(coins):
            ok = 1 if protocol.play(strat, coin) else 0
            hits += ok
            if ok > per_coin_max[ci]:
                per_coin_max[ci] = ok
        if hits > best_hits:
            best_hits, best_strategy = hits, strat
    if best_strategy is None:
        return EnumerationResult(None, 0.0, Fraction(0), [], coins, mode)
    exact = Fraction(best_hits, len(coins)) if mode == "exact" else None
    return EnumerationResult(best_strategy, best_hits / len(coins), exact,
                             [float(x) for x in per_coin_max], coins, mode)
