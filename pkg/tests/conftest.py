"""Shared builders for the test suite."""

import numpy as np
import pytest

from qiplab import circuits as cc


def rotation(p: float) -> np.ndarray:
    """Real rotation taking |0> to sqrt(1-p)|0> + sqrt(p)|1>."""
    th = 2 * np.arcsin(np.sqrt(p))
    return np.array([[np.cos(th / 2), -np.sin(th / 2)],
                     [np.sin(th / 2), np.cos(th / 2)]], dtype=complex)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) +
         1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def real_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return (q * np.sign(np.diag(r))).astype(complex)


def random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    a = (rng.standard_normal((d, d)) +
         1j * rng.standard_normal((d, d))) / np.sqrt(2)
    m = a @ a.conj().T
    return m / np.trace(m).real


def random_verifier(rng: np.random.Generator, n_actions: int = 2,
                    q_M: int = 1, q_W: int = 1) -> cc.VerifierSpec:
    """Random unitary verifier-start verifier on q_M + q_W wires."""
    n = q_M + q_W
    acts = [cc.action_from_unitary(haar_unitary(2 ** n, rng), n)
            for _ in range(n_actions)]
    return cc.VerifierSpec(q_M, q_W, acts, n - 1)


def coin_verifier(p: float) -> cc.VerifierSpec:
    """Prover-independent two-turn verifier with acceptance exactly p."""
    return cc.VerifierSpec(
        1, 1, [cc.identity_action(2),
               cc.CircuitAction("unitary", 2, [cc.gate_raw(rotation(p), 1)])],
        1)


def swap_verifier() -> cc.VerifierSpec:
    """Two-turn verifier whose output is the prover's message (omega = 1)."""
    return cc.VerifierSpec(
        1, 1, [cc.identity_action(2),
               cc.CircuitAction("unitary", 2, [cc.gate_swap(0, 1)])], 1)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
