import numpy as np
import pytest

from qiplab import circuits as cc
from qiplab import statetest as st
from qiplab.errors import ArgumentError, ValidationError

from conftest import rotation


def test_prepare_state_zero():
    prep = st.StatePrepCircuit(cc.identity_action(1), (0,))
    rho = st.prepare_state(prep)
    assert np.allclose(rho.mat, [[1, 0], [0, 0]])


def test_prepare_state_traces_work_wires(rng):
    # Bell pair on wires (0, 1), keep only wire 0 -> maximally mixed
    circ = cc.CircuitAction("unitary", 2, [cc.gate_h(0), cc.gate_cnot(0, 1)])
    rho = st.prepare_state(st.StatePrepCircuit(circ, (0,)))
    assert np.allclose(rho.mat, np.eye(2) / 2, atol=1e-12)


def test_state_prep_from_vector_round_trip(rng):
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    v /= np.linalg.norm(v)
    prep = st.state_prep_from_vector(v, 3)
    rho = st.prepare_state(prep)
    assert np.allclose(rho.mat, np.outer(v, v.conj()), atol=1e-10)


def _pure_preps():
    p0 = st.state_prep_from_vector([1, 0], 1)
    p1 = st.state_prep_from_vector([0, 1], 1)
    pp = st.state_prep_from_vector([1 / np.sqrt(2), 1 / np.sqrt(2)], 1)
    return p0, p1, pp


def test_instance_validation():
    p0, p1, _ = _pure_preps()
    with pytest.raises(ValidationError):
        st.IndivProdInstance(k=2, pairs=[(p0, p1)], alpha=0.5, delta=0.01)
    with pytest.raises(ValidationError):
        # promise gap below the floor
        st.IndivProdInstance(k=1, pairs=[(p0, p1)], alpha=0.1, delta=0.1)


def test_decide_verdicts():
    p0, p1, pp = _pure_preps()
    yes = st.IndivProdInstance(k=1, pairs=[(p0, p1)], alpha=0.5, delta=0.01)
    d = st.decide_indivprod(yes)
    assert d.verdict == "yes" and d.witness_index == 0
    no = st.IndivProdInstance(k=1, pairs=[(p0, p0)], alpha=0.5, delta=0.01)
    assert st.decide_indivprod(no).verdict == "no"
    # distance strictly between delta and alpha/k
    mid = st.IndivProdInstance(k=1, pairs=[(p0, pp)], alpha=0.9, delta=0.01)
    d = st.decide_indivprod(mid)
    assert d.verdict == "promise-violation" and d.witness_index == 0


def test_product_distance_bounds_ordering():
    p0, p1, pp = _pure_preps()
    inst = st.IndivProdInstance(k=2, pairs=[(p0, p1), (p0, pp)],
                                alpha=0.5, delta=0.01)
    lower, upper, exact = st.product_distance_bounds(inst)
    assert lower <= exact + 1e-12 <= upper + 1e-12
    assert abs(lower - 1.0) < 1e-12
    # orthogonal somewhere -> product states orthogonal
    assert abs(exact - 1.0) < 1e-10


def test_instance_json_round_trip():
    p0, p1, _ = _pure_preps()
    inst = st.IndivProdInstance(k=1, pairs=[(p0, p1)], alpha=0.5,
                                delta=0.01, meta={"note": 1})
    back = st.instance_from_json(st.instance_to_json(inst))
    assert back.k == 1 and back.alpha == 0.5
    assert st.decide_indivprod(back).verdict == "yes"


def _toy_no_side(l=3, s=1 / 3):
    acts = [cc.identity_action(2)] * l + \
        [cc.CircuitAction("unitary", 2, [cc.gate_raw(rotation(s), 1)])]
    return cc.VerifierSpec(1, 1, acts, 1)


def test_hardness_instance_parameters():
    c, s = 2 / 3, 1 / 3
    v = _toy_no_side()
    w = rotation(s).conj().T @ np.array([np.sqrt(1 - c), np.sqrt(c)])
    sims = [st.state_prep_from_vector([1, 0, 0, 0], 2) for _ in range(3)] + \
        [st.state_prep_from_vector(np.kron([1, 0], w), 2)]
    inst = st.build_hardness_instance(v, sims, c, s)
    expected_alpha = (np.sqrt(c) - np.sqrt(s)) ** 2 / (2 * v.turns - 4)
    assert abs(inst.alpha - expected_alpha) < 1e-12
    assert inst.k == v.rounds
    # the simulator was built to claim acceptance exactly c
    assert abs(inst.meta["claimed_acceptance"] - c) < 1e-10
    assert inst.meta["acceptance_deviation"] < 1e-10


def test_hardness_instance_simulator_count_check():
    v = _toy_no_side()
    with pytest.raises(ArgumentError):
        st.build_hardness_instance(
            v, [st.state_prep_from_vector([1, 0, 0, 0], 2)], 2 / 3, 1 / 3)


def test_simulator_consistency_report():
    v = _toy_no_side()
    prover = cc.ProverStrategy(1, [np.eye(4, dtype=complex)] * 3)
    honest = [st.state_prep_from_vector([1, 0, 0, 0], 2)] * 4
    dists = st.check_simulator_consistency(v, honest, prover)
    assert len(dists) == v.rounds + 1
    assert max(dists) < 1e-10
    flipped = list(honest)
    flipped[1] = st.state_prep_from_vector([0, 1, 0, 0], 2)
    dists = st.check_simulator_consistency(v, flipped, prover)
    assert abs(dists[1] - 1.0) < 1e-10
    assert dists[0] < 1e-10 and max(dists[2:]) < 1e-10


def test_prep_json_round_trip(rng):
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v /= np.linalg.norm(v)
    prep = st.state_prep_from_vector(v, 2)
    back = st.prep_from_json(st.prep_to_json(prep))
    assert np.allclose(st.prepare_state(back).mat,
                       st.prepare_state(prep).mat, atol=1e-12)
