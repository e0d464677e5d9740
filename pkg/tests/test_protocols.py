import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qiplab import circuits as cc
from qiplab import oracle, protocols
from qiplab.errors import ArgumentError, ParameterError, SizeError

from conftest import coin_verifier, haar_unitary

# ---------------------------------------------------------------------------
# Fingerprinting
# ---------------------------------------------------------------------------


def test_choose_fingerprint_params_ranges(rng):
    for _ in range(20):
        pr = protocols.choose_fingerprint_params(6, 9, rng)
        lo, hi = (6 * 9) ** 2, 2 * (6 * 9) ** 2
        assert lo <= pr.p <= hi
        assert protocols._is_prime(pr.p)
        assert 1 <= pr.r <= pr.p - 1


def test_fingerprint_params_validation():
    with pytest.raises(ArgumentError):
        protocols.FingerprintParams(p=4, r=1, b=2, ell=2)
    with pytest.raises(ArgumentError):
        protocols.FingerprintParams(p=17, r=0, b=2, ell=2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=63), min_size=1,
                max_size=8),
       st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_fingerprint_order_independent(xs, seed):
    rng = np.random.default_rng(seed)
    pr = protocols.choose_fingerprint_params(6, max(len(xs), 1), rng)
    f0 = protocols.fingerprint(xs, pr)
    perm = list(xs)
    rng.shuffle(perm)
    assert protocols.fingerprint(perm, pr) == f0


def test_fingerprint_element_width_check(rng):
    pr = protocols.choose_fingerprint_params(4, 3, rng)
    with pytest.raises(ArgumentError):
        protocols.fingerprint([16], pr)


def test_collision_rate_bound_positive():
    assert 0 < protocols.collision_rate_bound(6, 9) < 1


# ---------------------------------------------------------------------------
# 3-SAT protocol
# ---------------------------------------------------------------------------

THREE_CLAUSE = protocols.Cnf3Formula(4, [(1, 2, 3), (-4, -2, 3),
                                         (4, -1, -3)])
THREE_CLAUSE_ASSIGNMENT = (False, False, True, True)

UNSAT_ONE_VAR = protocols.Cnf3Formula(1, [(1, 1, 1), (-1, -1, -1)])


def test_parse_dimacs():
    f = protocols.parse_dimacs("c comment\np cnf 3 2\n1 -2 3 0\n-1 2 0\n")
    assert f.num_vars == 3 and f.num_clauses == 2
    # short clauses are padded by repeating the final literal
    assert f.clauses[1] == (-1, 2, 2)
    with pytest.raises(ArgumentError):
        protocols.parse_dimacs("1 2 3 0\n")


def test_formula_satisfaction():
    assert THREE_CLAUSE.satisfied_by(THREE_CLAUSE_ASSIGNMENT)
    assert not UNSAT_ONE_VAR.satisfied_by((True,))
    assert not UNSAT_ONE_VAR.satisfied_by((False,))


def test_encode_triple_is_injective():
    f = THREE_CLAUSE
    seen = set()
    for cl_i, cl in enumerate(f.clauses):
        for lit in cl:
            for v in (False, True):
                w = f.encode_triple(lit, cl_i, v)
                assert 0 <= w < (1 << f.bits)
                seen.add(w)
    assert len(seen) == 3 * f.num_clauses * 2


def test_honest_prover_accepted(rng):
    f = THREE_CLAUSE
    t = protocols.honest_3sat_prover(f, THREE_CLAUSE_ASSIGNMENT)
    for _ in range(5):
        pr = protocols.choose_fingerprint_params(f.bits, f.ell, rng)
        ok, why = protocols.run_3sat_transcript(f, pr, t["phase1"],
                                                t["phase2"])
        assert ok, why


def test_cheating_transcripts_rejected(rng):
    f = THREE_CLAUSE
    pr = protocols.choose_fingerprint_params(f.bits, f.ell, rng)
    t = protocols.honest_3sat_prover(f, THREE_CLAUSE_ASSIGNMENT)
    # wrong stream order
    bad = list(t["phase1"])
    bad[0], bad[1] = bad[1], bad[0]
    ok, why = protocols.run_3sat_transcript(f, pr, bad, t["phase2"])
    assert not ok and "order" in why.lower() or not ok
    # inconsistent variable values in phase 1
    bad = [(lit, ci, not v) if i == 0 else (lit, ci, v)
           for i, (lit, ci, v) in enumerate(t["phase1"])]
    ok, _ = protocols.run_3sat_transcript(f, pr, bad, t["phase2"])
    assert not ok
    # unsatisfied clause in phase 2
    bad2 = [(lit, ci, False) for lit, ci, _ in t["phase2"]]
    ok, _ = protocols.run_3sat_transcript(f, pr, t["phase1"], bad2)
    assert not ok


def test_forced_multisets_disjoint_iff_unsat():
    a, b = protocols.forced_multisets(THREE_CLAUSE)
    assert set(a) & set(b)
    a, b = protocols.forced_multisets(UNSAT_ONE_VAR)
    assert not (set(a) & set(b))


def test_protocol_strategy_count():
    p = protocols.build_3sat_protocol(
        UNSAT_ONE_VAR,
        protocols.choose_fingerprint_params(
            UNSAT_ONE_VAR.bits, UNSAT_ONE_VAR.ell,
            np.random.default_rng(0)))
    assert p.strategy_count == 2 ** 1 * 7 ** 2


def test_soundness_study_matches_enumeration(rng):
    f = UNSAT_ONE_VAR
    study = protocols.sat_soundness_study(f, 300, np.random.default_rng(3))
    assert study["acceptance_rate"] == study["distinct_collision_rate"]
    # cross-check a few draws against full enumeration
    check_rng = np.random.default_rng(3)
    hits = 0
    for _ in range(50):
        pr = protocols.choose_fingerprint_params(f.bits, f.ell, check_rng)
        res = oracle.enumerate_classical(protocols.build_3sat_protocol(f, pr))
        hits += int(res.exact_value == 1)
    direct = 0
    check_rng = np.random.default_rng(3)
    a, b = protocols.forced_multisets(f)
    for _ in range(50):
        pr = protocols.choose_fingerprint_params(f.bits, f.ell, check_rng)
        fa = {protocols.fingerprint(x, pr) for x in a}
        fb = {protocols.fingerprint(x, pr) for x in b}
        direct += int(bool(fa & fb))
    assert hits == direct


# ---------------------------------------------------------------------------
# SAC1 circuits
# ---------------------------------------------------------------------------

def _sac1_example():
    return protocols.sac1_from_json({
        "gates": [
            {"id": "l1", "kind": "leaf", "literal": 1},
            {"id": "l2", "kind": "leaf", "literal": 2},
            {"id": "l3", "kind": "leaf", "literal": -3},
            {"id": "a1", "kind": "and", "children": ["l1", "l2"]},
            {"id": "top", "kind": "or", "children": ["a1", "l3"]},
        ],
        "output": "top"})


def test_sac1_game_value():
    c = _sac1_example()
    assert c.depth == 2
    assert protocols.sac1_game_value(c, (True, True, False)) == 1
    assert protocols.sac1_game_value(c, (True, False, True)) == \
        Fraction(1, 2)
    assert protocols.sac1_game_value(c, (False, False, True)) == 0


def test_sac1_json_round_trip():
    c = _sac1_example()
    back = protocols.sac1_from_json(protocols.sac1_to_json(c))
    for x in itertools.product((False, True), repeat=3):
        assert protocols.sac1_game_value(back, x) == \
            protocols.sac1_game_value(c, x)


def test_sac1_validation():
    with pytest.raises(ArgumentError):
        protocols.sac1_from_json({
            "gates": [{"id": "a", "kind": "or", "children": ["a"]}],
            "output": "a"})  # cycle
    with pytest.raises(ArgumentError):
        protocols.sac1_from_json({
            "gates": [{"id": "a", "kind": "and", "children": ["a", "a",
                                                              "a"]}],
            "output": "a"})  # AND fan-in


# ---------------------------------------------------------------------------
# Transforms (structural checks; heavy numerics live in test_acceptance)
# ---------------------------------------------------------------------------

def test_select_dyadic_alpha_frozen():
    # exhaustive scan over dyadics for c=2/3, s=1/3 (oracles/alpha_scan.py)
    assert protocols.select_dyadic_alpha(2 / 3, 1 / 3) == Fraction(5, 8)
    with pytest.raises(ParameterError):
        protocols.select_dyadic_alpha(1e-9, 0.0)


def test_repetition_count():
    assert protocols.repetition_count(1, 2 / 3, 1 / 3) >= 1
    assert protocols.repetition_count(10, 2 / 3, 1 / 3) > \
        protocols.repetition_count(2, 2 / 3, 1 / 3)


def test_perfect_completeness_shape():
    v = coin_verifier(0.5)
    t = protocols.perfect_completeness_transform(v, 2 / 3, 1 / 3)
    assert t.turns == v.turns + 2
    assert t.q_W == v.q_W + 2
    assert t.provenance["transform"] == "perfect_completeness"
    bad = cc.VerifierSpec(1, 1, [cc.identity_action(2)] * 2, 0)
    with pytest.raises(ArgumentError):
        protocols.perfect_completeness_transform(bad, 2 / 3, 1 / 3)


def test_sequential_repetition_r1_is_identity():
    v = coin_verifier(0.4)
    t = protocols.sequential_repetition(v, 1)
    assert t.turns == v.turns
    assert t.provenance["r"] == 1
    with pytest.raises(ArgumentError):
        protocols.sequential_repetition(v, 0)


def test_parallel_repetition_shape():
    v = coin_verifier(0.4)
    t = protocols.parallel_repetition(v, 2)
    assert t.q_M == 2 * v.q_M
    assert t.q_W == 2 * v.q_W + 1
    assert t.turns == v.turns


def test_turn_halving_shape_checks(rng):
    with pytest.raises(ArgumentError):
        protocols.turn_halving(coin_verifier(0.5))  # needs 4m+1 turns
    big = cc.VerifierSpec(2, 1, [cc.identity_action(3)] * 3, 2,
                          starts_with="prover")
    with pytest.raises(SizeError):
        protocols.turn_halving(big)
    v5 = cc.VerifierSpec(
        1, 1, [cc.action_from_unitary(haar_unitary(4, rng), 2)
               for _ in range(3)], 1, starts_with="prover")
    h = protocols.turn_halving(v5)
    assert h.turns == 3
    assert h.starts_with == "prover"


def test_single_coin_requires_three_turns():
    with pytest.raises(ArgumentError):
        protocols.single_coin_qmaml(coin_verifier(0.5))


def test_parallel_repetition_value(rng):
    from qiplab import sdp
    v = coin_verifier(0.36)
    t = protocols.parallel_repetition(v, 2)
    assert abs(sdp.omega(t) - 0.36 ** 2) < 1e-5


def test_sequential_repetition_squares_value():
    # two sequential runs of a value-p verifier accept with probability p^2
    from qiplab import sdp
    v = coin_verifier(0.7)
    t = protocols.sequential_repetition(v, 2)
    assert t.provenance["transform"] == "sequential_repetition"
    assert abs(sdp.omega(t) - 0.49) < 1e-4
