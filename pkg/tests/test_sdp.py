import numpy as np
import pytest

from qiplab import circuits as cc
from qiplab import linalg, sdp
from qiplab.errors import ArgumentError

from conftest import coin_verifier, haar_unitary, random_verifier, \
    swap_verifier


def test_omega_reject_always():
    v = cc.VerifierSpec(1, 1, [cc.identity_action(2)] * 2, 1)
    assert sdp.omega(v) < 1e-7


def test_omega_prover_independent_coin():
    assert abs(sdp.omega(coin_verifier(0.3)) - 0.3) < 1e-7


def test_omega_prover_controls_output():
    assert abs(sdp.omega(swap_verifier()) - 1.0) < 1e-7


def test_solution_certificate_quality(rng):
    sol = sdp.solve(sdp.build_first_sdp(random_verifier(rng, 3)))
    assert sol.max_residual < 1e-7
    assert abs(sol.gap) < 1e-6
    assert sol.dual_value >= sol.objective_value - 1e-6
    for b in sol.blocks:
        assert linalg.is_psd(b, floor=-1e-8)
        assert abs(np.trace(b).real - 1.0) < 1e-6


def test_solution_matches_simulation(rng):
    # the SDP optimum is achievable by an actual prover
    v = random_verifier(rng, 2)
    sol = sdp.solve(sdp.build_first_sdp(v))
    from qiplab import oracle
    prover = oracle.purify_strategy(v, sol)
    assert abs(cc.run_protocol(v, prover) - sol.objective_value) < 1e-5


def test_odd_turn_normalization(rng):
    v = cc.VerifierSpec(1, 1, [
        cc.action_from_unitary(haar_unitary(4, rng), 2),
        cc.CircuitAction("unitary", 2, [cc.gate_swap(0, 1)])], 1,
        starts_with="prover")
    norm = sdp.normalize_turn_parity(v)
    assert norm.starts_with == "verifier"
    assert norm.turns == v.turns + 1
    assert abs(sdp.omega(norm) - sdp.omega(v)) < 1e-6


def _measuring_verifier(rng):
    a1 = cc.CircuitAction("almost-unitary", 2,
                          [cc.gate_raw(haar_unitary(4, rng), 0, 1),
                           cc.gate_measure(1)])
    a2 = cc.action_from_unitary(haar_unitary(4, rng), 2)
    return cc.VerifierSpec(1, 1, [a1, a2], 1)


def test_branch_strings_and_omega_hat(rng):
    v = _measuring_verifier(rng)
    us = sdp.branch_strings(v)
    assert us == ["0", "1"]
    omega = sdp.omega(cc.isometric_lift(v))
    for u in us:
        oh = sdp.omega_hat(v, u)
        assert -1e-7 <= oh <= omega + 1e-5
    with pytest.raises(ArgumentError):
        sdp.omega_hat(v, "01")


def test_check_np_witness_accepts_solver_blocks(rng):
    v = _measuring_verifier(rng)
    u = "1"
    sol = sdp.solve(sdp.build_second_sdp(v, u))
    ok, reason = sdp.check_np_witness(v, u, sol.blocks,
                                      sol.objective_value - 1e-5)
    assert ok, reason


def test_check_np_witness_rejections(rng):
    v = _measuring_verifier(rng)
    u = "1"
    sol = sdp.solve(sdp.build_second_sdp(v, u))
    good = sol.blocks
    # threshold above the optimum
    ok, reason = sdp.check_np_witness(v, u, good, sol.objective_value + 0.1)
    assert not ok and "threshold" in reason
    # wrong block count
    ok, _ = sdp.check_np_witness(v, u, good[:-1], 0.0)
    assert not ok
    # non-Hermitian perturbation
    bad = [b.copy() for b in good]
    bad[0][0, 1] += 0.01
    ok, _ = sdp.check_np_witness(v, u, bad, 0.0)
    assert not ok
    # Hermitian but constraint-violating perturbation
    bad = [b.copy() for b in good]
    bad[-1][0, 0] += 0.01
    ok, _ = sdp.check_np_witness(v, u, bad, 0.0)
    assert not ok


def test_program_json_round_trip(rng):
    v = random_verifier(rng, 2)
    prog = sdp.build_first_sdp(v)
    back = sdp.program_from_json(sdp.program_to_json(prog))
    assert back.blocks == prog.blocks
    assert len(back.constraints) == len(prog.constraints)
    s1 = sdp.solve(prog)
    s2 = sdp.solve(back)
    assert abs(s1.objective_value - s2.objective_value) < 1e-7


def test_scalarized_constraints_match(rng):
    v = random_verifier(rng, 2)
    prog = sdp.build_first_sdp(v)
    sol = sdp.solve(prog)
    for coeffs, rhs in prog.scalarize():
        lhs = sum(np.trace(a @ sol.blocks[j]).real
                  for j, a in coeffs.items())
        assert abs(lhs - rhs) < 1e-6
