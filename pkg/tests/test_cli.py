import json

import pytest

from qiplab import circuits as cc
from qiplab import cli, linalg, oracle, sdp, statetest

from conftest import coin_verifier, swap_verifier


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def verifier_file(tmp_path):
    return write_json(tmp_path / "ver.json",
                      cc.spec_to_json(coin_verifier(0.3)))


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip().startswith("{") else None)


def test_omega_report(verifier_file, capsys):
    code, rep = run_cli(capsys, "omega", verifier_file,
                        "--prover-qubits", "2", "--restarts", "3")
    assert code == 0
    assert rep["schema"] == cli.SCHEMA
    assert abs(rep["omega_sdp"] - 0.3) < 1e-6
    assert rep["bracket_ok"]
    assert rep["gap"] <= 1e-6


def test_omega_bracket_disagreement(verifier_file, capsys, monkeypatch):
    monkeypatch.setattr(oracle, "see_saw_prover",
                        lambda spec, cfg=None: (None, 0.9))
    code, rep = run_cli(capsys, "omega", verifier_file)
    assert code == 3
    assert not rep["bracket_ok"]


def test_missing_file_is_argument_error(capsys):
    code, _ = run_cli(capsys, "omega", "nope.json")
    assert code == 2


def test_caps_flag(verifier_file, capsys):
    code, _ = run_cli(capsys, "--caps", "1", "omega", verifier_file)
    assert code == 2  # q_M + q_W exceeds the tightened cap
    code, _ = run_cli(capsys, "--caps", "99", "omega", verifier_file)
    assert code == 2  # cannot loosen beyond the module maximum


def test_out_flag_writes_report(verifier_file, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = cli.main(["--out", str(out), "omega", verifier_file,
                     "--prover-qubits", "2"])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["command"] == "omega"


def test_transform_pipeline(verifier_file, capsys):
    code, rep = run_cli(capsys, "transform", verifier_file, "--pipeline",
                        '[{"name": "parallel_repetition", "k": 2}]')
    assert code == 0
    assert rep["stages"][0]["transform"] == "parallel_repetition"
    assert abs(rep["stages"][0]["omega"] - 0.09) < 1e-5
    assert abs(rep["stages"][0]["bound"]["value_relation_value"] -
               rep["input_omega"] ** 2) < 1e-9


def test_transform_shape_violation(verifier_file, capsys):
    code, rep = run_cli(capsys, "transform", verifier_file, "--pipeline",
                        '[{"name": "turn_halving"}]', "--skip-omega")
    assert code == 4
    assert rep["failed_stage"] == 0 and rep["transform"] == "turn_halving"


def test_transform_bad_pipeline(verifier_file, capsys):
    code, _ = run_cli(capsys, "transform", verifier_file,
                      "--pipeline", "not json")
    assert code == 2
    code, _ = run_cli(capsys, "transform", verifier_file,
                      "--pipeline", '[{"name": "unknown"}]')
    assert code == 2


def test_sat_honest_and_soundness(tmp_path, capsys):
    sat = tmp_path / "f.cnf"
    sat.write_text("p cnf 3 2\n1 -2 3 0\n-1 2 -3 0\n")
    code, rep = run_cli(capsys, "sat", str(sat), "--assignment", "100")
    assert code == 0 and rep["accepted"]
    code, rep = run_cli(capsys, "sat", str(sat), "--assignment", "1")
    assert code == 2  # wrong assignment length
    unsat = tmp_path / "u.cnf"
    unsat.write_text("p cnf 1 2\n1 1 1 0\n-1 -1 -1 0\n")
    code, rep = run_cli(capsys, "sat", str(unsat), "--samples", "50")
    assert code == 1
    assert rep["acceptance_rate"] < 1.0
    code, _ = run_cli(capsys, "sat", str(unsat), "--samples", "0")
    assert code == 2
    code, _ = run_cli(capsys, "sat", str(unsat))
    assert code == 2


def test_sac1_exit_codes(tmp_path, capsys):
    path = write_json(tmp_path / "c.json", {
        "gates": [{"id": "l", "kind": "leaf", "literal": 1},
                  {"id": "o", "kind": "or", "children": ["l"]}],
        "output": "o"})
    code, rep = run_cli(capsys, "sac1", path, "--input", "1")
    assert code == 0 and rep["satisfied"]
    code, rep = run_cli(capsys, "sac1", path, "--input", "0")
    assert code == 1 and rep["game_value_float"] == 0.0


def test_statetest_verdict_exit_codes(tmp_path, capsys):
    p0 = statetest.state_prep_from_vector([1, 0], 1)
    p1 = statetest.state_prep_from_vector([0, 1], 1)
    pp = statetest.state_prep_from_vector([2 ** -0.5, 2 ** -0.5], 1)
    cases = [((p0, p1), "yes", 0), ((p0, p0), "no", 1),
             ((p0, pp), "promise-violation", 5)]
    for pair, verdict, expected in cases:
        inst = statetest.IndivProdInstance(k=1, pairs=[pair], alpha=0.9,
                                           delta=0.01)
        path = write_json(tmp_path / "inst.json",
                          statetest.instance_to_json(inst))
        code, rep = run_cli(capsys, "statetest", path)
        assert (code, rep["verdict"]) == (expected, verdict)


def test_witness_accept_and_corrupt(tmp_path, capsys):
    spec = swap_verifier()
    ver = write_json(tmp_path / "v.json", cc.spec_to_json(spec))
    sol = sdp.solve(sdp.build_second_sdp(spec, ""))
    wit = {"u": "", "c": sol.objective_value - 1e-5,
           "blocks": [linalg.mat_to_json(b) for b in sol.blocks]}
    good = write_json(tmp_path / "w.json", wit)
    code, rep = run_cli(capsys, "witness", ver, good)
    assert code == 0 and rep["accepted"]
    bad_blocks = [linalg.mat_from_json(b) for b in wit["blocks"]]
    bad_blocks[0][0, 0] += 0.05
    bad = write_json(tmp_path / "wb.json",
                     dict(wit, blocks=[linalg.mat_to_json(b)
                                       for b in bad_blocks]))
    code, rep = run_cli(capsys, "witness", ver, bad)
    assert code == 1
    assert "residual" in rep["reason"] or "threshold" in rep["reason"]


def test_threads_env(monkeypatch, verifier_file, capsys):
    monkeypatch.setenv("QIPL_LAB_THREADS", "2")
    monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
    code, rep = run_cli(capsys, "omega", verifier_file,
                        "--prover-qubits", "2")
    assert code == 0 and rep["threads"] == 2
