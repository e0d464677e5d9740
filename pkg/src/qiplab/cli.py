"""Batch command-line front-end.

Subcommands load circuit/formula/instance files, run the requested
computation, and emit a schema-versioned JSON report.  Exit codes: 0 accept
or yes, 1 reject or no, 2 bad arguments or unparsable input, 3 bracket
disagreement between the SDP and the see-saw oracle, 4 transform shape
violation, 5 promise violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import circuits, linalg, oracle, protocols, sdp, statetest
from .errors import (ArgumentError, ParameterError, QiplabError, ScopeError,
                     SizeError, ValidationError)

SCHEMA = "qiplab-report-1"

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_ARGS = 2
EXIT_DISAGREE = 3
EXIT_SHAPE = 4
EXIT_PROMISE = 5


def _threads() -> int | None:
    raw = os.environ.get("QIPL_LAB_THREADS")
    if raw is None:
        return None
    try:
        n = max(1, int(raw))
    except ValueError:
        return None
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))
    return n


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ArgumentError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{path} is not valid JSON: {exc}") from exc


def _load_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ArgumentError(f"cannot read {path}: {exc}") from exc


def _emit(report: dict, args) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _base_report(args, command: str) -> dict:
    return {"schema": SCHEMA, "command": command, "seed": args.seed,
            "tol": args.tol, "threads": _threads()}


def _parse_caps(raw: str | None) -> circuits.Caps:
    caps = circuits.Caps()
    if not raw:
        return caps
    try:
        parts = [int(x) for x in raw.split(",")]
    except ValueError as exc:
        raise ArgumentError(f"bad --caps value {raw!r}") from exc
    fields = ["q_mw_cap", "measure_cap", "turn_cap", "dim_cap"]
    defaults = circuits.Caps()
    for name, value in zip(fields, parts):
        if value > getattr(defaults, name):
            raise ArgumentError(
                f"--caps {name}={value} exceeds module maximum "
                f"{getattr(defaults, name)}")
        setattr(caps, name, value)
    return caps


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_omega(args) -> int:
    spec = circuits.spec_from_json(_load_json(args.verifier))
    problems = circuits.validate_verifier(spec, _parse_caps(args.caps))
    if problems:
        raise ArgumentError("; ".join(problems))
    work = spec
    if work.kind == "almost-unitary":
        work = circuits.isometric_lift(work)
    sol = sdp.solve(sdp.build_first_sdp(work))
    omega_sdp = min(max(sol.objective_value, 0.0), 1.0)
    cfg = oracle.SeeSawConfig(restarts=args.restarts,
                              prover_qubits=args.prover_qubits,
                              rng_seed=args.seed)
    _, seesaw = oracle.see_saw_prover(work, cfg)
    report = _base_report(args, "omega")
    report.update({
        "omega_sdp": omega_sdp,
        "dual": sol.dual_value,
        "gap": sol.gap,
        "seesaw": seesaw,
        "solver": sol.solver,
        "max_residual": sol.max_residual,
        "bracket_tol": args.tol,
        "bracket_ok": abs(omega_sdp - seesaw) <= args.tol,
    })
    _emit(report, args)
    return EXIT_OK if report["bracket_ok"] else EXIT_DISAGREE


_TRANSFORMS = {
    "perfect_completeness": (
        protocols.perfect_completeness_transform, ("c", "s"),
        lambda spec, p: {"no_side_bound": 1 - (p["c"] - p["s"]) ** 2 / 2}),
    "sequential_repetition": (
        protocols.sequential_repetition, ("r",),
        lambda spec, p: {"accept_count_required": p["r"]}),
    "parallel_repetition": (
        protocols.parallel_repetition, ("k",),
        lambda spec, p: {"value_relation": f"omega^{p['k']}"}),
    "turn_halving": (
        protocols.turn_halving, (),
        lambda spec, p: {"soundness_bound": "(1+sqrt(omega))/2"}),
    "single_coin_qmaml": (
        protocols.single_coin_qmaml, (),
        lambda spec, p: {"soundness_bound": "(1+sqrt(omega))/2"}),
}


def cmd_transform(args) -> int:
    spec = circuits.spec_from_json(_load_json(args.verifier))
    try:
        pipeline = json.loads(args.pipeline)
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"--pipeline is not valid JSON: {exc}") from exc
    if not isinstance(pipeline, list):
        raise ArgumentError("--pipeline must be a JSON list of stages")
    stages = []
    current = spec
    prev_omega = None
    if not args.skip_omega:
        work = spec if spec.kind != "almost-unitary" else \
            circuits.isometric_lift(spec)
        prev_omega = sdp.omega(work)
    input_omega = prev_omega
    for idx, stage in enumerate(pipeline):
        if not isinstance(stage, dict) or "name" not in stage:
            raise ArgumentError(f"stage {idx} must be an object with 'name'")
        name = stage["name"]
        if name not in _TRANSFORMS:
            raise ArgumentError(f"stage {idx}: unknown transform {name!r}")
        fn, keys, bound = _TRANSFORMS[name]
        try:
            params = {k: stage[k] for k in keys}
        except KeyError as exc:
            raise ArgumentError(
                f"stage {idx} ({name}): missing parameter {exc}") from exc
        try:
            current = fn(current, **params)
        except (ArgumentError, SizeError, ScopeError, ParameterError) as exc:
            report = _base_report(args, "transform")
            report.update({"failed_stage": idx, "transform": name,
                           "error": str(exc)})
            _emit(report, args)
            return EXIT_SHAPE
        bounds = bound(current, params)
        if prev_omega is not None:
            if name in ("turn_halving", "single_coin_qmaml"):
                bounds["soundness_bound_value"] = \
                    (1 + np.sqrt(prev_omega)) / 2
            elif name == "parallel_repetition":
                bounds["value_relation_value"] = prev_omega ** params["k"]
            elif name == "sequential_repetition":
                bounds["value_relation_value"] = prev_omega ** params["r"]
        entry = {"index": idx, "transform": name, "params": params,
                 "turns": current.turns,
                 "q_M": current.q_M, "q_W": current.q_W,
                 "bound": bounds}
        if not args.skip_omega:
            work = current
            if work.kind == "almost-unitary":
                work = circuits.isometric_lift(work)
            entry["omega"] = sdp.omega(work)
            prev_omega = entry["omega"]
        stages.append(entry)
    report = _base_report(args, "transform")
    report.update({"input_turns": spec.turns, "input_omega": input_omega,
                   "stages": stages,
                   "final_spec": circuits.spec_to_json(current)})
    _emit(report, args)
    return EXIT_OK


def cmd_sat(args) -> int:
    formula = protocols.parse_dimacs(_load_text(args.formula))
    rng = np.random.default_rng(args.seed)
    report = _base_report(args, "sat")
    report.update({"num_vars": formula.num_vars,
                   "num_clauses": formula.num_clauses,
                   "encoding_bits": formula.bits,
                   "multiset_size": formula.ell})
    if args.assignment is not None:
        bits = args.assignment.strip()
        if len(bits) != formula.num_vars or set(bits) - {"0", "1"}:
            raise ArgumentError(
                f"assignment must be {formula.num_vars} bits of 0/1")
        assignment = tuple(b == "1" for b in bits)
        params = protocols.choose_fingerprint_params(
            formula.bits, formula.ell, rng)
        if not formula.satisfied_by(assignment):
            report.update({"mode": "honest", "accepted": False,
                           "reason": "assignment does not satisfy formula"})
            _emit(report, args)
            return EXIT_REJECT
        transcript = protocols.honest_3sat_prover(formula, assignment)
        ok, why = protocols.run_3sat_transcript(
            formula, params, transcript["phase1"], transcript["phase2"])
        report.update({
            "mode": "honest", "accepted": ok, "reason": why,
            "params": {"p": params.p, "r": params.r},
            "transcript": {
                "phase1": [[lit, ci, bool(v)]
                           for lit, ci, v in transcript["phase1"]],
                "phase2": [[lit, ci, bool(v)]
                           for lit, ci, v in transcript["phase2"]],
            }})
        _emit(report, args)
        return EXIT_OK if ok else EXIT_REJECT
    if args.samples is None:
        raise ArgumentError("need --assignment or --samples")
    if args.samples < 1:
        raise ArgumentError("--samples must be positive")
    study = protocols.sat_soundness_study(formula, args.samples, rng)
    report.update({"mode": "soundness", **study})
    _emit(report, args)
    return EXIT_OK if study["acceptance_rate"] >= 1.0 else EXIT_REJECT


def cmd_sac1(args) -> int:
    circuit = protocols.sac1_from_json(_load_json(args.circuit))
    bits = args.input.strip()
    if set(bits) - {"0", "1"}:
        raise ArgumentError("input must be a bit string")
    x = tuple(b == "1" for b in bits)
    value = protocols.sac1_game_value(circuit, x)
    report = _base_report(args, "sac1")
    report.update({"depth": circuit.depth,
                   "game_value": {"num": value.numerator,
                                  "den": value.denominator},
                   "game_value_float": float(value),
                   "satisfied": value == 1})
    _emit(report, args)
    return EXIT_OK if value == 1 else EXIT_REJECT


def cmd_statetest(args) -> int:
    inst = statetest.instance_from_json(_load_json(args.instance))
    decision = statetest.decide_indivprod(inst)
    lower, upper, exact = statetest.product_distance_bounds(inst)
    report = _base_report(args, "statetest")
    report.update({"verdict": decision.verdict,
                   "distances": decision.distances,
                   "witness_index": decision.witness_index,
                   "reason": decision.report,
                   "product_lower": lower, "product_upper": upper,
                   "product_exact": exact,
                   "alpha": inst.alpha, "delta": inst.delta, "k": inst.k})
    _emit(report, args)
    if decision.verdict == "yes":
        return EXIT_OK
    if decision.verdict == "no":
        return EXIT_REJECT
    return EXIT_PROMISE


def cmd_witness(args) -> int:
    spec = circuits.spec_from_json(_load_json(args.verifier))
    data = _load_json(args.witness)
    try:
        u = data["u"]
        blocks = [linalg.mat_from_json(b) for b in data["blocks"]]
        threshold = float(data["c"] if args.threshold is None
                          else args.threshold)
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"malformed witness file: {exc}") from exc
    accepted, reason = sdp.check_np_witness(spec, u, blocks, threshold)
    report = _base_report(args, "witness")
    report.update({"accepted": accepted, "reason": reason,
                   "threshold": threshold, "branch": u})
    _emit(report, args)
    return EXIT_OK if accepted else EXIT_REJECT


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qiplab",
        description="Space-bounded quantum interactive proof toolkit")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, default=linalg.TOL_SOLVER)
    parser.add_argument("--caps", type=str, default=None,
                        help="comma list: q_mw,measure,turns,dim")
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--format", choices=["json"], default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("omega", help="SDP value with see-saw bracket")
    p.add_argument("verifier")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--prover-qubits", type=int, default=None)
    p.set_defaults(fn=cmd_omega)

    p = sub.add_parser("transform", help="apply a transform pipeline")
    p.add_argument("verifier")
    p.add_argument("--pipeline", required=True,
                   help='JSON list, e.g. [{"name":"turn_halving"}]')
    p.add_argument("--skip-omega", action="store_true")
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("sat", help="3-SAT fingerprint protocol")
    p.add_argument("formula", help="DIMACS CNF file")
    p.add_argument("--assignment", type=str, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(fn=cmd_sat)

    p = sub.add_parser("sac1", help="circuit game value")
    p.add_argument("circuit", help="circuit JSON file")
    p.add_argument("--input", required=True)
    p.set_defaults(fn=cmd_sac1)

    p = sub.add_parser("statetest", help="product-state distinguishability")
    p.add_argument("instance", help="instance JSON file")
    p.set_defaults(fn=cmd_statetest)

    p = sub.add_parser("witness", help="check a branch witness")
    p.add_argument("verifier")
    p.add_argument("witness")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(fn=cmd_witness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ARGS if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ArgumentError, ValidationError, ParameterError) as exc:
        print(json.dumps({"schema": SCHEMA, "command": args.command,
                          "error": str(exc)}), file=sys.stderr)
        return EXIT_ARGS
    except (ScopeError, SizeError) as exc:
        print(json.dumps({"schema": SCHEMA, "command": args.command,
                          "error": str(exc)}), file=sys.stderr)
        return EXIT_SHAPE
    except QiplabError as exc:
        print(json.dumps({"schema": SCHEMA, "command": args.command,
                          "error": str(exc)}), file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
