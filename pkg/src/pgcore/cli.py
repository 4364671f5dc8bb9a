"""Command-line front end.

Every verb prints a short text report, or a JSON document with ``--json``.
Exit status is 0 for a completed run, 1 when ``compare`` finds the two
sides decided and in disagreement, and 2 for bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import numpy as np

from .config import APPROX, EXACT, SolverConfig
from .coretest import SCHEMA, check_certificate, lindahl_report, pareto_preprocess, test_core_membership
from .economy import as_outcome, validate_economy
from .errors import PgcoreError
from .families import load_economy
from .groundtruth import GridSpec, brute_force_core_test
from .verify import compare

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INPUT = 2

# approx mode with no --kappa uses the sampled estimate times this factor
KAPPA_HEADROOM = 1.1


def parse_point(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _positive(kind):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgcore", description="Core membership in public goods economies.")
    verbs = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--economy", required=True, metavar="PATH", help="economy JSON file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--json", action="store_true", help="emit a JSON report")

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--point", required=True, type=parse_point, metavar="CSV",
                       help="outcome as comma-separated numbers in [0, 1]")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--epsilon", type=_positive(float), default=1e-6)
    solver.add_argument("--tau-dev", type=_positive(float), default=1e-5)
    solver.add_argument("--max-iterations", type=_positive(int), default=50_000)
    solver.add_argument("--mode", choices=(EXACT, APPROX), default=EXACT)
    solver.add_argument("--eps-core", type=_positive(float), help="required with --mode approx")
    solver.add_argument("--kappa", type=_positive(float),
                        help=f"derivative bound for approx mode (default: estimate x {KAPPA_HEADROOM})")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid-res", type=int, default=21, metavar="N")
    grid.add_argument("--margin", type=float, help="default 2/(N-1)")

    verbs.add_parser("check", parents=[common, point, solver], help="run the core membership test")
    verbs.add_parser("pareto", parents=[common, point, solver], help="Pareto preprocessing only")
    lind = verbs.add_parser("lindahl", parents=[common, point], help="Lindahl condition along the ray")
    lind.add_argument("--tol", type=_positive(float), default=1e-6)
    verbs.add_parser("bruteforce", parents=[common, point, grid], help="grid oracle verdict")
    verbs.add_parser("compare", parents=[common, point, solver, grid], help="algorithm against grid oracle")
    val = verbs.add_parser("validate", parents=[common], help="sample concavity and externalities")
    val.add_argument("--samples", type=_positive(int), default=256)
    return parser


def _solver_config(args, oracle) -> SolverConfig:
    kappa = args.kappa
    if args.mode == APPROX:
        if args.eps_core is None:
            raise ValueError("--mode approx requires --eps-core")
        if kappa is None:
            est = validate_economy(oracle, samples=64, seed=args.seed, warn=False).estimated_kappa
            kappa = KAPPA_HEADROOM * est
    return SolverConfig(
        epsilon=args.epsilon,
        tau_dev=args.tau_dev,
        max_iterations=args.max_iterations,
        seed=args.seed,
        mode=args.mode,
        eps_core=args.eps_core if args.mode == APPROX else None,
        kappa=kappa if args.mode == APPROX else None,
    )


def _grid(args) -> GridSpec:
    return GridSpec(args.grid_res, args.margin)


def _fmt(x) -> str:
    return "(" + ", ".join(f"{v:.6g}" for v in np.asarray(x, dtype=float)) + ")"


def _one_based(coalition) -> str:
    return "{" + ", ".join(str(i + 1) for i in coalition) + "}"


def _run_check(args, oracle, a):
    verdict = test_core_membership(oracle, a, _solver_config(args, oracle))
    lines = [f"status: {verdict.status}", f"point: {_fmt(a)}"]
    if verdict.deviation is not None:
        coalition, point = verdict.deviation
        lines.append(f"deviation: coalition {_one_based(coalition)} to {_fmt(point)}")
    if verdict.improving_direction is not None:
        lines.append(f"improving direction: {_fmt(verdict.improving_direction)}")
    for e in verdict.elimination_trace:
        lines.append(f"round {e.round}: remove agent {e.agent + 1} (ratio {e.ratio:.6g})")
    lines.append(f"programs solved: {verdict.programs_solved}, skipped: {verdict.programs_skipped}")
    lines.append(f"certificate valid: {check_certificate(oracle, verdict)}")
    lines += [f"note: {n}" for n in verdict.notes]
    return verdict.to_dict(), lines, EXIT_OK


def _run_pareto(args, oracle, a):
    res = pareto_preprocess(oracle, a, _solver_config(args, oracle))
    lines = [f"pareto efficient: {res.efficient}"]
    if res.direction is not None:
        lines.append(f"improving direction: {_fmt(res.direction)}")
    lines.append(f"programs solved: {res.programs_solved}, skipped: {res.programs_skipped}")
    return res.to_dict(), lines, EXIT_OK


def _run_lindahl(args, oracle, a):
    if not np.any(a > 0):
        doc = {"is_lindahl": None, "skipped": True, "reason": "zero outcome defines no direction"}
        return doc, ["lindahl: skipped (zero outcome defines no direction)"], EXIT_OK
    rep = lindahl_report(oracle, a, args.tol)
    lines = [
        f"lindahl: {rep.is_lindahl}",
        f"derivative along {rep.direction}: {_fmt(rep.derivative)}",
        f"max abs derivative: {rep.norm:.6g}",
    ]
    return rep.to_dict(), lines, EXIT_OK


def _run_bruteforce(args, oracle, a):
    bf = brute_force_core_test(oracle, a, _grid(args))
    decided = {True: "in core", False: "not in core", None: "undecided within margin"}[bf.decided]
    lines = [f"grid verdict: {decided}", f"strongest gain: {bf.strength:.6g} by {_one_based(bf.strongest_coalition)}"]
    if bf.coalition is not None:
        lines.append(f"deviation: coalition {_one_based(bf.coalition)} to {_fmt(bf.point)}")
    return bf.to_dict(), lines, EXIT_OK


def _run_compare(args, oracle, a):
    cmp = compare(oracle, a, _solver_config(args, oracle), _grid(args))
    word = {True: "in core", False: "not in core", None: "undecided"}
    ch = cmp.characterization
    lines = [
        f"algorithm: {cmp.verdict.status} ({word[cmp.algorithm_decided]})",
        f"oracle: {word[cmp.oracle_verdict.decided]} (strength {cmp.oracle_verdict.strength:.6g})",
        f"agreement: {'SKIPPED' if cmp.agreement is None else cmp.agreement}",
        f"characterization: {ch.status} (pareto {ch.pareto}, individually rational "
        f"{ch.individually_rational}, connected {ch.connected})",
    ]
    code = EXIT_MISMATCH if cmp.agreement is False else EXIT_OK
    return cmp.to_dict(), lines, code


def _run_validate(args, oracle, _a):
    rep = validate_economy(oracle, samples=args.samples, seed=args.seed, warn=False)
    lines = [
        f"valid: {rep.valid}",
        f"samples: {rep.samples_checked}",
        f"concavity violations: {len(rep.concavity_violations)}",
        f"externality violations: {len(rep.externality_violations)}",
        f"values outside [0, 1]: {rep.range_violations}",
        f"estimated kappa: {rep.estimated_kappa:.6g}",
    ]
    return rep.to_dict(), lines, EXIT_OK


RUNNERS = {
    "check": _run_check,
    "pareto": _run_pareto,
    "lindahl": _run_lindahl,
    "bruteforce": _run_bruteforce,
    "compare": _run_compare,
    "validate": _run_validate,
}


def run(args: argparse.Namespace, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        oracle = load_economy(args.economy)
        a = as_outcome(args.point, oracle.n) if hasattr(args, "point") else None
        doc, lines, code = RUNNERS[args.verb](args, oracle, a)
    except (PgcoreError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        if args.json:
            out.write(json.dumps({"schema": SCHEMA, "verb": args.verb, "error": type(exc).__name__,
                                  "message": str(exc)}, sort_keys=True) + "\n")
        return EXIT_INPUT
    if args.json:
        out.write(json.dumps({"schema": SCHEMA, "verb": args.verb, "report": doc}, sort_keys=True) + "\n")
    else:
        out.write("\n".join(lines) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
