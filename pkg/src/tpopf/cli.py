"""Command-line interface.

Exit codes: 0 success, 1 solver or power-flow non-convergence, 2 input
errors (unreadable or invalid files, bad flags).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from .io import (
    NetworkFormatError,
    ReplayDiverged,
    load_network,
    network_digest,
    result_document,
    solution_from_document,
    solution_payload,
    verify_against_pf,
    write_iteration_log,
    write_json,
    write_pf_csv,
    write_production_csv,
)
from .network import NetworkValidationError
from .nlp import SolverOptions, solve
from .opf import COUPLINGS, FORMULATIONS, OBJECTIVES, MissingLimit, OpfOptions, build_opf, extract_solution
from .powerflow import PfOptions, bus_vuf, solve_pf
from .scenarios import MODES, HostingStudy, run_hosting

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (recorded in the result)")
    p.add_argument("--tol", type=float, default=None, help="convergence tolerance")
    p.add_argument("--log-iterations", metavar="CSV", help="write the solver iteration log")
    p.add_argument("--out", metavar="JSON", help="result document path (default: stdout)")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--mu0", type=float, default=0.1)
    p.add_argument("--formulation", choices=FORMULATIONS, default="power-voltage")
    p.add_argument("--coupling", choices=COUPLINGS, default="capacity")
    p.add_argument("--export-cap-kw", type=float, default=None, help="per-phase PV output cap")
    p.add_argument("--verify", action="store_true", help="replay the result with a power flow")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tpopf", description="Three-phase power flow and OPF.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network file")
    p.add_argument("network")

    p = sub.add_parser("pf", help="power flow for every period")
    p.add_argument("network")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--csv", metavar="CSV", help="voltages per period/bus/phase")
    _common(p)

    p = sub.add_parser("opf", help="optimal power flow")
    p.add_argument("network")
    p.add_argument("--objective", choices=OBJECTIVES, default="hosting")
    _solver_flags(p)
    _common(p)

    p = sub.add_parser("hosting", help="PV hosting-capacity study")
    p.add_argument("network")
    p.add_argument("--mode", choices=MODES, default="three")
    p.add_argument("--production-csv", metavar="CSV", help="aggregate production per period and phase")
    _solver_flags(p)
    _common(p)

    p = sub.add_parser("verify", help="replay an opf/hosting result with a power flow")
    p.add_argument("result", help="result document written by opf or hosting")
    p.add_argument("--compare-angles", action="store_true")
    _common(p)
    return parser


def _load(path):
    try:
        return load_network(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except (NetworkFormatError, NetworkValidationError) as exc:
        raise InputError(str(exc)) from exc


def _solver_options(args) -> SolverOptions:
    extra = {} if args.tol is None else {"tol": args.tol}
    return SolverOptions(max_iter=args.max_iter, mu0=args.mu0, **extra)


def _emit(doc: dict, args) -> None:
    if args.out:
        write_json(doc, args.out)
    else:
        sys.stdout.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _status_line(doc: dict) -> None:
    print(f"status: {doc['status']}", file=sys.stderr)


def cmd_validate(args) -> int:
    net = _load(args.network)
    print(f"ok: {net.n_bus} buses, {len(net.branches)} branches, {len(net.pv_units)} pv units, horizon {net.horizon}")
    return EXIT_OK


def cmd_pf(args) -> int:
    net = _load(args.network)
    opts = PfOptions(tolerance=args.tol or 1e-8, max_iterations=args.max_iter)
    sol = solve_pf(net, opts=opts)
    config = {"network": network_digest(net), "options": asdict(opts)}
    status = "converged" if sol.all_converged else "not-converged"
    if args.csv:
        write_pf_csv(net, sol.voltages, bus_vuf(sol.voltages), args.csv)
    doc = result_document(
        "pf", config, status, None, int(sol.iterations.max()), None, args.seed,
        {"failed_periods": np.flatnonzero(~sol.converged).tolist(), "mismatch": sol.mismatch},
    )
    _emit(doc, args)
    _status_line(doc)
    return EXIT_OK if sol.all_converged else EXIT_NOT_CONVERGED


def _finish_opf(command, net, sol, args, config, extra=None) -> int:
    if args.log_iterations and sol.report is not None:
        write_iteration_log(sol.report, args.log_iterations)
    error_report = None
    code = EXIT_OK if sol.optimal else EXIT_NOT_CONVERGED
    if args.verify and sol.optimal:
        try:
            error_report = verify_against_pf(net, sol).to_dict()
        except ReplayDiverged as exc:
            print(str(exc), file=sys.stderr)
            code = EXIT_NOT_CONVERGED
    payload = solution_payload(net, sol)
    payload.update(extra or {})
    doc = result_document(command, config, sol.status, sol.objective, sol.iterations, error_report, args.seed, payload)
    _emit(doc, args)
    _status_line(doc)
    return code


def cmd_opf(args) -> int:
    net = _load(args.network)
    options = OpfOptions(
        formulation=args.formulation, objective=args.objective, coupling=args.coupling,
        export_cap_kw=args.export_cap_kw,
    )
    solver = _solver_options(args)
    try:
        prob = build_opf(net, options)
    except MissingLimit as exc:
        raise InputError(str(exc)) from exc
    report = solve(prob.to_nlp(), solver)
    sol = extract_solution(prob, report.x, report)
    config = {"network": network_digest(net), "opf": asdict(options), "solver": asdict(solver)}
    return _finish_opf("opf", net, sol, args, config)


def cmd_hosting(args) -> int:
    net = _load(args.network)
    solver = _solver_options(args)
    study = HostingStudy(net, args.mode, args.seed, args.export_cap_kw, args.coupling, solver)
    try:
        res = run_hosting(study, args.formulation)
    except (NetworkValidationError, MissingLimit) as exc:
        raise InputError(str(exc)) from exc
    if args.production_csv:
        write_production_csv(res.production_kw, args.production_csv)
    config = {
        "network": network_digest(net),
        "mode": args.mode,
        "coupling": args.coupling,
        "formulation": args.formulation,
        "export_cap_kw": args.export_cap_kw,
        "solver": asdict(solver),
    }
    extra = {
        "hosting": {
            "phase_assignment": res.phase_assignment,
            "total_production_kw": res.total_production_kw,
            "production_kw": res.production_kw,
            "binding": {k: [list(t) for t in v] for k, v in sorted(res.binding.items())},
        }
    }
    return _finish_opf("hosting", res.network, res.solution, args, config, extra)


def cmd_verify(args) -> int:
    try:
        with open(args.result) as fh:
            source = json.load(fh)
        net, sol = solution_from_document(source)
    except OSError as exc:
        raise InputError(f"cannot read {args.result}: {exc.strerror}") from exc
    except (ValueError, KeyError, NetworkFormatError, NetworkValidationError) as exc:
        raise InputError(f"{args.result}: {exc}") from exc
    if not sol.optimal:
        raise InputError(f"{args.result}: result status is {sol.status!r}, nothing to verify")
    try:
        report = verify_against_pf(net, sol, compare_angles=args.compare_angles)
    except ReplayDiverged as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NOT_CONVERGED
    config = {"source": source.get("config_hash"), "compare_angles": args.compare_angles}
    doc = result_document(
        "verify", config, "verified", source.get("objective"), source.get("iterations"),
        report.to_dict(), source.get("seed"),
    )
    _emit(doc, args)
    _status_line(doc)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "pf": cmd_pf, "opf": cmd_opf, "hosting": cmd_hosting, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
