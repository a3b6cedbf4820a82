"""Command line entry point: ``repsim run|audit|replay|bench|extrapolate``.

Exit codes: 0 success, 2 audit findings or evidence, 1 errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from repsim.bench import TimingTable, bench_he, extrapolate
from repsim.errors import ReputationError
from repsim.harness import audit, load_scenario, read_log, replay, run
from repsim.he import HeParams

EXIT_OK, EXIT_ERROR, EXIT_FINDINGS = 0, 1, 2


def _emit(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _dirty(report: dict) -> bool:
    return bool(report.get("findings") or report.get("evidence"))


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    result = run(scenario, backend_kind={"sim": "simulation", "lattice": "lattice"}[args.backend])
    if args.log:
        args.log.write_text(result.log_text)
    if args.authority_out:
        _emit(result.authority, args.authority_out)
    _emit(result.report, args.out)
    return EXIT_FINDINGS if _dirty(result.report) else EXIT_OK


def cmd_audit(args) -> int:
    lines = read_log(args.log)
    secrets = json.loads(args.reveal_authority.read_text()) if args.reveal_authority else None
    result = audit(lines, secrets)
    _emit(result, args.out)
    failed = any(c["status"] == "fail" for c in result["checks"])
    return EXIT_FINDINGS if failed or result["evidence"] else EXIT_OK


def cmd_replay(args) -> int:
    lines = read_log(args.log)
    scenario = None
    if args.scenario:
        # the log header carries the seed actually used, which may come from --seed
        scenario = dataclasses.replace(load_scenario(args.scenario), seed=lines[0].get("seed"))
    report = replay(lines, scenario)
    _emit(report, args.out)
    if args.expect:
        return EXIT_OK if json.loads(args.expect.read_text()) == report else EXIT_FINDINGS
    return EXIT_OK


def cmd_bench(args) -> int:
    params = HeParams()
    if args.params:
        d = json.loads(args.params.read_text())
        params = HeParams.from_dict(d.get("he_params", d))
    if args.backend:
        params = dataclasses.replace(params, backend_kind={"sim": "simulation", "lattice": "lattice"}[args.backend])
    table = bench_he(params, args.iters, seed=args.seed)
    _emit(table.to_dict(), args.out)
    return EXIT_OK


def cmd_extrapolate(args) -> int:
    table = TimingTable.from_dict(json.loads(args.timings.read_text()))
    report = extrapolate(table, args.businesses, args.rate, self_rating=not args.no_self_rating)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repsim", description="Encrypted B2B reputation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario")
    p.add_argument("--scenario", type=Path, required=True)
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--backend", choices=("sim", "lattice"), default="sim")
    p.add_argument("--out", type=Path, help="report path (default stdout)")
    p.add_argument("--log", type=Path, help="event log path")
    p.add_argument("--authority-out", type=Path, help="write the authority snapshot for later audits")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="audit an event log")
    p.add_argument("--log", type=Path, required=True)
    p.add_argument("--reveal-authority", type=Path, help="authority snapshot enabling identity cross-checks")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("replay", help="rebuild the report from a log")
    p.add_argument("--log", type=Path, required=True)
    p.add_argument("--scenario", type=Path, help="fail unless the log came from this scenario")
    p.add_argument("--expect", type=Path, help="compare against a saved report, exit 2 on mismatch")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench", help="time the homomorphic and signature operations")
    p.add_argument("--params", type=Path, help="JSON HeParams, or a scenario file")
    p.add_argument("--backend", choices=("sim", "lattice"))
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("extrapolate", help="project capacity from a timing table")
    p.add_argument("--timings", type=Path, required=True)
    p.add_argument("--businesses", type=int, required=True)
    p.add_argument("--rate", type=float, required=True, help="ratings per business per day")
    p.add_argument("--no-self-rating", action="store_true")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_extrapolate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ReputationError, OSError, ValueError, KeyError, TypeError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        print(f"repsim: {code}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
