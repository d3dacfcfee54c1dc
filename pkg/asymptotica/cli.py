# asymptotica/cli.py
"""Command-line front end.

    analyze <file> [--out p]        full report of a channel file
    spectrum <file>                 spectrum fragment only
    synthesize <spec> --out <file>  channel with declared asymptotics, plus sidecar
    roundtrip <spec> | --random n --dmax d [--jobs j]

Exit codes: 0 success, 2 invalid input, 3 structural violation or mismatch.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Optional, Sequence, Tuple

from asymptotica.services.analysis_service import RoundTripReport, analysis_service
from asymptotica.services.channel_io import channel_document, parse_file, parse_spec_file, sidecar_path, write_spec
from asymptotica.services.unfolder import random_unfold_spec, unfold
from asymptotica.utils.config import RunSettings, Tolerances, load_config
from asymptotica.utils.errors import StructuralError
from asymptotica.utils.matrix_json import dump_json

logger = logging.getLogger("asymptotica")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STRUCTURE = 3

TOLERANCE_FLAGS = ("eps_mat", "eps_eig", "eps_cluster", "eps_per", "eps_supp", "eps_faith", "eps_alg")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with 'tolerances' and 'settings' sections")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized checks (env ASYMPTOTICA_SEED)")
    common.add_argument("--verbose", "-v", action="store_true")
    for name in TOLERANCE_FLAGS:
        common.add_argument("--" + name.replace("_", "-"), dest=name, type=float, default=None)

    parser = argparse.ArgumentParser(prog="asymptotica", description="Asymptotic structure of quantum channels")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", parents=[common], help="analyze a channel file")
    analyze.add_argument("file")
    analyze.add_argument("--out", help="write the report here instead of stdout")

    spectrum = sub.add_parser("spectrum", parents=[common], help="spectrum fragment of a channel file")
    spectrum.add_argument("file")

    synthesize = sub.add_parser("synthesize", parents=[common], help="unfold a spec into a channel file")
    synthesize.add_argument("spec")
    synthesize.add_argument("--out", required=True)
    synthesize.add_argument("--repr", dest="representation", choices=["super", "choi", "kraus"], default="super")

    roundtrip = sub.add_parser("roundtrip", parents=[common], help="synthesize, analyze and compare")
    roundtrip.add_argument("spec", nargs="?")
    roundtrip.add_argument("--truth", help="declared structure to compare against (defaults to the spec)")
    roundtrip.add_argument("--random", type=int, default=None, help="number of random specs")
    roundtrip.add_argument("--dmax", type=int, default=8)
    roundtrip.add_argument("--jobs", type=int, default=1)
    return parser


def resolve_config(args: argparse.Namespace) -> Tuple[Tolerances, RunSettings]:
    overrides = {name: getattr(args, name) for name in TOLERANCE_FLAGS}
    return load_config(args.config, overrides, {"seed": args.seed})


def emit(payload: str, out: Optional[str] = None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(payload + "\n")
    else:
        sys.stdout.write(payload + "\n")


def cmd_analyze(args: argparse.Namespace, tol: Tolerances, settings: RunSettings) -> int:
    channel = parse_file(args.file, tol)
    report = analysis_service.analyze(channel, tol, settings)
    emit(report.model_dump_json(indent=1), args.out)
    s = report.structure
    print(
        f"{args.file}: h0={s.h0_dim} h1={s.h1_dim} blocks={[(b.d1, b.d2) for b in s.blocks]} "
        f"attractor_dim={s.attractor_dim} peripherally_automorphic={report.choi_effros.peripherally_automorphic}",
        file=sys.stderr,
    )
    if not report.passed:
        for c in report.checks:
            if not c.passed:
                print(f"  FAILED {c.name}: margin {c.margin:.3e} (tolerance {c.tolerance:.1e})", file=sys.stderr)
        return EXIT_STRUCTURE
    return EXIT_OK


def cmd_spectrum(args: argparse.Namespace, tol: Tolerances, settings: RunSettings) -> int:
    channel = parse_file(args.file, tol)
    emit(json.dumps(analysis_service.spectrum_fragment(channel, tol), indent=1))
    return EXIT_OK


def cmd_synthesize(args: argparse.Namespace, tol: Tolerances, settings: RunSettings) -> int:
    spec = parse_spec_file(args.spec)
    channel = unfold(spec, tol)
    dump_json(channel_document(channel, args.representation), args.out)
    write_spec(spec, sidecar_path(args.out))
    print(f"Wrote d={channel.dim} channel to {args.out} (truth in {sidecar_path(args.out)})", file=sys.stderr)
    return EXIT_OK


def _roundtrip_random(job: Tuple[int, int, Dict[str, Any], Dict[str, Any]]) -> Dict[str, Any]:
    d_max, seed, tol_values, setting_values = job
    tol, settings = Tolerances(**tol_values), RunSettings(**setting_values)
    spec = random_unfold_spec(d_max, seed, tol)
    try:
        report = analysis_service.roundtrip(spec, tol, settings)
    except RuntimeError as e:
        invariant = getattr(e, "invariant", type(e).__name__)
        report = RoundTripReport(checks=[], mismatches=[f"{invariant}: {e}"], passed=False, seed=seed)
    return report.model_dump()


def _print_roundtrip(report: Dict[str, Any]) -> None:
    verdict = "PASS" if report["passed"] else "FAIL"
    print(f"[{verdict}] seed={report['seed']}", file=sys.stderr)
    for c in report["checks"]:
        print(f"  {c['name']}: {c['margin']:.3e} (tolerance {c['tolerance']:.1e})", file=sys.stderr)
    for m in report["mismatches"]:
        print(f"  mismatch: {m}", file=sys.stderr)


def cmd_roundtrip(args: argparse.Namespace, tol: Tolerances, settings: RunSettings) -> int:
    if args.random is not None:
        jobs = [(args.dmax, settings.seed + i, tol.model_dump(), settings.model_dump()) for i in range(args.random)]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                reports = list(pool.map(_roundtrip_random, jobs))
        else:
            reports = [_roundtrip_random(job) for job in jobs]
    else:
        if not args.spec:
            raise ValueError("roundtrip needs a spec file or --random")
        spec = parse_spec_file(args.spec)
        truth = parse_spec_file(args.truth) if args.truth else spec
        result = analysis_service.analyze_structure(unfold(spec, tol), tol, settings)
        reports = [analysis_service.compare(truth, result, tol, settings).model_dump()]

    for report in reports:
        _print_roundtrip(report)
    passed = sum(r["passed"] for r in reports)
    emit(json.dumps({"passed": passed, "total": len(reports), "reports": reports}, indent=1))
    return EXIT_OK if passed == len(reports) else EXIT_STRUCTURE


COMMANDS = {
    "analyze": cmd_analyze,
    "spectrum": cmd_spectrum,
    "synthesize": cmd_synthesize,
    "roundtrip": cmd_roundtrip,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logger.debug(f"Running {args.command}")
    try:
        tol, settings = resolve_config(args)
        return COMMANDS[args.command](args, tol, settings)
    except (StructuralError, RuntimeError) as e:
        invariant = getattr(e, "invariant", type(e).__name__)
        print(f"error: structural violation [{invariant}]: {e}", file=sys.stderr)
        return EXIT_STRUCTURE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
