"""Command-line front end: ``aerlink simulate|check|calibrate|trace-export``."""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import checker, harness
from .errors import AerLinkError, CalibrationError, ConfigurationError, SimulationViolation
from .kernel import NS

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def locate_key(text: str, key_path) -> int | None:
    """1-based line of the innermost key of ``key_path`` in a JSON document."""
    pos = 0
    found = None
    for key in key_path:
        if isinstance(key, int):
            continue
        at = text.find(json.dumps(key), pos)
        if at < 0:
            break
        pos = found = at
    return None if found is None else text.count("\n", 0, found) + 1


def read_workload_doc(path: str) -> tuple[dict, str]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def build_workload(path: str, doc: dict, text: str, seed: int | None) -> harness.Workload:
    try:
        return harness.workload_from_dict(doc, seed)
    except harness.ConfigKeyError as exc:
        line = locate_key(text, exc.key_path) or 1
        raise ConfigurationError(f"{path}:{line}: {exc}") from None


def parse_sweep(arg: str) -> tuple[str, list]:
    key, sep, values = arg.partition("=")
    if not sep or not key or not values:
        raise ConfigurationError(f"--sweep expects KEY=V1,V2,..., got {arg!r}")
    parsed = []
    for raw in values.split(","):
        try:
            parsed.append(json.loads(raw))
        except json.JSONDecodeError:
            parsed.append(raw)
    return key, parsed


def emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_simulate(args) -> int:
    doc, text = read_workload_doc(args.config)
    if args.sweep:
        if args.trace:
            raise ConfigurationError("--trace cannot be combined with --sweep")
        key, values = parse_sweep(args.sweep)
        runs = []
        for value in values:
            variant = harness.apply_override(doc, key, value)
            try:
                w = harness.workload_from_dict(variant, args.seed)
            except harness.ConfigKeyError as exc:
                raise ConfigurationError(f"{args.config}: sweep {key}={value!r}: {exc}") from None
            runs.append({"value": value, "report": harness.run_workload(w).report})
        emit(json.dumps({"sweep": key, "runs": runs}, indent=1, sort_keys=True), args.out)
        return EXIT_OK
    result = harness.run_workload(build_workload(args.config, doc, text, args.seed))
    if args.trace:
        result.write_trace(args.trace)
    emit(harness.dumps_report(result.report), args.out)
    return EXIT_OK


def cmd_trace_export(args) -> int:
    doc, text = read_workload_doc(args.config)
    result = harness.run_workload(build_workload(args.config, doc, text, args.seed))
    rows = result.write_trace(args.trace)
    print(f"{rows} transitions written to {args.trace}", file=sys.stderr)
    return EXIT_OK


def cmd_check(args) -> int:
    bound = checker.ExplorationBound(args.events, args.depth, args.max_states)
    names = checker.MUTATIONS if args.mutation == "all" else [args.mutation]
    reports = []
    failed = False
    for name in names:
        mutations = checker.Mutations.named(name)
        started = time.perf_counter()
        g = checker.explore(bound, mutations)
        verdicts = checker.check_all(g)
        rep = checker.report(verdicts, bound, g, name)
        rep["seconds"] = round(time.perf_counter() - started, 3)
        failed |= not all(v.passed for v in verdicts)
        reports.append(rep)
    out = reports[0] if len(reports) == 1 else {"runs": reports}
    emit(checker.dumps_report(out), args.out)
    return EXIT_VIOLATION if failed else EXIT_OK


def to_ps(ns: float) -> int:
    return int(round(ns * NS))


def cmd_calibrate(args) -> int:
    targets = {"t_sw": to_ps(args.t_sw), "t_req2req": to_ps(args.t_req2req),
               "bidir_req2req": to_ps(args.bidir_req2req)}
    profile = harness.calibrate(**targets, gate_step=to_ps(args.gate_step))
    out = {"delay_profile": profile.as_dict(), "targets_ps": targets}
    if args.verify:
        out["measured_ps"] = harness.measured_aggregates(profile)
    emit(json.dumps(out, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aerlink", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a workload and write the metrics report")
    s.add_argument("--config", required=True, metavar="PATH")
    s.add_argument("--out", metavar="PATH", help="report file (default stdout)")
    s.add_argument("--trace", metavar="PATH", help="also write the CSV trace")
    s.add_argument("--seed", type=int, help="overrides the config seed")
    s.add_argument("--sweep", metavar="KEY=V1,V2,...", help="rerun with a dotted config key set to each value")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("trace-export", help="run a workload and write only the CSV trace")
    t.add_argument("--config", required=True, metavar="PATH")
    t.add_argument("--trace", required=True, metavar="PATH")
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_trace_export)

    c = sub.add_parser("check", help="bounded exploration of the protocol model")
    c.add_argument("--events", type=int, default=2, help="events per side")
    c.add_argument("--depth", type=int, default=2, help="FIFO depth")
    c.add_argument("--max-states", type=int, default=1_000_000)
    c.add_argument("--mutation", default=None,
                   choices=[None, "none", "all", *checker.MUTATIONS], help="seed a fault into the model")
    c.add_argument("--out", metavar="PATH")
    c.set_defaults(func=cmd_check)

    k = sub.add_parser("calibrate", help="fit a delay profile to aggregate timings (ns)")
    k.add_argument("--t-sw", type=float, default=5.0)
    k.add_argument("--t-req2req", type=float, default=31.0)
    k.add_argument("--bidir-req2req", type=float, default=35.0)
    k.add_argument("--gate-step", type=float, default=1.0)
    k.add_argument("--verify", action="store_true", help="re-simulate and report measured aggregates")
    k.add_argument("--out", metavar="PATH")
    k.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SimulationViolation as exc:
        print(f"violation: {exc.verdict}", file=sys.stderr)
        for line in exc.excerpt:
            print(f"  {line}", file=sys.stderr)
        return EXIT_VIOLATION
    except (ConfigurationError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AerLinkError as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
