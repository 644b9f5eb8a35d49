"""Command-line interface: ``slicedvfs {generate,run,compare,calibrate,profile,defaults}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import calibration, model, policy, sim, trace

EXIT_OK = 0
EXIT_ERROR = 1


class CliError(Exception):
    pass


def _write_atomic(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_processor(args) -> model.Processor:
    if getattr(args, "processor", None):
        return model.load_processor(args.processor)
    return model.default_processor()


def _load_table(args, proc: model.Processor) -> policy.PolicyTable:
    if getattr(args, "table", None):
        return policy.load_table(args.table, proc)
    return policy.default_table(proc)


def _read_trace(path: str, fmt: str | None) -> trace.Trace:
    try:
        return trace.read_trace(path, fmt)
    except trace.TraceError as exc:
        raise CliError(f"{path}: {exc}") from None


def _schedule(tr: trace.Trace, spec: str, proc: model.Processor, args) -> policy.Schedule:
    kind, arg = policy.parse_policy(spec)
    if kind == "governor":
        table = _load_table(args, proc)
        return policy.governor(
            tr, table, args.window, proc,
            decision_interval=args.decision_interval,
            noise_std=args.noise,
            seed=args.seed,
        )
    if kind == "static":
        return policy.static_policy(tr, policy.resolve_frequency(arg, proc), proc)
    return policy.oracle_policy(tr, proc, arg)


# -- commands ----------------------------------------------------------------

def cmd_generate(args) -> int:
    if bool(args.preset) == bool(args.phases):
        raise CliError("give exactly one of --preset or --phases")
    if args.preset:
        phases = trace.preset(args.preset)
    else:
        with open(args.phases, encoding="utf-8") as fh:
            try:
                phases = trace.phases_from_json(json.load(fh))
            except json.JSONDecodeError as exc:
                raise CliError(f"{args.phases}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    tr = trace.generate_synthetic(phases, args.seed)
    fmt = args.format or trace.guess_format(args.out)
    data = trace.emit_trace(tr, fmt)
    _write_atomic(args.out, data)
    trace.load_trace(Path(args.out).read_bytes(), fmt)
    print(f"wrote {len(tr)} slices to {args.out} (aggregate MAPI {tr.aggregate_mapi():.5f})")
    return EXIT_OK


def cmd_run(args) -> int:
    proc = _load_processor(args)
    tr = _read_trace(args.trace, args.format)
    schedule = _schedule(tr, args.policy, proc, args)
    report = sim.run(tr, schedule, proc)
    _write_atomic(args.out, report.to_json().encode("utf-8"))
    sim.load_report(args.out)
    freqs = sorted({p.frequency for p in schedule.assignments}, reverse=True)
    print(
        f"{report.policy}: {len(tr)} slices, time {report.total_time:.6f} s, "
        f"energy {report.total_energy:.6f} J, {report.transitions} transitions, "
        f"frequencies {', '.join(f'{f / 1e9:g} GHz' for f in freqs)}"
    )
    return EXIT_OK


def _suite_row(job):
    name, seed, proc, table, window = job
    tr = trace.generate_synthetic(trace.preset(name), seed)
    ref = sim.run(tr, policy.static_policy(tr, proc.f_max, proc), proc)
    gov = sim.run(tr, policy.governor(tr, table, window, proc), proc)
    return sim.summary_row(name, gov, sim.compare(gov, ref))


def cmd_compare(args) -> int:
    if args.suite:
        if args.reports:
            raise CliError("--suite takes no report arguments")
        proc = _load_processor(args)
        table = _load_table(args, proc)
        jobs = [(name, args.seed + i, proc, table, args.window) for i, name in enumerate(trace.PRESETS)]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(_suite_row, jobs))
        else:
            rows = [_suite_row(j) for j in jobs]
        for row in rows:
            print(
                f"{row['trace_id']}: perf_loss / energy_savings: "
                f"{100 * float(row['perf_loss']):.2f}% / {100 * float(row['energy_savings']):.2f}%"
            )
    else:
        if len(args.reports) != 2:
            raise CliError("compare needs POLICY_REPORT and REFERENCE_REPORT (or --suite)")
        policy_report = sim.load_report(args.reports[0])
        ref_report = sim.load_report(args.reports[1])
        comparison = sim.compare(policy_report, ref_report)
        print(f"perf_loss / energy_savings: {comparison}")
        rows = [sim.summary_row(policy_report.trace_fingerprint[:12], policy_report, comparison)]
    if args.out:
        _write_atomic(args.out, sim.summary_csv(rows).encode("utf-8"))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    proc = _load_processor(args)
    if args.simulate == bool(args.profile):
        raise CliError("give exactly one of --profile or --simulate")
    if args.simulate:
        points = calibration.sweep(trace.profiling_suite(args.seed), proc)
    else:
        points = calibration.load_profile(Path(args.profile).read_text(encoding="utf-8"), proc)
    table = calibration.derive_table(points, proc, args.max_loss)
    _write_atomic(args.out, policy.dump_table(table).encode("utf-8"))
    policy.load_table(args.out, proc)
    for i, (hi, p) in enumerate(zip(table.thresholds, table.targets)):
        band = f"[0, {hi:g}]" if i == 0 else f"({table.thresholds[i - 1]:g}, {hi:g}]"
        print(f"  {band} -> {p}")
    return EXIT_OK


def cmd_profile(args) -> int:
    proc = _load_processor(args)
    if args.simulate == bool(args.trace):
        raise CliError("give --trace (repeatable) or --simulate")
    traces = trace.profiling_suite(args.seed) if args.simulate else [
        _read_trace(p, args.format) for p in args.trace
    ]
    points = calibration.sweep(traces, proc)
    text = calibration.emit_profile(points)
    _write_atomic(args.out, text.encode("utf-8"))
    calibration.load_profile(Path(args.out).read_text(encoding="utf-8"), proc)
    print(f"wrote {len(points)} profile points to {args.out}")
    return EXIT_OK


def cmd_defaults(args) -> int:
    proc = _load_processor(args)
    if args.what == "processor":
        text = model.dump_processor(proc)
    else:
        text = policy.dump_table(policy.default_table(proc))
    _write_atomic(args.out, text.encode("utf-8"))
    print(f"wrote default {args.what} config to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicedvfs", description="Timeslice DVFS simulator and policy toolkit."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--processor", help="processor config (JSON); default: built-in Q6600-like model")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("generate", help="write a synthetic trace")
    g.add_argument("--preset", help=f"one of {', '.join(trace.PRESETS)}")
    g.add_argument("--phases", help="JSON list of phase specs")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="simulate one policy on a trace")
    common(r)
    r.add_argument("--trace", required=True)
    r.add_argument("--format", choices=("csv", "json"))
    r.add_argument("--policy", default="governor", help="governor | static:<freq> | oracle[:maxloss]")
    r.add_argument("--table", help="policy table config (JSON)")
    r.add_argument("--window", type=int, default=3, help="predictor history length")
    r.add_argument("--decision-interval", type=int, default=1)
    r.add_argument("--noise", type=float, default=0.0, help="std-dev of MAPI measurement noise")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare two run reports, or run the NAS preset suite")
    common(c)
    c.add_argument("reports", nargs="*", metavar="REPORT")
    c.add_argument("--suite", action="store_true", help="governor vs static f_max on cg/ft/mg/sp")
    c.add_argument("--table")
    c.add_argument("--window", type=int, default=3)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--out", help="summary CSV")
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("calibrate", help="derive a policy table from profiling data")
    common(k)
    k.add_argument("--profile", help="profile CSV (mapi,frequency_hz,slowdown)")
    k.add_argument("--simulate", action="store_true", help="profile the built-in workloads")
    k.add_argument("--max-loss", type=float, default=0.03)
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("profile", help="emit simulated frequency-sweep profile points")
    common(p)
    p.add_argument("--trace", action="append")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--simulate", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_profile)

    d = sub.add_parser("defaults", help="write the default processor or table config")
    common(d, seed=False)
    d.add_argument("what", choices=("processor", "table"))
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_defaults)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
