"""Command line entry point: seeded scenario runs, sweeps, and replay.

Reports are tab-separated with 12-significant-digit numbers and embed the
canonical scenario text, so `run --replay report.tsv` can regenerate the run
from nothing but the report and verify it byte for byte.

Exit codes: 0 all tests passed (or none configured), 1 a configured test or
replay comparison failed, 2 input error.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .errors import CollapseSimError
from .harness import chi_square_test, make_runner, run_trials, asymmetry_sweep
from .scenario import (
    ScenarioFile,
    constants_of,
    expected_of,
    harness_config,
    harness_params,
    parse_scenario,
    render_scenario,
)

ECHO_PREFIX = "|\t"


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _record_lines(records) -> list[str]:
    lines = []
    for mi, rec in enumerate(records, start=1):
        lines.append(f"measurement\t{mi}")
        for si, values in enumerate(rec.outcome, start=1):
            parts = [f"outcome\t{si}"]
            for key in sorted(values):
                v = values[key]
                if isinstance(v, tuple):
                    parts.append(f"{key}\t{' '.join(_fmt(float(c)) for c in v)}")
                else:
                    parts.append(f"{key}\t{_fmt(float(v))}")
            lines.append("\t".join(parts))
        lines.append(f"detector\t{rec.detector_bin}\t{rec.detector_label}")
        lines.append("record_seed\t" + " ".join(str(s) for s in _flatten(rec.seed)))
        lines.append("draws\t" + " ".join(_fmt(u) for u in rec.draws))
    return lines


def _flatten(key):
    out = []
    for part in key:
        if isinstance(part, (tuple, list)):
            out.extend(part)
        else:
            out.append(part)
    return out


def build_report(sf: ScenarioFile, trials: int, seed: int, alpha: float,
                 sweep: tuple[str, tuple[float, ...]] | None = None) -> tuple[str, bool]:
    """Render the full run report; returns (text, all_tests_passed)."""
    constants = constants_of(sf)
    params = harness_params(sf)
    lines = [
        f"collapse-sim-report\t{__version__}",
        f"scenario\t{sf.name}",
        f"kind\t{sf.kind}",
        f"trials\t{trials}",
        f"seed\t{seed}",
        f"alpha\t{_fmt(alpha)}",
    ]
    ok = True
    if sweep is not None:
        param, values = sweep
        lines.append(f"sweep\t{param}\t{','.join(_fmt(v) for v in values)}")
        report = asymmetry_sweep(sf.kind, param, values, trials, seed,
                                 params=params, constants=constants)
        lines.append("[sweep]")
        lines.append("value\tpeak_metric\tstd_error")
        for v, m, se in zip(report.values, report.metrics, report.std_errors):
            lines.append(f"{_fmt(v)}\t{_fmt(m)}\t{_fmt(se)}")
        lines.append(f"monotonic\tnondecreasing\t{str(report.nondecreasing).lower()}")
    else:
        hist = run_trials(sf.kind, params, trials, seed, constants)
        lines.append("[histogram]")
        lines.append("label\tcount\tfrequency")
        for label, count in hist.bins:
            lines.append(f"{label}\t{count}\t{_fmt(count / hist.total)}")
        expected = expected_of(sf)
        lines.append("[tests]")
        if expected is None:
            lines.append("none\tconfigured")
        else:
            res = chi_square_test(hist, expected, alpha)
            verdict = "pass" if res.passed else "fail"
            ok = ok and res.passed
            lines.append(
                f"chi_square\tstatistic\t{_fmt(res.statistic)}\tdf\t{res.df}"
                f"\tcritical\t{_fmt(res.critical)}\tverdict\t{verdict}")
        records = make_runner(sf.kind, params, constants).records0(seed)
        lines.append("[record]")
        if records:
            lines.extend(_record_lines(records))
        else:
            lines.append("none\t(scenario keeps no measurement record)")
    lines.append("[echo]")
    for echo_line in render_scenario(sf).splitlines():
        lines.append(ECHO_PREFIX + echo_line)
    lines.append("end")
    return "\n".join(lines) + "\n", ok


def _resolve_run_inputs(args) -> tuple[ScenarioFile, int, int, float]:
    try:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CollapseSimError(f"cannot read scenario file: {exc}") from exc
    sf = parse_scenario(text)
    cfg = harness_config(sf)
    trials = args.trials if args.trials is not None else cfg.get("trials")
    if trials is None or trials < 1:
        raise CollapseSimError("no positive trial count given (--trials or [harness] trials)")
    seed = args.seed
    if seed is None:
        seed = cfg.get("seed")
    if seed is None and os.environ.get("COLLAPSE_SIM_SEED"):
        try:
            seed = int(os.environ["COLLAPSE_SIM_SEED"])
        except ValueError:
            raise CollapseSimError("COLLAPSE_SIM_SEED must be an integer") from None
    if seed is None:
        raise CollapseSimError(
            "no seed given (--seed, [harness] seed, or COLLAPSE_SIM_SEED)")
    return sf, int(trials), int(seed), cfg["alpha"]


def _parse_sweep(spec: str) -> tuple[str, tuple[float, ...]]:
    if "=" not in spec:
        raise CollapseSimError("--sweep expects PARAM=v1,v2,...")
    param, _, rest = spec.partition("=")
    try:
        values = tuple(float(v) for v in rest.split(",") if v != "")
    except ValueError:
        raise CollapseSimError(f"non-numeric sweep value in {rest!r}") from None
    if len(values) < 2:
        raise CollapseSimError("--sweep needs at least two values")
    return param.strip(), values


def _replay(path: str) -> int:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            stored = fh.read()
    except OSError as exc:
        print(f"error: cannot read report: {exc}", file=sys.stderr)
        return 2
    header: dict[str, str] = {}
    echo_lines = []
    sweep = None
    for line in stored.splitlines():
        if line.startswith(ECHO_PREFIX):
            echo_lines.append(line[len(ECHO_PREFIX):])
        elif "\t" in line and not line.startswith("["):
            parts = line.split("\t")
            header.setdefault(parts[0], parts[1] if len(parts) > 1 else "")
            if parts[0] == "sweep":
                sweep = (parts[1], tuple(float(v) for v in parts[2].split(",")))
    try:
        sf = parse_scenario("\n".join(echo_lines))
        trials = int(header["trials"])
        seed = int(header["seed"])
        alpha = float(header["alpha"])
    except (KeyError, ValueError, CollapseSimError) as exc:
        print(f"error: report is not replayable: {exc}", file=sys.stderr)
        return 2
    regenerated, _ = build_report(sf, trials, seed, alpha, sweep)
    if regenerated == stored:
        print(f"replay\t{path}\tbyte-identical")
        return 0
    print(f"replay\t{path}\tMISMATCH", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="collapse-sim",
        description="Stochastic simulator of the functional measurement-process model")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file (or replay a report)")
    run.add_argument("--scenario", help="path to a scenario file")
    run.add_argument("--trials", type=int, help="number of trials (overrides [harness])")
    run.add_argument("--seed", type=int, help="master seed (overrides [harness])")
    run.add_argument("--sweep", help="PARAM=v1,v2,... peak-metric sweep")
    run.add_argument("--out", help="also write the report to this path")
    run.add_argument("--replay", help="verify a stored report byte-for-byte")

    args = parser.parse_args(argv)
    if args.replay:
        return _replay(args.replay)
    if not args.scenario:
        print("error: --scenario (or --replay) is required", file=sys.stderr)
        return 2
    try:
        sf, trials, seed, alpha = _resolve_run_inputs(args)
        sweep = _parse_sweep(args.sweep) if args.sweep else None
        report, ok = build_report(sf, trials, seed, alpha, sweep)
    except CollapseSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(report)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(report)
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
