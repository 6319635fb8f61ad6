"""Command-line front end: ``pilotsim <command> ...``.

Exit codes: 0 success, 1 internal error, 2 usage or domain error. The
``simulate`` command instead exits with a code keyed to the outcome
(see ``OUTCOME_EXIT``).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys

from . import analysis, attacks, duty, profiles, sim, waveform
from .circuit import OPEN, DiodeModel, solve_baseline, solve_parallel, solve_serial
from .states import classify_state

OUTCOME_EXIT = {"normal": 0, "dos": 10, "forced_charging": 11, "error_latched": 12, "rate_reduced": 13}


class UsageError(Exception):
    pass


def _resistance(text: str) -> float:
    if text.lower() in ("open", "inf"):
        return OPEN
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("resistance must be >= 0")
    return value


def _fmt(value, fmt: str):
    if isinstance(value, float) and fmt == "table":
        return "open" if math.isinf(value) else f"{value:.4g}"
    return value


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit(record: dict, args, fh=None) -> None:
    fh = fh or sys.stdout
    if args.format == "json":
        fh.write(json.dumps(record, indent=2, sort_keys=True, default=_json_default) + "\n")
    elif args.format == "csv":
        keys = list(record)
        fh.write(",".join(keys) + "\n")
        fh.write(",".join(str(record[k]) for k in keys) + "\n")
    else:
        width = max(len(k) for k in record) if record else 0
        for k, v in record.items():
            fh.write(f"{k:<{width}}  {_fmt(v, 'table')}\n")


def _json_default(o):
    if isinstance(o, float) and math.isinf(o):
        return "open"
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _jsonable(d: dict) -> dict:
    return {k: ("open" if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}


def cmd_codec(args) -> int:
    if args.direction == "decode":
        reading = duty.duty_to_current(args.value)
        if args.format == "table":
            print(reading.describe())
        else:
            _emit({"duty": args.value, "kind": reading.kind, "amps": reading.amps}, args)
    else:
        d = duty.current_to_duty(args.value)
        if args.format == "table":
            print(f"{d:.4g} %")
        else:
            _emit({"amps": args.value, "duty": d}, args)
    return 0


def cmd_solve(args) -> int:
    ps = profiles.load(args.profiles)
    charger = ps.charger(args.profile)
    ev = ps.ev(args.ev)
    src = analysis.source_for(charger)
    diode = DiodeModel(args.diode_drop)
    if args.attack == "none":
        sol = solve_baseline(src, args.r_v, diode)
    else:
        if args.r_att is None:
            raise UsageError(f"--r-att is required for a {args.attack} attack")
        if args.attack == "serial":
            sol = solve_serial(src, args.r_att, args.r_v, diode)
        else:
            sol = solve_parallel(src, args.r_att, args.r_v, diode)
    record = {
        "attack": args.attack,
        "r_att": args.r_att,
        "r_v": args.r_v,
        **sol.as_dict(),
        "evse_state": classify_state(sol.v_evse, charger).value,
        "ev_state": classify_state(sol.v_ev, ev).value,
    }
    _emit(_jsonable(record), args)
    return 0


def cmd_range(args) -> int:
    ps = profiles.load(args.profiles)
    charger, ev = ps.charger(args.profile), ps.ev(args.ev)
    if args.attack == "parallel":
        rng = analysis.parallel_range(args.goal, charger, ev)
    else:
        rng = analysis.serial_range(args.goal, charger, ev, lam=args.lam)
    d = rng.as_dict()
    if args.format == "table":
        flat = {k: v for k, v in d.items() if k not in ("thresholds", "notes")}
        flat.update({f"threshold.{k}": v for k, v in d["thresholds"].items()})
        for i, note in enumerate(d["notes"]):
            flat[f"note{i + 1}"] = note
        _emit(flat, args)
    else:
        _emit(d, args)
    return 0


def cmd_sweep(args) -> int:
    if args.steps < 0:
        raise UsageError("--steps must be >= 0")
    if args.r_min > args.r_max:
        raise UsageError("--r-min must not exceed --r-max")
    ps = profiles.load(args.profiles)
    charger, ev = ps.charger(args.profile), ps.ev(args.ev)
    if args.steps == 0:
        grid = []
    elif args.steps == 1:
        grid = [args.r_min]
    else:
        step = (args.r_max - args.r_min) / (args.steps - 1)
        grid = [args.r_min + i * step for i in range(args.steps)]
    rows = analysis.sweep(args.attack, grid, charger, ev, args.state, args.follow_ev)
    with _output(args.out) as fh:
        if not rows:
            return 0
        if args.format == "json":
            fh.write(json.dumps(rows, indent=2) + "\n")
        elif args.format == "table":
            fh.write("  ".join(f"{c:>10}" for c in analysis.SWEEP_COLUMNS) + "\n")
            for r in rows:
                fh.write("  ".join(f"{_fmt(r[c], 'table')!s:>10}" for c in analysis.SWEEP_COLUMNS) + "\n")
        else:
            analysis.write_sweep_csv(rows, fh)
    return 0


def _read_signal(path: str) -> waveform.SampledSignal:
    with open(path, newline="") as fh:
        return waveform.read_csv(fh)


def cmd_waveform(args) -> int:
    if args.wave_cmd == "synth":
        p = waveform.PwmParams(duty=args.duty, v_high=args.v_high, v_low=args.v_low, freq=args.freq)
        s = waveform.synthesize(p, args.duration, args.rate)
        with _output(args.out) as fh:
            waveform.write_csv(s, fh)
        return 0
    if args.wave_cmd == "measure":
        m = waveform.measure(_read_signal(args.input))
        _emit(m.as_dict(), args)
        return 0
    # transform
    s = _read_signal(args.input)
    if args.attack == "tlc555":
        att = attacks.Tlc555Attack(r=args.r, c=args.c, level_offset=args.level_offset)
        out = attacks.tlc555_waveform(att, s)
    else:
        v_high = args.design_v_high if args.design_v_high is not None else waveform.measure(s).v_high
        att = attacks.FakeLoadAttack.designed(
            target_duty=args.target_duty, v_high=v_high, tau_dt=args.tau_dt,
            r_f=args.r_f, mode=args.mode,
        )
        out = attacks.fake_load_transform(att, s).ev_side
    with _output(args.out) as fh:
        waveform.write_csv(out, fh)
    return 0


def _find_scenario(ref: str):
    if os.path.exists(ref):
        return ref, None
    name = ref[:-5] if ref.endswith(".json") else ref
    if name in sim.BUNDLED_SCENARIOS:
        return None, name
    raise UsageError(f"no scenario file {ref!r}; bundled: {', '.join(sim.BUNDLED_SCENARIOS)}")


def cmd_simulate(args) -> int:
    path, bundled = _find_scenario(args.scenario)
    if path is not None:
        scenario = sim.load_scenario(path, profiles.load(args.profiles))
    else:
        scenario = sim.bundled_scenario(bundled)
    report = sim.run(scenario)
    summary = sim.classify_outcome(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json(include_trace=not args.no_trace) + "\n")
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            report.write_trace_csv(fh)
    print(summary.line())
    return OUTCOME_EXIT[summary.outcome]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pilotsim", description="J1772 control-pilot attack co-simulator")
    ap.add_argument("--profiles", help="extra profiles JSON overlaid on the bundled ones")
    ap.add_argument("--format", choices=("json", "csv", "table"), default="table")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codec", help="duty cycle <-> advertised current")
    p.add_argument("direction", choices=("encode", "decode"))
    p.add_argument("value", type=float, help="amps for encode, duty percent for decode")
    p.set_defaults(func=cmd_codec)

    p = sub.add_parser("solve", help="steady-state pilot voltages")
    p.add_argument("--attack", choices=("none", "serial", "parallel"), default="none")
    p.add_argument("--r-att", type=_resistance)
    p.add_argument("--r-v", type=_resistance, required=True)
    p.add_argument("--profile", default="charger2")
    p.add_argument("--ev", default="default")
    p.add_argument("--diode-drop", type=float, default=0.0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("range", help="feasible attack resistance range")
    p.add_argument("--attack", choices=("serial", "parallel"), required=True)
    p.add_argument("--goal", required=True, help="B->C, C->F, B->F (parallel); A<-B->C, B<-C->F (serial)")
    p.add_argument("--profile", default="charger2")
    p.add_argument("--ev", default="default")
    p.add_argument("--lambda", dest="lam", type=float, help="override the disparity tolerance (serial)")
    p.set_defaults(func=cmd_range)

    p = sub.add_parser("sweep", help="classified resistance sweep")
    p.add_argument("--attack", choices=("serial", "parallel"), required=True)
    p.add_argument("--r-min", type=float, required=True)
    p.add_argument("--r-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--profile", default="charger2")
    p.add_argument("--ev", default="default")
    p.add_argument("--state", choices=("B", "C"), default="B")
    p.add_argument("--follow-ev", action="store_true", help="EV switches to its C load when it sees C")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_sweep, format_default="csv")

    p = sub.add_parser("waveform", help="PWM synthesis, measurement, attack transforms")
    wsub = p.add_subparsers(dest="wave_cmd", required=True)
    w = wsub.add_parser("synth")
    w.add_argument("--duty", type=float, required=True)
    w.add_argument("--v-high", type=float, default=6.0)
    w.add_argument("--v-low", type=float, default=-12.0)
    w.add_argument("--freq", type=float, default=1000.0)
    w.add_argument("--duration", type=float, default=0.05)
    w.add_argument("--rate", type=float, default=waveform.DEFAULT_RATE)
    w.add_argument("--out", "-o")
    w = wsub.add_parser("measure")
    w.add_argument("input")
    w = wsub.add_parser("transform")
    w.add_argument("input")
    w.add_argument("--attack", choices=("tlc555", "fake_load"), required=True)
    w.add_argument("--r", type=float, default=10_000.0)
    w.add_argument("--c", type=float, default=1.583e-8)
    w.add_argument("--level-offset", type=float, default=0.0)
    w.add_argument("--target-duty", type=float, default=18.42)
    w.add_argument("--design-v-high", type=float, help="pilot high level to design for (default: measured)")
    w.add_argument("--tau-dt", type=float, default=1e-4)
    w.add_argument("--r-f", type=float, default=666.7)
    w.add_argument("--mode", choices=("rc", "ideal"), default="rc")
    w.add_argument("--out", "-o")
    p.set_defaults(func=cmd_waveform)

    p = sub.add_parser("simulate", help="run a scenario file or a bundled scenario by name")
    p.add_argument("scenario")
    p.add_argument("--out", "-o", help="write the JSON report here")
    p.add_argument("--trace", help="write the per-tick trace CSV here")
    p.add_argument("--no-trace", action="store_true", help="omit the trace from the JSON report")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    raw = list(sys.argv[1:] if argv is None else argv)
    try:
        args = ap.parse_args(raw)
    except SystemExit as exc:
        return int(exc.code or 0)
    # sweeps default to CSV unless --format was given explicitly
    if getattr(args, "format_default", None) and not any(a.startswith("--format") for a in raw):
        args.format = args.format_default
    try:
        return args.func(args)
    except (UsageError, duty.DutyDomainError, profiles.UnknownProfile, sim.ScenarioError,
            waveform.SamplingError, ValueError, OSError) as exc:
        print(f"pilotsim: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"pilotsim: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
