"""Command-line drivers: validate, wmap, simulate, attack, sweep.

Exit codes: 0 success, 1 runtime failure, 2 validation or usage error.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .adversary import AdversarySettings, attack
from .errors import DegenerateRowWarning, MixZoneError
from .scenario import (
    AGGREGATE_COLUMNS,
    REPORT_COLUMNS,
    append_csv,
    effective_defaults,
    format_csv,
    load_scenario,
    report_rows,
    sweep,
    validate_scenario,
    write_scenario,
)
from .traffic import Kind, PairingPolicy, read_trace, write_trace
from .wmap import compute_wmap, plan_activation
from .zone import StateMatrix

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
SCENARIO_COPY = "scenario.json"


class UsageError(Exception):
    pass


def _counts(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text}") from exc


def _matrix_text(m, fmt="{:10.5f}") -> str:
    n = m.shape[1]
    lines = ["        " + "".join(f"{'Gate' + str(j + 1):>10}" for j in range(n))]
    for i, row in enumerate(m):
        lines.append(f"Gate{i + 1:<4}" + "".join(fmt.format(v) for v in row))
    return "\n".join(lines)


def _echo_defaults(scenario, out) -> None:
    for key, value in effective_defaults(scenario).items():
        print(f"default {key} = {value}", file=out)


def _load(path, args=None):
    s = load_scenario(path)
    if args is None:
        return s
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "pairing_policy", None):
        changes["pairing_policy"] = PairingPolicy(args.pairing_policy)
    if getattr(args, "activation", None) is not None:
        changes["activation_enabled"] = args.activation
    if getattr(args, "threshold", None) is not None:
        changes["zone"] = replace(s.zone, wmap_threshold=args.threshold)
    adv = {}
    for flag, key in (("epsilon", "min_probability"), ("dwell", "dwell"), ("horizon", "horizon")):
        if getattr(args, flag, None) is not None:
            adv[key] = getattr(args, flag)
    if adv:
        changes["adversary"] = replace(s.adversary, **adv)
    return validate_scenario(replace(s, **changes)) if changes else s


def cmd_validate(args, out) -> int:
    s = _load(args.scenario)
    print(f"ok: {s.zone.n_gates} gates, capacity {s.zone.lane_capacity}, "
          f"threshold {s.zone.threshold:g}, fingerprint {s.fingerprint}", file=out)
    _echo_defaults(s, out)
    return EXIT_OK


def cmd_wmap(args, out) -> int:
    s = _load(args.scenario, args)
    if args.ingress is not None or args.egress is not None:
        if args.ingress is None or args.egress is None:
            raise UsageError("--ingress and --egress must be given together")
        state = StateMatrix(args.ingress, args.egress)
    elif s.state is not None:
        state = s.state
    else:
        state = StateMatrix.zeros(s.zone.n_gates)
    if state.n != s.zone.n_gates:
        raise UsageError(f"state has {state.n} gates, zone has {s.zone.n_gates}")
    _echo_defaults(s, out)
    wm = compute_wmap(state, s.zone.transition)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateRowWarning)
        plan = plan_activation(wm, state, s.zone)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"state ingress={state.ingress.tolist()} egress={state.egress.tolist()}", file=out)
    print("raw W_MAP", file=out)
    print(_matrix_text(wm.raw, "{:10.4g}"), file=out)
    print("normalized W_MAP", file=out)
    print(_matrix_text(wm.normalized), file=out)
    print(f"threshold {s.zone.threshold:g}", file=out)
    print("triggering pairs " + " ".join(f"({i},{j})" for i, j in sorted(plan.triggers)), file=out)
    for lane, counts in (("ingress", plan.ingress), ("egress", plan.egress)):
        print(f"activate {lane:<7} " + " ".join(
            f"g{g + 1}:{int(c)}" for g, c in enumerate(counts)), file=out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    s = _load(args.scenario, args)
    _echo_defaults(s, out)
    trace = s.simulate()
    outdir = Path(args.out)
    paths = write_trace(trace, outdir)
    write_scenario(s, outdir / SCENARIO_COPY)
    print(f"seed {trace.seed} fingerprint {trace.fingerprint}", file=out)
    print(f"real entities {trace.entities(Kind.REAL)} virtual entities "
          f"{trace.entities(Kind.VIRTUAL)} observations {len(trace.observations)}", file=out)
    print(f"wrote {paths['observations']} and {paths['ground_truth']}", file=out)
    return EXIT_OK


def cmd_attack(args, out) -> int:
    tracedir = Path(args.trace)
    scenario_path = Path(args.scenario) if args.scenario else tracedir / SCENARIO_COPY
    s = _load(scenario_path, args)
    trace = read_trace(tracedir)
    if any(o.gate > s.zone.n_gates for o in trace.observations):
        raise UsageError("trace references gates outside the scenario")
    if not trace.observations:
        rows = []
    else:
        reports = attack(trace, s.zone.transition, s.zone.travel_time, s.adversary)
        rows = report_rows(trace, reports, scenario_id=trace.fingerprint or s.fingerprint,
                           activation=trace.count(Kind.VIRTUAL) > 0)
    if args.report:
        append_csv(rows, REPORT_COLUMNS, args.report)
    out.write(format_csv(rows, REPORT_COLUMNS))
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    s = _load(args.scenario, args)
    values = [v for v in args.values.split(",") if v.strip()]
    runs, aggregate = sweep(s, args.axis, values, args.seeds, jobs=args.jobs)
    if args.runs:
        append_csv(runs, ("axis", "value") + REPORT_COLUMNS, args.runs)
    if args.report:
        append_csv(aggregate, AGGREGATE_COLUMNS, args.report)
    out.write(format_csv(aggregate, AGGREGATE_COLUMNS))
    return EXIT_OK


def _on_off(text: str) -> bool:
    if text.lower() in ("on", "true", "1", "yes"):
        return True
    if text.lower() in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError("expected on/off")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixzone", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    def zone_flags(p):
        p.add_argument("--threshold", type=float, help="override the W_MAP threshold")

    def sim_flags(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--pairing-policy", choices=[m.value for m in PairingPolicy])
        p.add_argument("--activation", type=_on_off, help="on/off")

    def adv_flags(p):
        p.add_argument("--epsilon", type=float, help="prune pairs with exit probability below this")
        p.add_argument("--dwell", type=float, help="seconds added to travel-time supports")
        p.add_argument("--horizon", type=float, help="max seconds between linked observations")

    p = sub.add_parser("wmap", help="print W_MAP and the activation plan")
    p.add_argument("scenario")
    p.add_argument("--ingress", type=_counts, help="comma-separated ingress counts")
    p.add_argument("--egress", type=_counts, help="comma-separated egress counts")
    zone_flags(p)
    p.set_defaults(func=cmd_wmap)

    p = sub.add_parser("simulate", help="generate a trace")
    p.add_argument("scenario")
    p.add_argument("--out", "-o", required=True, help="output directory")
    zone_flags(p)
    sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="link pseudonyms in a trace and report privacy")
    p.add_argument("trace", help="trace directory written by simulate")
    p.add_argument("--scenario", help="scenario file (default: the copy in the trace directory)")
    p.add_argument("--report", help="append report rows to this CSV file")
    adv_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="simulate and attack across an axis and seeds")
    p.add_argument("scenario")
    p.add_argument("--axis", required=True, choices=["arrival_rate", "threshold", "activation"])
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--seeds", type=_positive_int, default=20)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--report", help="append aggregate rows to this CSV file")
    p.add_argument("--runs", help="append per-run rows to this CSV file")
    zone_flags(p)
    sim_flags(p)
    adv_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except (MixZoneError, UsageError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
