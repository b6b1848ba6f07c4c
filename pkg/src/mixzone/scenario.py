"""Scenario files, presets, experiment runs and CSV reports.

A scenario is a JSON document::

    {
      "zone": {
        "n_gates": 4,
        "lane_capacity": 10,
        "transition": [[...], ...],
        "travel_time": {"default": {"min_s": 10, "max_s": 30, "shape": "uniform"},
                        "pairs": [{"entry": 1, "exit": 4, "min_s": 20, "max_s": 40}]},
        "window_duration": 60, "window_step": 5, "wmap_threshold": 0.1
      },
      "arrivals": {"rates": [0.02, 0.02, 0.02, 0.02]},
      "simulation": {"duration": 600, "activation_enabled": true,
                     "pairing_policy": "triggering_pair", "seed": 0},
      "adversary": {"min_probability": 0.0, "dwell": 0.0, "horizon": null},
      "state": {"ingress": [10, 3, 6, 8], "egress": [7, 10, 9, 8]}
    }

Only ``zone.n_gates`` and ``zone.transition`` are required. ``state`` is
optional and only used by the ``wmap`` command.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .adversary import AdversarySettings, PrivacyReport, attack
from .errors import InvalidScenario, MixZoneError, ParseError, ValidationError
from .traffic import ArrivalModel, Kind, PairingPolicy, Trace, simulate
from .zone import (
    StateMatrix,
    TravelTime,
    TravelTimeModel,
    ZoneConfig,
    validate_transition_matrix,
    validate_zone_config,
)

EXAMPLE_STATE = StateMatrix([10, 3, 6, 8], [7, 10, 9, 8])
EXAMPLE_TRANSITION = (
    (0.01, 0.30, 0.30, 0.39),
    (0.19, 0.01, 0.40, 0.40),
    (0.39, 0.10, 0.01, 0.50),
    (0.60, 0.09, 0.30, 0.01),
)

DEFAULTS = {
    "zone.lane_capacity": 10,
    "zone.travel_time": {"default": {"min_s": 10.0, "max_s": 30.0, "shape": "uniform"}},
    "zone.window_duration": 60.0,
    "zone.window_step": 5.0,
    "arrivals.rates": 0.0,
    "simulation.duration": 600.0,
    "simulation.activation_enabled": True,
    "simulation.pairing_policy": PairingPolicy.TRIGGERING_PAIR.value,
    "simulation.seed": 0,
    "adversary.min_probability": 0.0,
    "adversary.dwell": 0.0,
    "adversary.horizon": None,
}


@dataclass(frozen=True)
class Scenario:
    zone: ZoneConfig
    arrivals: ArrivalModel
    duration: float = 600.0
    activation_enabled: bool = True
    pairing_policy: PairingPolicy = PairingPolicy.TRIGGERING_PAIR
    seed: int = 0
    adversary: AdversarySettings = field(default_factory=AdversarySettings)
    state: StateMatrix | None = None
    defaults_applied: tuple[str, ...] = field(default=(), compare=False)

    @property
    def fingerprint(self) -> str:
        """Short hash of everything except the seed."""
        doc = scenario_to_dict(self)
        doc["simulation"].pop("seed")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def with_seed(self, seed: int) -> Scenario:
        return replace(self, seed=int(seed))

    def simulate(self, seed: int | None = None) -> Trace:
        return simulate(
            self.zone,
            self.arrivals,
            self.duration,
            activation_enabled=self.activation_enabled,
            seed=self.seed if seed is None else seed,
            pairing_policy=self.pairing_policy,
            fingerprint=self.fingerprint,
        )

    def attack(self, trace: Trace) -> list[PrivacyReport]:
        return attack(trace, self.zone.transition, self.zone.travel_time, self.adversary)


def validate_scenario(s: Scenario) -> Scenario:
    try:
        zone = validate_zone_config(s.zone)
        if len(s.arrivals.rates) != zone.n_gates:
            raise InvalidScenario(
                f"{len(s.arrivals.rates)} arrival rates for {zone.n_gates} gates"
            )
        if not (math.isfinite(s.duration) and s.duration >= 0):
            raise InvalidScenario(f"duration must be finite and >= 0, got {s.duration}")
        if s.state is not None and s.state.n != zone.n_gates:
            raise InvalidScenario(f"state has {s.state.n} gates, zone has {zone.n_gates}")
    except MixZoneError as exc:
        raise ValidationError(exc) from exc
    return replace(s, zone=zone)


# -- presets ----------------------------------------------------------------

def uniform_transition(n: int, diagonal: float = 0.01) -> np.ndarray:
    """All off-diagonal exits equally likely; ``diagonal`` is the U-turn rate."""
    p = np.full((n, n), (1.0 - diagonal) / (n - 1))
    np.fill_diagonal(p, diagonal)
    return p


def make_zone(
    transition=EXAMPLE_TRANSITION,
    *,
    lane_capacity: int = 10,
    min_s: float = 10.0,
    max_s: float = 30.0,
    window_duration: float = 60.0,
    window_step: float = 5.0,
    wmap_threshold: float | None = None,
) -> ZoneConfig:
    P = validate_transition_matrix(transition)
    return validate_zone_config(
        ZoneConfig(
            n_gates=P.n,
            transition=P,
            travel_time=TravelTimeModel.uniform(P.n, min_s, max_s),
            lane_capacity=lane_capacity,
            window_duration=window_duration,
            window_step=window_step,
            wmap_threshold=wmap_threshold,
        )
    )


def example_scenario(**zone_kwargs) -> Scenario:
    """Four-gate zone with the worked-example movement matrix and state."""
    zone = make_zone(EXAMPLE_TRANSITION, **zone_kwargs)
    return Scenario(zone, ArrivalModel.constant(4, 0.0), state=EXAMPLE_STATE)


def low_traffic_scenario(
    rate: float = 0.02, duration: float = 600.0, transition=EXAMPLE_TRANSITION, **zone_kwargs
) -> Scenario:
    """Sparse traffic: ``rate * window_duration`` arrivals per gate per window."""
    zone = make_zone(transition, **zone_kwargs)
    return Scenario(zone, ArrivalModel.constant(zone.n_gates, rate), duration=duration)


# -- (de)serialization ------------------------------------------------------

def _travel_time_to_dict(tt: TravelTimeModel) -> dict:
    default = tt[0, 0]
    pairs = [
        {"entry": i + 1, "exit": j + 1, **tt[i, j].to_dict()}
        for i in range(tt.n)
        for j in range(tt.n)
        if tt[i, j] != default
    ]
    out = {"default": default.to_dict()}
    if pairs:
        out["pairs"] = pairs
    return out


def _travel_time_from_dict(d: dict, n: int) -> TravelTimeModel:
    if not isinstance(d, dict) or "default" not in d:
        raise ParseError("travel_time needs a 'default' entry", field="zone.travel_time")
    default = TravelTime.from_dict(d["default"])
    grid = [[default] * n for _ in range(n)]
    for k, pair in enumerate(d.get("pairs", [])):
        i, j = int(pair["entry"]) - 1, int(pair["exit"]) - 1
        if not (0 <= i < n and 0 <= j < n):
            raise ParseError(f"gate pair ({i + 1},{j + 1}) out of range",
                             field=f"zone.travel_time.pairs[{k}]")
        grid[i][j] = TravelTime.from_dict(pair)
    return TravelTimeModel(tuple(tuple(r) for r in grid))


def scenario_to_dict(s: Scenario) -> dict:
    z = s.zone
    doc = {
        "zone": {
            "n_gates": z.n_gates,
            "lane_capacity": z.lane_capacity,
            "transition": z.transition.tolist(),
            "travel_time": _travel_time_to_dict(z.travel_time),
            "window_duration": z.window_duration,
            "window_step": z.window_step,
            "wmap_threshold": z.wmap_threshold,
        },
        "arrivals": {"rates": list(s.arrivals.rates)},
        "simulation": {
            "duration": s.duration,
            "activation_enabled": s.activation_enabled,
            "pairing_policy": PairingPolicy(s.pairing_policy).value,
            "seed": s.seed,
        },
        "adversary": {
            "min_probability": s.adversary.min_probability,
            "dwell": s.adversary.dwell,
            "horizon": s.adversary.horizon,
        },
    }
    if s.state is not None:
        doc["state"] = {"ingress": s.state.ingress.tolist(), "egress": s.state.egress.tolist()}
    return doc


_FLAT_LIST = re.compile(r"\[\s*([^\[\]{}]*?)\s*\]", re.S)


def dumps_scenario(s: Scenario) -> str:
    text = json.dumps(scenario_to_dict(s), indent=2)
    # Keep number lists (matrix rows, count vectors) on one line.
    return _FLAT_LIST.sub(lambda m: "[" + ", ".join(x.strip() for x in m.group(1).split(",")) + "]",
                          text) + "\n"


def write_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(s))


def _get(doc: dict, dotted: str, applied: list):
    section, key = dotted.split(".")
    sect = doc.get(section) or {}
    if not isinstance(sect, dict):
        raise ParseError("expected an object", field=section)
    if key in sect:
        return sect[key]
    applied.append(dotted)
    return DEFAULTS[dotted]


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a scenario from a parsed document, filling defaults."""
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a JSON object")
    applied: list[str] = []
    zone_doc = doc.get("zone")
    if not isinstance(zone_doc, dict):
        raise ParseError("missing 'zone' section", field="zone")
    for key in ("n_gates", "transition"):
        if key not in zone_doc:
            raise ParseError("required field missing", field=f"zone.{key}")
    try:
        n = int(zone_doc["n_gates"])
        transition = np.array(zone_doc["transition"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), field="zone") from exc
    try:
        P = validate_transition_matrix(transition)
        travel = _travel_time_from_dict(_get(doc, "zone.travel_time", applied), max(n, 1))
    except ParseError:
        raise
    except MixZoneError as exc:
        raise ValidationError(exc) from exc

    if "wmap_threshold" in zone_doc and zone_doc["wmap_threshold"] is not None:
        threshold = float(zone_doc["wmap_threshold"])
    else:
        threshold = None
        applied.append("zone.wmap_threshold")
    zone = ZoneConfig(
        n_gates=n,
        transition=P,
        travel_time=travel,
        lane_capacity=int(_get(doc, "zone.lane_capacity", applied)),
        window_duration=float(_get(doc, "zone.window_duration", applied)),
        window_step=float(_get(doc, "zone.window_step", applied)),
        wmap_threshold=threshold,
    )
    rates = _get(doc, "arrivals.rates", applied)
    if isinstance(rates, (int, float)):
        rates = [rates] * n
    horizon = _get(doc, "adversary.horizon", applied)
    try:
        arrivals = ArrivalModel(tuple(rates))
        adversary = AdversarySettings(
            min_probability=float(_get(doc, "adversary.min_probability", applied)),
            dwell=float(_get(doc, "adversary.dwell", applied)),
            horizon=None if horizon is None else float(horizon),
        )
        policy = PairingPolicy(_get(doc, "simulation.pairing_policy", applied))
        state = None
        if doc.get("state") is not None:
            st = doc["state"]
            state = StateMatrix(st["ingress"], st["egress"])
    except MixZoneError as exc:
        raise ValidationError(exc) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from exc

    s = Scenario(
        zone=zone,
        arrivals=arrivals,
        duration=float(_get(doc, "simulation.duration", applied)),
        activation_enabled=bool(_get(doc, "simulation.activation_enabled", applied)),
        pairing_policy=policy,
        seed=int(_get(doc, "simulation.seed", applied)),
        adversary=adversary,
        state=state,
        defaults_applied=tuple(applied),
    )
    return validate_scenario(s)


def load_scenario(path) -> Scenario:
    """Read, validate and default-fill a scenario file.

    Raises
    ------
    ParseError
        Malformed JSON (with line number) or a missing/mistyped field.
    ValidationError
        The values parse but break a zone invariant; ``.cause`` has details.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return scenario_from_dict(doc)


def effective_defaults(s: Scenario) -> dict:
    """The defaulted fields of ``s`` with the values actually in use."""
    flat = {}
    doc = scenario_to_dict(s)
    for key in s.defaults_applied:
        section, name = key.split(".")
        flat[key] = doc[section][name]
    if "zone.wmap_threshold" in s.defaults_applied:
        flat["zone.wmap_threshold"] = s.zone.threshold
    return flat


# -- reports ----------------------------------------------------------------

REPORT_COLUMNS = (
    "scenario_id", "seed", "activation", "adversary", "accuracy", "mean_entropy",
    "mean_degree", "decoy_capture_rate", "real_observations", "virtual_observations",
    "real_entities", "virtual_entities",
)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def report_rows(trace: Trace, reports, *, scenario_id: str, activation: bool) -> list[dict]:
    """One row per adversary for a single (scenario, seed) run."""
    counts = {
        "real_observations": trace.count(Kind.REAL),
        "virtual_observations": trace.count(Kind.VIRTUAL),
        "real_entities": trace.entities(Kind.REAL),
        "virtual_entities": trace.entities(Kind.VIRTUAL),
    }
    return [
        {
            "scenario_id": scenario_id,
            "seed": trace.seed,
            "activation": activation,
            "adversary": r.adversary,
            "accuracy": r.linkage_accuracy,
            "mean_entropy": r.mean_entropy,
            "mean_degree": r.mean_degree,
            "decoy_capture_rate": r.decoy_capture_rate,
            **counts,
        }
        for r in reports
    ]


def format_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def append_csv(rows, columns, path) -> None:
    """Append rows to ``path``, writing the header only for a new file."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    text = format_csv(rows, columns)
    if not new:
        text = text.split("\n", 1)[1]
    with open(path, "a", newline="") as fh:
        fh.write(text)


def run_once(s: Scenario, seed: int | None = None) -> tuple[Trace, list[PrivacyReport]]:
    trace = s.simulate(seed)
    return trace, s.attack(trace)


# -- sweeps -----------------------------------------------------------------

AXES = ("arrival_rate", "threshold", "activation")

AGGREGATE_COLUMNS = (
    "scenario_id", "axis", "value", "adversary", "n_seeds",
    "accuracy_mean", "accuracy_std", "entropy_mean", "entropy_std",
    "degree_mean", "degree_std", "decoy_capture_mean", "decoy_capture_std",
    "virtual_observations_mean", "real_observations_mean",
)


def parse_axis_value(axis: str, raw):
    if axis == "activation":
        if isinstance(raw, bool):
            return raw
        key = str(raw).strip().lower()
        if key in ("on", "true", "1", "yes"):
            return True
        if key in ("off", "false", "0", "no"):
            return False
        raise InvalidScenario(f"activation value must be on/off, got {raw!r}")
    try:
        v = float(raw)
    except (TypeError, ValueError) as exc:
        raise InvalidScenario(f"{axis} value {raw!r} is not a number") from exc
    if not math.isfinite(v):
        raise InvalidScenario(f"{axis} value must be finite, got {raw!r}")
    return v


def apply_axis(s: Scenario, axis: str, value) -> Scenario:
    if axis == "activation":
        return replace(s, activation_enabled=bool(value))
    if axis == "arrival_rate":
        return replace(s, arrivals=ArrivalModel.constant(s.zone.n_gates, value))
    if axis == "threshold":
        return validate_scenario(replace(s, zone=replace(s.zone, wmap_threshold=value)))
    raise InvalidScenario(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")


def _cell(args):
    s, seed, value = args
    trace, reports = run_once(s, seed)
    return value, report_rows(trace, reports, scenario_id=s.fingerprint,
                              activation=s.activation_enabled)


def sweep(
    template: Scenario,
    axis: str,
    values,
    seeds: int | list[int],
    *,
    jobs: int = 1,
) -> tuple[list[dict], list[dict]]:
    """Simulate and attack every (value, seed) cell.

    Returns the per-run rows and aggregate rows (mean and standard deviation
    per axis value and adversary).
    """
    if axis not in AXES:
        raise InvalidScenario(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")
    values = [parse_axis_value(axis, v) for v in values]
    if not values:
        raise InvalidScenario("sweep needs at least one axis value")
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    cells = []
    for v in values:
        s = apply_axis(template, axis, v)
        cells.extend((s, seed, v) for seed in seed_list)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell, cells))
    else:
        results = [_cell(c) for c in cells]

    runs, grouped = [], {}
    for value, rows in results:
        for row in rows:
            runs.append({"axis": axis, "value": value, **row})
            grouped.setdefault((value, row["adversary"]), []).append(row)

    def stat(rows, key):
        x = np.array([r[key] for r in rows], dtype=float)
        x = x[~np.isnan(x)]
        if x.size == 0:
            return math.nan, math.nan
        return float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0

    aggregate = []
    for (value, adv), rows in grouped.items():
        acc, ent, deg, cap = (stat(rows, k) for k in
                              ("accuracy", "mean_entropy", "mean_degree", "decoy_capture_rate"))
        aggregate.append({
            "scenario_id": rows[0]["scenario_id"],
            "axis": axis,
            "value": value,
            "adversary": adv,
            "n_seeds": len(rows),
            "accuracy_mean": acc[0], "accuracy_std": acc[1],
            "entropy_mean": ent[0], "entropy_std": ent[1],
            "degree_mean": deg[0], "degree_std": deg[1],
            "decoy_capture_mean": cap[0], "decoy_capture_std": cap[1],
            "virtual_observations_mean": stat(rows, "virtual_observations")[0],
            "real_observations_mean": stat(rows, "real_observations")[0],
        })
    return runs, aggregate
