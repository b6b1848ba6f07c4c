"""Discrete-event traffic through a mix zone, with virtual-transceiver decoys.

Real vehicles arrive at each gate as a Poisson process, draw an exit gate from
the transition matrix and a travel time from the gate pair's distribution, and
leave under a fresh pseudonym. Inside the zone nothing is observed. Every
``window_step`` seconds the controller counts real traffic over the trailing
window, computes W_MAP and, when the defense is on, switches on virtual
transceivers that replay the same enter/change/exit pattern.

Real traffic and decoys draw from independent random streams spawned from the
seed, so toggling the defense leaves the real vehicles untouched.
"""
from __future__ import annotations

import csv
import enum
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateRowWarning, InvalidScenario, ParseError
from .wmap import ActivationPlan, compute_wmap, plan_activation
from .zone import Lane, StateMatrix, TransitionMatrix, ZoneConfig, validate_zone_config

TIME_DECIMALS = 3
OBSERVATION_HEADER = ("time_s", "gate", "lane", "pseudonym")
GROUND_TRUTH_HEADER = ("egress_pseudonym", "ingress_pseudonym", "kind")


class Kind(str, enum.Enum):
    REAL = "real"
    VIRTUAL = "virtual"


class PairingPolicy(str, enum.Enum):
    """Where a decoy's other end goes.

    TRIGGERING_PAIR cycles through the gates of the below-threshold pairs that
    marked the lane; MOST_PROBABLE_EXIT uses the likeliest partner gate from
    the transition matrix.
    """

    TRIGGERING_PAIR = "triggering_pair"
    MOST_PROBABLE_EXIT = "most_probable_exit"


@dataclass(frozen=True, order=True)
class Observation:
    time: float
    gate: int
    lane: Lane
    pseudonym: str

    def to_row(self) -> tuple[str, str, str, str]:
        return (f"{self.time:.{TIME_DECIMALS}f}", str(self.gate), self.lane.value, self.pseudonym)


@dataclass(frozen=True)
class ArrivalModel:
    """Poisson arrival rate (vehicles/second) per gate."""

    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(not np.isfinite(r) or r < 0 for r in rates):
            raise InvalidScenario(f"arrival rates must be finite and >= 0, got {rates}")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def constant(cls, n: int, rate: float) -> ArrivalModel:
        return cls((rate,) * n)


@dataclass(frozen=True)
class Trace:
    """Adversary-visible observations plus hidden ground truth.

    ``ground_truth`` maps each egress pseudonym to its ingress pseudonym and
    ``kinds`` tags every pseudonym as real or virtual.
    """

    observations: tuple[Observation, ...]
    ground_truth: dict = field(default_factory=dict)
    kinds: dict = field(default_factory=dict)
    seed: int | None = None
    fingerprint: str = ""

    def count(self, kind: Kind) -> int:
        """Number of observations of the given kind."""
        return sum(1 for o in self.observations if self.kinds.get(o.pseudonym) is kind)

    def entities(self, kind: Kind | None = None) -> int:
        return sum(
            1 for e in self.ground_truth if kind is None or self.kinds.get(e) is kind
        )

    def by_pseudonym(self) -> dict[str, Observation]:
        return {o.pseudonym: o for o in self.observations}


def sample_exit_gate(entry: int, transition, rng: np.random.Generator) -> int:
    """Draw a 1-based exit gate for a vehicle entering at 1-based ``entry``."""
    p = transition.p if isinstance(transition, TransitionMatrix) else np.asarray(transition)
    cdf = np.cumsum(p[entry - 1])
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(k, len(cdf) - 1) + 1


def extract_state(
    observations, kinds: dict, t: float, window_duration: float, n_gates: int
) -> StateMatrix:
    """Real-vehicle lane counts over the closed window ``[t - window_duration, t]``.

    Virtual observations are skipped: the controller knows its own decoys.
    """
    ingress = np.zeros(n_gates, dtype=int)
    egress = np.zeros(n_gates, dtype=int)
    lo = t - window_duration
    for o in observations:
        if not (lo <= o.time <= t) or kinds.get(o.pseudonym, Kind.REAL) is not Kind.REAL:
            continue
        if o.lane is Lane.INGRESS:
            ingress[o.gate - 1] += 1
        else:
            egress[o.gate - 1] += 1
    return StateMatrix(ingress, egress)


class _PseudonymIssuer:
    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._issued: set[str] = set()

    def __call__(self) -> str:
        while True:
            p = f"{int(self._rng.integers(0, 2**48)):012x}"
            if p not in self._issued:
                self._issued.add(p)
                return p


def _round_time(t: float) -> float:
    return round(float(t), TIME_DECIMALS)


def _travel(tt, rng) -> float:
    # Keep the rounded duration inside the support so pairing stays sound.
    return min(max(_round_time(tt.sample(rng)), tt.min_s), tt.max_s)


def simulate(
    zone: ZoneConfig,
    arrivals: ArrivalModel,
    duration: float,
    *,
    activation_enabled: bool = True,
    seed: int = 0,
    pairing_policy: PairingPolicy | str = PairingPolicy.TRIGGERING_PAIR,
    fingerprint: str = "",
) -> Trace:
    """Run the mix zone for ``duration`` seconds and return the trace."""
    try:
        zone = validate_zone_config(zone)
    except ValueError as exc:
        raise InvalidScenario(str(exc)) from exc
    if len(arrivals.rates) != zone.n_gates:
        raise InvalidScenario(
            f"{len(arrivals.rates)} arrival rates for {zone.n_gates} gates"
        )
    if not duration >= 0:
        raise InvalidScenario(f"duration must be >= 0, got {duration}")
    policy = PairingPolicy(pairing_policy)

    traffic_ss, decoy_ss, id_ss = np.random.SeedSequence(seed).spawn(3)
    traffic_rng = np.random.default_rng(traffic_ss)
    decoy_rng = np.random.default_rng(decoy_ss)
    issue = _PseudonymIssuer(np.random.default_rng(id_ss))
    n = zone.n_gates
    P = zone.transition

    observations: list[Observation] = []
    ground_truth: dict[str, str] = {}
    kinds: dict[str, Kind] = {}

    def add_entity(t_in, g_in, t_out, g_out, kind):
        p_in, p_out = issue(), issue()
        observations.append(Observation(t_in, g_in, Lane.INGRESS, p_in))
        observations.append(Observation(t_out, g_out, Lane.EGRESS, p_out))
        ground_truth[p_out] = p_in
        kinds[p_in] = kinds[p_out] = kind

    for g in range(1, n + 1):
        rate = arrivals.rates[g - 1]
        if rate <= 0:
            continue
        t = 0.0
        while True:
            t += traffic_rng.exponential(1.0 / rate)
            if t >= duration:
                break
            t_in = _round_time(t)
            exit_gate = sample_exit_gate(g, P, traffic_rng)
            dt = _travel(zone.travel_time[g - 1, exit_gate - 1], traffic_rng)
            add_entity(t_in, g, _round_time(t_in + dt), exit_gate, Kind.REAL)

    if activation_enabled:
        real = list(observations)
        times = np.array([o.time for o in real])
        gates = np.array([o.gate - 1 for o in real], dtype=int)
        is_in = np.array([o.lane is Lane.INGRESS for o in real], dtype=bool)
        last_pad = {}
        k = 1
        while k * zone.window_step <= duration:
            now = k * zone.window_step
            k += 1
            if real:
                sel = (times >= now - zone.window_duration) & (times <= now)
                state = StateMatrix(
                    np.bincount(gates[sel & is_in], minlength=n),
                    np.bincount(gates[sel & ~is_in], minlength=n),
                )
            else:
                state = StateMatrix.zeros(n)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateRowWarning)
                plan = plan_activation(compute_wmap(state, P), state, zone)
            if plan.empty:
                continue
            for lane, counts in ((Lane.INGRESS, plan.ingress), (Lane.EGRESS, plan.egress)):
                for g0 in np.flatnonzero(counts):
                    key = (lane, int(g0))
                    if key in last_pad and now - last_pad[key] < zone.window_duration:
                        continue
                    last_pad[key] = now
                    gate = int(g0) + 1
                    partners = _partners(plan, P, gate, lane, policy)
                    for m in range(int(counts[g0])):
                        other = partners[m % len(partners)]
                        g_in, g_out = (gate, other) if lane is Lane.INGRESS else (other, gate)
                        t_in = _round_time(now + decoy_rng.uniform(0.0, zone.window_step))
                        dt = _travel(zone.travel_time[g_in - 1, g_out - 1], decoy_rng)
                        add_entity(t_in, g_in, _round_time(t_in + dt), g_out, Kind.VIRTUAL)

    observations.sort()
    return Trace(tuple(observations), ground_truth, kinds, seed, fingerprint)


def _partners(plan: ActivationPlan, P: TransitionMatrix, gate: int, lane: Lane, policy):
    if policy is PairingPolicy.TRIGGERING_PAIR:
        return plan.partners(gate, lane.value)
    if lane is Lane.INGRESS:
        return [int(np.argmax(P.p[gate - 1])) + 1]
    return [int(np.argmax(P.p[:, gate - 1])) + 1]


# -- serialization ---------------------------------------------------------

OBSERVATIONS_FILE = "observations.csv"
GROUND_TRUTH_FILE = "ground_truth.csv"
META_FILE = "trace_meta.json"


def write_observations(observations, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OBSERVATION_HEADER)
        for o in observations:
            w.writerow(o.to_row())


def write_ground_truth(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUND_TRUTH_HEADER)
        for o in trace.observations:
            if o.lane is Lane.EGRESS:
                w.writerow((o.pseudonym, trace.ground_truth[o.pseudonym],
                            trace.kinds[o.pseudonym].value))


def write_trace(trace: Trace, directory) -> dict[str, Path]:
    """Write observations, the ground-truth sidecar and metadata to ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {
        "observations": d / OBSERVATIONS_FILE,
        "ground_truth": d / GROUND_TRUTH_FILE,
        "meta": d / META_FILE,
    }
    write_observations(trace.observations, paths["observations"])
    write_ground_truth(trace, paths["ground_truth"])
    meta = {"seed": trace.seed, "fingerprint": trace.fingerprint}
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return paths


def _rows(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise ParseError("empty file, header missing", line=1)
        if tuple(first) != header:
            raise ParseError(f"expected header {','.join(header)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            yield lineno, row


def read_observations(path) -> list[Observation]:
    out = []
    seen = set()
    for lineno, (t, gate, lane, pseudonym) in _rows(path, OBSERVATION_HEADER):
        try:
            obs = Observation(float(t), int(gate), Lane(lane), pseudonym)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if obs.time < 0 or obs.gate < 1:
            raise ParseError("time must be >= 0 and gate >= 1", line=lineno)
        if pseudonym in seen:
            raise ParseError(f"pseudonym {pseudonym} reused", line=lineno)
        seen.add(pseudonym)
        out.append(obs)
    return out


def read_ground_truth(path) -> tuple[dict, dict]:
    truth, kinds = {}, {}
    for lineno, (eg, ing, kind) in _rows(path, GROUND_TRUTH_HEADER):
        try:
            k = Kind(kind)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, field="kind") from exc
        truth[eg] = ing
        kinds[eg] = kinds[ing] = k
    return truth, kinds


def read_trace(directory) -> Trace:
    d = Path(directory)
    observations = read_observations(d / OBSERVATIONS_FILE)
    truth, kinds = ({}, {})
    if (d / GROUND_TRUTH_FILE).exists():
        truth, kinds = read_ground_truth(d / GROUND_TRUTH_FILE)
    seed, fingerprint = None, ""
    if (d / META_FILE).exists():
        meta = json.loads((d / META_FILE).read_text())
        seed, fingerprint = meta.get("seed"), meta.get("fingerprint", "")
    return Trace(tuple(sorted(observations)), truth, kinds, seed, fingerprint)
