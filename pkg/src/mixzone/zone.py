"""Mix zone domain types: gates, lanes, transition matrix, travel times, state.

Gates are numbered from 1 wherever they appear in records or user-facing
output (observations, plans, files). Arrays indexed by gate are 0-based.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .errors import (
    DimensionMismatch,
    InvalidConfig,
    InvalidThreshold,
    InvalidWindow,
    NegativeEntry,
    NonStochasticRow,
    NotSquare,
)

ROW_TOL = 1e-9


class Lane(str, enum.Enum):
    INGRESS = "ingress"
    EGRESS = "egress"


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic exit-gate probabilities; ``p[i, j]`` = P(exit j | entry i).

    Build through :func:`validate_transition_matrix`.
    """

    p: np.ndarray

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TransitionMatrix):
            return NotImplemented
        return np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash(self.p.tobytes())

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.p, dtype=dtype)

    def tolist(self) -> list[list[float]]:
        return self.p.tolist()


def validate_transition_matrix(p) -> TransitionMatrix:
    """Check that ``p`` is square, entries lie in [0, 1] and rows sum to 1.

    Raises
    ------
    NotSquare, NegativeEntry, NonStochasticRow
    """
    if isinstance(p, TransitionMatrix):
        p = p.p
    arr = np.array(p, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise NotSquare(f"transition matrix must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NegativeEntry("transition matrix has non-finite entries")
    bad = np.argwhere(arr < 0)
    if bad.size:
        i, j = bad[0]
        raise NegativeEntry(f"entry ({i + 1},{j + 1}) is negative: {arr[i, j]}")
    bad = np.argwhere(arr > 1)
    if bad.size:
        i, j = bad[0]
        raise NegativeEntry(f"entry ({i + 1},{j + 1}) exceeds 1: {arr[i, j]}")
    sums = arr.sum(axis=1)
    for i, s in enumerate(sums):
        if abs(s - 1.0) > ROW_TOL:
            raise NonStochasticRow(i + 1, float(s))
    return TransitionMatrix(_frozen(arr))


@dataclass(frozen=True, eq=False)
class StateMatrix:
    """Real-vehicle counts per gate lane in the current observation window."""

    ingress: np.ndarray
    egress: np.ndarray

    def __init__(self, ingress, egress):
        ing = np.asarray(ingress)
        eg = np.asarray(egress)
        if ing.ndim != 1 or eg.ndim != 1:
            raise DimensionMismatch("state vectors must be one-dimensional")
        if ing.shape != eg.shape:
            raise DimensionMismatch(
                f"ingress has {ing.size} gates but egress has {eg.size}"
            )
        for name, v in (("ingress", ing), ("egress", eg)):
            if v.size and not np.all(np.equal(np.mod(v, 1), 0)):
                raise ValueError(f"{name} counts must be integers")
            if np.any(v < 0):
                raise NegativeEntry(f"{name} counts must be nonnegative")
        object.__setattr__(self, "ingress", _frozen(ing, dtype=np.int64))
        object.__setattr__(self, "egress", _frozen(eg, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.ingress.size

    @classmethod
    def zeros(cls, n: int) -> StateMatrix:
        return cls(np.zeros(n, dtype=int), np.zeros(n, dtype=int))

    def count(self, gate: int, lane: Lane) -> int:
        """Count for 1-based ``gate`` on ``lane``."""
        vec = self.ingress if Lane(lane) is Lane.INGRESS else self.egress
        return int(vec[gate - 1])

    def __eq__(self, other):
        if not isinstance(other, StateMatrix):
            return NotImplemented
        return np.array_equal(self.ingress, other.ingress) and np.array_equal(
            self.egress, other.egress
        )

    def __hash__(self):
        return hash((self.ingress.tobytes(), self.egress.tobytes()))

    def __repr__(self):
        return f"StateMatrix(ingress={self.ingress.tolist()}, egress={self.egress.tolist()})"


SHAPES = ("uniform", "truncnorm")


@dataclass(frozen=True)
class TravelTime:
    """Travel-time distribution for one (entry, exit) gate pair.

    The density is zero outside ``[min_s, max_s]``; that support is what the
    adversary uses to rule out time-infeasible links.
    """

    min_s: float
    max_s: float
    shape: str = "uniform"
    mean: float | None = None
    std: float | None = None

    def __post_init__(self):
        if not (0 < self.min_s < self.max_s) or not math.isfinite(self.max_s):
            raise InvalidConfig(
                f"travel time support must satisfy 0 < min < max < inf, "
                f"got [{self.min_s}, {self.max_s}]"
            )
        if self.shape not in SHAPES:
            raise InvalidConfig(f"unknown travel time shape {self.shape!r}")
        if self.shape == "truncnorm":
            if self.mean is None or self.std is None or self.std <= 0:
                raise InvalidConfig("truncnorm travel time needs mean and std > 0")

    @property
    def _dist(self):
        a = (self.min_s - self.mean) / self.std
        b = (self.max_s - self.mean) / self.std
        return stats.truncnorm(a, b, loc=self.mean, scale=self.std)

    def contains(self, dt):
        dt = np.asarray(dt, dtype=float)
        return (dt >= self.min_s) & (dt <= self.max_s)

    def pdf(self, dt):
        dt = np.asarray(dt, dtype=float)
        inside = self.contains(dt)
        if self.shape == "uniform":
            dens = np.where(inside, 1.0 / (self.max_s - self.min_s), 0.0)
        else:
            dens = np.where(inside, self._dist.pdf(dt), 0.0)
        return dens if dens.ndim else float(dens)

    def sample(self, rng: np.random.Generator) -> float:
        if self.shape == "uniform":
            return float(rng.uniform(self.min_s, self.max_s))
        return float(self._dist.rvs(random_state=rng))

    def widened(self, dwell: float) -> TravelTime:
        """Same distribution with the upper bound pushed out by ``dwell`` seconds."""
        if dwell < 0:
            raise InvalidConfig("dwell adjustment must be nonnegative")
        if dwell == 0:
            return self
        return replace(self, max_s=self.max_s + dwell)

    def to_dict(self) -> dict:
        d = {"min_s": self.min_s, "max_s": self.max_s, "shape": self.shape}
        if self.shape == "truncnorm":
            d.update(mean=self.mean, std=self.std)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TravelTime:
        return cls(
            min_s=float(d["min_s"]),
            max_s=float(d["max_s"]),
            shape=d.get("shape", "uniform"),
            mean=None if d.get("mean") is None else float(d["mean"]),
            std=None if d.get("std") is None else float(d["std"]),
        )


@dataclass(frozen=True)
class TravelTimeModel:
    """Per gate-pair travel times, ``pairs[i][j]`` for entry i+1 and exit j+1."""

    pairs: tuple[tuple[TravelTime, ...], ...]

    def __post_init__(self):
        n = len(self.pairs)
        if n == 0 or any(len(row) != n for row in self.pairs):
            raise DimensionMismatch("travel time model must be n x n")

    @classmethod
    def uniform(cls, n: int, min_s: float = 10.0, max_s: float = 30.0) -> TravelTimeModel:
        tt = TravelTime(min_s, max_s)
        return cls(tuple(tuple(tt for _ in range(n)) for _ in range(n)))

    @property
    def n(self) -> int:
        return len(self.pairs)

    def __getitem__(self, ij) -> TravelTime:
        i, j = ij
        return self.pairs[i][j]

    @property
    def max_seconds(self) -> float:
        return max(tt.max_s for row in self.pairs for tt in row)

    def widened(self, dwell: float) -> TravelTimeModel:
        return TravelTimeModel(
            tuple(tuple(tt.widened(dwell) for tt in row) for row in self.pairs)
        )


@dataclass(frozen=True)
class ZoneConfig:
    n_gates: int
    transition: TransitionMatrix
    travel_time: TravelTimeModel
    lane_capacity: int = 10
    window_duration: float = 60.0
    window_step: float = 5.0
    wmap_threshold: float | None = None

    @property
    def threshold(self) -> float:
        """Effective threshold; defaults to the uniform-mapping baseline 1/n."""
        if self.wmap_threshold is None:
            return 1.0 / self.n_gates
        return self.wmap_threshold


def validate_zone_config(config: ZoneConfig) -> ZoneConfig:
    """Check every ZoneConfig invariant and return a validated copy.

    A threshold of exactly 0 is accepted and means the defense never fires.
    """
    if not isinstance(config.n_gates, (int, np.integer)) or config.n_gates < 2:
        raise InvalidConfig(f"a mix zone needs at least 2 gates, got {config.n_gates}")
    if not isinstance(config.lane_capacity, (int, np.integer)) or config.lane_capacity < 1:
        raise InvalidConfig(f"lane capacity must be >= 1, got {config.lane_capacity}")
    transition = validate_transition_matrix(config.transition)
    if transition.n != config.n_gates:
        raise DimensionMismatch(
            f"transition matrix is {transition.n}x{transition.n} for {config.n_gates} gates"
        )
    if config.travel_time.n != config.n_gates:
        raise DimensionMismatch(
            f"travel time model covers {config.travel_time.n} gates, expected {config.n_gates}"
        )
    if not (config.window_duration > 0 and config.window_step > 0):
        raise InvalidWindow("window duration and step must be positive")
    if config.window_step > config.window_duration:
        raise InvalidWindow(
            f"window step {config.window_step} exceeds duration {config.window_duration}"
        )
    thr = config.wmap_threshold
    if thr is not None and not (0 <= thr < 1):
        raise InvalidThreshold(f"threshold must lie in [0, 1), got {thr}")
    return replace(
        config,
        n_gates=int(config.n_gates),
        lane_capacity=int(config.lane_capacity),
        transition=transition,
        window_duration=float(config.window_duration),
        window_step=float(config.window_step),
        wmap_threshold=None if thr is None else float(thr),
    )
