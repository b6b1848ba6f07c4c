"""Mapping weights between gates and the virtual-transceiver activation plan.

The weight of mapping an ingress at gate i to an egress at gate j is

    ingress_i ** egress_j * p[i, j]

normalized across each ingress row. Powers overflow quickly, so the weights
are evaluated in the log domain and each row is shifted by its maximum before
exponentiating.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRowWarning, DimensionMismatch
from .zone import StateMatrix, TransitionMatrix, ZoneConfig


def raw_weight(ingress: int, egress: int, p: float) -> float:
    """``ingress ** egress * p`` with ``0 ** 0 == 1``.

    Returns ``inf`` when the power does not fit in a float.
    """
    power = int(ingress) ** int(egress)
    try:
        return float(power) * p
    except OverflowError:
        return math.inf if p > 0 else 0.0


def log_raw_weight(ingress: int, egress: int, p: float) -> float:
    """Natural log of :func:`raw_weight`; ``-inf`` where the weight is zero."""
    if p <= 0:
        return -math.inf
    if egress == 0:
        return math.log(p)
    if ingress == 0:
        return -math.inf
    return egress * math.log(ingress) + math.log(p)


@dataclass(frozen=True, eq=False)
class WMap:
    """Raw and row-normalized mapping weights.

    ``degenerate`` flags ingress rows that carry no usable weight; their
    normalized rows are all zero. ``evaluations`` counts weight evaluations.
    """

    raw: np.ndarray
    log_raw: np.ndarray
    normalized: np.ndarray
    degenerate: np.ndarray
    evaluations: int

    @property
    def n(self) -> int:
        return self.normalized.shape[0]


def compute_wmap(state: StateMatrix, transition) -> WMap:
    """Compute W_MAP for a window state and a transition matrix.

    ``transition`` may be a validated :class:`TransitionMatrix` or any n x n
    array of nonnegative reals (rows need not be stochastic).

    A row is degenerate when its ingress lane is empty or its raw weights sum
    to zero. Its normalized row is left at zero.
    """
    p = np.asarray(transition.p if isinstance(transition, TransitionMatrix) else transition,
                   dtype=float)
    n = state.n
    if p.shape != (n, n):
        raise DimensionMismatch(f"state has {n} gates but matrix has shape {p.shape}")

    ingress = state.ingress.tolist()
    egress = state.egress.tolist()
    log_raw = np.empty((n, n))
    evaluations = 0
    for i in range(n):
        for j in range(n):
            log_raw[i, j] = log_raw_weight(ingress[i], egress[j], p[i, j])
            evaluations += 1

    with np.errstate(over="ignore"):
        raw = np.exp(log_raw)
    degenerate = np.isneginf(log_raw).all(axis=1) | (state.ingress == 0)
    normalized = np.zeros((n, n))
    ok = ~degenerate
    if ok.any():
        rows = log_raw[ok]
        shifted = np.exp(rows - rows.max(axis=1, keepdims=True))
        normalized[ok] = shifted / shifted.sum(axis=1, keepdims=True)
    for arr in (raw, log_raw, normalized, degenerate):
        arr.flags.writeable = False
    return WMap(raw, log_raw, normalized, degenerate, evaluations)


@dataclass(frozen=True, eq=False)
class ActivationPlan:
    """Virtual transceivers to switch on per gate lane.

    Counts are 0-based arrays; ``triggers`` holds 1-based (entry, exit) gate
    pairs whose normalized weight fell below the threshold.
    """

    ingress: np.ndarray
    egress: np.ndarray
    triggers: frozenset
    degenerate_rows: tuple[int, ...] = ()

    @property
    def total(self) -> int:
        return int(self.ingress.sum() + self.egress.sum())

    @property
    def empty(self) -> bool:
        return self.total == 0

    def as_dict(self) -> dict:
        """Nonzero lane counts keyed by 1-based gate number."""
        return {
            "ingress": {g + 1: int(c) for g, c in enumerate(self.ingress) if c},
            "egress": {g + 1: int(c) for g, c in enumerate(self.egress) if c},
        }

    def partners(self, gate: int, lane: str) -> list[int]:
        """Gates paired with ``gate`` by the triggering pairs, for ``lane``."""
        if lane == "ingress":
            return sorted(j for i, j in self.triggers if i == gate)
        return sorted(i for i, j in self.triggers if j == gate)


def plan_activation(
    wmap: WMap, state: StateMatrix, config: ZoneConfig, threshold: float | None = None
) -> ActivationPlan:
    """Mark lanes touched by a below-threshold pair and size their padding.

    Every marked lane is padded once, with ``lane_capacity - real_count``
    transceivers (never negative). Degenerate rows count as below threshold
    on every pair and raise a :class:`DegenerateRowWarning`. A threshold of 0
    disables activation entirely.
    """
    thr = config.threshold if threshold is None else threshold
    n = wmap.n
    if state.n != n:
        raise DimensionMismatch(f"state has {state.n} gates but W_MAP is {n}x{n}")

    below = wmap.normalized < thr
    degenerate_rows = ()
    if thr > 0:
        below[wmap.degenerate] = True
        degenerate_rows = tuple(int(i) + 1 for i in np.flatnonzero(wmap.degenerate))
    if degenerate_rows:
        warnings.warn(
            f"degenerate W_MAP rows (empty ingress lanes) at gates {list(degenerate_rows)}",
            DegenerateRowWarning,
            stacklevel=2,
        )

    mark_in = below.any(axis=1)
    mark_out = below.any(axis=0)
    cap = config.lane_capacity
    ingress = np.where(mark_in, np.maximum(0, cap - state.ingress), 0)
    egress = np.where(mark_out, np.maximum(0, cap - state.egress), 0)
    triggers = frozenset((int(i) + 1, int(j) + 1) for i, j in np.argwhere(below))
    return ActivationPlan(ingress, egress, triggers, degenerate_rows)
