"""Pseudonym-linking adversary and anonymity metrics.

The adversary sees only gate-level observations. It scores every
(ingress, egress) pair by the exit probability for the gate pair times the
travel-time density of the elapsed time. It then drops pairs that are
infeasible in time or too improbable, and links pseudonyms with either an
optimal assignment or a greedy baseline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import TooLarge, WrongLane
from .traffic import Kind, Observation, Trace
from .zone import Lane, TransitionMatrix, TravelTimeModel


def _p(transition) -> np.ndarray:
    return transition.p if isinstance(transition, TransitionMatrix) else np.asarray(transition)


def score_pair(obs_in: Observation, obs_out: Observation, transition, travel_time) -> float:
    """Likelihood that ``obs_out`` is the exit of the vehicle seen at ``obs_in``."""
    if obs_in.lane is not Lane.INGRESS or obs_out.lane is not Lane.EGRESS:
        raise WrongLane(
            f"expected (ingress, egress) observations, got ({obs_in.lane.value}, {obs_out.lane.value})"
        )
    dt = obs_out.time - obs_in.time
    if dt <= 0:
        return 0.0
    i, j = obs_in.gate - 1, obs_out.gate - 1
    return float(_p(transition)[i, j] * travel_time[i, j].pdf(dt))


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Pair scores, rows = ingress observations, columns = egress observations.

    ``window`` marks the pairs the adversary considers at all (egress after
    ingress, within the horizon); ``feasible`` is the subset that survives
    pruning. Only feasible pairs with a positive score can be linked.
    """

    ingress: tuple[Observation, ...]
    egress: tuple[Observation, ...]
    scores: np.ndarray
    window: np.ndarray
    feasible: np.ndarray

    @property
    def shape(self):
        return self.scores.shape

    @property
    def usable(self) -> np.ndarray:
        return self.feasible & (self.scores > 0)

    @property
    def delta_t(self) -> np.ndarray:
        t_in = np.array([o.time for o in self.ingress], dtype=float)
        t_out = np.array([o.time for o in self.egress], dtype=float)
        return t_out[None, :] - t_in[:, None]

    @classmethod
    def from_array(cls, scores, feasible=None) -> ScoreMatrix:
        """Wrap a bare score array (no observations attached)."""
        s = np.array(scores, dtype=float)
        if s.size == 0:
            s = s.reshape(0, 0)
        if s.ndim != 2:
            raise ValueError("scores must be two-dimensional")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite and nonnegative")
        window = np.ones(s.shape, dtype=bool)
        feas = window.copy() if feasible is None else np.array(feasible, dtype=bool)
        return cls((), (), s, window, feas)


def _as_score_matrix(scores) -> ScoreMatrix:
    return scores if isinstance(scores, ScoreMatrix) else ScoreMatrix.from_array(scores)


def build_scores(
    observations,
    transition,
    travel_time: TravelTimeModel,
    *,
    dwell: float = 0.0,
    horizon: float | None = None,
) -> ScoreMatrix:
    """Score every ingress/egress pair of a trace.

    Densities come from ``travel_time`` widened by ``dwell`` seconds. Pairs
    more than ``horizon`` seconds apart (default: the longest widened travel
    time) are left out of the window.
    """
    tt = travel_time.widened(dwell)
    if horizon is None:
        horizon = tt.max_seconds
    obs = sorted(observations)
    ingress = tuple(o for o in obs if o.lane is Lane.INGRESS)
    egress = tuple(o for o in obs if o.lane is Lane.EGRESS)
    t_in = np.array([o.time for o in ingress], dtype=float)
    t_out = np.array([o.time for o in egress], dtype=float)
    g_in = np.array([o.gate - 1 for o in ingress], dtype=int)
    g_out = np.array([o.gate - 1 for o in egress], dtype=int)
    dt = t_out[None, :] - t_in[:, None]
    window = (dt > 0) & (dt <= horizon)

    P = _p(transition)
    scores = np.zeros(dt.shape)
    for a in np.unique(g_in):
        rows = np.flatnonzero(g_in == a)
        for b in np.unique(g_out):
            cols = np.flatnonzero(g_out == b)
            block = dt[np.ix_(rows, cols)]
            scores[np.ix_(rows, cols)] = P[a, b] * tt[a, b].pdf(block)
    scores[~window] = 0.0
    return ScoreMatrix(ingress, egress, scores, window, window & (scores > 0))


def prune(
    scores: ScoreMatrix,
    transition,
    travel_time: TravelTimeModel,
    *,
    time_feasibility: bool = True,
    min_probability: float = 0.0,
    dwell: float = 0.0,
) -> ScoreMatrix:
    """Apply the exclusion rules and return a matrix with a new feasibility mask.

    Rules: pairs whose elapsed time falls outside the travel-time support
    (widened by ``dwell`` seconds for waits at lights) and pairs whose exit
    probability is below ``min_probability``. Scores are not modified.
    """
    P = _p(transition)
    g_in = np.array([o.gate - 1 for o in scores.ingress], dtype=int)
    g_out = np.array([o.gate - 1 for o in scores.egress], dtype=int)
    keep = scores.window.copy()
    if min_probability > 0:
        keep &= P[np.ix_(g_in, g_out)] >= min_probability
    if time_feasibility:
        tt = travel_time.widened(dwell)
        dt = scores.delta_t
        lo = np.array([[tt[a, b].min_s for b in range(tt.n)] for a in range(tt.n)])
        hi = np.array([[tt[a, b].max_s for b in range(tt.n)] for a in range(tt.n)])
        keep &= (dt >= lo[np.ix_(g_in, g_out)]) & (dt <= hi[np.ix_(g_in, g_out)])
    return ScoreMatrix(scores.ingress, scores.egress, scores.scores, scores.window, keep)


@dataclass(frozen=True)
class Assignment:
    """Injective egress -> ingress links as (ingress_index, egress_index) pairs."""

    pairs: tuple[tuple[int, int], ...]
    log_score: float

    @property
    def mapping(self) -> dict[int, int]:
        return {e: i for i, e in self.pairs}

    @property
    def score(self) -> float:
        return math.exp(self.log_score) if self.pairs else 0.0

    def __len__(self):
        return len(self.pairs)


def assignment_log_score(scores, pairs) -> float:
    """Sum of log scores over ``pairs``, added in egress order."""
    s = scores.scores if isinstance(scores, ScoreMatrix) else np.asarray(scores)
    return math.fsum(math.log(s[i, e]) for i, e in sorted(pairs, key=lambda ie: (ie[1], ie[0])))


def _finish(sm: ScoreMatrix, pairs) -> Assignment:
    pairs = tuple(sorted(((int(i), int(e)) for i, e in pairs), key=lambda ie: (ie[1], ie[0])))
    return Assignment(pairs, assignment_log_score(sm, pairs) if pairs else 0.0)


def link_ml(scores) -> Assignment:
    """Maximum-likelihood linking.

    Among assignments that link as many egress observations as possible
    through usable pairs, return the one maximizing the product of scores.
    Solved as a rectangular linear assignment on ``-log(score)``, with
    unusable cells priced high enough that they are only taken when no
    usable alternative exists; such cells are dropped afterwards.
    """
    sm = _as_score_matrix(scores)
    usable = sm.usable
    if not usable.any():
        return Assignment((), 0.0)
    # Restrict to rows/cols that have at least one usable cell.
    rows = np.flatnonzero(usable.any(axis=1))
    cols = np.flatnonzero(usable.any(axis=0))
    sub_ok = usable[np.ix_(rows, cols)]
    with np.errstate(divide="ignore"):
        cost = -np.log(sm.scores[np.ix_(rows, cols)])
    finite = cost[sub_ok]
    lo, hi = float(finite.min()), float(finite.max())
    big = (min(sub_ok.shape) + 1) * (hi - lo + 1.0) + abs(hi) + abs(lo)
    cost = np.where(sub_ok, cost, big)
    r, c = linear_sum_assignment(cost)
    keep = sub_ok[r, c]
    return _finish(sm, zip(rows[r[keep]], cols[c[keep]]))


def link_greedy(scores) -> Assignment:
    """Repeatedly take the best remaining usable pair.

    Ties go to the earlier ingress, then the earlier egress (rows and columns
    are time-ordered).
    """
    sm = _as_score_matrix(scores)
    cand = np.argwhere(sm.usable)
    if cand.size == 0:
        return Assignment((), 0.0)
    vals = sm.scores[cand[:, 0], cand[:, 1]]
    order = np.lexsort((cand[:, 1], cand[:, 0], -vals))
    used_r, used_c, pairs = set(), set(), []
    for k in order:
        i, e = cand[k]
        if i in used_r or e in used_c:
            continue
        used_r.add(i)
        used_c.add(e)
        pairs.append((i, e))
    return _finish(sm, pairs)


def count_feasible_mappings(feasibility, limit: int = 8) -> int:
    """Number of maximum-cardinality injective mappings over feasible cells.

    For a square matrix with a perfect matching this is its permanent.
    Raises :class:`TooLarge` when either side exceeds ``limit``.
    """
    F = np.asarray(feasibility, dtype=bool)
    if F.ndim != 2:
        raise ValueError("feasibility must be a 2-D 0/1 matrix")
    if max(F.shape, default=0) > limit:
        raise TooLarge(f"matrix {F.shape} exceeds the enumeration limit {limit}")
    n_rows, n_cols = F.shape
    if n_rows == 0 or n_cols == 0:
        return 1
    options = [tuple(np.flatnonzero(F[r]).tolist()) for r in range(n_rows)]

    @lru_cache(maxsize=None)
    def best(r: int, used: int) -> tuple[int, int]:
        # (largest matching size over rows r.., number of ways to reach it)
        if r == n_rows:
            return 0, 1
        size, ways = best(r + 1, used)
        for c in options[r]:
            if used >> c & 1:
                continue
            s, w = best(r + 1, used | 1 << c)
            s += 1
            if s > size:
                size, ways = s, w
            elif s == size:
                ways += w
        return size, ways

    return best(0, 0)[1]


def entropy_bits(weights) -> tuple[float, float]:
    """Shannon entropy (bits) of normalized positive ``weights`` and its degree.

    The degree is H / log2(k) over the k positive candidates; a single
    candidate gives degree 0 (fully identified). Returns ``(nan, nan)`` for
    no candidates.
    """
    w = np.asarray(weights, dtype=float)
    w = w[w > 0]
    if w.size == 0:
        return math.nan, math.nan
    q = w / w.sum()
    q = q[q > 0]
    h = max(0.0, float(-np.sum(q * np.log2(q))))
    if w.size == 1:
        return 0.0, 0.0
    return h, min(1.0, h / math.log2(w.size))


@dataclass(frozen=True)
class AdversarySettings:
    min_probability: float = 0.0
    dwell: float = 0.0
    horizon: float | None = None
    time_feasibility: bool = True

    def __post_init__(self):
        if not 0 <= self.min_probability <= 1:
            raise ValueError(f"min_probability must lie in [0, 1], got {self.min_probability}")
        if self.dwell < 0:
            raise ValueError("dwell must be >= 0")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class PrivacyReport:
    adversary: str
    linkage_accuracy: float
    decoy_capture_rate: float
    entropies: tuple[float, ...]
    degrees: tuple[float, ...]
    n_targets: int
    n_links: int
    feasible_mapping_count: int | None = None

    @property
    def mean_entropy(self) -> float:
        return float(np.mean(self.entropies)) if self.entropies else math.nan

    @property
    def mean_degree(self) -> float:
        return float(np.mean(self.degrees)) if self.degrees else math.nan


LINKERS = {"ml": link_ml, "greedy": link_greedy}


def anonymity_metrics(
    scores: ScoreMatrix,
    ground_truth: dict | None = None,
    kinds: dict | None = None,
    adversary: str = "ml",
    assignment: Assignment | None = None,
) -> PrivacyReport:
    """Privacy of the egress targets in ``scores`` against one linker.

    Targets are the real egress pseudonyms when ``kinds`` is known, else all
    egress observations. Each target's usable candidate scores are normalized
    into a distribution for the entropy and degree of anonymity; targets
    with no candidates are skipped. Accuracy counts only real egress linked
    to their true real ingress.
    """
    ground_truth = ground_truth or {}
    kinds = kinds or {}
    if assignment is None:
        assignment = LINKERS[adversary](scores)
    usable = scores.usable
    weights = np.where(usable, scores.scores, 0.0)

    if kinds:
        targets = [k for k, o in enumerate(scores.egress) if kinds.get(o.pseudonym) is Kind.REAL]
    else:
        targets = list(range(scores.shape[1]))
    entropies, degrees = [], []
    for e in targets:
        h, d = entropy_bits(weights[:, e])
        if not math.isnan(h):
            entropies.append(h)
            degrees.append(d)

    links = assignment.mapping
    accuracy = math.nan
    if kinds and ground_truth:
        real_targets = targets
        correct = 0
        for e in real_targets:
            i = links.get(e)
            if i is None:
                continue
            p_in = scores.ingress[i].pseudonym
            if kinds.get(p_in) is Kind.REAL and ground_truth.get(scores.egress[e].pseudonym) == p_in:
                correct += 1
        accuracy = correct / len(real_targets) if real_targets else math.nan

    capture = math.nan
    if kinds and links:
        hits = sum(
            1
            for e, i in links.items()
            if kinds.get(scores.egress[e].pseudonym) is Kind.VIRTUAL
            or kinds.get(scores.ingress[i].pseudonym) is Kind.VIRTUAL
        )
        capture = hits / len(links)

    count = None
    if max(scores.shape, default=0) <= 8:
        count = count_feasible_mappings(usable)
    return PrivacyReport(
        adversary=adversary,
        linkage_accuracy=accuracy,
        decoy_capture_rate=capture,
        entropies=tuple(entropies),
        degrees=tuple(degrees),
        n_targets=len(targets),
        n_links=len(links),
        feasible_mapping_count=count,
    )


def attack(
    trace: Trace,
    transition,
    travel_time: TravelTimeModel,
    settings: AdversarySettings | None = None,
    adversaries=("ml", "greedy"),
) -> list[PrivacyReport]:
    """Blind attack on ``trace.observations``; ground truth only scores the result."""
    settings = settings or AdversarySettings()
    sm = build_scores(
        trace.observations, transition, travel_time,
        dwell=settings.dwell, horizon=settings.horizon,
    )
    sm = prune(
        sm, transition, travel_time,
        time_feasibility=settings.time_feasibility,
        min_probability=settings.min_probability,
        dwell=settings.dwell,
    )
    return [anonymity_metrics(sm, trace.ground_truth, trace.kinds, adversary=a) for a in adversaries]
