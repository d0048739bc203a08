"""Comparison scorers: sparsity attack, empirical-distribution matching,
and Poisson-process likelihood scoring.

All three are evaluated under the same Rank-k protocol as the topic-model
linker.  The sparsity attack (``nflx``) consumes raw timestamps grouped by
location; the other two work on binned event counts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from seqlink.corpus import View, relative_frequency
from seqlink.linkage import LinkageResult, ScoreMatrix, js_divergence, rank_k

__all__ = [
    "NflxParams",
    "PoisParams",
    "estimate_pois_params",
    "jsdist_link",
    "jsdist_score",
    "nflx_link",
    "nflx_score",
    "pois_link",
    "pois_log_phi",
    "pois_phi",
    "pois_score",
]

logger = logging.getLogger(__name__)

# Events of one view grouped by location: location key -> sorted timestamps.
LocatedEvents = Mapping[str, Sequence[float]]


@dataclass(frozen=True)
class NflxParams:
    """Sparsity-attack parameters.

    ``n0`` scales the visit-count term, ``tau0`` the time-proximity term
    (seconds), and ``eccentricity_eps`` the abstention rule: a row abstains
    when the best and second-best scores differ by no more than
    ``eccentricity_eps`` standard deviations of the row.
    """

    n0: float = 3.0
    tau0: float = 3600.0
    eccentricity_eps: float = 0.5

    def __post_init__(self):
        if self.n0 <= 0 or self.tau0 <= 0:
            raise ValueError("n0 and tau0 must be positive")
        if self.eccentricity_eps < 0:
            raise ValueError("eccentricity_eps must be >= 0")


@dataclass
class PoisParams:
    """Poisson-process parameters: per-cell rates and the two observation shares.

    Cells are identified by their vocabulary event id (each id is one
    location-time cell).
    """

    rates: dict[int, float]
    p1: float
    p2: float
    series_truncation: int = 200

    def __post_init__(self):
        if not 0 < self.p1 < 1 or not 0 < self.p2 < 1:
            raise ValueError("p1 and p2 must lie strictly inside (0, 1)")
        if any(r <= 0 for r in self.rates.values()):
            raise ValueError("all rates must be positive")
        if self.series_truncation < 50:
            raise ValueError("series_truncation must be >= 50")


def nflx_score(
    x_events: LocatedEvents,
    y_events: LocatedEvents,
    params: NflxParams,
    y_location_totals: Mapping[str, float],
) -> float:
    """Similarity of two views under the sparsity attack; higher is closer.

    Sums, over locations common to both views, an inverse-log-popularity
    weight times a visit-count term plus a time-proximity term built from
    exact timestamps.  Locations whose global Y visit count is <= 1 have a
    non-positive log weight and are skipped with a warning.  An empty
    location intersection scores 0.
    """
    score = 0.0
    for loc in sorted(x_events.keys() & y_events.keys()):
        total = float(y_location_totals.get(loc, 0.0))
        if total <= 1.0:
            logger.warning("nflx: skipping location %r with global Y count %s", loc, total)
            continue
        x_times = x_events[loc]
        y_times = np.asarray(y_events[loc], dtype=np.float64)
        n_visits = len(x_times)
        w_l = 1.0 / math.log(total)
        mean_gap = sum(np.abs(y_times - t).min() for t in x_times) / n_visits
        f_l = math.exp(n_visits / params.n0) + math.exp(-mean_gap / params.tau0)
        score += w_l * f_l
    return score


def nflx_link(
    x_events_by_view: Mapping[str, LocatedEvents],
    y_events_by_view: Mapping[str, LocatedEvents],
    params: NflxParams,
    k: int,
) -> tuple[LinkageResult, dict[str, bool]]:
    """Rank Y views by descending similarity; flag ambiguous rows.

    A row abstains when the gap between its best and second-best scores is
    at most ``eccentricity_eps`` standard deviations of the row scores.
    Rows with a single candidate never abstain.
    """
    y_ids = sorted(y_events_by_view.keys())
    x_ids = list(x_events_by_view.keys())
    totals: dict[str, float] = {}
    for events in y_events_by_view.values():
        for loc, times in events.items():
            totals[loc] = totals.get(loc, 0.0) + len(times)

    sims = np.empty((len(x_ids), len(y_ids)), dtype=np.float64)
    for i, x_id in enumerate(x_ids):
        for j, y_id in enumerate(y_ids):
            sims[i, j] = nflx_score(x_events_by_view[x_id], y_events_by_view[y_id], params, totals)

    # Rank-k machinery orders ascending, so feed it negated similarities.
    result = rank_k(ScoreMatrix(x_ids=x_ids, y_ids=y_ids, values=-sims), k)
    abstain: dict[str, bool] = {}
    for i, x_id in enumerate(x_ids):
        row = sims[i]
        if len(row) < 2:
            abstain[x_id] = False
            continue
        best, second = np.sort(row)[::-1][:2]
        abstain[x_id] = bool(best - second <= params.eccentricity_eps * row.std())
    return result, abstain


def jsdist_score(p_x: np.ndarray, p_y: np.ndarray) -> float:
    """Jensen-Shannon score between event-space relative frequencies."""
    return js_divergence(p_x, p_y)


def jsdist_link(x_views: Sequence[View], y_views: Sequence[View], n_events: int, k: int) -> LinkageResult:
    """Rank-k linkage on raw empirical distributions (no dimension reduction)."""
    x_ids = [v.view_id for v in x_views]
    y_ids = [v.view_id for v in y_views]
    xm = np.vstack([relative_frequency(v, n_events) for v in x_views])
    ym = np.vstack([relative_frequency(v, n_events) for v in y_views])
    from scipy.special import rel_entr

    values = np.empty((len(x_ids), len(y_ids)), dtype=np.float64)
    for start in range(0, len(x_ids), 64):
        block = xm[start : start + 64][:, np.newaxis, :]
        mids = 0.5 * (block + ym[np.newaxis, :, :])
        values[start : start + 64] = np.sum(
            rel_entr(block, mids) + rel_entr(ym[np.newaxis, :, :], mids), axis=-1
        )
    return rank_k(ScoreMatrix(x_ids=x_ids, y_ids=y_ids, values=values), k)


def pois_log_phi(x: int, y: int, rate: float, p1: float, p2: float, truncation: int = 200) -> float:
    """Log of the per-cell Poisson matching factor.

    The expectation over the latent count X ~ Poisson(rate * (1-p1) * (1-p2))
    of ``(X + max(x, y))! / (X + |x - y|)!`` is evaluated by a truncated
    series in log space.  Raises when the estimated tail beyond the
    truncation exceeds 1e-12 of the sum.
    """
    if x < 0 or y < 0:
        raise ValueError("counts must be >= 0")
    if truncation < 50:
        raise ValueError("truncation must be >= 50")
    mu = rate * (1.0 - p1) * (1.0 - p2)
    hi, diff = max(x, y), abs(x - y)

    j = np.arange(truncation + 1, dtype=np.float64)
    log_terms = (
        -mu
        + j * math.log(mu)
        - gammaln(j + 1.0)
        + gammaln(j + hi + 1.0)
        - gammaln(j + diff + 1.0)
    )
    log_expect = float(logsumexp(log_terms))

    # Geometric tail estimate: term ratio at the truncation point must be
    # below 1 and the remaining mass below 1e-12 of the series.
    t = float(truncation)
    ratio = mu * (t + 1.0 + hi) / ((t + 1.0) * (t + 1.0 + diff))
    if ratio >= 1.0:
        raise ValueError(f"series not yet decaying at truncation={truncation}; increase it")
    log_tail = log_terms[-1] + math.log(ratio) - math.log1p(-ratio)
    if log_tail - log_expect > math.log(1e-12):
        raise ValueError(f"series tail above 1e-12 at truncation={truncation}; increase it")

    return (
        -rate * p1 * p2
        + y * math.log1p(-p1)
        + x * math.log1p(-p2)
        - min(x, y) * math.log(mu)
        + log_expect
    )


def pois_phi(x: int, y: int, rate: float, p1: float, p2: float, truncation: int = 200) -> float:
    """Per-cell Poisson matching factor; strictly positive."""
    return math.exp(pois_log_phi(x, y, rate, p1, p2, truncation))


def pois_score(x_view: View, y_view: View, params: PoisParams) -> float:
    """Sum of log matching factors over all cells; higher is more similar.

    Cells where both counts are zero contribute their closed form
    ``-rate * p1 * p2`` and are folded in analytically.
    """
    score = -params.p1 * params.p2 * sum(params.rates.values())
    touched = x_view.counts.keys() | y_view.counts.keys()
    for w in sorted(touched):
        rate = params.rates.get(w)
        if rate is None:
            raise KeyError(f"no rate for cell {w}")
        x = x_view.counts.get(w, 0)
        y = y_view.counts.get(w, 0)
        score += pois_log_phi(x, y, rate, params.p1, params.p2, params.series_truncation)
        score += rate * params.p1 * params.p2  # remove the zero-cell term already in the base sum
    return score


def estimate_pois_params(
    x_views: Sequence[View],
    y_views: Sequence[View],
    n_events: int | None = None,
    series_truncation: int = 200,
) -> PoisParams:
    """Moment-style parameter estimates from the two corpora.

    Each cell's rate is its combined count divided by the number of
    entities, floored at 1e-6; the observation shares are each domain's
    share of all events.
    """
    if not x_views or not y_views:
        raise ValueError("both corpora must be non-empty")
    if n_events is None:
        n_events = 1 + max(
            int(v.event_ids.max()) for v in list(x_views) + list(y_views)
        )
    totals = np.zeros(n_events, dtype=np.float64)
    for v in list(x_views) + list(y_views):
        totals[v.event_ids] += v.event_counts
    n_entities = len(x_views)
    rates = {w: max(float(totals[w]) / n_entities, 1e-6) for w in range(n_events)}

    x_total = float(sum(v.total for v in x_views))
    y_total = float(sum(v.total for v in y_views))
    p1 = x_total / (x_total + y_total)
    p2 = y_total / (x_total + y_total)
    return PoisParams(rates=rates, p1=p1, p2=p2, series_truncation=series_truncation)


def pois_link(
    x_views: Sequence[View],
    y_views: Sequence[View],
    params: PoisParams,
    k: int,
) -> LinkageResult:
    """Rank-k linkage by descending Poisson log-score."""
    x_ids = [v.view_id for v in x_views]
    y_ids = [v.view_id for v in y_views]
    values = np.empty((len(x_ids), len(y_ids)), dtype=np.float64)
    for i, xv in enumerate(x_views):
        for j, yv in enumerate(y_views):
            values[i, j] = -pois_score(xv, yv, params)
    return rank_k(ScoreMatrix(x_ids=x_ids, y_ids=y_ids, values=values), k)
