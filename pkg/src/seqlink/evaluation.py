"""Rank-k recall, cohort selection, and granularity sweeps.

Recall counts an X view as recovered only when its *entire* truth set sits
inside the top-k candidates, with a strict boundary rule: a truth member
seated exactly at rank k counts only if it strictly beats the (k+1)-th
candidate, so ties at the cutoff never award credit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from seqlink.baselines import (
    NflxParams,
    estimate_pois_params,
    jsdist_link,
    nflx_link,
    pois_link,
)
from seqlink.corpus import (
    ActivityRecord,
    Granularity,
    View,
    bin_spatial,
    build_event_space,
    merge_views,
    overlap_stats,
)
from seqlink.lda import LdaConfig, fit_online, replace_config
from seqlink.linkage import LinkageResult, link
from seqlink.synth import GroundTruth, truth_from_user_ids
from seqlink._seeding import derive_seed

__all__ = [
    "RecallReport",
    "SweepRow",
    "granularity_sweep",
    "rank_k_recall",
    "recall_curve",
    "sparse_cohort",
    "zero_overlap_cohort",
]

METHODS = ("lda-link", "js-dist", "nflx", "pois")


@dataclass
class RecallReport:
    ks: list[int]
    recalls: list[float]
    cohort: str
    population: int


@dataclass(frozen=True)
class SweepRow:
    spatial_digits: int
    temporal_bins: int
    method: str
    k: int
    cohort: str
    recall: float
    population: int


def _hit(cands: list[tuple[str, float]], truth_set: frozenset[str], k: int) -> bool:
    if len(truth_set) > k:
        return False
    top = cands[:k]
    top_ids = {y for y, _ in top}
    if not truth_set <= top_ids:
        return False
    # Strict boundary rule: a truth member at rank k must beat rank k+1.
    if len(top) == k and len(cands) > k and top[-1][0] in truth_set:
        if not top[-1][1] < cands[k][1]:
            return False
    return True


def rank_k_recall(result: LinkageResult, truth: GroundTruth, k: int) -> float:
    """Fraction of X views whose full truth set lands strictly in the top k.

    The result should carry at least ``k + 1`` candidates per view for the
    boundary rule to be decidable; shorter lists mean no competitor exists
    at rank ``k + 1``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not result.candidates:
        raise ValueError("empty linkage result")
    hits = 0
    for x_id, cands in result.candidates.items():
        truth_set = truth.pi.get(x_id)
        if truth_set is None:
            raise KeyError(f"truth does not cover view {x_id!r}")
        hits += _hit(cands, truth_set, k)
    return hits / len(result.candidates)


def recall_curve(result: LinkageResult, truth: GroundTruth, ks: Sequence[int], cohort: str = "all") -> RecallReport:
    """Recall at each k; asserts the ks are ascending and recall monotone."""
    ks = list(ks)
    if ks != sorted(ks):
        raise ValueError("ks must be ascending")
    recalls = [rank_k_recall(result, truth, k) for k in ks]
    for a, b in zip(recalls, recalls[1:]):
        if b < a - 1e-12:
            raise AssertionError("recall must be monotone non-decreasing in k")
    return RecallReport(ks=ks, recalls=recalls, cohort=cohort, population=len(result.candidates))


def _pair_l1(x_view: View, y_union: View) -> float:
    return overlap_stats(x_view, y_union)[1]


def sparse_cohort(
    x_views: Sequence[View],
    y_views: Sequence[View],
    truth: GroundTruth,
    fraction: float,
) -> set[str]:
    """The ceil(fraction * D) X views farthest from their own Y side in L1.

    The entity's Y views are merged (counts summed) before comparing
    relative frequencies; ties break by view id.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    y_by_id = {v.view_id: v for v in y_views}
    scored: list[tuple[float, str]] = []
    for xv in x_views:
        y_ids = truth.pi.get(xv.view_id)
        if y_ids is None:
            raise KeyError(f"truth does not cover view {xv.view_id!r}")
        union = merge_views("union", "Y", [y_by_id[y] for y in sorted(y_ids)])
        scored.append((_pair_l1(xv, union), xv.view_id))
    scored.sort(key=lambda t: (-t[0], t[1]))
    take = math.ceil(fraction * len(x_views))
    return {vid for _, vid in scored[:take]}


def zero_overlap_cohort(
    x_views: Sequence[View],
    y_views: Sequence[View],
    truth: GroundTruth,
) -> set[str]:
    """X views sharing no event with any of their linked Y views."""
    y_by_id = {v.view_id: v for v in y_views}
    cohort = set()
    for xv in x_views:
        y_ids = truth.pi.get(xv.view_id)
        if y_ids is None:
            raise KeyError(f"truth does not cover view {xv.view_id!r}")
        if all(overlap_stats(xv, y_by_id[y])[0] == 0 for y in y_ids):
            cohort.add(xv.view_id)
    return cohort


def _located_events(
    records: Sequence[ActivityRecord], spatial_digits: int
) -> tuple[dict[str, dict[str, list[float]]], dict[str, dict[str, list[float]]]]:
    x_ev: dict[str, dict[str, list[float]]] = {}
    y_ev: dict[str, dict[str, list[float]]] = {}
    for rec in records:
        side = x_ev if rec.domain == "X" else y_ev
        view = side.setdefault(f"{rec.domain}:{rec.user_id}", {})
        cell = bin_spatial(rec.lat, rec.lon, spatial_digits)
        view.setdefault(cell, []).append(float(rec.timestamp))
    return x_ev, y_ev


def _restrict(result: LinkageResult, keep: set[str]) -> LinkageResult:
    return LinkageResult(candidates={x: c for x, c in result.candidates.items() if x in keep})


def granularity_sweep(
    records: Sequence[ActivityRecord],
    grid: Sequence[Granularity],
    lda_cfg: LdaConfig,
    ks: Sequence[int],
    methods: Sequence[str] = ("lda-link", "js-dist"),
    nflx_params: NflxParams = NflxParams(),
    seed: int = 0,
) -> list[SweepRow]:
    """Re-bin, re-fit, re-link, and re-score at every grid point.

    Emits one long-format row per (grid point, method, k).  Ground truth is
    recovered from user ids shared across the two domains; X views without
    a Y counterpart are excluded from recall.
    """
    if not grid:
        raise ValueError("granularity grid must be non-empty")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    ks = list(ks)
    depth = max(ks) + 1

    rows: list[SweepRow] = []
    for gran in grid:
        vocab, views = build_event_space(records, gran)
        x_views = [v for v in views if v.domain == "X"]
        y_views = [v for v in views if v.domain == "Y"]
        truth = truth_from_user_ids(x_views, y_views)
        covered = set(truth.pi.keys())
        x_eval = [v for v in x_views if v.view_id in covered]

        for method in methods:
            if method == "lda-link":
                cfg = replace_config(
                    lda_cfg,
                    seed=derive_seed(seed, f"fit:{gran.spatial_digits}:{gran.temporal_bins}"),
                )
                model = fit_online(views, cfg, vocabulary=vocab)
                result = link(x_eval, y_views, model, cfg, depth)
            elif method == "js-dist":
                result = jsdist_link(x_eval, y_views, vocab.size, depth)
            elif method == "pois":
                params = estimate_pois_params(x_views, y_views, n_events=vocab.size)
                result = pois_link(x_eval, y_views, params, depth)
            else:  # nflx
                x_ev, y_ev = _located_events(records, gran.spatial_digits)
                x_ev = {k_: v for k_, v in x_ev.items() if k_ in covered}
                result, _ = nflx_link(x_ev, y_ev, nflx_params, depth)

            report = recall_curve(result, truth, ks)
            rows.extend(
                SweepRow(
                    spatial_digits=gran.spatial_digits,
                    temporal_bins=gran.temporal_bins,
                    method=method,
                    k=k,
                    cohort="all",
                    recall=r,
                    population=report.population,
                )
                for k, r in zip(report.ks, report.recalls)
            )
    return rows
