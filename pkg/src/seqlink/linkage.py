"""Dimension reduction onto the topic simplex and Rank-k candidate ranking.

Given a fitted topic model, every view is mapped to its posterior topic
proportions; each cross-domain pair is scored with the Jensen-Shannon
divergence between proportions (the convention here sums the two KL terms
without halving, so the range is [0, 2 ln 2]); and each X view receives
the k lowest-scoring Y candidates in a deterministic order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import rel_entr

from seqlink.corpus import View
from seqlink.lda import LdaConfig, TopicModel, e_step

__all__ = [
    "LinkageResult",
    "ScoreMatrix",
    "TopicProportion",
    "infer_proportions",
    "js_divergence",
    "link",
    "rank_k",
    "score_matrix",
]

JS_MAX = 2.0 * np.log(2.0)


@dataclass(frozen=True)
class TopicProportion:
    """A view's variational gamma and its normalized point estimate."""

    view_id: str
    gamma: np.ndarray
    theta: np.ndarray


@dataclass
class ScoreMatrix:
    """Dense dissimilarity matrix: rows are X views, columns Y views."""

    x_ids: list[str]
    y_ids: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.x_ids), len(self.y_ids)):
            raise ValueError("score matrix shape does not match id lists")


@dataclass
class LinkageResult:
    """Per-X-view ordered candidate lists: (y_view_id, score), best first."""

    candidates: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def top(self, x_id: str, k: int) -> list[tuple[str, float]]:
        return self.candidates[x_id][:k]


def js_divergence(p, q) -> float:
    """Jensen-Shannon score ``KL(p||m) + KL(q||m)`` with ``m = (p + q) / 2``.

    Natural log; ``0 * log(0/x)`` is treated as 0.  Symmetric, zero iff the
    arguments coincide, and at most ``2 ln 2`` (attained on disjoint
    supports).  Note there are no 1/2 factors: this is twice the usual
    Jensen-Shannon divergence, which leaves every ranking unchanged.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    m = 0.5 * (p + q)
    return float(np.sum(rel_entr(p, m) + rel_entr(q, m)))


def infer_proportions(
    view: View,
    model: TopicModel,
    cfg: LdaConfig,
    elog_beta: np.ndarray | None = None,
    estimator: str = "mean",
) -> TopicProportion:
    """Topic proportions of one view under a fixed model.

    Runs the per-view coordinate ascent with lambda frozen.  The default
    point estimate is the posterior mean ``gamma / sum(gamma)``; the
    Dirichlet mode ``(gamma - 1) / (sum(gamma) - K)`` is available for
    experiments but requires every ``gamma_k >= 1``.
    """
    res = e_step(view, model, cfg, elog_beta=elog_beta)
    if estimator == "mean":
        theta = res.gamma / res.gamma.sum()
    elif estimator == "mode":
        k = len(res.gamma)
        if np.any(res.gamma < 1.0) or res.gamma.sum() <= k:
            raise ValueError("Dirichlet mode undefined: every gamma_k must be >= 1")
        theta = (res.gamma - 1.0) / (res.gamma.sum() - k)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return TopicProportion(view_id=view.view_id, gamma=res.gamma, theta=theta)


def _stack(props: Sequence[TopicProportion]) -> tuple[list[str], np.ndarray]:
    ids = [p.view_id for p in props]
    mat = np.vstack([p.theta for p in props])
    return ids, mat


def score_matrix(
    x_props: Sequence[TopicProportion],
    y_props: Sequence[TopicProportion],
    chunk: int = 128,
) -> ScoreMatrix:
    """All-pairs Jensen-Shannon scores between X and Y proportions."""
    if not x_props or not y_props:
        raise ValueError("proportion lists must be non-empty")
    x_ids, xm = _stack(x_props)
    y_ids, ym = _stack(y_props)
    if xm.shape[1] != ym.shape[1]:
        raise ValueError("X and Y proportions disagree on the number of topics")

    values = np.empty((xm.shape[0], ym.shape[0]), dtype=np.float64)
    for start in range(0, xm.shape[0], chunk):
        block = xm[start : start + chunk][:, np.newaxis, :]
        mids = 0.5 * (block + ym[np.newaxis, :, :])
        values[start : start + chunk] = np.sum(
            rel_entr(block, mids) + rel_entr(ym[np.newaxis, :, :], mids), axis=-1
        )
    return ScoreMatrix(x_ids=x_ids, y_ids=y_ids, values=values)


def rank_k(scores: ScoreMatrix, k: int, reject_threshold: float | None = None) -> LinkageResult:
    """The k best (lowest-score) Y candidates per X view, ascending.

    Ties are broken by ascending Y view id, giving a deterministic total
    order.  With ``reject_threshold`` set, candidates scoring above the
    threshold are dropped from the list.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    y_arr = np.array(scores.y_ids)
    result = LinkageResult()
    for i, x_id in enumerate(scores.x_ids):
        row = scores.values[i]
        order = np.lexsort((y_arr, row))[:k]
        pairs = [(str(y_arr[j]), float(row[j])) for j in order]
        if reject_threshold is not None:
            pairs = [(y, s) for y, s in pairs if s <= reject_threshold]
        result.candidates[x_id] = pairs
    return result


def link(
    x_views: Sequence[View],
    y_views: Sequence[View],
    model: TopicModel,
    cfg: LdaConfig,
    k: int,
    reject_threshold: float | None = None,
    estimator: str = "mean",
) -> LinkageResult:
    """Full linkage: infer proportions, score all pairs, rank candidates."""
    elog_beta = model.expected_log_topics()
    x_props = [infer_proportions(v, model, cfg, elog_beta=elog_beta, estimator=estimator) for v in x_views]
    y_props = [infer_proportions(v, model, cfg, elog_beta=elog_beta, estimator=estimator) for v in y_views]
    scores = score_matrix(x_props, y_props)
    return rank_k(scores, k, reject_threshold=reject_threshold)
