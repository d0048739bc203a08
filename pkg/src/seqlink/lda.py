"""Online variational inference for the shared topic model.

Every view in either domain is treated as an independent document over the
common event vocabulary.  Inference is standard mean-field variational
Bayes: per-view parameters (gamma over topics, phi over topic assignments)
are optimized by coordinate ascent, and the global topic parameter lambda
follows stochastic natural-gradient steps with a decaying learning rate.

An *omniscient* variant is provided for benchmarking: given the true
identity map it merges every set of co-referent views into one document
before fitting, which is the model one would fit if the linkage structure
were already known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp, psi

from seqlink.corpus import View, Vocabulary, merge_views
from seqlink.validation import check_positive_vector

__all__ = [
    "EStepResult",
    "LdaConfig",
    "TopicModel",
    "dirichlet_expectation_log",
    "e_step",
    "elbo",
    "fit_batch",
    "fit_omniscient",
    "fit_online",
    "learning_rate",
]


@dataclass(frozen=True)
class LdaConfig:
    """Hyperparameters for topic learning and per-view inference.

    ``alpha`` and ``eta`` are the symmetric Dirichlet priors on topic
    proportions and topics.  The step size at update ``t`` is
    ``(rho0 + t) ** -kappa``; ``kappa`` in (0.5, 1] guarantees convergence
    of the stochastic updates.
    """

    n_topics: int = 10
    alpha: float = 0.1
    eta: float = 0.05
    rho0: float = 1.0
    kappa: float = 0.7
    epochs: int = 5
    e_step_tol: float = 1e-4
    e_step_max_iter: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.n_topics < 1:
            raise ValueError("n_topics must be >= 1")
        if self.alpha <= 0 or self.eta <= 0:
            raise ValueError("alpha and eta must be positive")
        if self.rho0 < 0:
            raise ValueError("rho0 must be >= 0")
        if not 0.5 < self.kappa <= 1.0:
            raise ValueError("kappa must lie in (0.5, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.e_step_tol <= 0:
            raise ValueError("e_step_tol must be positive")
        if self.e_step_max_iter < 1:
            raise ValueError("e_step_max_iter must be >= 1")


@dataclass
class TopicModel:
    """Global variational state: topic parameter ``lam`` of shape (K, W)."""

    lam: np.ndarray
    vocabulary: Vocabulary | None = None
    corpus_size_used: int = 0
    alpha: float = 0.1
    eta: float = 0.05

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64)
        if self.lam.ndim != 2:
            raise ValueError("lam must be a K x W matrix")
        if np.any(self.lam <= 0) or not np.all(np.isfinite(self.lam)):
            raise ValueError("lam entries must be strictly positive and finite")
        if self.vocabulary is not None and self.vocabulary.size != self.lam.shape[1]:
            raise ValueError("vocabulary size does not match lam columns")

    @property
    def n_topics(self) -> int:
        return int(self.lam.shape[0])

    @property
    def n_events(self) -> int:
        return int(self.lam.shape[1])

    def expected_log_topics(self) -> np.ndarray:
        """E[log beta] under the Dirichlet rows of ``lam``; shape (K, W)."""
        return dirichlet_expectation_log(self.lam)

    def topic_distributions(self) -> np.ndarray:
        """Row-normalized ``lam``: the posterior-mean topic distributions."""
        return self.lam / self.lam.sum(axis=1, keepdims=True)


@dataclass
class EStepResult:
    """Converged per-view variational state.

    ``sstats[k, i]`` holds the expected count of event ``event_ids[i]``
    assigned to topic ``k``; entries sum to the view total.
    """

    gamma: np.ndarray
    sstats: np.ndarray
    event_ids: np.ndarray
    iterations: int
    converged: bool

    @property
    def theta(self) -> np.ndarray:
        """Posterior-mean topic proportions ``gamma / sum(gamma)``."""
        return self.gamma / self.gamma.sum()


def dirichlet_expectation_log(param) -> np.ndarray:
    """``E[log p]`` for ``p ~ Dirichlet(param)``: ``psi(param) - psi(sum)``.

    Accepts a vector or a matrix (row-wise Dirichlets).
    """
    arr = check_positive_vector(param, "Dirichlet parameter")
    if arr.ndim == 1:
        return psi(arr) - psi(arr.sum())
    return psi(arr) - psi(arr.sum(axis=1))[:, np.newaxis]


def learning_rate(t: int, rho0: float, kappa: float) -> float:
    """Step size ``(rho0 + t) ** -kappa`` of the ``t``-th stochastic update."""
    if t < 0:
        raise ValueError("t must be >= 0")
    base = rho0 + t
    if base == 0:
        return math.inf
    return float(base) ** -kappa


def _log_phi(elog_theta: np.ndarray, elog_beta_view: np.ndarray) -> np.ndarray:
    # phi[k, i] ∝ exp(E[log theta_k] + E[log beta_{k, w_i}]), normalized over
    # k in log space to survive large negative exponents.
    log_unnorm = elog_theta[:, np.newaxis] + elog_beta_view
    log_norm = logsumexp(log_unnorm, axis=0)
    return np.exp(log_unnorm - log_norm[np.newaxis, :])


def e_step(
    view: View,
    model: TopicModel,
    cfg: LdaConfig,
    elog_beta: np.ndarray | None = None,
) -> EStepResult:
    """Coordinate ascent on one view's variational parameters, lambda fixed.

    Iterates the phi and gamma updates from the all-ones initialization of
    gamma until the mean absolute change of gamma drops below
    ``cfg.e_step_tol`` or ``cfg.e_step_max_iter`` is hit.  Non-convergence
    is reported on the result, not raised.
    """
    ids = view.event_ids
    cts = view.event_counts
    if len(ids) == 0:
        raise ValueError(f"view {view.view_id!r} is empty")
    if ids.max() >= model.n_events:
        raise ValueError(f"view {view.view_id!r} has events outside the model vocabulary")

    if elog_beta is None:
        elog_beta_view = psi(model.lam[:, ids]) - psi(model.lam.sum(axis=1))[:, np.newaxis]
    else:
        elog_beta_view = elog_beta[:, ids]

    k = model.n_topics
    gamma = np.ones(k, dtype=np.float64)
    phi = np.full((k, len(ids)), 1.0 / k)
    converged = False
    iterations = 0
    for iterations in range(1, cfg.e_step_max_iter + 1):
        elog_theta = psi(gamma) - psi(gamma.sum())
        phi = _log_phi(elog_theta, elog_beta_view)
        new_gamma = cfg.alpha + phi @ cts
        change = float(np.abs(new_gamma - gamma).mean())
        gamma = new_gamma
        if change < cfg.e_step_tol:
            converged = True
            break

    return EStepResult(
        gamma=gamma,
        sstats=phi * cts[np.newaxis, :],
        event_ids=ids,
        iterations=iterations,
        converged=converged,
    )


def _init_lambda(rng: np.random.Generator, k: int, w: int, eta: float, total_events: float) -> np.ndarray:
    # Gamma(100, mean/100) noise around eta + events/(K*W): strictly positive,
    # mildly dispersed, seeded.
    mean = eta + total_events / (k * w)
    return rng.gamma(100.0, mean / 100.0, (k, w))


def _corpus_arrays(views: Sequence[View]) -> None:
    if not views:
        raise ValueError("corpus must be non-empty")
    for v in views:
        if v.total <= 0:
            raise ValueError(f"view {v.view_id!r} is empty")


def fit_online(
    views: Sequence[View],
    cfg: LdaConfig,
    vocabulary: Vocabulary | None = None,
    n_events: int | None = None,
    init_lambda: np.ndarray | None = None,
    t_start: int = 0,
) -> TopicModel:
    """Stochastic variational fit over all views of both domains.

    Visits views in a fresh seeded random order each epoch and blends the
    one-view natural-gradient target into lambda with step size
    ``learning_rate(t, rho0, kappa)`` (clamped to 1 so every update stays a
    convex combination of positive matrices).  The corpus scale factor of
    the target is the total number of views.

    ``init_lambda`` and ``t_start`` allow warm starts, e.g. fitting epoch by
    epoch to observe the trajectory.  Single-threaded runs are
    bit-reproducible for a fixed seed.
    """
    _corpus_arrays(views)
    if n_events is None:
        if vocabulary is not None:
            n_events = vocabulary.size
        elif init_lambda is not None:
            n_events = int(np.asarray(init_lambda).shape[1])
        else:
            n_events = int(max(v.event_ids.max() for v in views)) + 1
    total_events = float(sum(v.total for v in views))

    rng = np.random.default_rng(cfg.seed)
    if init_lambda is not None:
        lam = np.array(init_lambda, dtype=np.float64, copy=True)
        if lam.shape != (cfg.n_topics, n_events):
            raise ValueError("init_lambda shape does not match (n_topics, n_events)")
    else:
        lam = _init_lambda(rng, cfg.n_topics, n_events, cfg.eta, total_events)

    scale = float(len(views))  # per-view minibatches
    t = t_start
    for _ in range(cfg.epochs):
        order = rng.permutation(len(views))
        for vi in order:
            view = views[vi]
            model = TopicModel(lam, corpus_size_used=len(views), alpha=cfg.alpha, eta=cfg.eta)
            res = e_step(view, model, cfg)
            rho = min(1.0, learning_rate(t, cfg.rho0, cfg.kappa))
            lam *= 1.0 - rho
            lam += rho * cfg.eta
            lam[:, res.event_ids] += rho * scale * res.sstats
            t += 1

    return TopicModel(
        lam,
        vocabulary=vocabulary,
        corpus_size_used=len(views),
        alpha=cfg.alpha,
        eta=cfg.eta,
    )


def fit_batch(
    views: Sequence[View],
    cfg: LdaConfig,
    vocabulary: Vocabulary | None = None,
    n_events: int | None = None,
    record_elbo: bool = False,
) -> tuple[TopicModel, list[float]]:
    """Full-corpus coordinate ascent: one M-step per sweep with step size 1.

    With the whole corpus as the minibatch the scale factor is 1 and the
    blended update degenerates to ``lam = eta + sum of sufficient stats``.
    Sweeps never decrease the evidence lower bound beyond numerical slack.
    Returns the model and, when requested, the ELBO recorded after every
    sweep (with that sweep's per-view parameters).
    """
    _corpus_arrays(views)
    if n_events is None:
        n_events = vocabulary.size if vocabulary is not None else int(max(v.event_ids.max() for v in views)) + 1
    total_events = float(sum(v.total for v in views))
    rng = np.random.default_rng(cfg.seed)
    lam = _init_lambda(rng, cfg.n_topics, n_events, cfg.eta, total_events)

    history: list[float] = []
    for _ in range(cfg.epochs):
        model = TopicModel(lam, corpus_size_used=len(views), alpha=cfg.alpha, eta=cfg.eta)
        elog_beta = model.expected_log_topics()
        new_lam = np.full_like(lam, cfg.eta)
        gammas = []
        for view in views:
            res = e_step(view, model, cfg, elog_beta=elog_beta)
            new_lam[:, res.event_ids] += res.sstats
            gammas.append(res.gamma)
        lam = new_lam
        if record_elbo:
            swept = TopicModel(lam, corpus_size_used=len(views), alpha=cfg.alpha, eta=cfg.eta)
            history.append(elbo(views, swept, gammas, cfg))

    final = TopicModel(
        lam, vocabulary=vocabulary, corpus_size_used=len(views), alpha=cfg.alpha, eta=cfg.eta
    )
    return final, history


def merge_coreferent(views: Sequence[View], pi: dict[str, Iterable[str]]) -> list[View]:
    """Combine each X view with its linked Y views into one document."""
    by_id = {v.view_id: v for v in views}
    claimed: set[str] = set()
    merged: list[View] = []
    for x_id, y_ids in pi.items():
        if x_id not in by_id:
            raise KeyError(f"view {x_id!r} not present in the corpus")
        group = [by_id[x_id]]
        for y_id in sorted(y_ids):
            if y_id not in by_id:
                raise KeyError(f"view {y_id!r} not present in the corpus")
            group.append(by_id[y_id])
            claimed.add(y_id)
        merged.append(merge_views(f"merged:{x_id}", "X", group))
    leftovers = [
        v.view_id for v in views if v.domain == "Y" and v.view_id not in claimed
    ]
    if leftovers:
        raise KeyError(f"truth does not cover views: {leftovers[:5]}")
    x_ids = {v.view_id for v in views if v.domain == "X"}
    missing = x_ids - set(pi.keys())
    if missing:
        raise KeyError(f"truth does not cover views: {sorted(missing)[:5]}")
    return merged


def fit_omniscient(
    views: Sequence[View],
    pi: dict[str, Iterable[str]],
    cfg: LdaConfig,
    vocabulary: Vocabulary | None = None,
    n_events: int | None = None,
    init_lambda: np.ndarray | None = None,
    t_start: int = 0,
) -> TopicModel:
    """Fit with co-referent views merged into single documents.

    This is the model an adversary with the true identity map would fit;
    it serves as the reference point for how much the per-view surrogate
    loses.  ``pi`` maps each X view id to the set of linked Y view ids.
    """
    merged = merge_coreferent(views, pi)
    return fit_online(
        merged,
        cfg,
        vocabulary=vocabulary,
        n_events=n_events,
        init_lambda=init_lambda,
        t_start=t_start,
    )


def elbo(
    views: Sequence[View],
    model: TopicModel,
    gammas: Sequence[np.ndarray],
    cfg: LdaConfig,
) -> float:
    """Mean-field evidence lower bound of the corpus at the given state.

    Uses the standard per-document decomposition with phi collapsed to its
    optimum given (gamma, lambda).  An empty corpus yields just the topic
    part, which is handy for isolating the document sum.
    """
    if len(views) != len(gammas):
        raise ValueError("gammas must align with views")
    lam = model.lam
    elog_beta = model.expected_log_topics()
    k = model.n_topics

    score = 0.0
    for view, gamma in zip(views, gammas):
        gamma = np.asarray(gamma, dtype=np.float64)
        elog_theta = psi(gamma) - psi(gamma.sum())
        # E[log p(events | theta, beta)] with optimal phi folded in.
        log_mix = logsumexp(elog_theta[:, np.newaxis] + elog_beta[:, view.event_ids], axis=0)
        score += float(view.event_counts @ log_mix)
        # E[log p(theta | alpha)] - E[log q(theta | gamma)]
        score += float(np.sum((cfg.alpha - gamma) * elog_theta))
        score += float(np.sum(gammaln(gamma)) - k * gammaln(cfg.alpha))
        score += float(gammaln(k * cfg.alpha) - gammaln(gamma.sum()))

    # E[log p(beta | eta)] - E[log q(beta | lambda)]
    w = model.n_events
    score += float(np.sum((cfg.eta - lam) * elog_beta))
    score += float(np.sum(gammaln(lam)) - k * w * gammaln(cfg.eta))
    score += float(k * gammaln(w * cfg.eta) - np.sum(gammaln(lam.sum(axis=1))))
    return score


def model_from_topics(
    topics: np.ndarray,
    concentration: float = 1e8,
    vocabulary: Vocabulary | None = None,
    alpha: float = 0.1,
    eta: float = 0.05,
) -> TopicModel:
    """Oracle model pinned at known topic distributions.

    Scales each topic row to a high-concentration Dirichlet parameter so
    that ``E[log beta]`` is ``log beta`` up to negligible slack; used by
    benches that supply the true topics and skip learning.
    """
    topics = np.asarray(topics, dtype=np.float64)
    if topics.ndim != 2 or np.any(topics < 0):
        raise ValueError("topics must be a non-negative K x W matrix")
    rows = topics / topics.sum(axis=1, keepdims=True)
    floor = 1e-12  # keeps lam strictly positive where a topic has zero mass
    return TopicModel(
        np.maximum(rows, floor) * concentration,
        vocabulary=vocabulary,
        corpus_size_used=0,
        alpha=alpha,
        eta=eta,
    )


def align_topics_greedy(lam_a: np.ndarray, lam_b: np.ndarray) -> list[tuple[int, int]]:
    """Greedy minimal-JS matching between two models' topic rows."""
    from seqlink.linkage import js_divergence

    a = np.asarray(lam_a, dtype=np.float64)
    b = np.asarray(lam_b, dtype=np.float64)
    pa = a / a.sum(axis=1, keepdims=True)
    pb = b / b.sum(axis=1, keepdims=True)
    k = pa.shape[0]
    cost = np.array([[js_divergence(pa[i], pb[j]) for j in range(k)] for i in range(k)])
    pairs: list[tuple[int, int]] = []
    free_a, free_b = set(range(k)), set(range(k))
    while free_a:
        i, j = min(
            ((i, j) for i in free_a for j in free_b), key=lambda ij: (cost[ij[0], ij[1]], ij)
        )
        pairs.append((i, j))
        free_a.discard(i)
        free_b.discard(j)
    return pairs


def replace_config(cfg: LdaConfig, **kwargs) -> LdaConfig:
    """Functional update of an :class:`LdaConfig`."""
    return replace(cfg, **kwargs)
