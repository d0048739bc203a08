"""Scikit-learn style front end.

``EventTopicModel`` is a transformer from view count matrices to topic
proportions; ``RankKLinker`` is a nearest-candidate ranker over proportion
matrices with the same fit/kneighbors surface as ``NearestNeighbors``.
Both compose with pipelines, ``clone``, and ``get_params``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from seqlink.corpus import View
from seqlink.lda import LdaConfig, TopicModel, fit_batch, fit_online
from seqlink.linkage import infer_proportions, score_matrix, TopicProportion
from seqlink.validation import check_count_matrix

__all__ = ["EventTopicModel", "RankKLinker", "views_from_matrix"]


def views_from_matrix(X, prefix: str = "v", domain: str = "X") -> list[View]:
    """Wrap the rows of a count matrix as views (zero rows are rejected)."""
    arr = check_count_matrix(X)
    views = []
    for i, row in enumerate(arr):
        ids = np.nonzero(row)[0]
        if len(ids) == 0:
            raise ValueError(f"row {i} has no events")
        views.append(
            View.from_counts(f"{prefix}{i:06d}", domain, {int(w): int(row[w]) for w in ids})
        )
    return views


class EventTopicModel(BaseEstimator, TransformerMixin):
    """Topic model over event count vectors with variational inference.

    Parameters
    ----------
    n_topics : int
        Number of latent topics K.
    alpha, eta : float
        Symmetric Dirichlet priors on topic proportions and topics.
    rho0, kappa : float
        Learning-rate schedule ``(rho0 + t) ** -kappa`` for online fitting.
    epochs : int
        Passes over the corpus (online) or full sweeps (batch).
    method : {"online", "batch"}
        Stochastic per-view updates or full-corpus coordinate ascent.
    e_step_tol, e_step_max_iter
        Per-view coordinate-ascent stopping rule.
    random_state : int
        Seed for initialization and visit order.

    Attributes
    ----------
    components_ : ndarray of shape (n_topics, n_features)
        The fitted variational topic parameter.
    model_ : TopicModel
        The underlying model object used by the functional API.
    """

    def __init__(
        self,
        n_topics: int = 10,
        alpha: float = 0.1,
        eta: float = 0.05,
        rho0: float = 1.0,
        kappa: float = 0.7,
        epochs: int = 5,
        method: str = "online",
        e_step_tol: float = 1e-4,
        e_step_max_iter: int = 200,
        random_state: int = 0,
    ):
        self.n_topics = n_topics
        self.alpha = alpha
        self.eta = eta
        self.rho0 = rho0
        self.kappa = kappa
        self.epochs = epochs
        self.method = method
        self.e_step_tol = e_step_tol
        self.e_step_max_iter = e_step_max_iter
        self.random_state = random_state

    def _config(self) -> LdaConfig:
        return LdaConfig(
            n_topics=self.n_topics,
            alpha=self.alpha,
            eta=self.eta,
            rho0=self.rho0,
            kappa=self.kappa,
            epochs=self.epochs,
            e_step_tol=self.e_step_tol,
            e_step_max_iter=self.e_step_max_iter,
            seed=self.random_state,
        )

    def fit(self, X, y=None):
        """Fit the topic parameter on a (n_views, n_events) count matrix."""
        views = views_from_matrix(X)
        n_events = check_count_matrix(X).shape[1]
        cfg = self._config()
        if self.method == "online":
            self.model_ = fit_online(views, cfg, n_events=n_events)
        elif self.method == "batch":
            self.model_, _ = fit_batch(views, cfg, n_events=n_events)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.components_ = self.model_.lam
        self.n_features_in_ = n_events
        return self

    def transform(self, X) -> np.ndarray:
        """Map count rows to topic proportions of shape (n_views, n_topics)."""
        check_is_fitted(self, "model_")
        arr = check_count_matrix(X)
        if arr.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {arr.shape[1]} features, expected {self.n_features_in_}"
            )
        cfg = self._config()
        elog_beta = self.model_.expected_log_topics()
        views = views_from_matrix(arr)
        props = [
            infer_proportions(v, self.model_, cfg, elog_beta=elog_beta) for v in views
        ]
        return np.vstack([p.theta for p in props])


class RankKLinker(BaseEstimator):
    """Rank candidates on the topic simplex by ascending Jensen-Shannon score."""

    def __init__(self, n_candidates: int = 5, reject_threshold: float | None = None):
        self.n_candidates = n_candidates
        self.reject_threshold = reject_threshold

    def fit(self, Y, y=None):
        """Store the candidate proportion matrix of shape (n_views, n_topics)."""
        arr = np.asarray(Y, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("Y must be a non-empty 2-D proportion matrix")
        self.candidates_ = arr
        self.n_features_in_ = arr.shape[1]
        return self

    def kneighbors(self, X, n_neighbors: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Scores and column indices of the best candidates per query row."""
        check_is_fitted(self, "candidates_")
        k = n_neighbors or self.n_candidates
        queries = np.asarray(X, dtype=np.float64)
        x_props = [TopicProportion(f"q{i}", row, row) for i, row in enumerate(queries)]
        y_props = [
            TopicProportion(f"c{j}", row, row) for j, row in enumerate(self.candidates_)
        ]
        scores = score_matrix(x_props, y_props).values
        idx = np.argsort(scores, axis=1, kind="stable")[:, :k]
        picked = np.take_along_axis(scores, idx, axis=1)
        if self.reject_threshold is not None:
            picked = np.where(picked <= self.reject_threshold, picked, np.nan)
        return picked, idx

    def predict(self, X) -> np.ndarray:
        """Index of the single best candidate per query row."""
        _, idx = self.kneighbors(X, n_neighbors=1)
        return idx[:, 0]
