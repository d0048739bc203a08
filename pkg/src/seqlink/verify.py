"""Numerical verification bench for the convergence and bound analyses.

Checks, by direct computation, the quantitative claims the linkage
pipeline rests on: the Dirichlet-mode divergence bound, the necessary
conditions and implicit derivatives of the large-document fixed point,
Monte-Carlo concentration and ranking-error trends, and a probe that
tracks how far the per-view surrogate fit drifts from the omniscient
merged fit.  Trend probes report; they do not assert unproven statements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import psi

from seqlink.lda import (
    LdaConfig,
    align_topics_greedy,
    fit_online,
    merge_coreferent,
    model_from_topics,
    replace_config,
)
from seqlink.linkage import infer_proportions, js_divergence
from seqlink.synth import SynthConfig, SyntheticWorld, generate_world
from seqlink._seeding import derive_seed

__all__ = [
    "BoundCheckReport",
    "FixedPointResult",
    "ResidualReport",
    "check_first_order",
    "check_mode_bound",
    "check_second_order",
    "dirichlet_mode",
    "error_exponent_mc",
    "js_concentration_mc",
    "residual_fixed_point",
    "simplified_fixed_point",
    "skl_dirichlet",
    "surrogate_tracking_probe",
]


def dirichlet_mode(param) -> np.ndarray:
    """Mode of a Dirichlet: ``(param_w - 1) / (sum(param) - W)``.

    Defined on the closed region ``param_w >= 1`` with ``sum > W``; entries
    below 1 put the mode outside the simplex and raise.
    """
    arr = np.asarray(param, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("param must be a vector")
    if np.any(arr < 1.0):
        raise ValueError("mode undefined: every entry must be >= 1")
    denom = arr.sum() - arr.size
    if denom <= 0:
        raise ValueError("mode undefined: sum of entries must exceed the dimension")
    return (arr - 1.0) / denom


def skl_dirichlet(eta, eta_prime) -> float:
    """Symmetrized KL between two Dirichlets via their parameter vectors.

    ``sum_w (a_w - b_w) * (psi(a_w) - psi(b_w))``: non-negative, symmetric,
    zero iff the parameters coincide (digamma is strictly increasing).
    """
    a = np.asarray(eta, dtype=np.float64)
    b = np.asarray(eta_prime, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("parameter vectors must share a shape")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("parameters must be strictly positive")
    return float(np.sum((a - b) * (psi(a) - psi(b))))


@dataclass
class BoundCheckReport:
    """Worst-case margins of the mode-divergence bound per concentration."""

    samples: int
    concentrations: list[float]
    max_margin: list[float]
    scaled_margin: list[float]
    passed: bool


def check_mode_bound(
    num_samples: int,
    n_events: int,
    c_list: Sequence[float],
    ratio: float = 1.0,
    seed: int = 0,
) -> BoundCheckReport:
    """Stress the bound ``JS(modes) < SKL / (4 C_min) + eps`` empirically.

    For each concentration C the bench draws parameter pairs ``1 + C * u``
    and ``1 + ratio * C * u'`` from seeded simplex directions u, u' (so the
    concentrations are exactly C and ratio * C), computes the margin
    ``JS - SKL / (4 C_min)``, and records the worst margin scaled by C.
    The same directions are reused across concentrations (common random
    numbers), so a vanishing remainder shows up as non-increasing scaled
    margins; that is the pass criterion.
    """
    rng = np.random.default_rng(seed)
    us = rng.dirichlet(np.ones(n_events), size=num_samples)
    vs = rng.dirichlet(np.ones(n_events), size=num_samples)

    max_margin: list[float] = []
    scaled: list[float] = []
    for c in c_list:
        c_min = min(c, ratio * c)
        worst = -math.inf
        for u, v in zip(us, vs):
            eta = 1.0 + c * u
            eta_p = 1.0 + ratio * c * v
            margin = js_divergence(dirichlet_mode(eta), dirichlet_mode(eta_p)) - skl_dirichlet(
                eta, eta_p
            ) / (4.0 * c_min)
            worst = max(worst, margin)
        max_margin.append(worst)
        scaled.append(worst * c)

    passed = all(b <= a + 1e-9 for a, b in zip(scaled, scaled[1:]))
    return BoundCheckReport(
        samples=num_samples,
        concentrations=list(c_list),
        max_margin=max_margin,
        scaled_margin=scaled,
        passed=passed,
    )


@dataclass
class FixedPointResult:
    theta: np.ndarray
    iterations: int
    converged: bool


def simplified_fixed_point(
    p: np.ndarray,
    beta_hat: np.ndarray,
    theta0: np.ndarray,
    max_iter: int = 10_000,
    tol: float = 1e-12,
) -> FixedPointResult:
    """Iterate the large-document proportion update to a fixed point.

    ``theta_k <- sum_w p_w * phi[w, k]`` with ``phi[w, k]`` proportional to
    ``theta_k * beta_hat[k, w]``; stops when the L1 change drops below
    ``tol``.  Each iterate conserves ``sum(theta) == sum(p)``.
    """
    p = np.asarray(p, dtype=np.float64)
    theta = np.array(theta0, dtype=np.float64, copy=True)
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    if beta_hat.ndim != 2 or beta_hat.shape[1] != p.size:
        raise ValueError("beta_hat must be K x W matching p")
    if np.any(beta_hat <= 0):
        raise ValueError("beta_hat rows must be strictly positive")
    if theta.size != beta_hat.shape[0]:
        raise ValueError("theta0 length must match the number of rows of beta_hat")

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        mix = theta @ beta_hat
        new_theta = theta * (beta_hat @ (p / mix))
        change = float(np.abs(new_theta - theta).sum())
        theta = new_theta
        if change < tol:
            converged = True
            break
    return FixedPointResult(theta=theta, iterations=iterations, converged=converged)


def residual_fixed_point(theta: np.ndarray, p: np.ndarray, beta_hat: np.ndarray) -> float:
    """Max violation of the convergence necessary condition.

    ``theta_k * (1 - sum_w p_w * beta_hat[k, w] / mix_w)`` must vanish at a
    fixed point for every k.
    """
    theta = np.asarray(theta, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    mix = theta @ beta_hat
    lhs = theta * (1.0 - beta_hat @ (p / mix))
    return float(np.abs(lhs).max())


@dataclass
class ResidualReport:
    residual: float
    tolerance: float
    step: float
    passed: bool
    detail: dict = field(default_factory=dict)


def _solve_continuation(
    p: np.ndarray,
    beta_hat: np.ndarray,
    theta_init: np.ndarray,
    tol: float,
    max_jump: float | None = None,
) -> np.ndarray:
    res = simplified_fixed_point(p, beta_hat, theta_init, max_iter=500_000, tol=tol)
    if not res.converged:
        raise RuntimeError("fixed-point continuation did not converge")
    if max_jump is not None and float(np.abs(res.theta - theta_init).sum()) > max_jump:
        raise RuntimeError("fixed-point continuation jumped branches")
    return res.theta


def _tangent_frame(p0: np.ndarray) -> tuple[int, list[int]]:
    # Reference coordinate: the largest p entry, so subtracting h keeps p positive.
    ref = int(np.argmax(p0))
    return ref, [v for v in range(p0.size) if v != ref]


def check_first_order(
    p0: np.ndarray,
    beta_hat: np.ndarray,
    theta0: np.ndarray,
    h: float = 1e-5,
    tolerance: float = 1e-4,
    fp_tol: float = 1e-14,
) -> ResidualReport:
    """Finite-difference check of the first-order implicit condition.

    Derivatives are estimated along simplex tangent directions
    ``e_v - e_r`` (reference coordinate r = argmax p0): p_v moves by +h and
    p_r by -h, and the identity is evaluated in the same contracted
    convention, i.e. as its v-th minus r-th ambient components.  The
    identity holds only at interior fixed points, so boundary solutions
    raise.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    theta_star = _solve_continuation(p0, beta_hat, np.asarray(theta0, np.float64), fp_tol)
    if np.any(theta_star < 1e-6):
        raise ValueError("fixed point is not interior; the identity needs theta > 0")

    ref, coords = _tangent_frame(p0)
    eta = beta_hat / (theta_star @ beta_hat)[np.newaxis, :]  # eta[k, w]
    a_k = eta @ p0
    t_mat = (eta * p0[np.newaxis, :]) @ eta.T  # T[k, l] = sum_w p_w eta_kw eta_lw

    worst = 0.0
    for v in coords:
        direction = np.zeros(p0.size)
        direction[v], direction[ref] = h, -h
        th_plus = _solve_continuation(p0 + direction, beta_hat, theta_star, fp_tol, 100.0 * h)
        th_minus = _solve_continuation(p0 - direction, beta_hat, theta_star, fp_tol, 100.0 * h)
        d_theta = (th_plus - th_minus) / (2.0 * h)

        eta_v = eta[:, v] - eta[:, ref]
        lhs = d_theta * (1.0 - a_k) + theta_star * (-eta_v + t_mat @ d_theta)
        worst = max(worst, float(np.abs(lhs).max()))

    return ResidualReport(
        residual=worst,
        tolerance=tolerance,
        step=h,
        passed=worst <= tolerance,
        detail={"reference_coordinate": ref, "convention": "tangent differences e_v - e_r"},
    )


def check_second_order(
    p0: np.ndarray,
    beta_hat: np.ndarray,
    theta0: np.ndarray,
    h: float = 1e-3,
    tolerance: float = 1e-2,
    fp_tol: float = 1e-14,
) -> ResidualReport:
    """Finite-difference check of the second-order implicit condition.

    Second central differences along pairs of tangent directions are
    plugged into the second-order identity contracted with the same pair.
    The identity is the direct derivative of the first-order condition;
    written with ``g_w(b) = sum_l d_b theta_l * eta[l, w]`` it reads, for
    directions a and b (reference r):

        d2_theta_k (1 - sum_w p_w eta_kw)
        + d_a theta_k (-(eta_kb - eta_kr) + sum_w p_w eta_kw g_w(b))
        + d_b theta_k (-(eta_ka - eta_kr) + sum_w p_w eta_kw g_w(a))
        + theta_k [ eta_ka g_a(b) - eta_kr g_r(b)
                    + eta_kb g_b(a) - eta_kr g_r(a)
                    - 2 sum_w p_w eta_kw g_w(a) g_w(b)
                    + sum_l d2_theta_l T_kl ] = 0
    """
    p0 = np.asarray(p0, dtype=np.float64)
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    theta_star = _solve_continuation(p0, beta_hat, np.asarray(theta0, np.float64), fp_tol)
    if np.any(theta_star < 1e-6):
        raise ValueError("fixed point is not interior; the identity needs theta > 0")

    ref, coords = _tangent_frame(p0)
    eta = beta_hat / (theta_star @ beta_hat)[np.newaxis, :]
    a_k = eta @ p0
    pe = eta * p0[np.newaxis, :]
    t_mat = pe @ eta.T
    jump = 400.0 * h  # two coordinates move by up to 2h in the mixed stencil

    def solve(delta: np.ndarray) -> np.ndarray:
        return _solve_continuation(p0 + delta, beta_hat, theta_star, fp_tol, jump)

    dirs: dict[int, np.ndarray] = {}
    for v in coords:
        s = np.zeros(p0.size)
        s[v], s[ref] = 1.0, -1.0
        dirs[v] = s

    first: dict[int, np.ndarray] = {}
    for v in coords:
        first[v] = (solve(h * dirs[v]) - solve(-h * dirs[v])) / (2.0 * h)

    worst = 0.0
    for ai, a in enumerate(coords):
        for b in coords[ai:]:
            if a == b:
                d2 = (solve(h * dirs[a]) - 2.0 * theta_star + solve(-h * dirs[a])) / (h * h)
            else:
                d2 = (
                    solve(h * (dirs[a] + dirs[b]))
                    - solve(h * (dirs[a] - dirs[b]))
                    - solve(h * (dirs[b] - dirs[a]))
                    + solve(-h * (dirs[a] + dirs[b]))
                ) / (4.0 * h * h)

            da, db = first[a], first[b]
            g_a = da @ eta  # g_w(a), shape (W,)
            g_b = db @ eta
            eta_a = eta[:, a] - eta[:, ref]
            eta_b = eta[:, b] - eta[:, ref]

            lhs = (
                d2 * (1.0 - a_k)
                + da * (-eta_b + pe @ g_b)
                + db * (-eta_a + pe @ g_a)
                + theta_star
                * (
                    eta[:, a] * g_b[a]
                    - eta[:, ref] * g_b[ref]
                    + eta[:, b] * g_a[b]
                    - eta[:, ref] * g_a[ref]
                    - 2.0 * (pe @ (g_a * g_b))
                    + t_mat @ d2
                )
            )
            worst = max(worst, float(np.abs(lhs).max()))

    return ResidualReport(
        residual=worst,
        tolerance=tolerance,
        step=h,
        passed=worst <= tolerance,
        detail={"reference_coordinate": ref, "convention": "tangent differences e_v - e_r"},
    )


@dataclass
class ConcentrationPoint:
    n: int
    hits: int
    trials: int
    p_hat: float
    exponent: float  # +inf when the event was never observed
    flagged: bool


def js_concentration_mc(
    q: np.ndarray,
    n_list: Sequence[int],
    lambda_thresh: float,
    trials: int = 10_000,
    seed: int = 0,
) -> list[ConcentrationPoint]:
    """Monte-Carlo estimate of the concentration exponent of paired samples.

    For each n, draws ``trials`` pairs of n-event empirical distributions
    from ``q`` and estimates ``p = P(JS >= lambda)``; the reported exponent
    is ``-ln(p) / n``.  Zero observed hits are flagged and reported as an
    infinite exponent (the event is consistent with any rate at that
    sample size).
    """
    q = np.asarray(q, dtype=np.float64)
    rng = np.random.default_rng(seed)
    out: list[ConcentrationPoint] = []
    for n in n_list:
        p1 = rng.multinomial(n, q, size=trials) / n
        p2 = rng.multinomial(n, q, size=trials) / n
        mids = 0.5 * (p1 + p2)
        from scipy.special import rel_entr

        vals = np.sum(rel_entr(p1, mids) + rel_entr(p2, mids), axis=1)
        hits = int(np.sum(vals >= lambda_thresh))
        p_hat = hits / trials
        if hits == 0:
            out.append(ConcentrationPoint(n, 0, trials, 0.0, math.inf, True))
        else:
            out.append(ConcentrationPoint(n, hits, trials, p_hat, -math.log(p_hat) / n, False))
    return out


@dataclass
class ErrorRatePoint:
    n: int
    errors: int
    rejections: int
    decisions: int
    error_rate: float


def error_exponent_mc(
    n_entities: int,
    n_list: Sequence[int],
    lambda_thresh: float = 0.0,
    n_topics: int = 5,
    n_events: int = 40,
    cfg: LdaConfig | None = None,
    trials: int = 200,
    seed: int = 0,
    alpha_world: float = 0.3,
    eta_world: float = 0.5,
) -> list[ErrorRatePoint]:
    """Empirical ranking-error decay with the per-view sequence length.

    Each trial samples a bijective world of the given length, infers topic
    proportions with the *true* topics supplied (no learning), and applies
    the nearest-candidate decision rule with a rejection threshold: when
    the runner-up score falls below ``lambda_thresh``, the case is rejected
    and counted separately, not as an error.
    """
    if n_entities < 2:
        raise ValueError("need at least two entities")
    cfg = cfg or LdaConfig(n_topics=n_topics, alpha=alpha_world, eta=eta_world, epochs=1)
    out: list[ErrorRatePoint] = []
    for n in n_list:
        errors = rejections = decisions = 0
        for trial in range(trials):
            world_cfg = SynthConfig(
                n_entities=n_entities,
                n_topics=n_topics,
                n_events_vocab=n_events,
                alpha=alpha_world,
                eta=eta_world,
                events_per_entity=n,
                split_prob=0.5,
                y_views_per_entity=(1, 1),
                seed=derive_seed(seed, f"exponent:{n}:{trial}"),
            )
            world = generate_world(world_cfg)
            model = model_from_topics(world.truth.true_beta, alpha=cfg.alpha, eta=cfg.eta)
            elog_beta = model.expected_log_topics()
            x_props = [
                infer_proportions(v, model, cfg, elog_beta=elog_beta) for v in world.x_views
            ]
            y_props = [
                infer_proportions(v, model, cfg, elog_beta=elog_beta) for v in world.y_views
            ]
            y_ids = [p.view_id for p in y_props]
            for xp in x_props:
                scores = np.array([js_divergence(xp.theta, yp.theta) for yp in y_props])
                order = np.argsort(scores, kind="stable")
                best, second = order[0], order[1]
                if scores[second] < lambda_thresh:
                    rejections += 1
                    continue
                decisions += 1
                truth_set = world.truth.pi[xp.view_id]
                if y_ids[best] not in truth_set:
                    errors += 1
        rate = errors / decisions if decisions else 0.0
        out.append(ErrorRatePoint(n, errors, rejections, decisions, rate))
    return out


@dataclass
class TrackingPoint:
    epoch: int
    skl_aligned: float


def surrogate_tracking_probe(
    world: SyntheticWorld,
    cfg: LdaConfig,
    epochs: int,
) -> list[TrackingPoint]:
    """Track the divergence between per-view and merged-document fits.

    Both fits start from the identical seeded initialization and advance
    one epoch at a time; after each epoch the probe records the symmetrized
    KL summed over greedily aligned topic rows.  This measures an unproven
    tracking claim, so it reports the series instead of asserting bounds.
    """
    if any(len(ys) != 1 for ys in world.truth.pi.values()):
        raise ValueError("the probe requires a bijective identity map")
    views = world.all_views
    n_events = world.config.n_events_vocab
    merged = merge_coreferent(views, {x: set(ys) for x, ys in world.truth.pi.items()})

    total_events = float(sum(v.total for v in views))
    rng = np.random.default_rng(cfg.seed)
    mean = cfg.eta + total_events / (cfg.n_topics * n_events)
    lam0 = rng.gamma(100.0, mean / 100.0, (cfg.n_topics, n_events))

    one_epoch = replace_config(cfg, epochs=1)
    lam_ind, lam_omn = lam0, lam0
    t_ind = t_omn = 0
    series: list[TrackingPoint] = []
    for epoch in range(1, epochs + 1):
        model_ind = fit_online(
            views, one_epoch, n_events=n_events, init_lambda=lam_ind, t_start=t_ind
        )
        model_omn = fit_online(
            merged, one_epoch, n_events=n_events, init_lambda=lam_omn, t_start=t_omn
        )
        lam_ind, lam_omn = model_ind.lam, model_omn.lam
        t_ind += len(views)
        t_omn += len(merged)
        pairs = align_topics_greedy(lam_ind, lam_omn)
        total = sum(skl_dirichlet(lam_ind[i], lam_omn[j]) for i, j in pairs)
        series.append(TrackingPoint(epoch=epoch, skl_aligned=float(total)))
    return series
