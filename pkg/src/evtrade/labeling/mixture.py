"""Beta-mixture EM over pooled suitability scores, plus soft-relevance smoothing."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import betaln

logger = logging.getLogger(__name__)

SHAPE_MIN = 0.05
SHAPE_MAX = 500.0


@dataclass
class EmConfig:
    delta: float = 1e-4
    tol: float = 1e-6
    max_iter: int = 200
    k_range: tuple = (2, 3, 4, 5)
    min_points_per_component: int = 10
    seed: int = 0
    max_halvings: int = 30


@dataclass
class EmModel:
    pi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    log_likelihood: float = -math.inf
    iterations: int = 0
    ll_history: list = field(default_factory=list)
    n_samples: int = 0

    @property
    def K(self) -> int:
        return len(self.pi)

    @property
    def means(self) -> np.ndarray:
        return self.alpha / (self.alpha + self.beta)

    def bic(self) -> float:
        return -2.0 * self.log_likelihood + (3 * self.K - 1) * math.log(self.n_samples)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "pi": self.pi.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "means": self.means.tolist(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "n_samples": self.n_samples,
        }


def clip_scores(scores, delta: float = 1e-4) -> np.ndarray:
    return np.clip(np.asarray(scores, dtype=float), delta, 1.0 - delta)


def beta_logpdf(x: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Log densities, shape (n, K)."""
    lx = np.log(x)[:, None]
    l1x = np.log1p(-x)[:, None]
    return (alpha - 1.0) * lx + (beta - 1.0) * l1x - betaln(alpha, beta)


@numba.njit(cache=True)
def _e_step(x, lx, l1x, log_pi, am1, bm1, log_b, gamma, stats):
    """Fill ``gamma`` with responsibilities and return the log-likelihood.

    ``stats`` (K, 5) receives per-component sums of gamma, gamma*x,
    gamma*x^2, gamma*log(x) and gamma*log(1-x). The log-likelihood is a
    Neumaier-compensated sum in index order.
    """
    n, K = gamma.shape
    stats[:, :] = 0.0
    total = 0.0
    comp = 0.0
    for i in range(n):
        mx = -math.inf
        for k in range(K):
            v = log_pi[k] + am1[k] * lx[i] + bm1[k] * l1x[i] - log_b[k]
            gamma[i, k] = v
            if v > mx:
                mx = v
        s = 0.0
        for k in range(K):
            e = math.exp(gamma[i, k] - mx)
            gamma[i, k] = e
            s += e
        lse = mx + math.log(s)
        t = total + lse
        if abs(total) >= abs(lse):
            comp += (total - t) + lse
        else:
            comp += (lse - t) + total
        total = t
        xi = x[i]
        for k in range(K):
            g = gamma[i, k] / s
            gamma[i, k] = g
            stats[k, 0] += g
            stats[k, 1] += g * xi
            stats[k, 2] += g * xi * xi
            stats[k, 3] += g * lx[i]
            stats[k, 4] += g * l1x[i]
    return total + comp


def _e_step_arrays(x, pi, alpha, beta):
    x = np.ascontiguousarray(x, dtype=float)
    lx, l1x = np.log(x), np.log1p(-x)
    gamma = np.empty((x.size, len(pi)))
    stats = np.empty((len(pi), 5))
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    ll = _e_step(x, lx, l1x, log_pi, alpha - 1.0, beta - 1.0, betaln(alpha, beta), gamma, stats)
    return gamma, stats, ll


def responsibilities(x, pi, alpha, beta):
    """Return ``(gamma, log_likelihood)`` for clipped scores ``x``."""
    gamma, _, ll = _e_step_arrays(x, pi, alpha, beta)
    return gamma, ll


def moments_to_shapes(mean: float, var: float) -> tuple[float, float]:
    mean = min(max(mean, 1e-6), 1 - 1e-6)
    limit = mean * (1.0 - mean)
    if not var > 0 or var >= limit:
        # no valid moments; fall back to a flat-ish Beta with this mean
        common = 2.0
    else:
        common = limit / var - 1.0
    a = min(max(mean * common, SHAPE_MIN), SHAPE_MAX)
    b = min(max((1.0 - mean) * common, SHAPE_MIN), SHAPE_MAX)
    return a, b


def _component_q(a, b, n_k, s_log, s_log1m):
    # expected complete-data log-likelihood of one component's Beta term
    return (a - 1.0) * s_log + (b - 1.0) * s_log1m - n_k * betaln(a, b)


def _initial_params(x: np.ndarray, K: int, seed: int):
    rng = np.random.default_rng(seed)
    qs = (np.arange(K) + 0.5) / K
    means = np.quantile(x, qs) + rng.uniform(-1e-3, 1e-3, size=K)
    var = max(float(np.var(x)) / K**2, 1e-4)
    shapes = [moments_to_shapes(float(m), var) for m in means]
    alpha = np.array([s[0] for s in shapes])
    beta = np.array([s[1] for s in shapes])
    return np.full(K, 1.0 / K), alpha, beta


def _m_step(stats, n, alpha_old, beta_old, max_halvings):
    """Moments update per component, kept only where it does not lower Q.

    If the moments proposal lowers the component's expected complete-data
    log-likelihood, step back towards the old shapes (in log space) until it
    does not; this keeps EM monotone.
    """
    n_k = stats[:, 0]
    pi = n_k / n
    alpha, beta = alpha_old.copy(), beta_old.copy()
    for k in range(len(n_k)):
        if n_k[k] <= 0:
            continue
        m = stats[k, 1] / n_k[k]
        v = max(stats[k, 2] / n_k[k] - m * m, 0.0)
        a_new, b_new = moments_to_shapes(m, v)
        s1, s2 = stats[k, 3], stats[k, 4]
        q_old = _component_q(alpha_old[k], beta_old[k], n_k[k], s1, s2)
        la0, lb0 = math.log(alpha_old[k]), math.log(beta_old[k])
        la1, lb1 = math.log(a_new), math.log(b_new)
        t = 1.0
        for _ in range(max_halvings):
            a_t, b_t = math.exp(la0 + t * (la1 - la0)), math.exp(lb0 + t * (lb1 - lb0))
            if _component_q(a_t, b_t, n_k[k], s1, s2) >= q_old:
                alpha[k], beta[k] = a_t, b_t
                break
            t *= 0.5
    return pi, alpha, beta


def em_fit(scores, K: int, cfg: EmConfig | None = None) -> EmModel:
    cfg = cfg or EmConfig()
    if K < 1:
        raise ValueError("K must be >= 1")
    x = clip_scores(scores, cfg.delta)
    if x.size < cfg.min_points_per_component * K:
        raise ValueError(f"need at least {cfg.min_points_per_component * K} scores for K={K}, got {x.size}")
    pi, alpha, beta = _initial_params(x, K, cfg.seed)
    lx, l1x = np.log(x), np.log1p(-x)
    gamma = np.empty((x.size, K))
    stats = np.empty((K, 5))

    def e_step(pi, alpha, beta):
        with np.errstate(divide="ignore"):
            log_pi = np.log(pi)
        return _e_step(x, lx, l1x, log_pi, alpha - 1.0, beta - 1.0, betaln(alpha, beta), gamma, stats)

    ll = e_step(pi, alpha, beta)
    history = [ll]
    it = 0
    for it in range(1, cfg.max_iter + 1):
        pi, alpha, beta = _m_step(stats, x.size, alpha, beta, cfg.max_halvings)
        ll_new = e_step(pi, alpha, beta)
        history.append(ll_new)
        converged = abs(ll_new - ll) < cfg.tol
        ll = ll_new
        if converged:
            break
    logger.debug("EM K=%d finished after %d iterations, LL=%.6f", K, it, ll)
    return EmModel(pi=pi, alpha=alpha, beta=beta, log_likelihood=ll, iterations=it, ll_history=history, n_samples=x.size)


def select_k(scores, cfg: EmConfig | None = None) -> tuple[int, dict]:
    """Fit every K in ``cfg.k_range`` and return the BIC minimiser and all fits."""
    cfg = cfg or EmConfig()
    fits = {k: em_fit(scores, k, cfg) for k in cfg.k_range}
    best = min(fits, key=lambda k: (fits[k].bic(), k))
    return best, fits


def smooth_scores(model: EmModel, scores, delta: float = 1e-4) -> np.ndarray:
    """Responsibility-weighted expectation of component means per score."""
    x = clip_scores(scores, delta)
    gamma, _ = responsibilities(x, model.pi, model.alpha, model.beta)
    return gamma @ model.means


def em_smooth(model: EmModel, scores, ptr, delta: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(r_hat, P)`` where P normalises r_hat within each event."""
    r_hat = smooth_scores(model, scores, delta)
    ptr = np.asarray(ptr)
    sizes = np.diff(ptr)
    totals = np.add.reduceat(r_hat, ptr[:-1])
    return r_hat, r_hat / np.repeat(totals, sizes)
