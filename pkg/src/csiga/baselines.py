"""Exact reference detectors: LMMSE, matched filter, exhaustive posterior."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

__all__ = ["ExactMarginals", "lmmse", "matched_filter", "exact_marginals"]

MAX_HYPOTHESES = 10**6


def lmmse(problem):
    """Posterior mean and variances under a CN(0, I) prior.

    Returns ``mu = (H^H H / sigma2 + I)^{-1} H^H y / sigma2`` and the diagonal of
    the inverse, via a Cholesky factorization.
    """
    H, s2 = problem.H, problem.sigma2
    A = H.conj().T @ H / s2 + np.eye(problem.N)
    A = 0.5 * (A + A.conj().T)
    c = linalg.cho_factor(A, lower=True)
    mu = linalg.cho_solve(c, H.conj().T @ problem.y / s2)
    inv = linalg.cho_solve(c, np.eye(problem.N))
    return mu, inv.diagonal().real.copy()


def matched_filter(problem):
    """``H^H y / sigma2``."""
    return problem.H.conj().T @ problem.y / problem.sigma2


@dataclass
class ExactMarginals:
    eta_exact: np.ndarray   # (N, L) per-user marginal posteriors
    log_eta: np.ndarray
    map_joint: np.ndarray   # (N,) symbol indices of the joint MAP
    mmse_mean: np.ndarray   # (N,) posterior mean over the discrete alphabet


def _hypotheses(L, N, start, stop):
    """Symbol indices of hypotheses ``start..stop-1``; user 0 is the most
    significant digit (itertools.product order)."""
    h = np.arange(start, stop)
    digits = np.empty((h.size, N), dtype=np.int64)
    for k in range(N - 1, -1, -1):
        digits[:, k] = h % L
        h = h // L
    return digits


def exact_marginals(problem, max_hypotheses=MAX_HYPOTHESES, chunk=1 << 16):
    """Enumerate all ``L^N`` transmit vectors under a uniform prior.

    Joint MAP ties go to the lowest hypothesis index.
    """
    cons = problem.constellation
    L, N = cons.order, problem.N
    total = L ** N
    if total > max_hypotheses:
        raise ValueError(f"{total} hypotheses exceed the limit of {max_hypotheses}")
    H, y, s2 = problem.H, problem.y, problem.sigma2

    logp = np.empty(total)
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        X = cons.points[_hypotheses(L, N, start, stop)]
        resid = y[None, :] - X @ H.T
        logp[start:stop] = -np.sum(np.abs(resid) ** 2, axis=1) / s2

    best = int(np.argmax(logp))
    logZ = logsumexp(logp)
    w = np.exp(logp - logZ)

    # Hypothesis index = sum_k digit_k L^(N-1-k); reshaping exposes each digit.
    grid = logp.reshape((L,) * N)
    log_eta = np.empty((N, L))
    for k in range(N):
        axes = tuple(j for j in range(N) if j != k)
        log_eta[k] = logsumexp(grid, axis=axes) - logZ if axes else grid - logZ
    eta = np.exp(log_eta)

    mmse = np.zeros(N, dtype=complex)
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        X = cons.points[_hypotheses(L, N, start, stop)]
        mmse += w[start:stop] @ X

    return ExactMarginals(eta_exact=eta, log_eta=log_eta,
                          map_joint=_hypotheses(L, N, best, best + 1)[0],
                          mmse_mean=mmse)
