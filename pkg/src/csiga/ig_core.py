"""Circular complex Gaussians in natural and expectation coordinates.

A point is ``p(x) = exp{x^H theta + theta^H x + x^H Theta x - psi}`` with
``Theta`` negative definite.  Its expectation coordinates are the mean and
covariance ``mu = -Theta^{-1} theta``, ``Sigma = -Theta^{-1}``.

Both coordinate types accept either a full ``(N, N)`` matrix or a length-N
vector holding only the diagonal; diagonal inputs stay diagonal.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import IndefiniteStateError

__all__ = [
    "GaussianNat",
    "GaussianExp",
    "nat_to_exp",
    "exp_to_nat",
    "free_energy",
    "neg_entropy",
    "kl_divergence",
    "m_project_diag",
]


@dataclass(frozen=True, eq=False)
class GaussianNat:
    theta: np.ndarray
    Theta: np.ndarray

    @property
    def is_diagonal(self):
        return np.ndim(self.Theta) == 1

    @property
    def dim(self):
        return np.size(self.theta)


@dataclass(frozen=True, eq=False)
class GaussianExp:
    mu: np.ndarray
    Sigma: np.ndarray

    @property
    def is_diagonal(self):
        return np.ndim(self.Sigma) == 1

    @property
    def dim(self):
        return np.size(self.mu)


def _as_vec(v):
    return np.atleast_1d(np.asarray(v, dtype=complex))


def _cho_pd(A, what):
    """Cholesky factor of a Hermitian positive definite matrix."""
    try:
        return linalg.cho_factor(A, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise IndefiniteStateError(f"{what} is not positive definite") from exc


def _diag_pd(d, what):
    d = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise IndefiniteStateError(f"{what} has non-positive diagonal entries")
    return d


def _invert_pd(A, what):
    """Return (A^{-1}, log det A) for Hermitian PD ``A`` (full or diagonal)."""
    if np.ndim(A) == 1:
        d = _diag_pd(A, what)
        return 1.0 / d, float(np.sum(np.log(d)))
    c = _cho_pd(A, what)
    inv = linalg.cho_solve(c, np.eye(A.shape[0]))
    logdet = 2.0 * float(np.sum(np.log(np.abs(np.diag(c[0])))))
    return 0.5 * (inv + inv.conj().T), logdet


def _apply(A, v):
    return A * v if np.ndim(A) == 1 else A @ v


def nat_to_exp(p):
    """Natural to expectation coordinates: ``Sigma = -Theta^{-1}``, ``mu = Sigma theta``."""
    Sigma, _ = _invert_pd(-np.asarray(p.Theta), "-Theta")
    return GaussianExp(mu=_apply(Sigma, _as_vec(p.theta)), Sigma=Sigma)


def exp_to_nat(q):
    """Expectation to natural coordinates: ``Theta = -Sigma^{-1}``, ``theta = Sigma^{-1} mu``."""
    P, _ = _invert_pd(np.asarray(q.Sigma), "Sigma")
    return GaussianNat(theta=_apply(P, _as_vec(q.mu)), Theta=-P)


def free_energy(p):
    """Log-normalizer ``psi = N log(pi) - log det(-Theta) - theta^H Theta^{-1} theta``."""
    theta = _as_vec(p.theta)
    Sigma, logdet_prec = _invert_pd(-np.asarray(p.Theta), "-Theta")
    quad = np.vdot(theta, _apply(Sigma, theta)).real
    return theta.size * np.log(np.pi) - logdet_prec + quad


def neg_entropy(q):
    """Negative differential entropy ``-log det Sigma - N (log pi + 1)``.

    The additive constant makes ``kl_divergence(q, exp_to_nat(q))`` vanish.
    """
    _, logdet = _invert_pd(np.asarray(q.Sigma), "Sigma")
    n = np.size(q.mu)
    return -logdet - n * (np.log(np.pi) + 1.0)


def kl_divergence(q, p):
    """KL divergence D(q || p) from the two potentials.

    Parameters
    ----------
    q : GaussianExp
        The distribution the expectation is taken under.
    p : GaussianNat
        The reference point.
    """
    mu = _as_vec(q.mu)
    theta = _as_vec(p.theta)
    if mu.size != theta.size:
        raise ValueError(f"dimension mismatch: {mu.size} vs {theta.size}")
    Sigma = q.Sigma if np.ndim(q.Sigma) == 2 else np.diag(np.asarray(q.Sigma, dtype=float))
    Theta = p.Theta if np.ndim(p.Theta) == 2 else np.diag(np.asarray(p.Theta, dtype=float))
    second = Sigma + np.outer(mu, mu.conj())
    cross = 2.0 * np.vdot(mu, theta).real + np.trace(second @ Theta).real
    return float(neg_entropy(q) + free_energy(p) - cross)


def m_project_diag(q):
    """m-projection onto the diagonal-covariance manifold.

    The KL-closest diagonal Gaussian keeps the mean and the variances and
    drops every covariance term.
    """
    if q.is_diagonal:
        return GaussianExp(mu=_as_vec(q.mu).copy(),
                           Sigma=np.asarray(q.Sigma, dtype=float).copy())
    return GaussianExp(mu=_as_vec(q.mu).copy(), Sigma=np.diagonal(q.Sigma).real.copy())
