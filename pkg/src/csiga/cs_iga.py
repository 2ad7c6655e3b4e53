"""CS-IGA: linear detection by cross splitting on Gaussian manifolds.

Each user ``n`` owns an auxiliary Gaussian whose natural parameters are

    theta_n = b_n + lambda_n,     Theta_n = -(C_n + D + Lambda_n)

with free ``lambda_n`` (vector) and diagonal ``Lambda_n``.  Its exact mean and
covariance follow in O(N) from a block inverse plus Sherman-Morrison, since
``C_n`` only touches row/column ``n``.  The difference between the diagonal
m-projection of an auxiliary and its free parameters is its *belief*; beliefs
are exchanged until the means agree, at which point the objective mean
``lambda_0 / (Lambda_0 + D)`` equals the LMMSE estimate.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import IndefiniteStateError
from .ig_core import GaussianExp
from .model import precompute
from .splitting import cross_split, others

__all__ = [
    "AuxiliaryState",
    "AuxiliaryProjection",
    "LinearConfig",
    "LinearTrace",
    "LinearOutput",
    "init_state",
    "aux_moments",
    "aux_beliefs",
    "aux_full_moments",
    "all_beliefs",
    "update",
    "e_residual",
    "m_residual",
    "iterate",
    "detect",
]


@dataclass
class AuxiliaryState:
    """Free parameters at iteration ``t``.

    Row ``n`` of ``lam``/``Lam`` is ``lambda_n`` / ``diag(Lambda_n)``.
    """

    lam: np.ndarray
    Lam: np.ndarray
    lam0: np.ndarray
    Lam0: np.ndarray
    t: int = 0

    @property
    def N(self):
        return self.lam0.size

    def copy(self):
        return AuxiliaryState(self.lam.copy(), self.Lam.copy(),
                              self.lam0.copy(), self.Lam0.copy(), self.t)


@dataclass(frozen=True)
class AuxiliaryProjection:
    """Closed-form quantities of auxiliary ``n``.

    Vectors have length N-1 and follow the order of ``others(n, N)``.
    ``q`` is ``kbar_n^H Lcheck kbar_n``.
    """

    n: int
    r: float
    v: complex
    mu: complex
    q: float
    Lcheck: np.ndarray
    Lbar: np.ndarray
    R: np.ndarray


def init_state(N, mode="zero"):
    """Starting point satisfying the e-condition.

    ``"zero"`` sets every free parameter to 0.  ``"paper"`` sets
    ``lambda_n = 0``, ``Lambda_n = -1`` and picks ``Lambda_0`` so that
    ``sum_n Lambda_n + (1 - N) Lambda_0 = 0``.
    """
    lam = np.zeros((N, N), dtype=complex)
    lam0 = np.zeros(N, dtype=complex)
    if mode == "zero":
        return AuxiliaryState(lam, np.zeros((N, N)), lam0, np.zeros(N))
    if mode == "paper":
        Lam0 = np.full(N, -N / (N - 1.0)) if N > 1 else np.full(N, -1.0)
        return AuxiliaryState(lam, -np.ones((N, N)), lam0, Lam0)
    raise ValueError(f"unknown init mode {mode!r}")


def aux_moments(state, split, n):
    """Mean entry ``mu_n`` and the scalars/vectors that define auxiliary ``n``.

    Raises
    ------
    IndefiniteStateError
        If ``Lambda_n[m] + D[m] <= 0`` for some ``m != n`` or if
        ``Lambda_n[n] + d_n - kbar_n^H Lcheck_n kbar_n <= 0``.
    """
    N = split.N
    o = others(n, N)
    kb = split.kbar_rows[n, o]
    Lbar = np.abs(kb) ** 2
    den = state.Lam[n, o] + split.D[o]
    if not np.all(den > 0):
        raise IndefiniteStateError("Lambda_n + D is not positive", n=n, t=state.t)
    Lcheck = 1.0 / den
    q = float(np.sum(Lbar * Lcheck))
    rden = state.Lam[n, n] + split.D[n] - q
    if not rden > 0:
        raise IndefiniteStateError("auxiliary precision r_n^-1 is not positive",
                                   n=n, t=state.t)
    r = 1.0 / rden
    v = complex(np.sum(kb.conj() * Lcheck * state.lam[n, o]))
    mu = r * (split.b[n] + state.lam[n, n] - v)
    R = 1.0 / (1.0 + r * Lbar * Lcheck)
    return AuxiliaryProjection(n=n, r=r, v=v, mu=mu, q=q,
                               Lcheck=Lcheck, Lbar=Lbar, R=R)


def aux_full_moments(proj, state, split):
    """Full mean and covariance of auxiliary ``proj.n`` from the closed form.

    O(N^2); meant for checking against a dense inverse, not for iterating.
    """
    n, N = proj.n, split.N
    o = others(n, N)
    kb = split.kbar_rows[n, o]
    lk = proj.Lcheck * kb
    mu = np.empty(N, dtype=complex)
    mu[n] = proj.mu
    mu[o] = -proj.mu * lk + proj.Lcheck * state.lam[n, o]
    Sigma = np.empty((N, N), dtype=complex)
    Sigma[n, n] = proj.r
    m_vec = -proj.r * lk
    Sigma[o, n] = m_vec
    Sigma[n, o] = m_vec.conj()
    Sigma[np.ix_(o, o)] = np.diag(proj.Lcheck) + proj.r * np.outer(lk, lk.conj())
    return GaussianExp(mu=mu, Sigma=Sigma)


def aux_beliefs(proj, state, split):
    """Beliefs ``(xi_n, Xi_n)`` of auxiliary ``proj.n`` in natural index order.

    They are the natural parameters of the auxiliary's diagonal m-projection
    minus its free parameters (and minus ``D`` for the precision part).
    """
    n, N = proj.n, split.N
    o = others(n, N)
    kb = split.kbar_rows[n, o]
    xi = np.empty(N, dtype=complex)
    Xi = np.empty(N)
    Xi[n] = -proj.q
    Xi[o] = -proj.r * proj.Lbar * proj.R
    xi[n] = split.b[n] - proj.v
    lam_o = state.lam[n, o]
    xi[o] = proj.R * (lam_o - proj.mu * kb) - lam_o
    return xi, Xi


def all_beliefs(state, split):
    """Beliefs of every auxiliary, row ``n`` belonging to auxiliary ``n``."""
    N = split.N
    xi = np.empty((N, N), dtype=complex)
    Xi = np.empty((N, N))
    for n in range(N):
        xi[n], Xi[n] = aux_beliefs(aux_moments(state, split, n), state, split)
    return xi, Xi


def update(state, xi, Xi, alpha):
    """Damped parameter update; ``alpha = 1`` is the undamped step.

    The objective takes the sum of all beliefs, auxiliary ``n`` the sum of
    all beliefs except its own.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    S = xi.sum(axis=0)
    SS = Xi.sum(axis=0)
    a, b = alpha, 1.0 - alpha
    return AuxiliaryState(
        lam=b * state.lam + a * (S[None, :] - xi),
        Lam=b * state.Lam + a * (SS[None, :] - Xi),
        lam0=b * state.lam0 + a * S,
        Lam0=b * state.Lam0 + a * SS,
        t=state.t + 1,
    )


def e_residual(state):
    """max |sum_n (lambda_n, Lambda_n) + (1 - N)(lambda_0, Lambda_0)|."""
    N = state.N
    r1 = state.lam.sum(axis=0) + (1 - N) * state.lam0
    r2 = state.Lam.sum(axis=0) + (1 - N) * state.Lam0
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def objective_moments(state, split):
    """Diagonal mean/variance of the objective point."""
    prec = state.Lam0 + split.D
    if not np.all(prec > 0):
        bad = int(np.argmin(prec))
        raise IndefiniteStateError("objective precision Lambda_0 + D is not positive",
                                   n=bad, t=state.t)
    return state.lam0 / prec, 1.0 / prec


def m_residual(state, split):
    """max_n max |mu_n - mu_0| over the full auxiliary means."""
    mu0, _ = objective_moments(state, split)
    worst = 0.0
    for n in range(split.N):
        proj = aux_moments(state, split, n)
        o = others(n, split.N)
        kb = split.kbar_rows[n, o]
        mu_o = -proj.mu * proj.Lcheck * kb + proj.Lcheck * state.lam[n, o]
        worst = max(worst, abs(proj.mu - mu0[n]), float(np.max(np.abs(mu_o - mu0[o]), initial=0.0)))
    return worst


@dataclass(frozen=True)
class LinearConfig:
    T: int = 50
    alpha: float = 0.7
    tol: float = 1e-8
    init: str = "zero"
    engine: str = "compiled"  # or "reference" (pure numpy, per-auxiliary loop)
    record: bool = False      # keep the output mean after every iteration


@dataclass
class LinearTrace:
    iterations: int
    converged: bool
    delta: np.ndarray        # max |lambda_0 change| per iteration
    e_residual: np.ndarray   # e-condition residual after each update
    means: np.ndarray = None  # (iterations, N) when recorded
    m_residual: float = float("nan")
    elapsed: float = 0.0     # seconds spent iterating (precompute excluded)


@dataclass
class LinearOutput:
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    trace: LinearTrace = field(repr=False)


def _raise_status(status, n, t):
    if status == _kernels.BAD_LCHECK:
        raise IndefiniteStateError("Lambda_n + D is not positive", n=n, t=t)
    raise IndefiniteStateError("auxiliary precision r_n^-1 is not positive", n=n, t=t)


def iterate(split, config=None, state=None):
    """Run the damped iterations on an already split problem.

    Returns the final :class:`AuxiliaryState` and a :class:`LinearTrace`.
    """
    config = config or LinearConfig()
    if config.T < 1:
        raise ValueError("T must be at least 1")
    if not 0 < config.alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    N = split.N
    state = init_state(N, config.init) if state is None else state.copy()
    T = int(config.T)
    delta = np.zeros(T)
    eres = np.zeros(T)
    means = np.zeros((T if config.record else 0, N), dtype=complex)

    start = time.perf_counter()
    if config.engine == "compiled":
        done, status, bad = _kernels.run_linear(
            split.kbar_rows, split.Lbar_rows, split.D, split.b,
            state.lam, state.Lam, state.lam0, state.Lam0,
            float(config.alpha), T, float(config.tol), means, delta, eres)
        if status != _kernels.OK:
            _raise_status(status, bad, state.t + done + 1)
        state.t += done
    elif config.engine == "reference":
        done = 0
        for it in range(T):
            prev = state.lam0
            xi, Xi = all_beliefs(state, split)
            state = update(state, xi, Xi, config.alpha)
            delta[it] = np.max(np.abs(state.lam0 - prev))
            eres[it] = e_residual(state)
            if config.record:
                means[it] = state.lam0 / (state.Lam0 + split.D)
            done = it + 1
            if config.tol > 0 and delta[it] < config.tol:
                break
    else:
        raise ValueError(f"unknown engine {config.engine!r}")
    elapsed = time.perf_counter() - start

    converged = bool(done > 0 and delta[done - 1] < config.tol)
    trace = LinearTrace(iterations=done, converged=converged,
                        delta=delta[:done], e_residual=eres[:done],
                        means=means[:done] if config.record else None,
                        elapsed=elapsed)
    return state, trace


def detect(problem, config=None, **overrides):
    """LMMSE-equivalent detection with CS-IGA.

    Parameters
    ----------
    problem : DetectionProblem
    config : LinearConfig, optional
        Defaults to ``LinearConfig()``; keyword ``overrides`` replace fields.

    Returns
    -------
    LinearOutput
        Output mean ``(Lambda_0 + D)^{-1} lambda_0`` and variances
        ``(Lambda_0 + D)^{-1}``.  Not reaching ``tol`` within ``T``
        iterations is reported in ``trace.converged``, not raised.
    """
    config = replace(config or LinearConfig(), **overrides)
    split = cross_split(precompute(problem, "linear"))
    state, trace = iterate(split, config)
    mu_hat, sigma_hat = objective_moments(state, split)
    trace.m_residual = m_residual(state, split)
    return LinearOutput(mu_hat=mu_hat, sigma_hat=sigma_hat, trace=trace)
