"""NCS-IGA: nonlinear detection with a discrete constellation prior.

The CS-IGA backbone runs on ``K = H^H H / sigma2`` (no identity: the prior is
no longer Gaussian).  An extra auxiliary point carries the prior.  Its Gaussian
part is the sum of all beliefs.  Each iteration multiplies that Gaussian
by the uniform constellation prior per user, moment matches the resulting
discrete posterior back to a Gaussian, and returns the difference as the
prior's belief.  After the last iteration, per-user symbol probabilities
become bit LLRs.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .cs_iga import init_state
from .errors import IndefiniteStateError
from .model import precompute
from .splitting import cross_split

__all__ = [
    "ExtraState",
    "SymbolPosterior",
    "SoftConfig",
    "SoftTrace",
    "LlrOutput",
    "symbol_posteriors",
    "extra_beliefs",
    "llr_from_eta",
    "detect_soft",
]

VAR_FLOOR = 1e-12
LLR_CLIP = 30.0


@dataclass
class ExtraState:
    """Gaussian part of the extra auxiliary point plus the prior's belief.

    ``Lambda_hat0`` is an offset on top of ``D``: the precision of the Gaussian
    part is ``Lambda_hat0 + D``.
    """

    lam_hat0: np.ndarray
    Lam_hat0: np.ndarray
    xi_e: np.ndarray = None
    Xi_e: np.ndarray = None


@dataclass
class SymbolPosterior:
    eta: np.ndarray         # (N, L), rows sum to one
    log_eta: np.ndarray     # normalized log-probabilities
    mu_tilde: np.ndarray    # (N,) moment-matched mean
    sigma_tilde: np.ndarray  # (N,) moment-matched variance, floored
    floored: int = 0        # number of variances raised to the floor


def symbol_posteriors(mu0, sigma0, constellation, var_floor=VAR_FLOOR):
    """Per-user posterior over the constellation and its Gaussian moments.

    ``eta[k, l]`` is proportional to ``exp(-|mu0[k] - c_l|^2 / sigma0[k])``
    (uniform prior), evaluated in the log domain with the row maximum
    subtracted.
    """
    mu0 = np.asarray(mu0, dtype=complex)
    sigma0 = np.asarray(sigma0, dtype=float)
    if np.any(~(sigma0 > 0)):
        raise ValueError("sigma0 must be positive")
    c = constellation.points
    logits = -np.abs(mu0[:, None] - c[None, :]) ** 2 / sigma0[:, None]
    logits -= logits.max(axis=1, keepdims=True)
    log_eta = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    eta = np.exp(log_eta)
    mu_t = eta @ c
    var = np.sum(eta * np.abs(c[None, :] - mu_t[:, None]) ** 2, axis=1)
    floored = int(np.count_nonzero(var < var_floor))
    return SymbolPosterior(eta=eta, log_eta=log_eta, mu_tilde=mu_t,
                           sigma_tilde=np.maximum(var, var_floor), floored=floored)


def extra_beliefs(sp, extra, D):
    """Belief of the prior: moment-matched natural parameters minus the
    Gaussian part of the extra point.

    The matched precision ``1 / sigma_tilde`` is a full precision, so ``D`` is
    removed to express the difference as an offset.
    """
    if np.any(~(sp.sigma_tilde > 0)):
        raise ValueError("sigma_tilde must be positive")
    prec = 1.0 / sp.sigma_tilde
    xi_e = sp.mu_tilde * prec - extra.lam_hat0
    Xi_e = prec - extra.Lam_hat0 - D
    return xi_e, Xi_e


def llr_from_eta(sp, constellation, clip=LLR_CLIP):
    """Bit LLRs ``ln P(b_i = 0) / P(b_i = 1)``, shape ``(N, B)``, clipped to ±clip."""
    log_eta = getattr(sp, "log_eta", None)
    if log_eta is None:
        with np.errstate(divide="ignore"):
            log_eta = np.log(sp.eta)
    ones = constellation.bit_sets()
    N, B = log_eta.shape[0], ones.shape[0]
    llr = np.empty((N, B))
    with np.errstate(invalid="ignore"):
        for i in range(B):
            l0 = logsumexp(log_eta[:, ~ones[i]], axis=1)
            l1 = logsumexp(log_eta[:, ones[i]], axis=1)
            llr[:, i] = l0 - l1
    llr = np.nan_to_num(llr, nan=0.0, posinf=clip, neginf=-clip)
    return np.clip(llr, -clip, clip)


@dataclass(frozen=True)
class SoftConfig:
    T: int = 10
    alpha: float = 0.5
    tol: float = 0.0          # stop once max |lambda_hat0 change| < tol (0: run all T)
    clip: float = LLR_CLIP
    var_floor: float = VAR_FLOOR
    init: str = "zero"
    prior: bool = True        # False skips the constellation step (testing only)
    gram: str = "nonlinear"   # "linear" adds the identity to K (testing only)
    record: bool = False      # keep per-iteration means and hard decisions
    engine: str = "compiled"  # or "reference" (numpy loop)


@dataclass
class SoftTrace:
    iterations: int
    delta: np.ndarray
    e_residual: np.ndarray
    floored: np.ndarray
    e_scale: np.ndarray = None  # largest |term| entering each e_residual
    means: np.ndarray = None   # (iterations, N) Gaussian means mu_hat0
    soft: np.ndarray = None    # (iterations, N) moment-matched means mu_tilde
    hard: np.ndarray = None    # (iterations, N) argmax eta after each iteration
    m_residual: float = float("nan")
    elapsed: float = 0.0


@dataclass
class LlrOutput:
    llr: np.ndarray
    posterior: SymbolPosterior
    hard: np.ndarray
    mu_hat0: np.ndarray
    sigma_hat0: np.ndarray
    trace: SoftTrace = field(repr=False)

    @property
    def eta(self):
        return self.posterior.eta


def _soft_e_residual(lam, lam_hat0, lam0, Lam, Lam_hat0, Lam0):
    """Extended e-condition residual and the magnitude of the summed terms."""
    N = lam0.size
    r1 = lam.sum(axis=0) + lam_hat0 - N * lam0
    r2 = Lam.sum(axis=0) + Lam_hat0 - N * Lam0
    res = float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))
    scale = float(max(np.max(np.abs(lam)), np.max(np.abs(Lam)),
                      N * np.max(np.abs(lam0)), N * np.max(np.abs(Lam0))))
    return res, scale


def _raise_status(status, n, t):
    if status == _kernels.BAD_LCHECK:
        raise IndefiniteStateError("Lambda_n + D is not positive", n=n, t=t)
    if status == _kernels.BAD_R:
        raise IndefiniteStateError("auxiliary precision r_n^-1 is not positive", n=n, t=t)
    raise IndefiniteStateError("Lambda_hat0 + D is not positive", n=n, t=t)


def _iterate_reference(split, cons, config, lam, Lam, extra, hist):
    """Plain numpy loop over the iterations, one array operation per step."""
    N, D = split.N, split.D
    kb, lbar, b = split.kbar_rows, split.Lbar_rows, split.b
    a = float(config.alpha)
    xi = np.empty((N, N), dtype=complex)
    Xi = np.empty((N, N))
    mu_hat0 = sigma_hat0 = None
    done = 0
    for t in range(int(config.T)):
        status, bad = _kernels.cross_beliefs(kb, lbar, D, b, lam, Lam, xi, Xi)
        if status != _kernels.OK:
            _raise_status(status, bad, t + 1)
        S = xi.sum(axis=0)
        SS = Xi.sum(axis=0)
        new_lam_hat0 = a * S + (1 - a) * extra.lam_hat0
        hist["delta"][t] = np.max(np.abs(new_lam_hat0 - extra.lam_hat0))
        extra = ExtraState(lam_hat0=new_lam_hat0,
                           Lam_hat0=a * SS + (1 - a) * extra.Lam_hat0)

        prec_hat = extra.Lam_hat0 + D
        if not np.all(prec_hat > 0):
            _raise_status(_kernels.BAD_PREC, int(np.argmin(prec_hat)), t + 1)
        mu_hat0 = extra.lam_hat0 / prec_hat
        sigma_hat0 = 1.0 / prec_hat

        if config.prior:
            sp = symbol_posteriors(mu_hat0, sigma_hat0, cons, config.var_floor)
            extra.xi_e, extra.Xi_e = extra_beliefs(sp, extra, D)
            hist["floored"][t] = sp.floored
            if hist["hard"].shape[0]:
                hist["hard"][t] = np.argmax(sp.eta, axis=1)
                hist["soft"][t] = sp.mu_tilde
        else:
            extra.xi_e = np.zeros(N, dtype=complex)
            extra.Xi_e = np.zeros(N)

        lam = a * (S[None, :] + extra.xi_e[None, :] - xi) + (1 - a) * lam
        Lam = a * (SS[None, :] + extra.Xi_e[None, :] - Xi) + (1 - a) * Lam
        # Objective point in offset form: precision Lambda_0 + D.
        lam0 = extra.lam_hat0 + extra.xi_e
        Lam0 = extra.Lam_hat0 + extra.Xi_e
        hist["eres"][t], hist["escale"][t] = _soft_e_residual(
            lam, extra.lam_hat0, lam0, Lam, extra.Lam_hat0, Lam0)
        if hist["means"].shape[0]:
            hist["means"][t] = mu_hat0
        done = t + 1
        if config.tol > 0 and hist["delta"][t] < config.tol:
            break
    return done, mu_hat0, sigma_hat0


def _iterate_compiled(split, cons, config, lam, Lam, extra, hist):
    N = split.N
    points = cons.points if config.prior else np.zeros(1, dtype=complex)
    mu_hat0 = np.empty(N, dtype=complex)
    sigma_hat0 = np.empty(N)
    done, status, bad = _kernels.run_soft(
        split.kbar_rows, split.Lbar_rows, split.D, split.b, lam, Lam,
        extra.lam_hat0, extra.Lam_hat0, points, bool(config.prior),
        float(config.alpha), int(config.T), float(config.tol), float(config.var_floor),
        mu_hat0, sigma_hat0, hist["means"], hist["hard"], hist["soft"],
        hist["delta"], hist["eres"], hist["escale"], hist["floored"])
    if status != _kernels.OK:
        _raise_status(status, bad, done + 1)
    return done, mu_hat0, sigma_hat0


def detect_soft(problem, config=None, **overrides):
    """Soft-output detection with NCS-IGA.

    Parameters
    ----------
    problem : DetectionProblem
        Must carry a constellation.
    config : SoftConfig, optional
        Keyword ``overrides`` replace its fields.

    Returns
    -------
    LlrOutput
    """
    config = replace(config or SoftConfig(), **overrides)
    if config.T < 1:
        raise ValueError("T must be at least 1")
    if not 0 < config.alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if config.engine not in ("compiled", "reference"):
        raise ValueError(f"unknown engine {config.engine!r}")
    cons = problem.constellation
    if cons is None and config.prior:
        raise ValueError("problem has no constellation")

    split = cross_split(precompute(problem, config.gram))
    N = split.N
    st = init_state(N, config.init)
    extra = ExtraState(lam_hat0=np.zeros(N, dtype=complex), Lam_hat0=np.zeros(N))
    T = int(config.T)
    R = T if config.record else 0
    RP = R if config.prior else 0
    hist = {"delta": np.zeros(T), "eres": np.zeros(T), "escale": np.zeros(T),
            "floored": np.zeros(T, dtype=np.int64),
            "means": np.zeros((R, N), dtype=complex),
            "hard": np.zeros((RP, N), dtype=np.int64),
            "soft": np.zeros((RP, N), dtype=complex)}

    run = _iterate_compiled if config.engine == "compiled" else _iterate_reference
    start = time.perf_counter()
    done, mu_hat0, sigma_hat0 = run(split, cons, config, st.lam, st.Lam, extra, hist)
    elapsed = time.perf_counter() - start

    sp = None
    m_res = float("nan")
    if config.prior:
        sp = symbol_posteriors(mu_hat0, sigma_hat0, cons, config.var_floor)
        m_res = float(max(np.max(np.abs(sp.mu_tilde - mu_hat0)),
                          np.max(np.abs(sp.sigma_tilde - sigma_hat0))))
    trace = SoftTrace(iterations=done, delta=hist["delta"][:done],
                      e_residual=hist["eres"][:done], floored=hist["floored"][:done],
                      e_scale=hist["escale"][:done],
                      means=hist["means"][:done] if R else None,
                      hard=hist["hard"][:done] if RP else None,
                      soft=hist["soft"][:done] if RP else None,
                      m_residual=m_res, elapsed=elapsed)
    if sp is None:
        return LlrOutput(llr=None, posterior=None, hard=None, mu_hat0=mu_hat0,
                         sigma_hat0=sigma_hat0, trace=trace)
    return LlrOutput(llr=llr_from_eta(sp, cons, config.clip), posterior=sp,
                     hard=np.argmax(sp.eta, axis=1), mu_hat0=mu_hat0,
                     sigma_hat0=sigma_hat0, trace=trace)
