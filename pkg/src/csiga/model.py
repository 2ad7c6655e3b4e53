"""Transmission model y = Hx + z, QAM constellations and problem setup."""

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Constellation",
    "DetectionProblem",
    "PrecomputedGram",
    "make_constellation",
    "generate_channel",
    "transmit",
    "precompute",
    "snr_to_sigma2",
    "crandn",
]

SUPPORTED_ORDERS = (4, 16, 64)


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-energy square QAM with per-axis Gray labeling.

    Symbol index ``l`` carries the bit tuple ``labels[l]``, which is the
    MSB-first binary expansion of ``l``: the first half of the bits select
    the in-phase level, the second half the quadrature level.
    """

    points: np.ndarray  # (L,) complex
    labels: np.ndarray  # (L, B) uint8

    @property
    def order(self):
        return self.points.size

    @property
    def bits_per_symbol(self):
        return self.labels.shape[1]

    def bit_sets(self):
        """Boolean mask ``(B, L)``, True where bit ``i`` of symbol ``l`` is 1."""
        return self.labels.T.astype(bool)

    def nearest(self, z):
        """Index of the closest constellation point for each entry of ``z``."""
        z = np.asarray(z)
        d = np.abs(z[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)


def _gray_to_binary(g):
    b = g.copy()
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift >>= 1
    return b


def make_constellation(order):
    """Build a Gray-labeled square QAM constellation with unit average energy.

    Parameters
    ----------
    order : int
        Number of points, one of 4, 16 or 64.

    Returns
    -------
    Constellation
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported constellation order {order!r}; "
                         f"expected one of {SUPPORTED_ORDERS}")
    side = int(round(np.sqrt(order)))
    half = int(np.log2(side))
    nbits = 2 * half

    idx = np.arange(order)
    labels = ((idx[:, None] >> np.arange(nbits - 1, -1, -1)) & 1).astype(np.uint8)
    gi = idx >> half
    gq = idx & (side - 1)
    # Axis bits are a Gray code word; the level is its binary decoding.
    li = _gray_to_binary(gi)
    lq = _gray_to_binary(gq)
    amp_i = 2 * li - (side - 1)
    amp_q = 2 * lq - (side - 1)
    points = (amp_i + 1j * amp_q).astype(complex)
    points /= np.sqrt(np.mean(np.abs(points) ** 2))
    return Constellation(points=points, labels=labels)


@dataclass(frozen=True, eq=False)
class DetectionProblem:
    """Everything a detector sees: channel, observation, noise power, alphabet."""

    H: np.ndarray
    y: np.ndarray
    sigma2: float
    constellation: Constellation = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        y = np.asarray(self.y, dtype=complex).reshape(-1)
        if H.shape[0] < 1 or H.shape[1] < 1:
            raise ValueError("H must be a non-empty M x N matrix")
        if y.shape[0] != H.shape[0]:
            raise ValueError(f"y has length {y.shape[0]}, H has {H.shape[0]} rows")
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ValueError("sigma2 must be a positive finite number")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def M(self):
        return self.H.shape[0]

    @property
    def N(self):
        return self.H.shape[1]


@dataclass(frozen=True, eq=False)
class PrecomputedGram:
    """``K = H^H H / sigma2`` (plus ``I`` for the linear variant) and the
    matched filter ``mf = H^H y / sigma2``."""

    K: np.ndarray
    mf: np.ndarray
    variant: str

    @property
    def D(self):
        return self.K.diagonal().real.copy()


def crandn(rng, *shape):
    """Standard circularly symmetric complex normal samples, CN(0, 1)."""
    return np.sqrt(0.5) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_channel(M, N, rng, correlation=None, normalization="total"):
    """Draw a Rayleigh channel matrix.

    With ``normalization="total"`` entries are CN(0, 1/N), so that
    E[||H||_F^2] = M. ``"per_user"`` uses CN(0, 1/M) instead, giving each
    column unit expected energy.

    ``correlation`` in [0, 1) mixes the columns with the exponential model
    ``R[i, j] = rho^|i-j|`` (H <- H R^{1/2}). R has a unit diagonal, so the
    expected column energy is unchanged. ``None`` and ``0`` give the same
    draw.
    """
    if M < N:
        warnings.warn(f"M={M} < N={N}: the Gram matrix is rank deficient",
                      stacklevel=2)
    if normalization == "total":
        scale = 1.0 / N
    elif normalization == "per_user":
        scale = 1.0 / M
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    H = np.sqrt(scale) * crandn(rng, M, N)
    if correlation:
        if not 0 <= correlation < 1:
            raise ValueError("correlation must lie in [0, 1)")
        k = np.arange(N)
        R = correlation ** np.abs(k[:, None] - k[None, :])
        H = H @ np.linalg.cholesky(R).T
    return H


def transmit(x_indices, H, sigma2, constellation, rng):
    """Map symbol indices to points and pass them through y = Hx + z.

    The noise is CN(0, sigma2 I): real and imaginary parts each carry
    variance sigma2/2.

    Returns
    -------
    x : ndarray, shape (N,)
    y : ndarray, shape (M,)
    """
    x_indices = np.asarray(x_indices)
    if np.any(x_indices < 0) or np.any(x_indices >= constellation.order):
        raise IndexError(f"symbol index out of range [0, {constellation.order})")
    x = constellation.points[x_indices]
    z = np.sqrt(sigma2) * crandn(rng, H.shape[0])
    return x, H @ x + z


def precompute(problem, variant="linear"):
    """Form the Gram matrix and matched filter shared by all detectors."""
    if variant not in ("linear", "nonlinear"):
        raise ValueError(f"variant must be 'linear' or 'nonlinear', got {variant!r}")
    H = problem.H
    K = (H.conj().T @ H) / problem.sigma2
    if variant == "linear":
        K = K + np.eye(problem.N)
    K = 0.5 * (K + K.conj().T)
    mf = (H.conj().T @ problem.y) / problem.sigma2
    return PrecomputedGram(K=K, mf=mf, variant=variant)


def snr_to_sigma2(snr_db):
    """Noise power for a given SNR, with SNR = 1 / sigma2 (unit-energy symbols,
    E[||H||_F^2] = M)."""
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    return 10.0 ** (-snr_db / 10.0)
