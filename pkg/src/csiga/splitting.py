"""Cross splitting of the Gram matrix into per-user rank-2 pieces.

``K = sum_n C_n + diag(D)`` where ``C_n`` is zero except for row and column
``n``.  With index ``n`` moved to the front (others kept in order) it reads

    [[0,       kbar_n^H],
     [kbar_n,  0       ]]

and ``kbar_n`` holds half of the off-diagonal part of column ``n`` of ``K``.
Every off-diagonal entry ``K[m, n]`` is thus shared equally by ``C_m`` and
``C_n``.  The matched filter splits the same way: ``b_n`` is zero except for
``mf[n]``.

The permutation is never formed.  ``kbar`` is stored as an ``(N, N)`` array
whose row ``n`` holds ``kbar_n`` at the original positions ``m != n`` and a
zero at ``m = n``.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["SplitComponents", "cross_split", "assemble_cross_matrix", "others"]

HERMITIAN_TOL = 1e-12


def others(n, N):
    """Indices ``0..N-1`` with ``n`` removed, in order (the trailing block of P_1n)."""
    return np.concatenate((np.arange(n), np.arange(n + 1, N)))


@dataclass(frozen=True, eq=False)
class SplitComponents:
    D: np.ndarray       # (N,) real
    kbar_rows: np.ndarray  # (N, N) complex, row n = kbar_n, zero diagonal
    b: np.ndarray       # (N,) complex

    @property
    def N(self):
        return self.D.size

    def kbar(self, n):
        """``kbar_n`` as a length N-1 vector in the order of :func:`others`."""
        return self.kbar_rows[n, others(n, self.N)]

    @property
    def Lbar_rows(self):
        return np.abs(self.kbar_rows) ** 2


def cross_split(gram):
    """Split a precomputed Gram matrix into ``(D, kbar, b)``.

    Raises
    ------
    ValueError
        If ``gram.K`` is not Hermitian to within 1e-12 (relative to its
        largest entry).
    """
    K = np.asarray(gram.K)
    scale = max(1.0, float(np.max(np.abs(K))))
    if np.max(np.abs(K - K.conj().T)) > HERMITIAN_TOL * scale:
        raise ValueError("K is not Hermitian")
    kbar_rows = 0.5 * K.T.copy()  # row n = 0.5 * column n of K
    np.fill_diagonal(kbar_rows, 0.0)
    return SplitComponents(D=K.diagonal().real.copy(),
                           kbar_rows=kbar_rows,
                           b=np.asarray(gram.mf, dtype=complex).copy())


def assemble_cross_matrix(split, n):
    """Dense ``C_n`` (for tests and oracles only)."""
    N = split.N
    if not 0 <= n < N:
        raise IndexError(f"index {n} out of range for N={N}")
    C = np.zeros((N, N), dtype=complex)
    C[:, n] = split.kbar_rows[n]
    C[n, :] = split.kbar_rows[n].conj()
    return C
