"""Compiled inner loops for the cross-splitting detectors.

Every auxiliary ``n`` is handled in O(N), so one sweep over all of them is
O(N^2).  The array layout follows :class:`csiga.splitting.SplitComponents`:
row ``n`` of each ``(N, N)`` array belongs to auxiliary ``n`` and column
``m`` to user ``m``.

Status codes: 0 ok, 1 ``Lambda_n[m] + D[m] <= 0``, 2 non-positive ``1/r_n``,
3 non-positive precision of the extra point (nonlinear detector only).
"""

import numpy as np
from numba import njit

OK = 0
BAD_LCHECK = 1
BAD_R = 2
BAD_PREC = 3


@njit(cache=True)
def cross_beliefs(kb, lbar, D, mf, lam, Lam, xi, Xi):
    """Fill ``xi``/``Xi`` with the beliefs of every auxiliary; return (status, n)."""
    N = D.shape[0]
    lcheck = np.empty(N)
    for n in range(N):
        q = 0.0
        v = 0.0j
        for m in range(N):
            if m == n:
                continue
            den = Lam[n, m] + D[m]
            if not den > 0.0:
                return BAD_LCHECK, n
            lc = 1.0 / den
            lcheck[m] = lc
            q += lbar[n, m] * lc
            v += kb[n, m].conjugate() * lc * lam[n, m]
        rden = Lam[n, n] + D[n] - q
        if not rden > 0.0:
            return BAD_R, n
        r = 1.0 / rden
        mu = r * (mf[n] + lam[n, n] - v)
        for m in range(N):
            if m == n:
                continue
            R = 1.0 / (1.0 + r * lbar[n, m] * lcheck[m])
            Xi[n, m] = -r * lbar[n, m] * R
            xi[n, m] = R * (lam[n, m] - mu * kb[n, m]) - lam[n, m]
        Xi[n, n] = -q
        xi[n, n] = mf[n] - v
    return OK, -1


@njit(cache=True)
def run_linear(kb, lbar, D, mf, lam, Lam, lam0, Lam0, alpha, T, tol,
               means, delta, eres):
    """Damped CS-IGA iterations, updating the state arrays in place.

    ``means`` is either ``(T, N)`` (per-iteration output means are written)
    or ``(0, N)``.  Returns ``(iterations_done, status, n)``.
    """
    N = D.shape[0]
    xi = np.empty((N, N), dtype=np.complex128)
    Xi = np.empty((N, N))
    S = np.empty(N, dtype=np.complex128)
    SS = np.empty(N)
    record = means.shape[0] > 0
    for t in range(T):
        status, bad = cross_beliefs(kb, lbar, D, mf, lam, Lam, xi, Xi)
        if status != OK:
            return t, status, bad
        for m in range(N):
            s = 0.0j
            ss = 0.0
            for n in range(N):
                s += xi[n, m]
                ss += Xi[n, m]
            S[m] = s
            SS[m] = ss
        d = 0.0
        for m in range(N):
            new = (1.0 - alpha) * lam0[m] + alpha * S[m]
            d = max(d, abs(new - lam0[m]))
            lam0[m] = new
            Lam0[m] = (1.0 - alpha) * Lam0[m] + alpha * SS[m]
        # Sum over m != n taken as total minus own.
        for n in range(N):
            for m in range(N):
                lam[n, m] = (1.0 - alpha) * lam[n, m] + alpha * (S[m] - xi[n, m])
                Lam[n, m] = (1.0 - alpha) * Lam[n, m] + alpha * (SS[m] - Xi[n, m])
        e = 0.0
        for m in range(N):
            s = (1.0 - N) * lam0[m]
            ss = (1.0 - N) * Lam0[m]
            for n in range(N):
                s += lam[n, m]
                ss += Lam[n, m]
            e = max(e, abs(s), abs(ss))
        delta[t] = d
        eres[t] = e
        if record:
            for m in range(N):
                means[t, m] = lam0[m] / (Lam0[m] + D[m])
        if tol > 0.0 and d < tol:
            return t + 1, OK, -1
    return T, OK, -1


@njit(cache=True)
def run_soft(kb, lbar, D, mf, lam, Lam, lamh, Lamh, points, prior, alpha, T, tol,
             var_floor, mu0, s0, means, hard, soft, delta, eres, escale, floored):
    """Damped NCS-IGA iterations, updating ``lam``, ``Lam``, ``lamh``, ``Lamh``
    in place.

    ``mu0``/``s0`` receive the Gaussian mean and variance of the extra point
    from the last iteration.  ``means``, ``hard`` and ``soft`` are either
    ``(T, N)`` or ``(0, N)``.  Returns ``(iterations_done, status, n)``.
    """
    N = D.shape[0]
    L = points.shape[0]
    xi = np.empty((N, N), dtype=np.complex128)
    Xi = np.empty((N, N))
    S = np.empty(N, dtype=np.complex128)
    SS = np.empty(N)
    xe = np.zeros(N, dtype=np.complex128)
    Xe = np.zeros(N)
    logit = np.empty(L)
    record = means.shape[0] > 0
    record_prior = hard.shape[0] > 0
    for t in range(T):
        status, bad = cross_beliefs(kb, lbar, D, mf, lam, Lam, xi, Xi)
        if status != OK:
            return t, status, bad
        for m in range(N):
            s = 0.0j
            ss = 0.0
            for n in range(N):
                s += xi[n, m]
                ss += Xi[n, m]
            S[m] = s
            SS[m] = ss
        d = 0.0
        for m in range(N):
            new = alpha * S[m] + (1.0 - alpha) * lamh[m]
            d = max(d, abs(new - lamh[m]))
            lamh[m] = new
            Lamh[m] = alpha * SS[m] + (1.0 - alpha) * Lamh[m]
        for m in range(N):
            prec = Lamh[m] + D[m]
            if not prec > 0.0:
                return t, BAD_PREC, m
            mu0[m] = lamh[m] / prec
            s0[m] = 1.0 / prec
        nfloor = 0
        if prior:
            for k in range(N):
                top = -np.inf
                best = 0
                for l in range(L):
                    z = mu0[k] - points[l]
                    logit[l] = -(z.real * z.real + z.imag * z.imag) / s0[k]
                    if logit[l] > top:
                        top = logit[l]
                        best = l
                tot = 0.0
                for l in range(L):
                    logit[l] -= top
                    tot += np.exp(logit[l])
                lz = np.log(tot)
                mt = 0.0j
                for l in range(L):
                    logit[l] = np.exp(logit[l] - lz)
                    mt += logit[l] * points[l]
                var = 0.0
                for l in range(L):
                    z = points[l] - mt
                    var += logit[l] * (z.real * z.real + z.imag * z.imag)
                if var < var_floor:
                    var = var_floor
                    nfloor += 1
                xe[k] = mt / var - lamh[k]
                Xe[k] = 1.0 / var - Lamh[k] - D[k]
                if record_prior:
                    hard[t, k] = best
                    soft[t, k] = mt
        for n in range(N):
            for m in range(N):
                lam[n, m] = alpha * (S[m] + xe[m] - xi[n, m]) + (1.0 - alpha) * lam[n, m]
                Lam[n, m] = alpha * (SS[m] + Xe[m] - Xi[n, m]) + (1.0 - alpha) * Lam[n, m]
        # Extended e-condition with the objective in offset form.
        # Squared magnitudes avoid a hypot per entry; roots taken once.
        e = 0.0
        sc2 = 0.0
        for m in range(N):
            l0 = lamh[m] + xe[m]
            L0 = Lamh[m] + Xe[m]
            s = lamh[m] - N * l0
            ss = Lamh[m] - N * L0
            sc2 = max(sc2, N * N * (l0.real * l0.real + l0.imag * l0.imag), N * N * L0 * L0)
            for n in range(N):
                z = lam[n, m]
                s += z
                ss += Lam[n, m]
                sc2 = max(sc2, z.real * z.real + z.imag * z.imag, Lam[n, m] * Lam[n, m])
            e = max(e, abs(s), abs(ss))
        delta[t] = d
        eres[t] = e
        escale[t] = np.sqrt(sc2)
        floored[t] = nfloor
        if record:
            for m in range(N):
                means[t, m] = mu0[m]
        if tol > 0.0 and d < tol:
            return t + 1, OK, -1
    return T, OK, -1
