import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csiga.baselines import exact_marginals, lmmse, matched_filter
from csiga.model import DetectionProblem, make_constellation, precompute
from csiga.ncs_iga import symbol_posteriors

from conftest import random_problem


def test_lmmse_identity():
    y = np.array([1 + 1j, 2, -3j])
    mu, s = lmmse(DetectionProblem(np.eye(3), y, 1.0))
    assert np.allclose(mu, y / 2) and np.allclose(s, 0.5)


def test_lmmse_scalar_wiener(rng):
    h = rng.standard_normal((5, 1)) + 1j * rng.standard_normal((5, 1))
    y = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    s2 = 0.4
    mu, s = lmmse(DetectionProblem(h, y, s2))
    g = np.vdot(h[:, 0], h[:, 0]).real
    assert mu[0] == pytest.approx(np.vdot(h[:, 0], y) / (g + s2), rel=1e-12)
    assert s[0] == pytest.approx(s2 / (g + s2), rel=1e-12)


def test_lmmse_residual(rng):
    p, _, _ = random_problem(rng, 16, 4)
    mu, _ = lmmse(p)
    A = p.H.conj().T @ p.H / p.sigma2 + np.eye(4)
    assert np.max(np.abs(A @ mu - p.H.conj().T @ p.y / p.sigma2)) <= 1e-10


def test_matched_filter(rng):
    y = np.array([1, 2j])
    assert np.allclose(matched_filter(DetectionProblem(np.eye(2), y, 1.0)), y)
    assert np.all(matched_filter(DetectionProblem(np.eye(2), np.zeros(2), 1.0)) == 0)
    p, _, _ = random_problem(rng, 12, 3)
    assert np.array_equal(matched_filter(p), precompute(p).mf)


def test_exact_noiseless_point_mass(rng):
    c = make_constellation(16)
    H = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    idx = np.array([3, 11, 7])
    p = DetectionProblem(H, H @ c.points[idx], 1e-8, c)
    ex = exact_marginals(p)
    assert np.array_equal(ex.map_joint, idx)
    assert np.allclose(ex.eta_exact[np.arange(3), idx], 1.0)
    assert np.allclose(ex.mmse_mean, c.points[idx])


def test_exact_scalar_reduction(rng):
    c = make_constellation(16)
    h = rng.standard_normal((4, 1)) + 1j * rng.standard_normal((4, 1))
    y = h[:, 0] * c.points[5] + 0.3 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
    s2 = 0.2
    ex = exact_marginals(DetectionProblem(h, y, s2, c))
    g = np.vdot(h[:, 0], h[:, 0]).real
    sp = symbol_posteriors(np.array([np.vdot(h[:, 0], y) / g]), np.array([s2 / g]), c)
    assert np.max(np.abs(ex.eta_exact - sp.eta)) <= 1e-12


def test_exact_tie_break():
    c = make_constellation(4)
    # points 0 and 1 are mirror images across the real axis
    p = DetectionProblem(np.ones((1, 1)), np.array([c.points[0].real + 0j]), 0.01, c)
    ex = exact_marginals(p)
    assert ex.eta_exact[0, 0] == ex.eta_exact[0, 1]
    assert ex.eta_exact[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert ex.map_joint[0] == 0


def test_exact_uniform_when_uninformative():
    c = make_constellation(4)
    ex = exact_marginals(DetectionProblem(np.zeros((2, 2)), np.zeros(2), 1.0, c))
    assert np.allclose(ex.eta_exact, 0.25)
    assert np.array_equal(ex.map_joint, [0, 0])


def test_exact_guard():
    c = make_constellation(64)
    p = DetectionProblem(np.eye(4), np.zeros(4), 1.0, c)
    with pytest.raises(ValueError):
        exact_marginals(p)
    ex = exact_marginals(DetectionProblem(np.eye(3), np.zeros(3), 1.0, c), chunk=1000)
    assert ex.eta_exact.shape == (3, 64)


def test_exact_against_bruteforce_loop(rng):
    import itertools
    c = make_constellation(4)
    p, _, _ = random_problem(rng, 4, 3, order=4, sigma2=0.5)
    ex = exact_marginals(p)
    w = {}
    for h in itertools.product(range(4), repeat=3):
        w[h] = np.exp(-np.sum(np.abs(p.y - p.H @ c.points[list(h)]) ** 2) / p.sigma2)
    Z = sum(w.values())
    for k in range(3):
        for l in range(4):
            ref = sum(v for h, v in w.items() if h[k] == l) / Z
            assert ex.eta_exact[k, l] == pytest.approx(ref, rel=1e-10)
    assert tuple(ex.map_joint) == max(w, key=w.get)


class TestProperties:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.05, 0.5, 2.0]))
    def test_permutation_equivariance_and_hull(self, seed, s2):
        rng = np.random.default_rng(seed)
        p, _, _ = random_problem(rng, 5, 3, order=4, sigma2=s2)
        perm = rng.permutation(3)
        q = DetectionProblem(p.H[:, perm], p.y, s2, p.constellation)
        a, b = exact_marginals(p), exact_marginals(q)
        assert np.allclose(a.eta_exact[perm], b.eta_exact, atol=1e-12)
        assert np.allclose(a.mmse_mean[perm], b.mmse_mean, atol=1e-12)
        lim = np.max(np.abs(p.constellation.points.real)) + 1e-12
        assert np.all(np.abs(a.mmse_mean.real) <= lim)
        assert np.all(np.abs(a.mmse_mean.imag) <= lim)
        assert np.allclose(a.eta_exact.sum(1), 1, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_lmmse_residual(self, seed):
        rng = np.random.default_rng(seed)
        p, _, _ = random_problem(rng, 16, 4, sigma2=rng.uniform(0.01, 1))
        mu, s = lmmse(p)
        A = p.H.conj().T @ p.H / p.sigma2 + np.eye(4)
        b = p.H.conj().T @ p.y / p.sigma2
        assert np.max(np.abs(A @ mu - b)) <= 1e-10 * max(1, np.max(np.abs(b)))
        assert np.all(s > 0)
