import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csiga.baselines import exact_marginals
from csiga.cs_iga import detect
from csiga.ig_core import GaussianExp, exp_to_nat
from csiga.model import Constellation, DetectionProblem, make_constellation, snr_to_sigma2
from csiga.ncs_iga import (ExtraState, SymbolPosterior, detect_soft, extra_beliefs,
                           llr_from_eta, symbol_posteriors)

from conftest import random_problem


def _enumerate_moments(mu0, s0, points):
    """Discrete posterior moments by explicit per-point loops."""
    mt, st_ = [], []
    for m, s in zip(mu0, s0):
        logs = [-abs(m - c) ** 2 / s for c in points]
        top = max(logs)
        w = [np.exp(v - top) for v in logs]
        Z = sum(w)
        w = [x / Z for x in w]
        mean = sum(x * c for x, c in zip(w, points))
        mt.append(mean)
        st_.append(sum(x * abs(c - mean) ** 2 for x, c in zip(w, points)))
    return np.array(mt), np.array(st_)


def test_point_mass_limit():
    c = make_constellation(16)
    sp = symbol_posteriors(c.points[[3, 9]], np.array([1e-9, 1e-9]), c)
    assert np.allclose(sp.eta[[0, 1], [3, 9]], 1.0)
    assert np.allclose(sp.mu_tilde, c.points[[3, 9]])
    assert np.all(sp.sigma_tilde == 1e-12) and sp.floored == 2


def test_symmetric_qpsk():
    c = make_constellation(4)
    sp = symbol_posteriors(np.zeros(2), np.array([0.3, 7.0]), c)
    assert np.allclose(sp.eta, 0.25, atol=1e-15)
    assert np.allclose(sp.mu_tilde, 0, atol=1e-15)
    assert np.allclose(sp.sigma_tilde, 1.0)
    assert np.all(llr_from_eta(sp, c) == 0)


def test_moments_match_enumeration(rng):
    c = make_constellation(16)
    mu0 = 0.8 * (rng.standard_normal(20) + 1j * rng.standard_normal(20))
    s0 = rng.uniform(0.01, 2, 20)
    sp = symbol_posteriors(mu0, s0, c)
    m, v = _enumerate_moments(mu0, s0, c.points)
    assert np.max(np.abs(sp.mu_tilde - m)) <= 1e-12
    assert np.max(np.abs(sp.sigma_tilde - v)) <= 1e-12


def test_symbol_posteriors_rejects_nonpositive_variance():
    with pytest.raises(ValueError):
        symbol_posteriors(np.zeros(2), np.array([1.0, 0.0]), make_constellation(4))


def test_extra_beliefs_examples():
    sp = SymbolPosterior(np.full((1, 4), 0.25), None, np.zeros(1, complex), np.ones(1))
    xi, Xi = extra_beliefs(sp, ExtraState(np.zeros(1, complex), np.zeros(1)), np.ones(1))
    assert xi[0] == 0 and Xi[0] == 0
    sp = SymbolPosterior(None, None, np.ones(1, complex), np.array([0.5]))
    xi, Xi = extra_beliefs(sp, ExtraState(np.ones(1, complex), np.ones(1)), np.zeros(1))
    assert xi[0] == 1 and Xi[0] == 1


def test_extra_beliefs_round_trip(rng):
    c = make_constellation(16)
    sp = symbol_posteriors(rng.standard_normal(5) + 0j, rng.uniform(0.1, 1, 5), c)
    lam_hat = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    D = rng.uniform(1, 3, 5)
    xi, Xi = extra_beliefs(sp, ExtraState(lam_hat, rng.uniform(0, 1, 5)), D)
    nat = exp_to_nat(GaussianExp(sp.mu_tilde, sp.sigma_tilde))
    assert np.max(np.abs(lam_hat + xi - nat.theta)) <= 1e-12


def test_llr_point_mass():
    c = make_constellation(4)
    eta = np.zeros((1, 4))
    eta[0, 1] = 1.0  # bits 01
    with np.errstate(divide="ignore"):
        sp = SymbolPosterior(eta, np.log(eta), None, None)
    assert np.array_equal(llr_from_eta(sp, c, clip=30), [[30.0, -30.0]])
    sp2 = SymbolPosterior(eta, None, None, None)
    assert np.array_equal(llr_from_eta(sp2, c, clip=30), [[30.0, -30.0]])


def test_llr_uniform():
    c = make_constellation(16)
    eta = np.full((3, 16), 1 / 16)
    assert np.all(llr_from_eta(SymbolPosterior(eta, np.log(eta), None, None), c) == 0)


def _llr_direct(eta, cons):
    out = np.empty((eta.shape[0], cons.bits_per_symbol))
    for k in range(eta.shape[0]):
        for i in range(cons.bits_per_symbol):
            p0 = sum(eta[k, l] for l in range(cons.order) if cons.labels[l, i] == 0)
            p1 = sum(eta[k, l] for l in range(cons.order) if cons.labels[l, i] == 1)
            out[k, i] = np.log(p0 / p1)
    return out


def test_llr_reference_64qam(rng):
    c = make_constellation(64)
    eta = rng.dirichlet(np.ones(64), size=6)
    sp = SymbolPosterior(eta, np.log(eta), None, None)
    assert np.max(np.abs(llr_from_eta(sp, c, clip=1e9) - _llr_direct(eta, c))) <= 1e-12


def test_noiseless_identity_channel():
    c = make_constellation(4)
    idx = np.array([0, 3, 1, 2])
    p = DetectionProblem(np.eye(4), c.points[idx], 1e-6, c)
    out = detect_soft(p, T=2)
    assert np.array_equal(out.hard, idx)
    assert np.all(np.abs(out.llr) == 30)


def test_orthogonal_columns_high_snr(rng):
    c = make_constellation(16)
    Q, _ = np.linalg.qr(rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12)))
    H = Q[:, :5]
    s2 = snr_to_sigma2(60)
    for _ in range(20):
        idx = rng.integers(0, 16, 5)
        z = np.sqrt(s2 / 2) * (rng.standard_normal(12) + 1j * rng.standard_normal(12))
        out = detect_soft(DetectionProblem(H, H @ c.points[idx] + z, s2, c))
        assert np.array_equal(out.hard, idx)


def test_backbone_matches_linear_detector(rng):
    p, _, _ = random_problem(rng, 32, 8)
    soft = detect_soft(p, T=25, alpha=0.6, prior=False, gram="linear", record=True)
    lin = detect(p, T=25, alpha=0.6, tol=0, record=True)
    assert soft.llr is None
    assert np.max(np.abs(soft.trace.means - lin.trace.means)) <= 1e-12


@pytest.mark.parametrize("snr", [0, 5])
def test_undamped_e_condition(rng, snr):
    p, _, _ = random_problem(rng, 32, 8, order=16, sigma2=snr_to_sigma2(snr))
    out = detect_soft(p, T=10, alpha=1.0)
    assert np.all(out.trace.floored == 0)
    assert np.all(out.trace.e_residual <= 1e-9)


def test_undamped_e_condition_with_floored_variances(rng):
    # floored variances put precisions near 1e12, so only a relative bound is meaningful
    p, _, _ = random_problem(rng, 32, 8, order=16, sigma2=snr_to_sigma2(15))
    out = detect_soft(p, T=10, alpha=1.0)
    assert np.any(out.trace.floored > 0)
    assert np.all(out.trace.e_residual <= 1e-9 * out.trace.e_scale)


def test_agreement_with_exact_small(rng):
    agree = total = 0
    for _ in range(200):
        p, _, _ = random_problem(rng, 8, 2, order=4, sigma2=snr_to_sigma2(8))
        out = detect_soft(p, T=10)
        ex = exact_marginals(p)
        agree += np.sum(out.hard == np.argmax(ex.eta_exact, axis=1))
        total += 2
    assert agree / total >= 0.95


def test_record_and_trace(rng):
    p, idx, _ = random_problem(rng, 32, 8, order=4, sigma2=0.05)
    out = detect_soft(p, T=6, record=True)
    assert out.trace.hard.shape == (6, 8) and out.trace.soft.shape == (6, 8)
    assert np.array_equal(out.trace.hard[-1], out.hard)
    assert np.isfinite(out.trace.m_residual)
    assert out.eta.shape == (8, 4)
    assert np.allclose(out.eta.sum(1), 1, atol=1e-12)


def test_config_validation(rng):
    p, _, _ = random_problem(rng, 8, 2, order=4)
    with pytest.raises(ValueError):
        detect_soft(p, T=0)
    with pytest.raises(ValueError):
        detect_soft(p, alpha=0)
    with pytest.raises(ValueError):
        detect_soft(DetectionProblem(p.H, p.y, p.sigma2))


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from([4, 16, 64]), st.integers(0, 2**32 - 1))
    def test_eta_stochastic_and_moments_exact(self, order, seed):
        rng = np.random.default_rng(seed)
        c = make_constellation(order)
        mu0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        s0 = 10 ** rng.uniform(-4, 1, 4)
        sp = symbol_posteriors(mu0, s0, c)
        assert np.allclose(sp.eta.sum(1), 1, atol=1e-12)
        assert np.all(sp.eta >= 0)
        m, v = _enumerate_moments(mu0, s0, c.points)
        assert np.max(np.abs(sp.mu_tilde - m)) <= 1e-12
        assert np.max(np.abs(sp.sigma_tilde - np.maximum(v, 1e-12))) <= 1e-12
        assert np.all(np.abs(sp.mu_tilde) <= np.max(np.abs(c.points)) + 1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from([4, 16, 64]), st.integers(0, 2**32 - 1))
    def test_llr_antisymmetry_under_bit_flip(self, order, seed):
        rng = np.random.default_rng(seed)
        c = make_constellation(order)
        B = c.bits_per_symbol
        flip = rng.integers(0, 2, B).astype(np.uint8)
        relabeled = Constellation(c.points, c.labels ^ flip)
        sp = symbol_posteriors(rng.standard_normal(3) + 1j * rng.standard_normal(3),
                               rng.uniform(0.05, 1, 3), c)
        a = llr_from_eta(sp, c)
        b = llr_from_eta(sp, relabeled)
        sign = np.where(flip == 1, -1.0, 1.0)
        assert np.allclose(b, a * sign[None, :], atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from([4, 16, 64]), st.integers(0, 2**32 - 1))
    def test_llr_reference(self, order, seed):
        rng = np.random.default_rng(seed)
        c = make_constellation(order)
        eta = rng.dirichlet(np.ones(order), size=2)
        sp = SymbolPosterior(eta, np.log(eta), None, None)
        assert np.max(np.abs(llr_from_eta(sp, c, clip=1e9) - _llr_direct(eta, c))) <= 1e-12


@pytest.mark.parametrize("order,snr", [(4, 4), (16, 12), (64, 25)])
def test_engines_agree(rng, order, snr):
    p, _, _ = random_problem(rng, 32, 8, order=order, sigma2=snr_to_sigma2(snr))
    a = detect_soft(p, T=8, record=True)
    b = detect_soft(p, T=8, record=True, engine="reference")
    assert np.max(np.abs(a.trace.means - b.trace.means)) <= 1e-9 * np.max(np.abs(b.trace.means))
    assert np.array_equal(a.trace.hard, b.trace.hard)
    assert np.array_equal(a.trace.floored, b.trace.floored)
    assert np.max(np.abs(a.llr - b.llr)) <= 1e-6
    c = detect_soft(p, T=8, prior=False, engine="reference", record=True)
    d = detect_soft(p, T=8, prior=False, record=True)
    assert np.max(np.abs(c.trace.means - d.trace.means)) <= 1e-9 * np.max(np.abs(c.trace.means))
