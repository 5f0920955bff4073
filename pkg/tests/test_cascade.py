import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfcascade import CascadeModel
from mfcascade.cascade import (
    cascade_field,
    log2_capacity,
    log2_capacity_3I,
    log2_capacity_paths,
    q_of_tau,
    q_of_tau_prime,
    sigma,
    tau,
    tau_prime,
)
from mfcascade.dyadic import DyadicIndex
from mfcascade.spectra import SpectrumCurve, legendre

from conftest import random_multifractal


class TestModelValidation:
    def test_weight_sum(self):
        with pytest.raises(ValueError):
            CascadeModel(d=1, weights=(0.3, 0.6))

    def test_positive_weights(self):
        with pytest.raises(ValueError):
            CascadeModel(d=1, weights=(0.0, 1.0))

    def test_weight_count(self):
        with pytest.raises(ValueError):
            CascadeModel(d=2, weights=(0.5, 0.5))

    def test_flags(self, binomial, uniform1d):
        assert binomial.is_multifractal
        assert not uniform1d.is_multifractal
        assert binomial.top_multiplicity == 1
        assert uniform1d.top_multiplicity == 2


class TestCapacity:
    def test_uniform_is_volume(self, uniform1d):
        for k in (0, 11, 31):
            assert log2_capacity(uniform1d, DyadicIndex(5, (k,))) == pytest.approx(-5)

    def test_path_product(self, binomial):
        # path digits (0,1,1): independent product oracle
        idx = DyadicIndex(3, (0b011,))
        expect = math.log2(0.25 * 0.75 * 0.75)
        assert log2_capacity(binomial, idx) == pytest.approx(expect, abs=1e-12)

    def test_gamma_scales(self):
        m2 = CascadeModel(d=1, weights=(0.25, 0.75), gamma=2.0)
        expect = 2 * math.log2(0.25 * 0.75 * 0.75)
        assert log2_capacity(m2, DyadicIndex(3, (0b011,))) == pytest.approx(expect, abs=1e-12)

    def test_2d_symbols(self, quad2d):
        # coords (1,0) at j=1: bit_x=1, bit_y=0 -> symbol 1 -> weight 0.4
        assert log2_capacity(quad2d, DyadicIndex(1, (1, 0))) == pytest.approx(math.log2(0.4))
        assert log2_capacity(quad2d, DyadicIndex(1, (0, 1))) == pytest.approx(math.log2(0.1))

    def test_cascade_field_matches_pointwise(self, binomial):
        f = cascade_field(binomial, 6)
        paths = np.arange(64, dtype=np.int64)
        assert np.allclose(f, log2_capacity_paths(binomial, paths, 6), atol=1e-12)


class TestCapacity3I:
    def test_uniform_interior(self, uniform1d):
        got = log2_capacity_3I(uniform1d, DyadicIndex(5, (7,)))
        assert got == pytest.approx(math.log2(3 * 2.0**-5), abs=1e-12)

    def test_uniform_boundary(self, uniform1d):
        got = log2_capacity_3I(uniform1d, DyadicIndex(5, (0,)))
        assert got == pytest.approx(-4.0, abs=1e-12)

    def test_binomial_enumeration(self, binomial):
        # neighbors of (j=2, k=1): masses of [0,1/4), [1/4,1/2), [1/2,3/4)
        got = log2_capacity_3I(binomial, DyadicIndex(2, (1,)))
        expect = math.log2(1 / 16 + 3 / 16 + 3 / 16)
        assert got == pytest.approx(expect, abs=1e-12)


class TestClosedForms:
    def test_uniform_tau_linear(self, uniform1d):
        q = np.linspace(-8, 8, 33)
        assert np.allclose(tau(uniform1d, q), q - 1, atol=1e-12)

    def test_anchors(self, binomial):
        assert tau(binomial, 0.0) == pytest.approx(-1.0, abs=1e-12)
        assert tau(binomial, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert tau(binomial, 2.0) == pytest.approx(-math.log2(10 / 16), abs=1e-12)

    def test_tau_prime_entropy(self, binomial):
        h = -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
        assert tau_prime(binomial, 1.0) == pytest.approx(h, abs=1e-12)
        assert sigma(binomial, h) == pytest.approx(h, abs=1e-10)

    def test_sigma_outside_domain(self, binomial):
        assert sigma(binomial, 0.2) == -np.inf
        assert sigma(binomial, 2.5) == -np.inf

    def test_sigma_endpoints_multiplicity(self, binomial, quad2d):
        assert sigma(binomial, binomial.H_min) == pytest.approx(0.0)
        assert sigma(binomial, binomial.H_max) == pytest.approx(0.0)
        assert sigma(quad2d, quad2d.H_min) == pytest.approx(1.0)  # two maximal weights

    def test_sigma_peak(self, binomial):
        assert sigma(binomial, tau_prime(binomial, 0.0)) == pytest.approx(1.0, abs=1e-10)

    def test_uniform_sigma_point(self, uniform1d):
        assert sigma(uniform1d, 1.0) == pytest.approx(1.0)
        assert sigma(uniform1d, 1.1) == -np.inf

    def test_solvers_roundtrip(self, binomial):
        for t in (-2.0, 0.0, 0.5, 1.0):
            q = q_of_tau(binomial, t)
            assert tau(binomial, q) == pytest.approx(t, abs=1e-10)
        for H in (0.5, 0.8, 1.2, 1.8):
            q = q_of_tau_prime(binomial, H)
            assert tau_prime(binomial, q) == pytest.approx(H, abs=1e-10)


@given(st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_legendre_consistency(seed):
    # |sigma(tau'(q)) - (q tau'(q) - tau(q))| < 1e-10 on q in [-10, 10]
    m = random_multifractal(np.random.default_rng(seed))
    q = np.linspace(-10, 10, 41)
    H = np.asarray(tau_prime(m, q))
    lhs = np.asarray(sigma(m, H))
    rhs = q * H - np.asarray(tau(m, q))
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@given(st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_capacity_bounds(seed):
    # H_min*j <= -log2 mass <= H_max*j for every cube
    rng = np.random.default_rng(seed)
    m = random_multifractal(rng)
    j = int(rng.integers(1, 9))
    paths = rng.integers(0, 1 << (m.d * j), size=64).astype(np.int64)
    v = -log2_capacity_paths(m, paths, j)
    assert np.all(v >= m.H_min * j - 1e-9)
    assert np.all(v <= m.H_max * j + 1e-9)


@given(st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_exact_quasi_multiplicativity(seed):
    # concatenating paths multiplies masses exactly (constant = 1)
    rng = np.random.default_rng(seed)
    m = random_multifractal(rng)
    j1, j2 = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    p1 = int(rng.integers(0, 1 << (m.d * j1)))
    p2 = int(rng.integers(0, 1 << (m.d * j2)))
    cat = (p1 << (m.d * j2)) | p2
    a = log2_capacity_paths(m, np.array([p1]), j1)[0]
    b = log2_capacity_paths(m, np.array([p2]), j2)[0]
    c = log2_capacity_paths(m, np.array([cat]), j1 + j2)[0]
    assert c == pytest.approx(a + b, abs=1e-9)


def test_gamma_reparametrization():
    # tau_gamma(q) = tau_1(gamma q) for the same weights
    w = (0.1, 0.2, 0.3, 0.4)
    m1 = CascadeModel(d=2, weights=w, gamma=1.0)
    mg = CascadeModel(d=2, weights=w, gamma=1.7)
    q = np.linspace(-6, 6, 25)
    assert np.allclose(tau(mg, q), tau(m1, 1.7 * q), atol=1e-12)


def test_numeric_legendre_matches_sigma(binomial):
    # conjugating the closed-form tau on a fine grid reproduces sigma
    q = np.arange(-40, 40.0001, 1e-3)
    curve = SpectrumCurve(q, np.asarray(tau(binomial, q)), "tau-of-q")
    H = np.linspace(binomial.H_min, binomial.H_max, 201)
    star = legendre(curve, H)
    ana = np.asarray(sigma(binomial, H))
    assert np.max(np.abs(star.values - ana)) < 1e-6
