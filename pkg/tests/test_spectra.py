import math

import numpy as np
import pytest

from mfcascade import CascadeModel
from mfcascade.cascade import cascade_field, tau
from mfcascade.operators import LeaderField, OperatorParams, leaders, mrho_field
from mfcascade.sampling import SamplingConfig, SurvivorCache
from mfcascade.spectra import (
    SpectrumCurve,
    empirical_tau,
    ld_histogram,
    legendre,
    load_level_dump,
    local_dim_trace,
)


def plain_field(model, j):
    return LeaderField(level=j, d=model.d, values=cascade_field(model, j))


class TestEmpiricalTau:
    def test_exact_product_identity(self, binomial):
        # sum over D_j of mass^q = (sum_i w_i^(gamma q))^j, exactly
        q = np.arange(-5, 5.0001, 0.25)
        for j in (4, 8, 12):
            emp = empirical_tau(plain_field(binomial, j), q)
            assert np.max(np.abs(emp.values - np.asarray(tau(binomial, q)))) < 1e-12

    def test_uniform_linear(self, uniform1d):
        q = np.linspace(-3, 3, 13)
        emp = empirical_tau(plain_field(uniform1d, 7), q)
        assert np.allclose(emp.values, q - 1, atol=1e-12)

    def test_q_zero_counts_positive_cubes(self, binomial):
        params = OperatorParams(rho=0.5, eta=0.5, j_analysis=8, j_sim=18)
        fld = mrho_field(binomial, params, SamplingConfig(eta=0.5, seed=4, d=1), 8)
        emp = empirical_tau(fld, np.array([0.0]))
        n_pos = int(np.count_nonzero(fld.positive_mask()))
        assert emp.values[0] == pytest.approx(-math.log2(n_pos) / 8)

    def test_eta_one_equals_plain(self, binomial):
        emp = empirical_tau(plain_field(binomial, 10), np.array([0.0]))
        assert emp.values[0] == pytest.approx(-1.0, abs=1e-12)

    def test_empty_field_flagged(self):
        fld = LeaderField(level=3, d=1, values=np.full(8, -np.inf))
        emp = empirical_tau(fld, np.array([1.0]))
        assert not emp.meta["valid"]
        assert np.isinf(emp.values[0])

    def test_concave_in_q(self, binomial):
        # log-sum-exp convexity makes tau_j concave; chord test
        params = OperatorParams(rho=0.8, eta=0.8, j_analysis=8, j_sim=24)
        fld = leaders(mrho_field(binomial, params,
                                 SamplingConfig(eta=0.8, seed=9, d=1), 8))
        q = np.linspace(-5, 5, 41)
        v = empirical_tau(fld, q, use_leaders=True).values
        mid = 0.5 * (v[:-2] + v[2:])
        assert np.all(v[1:-1] >= mid - 1e-9)

    def test_leader_variant_not_larger(self, binomial):
        # leaders dominate the raw field, so tau_j(1) can only decrease
        params = OperatorParams(rho=0.5, eta=0.5, j_analysis=8, j_sim=18)
        fld = leaders(mrho_field(binomial, params,
                                 SamplingConfig(eta=0.5, seed=6, d=1), 8))
        plain = empirical_tau(fld, np.array([1.0]), use_leaders=False)
        led = empirical_tau(fld, np.array([1.0]), use_leaders=True)
        assert led.values[0] <= plain.values[0] + 1e-12


class TestLDHistogram:
    def test_binomial_enumeration(self, binomial):
        # exponent of a path with k zero-digits is (2k + log2(4/3)(j-k))/j,
        # hit exactly C(j,k) times
        j, eps = 8, 0.02
        est = ld_histogram(plain_field(binomial, j), eps)
        a0, a1 = 2.0, -math.log2(0.75)
        expect = {}
        for k in range(j + 1):
            alpha = (k * a0 + (j - k) * a1) / j
            key = math.floor(alpha / (2 * eps))
            expect[key] = expect.get(key, 0) + math.comb(j, k)
        got = {round(c / (2 * eps) - 0.5): int(n)
               for c, n in zip(est.centers, est.counts)}
        assert got == expect

    def test_uniform_single_bin(self, uniform1d):
        est = ld_histogram(plain_field(uniform1d, 9), 0.05)
        assert len(est.centers) == 1
        assert est.values[0] == pytest.approx(1.0)
        # exponent 1.0 sits inside the half-width-0.05 window of the bin
        assert abs(est.centers[0] - 1.0) <= 0.05 + 1e-12

    def test_counts_partition_positive_set(self, binomial):
        params = OperatorParams(rho=0.5, eta=0.5, j_analysis=9, j_sim=20)
        fld = mrho_field(binomial, params, SamplingConfig(eta=0.5, seed=2, d=1), 9)
        est = ld_histogram(fld, 0.07)
        assert est.counts.sum() == np.count_nonzero(fld.positive_mask())

    def test_chernoff_bound_against_tau(self, binomial):
        # log2(count)/j <= inf_q (Hq - tau_j(q)) + 2 eps max|q| + 1/j
        params = OperatorParams(rho=0.5, eta=0.5, j_analysis=10, j_sim=24)
        fld = mrho_field(binomial, params, SamplingConfig(eta=0.5, seed=11, d=1), 10)
        eps = 0.05
        est = ld_histogram(fld, eps)
        q = np.linspace(-8, 8, 65)
        tau_j = empirical_tau(fld, q).values
        j = fld.level
        for H, val in zip(est.centers, est.values):
            bound = np.min(H * q - tau_j) + 2 * eps * np.max(np.abs(q)) + 1.0 / j
            assert val <= bound + 1e-9


class TestLegendre:
    def test_linear_conjugate(self):
        q = np.linspace(-10, 10, 2001)
        curve = SpectrumCurve(q, q - 1, "tau-of-q")
        out = legendre(curve, np.array([1.0, 1.2]))
        assert out.values[0] == pytest.approx(1.0, abs=1e-12)
        # H=1.2 diverges (as q -> -inf): grid minimum 1.2q - (q-1) at q=-10
        # is reported and the endpoint flag raised
        assert out.values[1] == pytest.approx(1 - 0.2 * 10, abs=1e-12)
        assert not out.meta["endpoint_attained"][0]
        assert out.meta["endpoint_attained"][1]

    def test_matches_analytic_sigma(self, binomial):
        from mfcascade.cascade import sigma, tau_prime
        q = np.arange(-30, 30.0001, 1e-3)
        curve = SpectrumCurve(q, np.asarray(tau(binomial, q)), "tau-of-q")
        h = tau_prime(binomial, 1.0)
        out = legendre(curve, np.array([h]))
        assert out.values[0] == pytest.approx(sigma(binomial, h), abs=1e-6)

    def test_double_conjugate_restores_concave(self):
        # Fenchel-Moreau on concave data: conjugating twice restores the curve
        H = np.linspace(0.2, 2.0, 181)
        vals = 1.0 - (H - 1.1) ** 2
        curve = SpectrumCurve(H, vals, "sigma-of-H")
        q = np.linspace(-30, 30, 12001)
        tau_c = legendre(curve, q)
        star = legendre(SpectrumCurve(q, tau_c.values, "tau-of-q"), H)
        inner = slice(5, -5)  # endpoints depend on the q truncation
        assert np.max(np.abs(star.values[inner] - vals[inner])) < 1e-6

    def test_order_reversing(self):
        q = np.linspace(-5, 5, 401)
        f = SpectrumCurve(q, q - 1.0, "tau-of-q")
        g = SpectrumCurve(q, q - 1.5, "tau-of-q")  # g <= f pointwise
        H = np.linspace(0.5, 1.5, 21)
        assert np.all(legendre(g, H).values >= legendre(f, H).values - 1e-12)

    def test_needs_two_finite_points(self):
        curve = SpectrumCurve(np.array([0.0, 1.0]), np.array([-np.inf, 1.0]), "x")
        with pytest.raises(ValueError):
            legendre(curve, np.array([0.5]))


class TestLocalDimTrace:
    def test_constant_digit_path(self, binomial):
        # x = 0: all-zero digits; with eta=1, rho=1 the leader picks the
        # heavier right neighbor, so the trace tends to -log2(w0) only in j
        params = OperatorParams(rho=1.0, eta=1.0, j_analysis=16, j_sim=16)
        cache = SurvivorCache(SamplingConfig(eta=1.0, seed=1, d=1))
        trace = local_dim_trace(binomial, params, cache, 0.0, [4, 8, 16])
        expect16 = -(15 * math.log2(0.25) + math.log2(0.75)) / 16
        assert trace[-1][1] == pytest.approx(expect16, abs=1e-9)

    def test_uniform_constant(self, uniform1d):
        params = OperatorParams(rho=1.0, eta=1.0, j_analysis=10, j_sim=10)
        cache = SurvivorCache(SamplingConfig(eta=1.0, seed=1, d=1))
        trace = local_dim_trace(uniform1d, params, cache, 0.3, [5, 10])
        assert all(v == pytest.approx(1.0) for _, v in trace)

    def test_lower_envelope(self, binomial):
        # leader values obey the dilated upper bound, so exponents stay above
        # rho*eta*H_min at every level
        params = OperatorParams(rho=0.5, eta=0.5, j_analysis=12, j_sim=28)
        cache = SurvivorCache(SamplingConfig(eta=0.5, seed=3, d=1))
        trace = local_dim_trace(binomial, params, cache, 0.41, [6, 9, 12])
        for j, v in trace:
            if math.isfinite(v):
                assert v >= params.rho_eta * binomial.H_min - binomial.H_max / j

    def test_matches_dense_leaders(self, binomial):
        # range-query trace equals the dense-field leader at the same cube
        from mfcascade.dyadic import index_of_point
        params = OperatorParams(rho=0.5, eta=0.5, j_analysis=8, j_sim=18)
        cache = SurvivorCache(SamplingConfig(eta=0.5, seed=14, d=1))
        x = 0.37
        fld = leaders(mrho_field(binomial, params, cache, 8))
        k = index_of_point(x, 8).path_index()
        trace = local_dim_trace(binomial, params, cache, x, [8])
        assert trace[0][1] == pytest.approx(-fld.leader_values[k] / 8, abs=1e-12)


def test_level_dump_roundtrip(tmp_path, binomial):
    from mfcascade.runner import write_csv
    params = OperatorParams(rho=0.5, eta=0.5, j_analysis=7, j_sim=16)
    fld = mrho_field(binomial, params, SamplingConfig(eta=0.5, seed=5, d=1), 7)
    rows = [(7, k, fld.values[k]) for k in range(fld.size)
            if np.isfinite(fld.values[k])]
    path = tmp_path / "levels.csv"
    write_csv(path, ["j", "k0", "log2_value"], rows)
    back = load_level_dump(path)
    assert back.level == 7 and back.d == 1
    assert np.array_equal(back.values, fld.values)
