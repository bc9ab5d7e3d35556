"""Space bounds: frozen closed-form values and structural properties."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainedfilter import bounds
from chainedfilter.bounds import (
    Strategy,
    andnot_practical_bound,
    andnot_space,
    chain_rule_residual,
    cuckoo_negative_ratio,
    entropy,
    exact_chain_space,
    huffman_overhead_check,
    optimal_and_split,
    optimal_two_stage_params,
    space_lower_bound,
)
from chainedfilter.errors import DegenerateLambda

LN2 = math.log(2)


class TestEntropy:
    def test_frozen_values(self):
        # H(1/17) = log2(17) - 64/17
        assert entropy(1 / 17) == pytest.approx(math.log2(17) - 64 / 17, abs=1e-14)
        assert entropy(1 / 17) == pytest.approx(0.322756958897398, abs=1e-12)
        assert entropy(0.5) == 1.0
        assert entropy(0.0) == 0.0
        assert entropy(1.0) == 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            entropy(-0.1)
        with pytest.raises(ValueError):
            entropy(1.1)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=1e-12, max_value=0.5))
    def test_symmetric_and_bounded(self, p):
        h = entropy(p)
        assert 0 <= h <= 1
        assert h == pytest.approx(entropy(1 - p), rel=1e-9)


class TestLowerBound:
    def test_frozen_values(self):
        # f(0, lam) = (lam + 1) H(1/(lam + 1))
        assert space_lower_bound(0, 16) == pytest.approx(17 * math.log2(17) - 64, abs=1e-12)
        assert space_lower_bound(0, 16) == pytest.approx(5.486868301255766, abs=1e-12)
        assert space_lower_bound(0, 1) == pytest.approx(2.0, abs=1e-14)
        assert space_lower_bound(1, 5) == 0.0
        g = lambda x: math.log2(x + 1) + x * math.log2(1 + 1 / x)
        assert space_lower_bound(0.5, 2) == pytest.approx(g(2) - g(1), abs=1e-12)

    def test_large_lambda_limit(self):
        # f(eps, lam) -> log2(1/eps) from below as lam grows
        eps = 0.01
        f = space_lower_bound(eps, 1e9)
        assert abs(f - math.log2(1 / eps)) < 1e-6
        assert f < math.log2(1 / eps)

    def test_monotone_in_epsilon(self):
        lam = 37.0
        vals = [space_lower_bound(e, lam) for e in (0, 0.001, 0.01, 0.1, 0.5, 1)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_monotone_in_lambda(self):
        eps = 0.02
        vals = [space_lower_bound(eps, l) for l in (0.5, 1, 2, 8, 64, 1024)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    @settings(max_examples=300, deadline=None)
    @given(
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=1e-6, max_value=1e8),
    )
    def test_nonnegative(self, eps, lam):
        assert space_lower_bound(eps, lam) >= 0


class TestChainRule:
    def test_exact_identity_sweep(self):
        # f(e1*e2, lam) = f(e1, lam) + f(e2, e1*lam)
        rng = np.random.default_rng(0)
        eps1 = rng.uniform(1e-4, 1, size=10_000)
        eps2 = rng.uniform(1e-4, 1, size=10_000)
        lam = np.exp(rng.uniform(np.log(1e-3), np.log(1e6), size=10_000))
        worst = max(
            abs(chain_rule_residual(a, b, l))
            for a, b, l in zip(eps1, eps2, lam)
        )
        assert worst < 1e-9

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(min_value=1e-6, max_value=1),
        st.floats(min_value=1e-6, max_value=1),
        st.floats(min_value=1e-3, max_value=1e6),
    )
    def test_residual_tiny(self, e1, e2, lam):
        assert abs(chain_rule_residual(e1, e2, lam)) < 1e-10


class TestExactChain:
    def test_frozen_values(self):
        assert exact_chain_space(16) == pytest.approx(6.0, abs=1e-14)
        assert exact_chain_space(5) == pytest.approx(4.25, abs=1e-14)
        assert exact_chain_space(1.5) == pytest.approx(2.5, abs=1e-14)
        assert exact_chain_space(4) == pytest.approx(4.0, abs=1e-14)

    def test_degenerate(self):
        with pytest.raises(DegenerateLambda):
            exact_chain_space(1.0)
        with pytest.raises(DegenerateLambda):
            exact_chain_space(1 / LN2)

    def test_ratio_band(self):
        # chain construction stays within 11% of the lower bound
        lams = np.exp(np.linspace(np.log(1 / LN2 + 1e-9), np.log(1e6), 1000))
        ratios = np.array(
            [exact_chain_space(l) / space_lower_bound(0, l) for l in lams]
        )
        assert (ratios > 1).all()
        assert (ratios < 1.11).all()
        # worst case sits just below lam = 4
        assert exact_chain_space(3.999999) / space_lower_bound(0, 3.999999) == pytest.approx(
            4 / (math.log2(5) + 4 * math.log2(1.25)), rel=1e-5
        )

    def test_chain16_over_bound_frozen(self):
        ratio = exact_chain_space(16) / space_lower_bound(0, 16)
        assert ratio == pytest.approx(6 / 5.486868301255766, abs=1e-9)


class TestTwoStage:
    def test_zero_eps_prefers_first_form(self):
        p = optimal_two_stage_params(0, 16)
        assert p.strategy is Strategy.A
        assert p.space_per_item == pytest.approx(
            math.log2(2 * math.e * 16 * LN2), abs=1e-12
        )
        assert p.beta == pytest.approx(1 / LN2, abs=1e-12)
        assert p.alpha == pytest.approx(p.space_per_item - p.beta - 1, abs=1e-12)

    def test_frozen_branch_values(self):
        # eps=0.01, lam=16: both branches apply and the second is tighter
        p = optimal_two_stage_params(0.01, 16)
        q = 0.16 / 1.16
        f_b = math.log2(2 * math.e * 16 * LN2 / 1.16) - q
        f_a = math.log2(2 * math.e * 16 * LN2) - 0.32
        assert f_b < f_a
        assert p.strategy is Strategy.B
        assert p.space_per_item == pytest.approx(f_b, abs=1e-12)
        assert p.beta == pytest.approx(1 / LN2 - q, abs=1e-12)

    def test_degenerate_exact(self):
        p = optimal_two_stage_params(0.3, 1.0)
        assert p.strategy is Strategy.DEGENERATE_EXACT
        assert p.alpha == 0
        assert p.beta == pytest.approx(1.0)
        assert p.space_per_item == pytest.approx(2.0)

    def test_degenerate_approx(self):
        p = optimal_two_stage_params(0.8, 2.0)
        assert p.strategy is Strategy.DEGENERATE_APPROX
        assert p.beta == 0
        assert p.space_per_item == pytest.approx(math.log2(1 / 0.8), abs=1e-12)
        assert p.alpha == pytest.approx(p.space_per_item)

    def test_branch_boundary_is_open(self):
        eps = 0.01
        lam = 1 / (2 * eps * LN2)  # first-form boundary
        p = optimal_two_stage_params(eps, lam)
        assert p.strategy is Strategy.B

    @settings(max_examples=300, deadline=None)
    @given(
        st.floats(min_value=0, max_value=0.99),
        st.floats(min_value=0.01, max_value=1e6),
    )
    def test_upper_bounds_lower(self, eps, lam):
        p = optimal_two_stage_params(eps, lam)
        if p.strategy in (Strategy.A, Strategy.B):
            assert p.space_per_item + 1e-9 >= space_lower_bound(eps, lam)


class TestAndSplit:
    def test_structure_lam16(self):
        s = optimal_and_split(0.01, 16)
        assert s.m == 5
        assert s.eps_list[:-1] == (0.5, 0.5, 0.5, 0.5)
        assert s.eps_list[-1] == pytest.approx(0.16)
        assert math.prod(s.eps_list) == pytest.approx(0.01)
        assert s.space == pytest.approx(5 + 16 / 16 - 2 * 0.01 * 16, abs=1e-12)

    def test_eps_zero(self):
        s = optimal_and_split(0, 16)
        assert s.m == 5
        assert s.eps_list[-1] == 0
        assert s.space == pytest.approx(exact_chain_space(16), abs=1e-12)

    def test_last_stage_must_fit(self):
        with pytest.raises(ValueError):
            optimal_and_split(0.2, 16)  # 0.2 * 16 = 3.2 > 1/2

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(min_value=0, max_value=0.03),
        st.floats(min_value=1.5, max_value=1e4),
    )
    def test_product_property(self, eps, lam):
        m = math.floor(math.log2(lam)) + 1
        if eps * 2 ** (m - 1) > 0.5:
            return
        s = optimal_and_split(eps, lam)
        assert math.prod(s.eps_list) == pytest.approx(eps, abs=1e-12)
        assert len(s.eps_list) == s.m


class TestAndNot:
    def test_frozen_values(self):
        assert andnot_space(8, 0.5) == pytest.approx(6.0, abs=1e-12)
        assert andnot_space(16, 0.5) == pytest.approx(7.0, abs=1e-12)

    def test_true_limit_at_delta_one(self):
        # the closed form tends to log2(e^2 * lam), not log2(4 e lam)
        lim = math.log2(math.e**2 * 4)
        assert andnot_space(4, 1 - 1e-9) == pytest.approx(lim, abs=1e-5)

    def test_practical_bound_covers_half(self):
        for lam in (2, 4, 16, 100):
            assert andnot_practical_bound(lam) == pytest.approx(math.log2(16 * lam))
            assert andnot_practical_bound(lam) > andnot_space(lam, 0.5)

    def test_domain(self):
        with pytest.raises(ValueError):
            andnot_space(1.0, 0.5)
        with pytest.raises(ValueError):
            andnot_space(4, 0.0)
        with pytest.raises(ValueError):
            andnot_space(4, 1.0)


class TestCuckooRatio:
    def test_frozen_values(self):
        assert cuckoo_negative_ratio(0.4) == pytest.approx(2.2086123761533027, abs=1e-12)
        # r -> 0.5 gives the classic e - 1
        assert cuckoo_negative_ratio(0.5 - 1e-12) == pytest.approx(math.e - 1, rel=1e-6)

    def test_share_frozen(self):
        lam = cuckoo_negative_ratio(0.4)
        assert 1 / (lam + 1) == pytest.approx(0.3116612, abs=1e-7)

    def test_monotone_decreasing(self):
        vals = [cuckoo_negative_ratio(r) for r in (0.05, 0.1, 0.2, 0.3, 0.4, 0.49)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        for bad in (0.0, 0.5, -0.1, 0.7):
            with pytest.raises(ValueError):
                cuckoo_negative_ratio(bad)


class TestHuffmanCheck:
    def test_accepts_within_band(self):
        assert huffman_overhead_check(1.1, 1.0)
        assert not huffman_overhead_check(1.23, 1.0)
        assert not huffman_overhead_check(0.9, 1.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            huffman_overhead_check(-1.0, 0.5)
        with pytest.raises(ValueError):
            huffman_overhead_check(1.0, -0.5)
