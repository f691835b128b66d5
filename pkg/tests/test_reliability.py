import math
import warnings
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiscale_bft.reliability import (
    ReliabilityParams,
    broadcast_reliability,
    generic_clique_form,
    p_exact,
    q_exact,
    ratio_regime,
    securecomm_reliability,
    stirling_tail_approx,
    tail_bound,
)

P4 = Fraction(1, 10_000)


def tail(t, s, p):
    """Exact rational P(more than t of s fail)."""
    return sum(math.comb(s, i) * p**i * (1 - p) ** (s - i) for i in range(t + 1, s + 1))


def close(a, b, rel=1e-25):
    a, b = Fraction(mpmath.nstr(a, 50)), Fraction(b)
    return abs(a - b) <= rel * abs(b)


class TestTails:
    @pytest.mark.parametrize("t,s", [(2, 7), (2, 14), (5, 16), (0, 3), (10, 32)])
    def test_p_exact_matches_rationals(self, t, s):
        assert close(p_exact(t, s, 1e-4), tail(t, s, P4))

    def test_known_value(self):
        assert float(p_exact(2, 7, 1e-4)) == pytest.approx(3.49895e-11, rel=1e-5)

    def test_q_is_the_complement(self):
        assert close(q_exact(2, 7, 1e-4), 1 - tail(2, 7, P4))

    def test_truncated_sum(self):
        t, s = 5, 1000
        last = t + math.ceil(2 * 1e-4 * s) + t
        want = sum(math.comb(s, i) * P4**i * (1 - P4) ** (s - i) for i in range(t + 1, last + 1))
        assert close(p_exact(t, s, 1e-4, truncate=True), want)
        assert p_exact(t, s, 1e-4, truncate=True) <= p_exact(t, s, 1e-4)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            p_exact(3, 2, 1e-4)
        with pytest.raises(ValueError):
            p_exact(1, 7, 1.5)
        with pytest.raises(ValueError):
            tail_bound(2, 7, 1e-4, beta=1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(4, 60), st.integers(1, 200))
    def test_bound_holds_in_the_ratio_regime(self, s, k):
        p = k * 1e-5
        t = s // 3
        res = tail_bound(t, s, p)
        if res.flags["ratio_regime"]:
            assert res.bound_holds

    @settings(max_examples=40, deadline=None)
    @given(st.integers(4, 40), st.integers(1, 9))
    def test_monotone_in_t(self, s, t):
        t = min(t, s - 2)
        assert p_exact(t + 1, s, 1e-3) <= p_exact(t, s, 1e-3)

    def test_ratio_regime_is_exact(self):
        assert ratio_regime(4999, 1e-4, 2)
        assert not ratio_regime(5000, 1e-4, 2)  # p = 1/10000 > 1/10001


class TestStirling:
    def test_tracks_the_power_form_of_the_t_th_term(self):
        # the formula replaces C(s, t) by s^t / t! and t! by Stirling's estimate
        for s in (7, 16, 31, 100):
            t = s // 3
            power = Fraction(s**t, math.factorial(t)) * P4**t * (1 - P4) ** (s - t)
            ratio = float(stirling_tail_approx(t, s, 1e-4)) / float(power)
            assert 1 < ratio < 1 + 1 / (11 * t)
            term = math.comb(s, t) * P4**t * (1 - P4) ** (s - t)
            falling = math.prod(Fraction(s, s - i) for i in range(t))
            to_term = float(stirling_tail_approx(t, s, 1e-4)) / float(term)
            assert to_term == pytest.approx(float(falling) * ratio, rel=1e-12)

    def test_overestimates_small_tails(self):
        # at s=7 the exact tail is dominated by i = 3, far below the i = 2 term
        ratio = float(stirling_tail_approx(2, 7, 1e-4) / p_exact(2, 7, 1e-4))
        assert 7000 < ratio < 7500

    def test_zero_t(self):
        assert close(stirling_tail_approx(0, 7, 1e-4), (1 - P4) ** 7)

    def test_fractional_t_and_clique_form(self):
        assert float(stirling_tail_approx(7 / 3, 7, 1e-4)) > 0
        assert float(generic_clique_form(9, 1e-4)) == pytest.approx((3 * math.e * 1e-4) ** 3)


class TestComposites:
    def test_broadcast_against_rationals(self):
        s, n = 7, 343
        m = n // s
        want = 1 - (1 - tail(2, 7, P4)) ** m * (1 - tail(2, 14, P4)) ** (m - 1)
        res = broadcast_reliability(s, n, 1e-4)
        assert close(res.nu, want)
        assert float(res.nu) == pytest.approx(1.9172e-8, rel=1e-4)

    def test_broadcast_closed_form_dominates(self):
        res = broadcast_reliability(16, 10**6, 1e-4)
        assert res.flags["closed_form_valid"]
        assert res.nu < res.closed_form_nu

    def test_securecomm_strict_against_rationals(self):
        sizes, n = [16, 32, 64], 64
        want = 1 - math.prod((1 - tail(s // 3, s, P4)) ** (n // s) for s in sizes)
        res = securecomm_reliability(sizes, n, 1e-4)
        assert close(res.strict_nu, want) and close(res.nu, want)

    def test_securecomm_tolerance(self):
        sizes, n = [16, 32, 64], 64
        P0 = tail(5, 16, P4)
        drop = sum(math.comb(4, i) * P0**i * (1 - P0) ** (4 - i) for i in range(2, 5))
        res = securecomm_reliability(sizes, n, 1e-4, tolerated=[1, 0, 0])
        assert close(res.layers[0].nu, drop)
        assert res.nu < res.strict_nu
        bound = Fraction(4) * P0 * (1 - P0) ** 3 / 15
        assert close(res.layers[0].bound, bound)
        assert res.layers[0].bound_flag

    def test_params_match_function(self):
        params = ReliabilityParams.for_stack(64, [16, 32, 64], 1e-4, tolerated=[1, 0, 0])
        assert close(params.nu(), Fraction(mpmath.nstr(securecomm_reliability([16, 32, 64], 64, 1e-4, [1, 0, 0]).nu, 50)))

    def test_warning_above_threshold(self):
        with pytest.warns(UserWarning):
            broadcast_reliability(7, 49, 1e-3)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            broadcast_reliability(7, 49, 1e-4)

    def test_report_dict(self):
        d = tail_bound(2, 7, 1e-4).to_dict()
        assert set(d) == {"inputs", "exact_nu", "approx_nu", "bound_nu", "flags"}
