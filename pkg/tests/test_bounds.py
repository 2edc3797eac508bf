import math

import pytest

from ustat_chaos import bounds
from ustat_chaos.bounds import (BoundParams, Constant, USTAT_MOMENT_C, bernstein_k1,
                                calibrate_constant, chaining_order, chaos_bernstein_bound,
                                gaussian_chaos_tail_bound, gaussian_moment_bound,
                                stirling_threshold, tail_from_moments, ustat_moment_bound,
                                ustat_tail_bound)
from ustat_chaos.gaussian_chaos import hermite_exact_tail, product_kernel_moment

GRID = [0.25 * i for i in range(0, 41)]


def nonincreasing(values):
    return all(a >= b - 1e-15 for a, b in zip(values, values[1:]))


class TestTailBounds:
    def test_bernstein(self):
        assert bernstein_k1(0, 1, 10) == 2
        assert bernstein_k1(2, 1, 10 ** 12) == pytest.approx(2 * math.exp(-2), rel=1e-5)
        expected = 2 * math.exp(-(1.5 ** 2 / 2) / (0.7 ** 2 * (1 + 1.5 / (3 * math.sqrt(50) * 0.7 ** 2))))
        assert bernstein_k1(1.5, 0.7, 50) == pytest.approx(expected, rel=1e-12)

    def test_chaos_bernstein(self):
        consts = {c: Constant(v, "user") for c, v in (("c1", 3), ("c2", 0.4), ("c3", 2))}
        params = BoundParams(2, 0.5, 30, consts)
        assert chaos_bernstein_bound(0, params) == 3
        assert nonincreasing([chaos_bernstein_bound(u, params) for u in GRID])

    def test_missing_constants(self):
        with pytest.raises(ValueError):
            chaos_bernstein_bound(1.0, BoundParams(2, 0.5, 30))

    def test_gaussian_upper(self):
        assert gaussian_chaos_tail_bound(0, 2, 1, 3.0) == 3.0
        assert gaussian_chaos_tail_bound(1, 2, 1, 1.0) == pytest.approx(math.exp(-0.5))
        assert nonincreasing([gaussian_chaos_tail_bound(u, 3, 0.7, 1.0) for u in GRID])

    def test_gaussian_upper_dominates_after_calibration(self):
        grid = [0.5 * i for i in range(1, 21)]
        exact = [hermite_exact_tail(2, 1, u) for u in grid]
        C = calibrate_constant(lambda u: gaussian_chaos_tail_bound(u, 2, 1, 1.0), grid, exact)
        assert C.provenance == "calibrated"
        assert all(gaussian_chaos_tail_bound(u, 2, 1, C.value) >= e * (1 - 1e-12)
                   for u, e in zip(grid, exact))


class TestUstatTail:
    def test_zero(self):
        assert ustat_tail_bound(0, 2, 0.5, 100, 2.0, 1.0).value == 2.0

    def test_edge_of_range(self):
        k, s, n, B = 2, 0.5, 100, 0.7
        u = n ** (k / 2) * s ** (k + 1)
        got = ustat_tail_bound(u, k, s, n, 1.0, B).value
        assert got == pytest.approx(math.exp(-(u / s) ** (2 / k) / (2 * (1 + B))), rel=1e-12)

    def test_outside_range(self):
        v = ustat_tail_bound(100, 1, 0.5, 100, 1.0, 1.0)
        assert not v.applicable and v.value is None and v.regime == "outside"

    def test_sigma_above_one(self):
        with pytest.raises(ValueError):
            ustat_tail_bound(1, 1, 1.5, 100, 1.0, 1.0)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_extension_continuous(self, k):
        s, n, A, B = 0.4, 64, 1.0, 0.8
        edge = n ** (k / 2) * s ** (k + 1)
        inside = ustat_tail_bound(edge, k, s, n, A, B).value
        outside = ustat_tail_bound(edge * (1 + 1e-9), k, s, n, A, B, extend=True)
        assert outside.regime == "extended"
        if k == 1:
            assert outside.value == pytest.approx(inside, rel=1e-6)

    def test_extension_readings(self):
        a = ustat_tail_bound(30, 2, 0.3, 100, 1.0, 1.0, extend=True, reading="displayed")
        b = ustat_tail_bound(30, 2, 0.3, 100, 1.0, 1.0, extend=True, reading="remark")
        assert a.value == pytest.approx(math.exp(-(900 * 100) ** (1 / 3) / 4))
        assert b.value == pytest.approx(math.exp(-(900 * 100) ** (1 / 3) / (2 * math.sqrt(2))))
        assert ustat_tail_bound(101, 2, 0.3, 100, 1.0, 1.0, extend=True).value == 0.0

    def test_monotone(self):
        values = [ustat_tail_bound(u, 2, 0.6, 50, 1.0, 1.0, extend=True).value for u in GRID]
        assert nonincreasing(values)


class TestMomentBounds:
    def test_double_factorial(self):
        assert gaussian_moment_bound(1, 1, 1)[0] == 1
        assert gaussian_moment_bound(2, 2, 1)[0] == 105

    def test_stirling_threshold(self):
        M0 = stirling_threshold(1.5)
        assert M0 is not None
        for M in range(M0, 60):
            df, st = gaussian_moment_bound(1, M, 1, 1.5)
            assert st >= df
        assert stirling_threshold(1.0) is None  # below sqrt(2) the ratio stays under 1

    def test_hermite_moments_below_bound(self):
        for k in (1, 2, 3):
            for M in (1, 2, 3):
                assert product_kernel_moment(k, 1, 2 * M) <= gaussian_moment_bound(k, M, 1)[0]

    def test_ustat_moment(self):
        assert USTAT_MOMENT_C == pytest.approx(2 * math.sqrt(2))
        b = ustat_moment_bound(1, 2, 1, 16, 0.25, 1.0)
        assert b.applicable
        assert not ustat_moment_bound(1, 5, 1, 16, 0.25, 1.0).applicable
        small = ustat_moment_bound(2, 3, 0.5, 10 ** 16, 1e-14, 1.3).value
        assert small == pytest.approx(gaussian_moment_bound(2, 3, 0.5, 1.3)[1], rel=1e-5)


class TestChaining:
    def test_gaussian_example(self):
        calls = []

        def moment(M):
            calls.append(M)
            return product_kernel_moment(1, 1, 2 * M)

        r = tail_from_moments(moment, 4.0, 1, 1.0)
        assert r.M == 8 and calls == [8]
        assert r.value == pytest.approx(product_kernel_moment(1, 1, 16) / 4 ** 16)

    def test_not_applicable(self):
        r = tail_from_moments(lambda M: 1.0, 0.5, 2, 1.0)
        assert not r.applicable and r.value is None

    def test_markov_validity(self):
        for k in (1, 2, 3):
            for u in (2.0, 4.0, 6.0, 9.0):
                r = tail_from_moments(lambda M: product_kernel_moment(k, 1, 2 * M), u, k, 1.0)
                if r.applicable:
                    assert r.value >= hermite_exact_tail(k, 1, u)

    def test_ustat_branch_order(self):
        g = chaining_order(3.0, 1, 0.5)
        assert chaining_order(3.0, 1, 0.5, n=100, B=1.0) < g
        assert g == pytest.approx(36 / 2)


class TestVerdicts:
    def test_tri_state(self):
        assert bounds.verdict(1.0, 0.5) == bounds.HOLDS
        assert bounds.verdict(1.0, 1.5) == bounds.VIOLATED
        assert bounds.verdict(None, 0.5) == bounds.NOT_APPLICABLE

    def test_provenance(self):
        with pytest.raises(ValueError):
            Constant(1.0, "guess")
