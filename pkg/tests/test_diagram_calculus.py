from fractions import Fraction

import numpy as np
import pytest

from ustat_chaos.corpus import generate_random_kernel, random_space
from ustat_chaos.diagram_calculus import (NonPositiveCoefficientError, check_product_identity,
                                          coefficient_Jn, expected_product, expected_products,
                                          gaussian_expected_product, kernel_for_diagram,
                                          level_kernels, pairing_value, product_multi,
                                          product_pair, verify_level_norms, verify_norm_bounds)
from ustat_chaos.diagrams import MINUS, PLUS, ColoredDiagram, ColoredEdge, enumerate_pairings
from ustat_chaos.measure_kernel import (AxisLabel, Kernel, axes_for_row, integrate_all, is_canonical,
                                        l2_norm, l2_norm_squared, substitute, tensor_product)
from ustat_chaos.ustat_engine import exact_expectation


def V(l, j, copy=False):
    return AxisLabel(l, j, copy)


def two_row(k1, k2, *edges):
    return ColoredDiagram((k1, k2), tuple(ColoredEdge(V(2, w), V(1, u), c) for u, w, c in edges))


class TestCoefficient:
    def test_single_plus_edge(self):
        for n in (2, 3, 10):
            assert coefficient_Jn(two_row(1, 1, (1, 1, PLUS)), 2, n) == 1

    def test_no_plus_edge(self):
        assert coefficient_Jn(two_row(2, 2, (1, 1, MINUS)), 2, 5) == 1
        assert coefficient_Jn(two_row(2, 2), 2, 5) == 1

    def test_two_plus_edges(self):
        d = two_row(2, 2, (1, 1, PLUS), (2, 2, PLUS))
        assert coefficient_Jn(d, 2, 5) == Fraction(4, 5)
        assert coefficient_Jn(d, 2, 5, k1k2=4) == Fraction(4, 5)

    def test_nonpositive_factor_flagged(self):
        d = two_row(2, 2, (1, 1, PLUS))
        with pytest.raises(NonPositiveCoefficientError):
            coefficient_Jn(d, 2, 1)


class TestKernels:
    def test_empty_diagram(self, sign):
        h = kernel_for_diagram(sign, sign, two_row(1, 1))
        assert h.allclose(tensor_product(sign, sign.with_axes([V(2, 1)])))

    def test_plus_edge_scalar(self, sign):
        h = kernel_for_diagram(sign, sign, two_row(1, 1, (1, 1, PLUS)))
        assert h.order == 0 and h.scalar() == 1

    def test_minus_edge(self, sign):
        h = kernel_for_diagram(sign, sign, two_row(1, 1, (1, 1, MINUS)))
        assert h.axes == (V(2, 1, True),) and list(h.values) == [0, 0]

    def test_incompatible(self, sign):
        with pytest.raises(ValueError):
            kernel_for_diagram(sign, sign, two_row(2, 1))


class TestProduct:
    def test_pair_terms(self, sign):
        terms = product_pair(sign, sign, 3)
        assert sorted((t.order, t.w_power) for t in terms) == [(0, 0), (1, 1), (2, 0)]
        assert all(is_canonical(t.kernel) for t in terms)
        report = check_product_identity([sign, sign], 3, terms)
        assert report.max_abs_error == 0 and report.checked_assignments == 8

    def test_coefficients_in_range(self):
        sp = random_space(3, 2, exact=True)
        f, g = generate_random_kernel(sp, 2, 1), generate_random_kernel(sp, 2, 2)
        for t in product_pair(f, g, 4):
            assert 0 < t.j_coeff <= 1
            assert t.kernel.order == t.order

    def test_non_canonical_rejected(self, coin):
        c = Kernel(coin, axes_for_row(1, 1), [1, 1])
        with pytest.raises(ValueError):
            product_pair(c, c, 3)

    def test_multi_reduces_to_pair(self):
        sp = random_space(2, 3, exact=True)
        f, g = generate_random_kernel(sp, 2, 1), generate_random_kernel(sp, 1, 2)
        a = {t.diagram.edges: (t.j_coeff, t.order) for t in product_pair(f, g, 3)}
        b = {t.diagram.edges: (t.j_coeff, t.order) for t in product_multi([f, g], 3)}
        assert a == b

    def test_three_linear_factors(self, sign):
        report = check_product_identity([sign] * 3, 4)
        assert report.max_abs_error == 0 and report.checked_assignments == 16

    def test_drop_zero(self, sign):
        full = product_multi([sign] * 3, 4)
        pruned = product_multi([sign] * 3, 4, drop_zero=True)
        assert len(pruned) < len(full)
        assert check_product_identity([sign] * 3, 4, pruned).max_abs_error == 0

    def test_float_mode(self):
        sp = random_space(3, 3)
        fs = [generate_random_kernel(sp, k, i) for i, k in enumerate((2, 1, 2))]
        assert check_product_identity(fs, 4).max_abs_error <= 1e-10


class TestExpectation:
    def test_linear_pair(self):
        sp = random_space(3, 1, exact=True)
        f, g = generate_random_kernel(sp, 1, 1), generate_random_kernel(sp, 1, 2)
        fg = Kernel(sp, f.axes, f.values * g.values)
        assert expected_product([f, g], 5) == integrate_all(fg)

    def test_symmetric_second_moment(self):
        sp = random_space(3, 1, exact=True)
        f = generate_random_kernel(sp, 2, 5, symmetric=True)
        assert expected_product([f, f], 4) == 2 * Fraction(3, 4) * l2_norm_squared(f)
        assert expected_product([f, f], 4) == exact_expectation([f, f], 4)

    def test_odd_kernels_vanish(self, coin):
        # f(x, y) = s(x) s(y) is symmetric and odd under swapping the atoms
        s = np.array([1, -1], dtype=object)
        f = Kernel(coin, axes_for_row(1, 2), np.multiply.outer(s, s))
        g = Kernel(coin, axes_for_row(1, 1), s)
        assert expected_product([f, g, g, g, f], 4) == exact_expectation([f, g, g, g, f], 4)
        assert expected_product([g, g, g], 4) == 0

    def test_several_n(self):
        sp = random_space(3, 1)
        fs = [generate_random_kernel(sp, k, i) for i, k in enumerate((1, 2, 1))]
        multi = expected_products(fs, [3, 5])
        for n in (3, 5):
            assert multi[n] == pytest.approx(expected_product(fs, n), abs=1e-14)

    def test_rational_needs_square_n(self):
        sp = random_space(2, 1, exact=True)
        fs = [generate_random_kernel(sp, k, i) for i, k in enumerate((1, 1, 1))]
        with pytest.raises(ValueError):
            expected_product(fs, 3)
        assert expected_product(fs, 3, normalized=False) == exact_expectation(fs, 3, normalized=False)


class TestGaussian:
    def test_two_linear(self, sign):
        assert gaussian_expected_product([sign, sign]) == 1

    def test_odd_is_zero(self, sign):
        assert gaussian_expected_product([sign] * 3) == 0

    def test_rank_one_fourth_power(self, coin):
        s = np.array([1, -1], dtype=object)
        f = Kernel(coin, axes_for_row(1, 2), np.multiply.outer(s, s))
        value, terms = gaussian_expected_product([f] * 4, return_terms=True)
        assert value == 60 and len(terms) == 60 and all(t.value == 1 for t in terms)

    def test_term_bound_and_enumeration_invariance(self):
        sp = random_space(3, 2)
        fs = [generate_random_kernel(sp, k, i) for i, k in enumerate((2, 1, 2, 1))]
        bound = np.prod([l2_norm_squared(f) for f in fs])
        for d in enumerate_pairings((2, 1, 2, 1)):
            a = pairing_value(fs, d)
            b = pairing_value(fs, d, method="substitute")
            # read every pair from its upper end-point instead of the lower one
            joint = tensor_product(tensor_product(fs[0], fs[1].with_axes(axes_for_row(2, 1))),
                                   tensor_product(fs[2].with_axes(axes_for_row(3, 2)),
                                                  fs[3].with_axes(axes_for_row(4, 1))))
            c = integrate_all(substitute(joint, {w: u for u, w in d.edges}))
            assert a == pytest.approx(b, abs=1e-14)
            assert a == pytest.approx(c, abs=1e-14)
            assert a * a <= bound + 1e-14


class TestNormBounds:
    def test_examples(self, sign):
        report = verify_norm_bounds(sign, sign)
        assert report.ok and report.checked == 5

    def test_random_two_by_two(self):
        sp = random_space(3, 7)
        for seed in range(5):
            f = generate_random_kernel(sp, 2, seed)
            g = generate_random_kernel(sp, 2, seed + 100)
            report = verify_norm_bounds(f, g)
            assert report.ok
            assert report.checked == 17 + 7  # the 7 diagrams with W = 0 get two checks

    def test_level_norms_pair(self, sign):
        report = verify_level_norms([sign, sign], 1.0)
        assert report.ok

    def test_level_norms_first_level_only(self):
        sp = random_space(3, 2)
        f = generate_random_kernel(sp, 2, 1)
        assert verify_level_norms([f], l2_norm(f)).ok

    def test_level_norms_three_rows(self):
        sp = random_space(3, 4)
        fs = [generate_random_kernel(sp, k, i, canonical=False) for i, k in enumerate((2, 1, 2))]
        sigma = max(l2_norm(f) for f in fs)
        assert verify_level_norms(fs, sigma).ok

    def test_level_norms_precondition(self, coin):
        big = Kernel(coin, axes_for_row(1, 1), [2, -2])
        with pytest.raises(ValueError):
            verify_level_norms([big, big], 5.0)

    def test_level_kernels_consistent(self):
        sp = random_space(2, 1)
        fs = [generate_random_kernel(sp, 1, i) for i in range(3)]
        d = ColoredDiagram((1, 1, 1), (ColoredEdge(V(2, 1), V(1, 1), MINUS),
                                       ColoredEdge(V(3, 1), V(2, 1, True), PLUS)))
        levels = level_kernels(fs, d)
        assert [F.order for F in levels] == [1, 1, 0]
