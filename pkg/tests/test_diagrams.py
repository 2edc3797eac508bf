import pytest

from ustat_chaos.diagrams import (MINUS, PLUS, ColoredDiagram, ColoredEdge,
                                  DiagramConsistencyError, class_count_bound, closed_classes,
                                  count_all_pairings_with_intra_row, enumerate_all_pairings,
                                  enumerate_colored_multi, enumerate_colored_pair,
                                  enumerate_pairings, stats)
from ustat_chaos.measure_kernel import AxisLabel
from math import comb, factorial


def V(l, j, copy=False):
    return AxisLabel(l, j, copy)


class TestPairings:
    def test_small_counts(self):
        assert len(list(enumerate_pairings((1, 1)))) == 1
        assert list(enumerate_pairings((1, 1, 1))) == []
        assert len(list(enumerate_pairings((2, 2)))) == 2

    def test_four_rows_of_two(self):
        assert len(list(enumerate_pairings((2, 2, 2, 2)))) == 60

    @pytest.mark.parametrize("total, expected", [(2, 1), (4, 3), (8, 105)])
    def test_with_intra_row(self, total, expected):
        assert count_all_pairings_with_intra_row(total) == expected

    @pytest.mark.parametrize("rows", [(1, 1), (2, 2), (1, 1, 1, 1), (2, 2, 2, 2)])
    def test_enumeration_matches_formula(self, rows):
        assert len(list(enumerate_all_pairings(rows))) == count_all_pairings_with_intra_row(sum(rows))

    def test_no_edge_inside_a_row(self):
        for d in enumerate_pairings((2, 1, 3)):
            assert all(u.row < w.row for u, w in d.edges)


class TestColored:
    def test_pair_counts(self):
        assert len(list(enumerate_colored_pair(1, 1))) == 3
        assert len(list(enumerate_colored_pair(1, 2))) == 5
        assert len(list(enumerate_colored_pair(2, 2))) == 17

    @pytest.mark.parametrize("k1, k2", [(1, 1), (1, 3), (2, 2), (3, 2), (3, 3)])
    def test_pair_count_formula(self, k1, k2):
        expected = sum(comb(k1, l) * comb(k2, l) * factorial(l) * 2 ** l for l in range(min(k1, k2) + 1))
        assert len(list(enumerate_colored_pair(k1, k2))) == expected

    @pytest.mark.parametrize("k1, k2", [(1, 1), (2, 1), (2, 2), (3, 2)])
    def test_multi_agrees_with_pair(self, k1, k2):
        a = {d.edges for d in enumerate_colored_pair(k1, k2)}
        b = {d.edges for d in enumerate_colored_multi((k1, k2))}
        assert a == b

    def test_three_single_rows(self):
        diagrams = list(enumerate_colored_multi((1, 1, 1)))
        assert len(diagrams) == 9
        copy_attached = [d for d in diagrams if V(2, 1, True) in d.upper_endpoints]
        assert len(copy_attached) == 2
        for d in diagrams:
            d.validate()

    def test_stats_examples(self):
        plus = ColoredDiagram((1, 1), (ColoredEdge(V(2, 1), V(1, 1), PLUS),))
        s = stats(plus)
        assert (s.k_gamma, s.Z, s.W, s.U) == (0, 1, 0, 0)
        minus = ColoredDiagram((1, 1), (ColoredEdge(V(2, 1), V(1, 1), MINUS),))
        s = stats(minus)
        assert (s.k_gamma, s.Z, s.W, s.U) == (1, 0, 1, 1)
        assert minus.free_after(2) == (V(2, 1, True),)
        full = ColoredDiagram((2, 2), (ColoredEdge(V(2, 1), V(1, 1), PLUS),
                                       ColoredEdge(V(2, 2), V(1, 2), PLUS)))
        s = stats(full)
        assert (s.k_gamma, s.Z, s.W) == (0, 2, 0)

    def test_invalid_copy_vertex(self):
        d = ColoredDiagram((1, 1, 1), (ColoredEdge(V(3, 1), V(2, 1, True), PLUS),))
        with pytest.raises(DiagramConsistencyError):
            d.validate()

    def test_vertex_used_twice(self):
        d = ColoredDiagram((1, 1, 1), (ColoredEdge(V(2, 1), V(1, 1), PLUS),
                                       ColoredEdge(V(3, 1), V(1, 1), PLUS)))
        with pytest.raises(DiagramConsistencyError):
            d.validate()

    def test_json_round_trip(self):
        for d in enumerate_colored_multi((2, 1, 2)):
            assert ColoredDiagram.from_dict(d.to_dict()) == d


class TestClosedClasses:
    def test_single_pair(self):
        classes = closed_classes(1, 1)
        assert list(classes) == [0] and len(classes[0]) == 1
        assert classes[0][0].edges[0].color == PLUS

    @pytest.mark.parametrize("k, M", [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (3, 1), (4, 1)])
    def test_classes_within_bound(self, k, M):
        for p, members in closed_classes(k, M).items():
            assert all(stats(d).W == 2 * p for d in members)
            assert len(members) <= class_count_bound(k, M, p)
