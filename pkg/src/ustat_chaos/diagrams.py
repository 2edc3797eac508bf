"""Diagram classes: Gaussian pairings and coloured multi-row diagrams.

Vertices are :class:`~ustat_chaos.measure_kernel.AxisLabel` values, so a
diagram's vertices double as the variable names of the kernels built from it.
All enumerators are lazy generators with a fixed, reproducible order.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations, permutations, product
from math import comb
from typing import Iterator, Sequence

from .measure_kernel import AxisLabel

MINUS, PLUS = -1, 1
COLORS = (MINUS, PLUS)


class DiagramConsistencyError(RuntimeError):
    pass


def double_factorial_odd(total_vertices: int) -> int:
    """``(2N-1)!!`` for ``total_vertices = 2N``; ``1`` for zero vertices."""
    if total_vertices < 0 or total_vertices % 2:
        raise ValueError(f"need an even nonnegative vertex count, got {total_vertices}")
    out = 1
    for m in range(total_vertices - 1, 0, -2):
        out *= m
    return out


def count_all_pairings_with_intra_row(total_vertices: int) -> int:
    return double_factorial_odd(total_vertices)


def row_vertices(row_sizes: Sequence[int]) -> list:
    return [AxisLabel(l, j) for l, k in enumerate(row_sizes, start=1)
            for j in range(1, k + 1)]


# -- Gaussian pairing diagrams ---------------------------------------------

@dataclass(frozen=True)
class PairingDiagram:
    row_sizes: tuple
    edges: tuple  # (upper, lower) pairs with upper.row < lower.row

    def __post_init__(self):
        covered = [v for e in self.edges for v in e]
        if sorted(covered) != row_vertices(self.row_sizes):
            raise DiagramConsistencyError("every vertex must lie on exactly one edge")
        if any(u.row >= w.row for u, w in self.edges):
            raise DiagramConsistencyError("edges join distinct rows, upper row first")

    @property
    def lower_endpoints(self) -> tuple:
        return tuple(w for _, w in self.edges)

    def alpha(self) -> dict:
        """Map each vertex to the lower end-point of its edge."""
        out = {}
        for u, w in self.edges:
            out[u] = w
            out[w] = w
        return out


def _matchings(vertices: list, allow_intra_row: bool):
    if not vertices:
        yield ()
        return
    first, rest = vertices[0], vertices[1:]
    for i, other in enumerate(rest):
        if not allow_intra_row and other.row == first.row:
            continue
        for tail in _matchings(rest[:i] + rest[i + 1:], allow_intra_row):
            yield ((first, other),) + tail


def enumerate_all_pairings(row_sizes: Sequence[int]) -> Iterator[tuple]:
    """All perfect matchings of the vertices, edges inside a row allowed."""
    yield from _matchings(row_vertices(row_sizes), True)


def enumerate_pairings(row_sizes: Sequence[int]) -> Iterator[PairingDiagram]:
    """Perfect matchings joining only vertices of different rows.

    Lexicographic order: the first free vertex is paired with each later
    free vertex in turn.  Odd vertex totals give an empty stream.
    """
    row_sizes = tuple(row_sizes)
    if any(k < 1 for k in row_sizes):
        raise ValueError("row sizes must be positive")
    if sum(row_sizes) % 2:
        return
    for m in _matchings(row_vertices(row_sizes), False):
        yield PairingDiagram(row_sizes, m)


# -- coloured diagrams -----------------------------------------------------

@dataclass(frozen=True, order=True)
class ColoredEdge:
    lower: AxisLabel
    upper: AxisLabel
    color: int

    def to_list(self) -> list:
        return [self.upper.row, self.upper.position, self.upper.copy,
                self.lower.row, self.lower.position, self.color]


@dataclass(frozen=True)
class ColoredDiagram:
    """Multi-row coloured diagram; edges are sorted by lower end-point.

    The permissible copy vertices are derived: ``(l, j, C)`` is permissible
    exactly when ``(l, j)`` is the lower end-point of a ``-1`` edge.
    """

    row_sizes: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "row_sizes", tuple(self.row_sizes))
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    @property
    def n_rows(self) -> int:
        return len(self.row_sizes)

    @property
    def permissible_copies(self) -> frozenset:
        return frozenset(e.lower.as_copy() for e in self.edges if e.color == MINUS)

    def edges_into(self, row: int) -> tuple:
        return tuple(e for e in self.edges if e.lower.row == row)

    def b_plus(self, row: int) -> tuple:
        return tuple(e.lower for e in self.edges_into(row) if e.color == PLUS)

    def b_minus(self, row: int) -> tuple:
        return tuple(e.lower for e in self.edges_into(row) if e.color == MINUS)

    @property
    def upper_endpoints(self) -> frozenset:
        return frozenset(e.upper for e in self.edges)

    def free_after(self, row: int) -> tuple:
        """``U(row, gamma)``: permissible vertices of rows ``<= row`` not yet
        joined to anything in the restriction to level ``row``."""
        used = set()
        for e in self.edges:
            if e.lower.row <= row:
                used.add(e.upper)
                used.add(e.lower)
        out = []
        for l in range(1, row + 1):
            for j in range(1, self.row_sizes[l - 1] + 1):
                v = AxisLabel(l, j)
                if v not in used:
                    out.append(v)
            for v in sorted(c for c in self.permissible_copies if c.row == l):
                if v not in used:
                    out.append(v)
        return tuple(sorted(out))

    def validate(self) -> None:
        seen = set()
        copies = self.permissible_copies
        for e in self.edges:
            if e.color not in COLORS:
                raise DiagramConsistencyError(f"bad colour {e.color}")
            if e.lower.copy:
                raise DiagramConsistencyError("lower end-points are plain vertices")
            if not 1 <= e.lower.row <= self.n_rows or e.lower.position > self.row_sizes[e.lower.row - 1]:
                raise DiagramConsistencyError(f"vertex {e.lower} outside the diagram")
            if e.upper.row >= e.lower.row:
                raise DiagramConsistencyError(f"edge {e} does not go downwards")
            if e.upper.position > self.row_sizes[e.upper.row - 1]:
                raise DiagramConsistencyError(f"vertex {e.upper} outside the diagram")
            if e.upper.copy and e.upper not in copies:
                raise DiagramConsistencyError(f"copy vertex {e.upper} is not permissible")
            for v in (e.upper, e.lower):
                if v in seen:
                    raise DiagramConsistencyError(f"vertex {v} has two edges")
                seen.add(v)
        for l in range(2, self.n_rows + 1):
            free = set(self.free_after(l - 1))
            for e in self.edges_into(l):
                if e.upper not in free:
                    raise DiagramConsistencyError(
                        f"edge {e} starts from a vertex not free at level {l - 1}")

    def to_dict(self) -> dict:
        return {"rows": list(self.row_sizes), "edges": [e.to_list() for e in self.edges]}

    @classmethod
    def from_dict(cls, d) -> "ColoredDiagram":
        edges = [ColoredEdge(AxisLabel(ll, lj), AxisLabel(ul, uj, bool(uc)), int(c))
                 for ul, uj, uc, ll, lj, c in d["edges"]]
        return cls(tuple(d["rows"]), tuple(edges))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class DiagramStats:
    k_gamma: int
    W: int
    Z: int
    U: int
    b_plus: tuple      # |B_(b,1)(l)| for l = 1..L
    b_minus: tuple     # |B_(b,-1)(l)| for l = 1..L
    level_orders: tuple  # k(gamma(l)) for l = 1..L
    n_permissible: int

    def w_through(self, level: int) -> int:
        return sum(self.b_minus[:level])

    def u_through(self, level: int) -> int:
        return sum(1 for b in self.b_minus[:level] if b)


def stats(d: ColoredDiagram) -> DiagramStats:
    L = d.n_rows
    bp = tuple(len(d.b_plus(l)) for l in range(1, L + 1))
    bm = tuple(len(d.b_minus(l)) for l in range(1, L + 1))
    orders = []
    acc = 0
    for l in range(1, L + 1):
        acc += d.row_sizes[l - 1] - 2 * bp[l - 1] - bm[l - 1]
        orders.append(acc)
    st = DiagramStats(
        k_gamma=orders[-1], W=sum(bm), Z=sum(bp), U=sum(1 for b in bm if b),
        b_plus=bp, b_minus=bm, level_orders=tuple(orders),
        n_permissible=sum(d.row_sizes) + sum(bm))
    if st.k_gamma != len(d.free_after(L)):
        raise DiagramConsistencyError("k(gamma) disagrees with the free-vertex count")
    return st


def enumerate_colored_pair(k1: int, k2: int) -> Iterator[ColoredDiagram]:
    """Two-row coloured diagrams: partial cross matchings times colourings."""
    if k1 < 1 or k2 < 1:
        raise ValueError("row sizes must be positive")
    for size in range(min(k1, k2) + 1):
        for uppers in combinations(range(1, k1 + 1), size):
            for lowers in permutations(range(1, k2 + 1), size):
                for colors in product(COLORS, repeat=size):
                    edges = tuple(ColoredEdge(AxisLabel(2, w), AxisLabel(1, u), c)
                                  for u, w, c in zip(uppers, lowers, colors))
                    yield ColoredDiagram((k1, k2), edges)


def level_extensions(free: tuple, row: int, k: int) -> Iterator[tuple]:
    """Sets of edges into ``row`` from the currently ``free`` vertices."""

    def rec(j, used):
        if j > k:
            yield ()
            return
        lower = AxisLabel(row, j)
        for rest in rec(j + 1, used):
            yield rest
        for u in free:
            if u in used:
                continue
            for c in COLORS:
                for rest in rec(j + 1, used | {u}):
                    yield (ColoredEdge(lower, u, c),) + rest

    yield from rec(1, frozenset())


def advance_free(free: tuple, row: int, k: int, new_edges: tuple) -> tuple:
    """``U(row, gamma)`` from ``U(row-1, gamma)`` and the edges into ``row``."""
    uppers = {e.upper for e in new_edges}
    lowers = {e.lower: e.color for e in new_edges}
    out = [v for v in free if v not in uppers]
    for j in range(1, k + 1):
        v = AxisLabel(row, j)
        if v not in lowers:
            out.append(v)
        elif lowers[v] == MINUS:
            out.append(v.as_copy())
    return tuple(sorted(out))


def enumerate_colored_multi(row_sizes: Sequence[int], closed_only: bool = False) -> Iterator[ColoredDiagram]:
    """Coloured diagrams built level by level.

    With ``closed_only`` the stream is restricted to diagrams where every
    permissible vertex is matched (``k(gamma) = 0``); branches that can no
    longer close are pruned.
    """
    row_sizes = tuple(row_sizes)
    if not row_sizes or any(k < 1 for k in row_sizes):
        raise ValueError("need at least one row, all of positive size")
    L = len(row_sizes)
    remaining = [sum(row_sizes[l:]) for l in range(L + 1)]

    def rec(l, free, edges):
        # l: next row to process (1-based)
        if l > L:
            if not closed_only or not free:
                yield ColoredDiagram(row_sizes, edges)
            return
        k = row_sizes[l - 1]
        for new in level_extensions(free, l, k):
            nf = advance_free(free, l, k, new)
            if closed_only and len(nf) > remaining[l]:
                continue
            yield from rec(l + 1, nf, edges + new)

    first_free = tuple(AxisLabel(1, j) for j in range(1, row_sizes[0] + 1))
    if closed_only and len(first_free) > remaining[1]:
        return
    yield from rec(2, first_free, ())


def closed_classes(k: int, M: int) -> dict:
    """Closed diagrams on ``2M`` rows of size ``k``, grouped by ``p = W/2``."""
    classes = defaultdict(list)
    for d in enumerate_colored_multi((k,) * (2 * M), closed_only=True):
        copies = len(d.permissible_copies)
        if copies % 2:
            raise DiagramConsistencyError(
                f"closed diagram with an odd number of copy vertices: {d.dumps()}")
        classes[copies // 2].append(d)
    return dict(sorted(classes.items()))


def class_count_bound(k: int, M: int, p: int) -> int:
    """``binom(2kM, 2p) * (2kM + 2p - 1)!!``: choose copies, then match."""
    return comb(2 * k * M, 2 * p) * double_factorial_odd(2 * k * M + 2 * p)
