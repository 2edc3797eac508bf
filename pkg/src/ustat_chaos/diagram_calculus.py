"""Products of degenerate U-statistics rewritten as sums over diagrams.

Rows are processed one at a time.  The kernel accumulated after level
``l - 1`` carries one axis per free permissible vertex; at level ``l`` it
is multiplied by ``f_l``, every upper end-point of an edge into row ``l``
is read from its lower end-point, ``P`` is applied at the lower end-points
of ``+1`` edges and ``Q`` at those of ``-1`` edges, and the surviving
``-1`` lower end-points are renamed to their copy vertices.

All helpers use the unnormalized form of the identity,

    prod_l k_l! I_{n,k_l}(f_l) = sum_gamma J(gamma) n^{Z(gamma)} k(gamma)! I_{n,k(gamma)}(F_gamma),

which stays rational for every ``n``; multiplying both sides by
``n^{-sum k_l / 2}`` gives the normalized form with the factor
``n^{-W(gamma)/2}`` of each term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from string import ascii_letters
from typing import Iterator, Sequence

import numpy as np

from .diagrams import (MINUS, PLUS, ColoredDiagram, ColoredEdge, DiagramConsistencyError,
                       PairingDiagram, advance_free, enumerate_colored_pair, enumerate_pairings,
                       level_extensions, stats)
from .measure_kernel import (FLOAT_TOL, AxisLabel, Kernel, center, integrate_all, integrate_out,
                             is_canonical, l2_norm, l2_norm_squared, retag, substitute, sup_norm,
                             tensor_product)
from .ustat_engine import (all_assignments, counts_from_assignments, normalization,
                           ordered_sums, product_of_statistics)


class NonPositiveCoefficientError(ValueError):
    """A factor of ``J_n`` is not positive: the term lies outside the restricted sum."""


@dataclass(frozen=True)
class DecompositionTerm:
    diagram: ColoredDiagram
    j_coeff: Fraction
    w_power: int
    z_power: int
    order: int
    kernel: Kernel = field(repr=False)

    def weight(self, n: int, normalized: bool):
        """Scalar in front of ``k(gamma)! I_{n,k(gamma)}(F_gamma)``.

        Unnormalized: ``J n^Z``.  Normalized (float): ``J n^{-W/2}``, in front
        of ``k(gamma)! n^{-k(gamma)/2} I_{n,k(gamma)}(F_gamma)``.
        """
        if normalized:
            return float(self.j_coeff) * float(n) ** (-self.w_power / 2)
        value = self.j_coeff * n ** self.z_power
        return value if self.kernel.exact else float(value)


@dataclass(frozen=True)
class GaussianTerm:
    diagram: PairingDiagram
    value: float


# -- coefficients and kernels ----------------------------------------------

def coefficient_Jn(d: ColoredDiagram, row: int, n: int, k1k2: int | None = None) -> Fraction:
    """``J_n(row, gamma)`` as an exact fraction.

    ``k1k2`` is the order of the kernel entering ``row`` plus ``k_row``; by
    default it is read off the diagram.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if row == 1:
        return Fraction(1)
    bp, bm = len(d.b_plus(row)), len(d.b_minus(row))
    if k1k2 is None:
        k1k2 = stats(d).level_orders[row - 2] + d.row_sizes[row - 1]
    out = Fraction(1)
    for j in range(1, bp + 1):
        factor = n - k1k2 + bm + bp + j
        if factor <= 0:
            raise NonPositiveCoefficientError(
                f"J_n factor {factor} <= 0 at row {row} for n={n}: {d.dumps()}")
        out *= Fraction(factor, n)
    return out


def apply_level(joint: Kernel, new_edges: Sequence[ColoredEdge]) -> Kernel:
    """Substitute, integrate or centre, then rename ``-1`` lower end-points."""
    h = substitute(joint, {e.upper: e.lower for e in new_edges})
    for e in new_edges:
        h = integrate_out(h, e.lower) if e.color == PLUS else center(h, e.lower)
    renames = {e.lower: e.lower.as_copy() for e in new_edges if e.color == MINUS}
    if renames:
        h = h.with_axes([renames.get(a, a) for a in h.axes])
    return h


def kernel_for_diagram(f: Kernel, g: Kernel, d: ColoredDiagram) -> Kernel:
    """``(f o g)_gamma`` for a two-row diagram."""
    if d.row_sizes != (f.order, g.order):
        raise ValueError(f"diagram rows {d.row_sizes} do not match orders {(f.order, g.order)}")
    return level_kernels([f, g], d)[-1]


def level_kernels(fs: Sequence[Kernel], d: ColoredDiagram) -> list:
    """``[F_{1,gamma}, ..., F_{L,gamma}]`` for one diagram."""
    if tuple(f.order for f in fs) != d.row_sizes:
        raise ValueError(f"diagram rows {d.row_sizes} do not match the kernel orders")
    d.validate()
    F = retag(fs[0], 1)
    out = [F]
    for l in range(2, d.n_rows + 1):
        F = apply_level(tensor_product(F, retag(fs[l - 1], l)), d.edges_into(l))
        out.append(F)
    return out


# -- the level-by-level walk -----------------------------------------------

@dataclass(frozen=True)
class _Leaf:
    edges: tuple
    kernel: Kernel
    j_coeff: Fraction
    levels: tuple
    W: int
    Z: int
    profile: tuple = ()  # (k(gamma(l-1)) + k_l, |B_+1(l)|, |B_-1(l)|) per level

    def coefficient(self, n: int) -> Fraction | None:
        """``prod_l J_n(l, gamma)``, or ``None`` outside the restricted sum."""
        J = Fraction(1)
        for total, bp, bm in self.profile:
            if total - bp - bm > n:
                return None
            for j in range(1, bp + 1):
                J *= Fraction(n - total + bm + bp + j, n)
        return J


def _walk(fs: Sequence[Kernel], n: int | None, closed_only: bool) -> Iterator[_Leaf]:
    """Depth-first over coloured diagrams, sharing prefix kernels.

    With ``n`` given, levels violating ``k(gamma(l-1)) + k_l - |B(l)| <= n``
    are dropped and ``J_n`` is accumulated; otherwise ``J`` stays ``1``.
    """
    sizes = tuple(f.order for f in fs)
    if not sizes or any(k < 1 for k in sizes):
        raise ValueError("need at least one kernel, all of positive order")
    if any(f.space != fs[0].space for f in fs):
        raise ValueError("kernels live on different spaces")
    L = len(sizes)
    remaining = [sum(sizes[l:]) for l in range(L + 1)]
    rows = [retag(f, l) for l, f in enumerate(fs, start=1)]

    def rec(l, F, free, edges, J, levels, W, Z, profile):
        if l > L:
            if not closed_only or not free:
                yield _Leaf(edges, F, J, levels, W, Z, profile)
            return
        k = sizes[l - 1]
        joint = tensor_product(F, rows[l - 1])
        for new in level_extensions(free, l, k):
            nf = advance_free(free, l, k, new)
            if closed_only and len(nf) > remaining[l]:
                continue
            bp = sum(1 for e in new if e.color == PLUS)
            bm = len(new) - bp
            c = Fraction(1)
            if n is not None:
                if len(free) + k - bp - bm > n:
                    continue
                for j in range(1, bp + 1):
                    c *= Fraction(n - (len(free) + k) + bm + bp + j, n)
            K = apply_level(joint, new)
            yield from rec(l + 1, K, nf, edges + new, J * c, levels + (K,), W + bm, Z + bp,
                           profile + ((len(free) + k, bp, bm),))

    first = rows[0]
    free = tuple(sorted(first.axes))
    if closed_only and len(free) > remaining[1]:
        return
    yield from rec(2, first, free, (), Fraction(1), (first,), 0, 0, ())


def _require_canonical(fs: Sequence[Kernel]) -> None:
    for i, f in enumerate(fs, start=1):
        if not is_canonical(f, FLOAT_TOL):
            raise ValueError(f"kernel {i} is not canonical")


def _is_zero(h: Kernel) -> bool:
    if h.exact:
        return all(v == 0 for v in h.values.ravel())
    return bool(np.all(np.abs(h.values) <= FLOAT_TOL))


def product_multi(fs: Sequence[Kernel], n: int, drop_zero: bool = False,
                  check_canonical: bool = True) -> list:
    """Terms of the diagram expansion of ``prod_l k_l! n^{-k_l/2} I_{n,k_l}(f_l)``."""
    fs = list(fs)
    _require_canonical(fs)
    if n < max(f.order for f in fs):
        raise ValueError("n must be at least the largest kernel order")
    sizes = tuple(f.order for f in fs)
    terms = []
    for leaf in _walk(fs, n, closed_only=False):
        d = ColoredDiagram(sizes, leaf.edges)
        if check_canonical and not is_canonical(leaf.kernel, FLOAT_TOL):
            raise DiagramConsistencyError(f"non-canonical term kernel for {d.dumps()}")
        if drop_zero and _is_zero(leaf.kernel):
            continue
        terms.append(DecompositionTerm(d, leaf.j_coeff, leaf.W, leaf.Z,
                                       leaf.kernel.order, leaf.kernel))
    return terms


def product_pair(f: Kernel, g: Kernel, n: int, drop_zero: bool = False) -> list:
    """Two-factor expansion; same terms as :func:`product_multi` on ``[f, g]``."""
    return product_multi([f, g], n, drop_zero=drop_zero)


def evaluate_terms(terms: Sequence[DecompositionTerm], counts: np.ndarray, n: int,
                   normalized: bool) -> np.ndarray:
    """Right-hand side of the expansion at each row of ``counts``.

    Since ``k! I_{n,k}`` only sees a kernel through its values, terms of
    equal order are summed before evaluation.
    """
    by_order = {}
    for t in terms:
        w = t.weight(n, normalized)
        if normalized:
            w *= float(n) ** (-t.order / 2)
        v = t.kernel.values * w
        by_order[t.order] = v if t.order not in by_order else by_order[t.order] + v
    total = None
    for order, values in by_order.items():
        proto = next(t.kernel for t in terms if t.order == order)
        h = Kernel(proto.space if not normalized else proto.space.as_float(),
                   proto.axes, values)
        part = ordered_sums(h, counts)
        total = part if total is None else total + part
    if total is None:
        return np.zeros(len(counts))
    return total


@dataclass(frozen=True)
class IdentityReport:
    terms: int
    max_abs_error: float
    checked_assignments: int
    mode: str


def check_product_identity(fs: Sequence[Kernel], n: int, terms: Sequence | None = None) -> IdentityReport:
    """Compare both sides of the expansion on every sample in ``X^n``.

    Rational kernels are compared exactly in unnormalized form; float kernels
    in normalized form.
    """
    fs = list(fs)
    if terms is None:
        terms = product_multi(fs, n)
    exact = fs[0].exact
    space = fs[0].space
    counts = counts_from_assignments(all_assignments(space.size, n), space.size)
    if exact:
        lhs = product_of_statistics(fs, counts)
        rhs = evaluate_terms(terms, counts, n, normalized=False)
        err = max((abs(Fraction(a) - Fraction(b)) for a, b in zip(lhs, rhs)), default=Fraction(0))
        err = float(err)
    else:
        scale = float(n) ** (-sum(f.order for f in fs) / 2)
        lhs = product_of_statistics(fs, counts).astype(float) * scale
        rhs = evaluate_terms(terms, counts, n, normalized=True).astype(float)
        err = float(np.max(np.abs(lhs - rhs))) if len(lhs) else 0.0
    return IdentityReport(len(terms), err, len(counts), "rational" if exact else "float")


# -- expectations -----------------------------------------------------------

def expected_product(fs: Sequence[Kernel], n: int, normalized: bool = True,
                     check_canonical: bool = True):
    """``E prod_l k_l! n^{-k_l/2} I_{n,k_l}(f_l)`` from the closed diagrams.

    In rational mode the unnormalized sum ``sum J n^Z F_gamma`` is formed
    exactly and the power of ``n`` is applied at the end (which fails when it
    is irrational; pass ``normalized=False`` then).
    """
    fs = list(fs)
    if check_canonical:
        _require_canonical(fs)
    exact = fs[0].exact
    if exact or not normalized:
        total = fs[0].space.zero()
        for leaf in _walk(fs, n, closed_only=True):
            total += leaf.j_coeff * n ** leaf.Z * leaf.kernel.scalar()
        if not exact:
            total = float(total)
        if normalized:
            total = total * normalization(n, sum(f.order for f in fs), exact)
        return total
    parts = [float(leaf.j_coeff) * float(n) ** (-leaf.W / 2) * float(leaf.kernel.scalar())
             for leaf in _walk(fs, n, closed_only=True)]
    return math.fsum(parts)


def expected_products(fs: Sequence[Kernel], ns: Sequence[int]) -> dict:
    """Normalized float expectations for several ``n`` from one diagram walk."""
    fs = list(fs)
    _require_canonical(fs)
    parts = {n: [] for n in ns}
    for leaf in _walk(fs, None, closed_only=True):
        value = float(leaf.kernel.scalar())
        for n in ns:
            J = leaf.coefficient(n)
            if J is not None:
                parts[n].append(float(J) * float(n) ** (-leaf.W / 2) * value)
    return {n: math.fsum(p) for n, p in parts.items()}


def _einsum_contraction(fs: Sequence[Kernel], d: PairingDiagram):
    letter = {}
    for u, w in d.edges:
        letter[u] = letter[w] = ascii_letters[len(letter) // 2]
    operands, specs = [], []
    for l, f in enumerate(fs, start=1):
        specs.append("".join(letter[AxisLabel(l, j)] for j in range(1, f.order + 1)))
        operands.append(f.values)
    w = fs[0].space.weight_array
    for e in sorted(set(letter.values())):
        specs.append(e)
        operands.append(w)
    return np.einsum(",".join(specs) + "->", *operands)


def pairing_value(fs: Sequence[Kernel], d: PairingDiagram, method: str = "einsum"):
    """``F_gamma`` for a Gaussian pairing diagram.

    ``method="substitute"`` builds the kernel by substitution and integrates
    it, as a slower cross-check of the contraction.
    """
    if method == "einsum":
        v = _einsum_contraction(fs, d)
        return v if fs[0].exact else float(v)
    joint = retag(fs[0], 1)
    for l in range(2, len(fs) + 1):
        joint = tensor_product(joint, retag(fs[l - 1], l))
    return integrate_all(substitute(joint, {u: w for u, w in d.edges}))


def gaussian_expected_product(fs: Sequence[Kernel], return_terms: bool = False,
                              method: str = "einsum"):
    """``E prod_l k_l! J_{mu,k_l}(f_l)`` as a sum over pairings without
    edges inside a row."""
    fs = list(fs)
    if any(f.space != fs[0].space for f in fs):
        raise ValueError("kernels live on different spaces")
    terms = [GaussianTerm(d, pairing_value(fs, d, method))
             for d in enumerate_pairings(tuple(f.order for f in fs))]
    total = sum((t.value for t in terms), fs[0].space.zero())
    return (total, terms) if return_terms else total


# -- norm estimates ---------------------------------------------------------

@dataclass
class NormReport:
    checked: int = 0
    violations: list = field(default_factory=list)
    max_slack: float = -math.inf

    @property
    def ok(self) -> bool:
        return not self.violations

    def record(self, lhs: float, rhs: float, where: dict, tol: float = 1e-12) -> None:
        self.checked += 1
        self.max_slack = max(self.max_slack, lhs - rhs)
        if lhs > rhs * (1 + tol) + tol:
            self.violations.append({**where, "lhs": lhs, "rhs": rhs})


def verify_norm_bounds(f: Kernel, g: Kernel) -> NormReport:
    """Norm estimates for ``(f o g)_gamma`` over all two-row diagrams.

    ``max_slack`` is the largest ``lhs - rhs`` seen (negative when every
    bound holds with room to spare).
    """
    nf, ng = l2_norm(f), l2_norm(g)
    report = NormReport()
    for d in enumerate_colored_pair(f.order, g.order):
        h = kernel_for_diagram(f, g, d)
        norm = l2_norm(h)
        W = len(d.b_minus(2))
        if W == 0:
            report.record(norm, nf * ng, {"bound": "product", "diagram": d.to_dict()})
        report.record(norm, 2 ** W * min(nf, ng), {"bound": "min", "diagram": d.to_dict()})
    return report


def verify_level_norms(fs: Sequence[Kernel], sigma: float) -> NormReport:
    """Level-wise estimates ``||F_l|| <= 2^{W(l)} sigma^{l - U(l)}`` and
    ``sup |F_l| <= 2^{W(l)}`` over every diagram."""
    fs = list(fs)
    for i, f in enumerate(fs, start=1):
        if float(sup_norm(f)) > 1 + 1e-12 or l2_norm(f) > sigma * (1 + 1e-12):
            raise ValueError(f"kernel {i} violates sup <= 1 or ||f|| <= sigma")
    report = NormReport()
    for leaf in _walk(fs, None, closed_only=False):
        W = U = 0
        for l, F in enumerate(leaf.levels, start=1):
            bm = sum(1 for e in leaf.edges if e.lower.row == l and e.color == MINUS)
            W += bm
            U += 1 if bm else 0
            where = {"level": l, "diagram": ColoredDiagram(
                tuple(f.order for f in fs), leaf.edges).to_dict()}
            report.record(math.sqrt(float(l2_norm_squared(F))), 2 ** W * sigma ** (l - U),
                          {**where, "bound": "l2"})
            report.record(float(sup_norm(F)), float(2 ** W), {**where, "bound": "sup"})
    return report
