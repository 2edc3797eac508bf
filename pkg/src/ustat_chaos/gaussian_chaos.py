"""Hermite polynomials and exact Gaussian-chaos quantities for rank-one kernels.

For ``f = f0 (x) ... (x) f0`` with ``||f0||_2 = 1`` the multiple Wiener-Ito
integral reduces to ``k! J_{mu,k}(f) = H_k(eta)`` with ``eta`` standard
normal, so moments and tails of ``sigma H_k(eta)`` are exact oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagrams import double_factorial_odd

ROOT_TOL = 1e-12


@dataclass(frozen=True)
class HermitePoly:
    """Probabilists' Hermite polynomial; ``coefficients[i]`` multiplies ``x**i``."""

    degree: int
    coefficients: tuple

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, np.array(self.coefficients, dtype=float))

    def power(self, m: int) -> tuple:
        """Integer coefficients of ``H_k(x)**m``."""
        out = [1]
        for _ in range(m):
            out = _poly_mul(out, list(self.coefficients))
        return tuple(out)

    def derivative(self) -> tuple:
        return tuple(i * c for i, c in enumerate(self.coefficients))[1:] or (0,)


def _poly_mul(a: list, b: list) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def hermite(k: int) -> HermitePoly:
    """``H_k`` from ``H_{k+1} = x H_k - k H_{k-1}``, ``H_0 = 1``, ``H_1 = x``."""
    if k < 0:
        raise ValueError("degree must be nonnegative")
    prev, cur = [1], [0, 1]
    if k == 0:
        return HermitePoly(0, (1,))
    for j in range(1, k):
        nxt = [0] + cur
        for i, c in enumerate(prev):
            nxt[i] -= j * c
        prev, cur = cur, nxt
    return HermitePoly(k, tuple(cur))


def gaussian_moment(power: int) -> int:
    """``E eta**power`` for a standard normal ``eta``."""
    if power % 2:
        return 0
    return double_factorial_odd(power)


def expectation_of_polynomial(coefficients) -> int:
    return sum(c * gaussian_moment(i) for i, c in enumerate(coefficients))


def product_kernel_moment(k: int, sigma: float, moment_order: int):
    """``E (sigma H_k(eta))**moment_order``; exact integer when ``sigma = 1``."""
    if moment_order < 0:
        raise ValueError("moment order must be nonnegative")
    base = expectation_of_polynomial(hermite(k).power(moment_order))
    return base if sigma == 1 else base * sigma ** moment_order


def hermite_inner_product(j: int, k: int) -> int:
    """``E H_j(eta) H_k(eta)``: ``k!`` when ``j == k`` and ``0`` otherwise."""
    return expectation_of_polynomial(_poly_mul(list(hermite(j).coefficients),
                                               list(hermite(k).coefficients)))


def normal_sf(x: float) -> float:
    """``P(eta > x)`` via ``erfc``, accurate in the far tail."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _real_roots(coefficients) -> np.ndarray:
    """Real roots of a polynomial, polished by Newton steps."""
    c = np.trim_zeros(np.array(coefficients, dtype=float), "b")
    if len(c) <= 1:
        return np.array([])
    roots = np.polynomial.polynomial.polyroots(c)
    dc = np.polynomial.polynomial.polyder(c)
    scale = max(1.0, float(np.max(np.abs(roots))))
    real = roots[np.abs(roots.imag) <= 1e-7 * scale].real
    out = []
    for r in real:
        for _ in range(50):
            d = np.polynomial.polynomial.polyval(r, dc)
            if d == 0:
                break
            step = np.polynomial.polynomial.polyval(r, c) / d
            r -= step
            if abs(step) <= ROOT_TOL * max(1.0, abs(r)):
                break
        out.append(r)
    return np.unique(np.round(np.sort(np.array(out)), 13))


def hermite_exact_tail(k: int, sigma: float, u: float) -> float:
    """``P(sigma |H_k(eta)| > u)``.

    The set ``{|H_k| > u/sigma}`` is a union of intervals whose end-points
    are the real roots of ``H_k -+ u/sigma``; masses come from ``erfc``.
    """
    if u < 0 or sigma <= 0:
        raise ValueError("need u >= 0 and sigma > 0")
    if k == 0:
        return 1.0 if sigma > u else 0.0
    t = u / sigma
    H = hermite(k)
    if t == 0:
        return 1.0
    cuts = [-math.inf]
    for shift in (t, -t):
        c = list(H.coefficients)
        c[0] -= shift
        cuts.extend(float(r) for r in _real_roots(c))
    cuts.append(math.inf)
    cuts = sorted(set(cuts))
    total = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if math.isinf(a) and math.isinf(b):
            mid = 0.0
        elif math.isinf(a):
            mid = b - 1.0
        elif math.isinf(b):
            mid = a + 1.0
        else:
            mid = 0.5 * (a + b)
        if abs(float(H(mid))) > t:
            total.append(_interval_mass(a, b))
    return min(1.0, math.fsum(total))


def _interval_mass(a: float, b: float) -> float:
    """``P(a < eta < b)`` using whichever tail keeps precision."""
    if a >= 0:
        return normal_sf(a) - normal_sf(b)
    if b <= 0:
        return normal_sf(-b) - normal_sf(-a)
    return 1.0 - normal_sf(-a) - normal_sf(b)


def gaussian_tail_lower_bound(u: float, k: int, sigma: float, c_bar: float) -> float:
    r = u / sigma
    return c_bar / (r ** (1.0 / k) + 1.0) * math.exp(-0.5 * r ** (2.0 / k))


@dataclass(frozen=True)
class LowerBoundReport:
    k: int
    sigma: float
    c_bar: float
    grid: tuple
    exact: tuple
    lower: tuple

    @property
    def ok(self) -> bool:
        return self.c_bar > 0 and all(e >= lo * (1 - 1e-12) for e, lo in zip(self.exact, self.lower))


def verify_gaussian_lower_bound(k: int, sigma: float, u_grid) -> LowerBoundReport:
    """Largest ``C_bar`` with the lower-bound curve below the exact tail on the grid."""
    grid = tuple(float(u) for u in u_grid)
    if not grid:
        raise ValueError("empty grid")
    exact = tuple(hermite_exact_tail(k, sigma, u) for u in grid)
    ratios = [e / gaussian_tail_lower_bound(u, k, sigma, 1.0) for u, e in zip(grid, exact)]
    c_bar = min(ratios)
    lower = tuple(gaussian_tail_lower_bound(u, k, sigma, c_bar) for u in grid)
    return LowerBoundReport(k, sigma, c_bar, grid, exact, lower)
