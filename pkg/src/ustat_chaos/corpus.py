"""Seeded random spaces and kernels for tests and experiments."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .measure_kernel import (FLOAT_TOL, FiniteProbabilitySpace, Kernel, axes_for_row,
                             hoeffding_decompose, is_canonical, l2_norm, sup_norm)


def random_space(size: int, seed: int, exact: bool = False,
                 denominator: int = 12) -> FiniteProbabilitySpace:
    """A space with strictly positive random weights.

    Rational weights have the common ``denominator`` (at least ``size``).
    """
    rng = np.random.default_rng(seed)
    atoms = tuple(f"x{i}" for i in range(size))
    if exact:
        denominator = max(denominator, size)
        cuts = np.sort(rng.choice(np.arange(1, denominator), size - 1, replace=False))
        parts = np.diff(np.concatenate([[0], cuts, [denominator]]))
        return FiniteProbabilitySpace(atoms, tuple(Fraction(int(p), denominator) for p in parts))
    w = rng.uniform(0.5, 1.5, size)
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return FiniteProbabilitySpace(atoms, tuple(float(x) for x in w))


def _canonical_part(h: Kernel) -> Kernel:
    return hoeffding_decompose(h)[frozenset(h.axes)]


def generate_random_kernel(space: FiniteProbabilitySpace, k: int, seed: int,
                           canonical: bool = True, sup: float | None = 1.0,
                           sigma: float | None = None, symmetric: bool = False) -> Kernel:
    """Draw a kernel of order ``k`` deterministically from ``seed``.

    Canonical requests take the top Hoeffding component, clip it to the sup
    ball, canonicalize once more and finally shrink by a single factor so
    that both ``sup <= sup`` and ``||h||_2 <= sigma`` hold.  Shrinking keeps
    canonicality.  Rational spaces get rational values on a grid of 1/8.
    """
    if sigma is not None and sigma <= 0:
        raise ValueError("sigma must be positive")
    if sup is not None and sup <= 0:
        raise ValueError("sup bound must be positive")
    rng = np.random.default_rng(seed)
    shape = (space.size,) * k
    if space.exact:
        raw = rng.integers(-8, 9, size=shape)
        values = np.vectorize(lambda v: Fraction(int(v), 8), otypes=[object])(raw) if k else \
            np.array(Fraction(int(raw), 8), dtype=object)
    else:
        values = rng.uniform(-1.0, 1.0, size=shape)
    if symmetric and k > 1:
        from itertools import permutations
        perms = list(permutations(range(k)))
        values = sum(np.transpose(values, p) for p in perms) / len(perms)
        if space.exact:
            values = np.vectorize(lambda v: Fraction(v), otypes=[object])(values)
    h = Kernel(space, axes_for_row(1, k), values)
    if canonical:
        h = _canonical_part(h)
        if sup is not None:
            s = sup_norm(h)
            if s > sup:
                clipped = np.clip(h.values, -sup, sup) if not space.exact else \
                    np.vectorize(lambda v: max(-Fraction(sup), min(Fraction(sup), v)),
                                 otypes=[object])(h.values)
                h = _canonical_part(Kernel(space, h.axes, clipped))
    factor = 1.0
    s = float(sup_norm(h))
    if sup is not None and s > sup:
        factor = min(factor, sup / s)
    if sigma is not None:
        norm = l2_norm(h)
        if norm > sigma:
            factor = min(factor, sigma / norm)
    if factor < 1:
        if space.exact:
            # a rational factor no larger than the float one
            q = Fraction(factor).limit_denominator(1000)
            if q > factor:
                q = Fraction(math.floor(factor * 1000), 1000)
            h = h.scale(q)
        else:
            h = h.scale(factor)
    if canonical and not is_canonical(h, FLOAT_TOL):
        raise RuntimeError("generated kernel failed the canonicality check")
    return h
