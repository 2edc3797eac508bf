"""Finite probability spaces, labeled kernels, and the integral operators.

Every kernel lives on a :class:`FiniteProbabilitySpace` and stores its values
as a dense array with one axis per :class:`AxisLabel`.  Two arithmetic modes
are supported: exact rationals (``fractions.Fraction`` in an object array)
and 64-bit floats.  The mode is decided by the space's weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_ATOMS = 8
MAX_ORDER = 12
FLOAT_TOL = 1e-10


class ResourceLimitError(ValueError):
    """Raised when a dense kernel would exceed the desk-scale limits."""


class UnknownAxisError(KeyError):
    pass


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    raise TypeError(f"cannot use {x!r} as an exact rational")


@dataclass(frozen=True)
class FiniteProbabilitySpace:
    """A finite set of atoms with a probability weight on each.

    Weights given as ``Fraction`` (or ``"p/q"`` strings) select rational mode;
    anything else is converted to float.
    """

    atoms: tuple
    weights: tuple

    def __post_init__(self):
        atoms = tuple(str(a) for a in self.atoms)
        if len(atoms) == 0:
            raise ValueError("a probability space needs at least one atom")
        if len(atoms) != len(self.weights):
            raise ValueError("atoms and weights differ in length")
        if len(set(atoms)) != len(atoms):
            raise ValueError("atom identifiers must be unique")
        if len(atoms) > MAX_ATOMS:
            raise ResourceLimitError(
                f"{len(atoms)} atoms exceeds the limit of {MAX_ATOMS}")
        exact = all(isinstance(w, (Fraction, str, int, np.integer))
                    for w in self.weights) and any(
                        isinstance(w, (Fraction, str)) for w in self.weights)
        if exact:
            weights = tuple(_to_fraction(w) for w in self.weights)
            if sum(weights) != 1:
                raise ValueError(f"weights sum to {sum(weights)}, not 1")
        else:
            weights = tuple(float(w) for w in self.weights)
            if not all(math.isfinite(w) for w in weights):
                raise ValueError("weights must be finite")
            if abs(math.fsum(weights) - 1.0) > 1e-12:
                raise ValueError(f"weights sum to {math.fsum(weights)}, not 1")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, size: int, exact: bool = False):
        w = Fraction(1, size) if exact else 1.0 / size
        return cls(tuple(f"x{i}" for i in range(size)), (w,) * size)

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def exact(self) -> bool:
        return isinstance(self.weights[0], Fraction)

    @property
    def dtype(self):
        return object if self.exact else np.float64

    @property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=self.dtype)

    def as_float(self) -> "FiniteProbabilitySpace":
        if not self.exact:
            return self
        return FiniteProbabilitySpace(self.atoms, tuple(float(w) for w in self.weights))

    def zero(self):
        return Fraction(0) if self.exact else 0.0


@dataclass(frozen=True, order=True)
class AxisLabel:
    """Variable name ``(row, position)`` or its copy ``(row, position, C)``."""

    row: int
    position: int
    copy: bool = False

    def __post_init__(self):
        if self.row < 1 or self.position < 1:
            raise ValueError("row and position are positive integers")

    def __repr__(self):
        return f"({self.row},{self.position}{',C' if self.copy else ''})"

    def as_copy(self) -> "AxisLabel":
        return AxisLabel(self.row, self.position, True)

    def to_list(self) -> list:
        return [self.row, self.position, self.copy]


def axes_for_row(row: int, order: int) -> tuple:
    return tuple(AxisLabel(row, j) for j in range(1, order + 1))


def _coerce_values(values, space: FiniteProbabilitySpace) -> np.ndarray:
    if space.exact:
        arr = np.array(values, dtype=object)
        for idx in np.ndindex(arr.shape):
            if not isinstance(arr[idx], Fraction):
                arr[idx] = _to_fraction(arr[idx])
        return arr
    return np.array(values, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Kernel:
    """A real function on ``X^k`` whose coordinates carry :class:`AxisLabel` names.

    ``values`` has shape ``(|X|,) * k`` in the order of ``axes``.  An
    order-zero kernel is a 0-d array holding a single constant.
    """

    space: FiniteProbabilitySpace
    axes: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        axes = tuple(self.axes)
        if len(set(axes)) != len(axes):
            raise ValueError(f"duplicate axis labels in {axes}")
        if len(axes) > MAX_ORDER:
            raise ResourceLimitError(
                f"kernel order {len(axes)} exceeds the limit of {MAX_ORDER}")
        values = _coerce_values(self.values, self.space)
        expected = (self.space.size,) * len(axes)
        if values.shape != expected:
            raise ValueError(f"values have shape {values.shape}, expected {expected}")
        if not self.space.exact and not np.all(np.isfinite(values)):
            raise ValueError("kernel values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def order(self) -> int:
        return len(self.axes)

    @property
    def exact(self) -> bool:
        return self.space.exact

    def index(self, axis: AxisLabel) -> int:
        try:
            return self.axes.index(axis)
        except ValueError:
            raise UnknownAxisError(f"axis {axis!r} is not an axis of kernel with axes {self.axes}")

    def scalar(self):
        if self.order != 0:
            raise ValueError("only an order-0 kernel is a scalar")
        return self.values[()]

    def as_float(self) -> "Kernel":
        if not self.exact:
            return self
        return Kernel(self.space.as_float(), self.axes, self.values.astype(np.float64))

    def with_axes(self, axes: Sequence[AxisLabel]) -> "Kernel":
        """Rename axes positionally (no data movement)."""
        return Kernel(self.space, tuple(axes), self.values)

    def transpose(self, axes: Sequence[AxisLabel]) -> "Kernel":
        """Reorder the axes to the given permutation of the current labels."""
        perm = [self.index(a) for a in axes]
        if sorted(perm) != list(range(self.order)):
            raise ValueError("transpose needs a permutation of the axes")
        return Kernel(self.space, tuple(axes), np.transpose(self.values, perm))

    def scale(self, c) -> "Kernel":
        return Kernel(self.space, self.axes, self.values * c)

    def __add__(self, other: "Kernel") -> "Kernel":
        other = other.transpose(self.axes)
        return Kernel(self.space, self.axes, self.values + other.values)

    def __sub__(self, other: "Kernel") -> "Kernel":
        return self + other.scale(-1)

    def allclose(self, other: "Kernel", tol: float = FLOAT_TOL) -> bool:
        if set(self.axes) != set(other.axes):
            return False
        other = other.transpose(self.axes)
        if self.exact and other.exact:
            return bool(np.all(self.values == other.values))
        return bool(np.all(np.abs(self.values.astype(float) - other.values.astype(float)) <= tol))


def constant(space: FiniteProbabilitySpace, c, axes: Sequence[AxisLabel] = ()) -> Kernel:
    axes = tuple(axes)
    values = np.empty((space.size,) * len(axes), dtype=space.dtype)
    values[...] = _to_fraction(c) if space.exact else float(c)
    return Kernel(space, axes, values)


def from_function(space: FiniteProbabilitySpace, axes: Sequence[AxisLabel], fn) -> Kernel:
    """Tabulate ``fn(*atom_indices)`` over ``X^k``."""
    axes = tuple(axes)
    shape = (space.size,) * len(axes)
    values = np.empty(shape, dtype=space.dtype)
    for idx in np.ndindex(*shape):
        values[idx] = fn(*idx)
    return Kernel(space, axes, values)


def _weighted_sum_last(values: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = values @ w
    return np.asarray(out, dtype=values.dtype)


def integrate_out(h: Kernel, axis: AxisLabel) -> Kernel:
    """``P_axis h``: integrate one coordinate against the measure."""
    i = h.index(axis)
    moved = np.moveaxis(h.values, i, -1)
    reduced = _weighted_sum_last(moved, h.space.weight_array)
    return Kernel(h.space, h.axes[:i] + h.axes[i + 1:], reduced)


def center(h: Kernel, axis: AxisLabel) -> Kernel:
    """``Q_axis h = h - P_axis h``; the axis set is unchanged."""
    i = h.index(axis)
    mean = np.expand_dims(integrate_out(h, axis).values, i)
    return Kernel(h.space, h.axes, h.values - mean)


def tilde_center(h: Kernel, axis: AxisLabel) -> Kernel:
    """``h + P_axis h``; only used to dominate ``Q`` in norm estimates."""
    i = h.index(axis)
    mean = np.expand_dims(integrate_out(h, axis).values, i)
    return Kernel(h.space, h.axes, h.values + mean)


def integrate_all(h: Kernel):
    """Full integral of ``h`` against the product measure (a scalar)."""
    for a in h.axes:
        h = integrate_out(h, a)
    return h.scalar()


def l2_norm_squared(h: Kernel):
    sq = Kernel(h.space, h.axes, h.values * h.values)
    return integrate_all(sq)


def l2_norm(h: Kernel) -> float:
    return math.sqrt(l2_norm_squared(h))


def sup_norm(h: Kernel):
    if h.values.size == 0:
        return h.space.zero()
    return max(abs(v) for v in h.values.ravel()) if h.exact else float(np.max(np.abs(h.values)))


def is_canonical(h: Kernel, tol: float = FLOAT_TOL) -> bool:
    """True iff integrating out any single axis leaves (numerically) zero.

    In rational mode the check is exact and ``tol`` is ignored.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    for a in h.axes:
        s = sup_norm(integrate_out(h, a))
        if h.exact:
            if s != 0:
                return False
        elif s > tol:
            return False
    return True


def hoeffding_decompose(h: Kernel) -> dict:
    """Split ``h`` into canonical components indexed by axis subsets.

    The component for subset ``S`` is ``prod_{a not in S} P_a prod_{a in S} Q_a h``;
    it depends only on the axes in ``S``.
    """
    parts = {}
    for r in range(h.order + 1):
        for subset in combinations(h.axes, r):
            g = h
            for a in subset:
                g = center(g, a)
            for a in h.axes:
                if a not in subset:
                    g = integrate_out(g, a)
            parts[frozenset(subset)] = g
    return parts


def broadcast_to(h: Kernel, axes: Sequence[AxisLabel]) -> Kernel:
    """Extend ``h`` to a superset of axes, constant along the new ones."""
    axes = tuple(axes)
    missing = [a for a in h.axes if a not in axes]
    if missing:
        raise UnknownAxisError(f"target axes lack {missing}")
    values = h.values
    cur = list(h.axes)
    for a in axes:
        if a not in cur:
            values = np.expand_dims(values, -1)
            cur.append(a)
    values = np.transpose(values, [cur.index(a) for a in axes])
    values = np.broadcast_to(values, (h.space.size,) * len(axes)).copy()
    return Kernel(h.space, axes, values)


def tensor_product(f: Kernel, g: Kernel) -> Kernel:
    """``(f o g)``: product kernel on the concatenated axis lists."""
    if f.space != g.space:
        raise ValueError("kernels live on different spaces")
    shared = set(f.axes) & set(g.axes)
    if shared:
        raise ValueError(f"shared axis labels {sorted(shared)}; retag rows first")
    values = np.multiply.outer(f.values, g.values)
    return Kernel(f.space, f.axes + g.axes, values)


def retag(h: Kernel, row: int) -> Kernel:
    """Rename every axis to ``(row, j)``, ``j = 1..k`` in current order."""
    return h.with_axes(axes_for_row(row, h.order))


def substitute(h: Kernel, mapping: Mapping[AxisLabel, AxisLabel]) -> Kernel:
    """Read each source axis from its target variable.

    Axes absent from ``mapping`` keep their names.  When several axes map to
    the same target the result is the diagonal restriction.
    """
    for a in mapping:
        if a not in h.axes:
            raise UnknownAxisError(f"mapping key {a!r} is not an axis of the kernel")
    targets = [mapping.get(a, a) for a in h.axes]
    new_axes = tuple(dict.fromkeys(targets))
    m = len(new_axes)
    if m == 0:
        return h
    grid = np.indices((h.space.size,) * m)
    pos = {a: i for i, a in enumerate(new_axes)}
    values = h.values[tuple(grid[pos[t]] for t in targets)]
    return Kernel(h.space, new_axes, np.asarray(values, dtype=h.values.dtype))


# -- serialization ---------------------------------------------------------

def _dump_number(v, exact: bool):
    if exact:
        v = _to_fraction(v)
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return float(v)


def kernel_to_dict(h: Kernel) -> dict:
    return {
        "atoms": list(h.space.atoms),
        "weights": [_dump_number(w, h.exact) for w in h.space.weights],
        "axes": [a.to_list() for a in h.axes],
        "values": [_dump_number(v, h.exact) for v in h.values.ravel()],
    }


def kernel_from_dict(d: Mapping) -> Kernel:
    weights = d["weights"]
    exact = any(isinstance(w, str) for w in weights)
    if exact:
        weights = [Fraction(str(w)) for w in weights]
    space = FiniteProbabilitySpace(tuple(d["atoms"]), tuple(weights))
    axes = tuple(AxisLabel(int(r), int(p), bool(c)) for r, p, c in d["axes"])
    flat = d["values"]
    if exact:
        flat = [Fraction(str(v)) for v in flat]
    shape = (space.size,) * len(axes)
    values = np.empty(shape, dtype=space.dtype)
    if len(flat) != values.size:
        raise ValueError(f"{len(flat)} values given, expected {values.size}")
    values.ravel()[:] = flat
    return Kernel(space, axes, values)


def dumps_kernel(h: Kernel) -> str:
    return json.dumps(kernel_to_dict(h), sort_keys=True)


def save_kernel(h: Kernel, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_kernel(h) + "\n")


def load_kernel(path) -> Kernel:
    with open(path) as fh:
        return kernel_from_dict(json.load(fh))


def sum_kernels(kernels: Iterable[Kernel]) -> Kernel:
    kernels = list(kernels)
    total = kernels[0]
    for k in kernels[1:]:
        total = total + k
    return total
