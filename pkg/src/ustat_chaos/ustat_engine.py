"""Evaluation of U-statistics, exact oracles, and Monte Carlo estimation.

On a finite space a U-statistic only depends on how often each atom occurs
in the sample.  Writing ``c_a`` for the count of atom ``a`` and ``m_a(x)``
for the multiplicity of ``a`` in the atom tuple ``x``,

    k! I_{n,k}(f) = sum_x f(x) prod_a c_a (c_a - 1) ... (c_a - m_a(x) + 1),

which is what :func:`ordered_sums` computes for whole batches of samples.
:func:`evaluate_ustat_bruteforce` sums over index tuples directly and is
kept as the independent reference.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations, product
from typing import Sequence

import numpy as np
from scipy.special import gammaln
from statsmodels.stats.proportion import proportion_confint

from .measure_kernel import FiniteProbabilitySpace, Kernel, ResourceLimitError, sup_norm

MAX_ASSIGNMENTS = 10_000_000
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SampleAssignment:
    """A realization ``xi_1, ..., xi_n`` given as atom indices."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))

    @property
    def n(self) -> int:
        return len(self.values)

    def counts(self, n_atoms: int) -> np.ndarray:
        return np.bincount(np.asarray(self.values, dtype=np.int64), minlength=n_atoms)


@dataclass(frozen=True)
class TailEstimate:
    u: float
    p_hat: float
    ci_halfwidth: float
    ci_low: float
    ci_high: float
    samples: int
    seed: int
    method: str


@dataclass(frozen=True)
class MomentEstimate:
    M: int
    mean: float
    stderr: float
    samples: int
    seed: int


def _falling(c: np.ndarray, m: int) -> np.ndarray:
    out = np.ones_like(c)
    for i in range(m):
        out = out * (c - i)
    return out


def _tuple_multiplicities(n_atoms: int, k: int) -> np.ndarray:
    tuples = np.array(list(product(range(n_atoms), repeat=k)), dtype=np.int64).reshape(-1, k)
    return np.stack([(tuples == a).sum(axis=1) for a in range(n_atoms)], axis=1)


def counts_from_assignments(assignments: np.ndarray, n_atoms: int) -> np.ndarray:
    assignments = np.asarray(assignments)
    return (assignments[..., None] == np.arange(n_atoms)).sum(axis=-2)


def ordered_sums(h: Kernel, counts: np.ndarray) -> np.ndarray:
    """``k! I_{n,k}(h)`` for every row of ``counts`` (shape ``(S, |X|)``)."""
    counts = np.asarray(counts, dtype=np.int64)
    S, A = counts.shape
    k = h.order
    if k == 0:
        return np.full(S, h.scalar(), dtype=h.values.dtype)
    n_max = int(counts.sum(axis=1).max(initial=0))
    dtype = np.int64 if k * math.log2(max(n_max, 2)) < 62 else object
    c = counts.astype(dtype)
    ff = np.stack([_falling(c, m) for m in range(k + 1)], axis=-1)  # (S, A, k+1)
    mult = _tuple_multiplicities(A, k)                                # (A^k, A)
    weights = np.ones((S, mult.shape[0]), dtype=dtype)
    for a in range(A):
        weights = weights * ff[:, a, :][:, mult[:, a]]
    return weights @ h.values.ravel()


def evaluate_ustat(f: Kernel, sample: SampleAssignment):
    """``I_{n,k}(f)`` at one sample, with the 1/k! normalization."""
    if sample.n < f.order:
        raise ValueError(f"sample size {sample.n} is smaller than the order {f.order}")
    total = ordered_sums(f, sample.counts(f.space.size)[None, :])[0]
    k_fact = math.factorial(f.order)
    return Fraction(total) / k_fact if f.exact else float(total) / k_fact


def evaluate_ustat_bruteforce(f: Kernel, sample: SampleAssignment):
    """Same as :func:`evaluate_ustat` by summing over ordered index tuples."""
    if sample.n < f.order:
        raise ValueError(f"sample size {sample.n} is smaller than the order {f.order}")
    if f.order == 0:
        return f.scalar()
    total = f.space.zero()
    for idx in permutations(range(sample.n), f.order):
        total += f.values[tuple(sample.values[i] for i in idx)]
    k_fact = math.factorial(f.order)
    return total / k_fact if f.exact else float(total) / k_fact


def normalization(n: int, total_order: int, exact: bool):
    """``n^{-total_order/2}``, exactly when that is rational."""
    if not exact:
        return float(n) ** (-total_order / 2)
    if total_order % 2 == 0:
        return Fraction(1, n ** (total_order // 2))
    r = math.isqrt(n)
    if r * r == n:
        return Fraction(1, r ** total_order)
    raise ValueError(
        f"n^(-{total_order}/2) is irrational for n={n}; use normalized=False in rational mode")


def all_assignments(n_atoms: int, n: int) -> np.ndarray:
    """Every ``omega`` in ``X^n`` in lexicographic order, shape ``(|X|^n, n)``."""
    total = n_atoms ** n
    if total > MAX_ASSIGNMENTS:
        raise ResourceLimitError(
            f"|X|^n = {total} assignments exceeds {MAX_ASSIGNMENTS}; use Monte Carlo instead")
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.indices((n_atoms,) * n).reshape(n, -1).T


def assignment_probabilities(space: FiniteProbabilitySpace, counts: np.ndarray) -> np.ndarray:
    if space.exact:
        w = space.weights
        return np.array([math.prod(w[a] ** int(c[a]) for a in range(space.size))
                         for c in counts], dtype=object)
    return np.prod(space.weight_array[None, :] ** counts, axis=1)


def product_of_statistics(fs: Sequence[Kernel], counts: np.ndarray) -> np.ndarray:
    """``prod_l k_l! I_{n,k_l}(f_l)`` per row of ``counts``."""
    out = None
    for f in fs:
        v = ordered_sums(f, counts)
        out = v if out is None else out * v
    return out


def exact_expectation(fs: Sequence[Kernel], n: int, normalized: bool = True):
    """``E prod_l k_l! n^{-k_l/2} I_{n,k_l}(f_l)`` by summing over all of ``X^n``.

    With ``normalized=False`` the powers of ``n`` are left out, which keeps
    rational mode exact for every ``n``.
    """
    fs = list(fs)
    space = fs[0].space
    if any(f.space != space for f in fs):
        raise ValueError("kernels live on different spaces")
    if any(n < f.order for f in fs):
        raise ValueError("n must be at least the order of every kernel")
    counts = counts_from_assignments(all_assignments(space.size, n), space.size)
    probs = assignment_probabilities(space, counts)
    value = (product_of_statistics(fs, counts) * probs).sum()
    if space.exact:
        value = Fraction(value)
    else:
        value = float(value)
    if normalized:
        value = value * normalization(n, sum(f.order for f in fs), space.exact)
    return value


# -- exact law through multinomial counts ----------------------------------

def compositions(n: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``n``."""
    rows = np.zeros((1, 0), dtype=np.int32)
    rem = np.array([n], dtype=np.int64)
    for _ in range(parts - 1):
        lengths = rem + 1
        starts = np.cumsum(lengths) - lengths
        first = np.arange(lengths.sum()) - np.repeat(starts, lengths)
        rows = np.repeat(rows, lengths, axis=0)
        rows = np.concatenate([rows, first[:, None].astype(np.int32)], axis=1)
        rem = np.repeat(rem, lengths) - first
    return np.concatenate([rows, rem[:, None].astype(np.int32)], axis=1)


@dataclass
class ExactDistribution:
    """Law of ``k! n^{-k/2} I_{n,k}(f)`` as (value, probability) atoms."""

    values: np.ndarray
    probs: np.ndarray
    _abs_sorted: np.ndarray = field(init=False, repr=False)
    _suffix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.abs(self.values)
        order = np.argsort(a, kind="stable")
        self._abs_sorted = a[order]
        # suffix sums accumulated from the largest |value| down, so small
        # tail probabilities are not swamped by the bulk
        rev = self.probs[order][::-1]
        self._suffix = np.concatenate([np.cumsum(rev)[::-1], [0.0]])

    def tail(self, u: float) -> float:
        """``P(|value| > u)``."""
        i = int(np.searchsorted(self._abs_sorted, u, side="right"))
        return float(min(1.0, self._suffix[i]))

    def moment(self, power: int) -> float:
        return float(math.fsum(self.probs * self.values ** power))


def exact_distribution(f: Kernel, n: int, chunk: int = 250_000) -> ExactDistribution:
    """Enumerate multinomial count vectors; feasible for small ``|X|``."""
    space = f.space.as_float()
    f = f.as_float()
    comps = compositions(n, space.size)
    logw = np.log(np.where(np.array(space.weights) > 0, space.weights, 1.0))
    zero = np.array(space.weights) == 0
    keep = ~np.any(comps[:, zero] > 0, axis=1)
    comps = comps[keep]
    logp = gammaln(n + 1) - gammaln(comps + 1.0).sum(axis=1) + comps @ logw
    probs = np.exp(logp)
    values = np.empty(len(comps))
    scale = float(n) ** (-f.order / 2)
    for s in range(0, len(comps), chunk):
        values[s:s + chunk] = ordered_sums(f, comps[s:s + chunk]).astype(float) * scale
    return ExactDistribution(values, probs)


# -- Monte Carlo -----------------------------------------------------------

def _block_counts(args):
    cdf, n, m, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    u = rng.random((m, n))
    atoms = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    return counts_from_assignments(atoms, len(cdf))


def sample_counts(space: FiniteProbabilitySpace, n: int, samples: int, seed: int,
                  block_size: int = 10_000, workers: int = 1) -> np.ndarray:
    """Atom counts of ``samples`` iid samples of size ``n``.

    Block ``i`` draws from child ``i`` of ``SeedSequence(seed)`` and atoms are
    found by inverse CDF, so the output does not depend on ``workers``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    cdf = np.cumsum(np.array(space.weights, dtype=float))
    n_blocks = -(-samples // block_size)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    sizes = [min(block_size, samples - i * block_size) for i in range(n_blocks)]
    jobs = [(cdf, n, m, ss) for m, ss in zip(sizes, children)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_block_counts, jobs))
    else:
        parts = [_block_counts(j) for j in jobs]
    return np.concatenate(parts, axis=0)


def mc_statistics(f: Kernel, n: int, samples: int, seed: int, workers: int = 1) -> np.ndarray:
    """Draws of ``k! n^{-k/2} I_{n,k}(f)``."""
    if n < f.order:
        raise ValueError("n must be at least the kernel order")
    f = f.as_float()
    counts = sample_counts(f.space, n, samples, seed, workers=workers)
    return ordered_sums(f, counts).astype(float) * float(n) ** (-f.order / 2)


def mc_moment(f: Kernel, n: int, M: int, samples: int, seed: int, workers: int = 1) -> MomentEstimate:
    x = mc_statistics(f, n, samples, seed, workers) ** (2 * M)
    stderr = float(x.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return MomentEstimate(M, float(x.mean()), stderr, samples, seed)


def binomial_interval(count: int, total: int) -> tuple:
    """95% interval: normal approximation, Wilson when counts are small."""
    p = count / total
    if count >= 10 and total - count >= 10:
        lo, hi = proportion_confint(count, total, alpha=0.05, method="normal")
        method = "normal"
    else:
        lo, hi = proportion_confint(count, total, alpha=0.05, method="wilson")
        method = "wilson"
    lo = 0.0 if count == 0 else max(0.0, float(lo))
    hi = 1.0 if count == total else min(1.0, float(hi))
    return p, max(hi - p, p - lo), lo, hi, method


def tail_estimates(stats: np.ndarray, u_grid: Sequence[float], seed: int) -> list:
    a = np.abs(stats)
    out = []
    for u in u_grid:
        if u < 0:
            raise ValueError("thresholds must be nonnegative")
        count = int(np.count_nonzero(a > u))
        p, hw, lo, hi, method = binomial_interval(count, len(a))
        out.append(TailEstimate(float(u), p, hw, lo, hi, len(a), seed, method))
    return out


def mc_tail(f: Kernel, n: int, u_grid: Sequence[float], samples: int, seed: int,
            workers: int = 1) -> list:
    """Empirical ``P(|k! n^{-k/2} I_{n,k}(f)| > u)`` for each ``u``."""
    return tail_estimates(mc_statistics(f, n, samples, seed, workers), u_grid, seed)


def statistic_envelope(f: Kernel, n: int) -> float:
    """Largest possible ``|k! n^{-k/2} I_{n,k}(f)|`` given ``sup |f|``."""
    return float(sup_norm(f)) * math.perm(n, f.order) * float(n) ** (-f.order / 2)
