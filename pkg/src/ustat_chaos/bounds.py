"""Closed-form tail and moment bounds, Markov chaining, and calibration.

Constants that are only known to exist are never defaulted: every
evaluator takes them explicitly, and :func:`calibrate_constant` produces
values tagged ``"calibrated"`` from a supplied dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .diagrams import double_factorial_odd

HOLDS, VIOLATED, NOT_APPLICABLE = "holds", "violated", "not-applicable"
PROVENANCE = ("published", "user", "calibrated")
USTAT_MOMENT_C = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class Constant:
    value: float
    provenance: str

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True)
class BoundParams:
    k: int
    sigma: float
    n: int | None = None
    constants: Mapping[str, Constant] = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def const(self, name: str) -> float:
        try:
            return self.constants[name].value
        except KeyError:
            raise ValueError(f"constant {name!r} must be supplied explicitly") from None


@dataclass
class BoundReport:
    which: str
    grid: list = field(default_factory=list)
    bound: list = field(default_factory=list)
    comparator: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, x, bound, comparator, verdict) -> None:
        self.grid.append(x)
        self.bound.append(bound)
        self.comparator.append(comparator)
        self.verdicts.append(verdict)

    @property
    def ok(self) -> bool:
        return VIOLATED not in self.verdicts


def verdict(bound, comparator, rtol: float = 1e-9) -> str:
    if bound is None or comparator is None:
        return NOT_APPLICABLE
    return HOLDS if comparator <= bound * (1 + rtol) + 1e-300 else VIOLATED


# -- tail bounds ------------------------------------------------------------

def chaos_bernstein_bound(u: float, params: BoundParams) -> float:
    """``c1 exp{-c2 u^{2/k} / (sigma^{2/k} (1 + c3 (u n^{-k/2} sigma^{-(k+1)})^{2/(k(k+1))}))}``."""
    k, s, n = params.k, params.sigma, params.n
    if n is None:
        raise ValueError("n is required")
    c1, c2, c3 = params.const("c1"), params.const("c2"), params.const("c3")
    if u < 0:
        raise ValueError("u must be nonnegative")
    ratio = u * n ** (-k / 2) * s ** (-(k + 1))
    denom = s ** (2 / k) * (1 + c3 * ratio ** (2 / (k * (k + 1))))
    return c1 * math.exp(-c2 * u ** (2 / k) / denom)


def bernstein_k1(u: float, sigma: float, n: int) -> float:
    """Classical Bernstein inequality for normalized sums, ``c = (2, 1/2, 1/3)``."""
    consts = {"c1": Constant(2.0, "published"), "c2": Constant(0.5, "published"),
              "c3": Constant(1 / 3, "published")}
    return chaos_bernstein_bound(u, BoundParams(1, sigma, n, consts))


def gaussian_chaos_tail_bound(u: float, k: int, sigma: float, C: float) -> float:
    """``C exp{-(u/sigma)^{2/k} / 2}``."""
    if sigma <= 0 or C <= 0:
        raise ValueError("need sigma > 0 and C > 0")
    return C * math.exp(-0.5 * (u / sigma) ** (2 / k))


@dataclass(frozen=True)
class UstatTailValue:
    value: float | None
    applicable: bool
    regime: str  # "direct", "extended", "zero" or "outside"
    sigma_used: float


def ustat_tail_bound(u: float, k: int, sigma: float, n: int, A: float, B: float,
                     extend: bool = False, reading: str = "displayed") -> UstatTailValue:
    """``A exp{-u^{2/k} / (2 sigma^{2/k} (1 + B (u n^{-k/2} sigma^{-(k+1)})^{1/k}))}``.

    Valid for ``0 <= u <= n^{k/2} sigma^{k+1}``.  With ``extend`` the range
    ``n^{k/2} sigma^{k+1} < u <= n^{k/2}`` is covered by re-evaluating at
    ``sigma_bar = (u n^{-k/2})^{1/(k+1)}``; ``reading`` selects the exponent
    ``(u^2 n)^{1/(k+1)} / (2 (1 + B))`` (``"displayed"``) or with
    ``(1 + B)^{1/k}`` (``"remark"``).  Beyond ``n^{k/2}`` the statistic of
    a kernel with ``sup <= 1`` cannot exceed ``u`` and the bound is ``0``.
    """
    if sigma <= 0 or sigma > 1:
        raise ValueError("need 0 < sigma <= 1")
    if A <= 0 or B <= 0:
        raise ValueError("need A, B > 0")
    if u < 0:
        return UstatTailValue(None, False, "outside", sigma)
    edge = n ** (k / 2) * sigma ** (k + 1)
    if u <= edge:
        ratio = u * n ** (-k / 2) * sigma ** (-(k + 1))
        expo = u ** (2 / k) / (2 * sigma ** (2 / k) * (1 + B * ratio ** (1 / k)))
        return UstatTailValue(A * math.exp(-expo), True, "direct", sigma)
    if not extend:
        return UstatTailValue(None, False, "outside", sigma)
    if u > n ** (k / 2):
        return UstatTailValue(0.0, True, "zero", sigma)
    s_bar = (u * n ** (-k / 2)) ** (1 / (k + 1))
    if reading == "displayed":
        factor = 1 + B
    elif reading == "remark":
        factor = (1 + B) ** (1 / k)
    else:
        raise ValueError("reading is 'displayed' or 'remark'")
    return UstatTailValue(A * math.exp(-(u * u * n) ** (1 / (k + 1)) / (2 * factor)),
                          True, "extended", s_bar)


# -- moment bounds ----------------------------------------------------------

def gaussian_moment_bound(k: int, M: int, sigma: float, A: float = 1.5) -> tuple:
    """``((2kM - 1)!! sigma^{2M}, A (2/e)^{kM} (kM)^{kM} sigma^{2M})``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    km = k * M
    df = double_factorial_odd(2 * km) * sigma ** (2 * M)
    stirling = A * (2 / math.e) ** km * km ** km * sigma ** (2 * M)
    return df, stirling


def stirling_threshold(A: float = 1.5, k: int = 1, max_M: int = 200) -> int | None:
    """Smallest ``M0`` with the Stirling form above ``(2kM-1)!!`` for all
    ``M0 <= M <= max_M`` (checked on the grid only, in logarithms)."""
    def gap(M):
        km = k * M
        log_df = math.lgamma(2 * km + 1) - km * math.log(2) - math.lgamma(km + 1)
        log_st = math.log(A) + km * math.log(2 / math.e) + km * math.log(km)
        return log_st - log_df

    ok = [gap(M) >= 0 for M in range(1, max_M + 1)]
    for M0 in range(1, max_M + 1):
        if all(ok[M0 - 1:]):
            return M0
    return None


@dataclass(frozen=True)
class MomentBound:
    value: float | None
    applicable: bool


def ustat_moment_bound(k: int, M: int, sigma: float, n: int, eta: float, A: float,
                       C: float = USTAT_MOMENT_C) -> MomentBound:
    """``A (1 + C sqrt(eta))^{2kM} (2/e)^{kM} (kM)^{kM} sigma^{2M}`` when ``kM <= eta n sigma^2``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    km = k * M
    if km > eta * n * sigma ** 2 * (1 + 1e-12):
        return MomentBound(None, False)
    value = A * (1 + C * math.sqrt(eta)) ** (2 * km) * (2 / math.e) ** km * km ** km * sigma ** (2 * M)
    return MomentBound(value, True)


def ustat_moment_constant(moment: float, k: int, M: int, sigma: float, n: int,
                          C: float = USTAT_MOMENT_C) -> tuple:
    """Smallest ``A`` making the moment bound hold at ``eta = kM/(n sigma^2)``."""
    eta = k * M / (n * sigma ** 2)
    unit = ustat_moment_bound(k, M, sigma, n, eta, 1.0, C)
    return moment / unit.value, eta


# -- Markov chaining --------------------------------------------------------

@dataclass(frozen=True)
class ChainedTail:
    u: float
    M: int | None
    value: float | None
    applicable: bool


def chaining_order(u: float, k: int, sigma: float, n: int | None = None, B: float | None = None) -> float:
    """``M_bar(u)``: ``(u/sigma)^{2/k} / (2k)``, shrunk by ``1 + B (u/sigma)^{1/k} / (sqrt(n) sigma)``
    when ``n`` and ``B`` are given."""
    m = (u / sigma) ** (2 / k) / (2 * k)
    if n is not None and B is not None:
        m /= 1 + B * (u / sigma) ** (1 / k) / (math.sqrt(n) * sigma)
    return m


def tail_from_moments(moment_fn: Callable[[int], float], u: float, k: int, sigma: float,
                      n: int | None = None, B: float | None = None) -> ChainedTail:
    """``E X^{2M} / u^{2M}`` at ``M = floor(M_bar(u))``; ``moment_fn(M)`` returns ``E X^{2M}``."""
    if u <= 0:
        raise ValueError("u must be positive")
    M = math.floor(chaining_order(u, k, sigma, n, B))
    if M < 1:
        return ChainedTail(u, None, None, False)
    moment = moment_fn(M)
    if moment is None:
        return ChainedTail(u, M, None, False)
    return ChainedTail(u, M, float(moment) / u ** (2 * M), True)


# -- calibration ------------------------------------------------------------

def calibrate_constant(unit_bound: Callable[[float], float], grid: Sequence[float],
                       data: Sequence[float]) -> Constant:
    """Smallest multiplier ``c`` with ``c * unit_bound(u) >= data(u)`` on the grid."""
    ratios = []
    for u, y in zip(grid, data):
        b = unit_bound(u)
        if b is None:
            continue
        if b <= 0:
            if y > 0:
                raise ValueError(f"unit bound vanishes at u={u} where the data is {y}")
            continue
        ratios.append(y / b)
    if not ratios:
        raise ValueError("no applicable grid point to calibrate on")
    return Constant(max(ratios), "calibrated")


def calibrate_ustat_tail(grid: Sequence[float], upper: Sequence[float], k: int, sigma: float,
                       n: int, B: float) -> Constant:
    """Smallest ``A`` (given ``B``) dominating the data on the valid range."""
    return calibrate_constant(
        lambda u: ustat_tail_bound(u, k, sigma, n, 1.0, B).value, grid, upper)
