"""Exact additive energies, representation functions, and spectra.

The additive energy of order 2m counts 2m-tuples whose first m entries and
last m entries have equal sums:

    E_2m(A) = #{(a_1,...,a_2m) in A^2m : a_1+...+a_m = a_{m+1}+...+a_2m}
            = sum_x g_m(x)^2,       g_m(x) = # m-tuples of A summing to x.

Three interchangeable backends are exposed through energy():

* "exact"    - integer convolution folds (WHT fast path on elementary
               2-groups); the default, always exact.
* "brute"    - direct m-fold tuple enumeration with hash counting; the
               verification oracle, refused above a tuple budget.
* "spectral" - floating transform identity E_2m = |Z|^(2m-1) sum |1^_A|^2m,
               returned with an integrality report, never silently rounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .convolve import (
    exact_power_sum,
    exact_sum,
    fold_with_set,
    group_fft,
    wht,
)
from .errors import BudgetExceededError, GroupMismatchError
from .groups import GroupElement, GroupSet, GroupSpec, require_dense

ENERGY_ORDERS = (2, 4, 6, 8)
DEFAULT_TUPLE_BUDGET = 10**9
SPECTRAL_ROUNDING_THRESHOLD = 0.25


@dataclass(frozen=True)
class CountVector:
    """Exact nonnegative integer function on the group, dense over |Z|."""

    spec: GroupSpec
    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.shape != (self.spec.order,):
            raise ValueError("count vector length must equal the group order")
        if arr.size and int(arr.min()) < 0:
            raise ValueError("count vectors are nonnegative")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    def __getitem__(self, item) -> int:
        if isinstance(item, GroupElement):
            item = item.index
        return int(self.counts[int(item)])

    def total(self) -> int:
        return exact_sum(self.counts)

    def energy(self) -> int:
        """Exact sum of squares of the counts."""
        return exact_power_sum(self.counts, 2)

    def support_indices(self) -> np.ndarray:
        return np.nonzero(self.counts)[0].astype(np.int64)


@dataclass(frozen=True)
class SpectrumTable:
    """|1^_A(xi)|^2 over all characters, normalization 1^_A = (1/|Z|) sum e(<xi,x>)."""

    spec: GroupSpec
    values: np.ndarray
    set_size: int

    def plancherel_residual(self) -> float:
        """Relative deviation of |Z| * sum values from |A|."""
        lhs = self.spec.order * float(self.values.sum())
        return abs(lhs - self.set_size) / max(self.set_size, 1)

    def energy_estimate(self, order: int) -> float:
        m = _half_order(order)
        return float(self.spec.order) ** (2 * m - 1) * float((self.values**m).sum())


@dataclass(frozen=True)
class SpectralEnergy:
    """Floating energy value plus its integrality report."""

    order: int
    value: float
    rounded: Optional[int]
    residual: Optional[float]


@dataclass(frozen=True)
class HolderReport:
    """Both sides of the fourth-vs-eighth moment sandwich, compared exactly."""

    set_size: int
    e4: int
    e8: int
    lower: Fraction
    upper: int
    passes: bool


def _half_order(order: int) -> int:
    if order not in ENERGY_ORDERS:
        raise ValueError(f"energy order must be one of {ENERGY_ORDERS}, got {order}")
    return order // 2


def rep_function(a: GroupSet) -> CountVector:
    """r(x) = #{(u, v) in A^2 : u - v = x}, exact.

    r(0) = |A|, sum_x r(x) = |A|^2, and r(-x) = r(x) when A is symmetric.
    """
    require_dense(a.spec, "rep_function")
    if len(a) == 0:
        return CountVector(a.spec, np.zeros(a.spec.order, dtype=np.int64))
    ind = a.indicator()
    neg = a.spec.neg_indices(a.indices)
    return CountVector(a.spec, fold_with_set(a.spec, ind, neg))


def sum_count(a: GroupSet, m: int, *, max_fold: int = 4) -> CountVector:
    """g_m(x) = # of m-tuples of A summing to x, exact; sum_x g_m = |A|^m."""
    if m < 1:
        raise ValueError("fold count must be >= 1")
    if m > max_fold:
        raise ValueError(f"fold count {m} above the configured limit {max_fold}")
    require_dense(a.spec, "sum_count")
    g = a.indicator()
    for _ in range(m - 1):
        g = fold_with_set(a.spec, g, a.indices)
    return CountVector(a.spec, g)


def energy(
    a: GroupSet,
    order: int,
    method: str = "exact",
    *,
    tuple_budget: int = DEFAULT_TUPLE_BUDGET,
):
    """Additive energy E_order(A); exact integer for "exact"/"brute".

    "spectral" returns a SpectralEnergy report instead of a bare integer.
    """
    m = _half_order(order)
    if method == "exact":
        return _energy_exact(a, m)
    if method == "brute":
        return _energy_brute(a, m, tuple_budget)
    if method == "spectral":
        return spectral_energy(a, order)
    raise ValueError(f"unknown energy method {method!r}")


def energy_profile(a: GroupSet) -> dict[int, int]:
    """All four exact energies {2: E_2, 4: E_4, 6: E_6, 8: E_8} in one pass."""
    require_dense(a.spec, "energy_profile")
    if len(a) == 0:
        return {order: 0 for order in ENERGY_ORDERS}
    if a.spec.is_elementary_two:
        f = wht(a.spec, a.indicator())
        return {order: _wht_energy(a.spec, f, order // 2) for order in ENERGY_ORDERS}
    out = {}
    g = a.indicator()
    for m in (1, 2, 3, 4):
        if m > 1:
            g = fold_with_set(a.spec, g, a.indices)
        out[2 * m] = exact_power_sum(g, 2)
    return out


def _energy_exact(a: GroupSet, m: int) -> int:
    require_dense(a.spec, "exact energy")
    if len(a) == 0:
        return 0
    if a.spec.is_elementary_two:
        f = wht(a.spec, a.indicator())
        return _wht_energy(a.spec, f, m)
    return sum_count(a, m).energy()


def _wht_energy(spec: GroupSpec, f: np.ndarray, m: int) -> int:
    total = exact_power_sum(f, 2 * m)
    value, rem = divmod(total, spec.order)
    if rem:
        raise ArithmeticError("transform power sum is not divisible by |Z|")
    return value


def _energy_brute(a: GroupSet, m: int, tuple_budget: int) -> int:
    if len(a) == 0:
        return 0
    tuples = len(a) ** m
    if tuples > tuple_budget:
        raise BudgetExceededError(
            f"brute-force enumeration of {tuples} tuples refused (budget {tuple_budget})"
        )
    values, counts = _brute_sum_multiset(a, m)
    return sum(int(c) * int(c) for c in counts.tolist())


def _brute_sum_multiset(a: GroupSet, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Enumerate all m-fold sums of A and count collisions by hashing.

    Chunked so memory stays bounded; counting is independent of the
    convolution backends.
    """
    spec = a.spec
    sums = a.indices.copy()
    for _ in range(m - 1):
        parts = []
        chunk = max(1, (1 << 22) // max(len(a), 1))
        for start in range(0, sums.size, chunk):
            block = sums[start : start + chunk]
            expanded = spec.add_indices(block[:, None], a.indices[None, :])
            parts.append(expanded.reshape(-1))
        sums = np.concatenate(parts)
    return np.unique(sums, return_counts=True)


def spectral_energy(a: GroupSet, order: int) -> SpectralEnergy:
    """Transform-identity energy with an integrality report.

    The rounded integer is offered only when the value is below 2^51: past
    that the float spacing exceeds the 0.25 residual threshold, so "close
    to an integer" stops being evidence of anything.  Exactness always
    comes from the exact backend; this one promises relative 1e-6.
    """
    m = _half_order(order)
    table = spectrum(a)
    value = table.energy_estimate(order)
    rounded: Optional[int] = None
    residual: Optional[float] = None
    if value < float(1 << 51):
        nearest = int(round(value))
        residual = abs(value - nearest)
        if residual < SPECTRAL_ROUNDING_THRESHOLD:
            rounded = nearest
    return SpectralEnergy(order=order, value=value, rounded=rounded, residual=residual)


def spectrum(a: GroupSet) -> SpectrumTable:
    """Squared Fourier coefficients of the set indicator at every character."""
    require_dense(a.spec, "spectrum")
    f = group_fft(a.spec, a.indicator(dtype=np.float64))
    values = (f.real**2 + f.imag**2) / float(a.spec.order) ** 2
    values.setflags(write=False)
    return SpectrumTable(spec=a.spec, values=values, set_size=len(a))


def holder_check(a: GroupSet) -> HolderReport:
    """Exact rational check of E_4^3 / |A|^2 <= E_8 <= |A|^4 E_4."""
    if len(a) < 1:
        raise ValueError("holder_check needs a nonempty set")
    prof = energy_profile(a)
    e4, e8 = prof[4], prof[8]
    lower = Fraction(e4**3, len(a) ** 2)
    upper = len(a) ** 4 * e4
    passes = lower <= e8 <= upper
    return HolderReport(set_size=len(a), e4=e4, e8=e8, lower=lower, upper=upper, passes=passes)


def smoothing_exponent(a: GroupSet, *, e4: Optional[int] = None, e8: Optional[int] = None) -> float:
    """sigma^ = (log E_8 - 3 log E_4 + 2 log |A|) / log |A|.

    Zero exactly when the lower Holder bound is attained (subgroups);
    nonnegative up to floating error for every set.
    """
    if len(a) < 2:
        raise ValueError("smoothing exponent needs |A| >= 2")
    if e4 is None or e8 is None:
        prof = energy_profile(a)
        e4 = prof[4] if e4 is None else e4
        e8 = prof[8] if e8 is None else e8
    logm = math.log(len(a))
    return (math.log(e8) - 3.0 * math.log(e4) + 2.0 * logm) / logm


def asym_energy(b: GroupSet, c: GroupSet) -> int:
    """E(B, C) = #{(a, b, c, d) in B x C x B x C : a - b = c - d}, exact."""
    if b.spec != c.spec:
        raise GroupMismatchError("asym_energy needs sets in the same group")
    require_dense(b.spec, "asym_energy")
    if len(b) == 0 or len(c) == 0:
        return 0
    conv = fold_with_set(b.spec, b.indicator(), b.spec.neg_indices(c.indices))
    return exact_power_sum(conv, 2)


def sum_quadruples(b: GroupSet, c: GroupSet) -> int:
    """#{(b1, c1, b2, c2) in (B x C)^2 : b1 + c1 = b2 + c2}, exact."""
    if b.spec != c.spec:
        raise GroupMismatchError("sum_quadruples needs sets in the same group")
    require_dense(b.spec, "sum_quadruples")
    if len(b) == 0 or len(c) == 0:
        return 0
    conv = fold_with_set(b.spec, b.indicator(), c.indices)
    return exact_power_sum(conv, 2)


def popularity_vector(a: GroupSet) -> CountVector:
    """p(x) = #{(b, c, d) in A^3 : x = b + c - d} = (1_A * 1_A * 1_{-A})(x)."""
    require_dense(a.spec, "popularity")
    if len(a) == 0:
        return CountVector(a.spec, np.zeros(a.spec.order, dtype=np.int64))
    g2 = fold_with_set(a.spec, a.indicator(), a.indices)
    p = fold_with_set(a.spec, g2, a.spec.neg_indices(a.indices))
    return CountVector(a.spec, p)


def popularity(x: GroupElement, a: GroupSet) -> int:
    if x.spec != a.spec:
        raise GroupMismatchError("element and set live in different groups")
    return popularity_vector(a)[x.index]
