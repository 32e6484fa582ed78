"""Dyadic difference structures extracted from the representation function.

A structure on a symmetric set Delta of size M is a pair (G, D): a set D of
nonzero differences whose representation counts r(x) = |Delta cap (x+Delta)|
all lie in one factor-2 band [v, 2v), together with the full difference
graph G = {(a, b) in Delta^2 : a - b in D}.  The graph is stored implicitly:

    graph_size   |G|   = sum_{x in D} r(x)
    graph_energy E(G)  = sum_{x in D} r(x)^2

and the two exponents everything downstream speaks in are

    tau    with E_4(Delta) = M^(2+tau)
    height with |G|        = M^(2-height).

x = 0 is never admitted into D: r(0) = M is a degenerate difference and
would inflate E(G) with diagonal quadruples.  All "up to a log factor"
claims are surfaced as measured guarantee ratios, never asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .convolve import exact_power_sum, exact_sum, pairwise_diff_indices
from .energy import CountVector, rep_function
from .groups import GroupSet

DUAL_WORK_BUDGET = 50_000_000


@dataclass(frozen=True)
class AdditiveStructure:
    base: GroupSet
    diffs: GroupSet
    bucket_lo: int
    tau: float
    height: float
    graph_size: int
    graph_energy: int

    @property
    def set_size(self) -> int:
        return len(self.base)


@dataclass(frozen=True)
class StructureReport:
    passes: bool
    violations: tuple[str, ...]
    recomputed: dict


def log_base_m(value: int, m: int) -> float:
    if value <= 0:
        raise ValueError("exponents need a positive count")
    return math.log(value) / math.log(m)


def band_count(m: int) -> int:
    """Pigeonhole divisor: number of dyadic bands for counts in [1, M], padded
    to the ceil(log2 M^2) + 1 form every guarantee is reported against."""
    return int(math.ceil(math.log2(m * m))) + 1


def nontrivial_energy(r: CountVector) -> int:
    """E_4(Delta) - r(0)^2: the energy carried by nonzero differences."""
    return r.energy() - r[0] ** 2


def build_structure(
    delta: GroupSet,
    diff_indices: np.ndarray,
    r: Optional[CountVector] = None,
    *,
    bucket_lo: Optional[int] = None,
) -> AdditiveStructure:
    """Assemble a structure from an explicit difference set.

    The differences must be nonzero and their counts must fit one factor-2
    band; bucket_lo defaults to the dyadic floor of the smallest count.
    """
    if len(delta) < 2:
        raise ValueError("structures need |Delta| >= 2")
    if r is None:
        r = rep_function(delta)
    diff_indices = np.unique(np.asarray(diff_indices, dtype=np.int64))
    if diff_indices.size == 0:
        raise ValueError("a structure needs at least one difference")
    if diff_indices[0] == 0:
        raise ValueError("x = 0 is not admitted into D")
    counts = r.counts[diff_indices]
    lo = int(counts.min())
    hi = int(counts.max())
    if lo < 1:
        raise ValueError("every difference in D must actually occur in Delta - Delta")
    if bucket_lo is None:
        bucket_lo = 1 << int(math.floor(math.log2(lo)))
    if not (bucket_lo <= lo and hi < 2 * bucket_lo):
        raise ValueError(
            f"difference counts [{lo}, {hi}] do not fit the band [{bucket_lo}, {2 * bucket_lo})"
        )
    m = len(delta)
    graph_size = exact_sum(counts)
    graph_energy = exact_power_sum(counts, 2)
    tau = log_base_m(r.energy(), m) - 2.0
    height = 2.0 - log_base_m(graph_size, m)
    return AdditiveStructure(
        base=delta,
        diffs=GroupSet(delta.spec, diff_indices, _sorted_unique=True),
        bucket_lo=int(bucket_lo),
        tau=tau,
        height=height,
        graph_size=graph_size,
        graph_energy=graph_energy,
    )


def bucket_table(delta: GroupSet, r: Optional[CountVector] = None) -> list[dict]:
    """Per-dyadic-band summary of the nonzero differences, zero excluded."""
    if r is None:
        r = rep_function(delta)
    counts = r.counts.copy()
    counts[0] = 0
    support = np.nonzero(counts)[0]
    if support.size == 0:
        return []
    vals = counts[support]
    levels = np.floor(np.log2(vals)).astype(np.int64)
    out = []
    for j in np.unique(levels):
        sel = support[levels == j]
        band = counts[sel]
        out.append(
            {
                "level": int(j),
                "bucket_lo": 1 << int(j),
                "diff_count": int(sel.size),
                "graph_size": exact_sum(band),
                "graph_energy": exact_power_sum(band, 2),
                "indices": sel,
            }
        )
    return out


def find_structure(delta: GroupSet) -> AdditiveStructure:
    """Pigeonhole the nonzero differences into dyadic bands and keep the band
    carrying maximal energy; ties break toward the larger count floor.

    The returned structure always satisfies

        E(G) >= (E_4(Delta) - r(0)^2) / (ceil(log2 M^2) + 1).
    """
    if len(delta) < 2:
        raise ValueError("find_structure needs |Delta| >= 2")
    if not delta.symmetric:
        raise ValueError("find_structure expects a symmetric set")
    r = rep_function(delta)
    table = bucket_table(delta, r)
    if not table:
        raise ValueError("the set has no nonzero differences")
    best = max(table, key=lambda row: (row["graph_energy"], row["bucket_lo"]))
    return build_structure(delta, best["indices"], r, bucket_lo=best["bucket_lo"])


def pigeonhole_guarantee(delta: GroupSet, s: AdditiveStructure, r: Optional[CountVector] = None) -> float:
    """Measured ratio of E(G) to its pigeonhole floor; >= 1 certifies the claim."""
    if r is None:
        r = rep_function(delta)
    floor = nontrivial_energy(r) / band_count(len(delta))
    if floor <= 0:
        return math.inf
    return s.graph_energy / floor


def low_height_threshold(s: AdditiveStructure) -> float:
    """(1 - tau)/2 plus the desk-scale slack 2/log2 M."""
    return (1.0 - s.tau) / 2.0 + 2.0 / math.log2(s.set_size)


def enforce_low_height(
    delta: GroupSet,
    s: AdditiveStructure,
    *,
    work_budget: int = DUAL_WORK_BUDGET,
) -> AdditiveStructure:
    """Drive the height below (1 - tau)/2 + slack via the dual-pair pigeonhole.

    Iterates to a fixed point, so applying it twice never changes anything:
    each pass either returns the input (threshold already met, or the dual
    graph cannot strictly lower the height at this scale) or replaces the
    structure by one of strictly smaller height.
    """
    r = rep_function(delta)
    current = s
    while current.height > low_height_threshold(current):
        candidate = _dual_pigeonhole(delta, current, r, work_budget=work_budget)
        if candidate is None or candidate.height >= current.height - 1e-12:
            return current
        current = candidate
    return current


def _dual_pigeonhole(
    delta: GroupSet,
    s: AdditiveStructure,
    r: CountVector,
    *,
    work_budget: int,
) -> Optional[AdditiveStructure]:
    """One dual step: weight each difference z by the number of witnessed
    pairs (a, c) with a - c = z, a and c sharing a fiber Delta[x], x in D,
    then re-pigeonhole by r(z).  The selected band's weighted mass is a
    lower bound for the energy of the returned structure.
    """
    spec = delta.spec
    member = np.zeros(spec.order, dtype=bool)
    member[delta.indices] = True
    d_idx = s.diffs.indices
    # work is sum r(x)^2 = E(G); thin D deterministically if that is too much
    stride = 1
    if s.graph_energy > work_budget:
        stride = int(math.ceil(s.graph_energy / work_budget))
    mass = np.zeros(spec.order, dtype=np.int64)
    for x in d_idx[::stride].tolist():
        fiber = delta.indices[member[spec.sub_indices(delta.indices, x)]]
        if fiber.size == 0:
            continue
        diffs = pairwise_diff_indices(spec, fiber, fiber)
        mass += np.bincount(diffs, minlength=spec.order)
    mass[0] = 0
    support = np.nonzero(mass)[0]
    if support.size == 0:
        return None
    rvals = r.counts[support]
    levels = np.floor(np.log2(rvals)).astype(np.int64)
    best_band: Optional[np.ndarray] = None
    best_mass = -1
    best_level = -1
    for j in np.unique(levels):
        sel = support[levels == j]
        band_mass = int(mass[sel].sum())
        if band_mass > best_mass or (band_mass == best_mass and j > best_level):
            best_mass = band_mass
            best_level = int(j)
            best_band = sel
    if best_band is None:
        return None
    return build_structure(delta, best_band, r, bucket_lo=1 << best_level)


def validate_structure(delta: GroupSet, s: AdditiveStructure) -> StructureReport:
    """Recompute every stored field of the structure from scratch."""
    violations: list[str] = []
    recomputed: dict = {}
    if s.base != delta:
        violations.append("structure was built over a different base set")
    if len(delta) < 2:
        violations.append("base set too small")
        return StructureReport(False, tuple(violations), recomputed)
    r = rep_function(delta)
    d_idx = s.diffs.indices
    if d_idx.size == 0:
        violations.append("empty difference set")
        return StructureReport(False, tuple(violations), recomputed)
    if 0 in s.diffs:
        violations.append("zero difference admitted into D")
    counts = r.counts[d_idx]
    lo, hi = int(counts.min()), int(counts.max())
    recomputed["count_range"] = (lo, hi)
    if lo < s.bucket_lo or hi >= 2 * s.bucket_lo:
        violations.append(
            f"counts [{lo}, {hi}] breach the band [{s.bucket_lo}, {2 * s.bucket_lo})"
        )
    graph_size = exact_sum(counts)
    graph_energy = exact_power_sum(counts, 2)
    recomputed["graph_size"] = graph_size
    recomputed["graph_energy"] = graph_energy
    if graph_size != s.graph_size:
        violations.append(f"graph size mismatch: stored {s.graph_size}, recomputed {graph_size}")
    if graph_energy != s.graph_energy:
        violations.append(
            f"graph energy mismatch: stored {s.graph_energy}, recomputed {graph_energy}"
        )
    m = len(delta)
    tau = log_base_m(r.energy(), m) - 2.0
    recomputed["tau"] = tau
    if abs(tau - s.tau) > 1e-9:
        violations.append(f"tau mismatch: stored {s.tau}, recomputed {tau}")
    if graph_size > 0:
        height = 2.0 - log_base_m(graph_size, m)
        recomputed["height"] = height
        if abs(height - s.height) > 1e-9:
            violations.append(f"height mismatch: stored {s.height}, recomputed {height}")
        # |G| * M^height = M^2; the tolerance admits nine-decimal exponent
        # rounding in serialized artifacts (amplified by M^2 log M)
        if abs(graph_size * m**s.height - m**2) > 1e-7 * m**2:
            violations.append("height/size consistency broken")
    return StructureReport(not violations, tuple(violations), recomputed)
