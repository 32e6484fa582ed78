"""Overlap-uniformity certificates and the two height-lowering increments.

For a structure (G, D) on Delta write Delta[x] = Delta cap (x + Delta) for
the fiber of a difference x.  Two uniformity measurements drive everything:

* comity mu: pigeonhole the pair overlaps |Delta[x] cap Delta[y]| over
  (x, y) in D x D into dyadic bands; the heaviest band at exponent beta
  gives mu = tau + height - beta.  Small mu means typical fibers overlap
  almost as much as their size allows.
* sideways comity nu: the same game for |Delta[x] cap F_{x,b}| over
  (x, b) in D x Delta, where F_x = {y in D : (x, y) in the comity band}
  and F_{x,b} = Delta cap (b + F_x).

When a certificate misses its target, the corresponding increment rebuilds
a denser difference graph (popular differences for comity, popular sums
converted through Delta = -Delta for sideways) and re-pigeonholes; it must
strictly lower the measured height or it reports a Stall with all measured
quantities, never a silent success.

Pair sets can be quadratically large, so certificates carry exact counts
and masses plus a capped, deterministically sampled enumeration; when a
work budget forces subsampling the certificate says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .convolve import fold_with_set, pairwise_diff_indices
from .energy import CountVector, rep_function
from .groups import GroupElement, GroupSet
from .structure import AdditiveStructure, build_structure, log_base_m

PAIR_BUDGET = 1_000_000
ENUM_CAP = 1_000_000
SIDEWAYS_WORK_BUDGET = 50_000_000
INCREMENT_WORK_BUDGET = 50_000_000


@dataclass(frozen=True)
class ComityCertificate:
    base: GroupSet
    diffs: GroupSet
    tau: float
    alpha: float
    beta: float
    mu: float
    band: tuple[int, int]
    pair_count: int
    mass: int
    pairs: np.ndarray  # (n, 2) difference-index pairs, capped enumeration
    total_overlap: int  # sum over all of D x D, exact via the degree identity
    scanned_total: int  # sum over the scanned pairs only
    sampled: bool
    sample_stride: int


@dataclass(frozen=True)
class SidewaysCertificate:
    base: GroupSet
    diffs: GroupSet
    comity_band: tuple[int, int]
    tau: float
    alpha: float
    gamma: float
    nu: float
    band: tuple[int, int]
    q_count: int
    mass: int
    pairs: np.ndarray  # (n, 2) rows (difference index, element index)
    scanned_total: int
    sampled: bool
    sample_stride: int  # combined row stride over D
    f_stride: int  # column stride defining the F_x membership rule


@dataclass(frozen=True)
class IncrementOutcome:
    kind: str  # "has_comity" | "has_sideways" | "new_structure" | "stall"
    certificate: object = None
    structure: Optional[AdditiveStructure] = None
    diagnostics: Optional[dict] = None


@dataclass(frozen=True)
class FiberSets:
    f_x: GroupSet
    f_xa: Optional[GroupSet]
    f_a: Optional[GroupSet]


def overlap(x: GroupElement, y: GroupElement, delta: GroupSet) -> int:
    """|Delta cap (x + Delta) cap (y + Delta)| by indicator intersection."""
    spec = delta.spec
    member = np.zeros(spec.order, dtype=bool)
    member[delta.indices] = True
    ax = member[spec.sub_indices(delta.indices, x.index)]
    ay = member[spec.sub_indices(delta.indices, y.index)]
    return int(np.count_nonzero(ax & ay))


def _membership(delta: GroupSet) -> np.ndarray:
    member = np.zeros(delta.spec.order, dtype=bool)
    member[delta.indices] = True
    return member


def _fiber_positions(delta: GroupSet, member: np.ndarray, x: int) -> np.ndarray:
    """Positions (into delta.indices) of the fiber Delta[x]."""
    return np.nonzero(member[delta.spec.sub_indices(delta.indices, x)])[0]


def _fiber_rows(delta: GroupSet, member: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Boolean matrix, row i the fiber of xs[i] over positions of Delta."""
    spec = delta.spec
    m = len(delta)
    rows = np.empty((xs.size, m), dtype=bool)
    chunk = max(1, (1 << 22) // max(m, 1))
    for start in range(0, xs.size, chunk):
        block = xs[start : start + chunk]
        sub = spec.sub_indices(delta.indices[None, :], block[:, None])
        rows[start : start + block.size] = member[sub]
    return rows


def _gram(rows: np.ndarray) -> np.ndarray:
    """Exact pairwise intersection sizes via chunked float32 matmul."""
    n, m = rows.shape
    out = np.zeros((n, n), dtype=np.int64)
    chunk = max(1, (1 << 24) // max(n, 1))
    for start in range(0, m, chunk):
        block = rows[:, start : start + chunk].astype(np.float32)
        out += (block @ block.T).astype(np.int64)
    return out


def degree_profile(delta: GroupSet, diffs: GroupSet) -> CountVector:
    """deg_D(a) = #{x in D : a in Delta[x]} for a in Delta (zero elsewhere)."""
    spec = delta.spec
    ind_d = np.zeros(spec.order, dtype=np.int64)
    ind_d[diffs.indices] = 1
    conv = fold_with_set(spec, ind_d, delta.indices)
    out = np.zeros(spec.order, dtype=np.int64)
    out[delta.indices] = conv[delta.indices]
    return CountVector(spec, out)


def total_pair_overlap(delta: GroupSet, diffs: GroupSet) -> int:
    """sum_{x,y in D} |Delta[x] cap Delta[y]| = sum_a deg_D(a)^2, exact."""
    return degree_profile(delta, diffs).energy()


def comity_certificate(
    delta: GroupSet,
    s: AdditiveStructure,
    *,
    pair_budget: int = PAIR_BUDGET,
    enum_cap: int = ENUM_CAP,
) -> ComityCertificate:
    """Pigeonhole pair overlaps into dyadic bands and certify the heaviest."""
    spec = delta.spec
    m = len(delta)
    member = _membership(delta)
    d_idx = s.diffs.indices
    stride = 1
    if d_idx.size**2 > pair_budget:
        stride = int(math.ceil(d_idx.size / math.sqrt(pair_budget)))
    xs = d_idx[::stride]
    rows = _fiber_rows(delta, member, xs)
    gram = _gram(rows)
    values = gram.reshape(-1)
    scanned_total = int(values.sum(dtype=np.int64))
    pos = values > 0
    levels = np.full(values.shape, -1, dtype=np.int64)
    levels[pos] = np.floor(np.log2(values[pos])).astype(np.int64)
    best_level, best_mass, best_count = -1, -1, 0
    for j in np.unique(levels[pos]):
        sel = levels == j
        mass = int(values[sel].sum(dtype=np.int64))
        if mass > best_mass or (mass == best_mass and j > best_level):
            best_level, best_mass, best_count = int(j), mass, int(np.count_nonzero(sel))
    if best_level < 0:
        raise ValueError("no positive overlaps; the structure is degenerate")
    sel = levels == best_level
    w = int(values[sel].min())
    flat = np.nonzero(sel)[0]
    enum = flat[:enum_cap]
    pairs = np.stack((xs[enum // xs.size], xs[enum % xs.size]), axis=1)
    beta = log_base_m(w, m)
    mu = s.tau + s.height - beta
    return ComityCertificate(
        base=delta,
        diffs=s.diffs,
        tau=s.tau,
        alpha=s.height,
        beta=beta,
        mu=mu,
        band=(w, 2 * w),
        pair_count=best_count,
        mass=best_mass,
        pairs=pairs,
        total_overlap=total_pair_overlap(delta, s.diffs),
        scanned_total=scanned_total,
        sampled=stride > 1,
        sample_stride=stride,
    )


def verify_comity(delta: GroupSet, cert: ComityCertificate) -> dict:
    """Recompute every enumerated overlap from scratch and re-check the
    certificate arithmetic; returns a report dict with 'passes'."""
    spec = delta.spec
    member = _membership(delta)
    w, two_w = cert.band
    problems: list[str] = []
    recomputed_mass = 0
    for x, y in cert.pairs.tolist():
        ax = member[spec.sub_indices(delta.indices, x)]
        ay = member[spec.sub_indices(delta.indices, y)]
        val = int(np.count_nonzero(ax & ay))
        recomputed_mass += val
        if not (w <= val < two_w):
            problems.append(f"pair ({x}, {y}) overlap {val} outside [{w}, {two_w})")
            break
    if cert.pairs.shape[0] == cert.pair_count and recomputed_mass != cert.mass:
        problems.append(f"mass mismatch: stored {cert.mass}, recomputed {recomputed_mass}")
    # 5e-9 admits nine-decimal rounding of the four serialized fields
    if abs(cert.mu - (cert.tau + cert.alpha - cert.beta)) > 5e-9:
        problems.append("mu is not tau + alpha - beta")
    expected_beta = log_base_m(w, len(delta))
    if abs(cert.beta - expected_beta) > 5e-9:
        problems.append("beta does not match the band floor")
    if total_pair_overlap(delta, cert.diffs) != cert.total_overlap:
        problems.append("total overlap mismatch against the degree identity")
    if not cert.sampled:
        bands = int(math.ceil(math.log2(len(delta)))) + 1
        if cert.mass * bands < cert.scanned_total:
            problems.append("band mass below the pigeonhole floor")
    return {"passes": not problems, "problems": problems, "recomputed_mass": recomputed_mass}


def comity_increment(
    delta: GroupSet,
    s: AdditiveStructure,
    mu_target: float,
    sigma_hat: float,
    *,
    pair_budget: int = PAIR_BUDGET,
) -> IncrementOutcome:
    """Either certify comity <= mu_target or move to a lower-height structure.

    The replacement graph collects every difference whose representation
    count clears the certified band floor (the popular-difference set),
    then re-pigeonholes it; expected height drop is about mu - 2*sigma.
    """
    cert = comity_certificate(delta, s, pair_budget=pair_budget)
    if cert.mu <= mu_target + 1e-12:
        return IncrementOutcome(kind="has_comity", certificate=cert)
    r = rep_function(delta)
    w = cert.band[0]
    counts = r.counts.copy()
    counts[0] = 0
    popular = np.nonzero(counts >= w)[0]
    diagnostics = {
        "mu": cert.mu,
        "mu_target": mu_target,
        "sigma_hat": sigma_hat,
        "band_floor": w,
        "popular_count": int(popular.size),
        "expected_height_drop": cert.mu - 2.0 * sigma_hat,
    }
    if popular.size == 0:
        return IncrementOutcome(kind="stall", certificate=cert, diagnostics=diagnostics)
    vals = counts[popular]
    levels = np.floor(np.log2(vals)).astype(np.int64)
    best_level, best_size = -1, -1
    for j in np.unique(levels):
        size = int(vals[levels == j].sum(dtype=np.int64))
        if size > best_size or (size == best_size and j > best_level):
            best_level, best_size = int(j), size
    band = popular[levels == best_level]
    new_s = build_structure(delta, band, r, bucket_lo=1 << best_level)
    diagnostics["new_height"] = new_s.height
    diagnostics["new_graph_energy"] = new_s.graph_energy
    if new_s.height >= s.height - 1e-12:
        return IncrementOutcome(kind="stall", certificate=cert, diagnostics=diagnostics)
    return IncrementOutcome(
        kind="new_structure", certificate=cert, structure=new_s, diagnostics=diagnostics
    )


def f_sets(
    delta: GroupSet,
    s: AdditiveStructure,
    cert: ComityCertificate,
    x: GroupElement,
    a: Optional[GroupElement] = None,
) -> FiberSets:
    """The comity slice F_x = {y in D : (x, y) in the band}, its translate
    F_{x,a} = Delta cap (a + F_x), and the diagnostic F_a = Delta cap (a + D)."""
    spec = delta.spec
    member = _membership(delta)
    w, two_w = cert.band
    fx_mask = member[spec.sub_indices(delta.indices, x.index)]
    d_idx = s.diffs.indices
    rows = _fiber_rows(delta, member, d_idx)
    ov = rows @ fx_mask.astype(np.int64)
    f_x = GroupSet(spec, d_idx[(ov >= w) & (ov < two_w)])
    f_xa = None
    f_a = None
    if a is not None:
        translated = np.sort(spec.add_indices(f_x.indices, a.index)) if len(f_x) else f_x.indices
        f_xa = delta.intersect(GroupSet(spec, translated, _sorted_unique=True))
        d_translated = np.sort(spec.add_indices(d_idx, a.index))
        f_a = delta.intersect(GroupSet(spec, d_translated, _sorted_unique=True))
    return FiberSets(f_x=f_x, f_xa=f_xa, f_a=f_a)


def sideways_certificate(
    delta: GroupSet,
    s: AdditiveStructure,
    ccert: ComityCertificate,
    *,
    work_budget: int = SIDEWAYS_WORK_BUDGET,
    enum_cap: int = ENUM_CAP,
) -> SidewaysCertificate:
    """Pigeonhole |Delta[x] cap F_{x,b}| over (x, b) in D x Delta.

    Fibers and slices repeat heavily on structured sets, so identical
    (fiber, slice) classes are computed once and weighted by multiplicity.
    """
    spec = delta.spec
    m = len(delta)
    member = _membership(delta)
    d_idx = s.diffs.indices[:: ccert.sample_stride]
    rows = _fiber_rows(delta, member, d_idx)
    gram = _gram(rows)
    w_p, two_w_p = ccert.band
    inband = (gram >= w_p) & (gram < two_w_p)

    # deterministic secondary stride if the slice work is over budget
    fiber_sizes = rows.sum(axis=1, dtype=np.int64)
    slice_sizes = inband.sum(axis=1, dtype=np.int64)
    work = int((np.minimum(fiber_sizes, m) * slice_sizes).sum(dtype=np.int64))
    stride2 = 1
    if work > work_budget:
        stride2 = int(math.ceil(work / work_budget))
    xs = d_idx[::stride2]
    rows = rows[::stride2]
    inband = inband[::stride2]

    classes: dict[bytes, list[int]] = {}
    for i in range(xs.size):
        key = rows[i].tobytes() + inband[i].tobytes()
        classes.setdefault(key, []).append(i)

    level_mass: dict[int, int] = {}
    level_count: dict[int, int] = {}
    level_min: dict[int, int] = {}
    per_class: list[tuple[list[int], np.ndarray]] = []
    scanned_total = 0
    for key, members_of_class in classes.items():
        i0 = members_of_class[0]
        fiber = delta.indices[rows[i0]]
        # slice columns live over the comity-scanned differences d_idx
        f_x = d_idx[inband[i0]]
        if fiber.size == 0 or f_x.size == 0:
            vals = np.zeros(m, dtype=np.int64)
        else:
            diffs = pairwise_diff_indices(spec, fiber, f_x)
            dense = np.bincount(diffs, minlength=spec.order)
            vals = dense[delta.indices]
        per_class.append((members_of_class, vals))
        mult = len(members_of_class)
        scanned_total += mult * int(vals.sum(dtype=np.int64))
        pos = vals > 0
        if not np.any(pos):
            continue
        lv = np.floor(np.log2(vals[pos])).astype(np.int64)
        for j in np.unique(lv):
            selv = vals[pos][lv == j]
            level_mass[int(j)] = level_mass.get(int(j), 0) + mult * int(selv.sum(dtype=np.int64))
            level_count[int(j)] = level_count.get(int(j), 0) + mult * int(selv.size)
            level_min[int(j)] = min(level_min.get(int(j), 1 << 62), int(selv.min()))
    if not level_mass:
        raise ValueError("all slices are empty; the comity band is degenerate")
    best_level = max(level_mass, key=lambda j: (level_mass[j], j))
    w_s = level_min[best_level]
    mass = level_mass[best_level]
    q_count = level_count[best_level]

    pairs_out: list[tuple[int, int]] = []
    lo_band, hi_band = 1 << best_level, 1 << (best_level + 1)
    for members_of_class, vals in per_class:
        sel = np.nonzero((vals >= lo_band) & (vals < hi_band))[0]
        if sel.size == 0:
            continue
        b_idx = delta.indices[sel]
        for i in members_of_class:
            if len(pairs_out) >= enum_cap:
                break
            take = min(b_idx.size, enum_cap - len(pairs_out))
            pairs_out.extend((int(xs[i]), int(b)) for b in b_idx[:take])
    pairs_arr = np.asarray(pairs_out, dtype=np.int64).reshape(-1, 2)

    gamma = log_base_m(w_s, m)
    nu = s.tau + s.height - gamma
    return SidewaysCertificate(
        base=delta,
        diffs=s.diffs,
        comity_band=ccert.band,
        tau=s.tau,
        alpha=s.height,
        gamma=gamma,
        nu=nu,
        band=(w_s, 2 * w_s),
        q_count=q_count,
        mass=mass,
        pairs=pairs_arr,
        scanned_total=scanned_total,
        sampled=ccert.sampled or stride2 > 1,
        sample_stride=ccert.sample_stride * stride2,
        f_stride=ccert.sample_stride,
    )


def verify_sideways(delta: GroupSet, cert: SidewaysCertificate) -> dict:
    """Recompute each enumerated slice overlap from the stored bands."""
    spec = delta.spec
    member = _membership(delta)
    w_p, two_w_p = cert.comity_band
    w_s, two_w_s = cert.band
    problems: list[str] = []
    recomputed_mass = 0
    rows_cache: dict[int, np.ndarray] = {}
    d_idx = cert.diffs.indices[:: cert.f_stride]
    rows = None
    for x, b in cert.pairs.tolist():
        fx = rows_cache.get(x)
        if fx is None:
            if rows is None:
                rows = _fiber_rows(delta, member, d_idx)
            mask_x = member[spec.sub_indices(delta.indices, x)]
            ov = rows @ mask_x.astype(np.int64)
            fx = d_idx[(ov >= w_p) & (ov < two_w_p)]
            rows_cache[x] = fx
        fiber = delta.indices[member[spec.sub_indices(delta.indices, x)]]
        translated = spec.add_indices(fx, b)
        memb2 = np.zeros(spec.order, dtype=bool)
        memb2[translated] = True
        val = int(np.count_nonzero(memb2[fiber]))
        recomputed_mass += val
        if not (w_s <= val < two_w_s):
            problems.append(f"pair ({x}, {b}) slice overlap {val} outside [{w_s}, {two_w_s})")
            break
    if cert.pairs.shape[0] == cert.q_count and recomputed_mass != cert.mass:
        problems.append(f"mass mismatch: stored {cert.mass}, recomputed {recomputed_mass}")
    if abs(cert.nu - (cert.tau + cert.alpha - cert.gamma)) > 5e-9:
        problems.append("nu is not tau + alpha - gamma")
    if 2 * cert.band[0] * cert.q_count < cert.mass:
        problems.append("q_count below mass / (2w)")
    return {"passes": not problems, "problems": problems, "recomputed_mass": recomputed_mass}


def sideways_increment(
    delta: GroupSet,
    s: AdditiveStructure,
    ccert: ComityCertificate,
    scert: SidewaysCertificate,
    nu_target: float,
    *,
    work_budget: int = INCREMENT_WORK_BUDGET,
) -> IncrementOutcome:
    """Either certify sideways comity <= nu_target or lower the height.

    The replacement graph pairs each b with the fiber elements a whose sum
    a + b is popular past the explicit threshold M^(gamma - mu) / 2; sums
    convert to differences because Delta is symmetric.
    """
    if scert.nu <= nu_target + 1e-12:
        return IncrementOutcome(kind="has_sideways", certificate=scert)
    spec = delta.spec
    m = len(delta)
    member = _membership(delta)
    r = rep_function(delta)
    threshold = 0.5 * m ** (scert.gamma - ccert.mu)
    diagnostics = {
        "nu": scert.nu,
        "nu_target": nu_target,
        "mu": ccert.mu,
        "gamma": scert.gamma,
        "sum_threshold": threshold,
    }
    if scert.pairs.size == 0:
        return IncrementOutcome(kind="stall", certificate=scert, diagnostics=diagnostics)

    by_b: dict[int, list[int]] = {}
    for x, b in scert.pairs.tolist():
        by_b.setdefault(b, []).append(x)

    popular_sum = r.counts >= threshold  # r doubles as the sum count: Delta = -Delta
    mass = np.zeros(spec.order, dtype=np.int64)
    spent = 0
    fiber_cache: dict[int, np.ndarray] = {}
    for b, xs in by_b.items():
        union_mask = np.zeros(len(delta), dtype=bool)
        for x in xs:
            fm = fiber_cache.get(x)
            if fm is None:
                fm = member[spec.sub_indices(delta.indices, x)]
                fiber_cache[x] = fm
            union_mask |= fm
        candidates = delta.indices[union_mask]
        if candidates.size == 0:
            continue
        sums = spec.add_indices(candidates, b)
        keep = sums[popular_sum[sums]]
        spent += int(candidates.size)
        if keep.size:
            mass += np.bincount(keep, minlength=spec.order)
        if spent > work_budget:
            diagnostics["work_truncated_at"] = spent
            break
    mass[0] = 0
    support = np.nonzero(mass)[0]
    diagnostics["realized_sums"] = int(support.size)
    if support.size == 0:
        return IncrementOutcome(kind="stall", certificate=scert, diagnostics=diagnostics)
    rvals = r.counts[support]
    levels = np.floor(np.log2(rvals)).astype(np.int64)
    best_level, best_pairs = -1, -1
    for j in np.unique(levels):
        pair_mass = int(mass[support[levels == j]].sum(dtype=np.int64))
        if pair_mass > best_pairs or (pair_mass == best_pairs and j > best_level):
            best_level, best_pairs = int(j), pair_mass
    band = support[levels == best_level]
    new_s = build_structure(delta, band, r, bucket_lo=1 << best_level)
    diagnostics["new_height"] = new_s.height
    diagnostics["new_graph_energy"] = new_s.graph_energy
    if new_s.height >= s.height - 1e-12:
        return IncrementOutcome(kind="stall", certificate=scert, diagnostics=diagnostics)
    return IncrementOutcome(
        kind="new_structure", certificate=scert, structure=new_s, diagnostics=diagnostics
    )
