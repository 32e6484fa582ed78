"""Constructive asymmetric Balog-Szemeredi-Gowers with verified certificates.

Given B, C with many additive quadruples b1 + c1 = b2 + c2, produce

    K  - an almost additively closed set (small doubling),
    X  - few translates of K covering most of B,
    x0 - one translate with |C cap (x0 + K)| large,

and measure every conclusion directly on the returned sets.  The pipeline
is popular-sums -> popular-differences -> iterative closure -> greedy
cover; the CERTIFICATE is the contract: downstream consumers read the
measured numbers, the Strong/Weak/Fail verdict is a convenience summary
against explicit finite-scale thresholds.  Mathematical failure (random
inputs, no structure) is reported through the verdict, never an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .convolve import exact_power_sum, fold_with_set, pairwise_diff_indices
from .energy import rep_function, sum_quadruples
from .errors import GroupMismatchError
from .groups import GroupSet, require_dense


@dataclass(frozen=True)
class BsgParams:
    closure_delta: float = 0.1
    closure_rounds: int = 8
    cover_budget_factor: float = 4.0
    cover_min_gain_factor: float = 0.25  # stop when gain < factor * |C|
    strong_cover_exponent: float = 0.9
    strong_doubling_ratio: float = 0.2
    strong_translate_exponent: float = 0.2
    codegree_work_budget: int = 400_000_000


@dataclass(frozen=True)
class QuadReport:
    count: int
    eta_hat: float


@dataclass(frozen=True)
class BsgCertificate:
    b: GroupSet
    c: GroupSet
    k: GroupSet
    x: GroupSet
    x0: Optional[int]
    quad_count: int
    eta_hat: float
    cover_b: int
    cover_c: int
    doubling_size: int
    doubling_ratio: float
    verdict: str  # "strong" | "weak" | "fail"
    reason: str
    closure_converged: bool
    scan_truncated: bool
    params: BsgParams


def quad_count(b: GroupSet, c: GroupSet) -> QuadReport:
    """Exact quadruple count with its hypothesis exponent.

    eta^ solves count = |B|^(1-eta) |C|^2; small eta^ means the hypothesis
    of the extraction lemma is strongly satisfied.
    """
    if b.spec != c.spec:
        raise GroupMismatchError("quad_count needs sets in the same group")
    count = sum_quadruples(b, c)
    if len(b) < 2 or len(c) < 1 or count == 0:
        return QuadReport(count=count, eta_hat=math.inf)
    eta = (2 * math.log(len(c)) + math.log(len(b)) - math.log(count)) / math.log(len(b))
    return QuadReport(count=count, eta_hat=eta)


def _popular_sums(b: GroupSet, c: GroupSet) -> np.ndarray:
    """Dyadic band of sum counts carrying maximal quadruple mass."""
    spec = b.spec
    conv = fold_with_set(spec, b.indicator(), c.indices)
    support = np.nonzero(conv)[0]
    vals = conv[support]
    levels = np.floor(np.log2(vals)).astype(np.int64)
    best_level, best_mass = -1, -1
    for j in np.unique(levels):
        mass = exact_power_sum(vals[levels == j], 2)
        if mass > best_mass or (mass == best_mass and j > best_level):
            best_level, best_mass = int(j), mass
    return support[levels == best_level]


def _popular_differences(
    b: GroupSet, c: GroupSet, sums: np.ndarray, work_budget: int
) -> tuple[GroupSet, bool]:
    """Differences of C popular among pairs sharing a popular sum.

    codeg(d) = #{(b0, c1, c2) : b0+c1 and b0+c2 popular sums, c1 - c2 = d};
    keep d with codeg above half the average over all |C|^2 pairs.
    """
    spec = b.spec
    in_s = np.zeros(spec.order, dtype=bool)
    in_s[sums] = True
    codeg = np.zeros(spec.order, dtype=np.int64)
    spent = 0
    truncated = False
    for b0 in b.indices.tolist():
        neigh = c.indices[in_s[spec.add_indices(c.indices, b0)]]
        if neigh.size == 0:
            continue
        spent += int(neigh.size) ** 2
        if spent > work_budget:
            truncated = True
            break
        codeg += np.bincount(
            pairwise_diff_indices(spec, neigh, neigh), minlength=spec.order
        )
    total = int(codeg.sum(dtype=np.int64))
    # popular means: above half the per-pair average AND at least twice the
    # uniform all-of-Z mean, so unstructured inputs produce nothing at all
    threshold = max(1.0, total / (2.0 * len(c) ** 2), 2.0 * total / spec.order)
    return GroupSet(spec, np.nonzero(codeg >= threshold)[0]), truncated


def _closure(k0: GroupSet, params: BsgParams) -> tuple[GroupSet, bool]:
    """Refine to the popular half of K - K until the doubling ratio settles.

    The first refinement is unconditional: a dense unstructured K can show a
    small doubling ratio merely because K - K saturates the group, and one
    popularity pass collapses exactly those.
    """
    k = k0
    converged = False
    for round_no in range(params.closure_rounds):
        if len(k) < 2:
            break
        r = rep_function(k)
        doubling = int(np.count_nonzero(r.counts))
        ratio = math.log(doubling) / math.log(len(k)) - 1.0
        popular = np.nonzero(r.counts >= len(k) / 2.0)[0]
        nxt = GroupSet(k.spec, popular)
        if round_no > 0 and ratio <= params.closure_delta:
            converged = True
            break
        if len(nxt) < 2:
            # no popular core: report the collapse instead of the dense shell
            return nxt, False
        if nxt == k:
            converged = ratio <= params.closure_delta
            break
        k = nxt
    return k, converged


def _greedy_cover(
    b: GroupSet, c: GroupSet, k: GroupSet, params: BsgParams
) -> tuple[GroupSet, int]:
    """Translates of K covering B greedily; stops at the gain floor or budget."""
    spec = b.spec
    residual = b.indicator()
    chosen: list[int] = []
    budget = max(1, int(math.ceil(params.cover_budget_factor * len(b) / max(len(c), 1))))
    min_gain = max(1.0, params.cover_min_gain_factor * len(c))
    neg_k = spec.neg_indices(k.indices)
    covered = 0
    while len(chosen) < budget:
        gains = fold_with_set(spec, residual, neg_k)
        x = int(np.argmax(gains))
        gain = int(gains[x])
        if gain < min_gain:
            break
        chosen.append(x)
        hit = spec.add_indices(k.indices, x)
        covered += int(residual[hit].sum(dtype=np.int64))
        residual[hit] = 0
    return GroupSet(spec, np.asarray(chosen, dtype=np.int64)), covered


def asym_bsg(b: GroupSet, c: GroupSet, params: BsgParams = BsgParams()) -> BsgCertificate:
    """Run the extraction pipeline and measure all four conclusions."""
    if b.spec != c.spec:
        raise GroupMismatchError("asym_bsg needs sets in the same group")
    require_dense(b.spec, "asym_bsg")
    quad = quad_count(b, c)
    if len(c) < 4 or len(b) < 4:
        return _fail(b, c, quad, params, "degenerate input: need |B|, |C| >= 4")
    sums = _popular_sums(b, c)
    k0, truncated = _popular_differences(b, c, sums, params.codegree_work_budget)
    if len(k0) == 0:
        return _fail(b, c, quad, params, "no popular differences above threshold")
    k, converged = _closure(k0, params)
    if len(k) < 2:
        return _fail(b, c, quad, params, "closure collapsed to a trivial set")
    x, cover_b = _greedy_cover(b, c, k, params)
    spec = b.spec
    gains_c = fold_with_set(spec, c.indicator(), spec.neg_indices(k.indices))
    x0 = int(np.argmax(gains_c))
    cover_c = int(gains_c[x0])
    r_k = rep_function(k)
    doubling_size = int(np.count_nonzero(r_k.counts))
    doubling_ratio = math.log(doubling_size) / math.log(len(k)) - 1.0 if len(k) > 1 else 0.0
    verdict, reason = _grade(b, c, k, x, cover_b, cover_c, doubling_ratio, params)
    if truncated:
        reason += "; codegree scan truncated by budget"
    return BsgCertificate(
        b=b,
        c=c,
        k=k,
        x=x,
        x0=x0,
        quad_count=quad.count,
        eta_hat=quad.eta_hat,
        cover_b=cover_b,
        cover_c=cover_c,
        doubling_size=doubling_size,
        doubling_ratio=doubling_ratio,
        verdict=verdict,
        reason=reason,
        closure_converged=converged,
        scan_truncated=truncated,
        params=params,
    )


def _grade(b, c, k, x, cover_b, cover_c, doubling_ratio, params) -> tuple[str, str]:
    failures = []
    if cover_b < len(b) ** params.strong_cover_exponent:
        failures.append(f"cover_B {cover_b} < |B|^{params.strong_cover_exponent}")
    if doubling_ratio > params.strong_doubling_ratio:
        failures.append(f"doubling ratio {doubling_ratio:.3f} > {params.strong_doubling_ratio}")
    if cover_c < len(c) ** params.strong_cover_exponent:
        failures.append(f"cover_C {cover_c} < |C|^{params.strong_cover_exponent}")
    x_cap = len(b) ** params.strong_translate_exponent * len(b) / max(len(c), 1)
    if len(x) > x_cap:
        failures.append(f"|X| {len(x)} > {x_cap:.1f}")
    if not failures:
        return "strong", "all four conclusions hold at the configured thresholds"
    return "weak", "; ".join(failures)


def _fail(b, c, quad, params, reason) -> BsgCertificate:
    empty = GroupSet.empty(b.spec)
    return BsgCertificate(
        b=b,
        c=c,
        k=empty,
        x=empty,
        x0=None,
        quad_count=quad.count,
        eta_hat=quad.eta_hat,
        cover_b=0,
        cover_c=0,
        doubling_size=0,
        doubling_ratio=math.inf,
        verdict="fail",
        reason=reason,
        closure_converged=False,
        scan_truncated=False,
        params=params,
    )


def verify_bsg(cert: BsgCertificate) -> dict:
    """Recompute every measured field of the certificate from its raw sets."""
    problems: list[str] = []
    if cert.verdict == "fail":
        return {"passes": True, "problems": [], "note": "fail verdicts carry no claims"}
    spec = cert.b.spec
    quad = quad_count(cert.b, cert.c)
    if quad.count != cert.quad_count:
        problems.append("quadruple count mismatch")
    covered = np.zeros(spec.order, dtype=bool)
    for x in cert.x.indices.tolist():
        covered[spec.add_indices(cert.k.indices, x)] = True
    cover_b = int(np.count_nonzero(covered[cert.b.indices]))
    if cover_b != cert.cover_b:
        problems.append(f"cover_B mismatch: stored {cert.cover_b}, recomputed {cover_b}")
    r_k = rep_function(cert.k)
    doubling = int(np.count_nonzero(r_k.counts))
    if doubling != cert.doubling_size:
        problems.append(f"|K-K| mismatch: stored {cert.doubling_size}, recomputed {doubling}")
    if cert.x0 is not None:
        in_t = np.zeros(spec.order, dtype=bool)
        in_t[spec.add_indices(cert.k.indices, cert.x0)] = True
        cover_c = int(np.count_nonzero(in_t[cert.c.indices]))
        if cover_c != cert.cover_c:
            problems.append(f"cover_C mismatch: stored {cert.cover_c}, recomputed {cover_c}")
    return {"passes": not problems, "problems": problems}
