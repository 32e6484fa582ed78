"""Top-level drivers: popularity pruning, block extraction, decomposition.

The pipeline realizes the structure theorem constructively:

1. prune elements participating in too many quadruples (once; the
   residuals below inherit the property),
2. extract one block: pigeonhole a structure, push its height down,
   iterate the comity and sideways-comity increments until both
   certificates meet their targets, pick a high-energy (fiber, slice)
   pair, run the asymmetric BSG extraction, and package
   H = symmetrize(K), X = symmetrize(X_bsg), B = (X + H) cap Delta,
3. repeat on Delta minus the block until the coverage target, a Stall,
   or the block limit; then pigeonhole block sizes to a common height.

Every "either/or" lemma shows up as an explicit outcome object; a Stall
carries its diagnostics into the decomposition trace instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bsg import BsgParams, asym_bsg
from .comity import (
    ComityCertificate,
    SidewaysCertificate,
    comity_increment,
    f_sets,
    sideways_certificate,
    sideways_increment,
)
from .energy import asym_energy, energy_profile, popularity_vector, smoothing_exponent
from .groups import GroupSet, symmetrize
from .structure import enforce_low_height, find_structure

SELECTION_BUDGET = 64
BLOCK_MIN_SET = 8


@dataclass(frozen=True)
class Schedule:
    sigma0: float
    nu_star: float
    growth: float
    mu_targets: tuple[float, ...]
    sigmas: tuple[float, ...]
    max_iters: int


@dataclass(frozen=True)
class PruneResult:
    kept: GroupSet
    removed: int
    threshold: float
    e4_before: int
    e4_after: int


@dataclass(frozen=True)
class Block:
    index: int
    h: GroupSet
    x: GroupSet
    b: GroupSet
    alpha: float
    measured: dict


@dataclass(frozen=True)
class BlockResult:
    kind: str  # "block" | "stall"
    block: Optional[Block]
    trace: list
    diagnostics: dict


@dataclass(frozen=True)
class Decomposition:
    blocks: list
    residual: GroupSet
    pruned: GroupSet
    alpha_mode: float
    trace: list
    report: dict


def schedule(sigma0: float, nu_star: float, *, growth: float = 2.0) -> Schedule:
    """Comity-target sequence mu~_j = C / log(1/sigma_j), sigma_{j+1} = C mu~_j.

    sigma saturates quickly at desk scale; targets are capped at 1 (a comity
    target of 1 is vacuous and simply stops tightening).
    """
    if not 0.0 < sigma0 < 1.0:
        raise ValueError("sigma0 must lie in (0, 1)")
    if not 0.0 < nu_star < 1.0:
        raise ValueError("nu_star must lie in (0, 1)")
    max_iters = int(math.ceil(2.0 / nu_star))
    sigmas = [sigma0]
    mus = []
    for _ in range(max_iters):
        sigma = sigmas[-1]
        mu = min(growth / math.log(1.0 / sigma), 1.0) if sigma < 1.0 else 1.0
        mus.append(mu)
        sigmas.append(min(growth * mu, 0.99))
    return Schedule(
        sigma0=sigma0,
        nu_star=nu_star,
        growth=growth,
        mu_targets=tuple(mus),
        sigmas=tuple(sigmas[:-1]),
        max_iters=max_iters,
    )


def prune_popular(delta: GroupSet, c_pop: float = 8.0) -> PruneResult:
    """Remove elements in at least c_pop * E_4 / M quadruples, symmetrically.

    At most 2M / c_pop elements go; the kept set keeps |Delta~| >=
    (1 - 2/c_pop) M and its recomputed energy is reported.
    """
    if not delta.symmetric:
        raise ValueError("prune_popular expects a symmetric set")
    if c_pop <= 2.0:
        raise ValueError("c_pop must exceed 2")
    pop = popularity_vector(delta)
    e4_before = energy_profile(delta)[4]
    threshold = c_pop * e4_before / len(delta)
    heavy = delta.indices[pop.counts[delta.indices] >= threshold]
    heavy_set = GroupSet(delta.spec, heavy).symmetrized()
    kept = delta.difference(heavy_set)
    e4_after = energy_profile(kept)[4] if len(kept) else 0
    return PruneResult(
        kept=kept,
        removed=len(delta) - len(kept),
        threshold=threshold,
        e4_before=e4_before,
        e4_after=e4_after,
    )


def _select_candidate(delta, s, ccert, scert, budget: int):
    """Scan a deterministic slice of the certified (x, b) pairs and keep the
    pair maximizing |F_x| * E(Delta[x], F_{x,b})."""
    spec = delta.spec
    pairs = scert.pairs
    if pairs.shape[0] == 0:
        return None
    stride = max(1, pairs.shape[0] // budget)
    best = None
    for x_idx, b_idx in pairs[::stride][:budget].tolist():
        fs = f_sets(delta, s, ccert, spec.element_at(x_idx), spec.element_at(b_idx))
        fiber = delta.intersect(
            GroupSet(spec, np.sort(spec.add_indices(delta.indices, x_idx)), _sorted_unique=False)
        )
        # fiber = Delta cap (x + Delta)
        if len(fs.f_xa) < 4 or len(fiber) < 4:
            continue
        score = len(fs.f_x) * asym_energy(fiber, fs.f_xa)
        if best is None or score > best[0]:
            best = (score, x_idx, b_idx, fiber, fs.f_xa)
    return best


def extract_block(
    delta: GroupSet,
    nu_star: float = 0.25,
    *,
    max_iters: Optional[int] = None,
    bsg_params: BsgParams = BsgParams(),
    selection_budget: int = SELECTION_BUDGET,
    block_index: int = 1,
) -> BlockResult:
    """Run the full single-block pipeline on a symmetric pruned set."""
    trace: list[dict] = []
    diagnostics: dict = {}
    if len(delta) < BLOCK_MIN_SET:
        return BlockResult("stall", None, trace, {"reason": "set too small"})
    prof = energy_profile(delta)
    sigma_hat = max(smoothing_exponent(delta, e4=prof[4], e8=prof[8]), 0.0)
    sched = schedule(min(max(sigma_hat, 1e-8), 0.99), nu_star)
    iters = max_iters if max_iters is not None else sched.max_iters
    s = enforce_low_height(delta, find_structure(delta))
    ccert: Optional[ComityCertificate] = None
    scert: Optional[SidewaysCertificate] = None
    for j in range(iters):
        mu_target = sched.mu_targets[min(j, len(sched.mu_targets) - 1)]
        ccert = None
        for _ in range(max(3, int(math.ceil(1.0 / mu_target)) + 1)):
            out = comity_increment(delta, s, mu_target, sigma_hat)
            trace.append(
                {
                    "step": j,
                    "phase": "comity",
                    "kind": out.kind,
                    "alpha": s.height,
                    "mu": out.certificate.mu if out.certificate else None,
                    "nu": None,
                    "d_size": len(s.diffs),
                    "graph_energy": s.graph_energy,
                }
            )
            if out.kind == "has_comity":
                ccert = out.certificate
                break
            if out.kind == "new_structure":
                s = out.structure
                continue
            return BlockResult("stall", None, trace, {"reason": "comity stall", **(out.diagnostics or {})})
        if ccert is None:
            return BlockResult("stall", None, trace, {"reason": "comity loop exhausted"})
        scert = sideways_certificate(delta, s, ccert)
        out = sideways_increment(delta, s, ccert, scert, nu_star)
        trace.append(
            {
                "step": j,
                "phase": "sideways",
                "kind": out.kind,
                "alpha": s.height,
                "mu": ccert.mu,
                "nu": scert.nu,
                "d_size": len(s.diffs),
                "graph_energy": s.graph_energy,
            }
        )
        if out.kind == "has_sideways":
            scert = out.certificate
            break
        if out.kind == "new_structure":
            s = out.structure
            scert = None
            continue
        return BlockResult("stall", None, trace, {"reason": "sideways stall", **(out.diagnostics or {})})
    if scert is None or scert.nu > nu_star + 1e-12:
        return BlockResult(
            "stall", None, trace, {"reason": "iteration budget exhausted before sideways comity"}
        )
    chosen = _select_candidate(delta, s, ccert, scert, selection_budget)
    if chosen is None:
        return BlockResult("stall", None, trace, {"reason": "no viable (x, b) candidate"})
    score, x_idx, b_idx, fiber, slice_set = chosen
    diagnostics["selection_score"] = score
    diagnostics["selected_pair"] = (x_idx, b_idx)
    cert = asym_bsg(slice_set, fiber, bsg_params)
    diagnostics["bsg_verdict"] = cert.verdict
    diagnostics["bsg_reason"] = cert.reason
    trace.append(
        {
            "step": "selection",
            "phase": "bsg",
            "kind": cert.verdict,
            "alpha": s.height,
            "mu": ccert.mu,
            "nu": scert.nu,
            "d_size": len(s.diffs),
            "graph_energy": s.graph_energy,
        }
    )
    if cert.verdict == "fail":
        return BlockResult("stall", None, trace, {"reason": f"bsg failed: {cert.reason}", **diagnostics})
    h = symmetrize(cert.k)
    x = symmetrize(cert.x) if len(cert.x) else GroupSet(delta.spec, [0])
    covered = np.zeros(delta.spec.order, dtype=bool)
    for t in x.indices.tolist():
        covered[delta.spec.add_indices(h.indices, t)] = True
    b_block = GroupSet(delta.spec, delta.indices[covered[delta.indices]])
    if len(b_block) == 0:
        return BlockResult("stall", None, trace, {"reason": "empty block", **diagnostics})
    from .energy import rep_function

    h_doubling = int(np.count_nonzero(rep_function(h).counts))
    measured = {
        "h_size": len(h),
        "x_size": len(x),
        "b_size": len(b_block),
        "h_doubling": h_doubling,
        "doubling_ratio": math.log(h_doubling) / math.log(len(h)) - 1.0 if len(h) > 1 else 0.0,
        "bsg_cover_b": cert.cover_b,
        "bsg_cover_c": cert.cover_c,
        "mu": ccert.mu,
        "nu": scert.nu,
        "sigma_hat": sigma_hat,
        "tau": s.tau,
    }
    block = Block(index=block_index, h=h, x=x, b=b_block, alpha=s.height, measured=measured)
    return BlockResult("block", block, trace, diagnostics)


def decompose(
    delta: GroupSet,
    nu_star: float = 0.25,
    coverage_target: float = 0.5,
    *,
    c_pop: float = 8.0,
    max_blocks: Optional[int] = None,
    bsg_params: BsgParams = BsgParams(),
    selection_budget: int = SELECTION_BUDGET,
) -> Decomposition:
    """Prune once, then peel blocks until the target coverage, a stall, or
    the block limit; partial decompositions are valid outputs."""
    if not delta.symmetric:
        raise ValueError("decompose expects a symmetric set")
    pruned = prune_popular(delta, c_pop)
    base = pruned.kept
    residual = base
    blocks: list[Block] = []
    trace: list[dict] = []
    annotations: list[str] = []
    limit = max_blocks if max_blocks is not None else len(base)
    e4_band_floor = pruned.e4_after / 2.0
    while residual_size_ok(residual) and len(blocks) < limit:
        covered = sum(len(b.b) for b in blocks)
        if covered >= coverage_target * len(base):
            break
        result = extract_block(
            residual,
            nu_star,
            bsg_params=bsg_params,
            selection_budget=selection_budget,
            block_index=len(blocks) + 1,
        )
        trace.extend(
            {**row, "block": len(blocks) + 1} for row in result.trace
        )
        if result.kind != "block":
            annotations.append(f"stall at block {len(blocks) + 1}: {result.diagnostics.get('reason')}")
            break
        blocks.append(result.block)
        residual = residual.difference(result.block.b)
        if len(residual) >= 2:
            e4_res = energy_profile(residual)[4]
            if e4_res < e4_band_floor:
                annotations.append(
                    f"hypothesis violation after block {len(blocks)}: residual energy {e4_res} "
                    f"fell below half the pruned energy"
                )
    alpha_mode = _alpha_mode(blocks, len(base))
    report = {
        "set_size": len(delta),
        "pruned_size": len(base),
        "pruned_removed": pruned.removed,
        "coverage": (sum(len(b.b) for b in blocks) / len(base)) if len(base) else 0.0,
        "block_count": len(blocks),
        "annotations": annotations,
        "nu_star": nu_star,
        "coverage_target": coverage_target,
        "c_pop": c_pop,
    }
    return Decomposition(
        blocks=blocks,
        residual=residual,
        pruned=base,
        alpha_mode=alpha_mode,
        trace=trace,
        report=report,
    )


def residual_size_ok(residual: GroupSet) -> bool:
    return len(residual) >= BLOCK_MIN_SET


def _alpha_mode(blocks: list, m: int) -> float:
    """Pigeonhole block sizes into factor-4 bands; the heaviest band's median
    exponent is the common height all retained blocks share."""
    if not blocks or m < 2:
        return 0.0
    sizes = np.asarray([len(b.b) for b in blocks], dtype=np.int64)
    bands = np.floor(np.log2(sizes) / 2.0).astype(np.int64)
    best_band, best_mass = None, -1
    for t in np.unique(bands):
        mass = int(sizes[bands == t].sum())
        if mass > best_mass:
            best_band, best_mass = int(t), mass
    selected = sizes[bands == best_band]
    alphas = 1.0 - np.log(selected.astype(np.float64)) / math.log(m)
    return float(np.median(alphas))
