"""JSON artifact schemas and the universal re-verification entry point.

Every certificate-producing command emits an artifact that embeds enough
raw data (the sets themselves plus the banded enumeration) for `check` to
re-verify it from scratch without rerunning the producer.  Emission is
byte-deterministic: field order is fixed by construction, floats are
rounded to nine decimals, and count-like integers are decimal strings so
consumers never lose precision past 2^53.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .bsg import BsgCertificate, verify_bsg
from .comity import (
    ComityCertificate,
    SidewaysCertificate,
    verify_comity,
    verify_sideways,
)
from .energy import holder_check
from .groups import GroupSet, format_group, parse_group
from .structure import AdditiveStructure, validate_structure

PAIR_EMIT_CAP = 10_000


def _canonize(obj):
    if isinstance(obj, dict):
        return {k: _canonize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonize(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        obj = int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return str(obj) if abs(obj) >= 1 << 53 else obj
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return float(f"{obj:.9f}")
    raise TypeError(f"cannot canonize {type(obj)!r} for JSON output")


def canonical_json(obj) -> str:
    return json.dumps(_canonize(obj), indent=2, separators=(",", ": ")) + "\n"


def set_payload(a: GroupSet) -> dict:
    return {
        "group": format_group(a.spec),
        "elements": [[int(c) for c in row] for row in a.coords_array()],
    }


def set_from_payload(payload: dict) -> GroupSet:
    spec = parse_group(payload["group"])
    return GroupSet.from_coords(spec, payload["elements"])


def structure_payload(delta: GroupSet, s: AdditiveStructure) -> dict:
    return {
        "kind": "structure",
        "group": format_group(delta.spec),
        "base": set_payload(delta),
        "diffs": set_payload(s.diffs),
        "bucket_lo": s.bucket_lo,
        "tau": s.tau,
        "alpha": s.height,
        "graph_size": str(s.graph_size),
        "graph_energy": str(s.graph_energy),
    }


def structure_from_payload(payload: dict):
    from .structure import AdditiveStructure

    delta = set_from_payload(payload["base"])
    diffs = set_from_payload(payload["diffs"])
    s = AdditiveStructure(
        base=delta,
        diffs=diffs,
        bucket_lo=int(payload["bucket_lo"]),
        tau=float(payload["tau"]),
        height=float(payload["alpha"]),
        graph_size=int(payload["graph_size"]),
        graph_energy=int(payload["graph_energy"]),
    )
    return delta, s


def comity_payload(cert: ComityCertificate, *, emit_cap: int = PAIR_EMIT_CAP) -> dict:
    pairs = cert.pairs[:emit_cap]
    return {
        "kind": "comity_certificate",
        "group": format_group(cert.base.spec),
        "base": set_payload(cert.base),
        "diffs": set_payload(cert.diffs),
        "tau": cert.tau,
        "alpha": cert.alpha,
        "beta": cert.beta,
        "mu": cert.mu,
        "band": [cert.band[0], cert.band[1]],
        "pair_count": str(cert.pair_count),
        "mass": str(cert.mass),
        "total_overlap": str(cert.total_overlap),
        "scanned_total": str(cert.scanned_total),
        "sampled": cert.sampled,
        "sample_stride": cert.sample_stride,
        "pairs": [[int(x), int(y)] for x, y in pairs.tolist()],
        "pairs_emitted": int(pairs.shape[0]),
    }


def comity_from_payload(payload: dict):
    base = set_from_payload(payload["base"])
    diffs = set_from_payload(payload["diffs"])
    pairs = np.asarray(payload["pairs"], dtype=np.int64).reshape(-1, 2)
    cert = ComityCertificate(
        base=base,
        diffs=diffs,
        tau=float(payload["tau"]),
        alpha=float(payload["alpha"]),
        beta=float(payload["beta"]),
        mu=float(payload["mu"]),
        band=(int(payload["band"][0]), int(payload["band"][1])),
        pair_count=int(payload["pair_count"]),
        mass=int(payload["mass"]),
        pairs=pairs,
        total_overlap=int(payload["total_overlap"]),
        scanned_total=int(payload["scanned_total"]),
        sampled=bool(payload["sampled"]),
        sample_stride=int(payload["sample_stride"]),
    )
    return base, cert


def sideways_payload(cert: SidewaysCertificate, *, emit_cap: int = PAIR_EMIT_CAP) -> dict:
    pairs = cert.pairs[:emit_cap]
    return {
        "kind": "sideways_certificate",
        "group": format_group(cert.base.spec),
        "base": set_payload(cert.base),
        "diffs": set_payload(cert.diffs),
        "comity_band": [cert.comity_band[0], cert.comity_band[1]],
        "tau": cert.tau,
        "alpha": cert.alpha,
        "gamma": cert.gamma,
        "nu": cert.nu,
        "band": [cert.band[0], cert.band[1]],
        "q_count": str(cert.q_count),
        "mass": str(cert.mass),
        "scanned_total": str(cert.scanned_total),
        "sampled": cert.sampled,
        "sample_stride": cert.sample_stride,
        "f_stride": cert.f_stride,
        "pairs": [[int(x), int(b)] for x, b in pairs.tolist()],
        "pairs_emitted": int(pairs.shape[0]),
    }


def sideways_from_payload(payload: dict):
    base = set_from_payload(payload["base"])
    diffs = set_from_payload(payload["diffs"])
    pairs = np.asarray(payload["pairs"], dtype=np.int64).reshape(-1, 2)
    cert = SidewaysCertificate(
        base=base,
        diffs=diffs,
        comity_band=(int(payload["comity_band"][0]), int(payload["comity_band"][1])),
        tau=float(payload["tau"]),
        alpha=float(payload["alpha"]),
        gamma=float(payload["gamma"]),
        nu=float(payload["nu"]),
        band=(int(payload["band"][0]), int(payload["band"][1])),
        q_count=int(payload["q_count"]),
        mass=int(payload["mass"]),
        pairs=pairs,
        scanned_total=int(payload["scanned_total"]),
        sampled=bool(payload["sampled"]),
        sample_stride=int(payload["sample_stride"]),
        f_stride=int(payload["f_stride"]),
    )
    return base, cert


def bsg_payload(cert: BsgCertificate) -> dict:
    return {
        "kind": "bsg_certificate",
        "group": format_group(cert.b.spec),
        "B": set_payload(cert.b),
        "C": set_payload(cert.c),
        "K": set_payload(cert.k),
        "X": set_payload(cert.x),
        "x0": None if cert.x0 is None else int(cert.x0),
        "quad_count": str(cert.quad_count),
        "eta_hat": cert.eta_hat,
        "cover_B": str(cert.cover_b),
        "cover_C": str(cert.cover_c),
        "doubling_size": str(cert.doubling_size),
        "doubling_ratio": cert.doubling_ratio,
        "verdict": cert.verdict,
        "reason": cert.reason,
        "closure_converged": cert.closure_converged,
        "scan_truncated": cert.scan_truncated,
    }


def bsg_from_payload(payload: dict) -> BsgCertificate:
    from .bsg import BsgParams

    def _f(x):
        if x == "inf":
            return math.inf
        if x == "-inf":
            return -math.inf
        if x == "nan":
            return math.nan
        return float(x)

    return BsgCertificate(
        b=set_from_payload(payload["B"]),
        c=set_from_payload(payload["C"]),
        k=set_from_payload(payload["K"]),
        x=set_from_payload(payload["X"]),
        x0=None if payload["x0"] is None else int(payload["x0"]),
        quad_count=int(payload["quad_count"]),
        eta_hat=_f(payload["eta_hat"]),
        cover_b=int(payload["cover_B"]),
        cover_c=int(payload["cover_C"]),
        doubling_size=int(payload["doubling_size"]),
        doubling_ratio=_f(payload["doubling_ratio"]),
        verdict=payload["verdict"],
        reason=payload["reason"],
        closure_converged=bool(payload["closure_converged"]),
        scan_truncated=bool(payload.get("scan_truncated", False)),
        params=BsgParams(),
    )


def decomposition_payload(dec) -> dict:
    return {
        "kind": "decomposition",
        "group": format_group(dec.pruned.spec),
        "alpha_mode": dec.alpha_mode,
        "pruned": set_payload(dec.pruned),
        "residual": set_payload(dec.residual),
        "blocks": [
            {
                "index": blk.index,
                "alpha": blk.alpha,
                "H": set_payload(blk.h),
                "X": set_payload(blk.x),
                "B": set_payload(blk.b),
                "measured": {k: _measured_value(v) for k, v in blk.measured.items()},
            }
            for blk in dec.blocks
        ],
        "report": {k: _measured_value(v) for k, v in dec.report.items()},
    }


def _measured_value(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return v


def check_artifact(path) -> dict:
    """Re-verify any artifact file; returns {kind, passes, problems}."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = payload.get("kind")
    if kind is None and "elements" in payload:
        kind = "set"
    if kind == "set":
        a = set_from_payload(payload)
        report = holder_check(a) if len(a) else None
        problems = [] if report is None or report.passes else ["moment sandwich violated"]
        return {"kind": "set", "passes": not problems, "problems": problems}
    if kind == "structure":
        delta, s = structure_from_payload(payload)
        rep = validate_structure(delta, s)
        return {"kind": kind, "passes": rep.passes, "problems": list(rep.violations)}
    if kind == "comity_certificate":
        base, cert = comity_from_payload(payload)
        rep = verify_comity(base, cert)
        return {"kind": kind, "passes": rep["passes"], "problems": rep["problems"]}
    if kind == "sideways_certificate":
        base, cert = sideways_from_payload(payload)
        rep = verify_sideways(base, cert)
        return {"kind": kind, "passes": rep["passes"], "problems": rep["problems"]}
    if kind == "bsg_certificate":
        cert = bsg_from_payload(payload)
        rep = verify_bsg(cert)
        return {"kind": kind, "passes": rep["passes"], "problems": rep["problems"]}
    if kind == "decomposition":
        return _check_decomposition(payload)
    return {"kind": str(kind), "passes": False, "problems": [f"unknown artifact kind {kind!r}"]}


def _check_decomposition(payload: dict) -> dict:
    from .energy import rep_function

    problems: list[str] = []
    pruned = set_from_payload(payload["pruned"])
    residual = set_from_payload(payload["residual"])
    spec = pruned.spec
    seen: Optional[GroupSet] = None
    total = 0
    for blk in payload["blocks"]:
        h = set_from_payload(blk["H"])
        x = set_from_payload(blk["X"])
        b = set_from_payload(blk["B"])
        if not h.symmetric:
            problems.append(f"block {blk['index']}: H is not symmetric")
        if not x.symmetric:
            problems.append(f"block {blk['index']}: X is not symmetric")
        covered = np.zeros(spec.order, dtype=bool)
        for t in x.indices.tolist():
            covered[spec.add_indices(h.indices, t)] = True
        if not bool(np.all(covered[b.indices])):
            problems.append(f"block {blk['index']}: B not contained in X + H")
        measured = blk["measured"]
        if int(measured["h_size"]) != len(h) or int(measured["b_size"]) != len(b):
            problems.append(f"block {blk['index']}: stored sizes disagree with the sets")
        doubling = int(np.count_nonzero(rep_function(h).counts))
        if int(measured["h_doubling"]) != doubling:
            problems.append(f"block {blk['index']}: stored |H-H| disagrees ({doubling})")
        if seen is None:
            seen = b
        else:
            if len(seen.intersect(b)) != 0:
                problems.append(f"block {blk['index']}: overlaps an earlier block")
            seen = seen.union(b)
        total += len(b)
    if total + len(residual) != len(pruned):
        problems.append("coverage accounting broken: sum |B_j| + |residual| != |pruned|")
    return {"kind": "decomposition", "passes": not problems, "problems": problems}
