"""Command-line front end.

Subcommands: gen, energy, spectrum, structure, comity, sideways, bsg,
decompose, check, bench.  Machine output (--json) is byte-deterministic
under a fixed config and seed: fixed field order, nine-decimal floats,
big counts as decimal strings, and no wall-clock values unless --timing
is passed explicitly.  Exit codes: 0 success, 1 usage error, 2 validation
or re-verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import artifacts
from .bsg import asym_bsg
from .comity import comity_certificate, sideways_certificate, verify_comity, verify_sideways
from .decompose import decompose
from .energy import (
    energy,
    holder_check,
    smoothing_exponent,
    spectrum,
)
from .errors import BudgetExceededError, DenseCapError, InfeasibleModelError
from .groups import GroupSet, format_group, load_set_with_report, parse_group, save_set
from .models import ModelSpec, gen as run_gen
from .parallel import ordered_map
from .structure import enforce_low_height, find_structure, pigeonhole_guarantee


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="nonsmooth", description="exact additive-energy toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable stdout")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--timing", action="store_true", help="include wall-clock times in output")

    g = sub.add_parser("gen", help="generate a model set")
    g.add_argument("--model", required=True)
    g.add_argument("--group", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--subgroup-size", type=int)
    g.add_argument("--size", type=int, help="set size (subgroup-random, uniform)")
    g.add_argument("--count", type=int, help="number of cosets or subgroups")
    g.add_argument("--max-overlap", type=int)
    g.add_argument("-o", "--out", help="set file to write")
    common(g)

    e = sub.add_parser("energy", help="additive energy of a set")
    e.add_argument("--set", dest="set_path", required=True)
    e.add_argument("--order", type=int, default=4, choices=(2, 4, 6, 8))
    e.add_argument("--method", default="exact", choices=("exact", "brute", "spectral"))
    common(e)

    sp_ = sub.add_parser("spectrum", help="squared Fourier coefficients summary")
    sp_.add_argument("--set", dest="set_path", required=True)
    common(sp_)

    st = sub.add_parser("structure", help="dyadic difference structure")
    st.add_argument("--set", dest="set_path", required=True)
    st.add_argument("-o", "--out", help="structure artifact to write")
    common(st)

    cm = sub.add_parser("comity", help="pair-overlap certificate")
    cm.add_argument("--set", dest="set_path", required=True)
    cm.add_argument("-o", "--out", help="certificate artifact to write")
    common(cm)

    sw = sub.add_parser("sideways", help="slice-overlap certificate")
    sw.add_argument("--set", dest="set_path", required=True)
    sw.add_argument("-o", "--out", help="certificate artifact to write")
    common(sw)

    bs = sub.add_parser("bsg", help="asymmetric extraction certificate")
    bs.add_argument("--B", dest="b_path", required=True)
    bs.add_argument("--C", dest="c_path", required=True)
    bs.add_argument("-o", "--out", help="certificate artifact to write")
    common(bs)

    dc = sub.add_parser("decompose", help="block decomposition")
    dc.add_argument("--set", dest="set_path", required=True)
    dc.add_argument("--nustar", type=float, default=0.25)
    dc.add_argument("--coverage", type=float, default=0.5)
    dc.add_argument("--cpop", type=float, default=8.0)
    dc.add_argument("-o", "--out", help="output directory for decomposition.json/trace.csv/summary.json")
    common(dc)

    ck = sub.add_parser("check", help="re-verify a set or artifact file")
    ck.add_argument("--set", dest="set_path", help="set file: invariants plus the moment sandwich")
    ck.add_argument("--file", dest="file_path", help="artifact file: full re-verification")
    common(ck)

    bn = sub.add_parser("bench", help="timing and cross-backend digests")
    bn.add_argument("--group", default="Z2^16")
    bn.add_argument("--set-size", type=int, default=1024)
    bn.add_argument("--seed", type=int, default=0)
    bn.add_argument("--orders", default="4,8")
    bn.add_argument("--methods", default="exact,spectral,brute")
    bn.add_argument("--tuple-budget", type=int, default=10**9)
    bn.add_argument("-o", "--out", help="CSV file to write")
    common(bn)

    return p


def _echo(args, **params) -> dict:
    # threads deliberately omitted: results are exact-integer reductions, so
    # the emitted bytes must not depend on the worker count
    cfg = {"command": args.command}
    cfg.update(params)
    return cfg


def _emit(args, report: dict, human: str) -> None:
    if args.json:
        sys.stdout.write(artifacts.canonical_json(report))
    else:
        sys.stdout.write(human + "\n")


def _load(path) -> GroupSet:
    a, dup = load_set_with_report(path)
    if dup:
        sys.stderr.write(f"warning: {path}: dropped {dup} duplicate element(s)\n")
    return a


def _ms(t0: float, args) -> object:
    return int((time.perf_counter() - t0) * 1000) if args.timing else None


def _cmd_gen(args) -> int:
    ms = ModelSpec(
        model=args.model.replace("-", "_"),
        group=parse_group(args.group),
        seed=args.seed,
        subgroup_size=args.subgroup_size,
        set_size=args.size,
        count=args.count,
        max_overlap=args.max_overlap,
    )
    out = run_gen(ms)
    if args.out:
        save_set(out.set, args.out)
    report = {
        "config": _echo(
            args,
            model=ms.model,
            group=format_group(ms.group),
            seed=ms.seed,
            subgroup_size=ms.subgroup_size,
            size=ms.set_size,
            count=ms.count,
            max_overlap=ms.max_overlap,
        ),
        "size": len(out.set),
        "symmetric": out.set.symmetric,
        "report": out.report,
        "out": args.out,
    }
    _emit(args, report, f"generated {len(out.set)} elements ({args.model}) -> {args.out or 'stdout'}")
    if not args.out and not args.json:
        sys.stdout.write(artifacts.canonical_json(artifacts.set_payload(out.set)))
    return 0


def _cmd_energy(args) -> int:
    a = _load(args.set_path)
    t0 = time.perf_counter()
    try:
        result = energy(a, args.order, args.method)
    except BudgetExceededError as exc:
        sys.stderr.write(f"refused: {exc}\n")
        return 2
    if args.method == "spectral":
        value, residual = result.value, result.residual
        value_str = str(result.rounded) if result.rounded is not None else f"{value:.6e}"
    else:
        value_str, residual = str(result), None
    report = {
        "config": _echo(args, set=args.set_path, order=args.order, method=args.method),
        "order": args.order,
        "value": value_str,
        "method": args.method,
        "runtime_ms": _ms(t0, args),
        "residual": residual,
    }
    _emit(args, report, f"E_{args.order} = {value_str} ({args.method})")
    return 0


def _cmd_spectrum(args) -> int:
    a = _load(args.set_path)
    t0 = time.perf_counter()
    table = spectrum(a)
    report = {
        "config": _echo(args, set=args.set_path),
        "set_size": len(a),
        "group_order": a.spec.order,
        "plancherel_residual": table.plancherel_residual(),
        "max_value": float(table.values.max()),
        "dc_value": float(table.values[0]),
        "runtime_ms": _ms(t0, args),
    }
    _emit(
        args,
        report,
        f"|A| = {len(a)}, plancherel residual {report['plancherel_residual']:.2e}",
    )
    return 0


def _cmd_structure(args) -> int:
    a = _load(args.set_path)
    if not a.symmetric:
        sys.stderr.write("input set must be symmetric\n")
        return 2
    t0 = time.perf_counter()
    s = enforce_low_height(a, find_structure(a))
    ratio = pigeonhole_guarantee(a, s)
    if args.out:
        Path(args.out).write_text(artifacts.canonical_json(artifacts.structure_payload(a, s)))
    report = {
        "config": _echo(args, set=args.set_path),
        "tau": s.tau,
        "alpha": s.height,
        "bucket_lo": s.bucket_lo,
        "d_size": len(s.diffs),
        "graph_size": str(s.graph_size),
        "graph_energy": str(s.graph_energy),
        "guarantee_ratio": ratio,
        "runtime_ms": _ms(t0, args),
        "out": args.out,
    }
    _emit(
        args,
        report,
        f"alpha = {s.height:.4f}, tau = {s.tau:.4f}, |D| = {len(s.diffs)}, E(G) = {s.graph_energy}",
    )
    return 0


def _cmd_comity(args) -> int:
    a = _load(args.set_path)
    if not a.symmetric:
        sys.stderr.write("input set must be symmetric\n")
        return 2
    t0 = time.perf_counter()
    s = enforce_low_height(a, find_structure(a))
    cert = comity_certificate(a, s)
    verified = verify_comity(a, cert)["passes"]
    if args.out:
        Path(args.out).write_text(artifacts.canonical_json(artifacts.comity_payload(cert)))
    report = {
        "config": _echo(args, set=args.set_path),
        "beta": cert.beta,
        "mu": cert.mu,
        "band": [cert.band[0], cert.band[1]],
        "count": str(cert.pair_count),
        "mass": str(cert.mass),
        "sampled": cert.sampled,
        "verified": verified,
        "runtime_ms": _ms(t0, args),
        "out": args.out,
    }
    _emit(args, report, f"mu = {cert.mu:.4f} (beta = {cert.beta:.4f}, verified = {verified})")
    return 0 if verified else 2


def _cmd_sideways(args) -> int:
    a = _load(args.set_path)
    if not a.symmetric:
        sys.stderr.write("input set must be symmetric\n")
        return 2
    t0 = time.perf_counter()
    s = enforce_low_height(a, find_structure(a))
    ccert = comity_certificate(a, s)
    scert = sideways_certificate(a, s, ccert)
    verified = verify_sideways(a, scert)["passes"]
    if args.out:
        Path(args.out).write_text(artifacts.canonical_json(artifacts.sideways_payload(scert)))
    report = {
        "config": _echo(args, set=args.set_path),
        "gamma": scert.gamma,
        "nu": scert.nu,
        "band": [scert.band[0], scert.band[1]],
        "count": str(scert.q_count),
        "mass": str(scert.mass),
        "sampled": scert.sampled,
        "verified": verified,
        "runtime_ms": _ms(t0, args),
        "out": args.out,
    }
    _emit(args, report, f"nu = {scert.nu:.4f} (gamma = {scert.gamma:.4f}, verified = {verified})")
    return 0 if verified else 2


def _cmd_bsg(args) -> int:
    b = _load(args.b_path)
    c = _load(args.c_path)
    t0 = time.perf_counter()
    cert = asym_bsg(b, c)
    payload = artifacts.bsg_payload(cert)
    if args.out:
        Path(args.out).write_text(artifacts.canonical_json(payload))
    report = {"config": _echo(args, B=args.b_path, C=args.c_path), "runtime_ms": _ms(t0, args)}
    report.update(payload)
    _emit(
        args,
        report,
        f"verdict = {cert.verdict} (|K| = {len(cert.k)}, |X| = {len(cert.x)}, "
        f"cover_B = {cert.cover_b}/{len(b)})",
    )
    return 0


def _cmd_decompose(args) -> int:
    a = _load(args.set_path)
    if not a.symmetric:
        sys.stderr.write("input set must be symmetric\n")
        return 2
    t0 = time.perf_counter()
    dec = decompose(a, nu_star=args.nustar, coverage_target=args.coverage, c_pop=args.cpop)
    config = _echo(
        args,
        set=args.set_path,
        nustar=args.nustar,
        coverage=args.coverage,
        cpop=args.cpop,
    )
    summary = {
        "config": config,
        "block_count": dec.report["block_count"],
        "coverage": dec.report["coverage"],
        "alpha_mode": dec.alpha_mode,
        "pruned_removed": str(dec.report["pruned_removed"]),
        "annotations": dec.report["annotations"],
        "runtime_ms": _ms(t0, args),
    }
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        payload = artifacts.decomposition_payload(dec)
        payload["config"] = config
        (outdir / "decomposition.json").write_text(artifacts.canonical_json(payload))
        (outdir / "summary.json").write_text(artifacts.canonical_json(summary))
        with open(outdir / "trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["block", "step", "phase", "kind", "alpha", "mu", "nu", "d_size", "graph_energy"])
            for row in dec.trace:
                writer.writerow(
                    [
                        row.get("block"),
                        row.get("step"),
                        row.get("phase"),
                        row.get("kind"),
                        _fmt_float(row.get("alpha")),
                        _fmt_float(row.get("mu")),
                        _fmt_float(row.get("nu")),
                        row.get("d_size"),
                        row.get("graph_energy"),
                    ]
                )
    _emit(
        args,
        summary,
        f"{dec.report['block_count']} blocks, coverage {dec.report['coverage']:.3f}"
        + (f" -> {args.out}" if args.out else ""),
    )
    return 0


def _fmt_float(v):
    return "" if v is None else f"{v:.9f}"


def _cmd_check(args) -> int:
    if not args.set_path and not args.file_path:
        sys.stderr.write("check needs --set or --file\n")
        return 1
    if args.set_path:
        a = _load(args.set_path)
        rep = holder_check(a)
        sigma = smoothing_exponent(a) if len(a) >= 2 else 0.0
        report = {
            "config": _echo(args, set=args.set_path),
            "kind": "set",
            "size": len(a),
            "symmetric": a.symmetric,
            "e4": str(rep.e4),
            "e8": str(rep.e8),
            "sandwich_low": f"{float(rep.lower):.3f}",
            "sandwich_high": str(rep.upper),
            "sigma_hat": sigma,
            "passes": rep.passes,
        }
        _emit(args, report, f"holder sandwich: {'pass' if rep.passes else 'FAIL'} (sigma^ = {sigma:.4f})")
        return 0 if rep.passes else 2
    result = artifacts.check_artifact(args.file_path)
    report = {"config": _echo(args, file=args.file_path), **result}
    _emit(
        args,
        report,
        f"{result['kind']}: {'pass' if result['passes'] else 'FAIL: ' + '; '.join(result['problems'])}",
    )
    return 0 if result["passes"] else 2


def _digest(value: str) -> str:
    return hashlib.sha256(value.encode()).hexdigest()[:16]


def _cmd_bench(args) -> int:
    spec = parse_group(args.group)
    rng = np.random.default_rng(args.seed)
    idx = rng.choice(spec.order, size=min(args.set_size, spec.order), replace=False)
    a = GroupSet(spec, np.asarray(idx, dtype=np.int64))
    orders = [int(tok) for tok in args.orders.split(",") if tok]
    methods = [tok.strip() for tok in args.methods.split(",") if tok.strip()]

    def run_cell(cell):
        order, method = cell
        t0 = time.perf_counter()
        try:
            result = energy(a, order, method, tuple_budget=args.tuple_budget)
        except BudgetExceededError:
            return {
                "group": format_group(spec),
                "set_size": len(a),
                "order": order,
                "method": method,
                "runtime_ms": "",
                "value_digest": "",
                "status": "skipped",
            }
        ms_val = int((time.perf_counter() - t0) * 1000)
        if method == "spectral":
            digest = _digest(str(result.rounded)) if result.rounded is not None else ""
            status = "ok" if result.rounded is not None else "unrounded"
        else:
            digest = _digest(str(result))
            status = "ok"
        return {
            "group": format_group(spec),
            "set_size": len(a),
            "order": order,
            "method": method,
            "runtime_ms": ms_val,
            "value_digest": digest,
            "status": status,
        }

    cells = [(order, method) for order in orders for method in methods]
    rows = ordered_map(run_cell, cells, args.threads)
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=["group", "set_size", "order", "method", "runtime_ms", "value_digest", "status"]
    )
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    # the equality gate covers the exact methods; spectral digests are
    # informational (its contract is relative accuracy, not integer equality)
    mismatches = []
    for order in orders:
        digests = {
            r["value_digest"]
            for r in rows
            if r["order"] == order and r["value_digest"] and r["method"] in ("exact", "brute")
        }
        if len(digests) > 1:
            mismatches.append(order)
        spectral = {
            r["value_digest"]
            for r in rows
            if r["order"] == order and r["value_digest"] and r["method"] == "spectral"
        }
        if spectral and digests and spectral != digests:
            sys.stderr.write(f"note: spectral rounding differs from exact for order {order}\n")
    if mismatches:
        sys.stderr.write(f"digest mismatch across exact methods for orders {mismatches}\n")
        return 2
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "energy": _cmd_energy,
    "spectrum": _cmd_spectrum,
    "structure": _cmd_structure,
    "comity": _cmd_comity,
    "sideways": _cmd_sideways,
    "bsg": _cmd_bsg,
    "decompose": _cmd_decompose,
    "check": _cmd_check,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (InfeasibleModelError, DenseCapError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
