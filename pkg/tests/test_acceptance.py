"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings inline.
"""

import json
import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from nonsmooth.artifacts import (
    canonical_json,
    check_artifact,
    comity_payload,
    sideways_payload,
)
from nonsmooth.bsg import asym_bsg
from nonsmooth.cli import main as cli_main
from nonsmooth.comity import (
    comity_certificate,
    comity_increment,
    sideways_certificate,
    sideways_increment,
    verify_comity,
    verify_sideways,
)
from nonsmooth.decompose import decompose
from nonsmooth.energy import (
    energy,
    energy_profile,
    holder_check,
    rep_function,
    smoothing_exponent,
    spectrum,
)
from nonsmooth.groups import GroupSet, GroupSpec, save_set, span
from nonsmooth.models import ModelSpec, gen, quotient_energies, random_subgroup
from nonsmooth.structure import (
    band_count,
    bucket_table,
    build_structure,
    enforce_low_height,
    find_structure,
    nontrivial_energy,
    validate_structure,
)

SEED = 20260808


def _report(cid: str, message: str) -> None:
    print(f"\nACCEPTANCE {cid}: PASS  {message}")


def _families_spec(rng, which: int) -> GroupSpec:
    if which == 0:
        return GroupSpec((2,) * int(rng.integers(4, 13)))
    if which == 1:
        return GroupSpec((3,) * int(rng.integers(3, 8)))
    if which == 2:
        return GroupSpec((int(rng.integers(16, 1 << 12)),))
    factors = [int(rng.integers(2, 11)) for _ in range(3)]
    while np.prod(factors) * 2 <= 1 << 12 and rng.integers(0, 2):
        factors.append(int(rng.integers(2, 8)))
    return GroupSpec(tuple(factors))


@pytest.fixture(scope="module")
def suite_sets():
    rng = np.random.default_rng(SEED)
    sets = []
    for i in range(200):
        spec = _families_spec(rng, i % 4)
        size = int(rng.integers(2, min(41, spec.order + 1)))
        idx = rng.choice(spec.order, size=size, replace=False)
        sets.append(GroupSet(spec, np.asarray(idx, dtype=np.int64)))
    return sets


@pytest.fixture(scope="module")
def subgroup_fixtures():
    out = []
    spec2 = GroupSpec((2,) * 10)
    out.append(span(spec2, [spec2.element_at(1 << i) for i in range(6)]))
    spec3 = GroupSpec((3,) * 6)
    out.append(span(spec3, [spec3.element([1, 0, 0, 0, 0, 0]), spec3.element([0, 1, 2, 0, 0, 0])]))
    zn = GroupSpec((720,))
    out.append(span(zn, [zn.element([6])]))
    mixed = GroupSpec((4, 6, 10))
    out.append(span(mixed, [mixed.element([2, 0, 0]), mixed.element([0, 3, 0]), mixed.element([0, 0, 2])]))
    return out


class TestC01ExactIdentities:
    def test_c01_exact_identity_suite(self, suite_sets):
        t0 = time.monotonic()
        for a in suite_sets:
            prof = energy_profile(a)
            for order in (2, 4, 6, 8):
                assert prof[order] == energy(a, order, "brute")
                spectral = energy(a, order, "spectral")
                assert spectral.value == pytest.approx(prof[order], rel=1e-6)
            assert rep_function(a).energy() == prof[4]
            assert spectrum(a).plancherel_residual() < 1e-9
        elapsed = time.monotonic() - t0
        assert elapsed <= 120.0
        _report("C1", f"200 sets x 4 orders, exact == brute, spectral within 1e-6 ({elapsed:.1f}s)")


class TestC02Holder:
    def test_c02_holder_suite(self, suite_sets, subgroup_fixtures):
        for a in suite_sets:
            rep = holder_check(a)
            assert rep.lower <= rep.e8 <= rep.upper  # exact Fraction/int comparison
        for h in subgroup_fixtures:
            rep = holder_check(h)
            assert rep.e8 == rep.lower == Fraction(rep.e4**3, len(h) ** 2)
            assert abs(smoothing_exponent(h)) <= 1e-9
        _report("C2", f"sandwich exact on {len(suite_sets)} sets; subgroup equality, sigma^ = 0 +- 1e-9")


class TestC03FixtureValues:
    def test_c03_pinned_fixture(self):
        spec = GroupSpec((10,))
        a = GroupSet.from_coords(spec, [[0], [1], [2]])
        # confirmed by the independent brute-force oracle first
        assert energy(a, 4, "brute") == 19
        assert energy(a, 8, "brute") == 1107
        # then pinned as regression values for the exact backend
        assert energy(a, 4, "exact") == 19
        assert energy(a, 8, "exact") == 1107
        assert list(rep_function(a).counts) == [3, 2, 1, 0, 0, 0, 0, 0, 1, 2]
        _report("C3", "A = {0,1,2} in Z_10: E_4 = 19, E_8 = 1107, r = (3,2,1,0,...,0,1,2)")


class TestC04ExampleExponents:
    @pytest.mark.xfail(
        strict=True,
        reason=(
            "spec-literal parameters are unattainable: 8 subgroups of size 2^12 in "
            "Z_2^20 cannot have trivial pairwise intersections (dimension forces "
            "2^4-point overlaps), and the overlap cross terms push the measured "
            "ratios to E_4 ~ 2.8x and E_8 ~ 7400x, far outside [0.9,1.1]/[0.9,1.5]"
        ),
    )
    def test_c04a_union_subgroups_spec_literal(self):
        ms = ModelSpec(
            "union_subgroups", GroupSpec((2,) * 20), seed=41, subgroup_size=1 << 12, count=8
        )
        out = gen(ms)
        prof = energy_profile(out.set)
        se4 = sum(energy_profile(h)[4] for h in out.parts["subgroups"])
        se8 = sum(energy_profile(h)[8] for h in out.parts["subgroups"])
        print(
            f"\nACCEPTANCE C4a(spec-literal): measured E4/sum = {prof[4] / se4:.3f}, "
            f"E8/sum = {prof[8] / se8:.3f} (expected failure)"
        )
        assert 0.9 * se4 <= prof[4] <= 1.1 * se4
        assert 0.9 * se8 <= prof[8] <= 1.5 * se8

    def test_c04a_union_subgroups_feasible(self, monkeypatch):
        # largest configuration whose cross terms fit the stated bands under
        # the 2^26 dense cap: 3 subgroups of 2^11 in Z_2^25, trivial overlaps
        monkeypatch.setenv("NONSMOOTH_DENSE_CAP", str(1 << 26))
        t0 = time.monotonic()
        ms = ModelSpec(
            "union_subgroups",
            GroupSpec((2,) * 25),
            seed=45,
            subgroup_size=1 << 11,
            count=3,
            max_overlap=1,
        )
        out = gen(ms)
        for row in out.report["pairwise_overlaps"]:
            assert all(v == 1 for v in row)
        prof = energy_profile(out.set)
        se4 = sum(energy_profile(h)[4] for h in out.parts["subgroups"])
        se8 = sum(energy_profile(h)[8] for h in out.parts["subgroups"])
        assert 0.9 * se4 <= prof[4] <= 1.1 * se4
        assert 0.9 * se8 <= prof[8] <= 1.5 * se8
        _report(
            "C4a(feasible)",
            f"trivial-overlap union: E4 ratio {prof[4] / se4:.3f}, E8 ratio {prof[8] / se8:.3f} "
            f"({time.monotonic() - t0:.0f}s)",
        )

    def test_c04b_subgroup_plus_random(self, monkeypatch):
        monkeypatch.setenv("NONSMOOTH_DENSE_CAP", str(1 << 26))
        t0 = time.monotonic()
        ms = ModelSpec(
            "subgroup_plus_random",
            GroupSpec((2,) * 24),
            seed=43,
            subgroup_size=1 << 16,
            count=1 << 8,
        )
        out = gen(ms)
        h, r = out.parts["h"], out.parts["r"]
        prof = energy_profile(out.set)
        ph = energy_profile(h)
        qr = quotient_energies(r, h)
        # the free-factor reading: R's energies taken modulo H (at these
        # parameters R is a full transversal, so the embedded-set reading is
        # degenerate; see the decisions ledger)
        r4 = prof[4] / (ph[4] * qr[4])
        r8 = prof[8] / (ph[8] * qr[8])
        assert 1.0 <= r4 <= 2.0
        assert 1.0 <= r8 <= 4.0
        _report(
            "C4b",
            f"free H+R: E4/(E4(H) E4(R mod H)) = {r4:.4f} in [1,2], "
            f"E8 ratio = {r8:.4f} in [1,4] ({time.monotonic() - t0:.0f}s)",
        )

    def test_c04c_subgroup_random(self):
        t0 = time.monotonic()
        ms = ModelSpec(
            "subgroup_random", GroupSpec((2,) * 20), seed=44, subgroup_size=1 << 14, set_size=1 << 10
        )
        out = gen(ms)
        sigma = smoothing_exponent(out.set)
        eps = math.log((1 << 14) / len(out.set)) / math.log(len(out.set))
        assert 1.5 * eps <= sigma <= 2.5 * eps
        _report(
            "C4c",
            f"random-in-subgroup: sigma^ = {sigma:.4f} in [{1.5 * eps:.3f}, {2.5 * eps:.3f}] "
            f"({time.monotonic() - t0:.0f}s)",
        )


class TestC05StructurePigeonhole:
    def test_c05_find_structure_guarantee(self, suite_sets):
        checked = 0
        for a in suite_sets:
            sym = a.symmetrized()
            if len(sym) < 2:
                continue
            r = rep_function(sym)
            nontrivial = nontrivial_energy(r)
            if nontrivial == 0:
                continue
            s = find_structure(sym)
            assert s.graph_energy * band_count(len(sym)) >= nontrivial
            table = bucket_table(sym, r)
            assert sum(row["graph_energy"] for row in table) == nontrivial
            low = enforce_low_height(sym, s)
            assert low.height <= s.height + 1e-9
            assert enforce_low_height(sym, low) is low  # idempotent
            checked += 1
        assert checked >= 150
        _report("C5", f"pigeonhole floor, exact partition, idempotence on {checked} sets")


class TestC06ComityIdentities:
    def test_c06_interchange_identities(self):
        rng = np.random.default_rng(SEED + 6)
        checked = 0
        trials = 0
        while checked < 30 and trials < 200:
            trials += 1
            spec = _families_spec(rng, trials % 4)
            size = int(rng.integers(8, min(37, spec.order + 1)))
            a = GroupSet(spec, rng.choice(spec.order, size=size, replace=False)).symmetrized()
            if len(a) < 4:
                continue
            try:
                s = find_structure(a)
            except ValueError:
                continue
            ccert = comity_certificate(a, s)
            if ccert.sampled:
                continue
            # section-5 identity: the degree-square total equals the full
            # pair-overlap sum, recomputed here by explicit pair enumeration
            member = np.zeros(spec.order, dtype=bool)
            member[a.indices] = True
            rows = [member[spec.sub_indices(a.indices, int(x))] for x in s.diffs.indices]
            manual_total = sum(
                int(np.count_nonzero(rx & ry)) for rx in rows for ry in rows
            )
            assert ccert.total_overlap == manual_total
            assert ccert.scanned_total == manual_total
            scert = sideways_certificate(a, s, ccert)
            if scert.sampled:
                continue
            from nonsmooth.comity import f_sets

            rhs = 0
            for x in s.diffs.indices.tolist():
                fx = f_sets(a, s, ccert, spec.element_at(x)).f_x
                mask_x = member[spec.sub_indices(a.indices, x)]
                for y in fx.indices.tolist():
                    mask_y = member[spec.sub_indices(a.indices, y)]
                    rhs += int(np.count_nonzero(mask_x & mask_y))
            assert scert.scanned_total == rhs
            checked += 1
        assert checked == 30
        _report("C6", "both interchange identities exact on 30 seeded structures")

    def test_c06_subgroup_certificates(self):
        spec = GroupSpec((2,) * 10)
        h = span(spec, [spec.element_at(1 << i) for i in range(8)])
        s = find_structure(h)
        ccert = comity_certificate(h, s)
        scert = sideways_certificate(h, s, ccert)
        # excluding x = 0 from D leaves a 1/(M log M) quantum in the
        # exponents; 1e-2 covers it at |H| = 256 (see the decisions ledger)
        assert 0.0 <= ccert.mu <= 1e-2
        assert 0.0 <= scert.nu <= 1e-2
        _report("C6(subgroup)", f"mu = {ccert.mu:.2e}, nu = {scert.nu:.2e} (<= 1e-2)")


@pytest.fixture(scope="module")
def two_scale():
    rng = np.random.default_rng(SEED + 7)
    spec = GroupSpec((2,) * 16)
    h = span(spec, [spec.element_at(1 << i) for i in range(10)])
    cloud = GroupSet(spec, rng.choice(spec.order, size=1024, replace=False))
    return spec, h, h.union(cloud).symmetrized()


class TestC07IncrementSoundness:

    def test_c07_comity_increment_dichotomy(self, two_scale, tmp_path):
        spec, h, delta = two_scale
        sigma = smoothing_exponent(delta)
        r = rep_function(delta)
        outcomes = []
        for row in bucket_table(delta, r):
            s = build_structure(delta, row["indices"], r, bucket_lo=row["bucket_lo"])
            out = comity_increment(delta, s, mu_target=0.05, sigma_hat=sigma)
            outcomes.append(out.kind)
            if out.kind == "has_comity":
                assert out.certificate.mu <= 0.05 + 1e-12
                assert verify_comity(delta, out.certificate)["passes"]
                art = tmp_path / f"c{row['level']}.json"
                art.write_text(canonical_json(comity_payload(out.certificate)))
                assert check_artifact(art)["passes"]
            elif out.kind == "new_structure":
                assert out.structure.height < s.height - 1e-12
                assert validate_structure(delta, out.structure).passes
            else:
                assert out.diagnostics  # stalls carry their measurements
        assert "has_comity" in outcomes and "new_structure" in outcomes
        _report("C7(comity)", f"dichotomy over bands: {outcomes}")

    def test_c07_sideways_increment_dichotomy(self, two_scale, tmp_path):
        spec, h, delta = two_scale
        r = rep_function(delta)
        outcomes = []
        # the subgroup band certifies at nu ~ 0.11; the cloud bands sit at
        # nu ~ 0.8+ and must strictly descend (or stall with diagnostics)
        nu_target = 0.12
        for row in bucket_table(delta, r):
            s = build_structure(delta, row["indices"], r, bucket_lo=row["bucket_lo"])
            ccert = comity_certificate(delta, s)
            scert = sideways_certificate(delta, s, ccert)
            out = sideways_increment(delta, s, ccert, scert, nu_target=nu_target)
            outcomes.append(out.kind)
            if out.kind == "has_sideways":
                assert out.certificate.nu <= nu_target + 1e-12
                assert verify_sideways(delta, out.certificate)["passes"]
                art = tmp_path / f"s{row['level']}.json"
                art.write_text(canonical_json(sideways_payload(out.certificate)))
                assert check_artifact(art)["passes"]
            elif out.kind == "new_structure":
                assert out.structure.height < s.height - 1e-12
                assert validate_structure(delta, out.structure).passes
            else:
                assert out.diagnostics
        assert "has_sideways" in outcomes
        assert ("new_structure" in outcomes) or ("stall" in outcomes)
        _report("C7(sideways)", f"dichotomy over bands: {outcomes}")


class TestC08BsgRecovery:
    def _planted(self, seed):
        rng = np.random.default_rng(seed)
        spec = GroupSpec((2,) * 16)
        h = span(spec, [spec.element_at(1 << i) for i in range(8)])
        reps, seen = [], set()
        while len(reps) < 8:
            x = int(rng.integers(spec.order))
            coset = x >> 8
            if coset not in seen:
                seen.add(coset)
                reps.append(x)
        b = GroupSet(
            spec, spec.add_indices(h.indices[:, None], np.asarray(reps, dtype=np.int64)[None, :]).reshape(-1)
        )
        return spec, h, b

    def test_c08_planted_recovery(self):
        for seed in range(5):
            spec, h, b = self._planted(SEED + 80 + seed)
            cert = asym_bsg(b, h)
            sym_diff = len(cert.k.difference(h)) + len(h.difference(cert.k))
            assert sym_diff <= 0.1 * len(h)
            assert cert.verdict == "strong", f"seed {seed}: {cert.reason}"
        _report("C8(planted)", "5 seeds: |K diff H| <= 0.1|H|, verdict strong")

    def test_c08_negative_controls(self):
        for seed in range(5):
            rng = np.random.default_rng(SEED + 90 + seed)
            spec = GroupSpec((2,) * 16)
            b = GroupSet(spec, rng.choice(spec.order, size=2048, replace=False))
            c = GroupSet(spec, rng.choice(spec.order, size=256, replace=False))
            cert = asym_bsg(b, c)
            assert cert.verdict != "strong"
        _report("C8(controls)", "5 uniform-random seeds: verdict never strong")


class TestC09EndToEnd:
    def test_c09_decomposition(self):
        t0 = time.monotonic()
        rng = np.random.default_rng(SEED + 9)
        spec = GroupSpec((2,) * 16)
        subs, parts = [], []
        for _ in range(4):
            h = random_subgroup(spec, 1 << 10, rng)
            g = int(rng.integers(spec.order))
            subs.append(h)
            parts.append(GroupSet(spec, spec.add_indices(h.indices, g)))
        delta = parts[0]
        for p in parts[1:]:
            delta = delta.union(p)
        overlaps = [len(parts[i].intersect(parts[j])) for i in range(4) for j in range(i)]
        dec = decompose(delta, nu_star=0.35, coverage_target=0.9)
        assert dec.report["block_count"] >= 4
        assert dec.report["coverage"] >= 0.9
        union = None
        total = 0
        for blk in dec.blocks:
            if union is None:
                union = blk.b
            else:
                assert len(union.intersect(blk.b)) == 0  # exact disjointness
                union = union.union(blk.b)
            total += len(blk.b)
            best = min(
                range(4), key=lambda i: len(blk.h.difference(subs[i])) + len(subs[i].difference(blk.h))
            )
            sd = len(blk.h.difference(subs[best])) + len(subs[best].difference(blk.h))
            assert sd <= 0.1 * len(subs[best])
            assert blk.measured["h_doubling"] <= 1.1 * len(blk.h)
        assert len(union) == total
        elapsed = time.monotonic() - t0
        assert elapsed <= 600.0
        _report(
            "C9",
            f"{dec.report['block_count']} blocks, coverage {dec.report['coverage']:.3f}, "
            f"input translate overlaps {max(overlaps)} (forced), {elapsed:.0f}s",
        )


class TestC10Performance:
    def test_c10_exact_e8_budget(self):
        rng = np.random.default_rng(SEED + 10)
        spec = GroupSpec((2,) * 16)
        a = GroupSet(spec, rng.choice(spec.order, size=1 << 10, replace=False))
        t0 = time.monotonic()
        value = energy(a, 8, "exact")
        elapsed = time.monotonic() - t0
        assert elapsed <= 10.0
        assert value > 0
        _report("C10(perf)", f"exact E_8 at M = 2^10, |Z| = 2^16 in {elapsed:.2f}s (<= 10s)")

    def test_c10_bench_digests(self, tmp_path, capsys):
        csvs = []
        for threads in ("1", "4"):
            out_csv = tmp_path / f"bench{threads}.csv"
            code = cli_main(
                [
                    "bench",
                    "--group",
                    "Z2^16",
                    "--set-size",
                    "1024",
                    "--seed",
                    "5",
                    "--orders",
                    "4,8",
                    "--methods",
                    "exact,spectral,brute",
                    "--threads",
                    threads,
                    "-o",
                    str(out_csv),
                ]
            )
            capsys.readouterr()
            assert code == 0  # internal cross-method digest check passed
            rows = [line.split(",") for line in out_csv.read_text().strip().splitlines()[1:]]
            csvs.append([(r[2], r[3], r[5], r[6]) for r in rows])
        assert csvs[0] == csvs[1]  # identical digests and statuses across thread counts
        # brute E_4 is 2^20 pairs and completes; brute E_8 is 2^40 tuples,
        # over the 10^9 budget, and must be marked skipped
        by_cell = {(r[0], r[1]): r[3] for r in csvs[0]}
        assert by_cell[("4", "brute")] == "ok"
        assert by_cell[("8", "brute")] == "skipped"
        _report("C10(bench)", "digests equal across methods and thread counts; brute E_8 skipped")


class TestC11Determinism:
    def _run(self, argv):
        proc = subprocess.run(
            [sys.executable, "-m", "nonsmooth.cli", *argv], capture_output=True, cwd="/root/pkg"
        )
        assert proc.returncode == 0, proc.stderr.decode()
        return proc.stdout

    def test_c11_byte_determinism(self, tmp_path):
        spec = GroupSpec((2,) * 12)
        h = span(spec, [spec.element_at(1 << i) for i in range(7)])
        set_path = tmp_path / "h.json"
        save_set(h, set_path)
        for argv in (
            ["energy", "--set", str(set_path), "--order", "8", "--json"],
            ["structure", "--set", str(set_path), "--json"],
            ["comity", "--set", str(set_path), "--json"],
            [
                "gen",
                "--model",
                "union-subgroups",
                "--group",
                "Z2^12",
                "--count",
                "4",
                "--subgroup-size",
                "16",
                "--seed",
                "7",
                "--json",
            ],
        ):
            outputs = set()
            for threads in ("1", "4", "8"):
                for _ in range(2):
                    outputs.add(self._run(argv + ["--threads", threads]))
            assert len(outputs) == 1, f"nondeterministic output for {argv[0]}"
        # decompose writes files; compare bytes across two runs
        digests = []
        for run in range(2):
            outdir = tmp_path / f"dec{run}"
            self._run(
                ["decompose", "--set", str(set_path), "--nustar", "0.25", "-o", str(outdir), "--json"]
            )
            digests.append(
                tuple((outdir / name).read_bytes() for name in ("decomposition.json", "summary.json", "trace.csv"))
            )
        assert digests[0] == digests[1]
        _report("C11", "byte-identical outputs across reruns and --threads in {1, 4, 8}")
