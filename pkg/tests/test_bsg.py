import numpy as np
import pytest

from nonsmooth.bsg import asym_bsg, quad_count, verify_bsg
from nonsmooth.groups import GroupSet, GroupSpec, span

from conftest import random_set


def subgroup_f2(spec: GroupSpec, dims: int) -> GroupSet:
    return span(spec, [spec.element_at(1 << i) for i in range(dims)])


def planted_pair(seed: int, n_bits=16, h_dims=8, r_bits=3):
    """B = H + R with R one random representative in each of 2^r_bits fresh
    cosets, C = H; the ground truth K is H itself."""
    rng = np.random.default_rng(seed)
    spec = GroupSpec((2,) * n_bits)
    h = subgroup_f2(spec, h_dims)
    reps: list[int] = []
    seen = {0}
    while len(reps) < 2**r_bits:
        x = int(rng.integers(spec.order))
        coset = x >> h_dims
        if coset not in seen:
            seen.add(coset)
            reps.append(x)
    # include the zero coset so H itself is part of B
    reps[0] = int(rng.integers(len(h)))
    r = GroupSet(spec, np.asarray(reps, dtype=np.int64))
    b = GroupSet(spec, spec.add_indices(h.indices[:, None], r.indices[None, :]).reshape(-1))
    return spec, h, r, b


class TestQuadCount:
    def test_subgroup(self):
        spec = GroupSpec((2,) * 10)
        h = subgroup_f2(spec, 6)
        rep = quad_count(h, h)
        assert rep.count == len(h) ** 3
        assert abs(rep.eta_hat) < 1e-12

    def test_diagonal_lower_bound(self, rng):
        spec = GroupSpec((2,) * 12)
        for _ in range(10):
            b = random_set(spec, 40, rng)
            c = random_set(spec, 25, rng)
            assert quad_count(b, c).count >= len(b) * len(c)

    def test_planted_small_eta(self):
        spec, h, r, b = planted_pair(seed=0)
        rep = quad_count(b, h)
        # count ~ |H|^3 |R| = |B|^(1-eta) |C|^2 with eta near 0
        assert rep.count >= len(h) ** 3 * len(r) // 2
        assert rep.eta_hat <= 0.1


class TestAsymBsg:
    def test_subgroup_exact(self):
        spec = GroupSpec((2,) * 12)
        h = subgroup_f2(spec, 7)
        cert = asym_bsg(h, h)
        assert cert.verdict == "strong"
        assert cert.k == h
        assert len(cert.x) == 1 and cert.x.indices[0] == 0
        assert cert.cover_b == len(h)
        assert cert.cover_c == len(h)
        assert cert.doubling_ratio == 0.0
        assert verify_bsg(cert)["passes"]

    def test_subgroup_exactness_scan(self):
        # strong with zero slack for subgroups across several sizes
        for n_bits, dims in [(8, 4), (10, 6), (14, 8)]:
            spec = GroupSpec((2,) * n_bits)
            h = subgroup_f2(spec, dims)
            cert = asym_bsg(h, h)
            assert cert.verdict == "strong"
            assert cert.k == h and cert.cover_b == len(h)

    def test_planted_recovery_five_seeds(self):
        for seed in range(5):
            spec, h, r, b = planted_pair(seed=seed)
            cert = asym_bsg(b, h)
            sym_diff = len(cert.k.difference(h)) + len(h.difference(cert.k))
            assert sym_diff <= 0.1 * len(h), f"seed {seed}: K misses H by {sym_diff}"
            assert cert.verdict == "strong", f"seed {seed}: {cert.reason}"
            assert len(cert.x) <= 2 * len(r)
            assert verify_bsg(cert)["passes"]

    def test_random_negative_controls(self):
        for seed in range(5):
            rng = np.random.default_rng(1000 + seed)
            spec = GroupSpec((2,) * 16)
            b = random_set(spec, 2048, rng)
            c = random_set(spec, 256, rng)
            rep = quad_count(b, c)
            assert rep.eta_hat > 0.3  # genuinely unstructured
            cert = asym_bsg(b, c)
            assert cert.verdict != "strong", f"seed {seed} wrongly strong: {cert.reason}"

    def test_degenerate_inputs_fail_verdict(self, rng):
        spec = GroupSpec((2,) * 8)
        b = random_set(spec, 50, rng)
        tiny = GroupSet(spec, [1, 2])
        cert = asym_bsg(b, tiny)
        assert cert.verdict == "fail"
        assert "degenerate" in cert.reason

    def test_corrupted_k_changes_verification(self):
        spec, h, r, b = planted_pair(seed=2)
        cert = asym_bsg(b, h)
        assert verify_bsg(cert)["passes"]
        # swap one element of K: the recomputed fields must move
        k_idx = cert.k.indices.copy()
        outside = next(i for i in range(spec.order) if i not in cert.k)
        k_bad = GroupSet(spec, np.concatenate([k_idx[:-1], [outside]]))
        from dataclasses import replace

        bad = replace(cert, k=k_bad)
        report = verify_bsg(bad)
        assert not report["passes"]
        assert report["problems"]

    def test_cover_monotone_in_x(self):
        spec, h, r, b = planted_pair(seed=3)
        cert = asym_bsg(b, h)
        member = np.zeros(spec.order, dtype=bool)
        covered_prev = -1
        chosen: list[int] = []
        for x in cert.x.indices.tolist():
            chosen.append(x)
            covered = np.zeros(spec.order, dtype=bool)
            for t in chosen:
                covered[spec.add_indices(cert.k.indices, t)] = True
            now = int(np.count_nonzero(covered[b.indices]))
            assert now >= covered_prev
            covered_prev = now
