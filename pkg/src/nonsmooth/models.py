"""Seeded generators for the standard example families.

Four models, each fully determined by (model, group, sizes, seed):

* subgroup_random      - a random subset of a random subgroup H; the
                         density heuristic predicts tau = 1 - eps and a
                         genuinely positive smoothing exponent ~ 2 eps.
* subgroup_plus_random - H + R with R one representative in each of
                         |R| distinct cosets, so |H + R| = |H| |R| exactly
                         and the energies factor through the quotient.
* union_subgroups      - a union of random subgroups with pairwise
                         intersections bounded by a parameter (trivial
                         when the ambient dimension allows it).
* uniform              - an unstructured control; no prediction.

Outputs are symmetrized last (a no-op in characteristic 2; at most a
doubling elsewhere, reported).  Identical ModelSpec => identical set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .energy import energy_profile
from .errors import InfeasibleModelError
from .groups import GroupSet, GroupSpec, elementary_quotient, span

MODELS = ("subgroup_random", "subgroup_plus_random", "union_subgroups", "uniform")


@dataclass(frozen=True)
class ModelSpec:
    model: str
    group: GroupSpec
    seed: int
    subgroup_size: Optional[int] = None
    set_size: Optional[int] = None
    count: Optional[int] = None
    max_overlap: Optional[int] = None

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; pick one of {MODELS}")


@dataclass(frozen=True)
class GenResult:
    model_spec: ModelSpec
    set: GroupSet
    parts: dict
    report: dict


@dataclass(frozen=True)
class ExponentPrediction:
    epsilon: float
    tau_pred: float
    sigma_pred: float


def random_subgroup(
    spec: GroupSpec, size: int, rng: np.random.Generator, *, attempts: int = 100
) -> GroupSet:
    """A uniformly seeded subgroup of exactly the requested size."""
    if size == 1:
        return span(spec, [])
    for _ in range(attempts):
        gens: list = []
        current = span(spec, [])
        stuck = 0
        while len(current) < size and stuck < 40:
            g = spec.element_at(int(rng.integers(spec.order)))
            grown = span(spec, gens + [g])
            if len(grown) <= size and len(grown) > len(current):
                gens.append(g)
                current = grown
            else:
                stuck += 1
        if len(current) == size:
            return current
    raise InfeasibleModelError(
        f"could not realize a subgroup of size {size} in {spec} after {attempts} attempts"
    )


def coset_transversal(
    spec: GroupSpec, h: GroupSet, count: int, rng: np.random.Generator, *, attempts: int = 10000
) -> GroupSet:
    """count random elements in pairwise distinct cosets of H (0-coset allowed)."""
    quotient_key = None
    if all(n == spec.factors[0] for n in spec.factors):
        try:
            _, project = elementary_quotient(spec, h)
            quotient_key = project
        except ValueError:
            quotient_key = None
    total_cosets = spec.order // len(h)
    if count > total_cosets:
        raise InfeasibleModelError(
            f"asked for {count} distinct cosets but the quotient has only {total_cosets}"
        )
    chosen: dict[int, int] = {}
    for _ in range(attempts):
        x = int(rng.integers(spec.order))
        if quotient_key is not None:
            key = int(quotient_key(np.asarray([x]))[0])
        else:
            key = int(np.min(spec.add_indices(h.indices, x)))
        if key not in chosen:
            chosen[key] = x
            if len(chosen) == count:
                return GroupSet(spec, np.asarray(sorted(chosen.values()), dtype=np.int64))
    raise InfeasibleModelError(f"could not hit {count} distinct cosets after {attempts} draws")


def gen(ms: ModelSpec) -> GenResult:
    rng = np.random.default_rng(ms.seed)
    spec = ms.group
    if ms.model == "subgroup_random":
        return _gen_subgroup_random(ms, spec, rng)
    if ms.model == "subgroup_plus_random":
        return _gen_subgroup_plus_random(ms, spec, rng)
    if ms.model == "union_subgroups":
        return _gen_union_subgroups(ms, spec, rng)
    return _gen_uniform(ms, spec, rng)


def _require(ms: ModelSpec, **named) -> list:
    out = []
    for name, value in named.items():
        if value is None:
            raise ValueError(f"model {ms.model} needs parameter {name}")
        out.append(value)
    return out


def _finish(ms: ModelSpec, raw: GroupSet, parts: dict, report: dict) -> GenResult:
    final = raw.symmetrized()
    report["size_before_symmetrize"] = len(raw)
    report["size"] = len(final)
    report["symmetrize_growth"] = len(final) - len(raw)
    return GenResult(model_spec=ms, set=final, parts=parts, report=report)


def _gen_subgroup_random(ms, spec, rng) -> GenResult:
    (h_size, n) = _require(ms, subgroup_size=ms.subgroup_size, set_size=ms.set_size)
    if n > h_size:
        raise InfeasibleModelError(f"set size {n} exceeds the subgroup size {h_size}")
    h = random_subgroup(spec, h_size, rng)
    picked = rng.choice(len(h), size=n, replace=False)
    a = GroupSet(spec, h.indices[np.sort(picked)])
    return _finish(ms, a, {"h": h}, {"density": n / h_size})


def _gen_subgroup_plus_random(ms, spec, rng) -> GenResult:
    (h_size, count) = _require(ms, subgroup_size=ms.subgroup_size, count=ms.count)
    h = random_subgroup(spec, h_size, rng)
    r = coset_transversal(spec, h, count, rng)
    sums = spec.add_indices(h.indices[:, None], r.indices[None, :]).reshape(-1)
    a = GroupSet(spec, sums)
    if len(a) != h_size * count:
        raise InfeasibleModelError("freeness failed: |H + R| != |H| |R|")
    return _finish(ms, a, {"h": h, "r": r}, {"free": True, "h_size": h_size, "r_size": count})


def _forced_min_overlap(spec: GroupSpec, size: int) -> int:
    # two subgroups of the given size cannot intersect in fewer elements
    return max(1, (size * size + spec.order - 1) // spec.order)


def _gen_union_subgroups(ms, spec, rng) -> GenResult:
    (size, count) = _require(ms, subgroup_size=ms.subgroup_size, count=ms.count)
    max_overlap = ms.max_overlap
    if max_overlap is None:
        max_overlap = _forced_min_overlap(spec, size)
    subgroups: list[GroupSet] = []
    for slot in range(count):
        placed = False
        for _ in range(100):
            cand = random_subgroup(spec, size, rng)
            if all(len(cand.intersect(other)) <= max_overlap for other in subgroups):
                subgroups.append(cand)
                placed = True
                break
        if not placed:
            raise InfeasibleModelError(
                f"could not place subgroup {slot + 1}/{count} with pairwise overlap <= {max_overlap}"
            )
    union = subgroups[0]
    for s in subgroups[1:]:
        union = union.union(s)
    overlaps = [
        [len(subgroups[i].intersect(subgroups[j])) for j in range(i)] for i in range(count)
    ]
    report = {
        "max_overlap_allowed": max_overlap,
        "pairwise_overlaps": overlaps,
        "union_deficit": sum(len(s) for s in subgroups) - len(union),
    }
    return _finish(ms, union, {"subgroups": subgroups}, report)


def _gen_uniform(ms, spec, rng) -> GenResult:
    (n,) = _require(ms, set_size=ms.set_size)
    idx = rng.choice(spec.order, size=n, replace=False)
    return _finish(ms, GroupSet(spec, np.asarray(idx, dtype=np.int64)), {}, {})


def expected_exponents(ms: ModelSpec) -> ExponentPrediction:
    """Closed-form predictions; no prediction exists for the uniform model."""
    if ms.model == "uniform":
        raise ValueError("the uniform model carries no exponent prediction")
    if ms.model == "subgroup_random":
        (h_size, n) = _require(ms, subgroup_size=ms.subgroup_size, set_size=ms.set_size)
        eps = math.log(h_size / n) / math.log(n)
        return ExponentPrediction(epsilon=eps, tau_pred=1.0 - eps, sigma_pred=2.0 * eps)
    if ms.model == "subgroup_plus_random":
        (h_size, count) = _require(ms, subgroup_size=ms.subgroup_size, count=ms.count)
        n = h_size * count
        eps = math.log(count) / math.log(n)
        return ExponentPrediction(epsilon=eps, tau_pred=1.0 - eps, sigma_pred=0.0)
    (size, count) = _require(ms, subgroup_size=ms.subgroup_size, count=ms.count)
    n = size * count
    eps = 2.0 * math.log(count) / math.log(n)
    return ExponentPrediction(epsilon=eps, tau_pred=1.0 - eps, sigma_pred=0.0)


def quotient_energies(r: GroupSet, h: GroupSet) -> dict[int, int]:
    """Energies of R measured modulo H: tuple sums compared in the quotient.

    This is the factor that makes |H + R| free products multiplicative:
    E_2m(H + R) = |H|^(2m - 1) * E_2m(R mod H), exactly, whenever the
    cosets of R are distinct.
    """
    qspec, project = elementary_quotient(r.spec, h)
    r_bar = GroupSet(qspec, project(r.indices))
    if len(r_bar) != len(r):
        raise ValueError("R does not have distinct cosets modulo H")
    return energy_profile(r_bar)
