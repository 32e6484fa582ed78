import numpy as np
import pytest

from nonsmooth.groups import GroupSet, GroupSpec


@pytest.fixture
def z10():
    return GroupSpec((10,))


@pytest.fixture
def z2_8():
    return GroupSpec((2,) * 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_set(spec: GroupSpec, size: int, rng: np.random.Generator) -> GroupSet:
    idx = rng.choice(spec.order, size=min(size, spec.order), replace=False)
    return GroupSet(spec, np.asarray(idx, dtype=np.int64))


def random_spec(rng: np.random.Generator, max_order: int = 1 << 12) -> GroupSpec:
    kind = rng.integers(0, 4)
    if kind == 0:
        n = int(rng.integers(3, 13))
        return GroupSpec((2,) * n)
    if kind == 1:
        n = int(rng.integers(2, 8))
        return GroupSpec((3,) * n)
    if kind == 2:
        return GroupSpec((int(rng.integers(8, max_order)),))
    factors = []
    order = 1
    while True:
        n = int(rng.integers(2, 12))
        if order * n > max_order:
            break
        factors.append(n)
        order *= n
        if len(factors) >= 5 and rng.integers(0, 2):
            break
    if not factors:
        factors = [7]
    return GroupSpec(tuple(factors))


@pytest.fixture
def set_012_z10(z10):
    return GroupSet.from_coords(z10, [[0], [1], [2]])
