"""Finite abelian groups as explicit products of cyclic factors.

Every group is an ordered product Z_{n_1} x ... x Z_{n_k}; elements are
coordinate vectors with coords[i] in [0, n_i).  All dense arrays in the
package are keyed by the same mixed-radix little-endian index

    index(x) = sum_i x_i * prod_{j<i} n_j,

so a flat array of length |Z| reshaped to (n_k, ..., n_1) in C order puts
factor i on axis k-1-i.  There is no structure-theorem normalization:
two specs are equal iff their factor lists are equal, and an elementary
2-group on n coordinates is spelled as n factors of 2.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DenseCapError, GroupMismatchError

DEFAULT_DENSE_CAP = 1 << 22
MAX_DENSE_CAP = 1 << 26
DENSE_CAP_ENV = "NONSMOOTH_DENSE_CAP"


def dense_cap() -> int:
    """Current dense-operation size cap; NONSMOOTH_DENSE_CAP overrides the default."""
    raw = os.environ.get(DENSE_CAP_ENV)
    if raw is None:
        return DEFAULT_DENSE_CAP
    cap = int(raw)
    if cap < 1 or cap > MAX_DENSE_CAP:
        raise ValueError(f"dense cap must be in [1, {MAX_DENSE_CAP}], got {cap}")
    return cap


def require_dense(spec: "GroupSpec", what: str) -> None:
    cap = dense_cap()
    if spec.order > cap:
        raise DenseCapError(
            f"{what} needs a dense array of length {spec.order}, above the cap {cap} "
            f"(raise {DENSE_CAP_ENV} up to {MAX_DENSE_CAP} if this is intentional)"
        )


@dataclass(frozen=True)
class GroupSpec:
    """An ordered product of cyclic factors."""

    factors: tuple[int, ...]

    def __post_init__(self) -> None:
        fs = tuple(int(n) for n in self.factors)
        if not fs:
            raise ValueError("a group needs at least one cyclic factor")
        if any(n < 2 for n in fs):
            raise ValueError(f"every cyclic factor must be >= 2, got {fs}")
        object.__setattr__(self, "factors", fs)
        order = 1
        for n in fs:
            order *= n
        if order >= 1 << 62:
            raise ValueError(f"group order {order} does not fit the native index type")

    @cached_property
    def order(self) -> int:
        n = 1
        for f in self.factors:
            n *= f
        return n

    @cached_property
    def rank(self) -> int:
        return len(self.factors)

    @cached_property
    def strides(self) -> tuple[int, ...]:
        out = []
        s = 1
        for n in self.factors:
            out.append(s)
            s *= n
        return tuple(out)

    @cached_property
    def is_elementary_two(self) -> bool:
        return all(n == 2 for n in self.factors)

    @cached_property
    def dense_shape(self) -> tuple[int, ...]:
        """Shape so that reshaping a flat canonical array puts factor i on axis k-1-i."""
        return tuple(reversed(self.factors))

    @cached_property
    def _factors_arr(self) -> np.ndarray:
        return np.asarray(self.factors, dtype=np.int64)

    @cached_property
    def _strides_arr(self) -> np.ndarray:
        return np.asarray(self.strides, dtype=np.int64)

    def __str__(self) -> str:
        return format_group(self)

    # scalar element encoding

    def index_of(self, coords: Sequence[int]) -> int:
        if len(coords) != self.rank:
            raise ValueError(f"expected {self.rank} coordinates, got {len(coords)}")
        idx = 0
        for c, n, s in zip(coords, self.factors, self.strides):
            c = int(c)
            if not 0 <= c < n:
                raise ValueError(f"coordinate {c} out of range [0, {n})")
            idx += c * s
        return idx

    def coords_of(self, index: int) -> tuple[int, ...]:
        index = int(index)
        if not 0 <= index < self.order:
            raise ValueError(f"index {index} out of range [0, {self.order})")
        out = []
        for n in self.factors:
            index, c = divmod(index, n)
            out.append(c)
        return tuple(out)

    def element(self, coords: Sequence[int]) -> "GroupElement":
        return GroupElement(self, tuple(int(c) for c in coords))

    def element_at(self, index: int) -> "GroupElement":
        return GroupElement(self, self.coords_of(index))

    def zero(self) -> "GroupElement":
        return GroupElement(self, (0,) * self.rank)

    def dual(self, coords: Sequence[int]) -> "DualElement":
        return DualElement(self, tuple(int(c) for c in coords))

    def elements(self) -> Iterator["GroupElement"]:
        for i in range(self.order):
            yield self.element_at(i)

    # vectorized index arithmetic (int64 arrays of canonical indices)

    def decode(self, idx: np.ndarray) -> np.ndarray:
        """Indices -> coordinate rows, shape (len(idx), rank)."""
        idx = np.asarray(idx, dtype=np.int64)
        out = np.empty(idx.shape + (self.rank,), dtype=np.int64)
        rem = idx
        for i, n in enumerate(self.factors):
            rem, out[..., i] = np.divmod(rem, n)
        return out

    def encode(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        return coords @ self._strides_arr

    def add_indices(self, a: np.ndarray, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if self.is_elementary_two:
            return a ^ np.asarray(b, dtype=np.int64)
        ca = self.decode(a)
        cb = self.decode(np.asarray(b, dtype=np.int64))
        return self.encode((ca + cb) % self._factors_arr)

    def neg_indices(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if self.is_elementary_two:
            return a.copy()
        ca = self.decode(a)
        return self.encode((-ca) % self._factors_arr)

    def sub_indices(self, a: np.ndarray, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if self.is_elementary_two:
            return a ^ np.asarray(b, dtype=np.int64)
        ca = self.decode(a)
        cb = self.decode(np.asarray(b, dtype=np.int64))
        return self.encode((ca - cb) % self._factors_arr)

    def random_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cols = [rng.integers(0, n, size=size, dtype=np.int64) for n in self.factors]
        return self.encode(np.stack(cols, axis=-1))


def _same_spec(a, b) -> None:
    if a.spec != b.spec:
        raise GroupMismatchError(f"operands live in different groups: {a.spec} vs {b.spec}")


@dataclass(frozen=True)
class GroupElement:
    """A group element as a coordinate vector."""

    spec: GroupSpec
    coords: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.coords) != self.spec.rank:
            raise ValueError(f"expected {self.spec.rank} coordinates, got {len(self.coords)}")
        for c, n in zip(self.coords, self.spec.factors):
            if not 0 <= c < n:
                raise ValueError(f"coordinate {c} out of range [0, {n})")

    @cached_property
    def index(self) -> int:
        return self.spec.index_of(self.coords)

    def __add__(self, other: "GroupElement") -> "GroupElement":
        _same_spec(self, other)
        coords = tuple((a + b) % n for a, b, n in zip(self.coords, other.coords, self.spec.factors))
        return GroupElement(self.spec, coords)

    def __neg__(self) -> "GroupElement":
        return GroupElement(self.spec, tuple((-a) % n for a, n in zip(self.coords, self.spec.factors)))

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return self + (-other)

    def __mul__(self, k: int) -> "GroupElement":
        return GroupElement(self.spec, tuple((a * int(k)) % n for a, n in zip(self.coords, self.spec.factors)))

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)


@dataclass(frozen=True)
class DualElement:
    """A character, identified by its frequency vector."""

    spec: GroupSpec
    coords: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.coords) != self.spec.rank:
            raise ValueError(f"expected {self.spec.rank} coordinates, got {len(self.coords)}")
        for c, n in zip(self.coords, self.spec.factors):
            if not 0 <= c < n:
                raise ValueError(f"coordinate {c} out of range [0, {n})")

    @cached_property
    def index(self) -> int:
        return self.spec.index_of(self.coords)


def pairing(x: GroupElement, xi: DualElement) -> Fraction:
    """Exact phase of the bilinear pairing, as a rational in [0, 1).

    The character value is exp(2*pi*i * pairing(x, xi)); the phase is
    sum_i x_i * xi_i / n_i mod 1, which is bilinear and nondegenerate.
    """
    _same_spec(x, xi)
    total = Fraction(0)
    for a, b, n in zip(x.coords, xi.coords, x.spec.factors):
        total += Fraction(a * b, n)
    return total % 1


def character_value(x: GroupElement, xi: DualElement) -> complex:
    import cmath

    return cmath.exp(2j * cmath.pi * float(pairing(x, xi)))


class GroupSet:
    """An immutable subset of a group, stored as sorted deduplicated indices."""

    __slots__ = ("spec", "indices", "symmetric")

    def __init__(self, spec: GroupSpec, indices, *, _sorted_unique: bool = False):
        arr = np.asarray(indices, dtype=np.int64)
        if arr.ndim != 1:
            arr = arr.reshape(-1)
        if not _sorted_unique:
            if arr.size and (arr.min() < 0 or arr.max() >= spec.order):
                raise ValueError("element index out of range for the group")
            arr = np.unique(arr)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self.spec = spec
        self.indices = arr
        neg = np.sort(spec.neg_indices(arr)) if arr.size else arr
        self.symmetric = bool(arr.size == neg.size and np.array_equal(arr, neg))

    # construction helpers

    @classmethod
    def from_coords(cls, spec: GroupSpec, rows: Iterable[Sequence[int]]) -> "GroupSet":
        idx = [spec.index_of(row) for row in rows]
        return cls(spec, np.asarray(idx, dtype=np.int64))

    @classmethod
    def from_elements(cls, elements: Iterable[GroupElement]) -> "GroupSet":
        elems = list(elements)
        if not elems:
            raise ValueError("cannot infer the group from an empty element list")
        spec = elems[0].spec
        for e in elems:
            if e.spec != spec:
                raise GroupMismatchError("elements come from different groups")
        return cls(spec, np.asarray([e.index for e in elems], dtype=np.int64))

    @classmethod
    def empty(cls, spec: GroupSpec) -> "GroupSet":
        return cls(spec, np.empty(0, dtype=np.int64), _sorted_unique=True)

    @classmethod
    def full(cls, spec: GroupSpec) -> "GroupSet":
        require_dense(spec, "materializing the full group")
        return cls(spec, np.arange(spec.order, dtype=np.int64), _sorted_unique=True)

    # basics

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self) -> Iterator[GroupElement]:
        for i in self.indices:
            yield self.spec.element_at(int(i))

    def __contains__(self, item) -> bool:
        if isinstance(item, GroupElement):
            _same_spec(self, item)
            item = item.index
        pos = np.searchsorted(self.indices, int(item))
        return bool(pos < self.indices.size and self.indices[pos] == int(item))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GroupSet)
            and self.spec == other.spec
            and np.array_equal(self.indices, other.indices)
        )

    def __hash__(self) -> int:
        return hash((self.spec, self.indices.tobytes()))

    def __repr__(self) -> str:
        return f"GroupSet({self.spec}, {len(self)} elements)"

    def coords_array(self) -> np.ndarray:
        return self.spec.decode(self.indices)

    def contains_indices(self, idx: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.indices, idx)
        pos = np.minimum(pos, max(len(self) - 1, 0))
        if len(self) == 0:
            return np.zeros(np.shape(idx), dtype=bool)
        return self.indices[pos] == idx

    # set algebra (same spec required)

    def union(self, other: "GroupSet") -> "GroupSet":
        _same_spec(self, other)
        return GroupSet(self.spec, np.union1d(self.indices, other.indices), _sorted_unique=True)

    def intersect(self, other: "GroupSet") -> "GroupSet":
        _same_spec(self, other)
        return GroupSet(self.spec, np.intersect1d(self.indices, other.indices), _sorted_unique=True)

    def difference(self, other: "GroupSet") -> "GroupSet":
        _same_spec(self, other)
        return GroupSet(self.spec, np.setdiff1d(self.indices, other.indices), _sorted_unique=True)

    def translate(self, by: GroupElement) -> "GroupSet":
        _same_spec(self, by)
        return GroupSet(self.spec, np.sort(self.spec.add_indices(self.indices, by.index)), _sorted_unique=True)

    def negated(self) -> "GroupSet":
        return GroupSet(self.spec, np.sort(self.spec.neg_indices(self.indices)), _sorted_unique=True)

    def symmetrized(self) -> "GroupSet":
        if self.symmetric:
            return self
        return self.union(self.negated())

    def indicator(self, dtype=np.int64) -> np.ndarray:
        require_dense(self.spec, "building a set indicator")
        out = np.zeros(self.spec.order, dtype=dtype)
        out[self.indices] = 1
        return out

    def is_subgroup(self) -> bool:
        """Exhaustive closure check; quadratic work, chunked memory."""
        if len(self) == 0 or 0 not in self:
            return False
        if not self.symmetric:
            return False
        idx = self.indices
        chunk = max(1, (1 << 22) // len(self))
        for start in range(0, len(self), chunk):
            block = idx[start : start + chunk]
            sums = self.spec.add_indices(block[:, None], idx[None, :]).reshape(-1)
            if not bool(np.all(self.contains_indices(sums))):
                return False
        return True


def symmetrize(a: GroupSet) -> GroupSet:
    """A united with -A; idempotent, and a no-op on symmetric input."""
    return a.symmetrized()


def span(spec: GroupSpec, generators: Iterable[GroupElement]) -> GroupSet:
    """Smallest subgroup containing the generators (always symmetric).

    Errors out if the subgroup would exceed the dense size cap.
    """
    cap = dense_cap()
    current = np.zeros(1, dtype=np.int64)
    for g in generators:
        if g.spec != spec:
            raise GroupMismatchError("generator from a different group")
        # order of g in the group
        ord_g = 1
        for c, n in zip(g.coords, spec.factors):
            if c:
                d = n // _gcd(c, n)
                ord_g = ord_g * d // _gcd(ord_g, d)
        if ord_g == 1:
            continue
        shifts = [current]
        step = np.int64(0)
        for _ in range(ord_g - 1):
            step = spec.add_indices(step, g.index)
            shifts.append(spec.add_indices(current, step))
        current = np.unique(np.concatenate(shifts))
        if current.size > cap:
            raise DenseCapError(f"span grew past the dense cap {cap}")
    return GroupSet(spec, current, _sorted_unique=True)


def _gcd(a: int, b: int) -> int:
    a, b = int(a), int(b)
    while b:
        a, b = b, a % b
    return a


# group spec grammar: whitespace-insensitive product of atoms, e.g.
#   Z2^12 x Z3^4 x Z/1000
# "Zn^k" expands to k factors of n, "Z/n" and "Zn" are single factors.

_ATOM_POW = re.compile(r"^Z(\d+)\^(\d+)$", re.IGNORECASE)
_ATOM_MOD = re.compile(r"^Z/(\d+)$", re.IGNORECASE)
_ATOM_BARE = re.compile(r"^Z(\d+)$", re.IGNORECASE)


def parse_group(text: str) -> GroupSpec:
    compact = re.sub(r"\s+", "", text)
    if not compact:
        raise ValueError("empty group spec")
    factors: list[int] = []
    for atom in re.split(r"[xX×]", compact):
        if not atom:
            raise ValueError(f"empty atom in group spec {text!r}")
        m = _ATOM_POW.match(atom)
        if m:
            n, k = int(m.group(1)), int(m.group(2))
            if k < 1:
                raise ValueError(f"exponent must be >= 1 in {atom!r}")
            factors.extend([n] * k)
            continue
        m = _ATOM_MOD.match(atom) or _ATOM_BARE.match(atom)
        if m:
            factors.append(int(m.group(1)))
            continue
        raise ValueError(f"unrecognized atom {atom!r} in group spec {text!r}")
    return GroupSpec(tuple(factors))


def format_group(spec: GroupSpec) -> str:
    """Canonical spec string; parse(format(s)) == s."""
    parts = []
    i = 0
    fs = spec.factors
    while i < len(fs):
        j = i
        while j < len(fs) and fs[j] == fs[i]:
            j += 1
        run = j - i
        parts.append(f"Z{fs[i]}^{run}" if run > 1 else f"Z/{fs[i]}")
        i = j
    return " x ".join(parts)


# set file I/O: JSON {"group": "...", "elements": [[...], ...]} or a
# plain-text file with one comma-separated coordinate row per line and a
# "# group: <spec>" header.


def save_set(a: GroupSet, path) -> None:
    path = Path(path)
    if path.suffix == ".txt":
        lines = [f"# group: {format_group(a.spec)}"]
        for row in a.coords_array():
            lines.append(",".join(str(int(c)) for c in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return
    payload = {
        "group": format_group(a.spec),
        "elements": [[int(c) for c in row] for row in a.coords_array()],
    }
    path.write_text(json.dumps(payload, indent=None, separators=(",", ":")) + "\n", encoding="utf-8")


def load_set_with_report(path) -> tuple[GroupSet, int]:
    """Load a set file; returns (set, number_of_duplicate_rows_dropped)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(text)
        if "group" not in payload or "elements" not in payload:
            raise ValueError(f"{path}: set file must carry 'group' and 'elements'")
        spec = parse_group(payload["group"])
        rows = payload["elements"]
    else:
        spec = None
        rows = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*group\s*:\s*(.+)$", line)
                if m:
                    spec = parse_group(m.group(1))
                continue
            rows.append([int(tok) for tok in line.split(",")])
        if spec is None:
            raise ValueError(f"{path}: missing '# group: <spec>' header")
    idx = [spec.index_of(row) for row in rows]
    dup = len(idx) - len(set(idx))
    return GroupSet(spec, np.asarray(idx, dtype=np.int64)), dup


def load_set(path) -> GroupSet:
    a, dup = load_set_with_report(path)
    if dup:
        import warnings

        warnings.warn(f"{path}: dropped {dup} duplicate element(s)", stacklevel=2)
    return a


def elementary_quotient(spec: GroupSpec, h: GroupSet) -> tuple[GroupSpec, "np.ndarray"]:
    """Quotient map modulo a subgroup of an elementary p-group.

    Only supports specs whose factors are all one prime p and subgroups H
    that are actual subspaces.  Returns (quotient_spec, projection) where
    projection maps canonical indices of the big group to canonical indices
    of the quotient, vectorized.  Used by the generator models to measure
    energies of a free factor relative to H.
    """
    p = spec.factors[0]
    if any(n != p for n in spec.factors):
        raise ValueError("quotient map is only implemented for elementary p-groups")
    if h.spec != spec:
        raise GroupMismatchError("subgroup from a different group")
    k = spec.rank
    rows = h.coords_array() % p
    # row-echelon basis of H over GF(p)
    basis: list[np.ndarray] = []
    pivots: list[int] = []
    for row in rows:
        v = row.copy()
        for b, piv in zip(basis, pivots):
            if v[piv] % p:
                v = (v - (v[piv] * _inv_mod(b[piv], p)) % p * b) % p
        nz = np.nonzero(v % p)[0]
        if nz.size:
            basis.append(v % p)
            pivots.append(int(nz[0]))
    # H sits inside the span of its echelon basis; equal sizes force equality,
    # which certifies the subgroup property without a quadratic closure scan
    if (p ** len(basis)) != len(h):
        raise ValueError("the given set is not a subgroup of the elementary p-group")
    free_cols = [i for i in range(k) if i not in pivots]
    if not free_cols:
        qspec = GroupSpec((p,))  # trivial quotient; map everything to 0

        def project_trivial(idx: np.ndarray) -> np.ndarray:
            return np.zeros(np.shape(idx), dtype=np.int64)

        return qspec, project_trivial
    qspec = GroupSpec((p,) * len(free_cols))
    basis_arr = np.stack(basis) if basis else np.zeros((0, k), dtype=np.int64)
    piv_arr = np.asarray(pivots, dtype=np.int64)
    free_arr = np.asarray(free_cols, dtype=np.int64)

    def project(idx: np.ndarray) -> np.ndarray:
        coords = spec.decode(np.asarray(idx, dtype=np.int64)) % p
        for b, piv in zip(basis_arr, piv_arr):
            coef = (coords[..., piv] * _inv_mod(int(b[piv]), p)) % p
            coords = (coords - coef[..., None] * b[None, :]) % p
        return qspec.encode(coords[..., free_arr])

    return qspec, project


def _inv_mod(a: int, p: int) -> int:
    return pow(int(a), p - 2, p)
