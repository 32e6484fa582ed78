"""Exact counting kernels: group convolution, transforms, big-integer reductions.

Three ways to convolve over a finite abelian product group:

* fold_with_set: sparse-dense accumulation, out[x] = sum_{a in S} dense[x - a].
  Exact in int64 with an a-priori overflow guard; cost O(|S| * |Z|).
* wht / iwht: integer Walsh-Hadamard transform for elementary 2-groups.
  Exact; turns convolution into a pointwise product.
* group_fft / group_ifft: floating multidimensional FFT for any product
  group; fast but approximate, callers must check the integrality residual.

Final reductions (sums, sums of squares/powers) go through arbitrary
precision Python integers so no energy-scale product ever wraps.
"""

from __future__ import annotations

import numpy as np

from .errors import OverflowGuardError
from .groups import GroupSpec

INT64_GUARD = 1 << 62


# big-int exact reductions


def exact_sum(arr: np.ndarray) -> int:
    """Exact sum of an integer array, immune to int64 overflow."""
    return _power_sum(arr, 1)


def exact_power_sum(arr: np.ndarray, power: int) -> int:
    """Exact sum of arr**power over all entries."""
    return _power_sum(arr, power)


def _power_sum(arr: np.ndarray, power: int) -> int:
    arr = np.asarray(arr)
    if arr.size == 0:
        return 0
    flat = arr.reshape(-1)
    # value histogram keeps the Python-level work proportional to the number
    # of distinct values, which is tiny for structured counting functions
    lo = int(flat.min())
    hi = int(flat.max())
    if hi - lo <= min(1 << 22, 8 * flat.size):
        hist = np.bincount((flat - lo).astype(np.int64))
        nz = np.nonzero(hist)[0]
        values, counts = nz + lo, hist[nz]
    else:
        values, counts = np.unique(flat, return_counts=True)
    total = 0
    for v, c in zip(values.tolist(), counts.tolist()):
        total += (v**power) * c
    return total


def exact_dot(a: np.ndarray, b: np.ndarray) -> int:
    """Exact sum of a*b for integer arrays."""
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("length mismatch in exact_dot")
    hi = int(a.max(initial=0)) * int(b.max(initial=0)) * a.size if a.size else 0
    if 0 <= hi < INT64_GUARD:
        return int(np.dot(a.astype(np.int64), b.astype(np.int64)))
    return sum(x * y for x, y in zip(a.tolist(), b.tolist()))


# dense translation and sparse-dense folding

_COORD_CACHE: dict[GroupSpec, np.ndarray] = {}


def _all_coords(spec: GroupSpec) -> np.ndarray:
    cached = _COORD_CACHE.get(spec)
    if cached is None:
        cached = spec.decode(np.arange(spec.order, dtype=np.int64))
        cached.setflags(write=False)
        if len(_COORD_CACHE) > 8:
            _COORD_CACHE.clear()
        _COORD_CACHE[spec] = cached
    return cached


def translate_dense(spec: GroupSpec, dense: np.ndarray, shift_index: int) -> np.ndarray:
    """out[x] = dense[x - shift]; one gather pass."""
    if spec.is_elementary_two:
        perm = np.arange(spec.order, dtype=np.int64) ^ np.int64(shift_index)
        return dense[perm]
    coords = _all_coords(spec)
    shift = spec.decode(np.asarray([shift_index], dtype=np.int64))[0]
    src = spec.encode((coords - shift) % spec._factors_arr)
    return dense[src]


def fold_with_set(spec: GroupSpec, dense: np.ndarray, set_indices: np.ndarray) -> np.ndarray:
    """Exact group convolution of a dense integer function with a set indicator.

    out[x] = sum_{a in S} dense[x - a].  Guards against int64 overflow
    before accumulating; refuses rather than wrapping.
    """
    dense = np.asarray(dense, dtype=np.int64)
    set_indices = np.asarray(set_indices, dtype=np.int64)
    bound = int(dense.max(initial=0)) * max(int(set_indices.size), 1)
    if bound >= INT64_GUARD or int(dense.min(initial=0)) < 0:
        raise OverflowGuardError(
            f"fold bound {bound} would overflow the int64 accumulator; "
            "split the computation or reduce the set"
        )
    if spec.is_elementary_two and set_indices.size > 4 * max(spec.rank, 1):
        return _fold_wht(spec, dense, set_indices)
    out = np.zeros(spec.order, dtype=np.int64)
    if spec.is_elementary_two:
        base = np.arange(spec.order, dtype=np.int64)
        for a in set_indices:
            out += dense[base ^ a]
        return out
    coords = _all_coords(spec)
    factors = spec._factors_arr
    shifts = spec.decode(set_indices)
    for shift in shifts:
        src = spec.encode((coords - shift) % factors)
        out += dense[src]
    return out


def _fold_wht(spec: GroupSpec, dense: np.ndarray, set_indices: np.ndarray) -> np.ndarray:
    ind = np.zeros(spec.order, dtype=np.int64)
    ind[set_indices] = 1
    fd = wht(spec, dense)
    fi = wht(spec, ind)
    prod_bound = int(np.abs(fd).max(initial=0)) * int(np.abs(fi).max(initial=0))
    if prod_bound >= INT64_GUARD:
        raise OverflowGuardError("transform product would overflow int64")
    prod = fd * fi
    if int(np.abs(prod).max(initial=0)) * spec.order >= INT64_GUARD:
        raise OverflowGuardError("inverse transform accumulation would overflow int64")
    return iwht(spec, prod)


# integer Walsh-Hadamard transform (elementary 2-groups only)


def wht(spec: GroupSpec, arr: np.ndarray) -> np.ndarray:
    """Unnormalized integer WHT: F(xi) = sum_x f(x) * (-1)^(xi . x)."""
    if not spec.is_elementary_two:
        raise ValueError("integer WHT needs an elementary 2-group")
    a = np.array(arr, dtype=np.int64)
    n = spec.order
    if a.size != n:
        raise ValueError("array length does not match the group order")
    # conservative float bound on sum |a|; every butterfly intermediate is
    # a signed partial sum of the input, so this dominates all of them
    bound = float(np.abs(a).sum(dtype=np.float64))
    if bound >= float(1 << 61):
        raise OverflowGuardError("WHT intermediates would overflow int64")
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        lo = a[:, 0, :] + a[:, 1, :]
        hi = a[:, 0, :] - a[:, 1, :]
        a = np.stack((lo, hi), axis=1)
        h *= 2
    return a.reshape(n)


def iwht(spec: GroupSpec, arr: np.ndarray) -> np.ndarray:
    """Inverse of wht; asserts exact divisibility by |Z|."""
    out = wht(spec, arr)
    q, r = np.divmod(out, spec.order)
    if np.any(r):
        raise ArithmeticError("inverse WHT is not integral; inputs were not a transform pair")
    return q


# floating transform over any product group


def group_fft(spec: GroupSpec, arr: np.ndarray) -> np.ndarray:
    """Multidimensional DFT matching the canonical index layout (flat in, flat out)."""
    shaped = np.asarray(arr, dtype=np.complex128).reshape(spec.dense_shape)
    return np.fft.fftn(shaped).reshape(spec.order)


def group_ifft(spec: GroupSpec, arr: np.ndarray) -> np.ndarray:
    shaped = np.asarray(arr, dtype=np.complex128).reshape(spec.dense_shape)
    return np.fft.ifftn(shaped).reshape(spec.order)


def fft_convolve_counts(spec: GroupSpec, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Convolve two nonnegative integer functions via FFT.

    Returns (rounded integer array, max residual to the nearest integer).
    The caller decides whether the residual is acceptable; 0.25 is the
    package-wide refusal threshold.
    """
    fa = group_fft(spec, a)
    fb = group_fft(spec, b)
    conv = group_ifft(spec, fa * fb).real
    rounded = np.rint(conv)
    residual = float(np.abs(conv - rounded).max(initial=0.0))
    return rounded.astype(np.int64), residual


def pairwise_diff_indices(spec: GroupSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Flat array of canonical indices of x - y over the cross product."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if spec.is_elementary_two:
        return (a[:, None] ^ b[None, :]).reshape(-1)
    ca = spec.decode(a)
    cb = spec.decode(b)
    diff = (ca[:, None, :] - cb[None, :, :]) % spec._factors_arr
    return spec.encode(diff.reshape(-1, spec.rank))


def pairwise_sum_indices(spec: GroupSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if spec.is_elementary_two:
        return (a[:, None] ^ b[None, :]).reshape(-1)
    ca = spec.decode(a)
    cb = spec.decode(b)
    s = (ca[:, None, :] + cb[None, :, :]) % spec._factors_arr
    return spec.encode(s.reshape(-1, spec.rank))
