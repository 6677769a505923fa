"""Complex matrices: exact determinant/permanent kernels and random ensembles.

Matrices are plain ``complex128`` numpy arrays of shape ``(rows, cols)``.
A column multiset is a length-``cols`` integer array of repetition counts.
"""
from functools import lru_cache
from itertools import permutations

import numpy as np

from ._accel import USE_NUMBA, njit
from .errors import InvalidArgumentError, SizeLimitError
from .limits import NAIVE_MAX_N, RYSER_MAX_N

__all__ = [
    "as_matrix",
    "submatrix",
    "multiset_columns",
    "det_naive",
    "det_lu",
    "per_naive",
    "per_ryser",
    "permanents_of_columns",
    "determinants_of_columns",
    "haar_rows",
    "gaussian_matrix",
    "matrix_to_json",
    "matrix_from_json",
    "worked_example_matrix",
]


def as_matrix(a):
    """Validate and convert to a 2-D finite complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidArgumentError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("matrix contains NaN or Inf")
    return m


def _square(a):
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got {a.shape}")
    return a


def multiset_columns(counts):
    """Column indices of a multiset, repeated and in non-decreasing order."""
    counts = np.asarray(counts)
    if counts.ndim != 1 or np.any(counts < 0):
        raise InvalidArgumentError("multiset counts must be a 1-D array of non-negative integers")
    return np.repeat(np.arange(len(counts)), counts.astype(np.int64))


def submatrix(m, counts):
    """n x n matrix with column ``i`` of ``m`` repeated ``counts[i]`` times."""
    m = as_matrix(m)
    counts = np.asarray(counts)
    if counts.shape != (m.shape[1],):
        raise InvalidArgumentError(
            f"multiset has {counts.size} entries, matrix has {m.shape[1]} columns"
        )
    if counts.sum() != m.shape[0]:
        raise InvalidArgumentError(
            f"multiset size {counts.sum()} does not match row count {m.shape[0]}"
        )
    return m[:, multiset_columns(counts)]


# --------------------------------------------------------------------------
# naive oracles


@lru_cache(maxsize=None)
def _permutation_table(n):
    perms = np.array(list(permutations(range(n))), dtype=np.intp).reshape(-1, n)
    # parity by counting inversions
    inv = np.zeros(len(perms), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            inv += perms[:, i] > perms[:, j]
    signs = np.where(inv % 2 == 0, 1.0, -1.0)
    perms.setflags(write=False)
    signs.setflags(write=False)
    return perms, signs


def _naive_terms(a):
    a = _square(a)
    n = a.shape[0]
    if n > NAIVE_MAX_N:
        raise SizeLimitError(f"naive expansion limited to n <= {NAIVE_MAX_N}, got {n}")
    perms, signs = _permutation_table(n)
    return np.prod(a[np.arange(n), perms], axis=1), signs


def det_naive(a):
    """Determinant by summing over all n! signed permutation products."""
    terms, signs = _naive_terms(a)
    return complex(np.sum(signs * terms))


def per_naive(a):
    """Permanent by summing over all n! permutation products."""
    terms, _ = _naive_terms(a)
    return complex(np.sum(terms))


# --------------------------------------------------------------------------
# fast kernels (numba path)


@njit
def _det_lu_kernel(a):
    a = a.copy()
    n = a.shape[0]
    det = 1.0 + 0.0j
    for k in range(n):
        piv = k
        best = abs(a[k, k])
        for i in range(k + 1, n):
            v = abs(a[i, k])
            if v > best:
                best = v
                piv = i
        if best == 0.0:
            return 0.0j
        if piv != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[piv, j]
                a[piv, j] = tmp
            det = -det
        p = a[k, k]
        det *= p
        for i in range(k + 1, n):
            f = a[i, k] / p
            if f != 0.0:
                for j in range(k + 1, n):
                    a[i, j] -= f * a[k, j]
    return det


@njit
def _ryser_kernel(a):
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    rowsum = np.zeros(n, dtype=np.complex128)
    total = 0.0j
    size = 0
    for k in range(1, 1 << n):
        # Gray code: bit j flips at step k, where j is the lowest set bit of k
        j = 0
        while not (k >> j) & 1:
            j += 1
        if ((k ^ (k >> 1)) >> j) & 1:
            for i in range(n):
                rowsum[i] += a[i, j]
            size += 1
        else:
            for i in range(n):
                rowsum[i] -= a[i, j]
            size -= 1
        prod = 1.0 + 0.0j
        for i in range(n):
            prod *= rowsum[i]
        if (n - size) % 2 == 0:
            total += prod
        else:
            total -= prod
    return total


@njit
def _batch_permanents_kernel(m, cols):
    k_count, n = cols.shape
    out = np.empty(k_count, dtype=np.complex128)
    sub = np.empty((n, n), dtype=np.complex128)
    for k in range(k_count):
        for c in range(n):
            col = cols[k, c]
            for r in range(n):
                sub[r, c] = m[r, col]
        out[k] = _ryser_kernel(sub)
    return out


@njit
def _batch_determinants_kernel(m, cols):
    k_count, n = cols.shape
    out = np.empty(k_count, dtype=np.complex128)
    sub = np.empty((n, n), dtype=np.complex128)
    for k in range(k_count):
        for c in range(n):
            col = cols[k, c]
            for r in range(n):
                sub[r, c] = m[r, col]
        out[k] = _det_lu_kernel(sub)
    return out


# --------------------------------------------------------------------------
# fast kernels (pure numpy path), vectorized over a stack of matrices


@lru_cache(maxsize=None)
def _gray_schedule(n):
    k = np.arange(1, 1 << n, dtype=np.int64)
    low = k & -k
    j = np.log2(low).astype(np.int64)
    add = ((k ^ (k >> 1)) >> j) & 1
    return j, add.astype(bool)


def _ryser_stack_numpy(stack):
    count, n, _ = stack.shape
    if n == 0:
        return np.ones(count, dtype=np.complex128)
    rowsum = np.zeros((count, n), dtype=np.complex128)
    total = np.zeros(count, dtype=np.complex128)
    size = 0
    cols, adds = _gray_schedule(n)
    for j, add in zip(cols, adds):
        if add:
            rowsum += stack[:, :, j]
            size += 1
        else:
            rowsum -= stack[:, :, j]
            size -= 1
        prod = np.ones(count, dtype=np.complex128)
        for i in range(n):
            prod *= rowsum[:, i]
        if (n - size) % 2 == 0:
            total += prod
        else:
            total -= prod
    return total


def _det_lu_stack_numpy(stack):
    a = stack.copy()
    count, n, _ = a.shape
    det = np.ones(count, dtype=np.complex128)
    idx = np.arange(count)
    for k in range(n):
        piv = k + np.argmax(np.abs(a[:, k:, k]), axis=1)
        swap = piv != k
        if np.any(swap):
            rows_k = a[idx[swap], k, :].copy()
            a[idx[swap], k, :] = a[idx[swap], piv[swap], :]
            a[idx[swap], piv[swap], :] = rows_k
            det[swap] = -det[swap]
        p = a[:, k, k]
        singular = p == 0
        det = np.where(singular, 0.0, det * p)
        safe = np.where(singular, 1.0, p)
        f = a[:, k + 1:, k] / safe[:, None]
        a[:, k + 1:, k + 1:] -= f[:, :, None] * a[:, None, k, k + 1:]
    return det


def _ryser_one(a):
    if USE_NUMBA:
        return complex(_ryser_kernel(a))
    return complex(_ryser_stack_numpy(a[None])[0])


def _det_lu_one(a):
    if USE_NUMBA:
        return complex(_det_lu_kernel(a))
    return complex(_det_lu_stack_numpy(a[None])[0])


def det_lu(a):
    """Determinant by partial-pivoted Gaussian elimination."""
    return _det_lu_one(_square(a))


def per_ryser(a):
    """Permanent by Ryser's inclusion-exclusion with Gray-code subset order.

    Cost is O(2^n * n). The summation order is the fixed Gray-code sequence,
    so results are bit-reproducible.
    """
    a = _square(a)
    if a.shape[0] > RYSER_MAX_N:
        raise SizeLimitError(f"per_ryser limited to n <= {RYSER_MAX_N}, got {a.shape[0]}")
    return _ryser_one(a)


def _check_cols(m, cols):
    m = as_matrix(m)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    if cols.ndim != 2 or cols.shape[1] != m.shape[0]:
        raise InvalidArgumentError("column table must have shape (count, rows)")
    if cols.size and (cols.min() < 0 or cols.max() >= m.shape[1]):
        raise InvalidArgumentError("column index out of range")
    return np.ascontiguousarray(m), cols


def permanents_of_columns(m, cols, use_numba=None):
    """Permanent of ``m[:, cols[k]]`` for every row ``k`` of the index table."""
    m, cols = _check_cols(m, cols)
    if m.shape[0] > RYSER_MAX_N:
        raise SizeLimitError(f"per_ryser limited to n <= {RYSER_MAX_N}, got {m.shape[0]}")
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return _batch_permanents_kernel(m, cols)
    return _ryser_stack_numpy(m[:, cols].transpose(1, 0, 2))


def determinants_of_columns(m, cols, use_numba=None):
    """Determinant of ``m[:, cols[k]]`` for every row ``k`` of the index table."""
    m, cols = _check_cols(m, cols)
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return _batch_determinants_kernel(m, cols)
    return _det_lu_stack_numpy(m[:, cols].transpose(1, 0, 2))


# --------------------------------------------------------------------------
# ensembles


def haar_rows(n, m, rng):
    """First ``n`` rows of a Haar-random ``m x m`` unitary.

    QR of a complex Ginibre matrix, with the phases of R's diagonal folded
    back into Q so the distribution is exactly Haar.
    """
    if n < 1 or m < 1:
        raise InvalidArgumentError("dimensions must be positive")
    if n > m:
        raise InvalidArgumentError(f"need n <= m for orthonormal rows, got n={n}, m={m}")
    z = gaussian_matrix(m, m, rng)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return np.ascontiguousarray(q[:n])


def gaussian_matrix(n, m, rng):
    """i.i.d. standard complex Gaussian entries, E|a|^2 = 1."""
    if n < 1 or m < 1:
        raise InvalidArgumentError("dimensions must be positive")
    z = rng.standard_normal((n, m, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


# --------------------------------------------------------------------------
# serialization


def matrix_to_json(m):
    m = as_matrix(m)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in m.ravel()],
    }


def matrix_from_json(obj):
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"malformed matrix object: {exc}") from None
    arr = np.asarray(entries, dtype=np.float64)
    if arr.shape != (rows * cols, 2):
        raise InvalidArgumentError(
            f"expected {rows * cols} [re, im] pairs, got array of shape {arr.shape}"
        )
    return as_matrix((arr[:, 0] + 1j * arr[:, 1]).reshape(rows, cols))


def worked_example_matrix():
    """The 2 x 3 worked example with orthonormal rows."""
    s3, s2 = np.sqrt(3.0), np.sqrt(2.0)
    return np.array(
        [[1 / s3, 1j / s3, 1 / s3], [0.0, 1 / s2, 1j / s2]], dtype=np.complex128
    )
