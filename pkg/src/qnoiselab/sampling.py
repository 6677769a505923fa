"""Exact Fermion-, Boson- and Fourier-sampling distributions by full enumeration."""
import csv
import io
from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement
from math import comb, factorial

import numpy as np

from ._accel import USE_NUMBA, njit
from .errors import InvalidArgumentError, NumericalContractError, SizeLimitError
from .limits import ENUMERATION_CAP, FOURIER_MAX_BITS
from .matrix import as_matrix, determinants_of_columns, permanents_of_columns

__all__ = [
    "OutcomeDistribution",
    "fermion_outcomes",
    "boson_outcomes",
    "fermion_distribution",
    "boson_distribution",
    "boson_probabilities",
    "multiset_permanents",
    "multiset_tree",
    "noisy_boson_moments",
    "sample",
    "fwht",
    "fourier_distribution",
    "dictator",
    "parity",
    "majority",
    "random_boolean_function",
    "clean_probs",
]

NEGATIVE_TOLERANCE = 1e-12


@dataclass
class OutcomeDistribution:
    """Probabilities over an ordered outcome list.

    ``outcomes`` has one row per outcome: repetition counts ``r_1..r_m`` for
    boson/fermion, the 0/1 indicator of the index set for fourier.
    ``total_mass`` is the sum of ``probs``; it differs from 1 only for
    unnormalized inputs, in which case ``normalized`` is False.
    """

    kind: str
    outcomes: np.ndarray
    probs: np.ndarray
    normalized: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.outcomes.ndim != 2 or len(self.outcomes) != len(self.probs):
            raise InvalidArgumentError("outcomes and probs must have matching lengths")

    def __len__(self):
        return len(self.probs)

    @property
    def total_mass(self):
        return float(np.sum(self.probs))

    def same_support(self, other):
        return self.outcomes.shape == other.outcomes.shape and np.array_equal(
            self.outcomes, other.outcomes
        )

    def to_json(self):
        out = {
            "kind": self.kind,
            "outcomes": self.outcomes.tolist(),
            "probs": [float(p) for p in self.probs],
        }
        if not self.normalized:
            out["normalized"] = False
            out["total_mass"] = self.total_mass
        return out

    @classmethod
    def from_json(cls, obj):
        return cls(
            kind=obj["kind"],
            outcomes=np.asarray(obj["outcomes"], dtype=np.int64),
            probs=np.asarray(obj["probs"], dtype=np.float64),
            normalized=obj.get("normalized", True),
        )

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["outcome", "prob"])
        for row, p in zip(self.outcomes, self.probs):
            writer.writerow([" ".join(map(str, row)), repr(float(p))])
        return buf.getvalue()


def clean_probs(probs):
    """Clamp float noise in ``[-1e-12, 0)`` to 0; anything more negative is a kernel bug."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size and probs.min() < -NEGATIVE_TOLERANCE:
        raise NumericalContractError(f"negative probability {probs.min():.3e}")
    return np.where(probs < 0, 0.0, probs)


def _unit_mass(probs, tol=1e-8):
    return bool(abs(probs.sum() - 1.0) <= tol)


def _counts_from_columns(cols, m):
    counts = np.zeros((len(cols), m), dtype=np.int64)
    rows = np.repeat(np.arange(len(cols)), cols.shape[1])
    np.add.at(counts, (rows, cols.ravel()), 1)
    return counts


def _check_enumeration(size, what):
    if size > ENUMERATION_CAP:
        raise SizeLimitError(f"{what} has {size} outcomes, above the cap of {ENUMERATION_CAP}")


def fermion_outcomes(n, m):
    """Lexicographic n-subsets of ``range(m)`` as an index table."""
    _check_enumeration(comb(m, n), "fermion enumeration")
    return np.array(list(combinations(range(m), n)), dtype=np.int64).reshape(-1, n)


def boson_outcomes(n, m):
    """Lexicographic n-multisets of ``range(m)`` as a non-decreasing index table."""
    _check_enumeration(comb(m + n - 1, n), "boson enumeration")
    return np.array(list(combinations_with_replacement(range(m), n)), dtype=np.int64).reshape(-1, n)


def _shape(m):
    m = as_matrix(m)
    n, cols = m.shape
    if n > cols:
        raise InvalidArgumentError(f"need rows <= cols, got {m.shape}")
    return m, n, cols


def fermion_distribution(m):
    """Probability ``|det(submatrix)|^2`` for every n-subset of columns."""
    m, n, ncols = _shape(m)
    cols = fermion_outcomes(n, ncols)
    probs = clean_probs(np.abs(determinants_of_columns(m, cols)) ** 2)
    return OutcomeDistribution("fermion", _counts_from_columns(cols, ncols), probs, _unit_mass(probs))


def _multiplicity_weights(cols, m):
    counts = _counts_from_columns(cols, m)
    fact = np.array([factorial(k) for k in range(cols.shape[1] + 1)], dtype=np.float64)
    return counts, 1.0 / np.prod(fact[counts], axis=1)


# --------------------------------------------------------------------------
# all multiset permanents of one matrix at once
#
# per(A[:k, S]) = sum over distinct c in S of r_c * a[k-1, c] * per(A[:k-1, S - c])
# so level k (multisets of size k on the first k rows) is built from level k-1.
# Cost is about sum_k C(m+k-1, k) * k instead of C(m+n-1, n) * 2^n * n.


class MultisetTree:
    """Parent tables linking each k-multiset to its (k-1)-multiset minors.

    All levels 0..n live in one flat array; ``offsets[k]`` is where level k
    starts. For entry ``s`` at level k, ``parent[s, t]``, ``col[s, t]`` and
    ``mult[s, t]`` describe the t-th distinct column (``mult`` 0 pads).
    The last level is in lexicographic order, matching :func:`boson_outcomes`.
    """

    def __init__(self, n, m):
        self.n, self.m = n, m
        _check_enumeration(comb(m + n - 1, n), "boson enumeration")
        levels = [[()]]
        for k in range(1, n + 1):
            levels.append(list(combinations_with_replacement(range(m), k)))
        sizes = [len(lv) for lv in levels]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        total = int(self.offsets[-1])
        width = max(n, 1)
        self.parent = np.zeros((total, width), dtype=np.int64)
        self.col = np.zeros((total, width), dtype=np.int64)
        self.mult = np.zeros((total, width), dtype=np.float64)
        for k in range(1, n + 1):
            index = {t: i + int(self.offsets[k - 1]) for i, t in enumerate(levels[k - 1])}
            base = int(self.offsets[k])
            for i, t in enumerate(levels[k]):
                slot = 0
                for j, c in enumerate(t):
                    if j and t[j - 1] == c:
                        continue
                    self.parent[base + i, slot] = index[t[:j] + t[j + 1:]]
                    self.col[base + i, slot] = c
                    self.mult[base + i, slot] = t.count(c)
                    slot += 1
        self.cols = np.array(levels[n], dtype=np.int64).reshape(-1, n)
        self.counts, self.weights = _multiplicity_weights(self.cols, m)

    def __len__(self):
        return len(self.cols)


_TREES = {}


def multiset_tree(n, m):
    key = (n, m)
    if key not in _TREES:
        _TREES[key] = MultisetTree(n, m)
    return _TREES[key]


@njit
def _tree_permanents_kernel(a, offsets, parent, col, mult):
    n = offsets.shape[0] - 2
    vals = np.empty(offsets[-1], dtype=np.complex128)
    vals[0] = 1.0
    for k in range(1, n + 1):
        row = k - 1
        for s in range(offsets[k], offsets[k + 1]):
            v = 0.0j
            for t in range(k):
                r = mult[s, t]
                if r == 0.0:
                    break
                v += r * a[row, col[s, t]] * vals[parent[s, t]]
            vals[s] = v
    return vals[offsets[n]:]


@njit
def _noisy_accumulate_kernel(a, noise, keep, spread, offsets, parent, col, mult, weights):
    acc = np.zeros(weights.shape[0], dtype=np.float64)
    acc2 = np.zeros(weights.shape[0], dtype=np.float64)
    for d in range(noise.shape[0]):
        b = keep * a + spread * noise[d]
        vals = _tree_permanents_kernel(b, offsets, parent, col, mult)
        for s in range(weights.shape[0]):
            p = (vals[s].real ** 2 + vals[s].imag ** 2) * weights[s]
            acc[s] += p
            acc2[s] += p * p
    return acc, acc2


def _tree_permanents_numpy(stack, tree):
    # stack: (batch, n, m)
    batch = stack.shape[0]
    vals = np.empty((batch, int(tree.offsets[-1])), dtype=np.complex128)
    vals[:, 0] = 1.0
    for k in range(1, tree.n + 1):
        lo, hi = int(tree.offsets[k]), int(tree.offsets[k + 1])
        v = np.zeros((batch, hi - lo), dtype=np.complex128)
        for t in range(k):
            r = tree.mult[lo:hi, t]
            v += r * stack[:, k - 1, tree.col[lo:hi, t]] * vals[:, tree.parent[lo:hi, t]]
        vals[:, lo:hi] = v
    return vals[:, int(tree.offsets[tree.n]):]


def multiset_permanents(m, use_numba=None):
    """Permanent of the submatrix for every n-multiset of columns, lexicographic order."""
    m, n, ncols = _shape(m)
    tree = multiset_tree(n, ncols)
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return _tree_permanents_kernel(
            np.ascontiguousarray(m), tree.offsets, tree.parent, tree.col, tree.mult
        )
    return _tree_permanents_numpy(m[None], tree)[0]


def noisy_boson_moments(m, noise, keep, spread, use_numba=None):
    """Sum and sum of squares over draws of the boson probabilities of ``keep*m + spread*noise[d]``."""
    m, n, ncols = _shape(m)
    tree = multiset_tree(n, ncols)
    noise = np.ascontiguousarray(noise, dtype=np.complex128)
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return _noisy_accumulate_kernel(
            np.ascontiguousarray(m), noise, float(keep), float(spread),
            tree.offsets, tree.parent, tree.col, tree.mult, tree.weights,
        )
    acc = np.zeros(len(tree))
    acc2 = np.zeros(len(tree))
    chunk = max(1, 2**16 // max(len(tree), 1))
    for lo in range(0, len(noise), chunk):
        stack = keep * m + spread * noise[lo:lo + chunk]
        vals = _tree_permanents_numpy(stack, tree)
        p = (vals.real**2 + vals.imag**2) * tree.weights
        acc += p.sum(axis=0)
        acc2 += (p * p).sum(axis=0)
    return acc, acc2


def boson_probabilities(m, cols, weights, use_numba=None):
    """``|per|^2 / prod r_i!`` for an explicit multiset index table, via Ryser."""
    return np.abs(permanents_of_columns(m, cols, use_numba=use_numba)) ** 2 * weights


def boson_distribution(m):
    """Probability ``|per(submatrix)|^2 / prod r_i!`` for every n-multiset of columns."""
    m, n, ncols = _shape(m)
    tree = multiset_tree(n, ncols)
    probs = clean_probs(np.abs(multiset_permanents(m)) ** 2 * tree.weights)
    return OutcomeDistribution("boson", tree.counts.copy(), probs, _unit_mass(probs))


def sample(d, rng, k):
    """``k`` i.i.d. outcome indices by inverse-CDF sampling.

    Unnormalized distributions are sampled proportionally to their mass.
    """
    if len(d) == 0:
        raise InvalidArgumentError("cannot sample from an empty distribution")
    cdf = np.cumsum(clean_probs(d.probs))
    if cdf[-1] <= 0:
        raise InvalidArgumentError("distribution has no mass")
    u = rng.random(int(k)) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)


# --------------------------------------------------------------------------
# Fourier sampling


@njit
def _fwht_kernel(a):
    a = a.copy()
    h = 1
    size = a.shape[0]
    while h < size:
        for i in range(0, size, 2 * h):
            for j in range(i, i + h):
                x = a[j]
                y = a[j + h]
                a[j] = x + y
                a[j + h] = x - y
        h *= 2
    return a


def _fwht_numpy(a):
    a = a.copy()
    size = a.shape[0]
    h = 1
    while h < size:
        v = a.reshape(-1, 2, h)
        x = v[:, 0, :].copy()
        v[:, 0, :] += v[:, 1, :]
        v[:, 1, :] = x - v[:, 1, :]
        h *= 2
    return a


def fwht(values, use_numba=None):
    """Unnormalized Walsh-Hadamard transform, ``out[S] = sum_x f(x) (-1)^{|S & x|}``."""
    a = np.ascontiguousarray(values, dtype=np.float64)
    if a.ndim != 1 or a.size & (a.size - 1):
        raise InvalidArgumentError("length must be a power of two")
    if use_numba is None:
        use_numba = USE_NUMBA
    return _fwht_kernel(a) if use_numba else _fwht_numpy(a)


def _as_boolean(f):
    f = np.asarray(f)
    n = int(f.size).bit_length() - 1
    if f.ndim != 1 or f.size != 1 << n:
        raise InvalidArgumentError("Boolean function table length must be 2^n")
    if n > FOURIER_MAX_BITS:
        raise SizeLimitError(f"Fourier sampling limited to n <= {FOURIER_MAX_BITS}, got {n}")
    if not np.all((f == 1) | (f == -1)):
        raise InvalidArgumentError("Boolean function values must all be +1 or -1")
    return f.astype(np.float64), n


def fourier_distribution(f):
    """Probability ``fhat(S)^2`` for every index set S, ordered by bitmask.

    ``f[x]`` is the value at the input whose bit ``i`` is ``x_{i+1}``
    (bit 1 meaning coordinate value -1). Parseval makes this sum to 1.
    """
    f, n = _as_boolean(f)
    coeffs = fwht(f) / f.size
    masks = np.arange(f.size, dtype=np.int64)
    outcomes = (masks[:, None] >> np.arange(n)) & 1
    d = OutcomeDistribution("fourier", outcomes.reshape(f.size, n), coeffs**2)
    d.meta["coefficients"] = coeffs
    return d


def _bits(n):
    x = np.arange(1 << n, dtype=np.int64)
    return (x[:, None] >> np.arange(n)) & 1


def dictator(n, i=0):
    return 1 - 2 * _bits(n)[:, i]


def parity(n):
    return 1 - 2 * (_bits(n).sum(axis=1) % 2)


def majority(n):
    if n % 2 == 0:
        raise InvalidArgumentError("majority needs an odd number of bits")
    return np.where((1 - 2 * _bits(n)).sum(axis=1) > 0, 1, -1)


def random_boolean_function(n, rng):
    return np.where(rng.random(1 << n) < 0.5, 1, -1)
