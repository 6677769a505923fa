"""Brute-force references, deliberately independent of the library kernels."""
from itertools import combinations_with_replacement, permutations, product
from math import factorial, log2

import numpy as np


def permanent_by_definition(a):
    n = len(a)
    return sum(np.prod([a[i][p[i]] for i in range(n)]) for p in permutations(range(n)))


def annealed_noisy_permanent_sq(a, cols, keep, spread):
    """E_G |per((keep*M + spread*G)[:, cols])|^2, summed over permutation pairs.

    ``a`` is the noiseless submatrix, ``cols`` the underlying column of each
    position; noise entries of the same underlying column coincide.
    """
    n = len(a)
    total = 0.0
    for p in permutations(range(n)):
        for q in permutations(range(n)):
            term = 1.0 + 0.0j
            for i in range(n):
                t = keep**2 * a[i][p[i]] * np.conj(a[i][q[i]])
                if cols[p[i]] == cols[q[i]]:
                    t += spread**2
                term *= t
            total += term
    return total.real


def annealed_boson_distribution(m, eps):
    n, ncols = m.shape
    keep, spread = np.sqrt(1 - eps), np.sqrt(eps)
    out = []
    for cols in combinations_with_replacement(range(ncols), n):
        sub = m[:, list(cols)]
        weight = np.prod([factorial(cols.count(c)) for c in set(cols)])
        out.append(annealed_noisy_permanent_sq(sub, cols, keep, spread) / weight)
    return np.array(out)


def walsh_coefficients(values):
    """fhat(S) = 2^-n sum_x f(x) (-1)^{popcount(S & x)}, by direct double loop."""
    size = len(values)
    return np.array(
        [sum(values[x] * (-1) ** bin(s & x).count("1") for x in range(size)) / size for s in range(size)]
    )


def binary_entropy(p):
    return -(p * log2(p) + (1 - p) * log2(1 - p))


def all_bitstrings(n):
    return list(product((0, 1), repeat=n))
