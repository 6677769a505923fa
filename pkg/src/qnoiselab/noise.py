"""Gaussian (Ornstein-Uhlenbeck) noise on input matrices and its effect on BosonSampling.

The noise replaces a matrix ``M`` by ``sqrt(1-eps) M + sqrt(eps) G`` with ``G``
a fresh standard complex Gaussian matrix. It keeps the Gaussian ensemble
stationary and damps every degree-k Hermite component by ``(1-eps)^(k/2)``.
"""
import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from numpy.polynomial import hermite_e

from .errors import DegenerateInputError, InvalidArgumentError
from .limits import HERMITE_MAX_DEGREE
from .matrix import as_matrix, gaussian_matrix, haar_rows
from .rng import substream
from .sampling import (
    OutcomeDistribution,
    boson_distribution,
    clean_probs,
    multiset_tree,
    noisy_boson_moments,
)

__all__ = [
    "check_epsilon",
    "apply_matrix_noise",
    "noisy_boson_distribution",
    "distribution_correlation",
    "total_variation",
    "HermiteDamping",
    "hermite_damping_check",
    "SensitivityCurve",
    "sensitivity_sweep",
    "columns_for",
    "ENSEMBLES",
]

MIN_MC = 100


def check_epsilon(eps):
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise InvalidArgumentError(f"noise level must lie in [0, 1], got {eps}")
    return eps


def apply_matrix_noise(m, eps, rng):
    """One draw of ``sqrt(1-eps) M + sqrt(eps) G``; exactly ``M`` at eps = 0."""
    eps = check_epsilon(eps)
    m = as_matrix(m)
    if eps == 0.0:
        return m.copy()
    g = gaussian_matrix(*m.shape, rng)
    if eps == 1.0:
        return g
    return np.sqrt(1.0 - eps) * m + np.sqrt(eps) * g


def _orthonormal_rows(b):
    q, r = np.linalg.qr(b.T)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return q.T


def noisy_boson_distribution(m, eps, mc, rng, renormalize=False):
    """Boson distribution averaged over ``mc`` noisy copies of ``m``.

    With ``renormalize`` each noisy copy gets its rows re-orthonormalized
    (Gram-Schmidt order) so every draw is a normalized distribution.
    Otherwise the average is reported as-is, with ``normalized=False``.
    Per-outcome standard errors land in ``meta["stderr"]``.
    """
    eps = check_epsilon(eps)
    m = as_matrix(m)
    mc = int(mc)
    if mc < MIN_MC:
        raise InvalidArgumentError(f"need at least {MIN_MC} Monte Carlo draws, got {mc}")
    n, cols = m.shape
    tree = multiset_tree(n, cols)
    if eps == 0.0:
        d = boson_distribution(m)
        d.meta.update(epsilon=0.0, mc=mc, stderr=np.zeros(len(d)))
        return d
    keep, spread = np.sqrt(1.0 - eps), np.sqrt(eps)
    noise = gaussian_matrix(mc * n, cols, rng).reshape(mc, n, cols)
    if renormalize:
        noisy = np.array([_orthonormal_rows(keep * m + spread * g) for g in noise])
        acc, acc2 = noisy_boson_moments(np.zeros_like(m), noisy, 0.0, 1.0)
    else:
        acc, acc2 = noisy_boson_moments(m, noise, keep, spread)
    mean = acc / mc
    var = np.maximum(acc2 / mc - mean**2, 0.0)
    d = OutcomeDistribution("boson", tree.counts.copy(), clean_probs(mean), normalized=renormalize)
    d.meta.update(epsilon=eps, mc=mc, stderr=np.sqrt(var / (mc - 1)))
    return d


def _same_support(d1, d2):
    if not d1.same_support(d2):
        raise InvalidArgumentError("distributions are over different outcome lists")


def distribution_correlation(d1, d2):
    """Pearson correlation of the two probability vectors."""
    _same_support(d1, d2)
    p, q = d1.probs, d2.probs
    if len(p) < 2:
        raise DegenerateInputError("correlation needs at least two outcomes")
    dp, dq = p - p.mean(), q - q.mean()
    sp, sq = np.sqrt(np.dot(dp, dp)), np.sqrt(np.dot(dq, dq))
    scale_p = max(np.abs(p).max(), 1e-300)
    scale_q = max(np.abs(q).max(), 1e-300)
    if sp <= 1e-14 * scale_p * np.sqrt(len(p)) or sq <= 1e-14 * scale_q * np.sqrt(len(q)):
        raise DegenerateInputError("a probability vector has zero variance")
    return float(np.clip(np.dot(dp, dq) / (sp * sq), -1.0, 1.0))


def total_variation(d1, d2):
    """Half the L1 distance between the probability vectors."""
    _same_support(d1, d2)
    return float(0.5 * np.abs(d1.probs - d2.probs).sum())


# --------------------------------------------------------------------------
# Hermite damping


@dataclass
class HermiteDamping:
    degree: int
    epsilon: float
    estimate: float
    stderr: float
    draws: int

    @property
    def expected(self):
        return (1.0 - self.epsilon) ** (self.degree / 2)

    @property
    def z_score(self):
        if self.stderr == 0:
            return 0.0 if self.estimate == self.expected else np.inf
        return (self.estimate - self.expected) / self.stderr


def hermite_damping_check(k, eps, mc, rng):
    """Monte Carlo estimate of how much the noise damps the degree-k Hermite polynomial.

    Uses ``E[He_k(x) He_k(y)] / k!`` with ``x`` standard normal and
    ``y = sqrt(1-eps) x + sqrt(eps) g``; this equals
    ``E[ E[He_k(y) | x] He_k(x) ] / E[He_k(x)^2]`` and avoids dividing by
    ``He_k(x)`` near its roots.
    """
    k = int(k)
    if not 0 <= k <= HERMITE_MAX_DEGREE:
        raise InvalidArgumentError(f"degree must be in [0, {HERMITE_MAX_DEGREE}], got {k}")
    eps = check_epsilon(eps)
    mc = int(mc)
    if k == 0:
        return HermiteDamping(0, eps, 1.0, 0.0, mc)
    x = rng.standard_normal(mc)
    y = np.sqrt(1.0 - eps) * x + np.sqrt(eps) * rng.standard_normal(mc)
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    z = hermite_e.hermeval(x, coef) * hermite_e.hermeval(y, coef) / factorial(k)
    return HermiteDamping(k, eps, float(z.mean()), float(z.std(ddof=1) / np.sqrt(mc)), mc)


# --------------------------------------------------------------------------
# sensitivity sweep

ENSEMBLES = {
    "gaussian": gaussian_matrix,
    "haar": haar_rows,
}

M_RULES = {
    "2n": lambda n: 2 * n,
    "n2+n": lambda n: n * n + n,
}


def columns_for(n, m_rule):
    if isinstance(m_rule, int):
        return m_rule * n
    try:
        return M_RULES[m_rule](n)
    except KeyError:
        raise InvalidArgumentError(f"unknown column rule {m_rule!r}; use one of {sorted(M_RULES)}") from None


@dataclass
class SensitivityCurve:
    """Mean correlation and TV distance between ideal and noisy boson distributions.

    ``correlations[i, j]`` is for ``n_values[i]`` at nominal noise
    ``epsilon_values[j]``; with ``epsilon_scaling == "inverse_n"`` the applied
    noise is ``epsilon_values[j] / n``. Standard errors are over input matrices.
    """

    n_values: list
    m_values: list
    epsilon_values: list
    epsilon_scaling: str
    correlations: np.ndarray
    mc_stderr: np.ndarray
    tv: np.ndarray
    tv_stderr: np.ndarray
    mc_samples: int
    inputs: int
    ensemble: str
    per_input: np.ndarray = field(default=None, repr=False)

    def applied_epsilon(self, i, j):
        eps = self.epsilon_values[j]
        return eps / self.n_values[i] if self.epsilon_scaling == "inverse_n" else eps

    def rows(self):
        for i, n in enumerate(self.n_values):
            for j in range(len(self.epsilon_values)):
                yield {
                    "n": n,
                    "m": self.m_values[i],
                    "epsilon": self.applied_epsilon(i, j),
                    "correlation": float(self.correlations[i, j]),
                    "tv": float(self.tv[i, j]),
                    "stderr": float(self.mc_stderr[i, j]),
                    "mc_samples": self.mc_samples,
                }

    def to_csv(self):
        buf = io.StringIO()
        cols = ["n", "m", "epsilon", "correlation", "tv", "stderr", "mc_samples"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in self.rows():
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
        return buf.getvalue()


def _normalized(d):
    total = d.total_mass
    return OutcomeDistribution(d.kind, d.outcomes, d.probs / total) if total > 0 else d


def _sweep_unit(ensemble, n, m, index, eps_applied, mc, seed, renormalize):
    m_in = ENSEMBLES[ensemble](n, m, substream(seed, "noise-sweep/input", n, index))
    ideal = boson_distribution(m_in)
    ideal_n = _normalized(ideal)
    corr = np.empty(len(eps_applied))
    tv = np.empty(len(eps_applied))
    for j, eps in enumerate(eps_applied):
        # same draw stream for every eps: common random numbers across the sweep
        rng = substream(seed, "noise-sweep/draws", n, index)
        noisy = noisy_boson_distribution(m_in, eps, mc, rng, renormalize=renormalize)
        corr[j] = 1.0 if eps == 0.0 else distribution_correlation(ideal, noisy)
        tv[j] = total_variation(ideal_n, _normalized(noisy))
    return corr, tv


def sensitivity_sweep(ensemble, n_list, eps_list, mc, seed, inputs=20, m_rule="2n",
                      epsilon_scaling="fixed", renormalize=False, workers=1):
    """Correlation between ideal and noisy boson distributions over random inputs.

    Every (n, input) unit draws its matrix and its noise from substreams
    keyed by ``(seed, n, input index)``, so results do not depend on
    ``workers`` or scheduling.
    """
    if ensemble not in ENSEMBLES:
        raise InvalidArgumentError(f"unknown ensemble {ensemble!r}; use one of {sorted(ENSEMBLES)}")
    if epsilon_scaling not in ("fixed", "inverse_n"):
        raise InvalidArgumentError(f"unknown epsilon scaling {epsilon_scaling!r}")
    if inputs < 2:
        raise InvalidArgumentError("need at least two input matrices for a standard error")
    n_list = [int(n) for n in n_list]
    eps_list = [float(e) for e in eps_list]
    m_list = [columns_for(n, m_rule) for n in n_list]
    applied = []
    for n in n_list:
        row = [e / n if epsilon_scaling == "inverse_n" else e for e in eps_list]
        applied.append([check_epsilon(e) for e in row])
    for n, m in zip(n_list, m_list):
        multiset_tree(n, m)  # builds tables up front and enforces the enumeration cap

    units = [(i, k) for i in range(len(n_list)) for k in range(inputs)]

    def work(unit):
        i, k = unit
        return _sweep_unit(ensemble, n_list[i], m_list[i], k, applied[i], mc, seed, renormalize)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, units))
    else:
        results = [work(u) for u in units]

    shape = (len(n_list), inputs, len(eps_list))
    corr = np.empty(shape)
    tv = np.empty(shape)
    for (i, k), (c, t) in zip(units, results):
        corr[i, k] = c
        tv[i, k] = t
    root = np.sqrt(inputs)
    return SensitivityCurve(
        n_values=n_list,
        m_values=m_list,
        epsilon_values=eps_list,
        epsilon_scaling=epsilon_scaling,
        correlations=corr.mean(axis=1),
        mc_stderr=corr.std(axis=1, ddof=1) / root,
        tv=tv.mean(axis=1),
        tv_stderr=tv.std(axis=1, ddof=1) / root,
        mc_samples=int(mc),
        inputs=int(inputs),
        ensemble=ensemble,
        per_input=corr,
    )
