"""Sampled qubit-corruption events: trajectories, error synchronization and fluctuation scaling.

A corruption event fully depolarizes one qubit for one cycle. On a pure-state
trajectory it is unravelled as a uniformly random Pauli (I, X, Y or Z),
whose average is exactly the maximally mixed qubit.

Correlated events across N qubits use a Gaussian copula: qubit q is
corrupted when ``sqrt(c) W + sqrt(1-c) Z_q < Phi^{-1}(p)``, with W shared and
Z_q independent. The latent correlation ``c`` is solved so that every pair
of events has the requested correlation.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .circuit import PAULI, Circuit, CorrelatedNoiseSpec, apply_gate, apply_operator, basis_state, run_circuit
from .errors import DegenerateInputError, InvalidArgumentError, SizeLimitError
from .limits import PURE_MAX_QUBITS

MODELS = ("none", "independent", "pairwise", "all-or-none")


def _joint_below(t, c):
    """P(X < t, Y < t) for standard normals with correlation c >= 0 (Plackett's identity)."""
    base = special.ndtr(t) ** 2
    if c == 0:
        return base
    f = lambda r: np.exp(-t * t / (1 + r)) / (2 * np.pi * np.sqrt(1 - r * r))
    return base + integrate.quad(f, 0.0, c, limit=200)[0]


def latent_correlation(p, cor):
    """Latent copula correlation giving events of rate ``p`` pairwise correlation ``cor``."""
    if not 0 < p < 1:
        raise DegenerateInputError("rate must lie strictly between 0 and 1")
    if not 0 <= cor <= 1:
        raise InvalidArgumentError(f"pairwise correlation must lie in [0, 1], got {cor}")
    if cor == 0:
        return 0.0
    if cor == 1:
        return 1.0
    t = special.ndtri(p)
    target = p * p + cor * p * (1 - p)
    return optimize.brentq(lambda c: _joint_below(t, c) - target, 0.0, 1.0 - 1e-15, xtol=1e-14)


@dataclass(frozen=True)
class NoiseModel:
    """Per-cycle corruption law: ``rate`` per qubit, ``correlation`` between any two qubits."""

    name: str
    rate: float = 0.0
    correlation: float = 0.0

    def __post_init__(self):
        if self.name not in MODELS:
            raise InvalidArgumentError(f"unsupported noise model {self.name!r}; use one of {MODELS}")
        if not 0 <= self.rate <= 1:
            raise InvalidArgumentError(f"rate must lie in [0, 1], got {self.rate}")
        if not 0 <= self.correlation <= 1:
            raise InvalidArgumentError(f"correlation must lie in [0, 1], got {self.correlation}")

    @classmethod
    def from_spec(cls, spec):
        """Pairwise model reproducing a symmetric two-qubit ``CorrelatedNoiseSpec`` on every pair."""
        from .circuit import error_correlation

        if abs(spec.r1 - spec.r2) > 1e-12:
            raise InvalidArgumentError("pairwise model needs equal marginal rates")
        return cls("pairwise", spec.r1, float(error_correlation(spec)))

    def pair_spec(self, targets=(0, 1)):
        return CorrelatedNoiseSpec.symmetric(self.rate, self.effective_correlation, targets)

    @property
    def effective_correlation(self):
        return {"none": 0.0, "independent": 0.0, "all-or-none": 1.0}.get(self.name, self.correlation)


def sample_error_events(model, n_qubits, shape, rng):
    """Boolean array ``shape + (n_qubits,)``, True where a qubit is corrupted."""
    shape = tuple(shape)
    p = model.rate
    if model.name == "none" or p == 0:
        return np.zeros(shape + (n_qubits,), dtype=bool)
    if p == 1:
        return np.ones(shape + (n_qubits,), dtype=bool)
    if model.name == "independent":
        return rng.random(shape + (n_qubits,)) < p
    if model.name == "all-or-none":
        hit = rng.random(shape) < p
        return np.repeat(hit[..., None], n_qubits, axis=-1)
    c = latent_correlation(p, model.correlation)
    t = special.ndtri(p)
    shared = rng.standard_normal(shape + (1,))
    own = rng.standard_normal(shape + (n_qubits,))
    return np.sqrt(c) * shared + np.sqrt(1 - c) * own < t


@dataclass
class ErrorTrace:
    """``masks[trial, cycle, qubit]`` is True when that qubit was corrupted."""

    masks: np.ndarray

    @property
    def counts(self):
        return self.masks.sum(axis=-1)

    def is_empty(self):
        return not self.masks.any()

    def raw_rate(self):
        return float(self.masks.mean()) if self.masks.size else 0.0

    def survival_rate(self):
        """Corruption probability per cycle given the qubit was not corrupted before."""
        m = self.masks
        if m.size == 0:
            return 0.0
        before = np.cumsum(m, axis=1) - m
        alive = before == 0
        first = m & alive
        exposed = alive.sum()
        return float(first.sum() / exposed) if exposed else 0.0

    def summary(self):
        counts = self.counts.ravel()
        n = self.masks.shape[-1]
        return {
            "trials": int(self.masks.shape[0]),
            "cycles": int(self.masks.shape[1]),
            "n_qubits": int(n),
            "mean_corrupted": float(counts.mean()),
            "std_corrupted": float(counts.std(ddof=1)) if counts.size > 1 else 0.0,
            "mean_corrupted_stderr": float(counts.std(ddof=1) / np.sqrt(counts.size)) if counts.size > 1 else 0.0,
            "raw_rate": self.raw_rate(),
            "survival_rate": self.survival_rate(),
            "count_histogram": np.bincount(counts, minlength=n + 1).tolist(),
        }

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trial", "cycle", "corrupted_count", "corrupted_mask_hex"])
        weights = [1 << q for q in range(self.masks.shape[-1])]
        for trial in range(self.masks.shape[0]):
            for cycle in range(self.masks.shape[1]):
                row = self.masks[trial, cycle]
                mask = sum(w for w, hit in zip(weights, row) if hit)
                writer.writerow([trial, cycle, int(row.sum()), format(mask, "x")])
        return buf.getvalue()


@dataclass
class TrajectoryResult:
    trace: ErrorTrace
    fidelities: np.ndarray = field(repr=False)

    @property
    def mean_fidelity(self):
        return float(self.fidelities.mean())

    @property
    def fidelity_stderr(self):
        f = self.fidelities
        return float(f.std(ddof=1) / np.sqrt(len(f))) if len(f) > 1 else 0.0

    def summary(self):
        out = self.trace.summary()
        out["mean_fidelity"] = self.mean_fidelity
        out["mean_fidelity_stderr"] = self.fidelity_stderr
        return out


_PAULI_LIST = [PAULI[a] for a in "ixyz"]


def run_noisy_trajectories(c, model, trials, rng, simulate_state=True):
    """Sample corruption events after every gate and, optionally, the resulting pure states.

    The mask is recorded bit 0 = qubit 0. Fidelity is ``|<ideal|final>|^2``.
    """
    if not isinstance(c, Circuit):
        raise InvalidArgumentError("expected a Circuit")
    if c.n_qubits > PURE_MAX_QUBITS:
        raise SizeLimitError(f"trajectories limited to {PURE_MAX_QUBITS} qubits")
    trials = int(trials)
    masks = sample_error_events(model, c.n_qubits, (trials, len(c.steps)), rng)
    trace = ErrorTrace(masks)
    if not simulate_state:
        return TrajectoryResult(trace, np.full(trials, np.nan))
    ideal = run_circuit(c)
    paulis = rng.integers(0, 4, size=masks.shape)
    fid = np.empty(trials)
    for trial in range(trials):
        psi = basis_state(c.n_qubits)
        for step, g in enumerate(c.steps):
            psi = apply_gate(psi, g)
            for q in np.flatnonzero(masks[trial, step]):
                k = paulis[trial, step, q]
                if k:
                    psi = apply_operator(psi, _PAULI_LIST[k], (int(q),))
        fid[trial] = abs(np.vdot(ideal, psi)) ** 2
    return TrajectoryResult(trace, fid)


@dataclass
class FluctuationTable:
    model: NoiseModel
    sizes: list
    std: list
    mean: list
    exponent: float

    def rows(self):
        for N, s, m in zip(self.sizes, self.std, self.mean):
            yield {"N": N, "std": s, "mean": m, "fitted_exponent": self.exponent}


def fluctuation_scaling(model, sizes, trials, rng):
    """Standard deviation of the per-cycle corrupted count versus N, and its log-log slope."""
    sizes = [int(N) for N in sizes]
    if sizes != sorted(sizes) or len(set(sizes)) != len(sizes):
        raise InvalidArgumentError("sizes must be strictly ascending")
    if len(sizes) < 2:
        raise InvalidArgumentError("need at least two sizes to fit an exponent")
    stds, means = [], []
    for N in sizes:
        counts = sample_error_events(model, N, (int(trials),), rng).sum(axis=-1)
        stds.append(float(counts.std(ddof=1)))
        means.append(float(counts.mean()))
    if min(stds) <= 0:
        raise DegenerateInputError("corrupted count has zero spread; exponent undefined")
    slope = np.polyfit(np.log(sizes), np.log(stds), 1)[0]
    return FluctuationTable(model, sizes, stds, means, float(slope))
