"""Small exact quantum-circuit simulator: pure states, density matrices, Kraus channels.

Qubit 0 is the most significant bit, so ``|q0 q1 ... q_{n-1}>`` has index
``sum(q_i << (n - 1 - i))``. Pure states are 1-D arrays of length ``2**n``;
density matrices are ``2**n x 2**n`` arrays. Functions return new arrays and
never modify their inputs.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError, NumericalContractError, SizeLimitError
from .limits import DENSITY_MAX_QUBITS, PURE_MAX_QUBITS

SQ2 = np.sqrt(0.5)

PAULI = {
    "i": np.eye(2, dtype=np.complex128),
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

GATES = {
    "h": np.array([[SQ2, SQ2], [SQ2, -SQ2]], dtype=np.complex128),
    "t": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=np.complex128),
    "x": PAULI["x"],
    "y": PAULI["y"],
    "z": PAULI["z"],
    "cnot": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
    ),
}
GATE_ARITY = {"h": 1, "t": 1, "x": 1, "y": 1, "z": 1, "cnot": 2, "u1": 1, "u2": 2}


def _is_unitary(u, tol=1e-10):
    return np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol, rtol=0)


@dataclass(frozen=True)
class Gate:
    name: str
    targets: tuple
    matrix: np.ndarray = field(repr=False)

    @classmethod
    def make(cls, name, targets, matrix=None):
        name = name.lower()
        if name not in GATE_ARITY:
            raise InvalidArgumentError(f"unknown gate {name!r}")
        targets = tuple(int(t) for t in np.atleast_1d(targets))
        if len(targets) != GATE_ARITY[name] or len(set(targets)) != len(targets):
            raise InvalidArgumentError(f"gate {name} needs {GATE_ARITY[name]} distinct targets, got {targets}")
        if name in ("u1", "u2"):
            if matrix is None:
                raise InvalidArgumentError(f"gate {name} needs an explicit matrix")
            u = np.asarray(matrix, dtype=np.complex128)
        else:
            u = GATES[name]
        dim = 1 << len(targets)
        if u.shape != (dim, dim):
            raise InvalidArgumentError(f"gate {name} matrix must be {dim}x{dim}, got {u.shape}")
        if not _is_unitary(u):
            raise InvalidArgumentError(f"gate {name} matrix is not unitary")
        return cls(name, targets, u)

    def inverse(self):
        return Gate("u1" if len(self.targets) == 1 else "u2", self.targets, self.matrix.conj().T)


@dataclass
class Circuit:
    n_qubits: int
    steps: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise InvalidArgumentError("circuit needs at least one qubit")
        for g in self.steps:
            _check_targets(g.targets, self.n_qubits)

    def __len__(self):
        return len(self.steps)

    def inverse(self):
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.steps)])


def _check_targets(targets, n):
    for t in targets:
        if not 0 <= t < n:
            raise InvalidArgumentError(f"qubit index {t} out of range for {n} qubits")


# --------------------------------------------------------------------------
# JSON


def _complex_entries(rows):
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidArgumentError("matrix entries must be [re, im] pairs")
    z = arr[:, 0] + 1j * arr[:, 1]
    dim = int(round(np.sqrt(z.size)))
    if dim * dim != z.size:
        raise InvalidArgumentError("gate matrix must be square")
    return z.reshape(dim, dim)


def circuit_from_json(obj, n_qubits=None):
    """Parse ``[{gate, targets, matrix?}, ...]`` or ``{"n_qubits", "gates"}``."""
    if isinstance(obj, dict):
        n_qubits = obj.get("n_qubits", n_qubits)
        obj = obj.get("gates", [])
    steps = []
    for i, item in enumerate(obj):
        try:
            name, targets = item["gate"], item["targets"]
        except (KeyError, TypeError):
            raise InvalidArgumentError(f"step {i}: needs 'gate' and 'targets'") from None
        matrix = _complex_entries(item["matrix"]) if item.get("matrix") is not None else None
        steps.append(Gate.make(name, targets, matrix))
    if n_qubits is None:
        n_qubits = 1 + max((max(g.targets) for g in steps), default=0)
    return Circuit(int(n_qubits), steps)


def circuit_to_json(c):
    out = []
    for g in c.steps:
        item = {"gate": g.name, "targets": list(g.targets)}
        if g.name in ("u1", "u2"):
            item["matrix"] = [[float(z.real), float(z.imag)] for z in g.matrix.ravel()]
        out.append(item)
    return {"n_qubits": c.n_qubits, "gates": out}


# --------------------------------------------------------------------------
# states


def n_qubits_of(state):
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if dim != 1 << n or state.ndim not in (1, 2) or (state.ndim == 2 and state.shape != (dim, dim)):
        raise InvalidArgumentError(f"not a qubit state: shape {state.shape}")
    return n


def basis_state(n, index=0):
    if n > PURE_MAX_QUBITS:
        raise SizeLimitError(f"pure states limited to {PURE_MAX_QUBITS} qubits")
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[index] = 1.0
    return psi


def density(psi):
    psi = np.asarray(psi, dtype=np.complex128)
    if n_qubits_of(psi) > DENSITY_MAX_QUBITS:
        raise SizeLimitError(f"density matrices limited to {DENSITY_MAX_QUBITS} qubits")
    return np.outer(psi, psi.conj())


def cat_state():
    return np.array([SQ2, 0, 0, SQ2], dtype=np.complex128)


def ghz_state(n):
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[0] = psi[-1] = SQ2
    return psi


def random_pure_state(n, rng):
    z = rng.standard_normal((1 << n, 2)) @ np.array([1, 1j])
    return z / np.linalg.norm(z)


def random_density(n, rng, rank=None):
    dim = 1 << n
    rank = dim if rank is None else rank
    z = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real


def haar_unitary(dim, rng):
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) * SQ2
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def _apply_left(tensor, op, targets, offset=0):
    """Contract ``op`` into the qubit axes ``offset + targets`` of ``tensor``."""
    k = len(targets)
    axes = [offset + t for t in targets]
    op_t = op.reshape((2,) * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def apply_operator(state, op, targets):
    """Apply a (not necessarily unitary) operator on ``targets``: ``A psi`` or ``A rho A^dagger``."""
    state = np.asarray(state, dtype=np.complex128)
    n = n_qubits_of(state)
    _check_targets(targets, n)
    if state.ndim == 1:
        return _apply_left(state.reshape((2,) * n), op, targets).reshape(-1)
    t = state.reshape((2,) * (2 * n))
    t = _apply_left(t, op, targets)
    t = _apply_left(t, op.conj(), targets, offset=n)
    return t.reshape(state.shape)


def apply_gate(state, gate):
    """Apply a gate to a pure state vector or a density matrix."""
    return apply_operator(state, gate.matrix, gate.targets)


def run_circuit(circuit, state=None):
    if state is None:
        state = basis_state(circuit.n_qubits)
    for g in circuit.steps:
        state = apply_gate(state, g)
    return state


def step_unitary(gate, n):
    """Full ``2**n x 2**n`` matrix of a gate tensored with identity elsewhere."""
    ident = np.eye(1 << n, dtype=np.complex128).reshape((2,) * n + (1 << n,))
    return _apply_left(ident, gate.matrix, gate.targets).reshape(1 << n, 1 << n)


def embed(op, targets, n):
    return step_unitary(Gate(name="op", targets=tuple(targets), matrix=op), n)


def random_circuit(n, depth, rng, names=("h", "t", "x", "y", "z", "cnot", "u1", "u2")):
    steps = []
    for _ in range(depth):
        name = names[rng.integers(len(names))]
        arity = GATE_ARITY[name]
        if arity > n:
            name, arity = "u1", 1
        targets = tuple(int(t) for t in rng.choice(n, size=arity, replace=False))
        matrix = haar_unitary(1 << arity, rng) if name in ("u1", "u2") else None
        steps.append(Gate.make(name, targets, matrix))
    return Circuit(n, steps)


# --------------------------------------------------------------------------
# channels


@dataclass
class KrausChannel:
    operators: list
    targets: tuple

    def __post_init__(self):
        self.targets = tuple(int(t) for t in self.targets)
        self.operators = [np.asarray(k, dtype=np.complex128) for k in self.operators]
        dim = 1 << len(self.targets)
        if not self.operators or any(k.shape != (dim, dim) for k in self.operators):
            raise InvalidArgumentError(f"Kraus operators must be {dim}x{dim}")
        err = self.completeness_error()
        if err > 1e-8:
            raise InvalidArgumentError(f"Kraus operators not trace preserving (error {err:.2e})")

    def completeness_error(self):
        total = sum(k.conj().T @ k for k in self.operators)
        return float(np.abs(total - np.eye(total.shape[0])).max())

    def full_operators(self, n):
        return [embed(k, self.targets, n) for k in self.operators]


def depolarizing_channel(qubit, p):
    p = _check_prob(p)
    ops = [np.sqrt(1 - 3 * p / 4) * PAULI["i"]]
    ops += [np.sqrt(p / 4) * PAULI[a] for a in "xyz"]
    return KrausChannel(ops, (qubit,))


def apply_channel(rho, channel):
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2:
        raise InvalidArgumentError("channels act on density matrices")
    return sum(apply_operator(rho, k, channel.targets) for k in channel.operators)


def _check_prob(p):
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"probability must lie in [0, 1], got {p}")
    return p


def fully_depolarize(rho, qubits):
    """Replace the given qubits by the maximally mixed state (partial trace, then I/2)."""
    rho = np.asarray(rho, dtype=np.complex128)
    n = n_qubits_of(rho)
    _check_targets(qubits, n)
    t = rho.reshape((2,) * (2 * n))
    for q in qubits:
        red = np.trace(t, axis1=q, axis2=n + q)
        t = np.moveaxis(np.multiply.outer(red, np.eye(2) / 2), [-2, -1], [q, n + q])
    return t.reshape(rho.shape)


def depolarize(rho, qubit, p):
    """``(1-p) rho + p (I/2 on qubit) x Tr_qubit(rho)``."""
    p = _check_prob(p)
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2:
        raise InvalidArgumentError("depolarize acts on density matrices")
    return (1 - p) * rho + p * fully_depolarize(rho, [qubit])


@dataclass(frozen=True)
class CorrelatedNoiseSpec:
    """Joint corruption law of two qubits.

    ``p10`` is the probability that only the first target is corrupted,
    ``p01`` only the second.
    """

    p00: float
    p01: float
    p10: float
    p11: float
    targets: tuple = (0, 1)

    def __post_init__(self):
        ps = np.array([self.p00, self.p01, self.p10, self.p11], dtype=float)
        if np.any(ps < 0) or abs(ps.sum() - 1) > 1e-12:
            raise InvalidArgumentError(f"corruption probabilities must be >= 0 and sum to 1, got {ps.tolist()}")
        if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
            raise InvalidArgumentError("correlated noise needs two distinct target qubits")

    @property
    def r1(self):
        return self.p10 + self.p11

    @property
    def r2(self):
        return self.p01 + self.p11

    @classmethod
    def independent(cls, r1, r2, targets=(0, 1)):
        return cls((1 - r1) * (1 - r2), (1 - r1) * r2, r1 * (1 - r2), r1 * r2, targets)

    @classmethod
    def all_or_none(cls, r, targets=(0, 1)):
        return cls(1 - r, 0.0, 0.0, r, targets)

    @classmethod
    def symmetric(cls, r, cor, targets=(0, 1)):
        """Both marginals ``r`` with event correlation ``cor``."""
        p11 = r * r + cor * r * (1 - r)
        return cls(1 - 2 * r + p11, r - p11, r - p11, p11, targets)


def correlated_depolarize(rho, spec):
    """Mixture over the four corruption events, each fully depolarizing its qubits."""
    rho = np.asarray(rho, dtype=np.complex128)
    a, b = spec.targets
    return (
        spec.p00 * rho
        + spec.p10 * fully_depolarize(rho, [a])
        + spec.p01 * fully_depolarize(rho, [b])
        + spec.p11 * fully_depolarize(rho, [a, b])
    )


def error_correlation(spec):
    """Pearson correlation of the two corruption indicator events."""
    r1, r2 = spec.r1, spec.r2
    if not (0 < r1 < 1 and 0 < r2 < 1):
        raise DegenerateInputError("corruption rates must lie strictly between 0 and 1")
    # p11 - r1 r2 rewritten as a 2x2 determinant (uses sum of p = 1)
    a, b = spec.p11 * spec.p00, spec.p10 * spec.p01
    num = a - b
    if abs(num) <= 4 * np.finfo(float).eps * max(a, b):
        return 0.0
    if r1 == r2:
        den = r1 * (1 - r1)
    else:
        den = np.sqrt(r1 * (1 - r1) * r2 * (1 - r2))
    return float(np.clip(num / den, -1.0, 1.0))


@dataclass(frozen=True)
class NoisyCatConfig:
    """Bound function ``K(x, y) = min(x, y) ** alpha``; alpha in (1, 2) keeps K / min^2 unbounded near 0."""

    alpha: float = 1.5

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise InvalidArgumentError(f"alpha must lie in (1, 2), got {self.alpha}")

    def K(self, x, y):
        return min(x, y) ** self.alpha


@dataclass(frozen=True)
class NoisyCatVerdict:
    passed: bool
    margin: float
    correlation: float
    bound: float


def noisy_cat_check(ent, spec, cfg=None):
    """Check ``cor(E1, E2) >= K(r1, r2) * Ent``; the margin is the left side minus the right."""
    cfg = cfg or NoisyCatConfig()
    ent = float(ent)
    if not -1e-12 <= ent <= 1 + 1e-12:
        raise InvalidArgumentError(f"entanglement must lie in [0, 1] bits, got {ent}")
    cor = float(error_correlation(spec))
    bound = cfg.K(spec.r1, spec.r2) * ent
    return NoisyCatVerdict(cor >= bound, cor - bound, cor, bound)


# --------------------------------------------------------------------------
# entropy and distances

ENTROPY_CUTOFF = 1e-12


def von_neumann_entropy(rho):
    """Entropy in bits; eigenvalues below 1e-12 count as zero."""
    w = np.linalg.eigvalsh(np.asarray(rho))
    w = w[w > ENTROPY_CUTOFF]
    return float(-np.sum(w * np.log2(w)))


def reduced_density(psi, keep):
    """Reduced density matrix of a pure state on the qubits ``keep`` (in that order)."""
    psi = np.asarray(psi, dtype=np.complex128)
    n = n_qubits_of(psi)
    _check_targets(keep, n)
    t = np.moveaxis(psi.reshape((2,) * n), list(keep), list(range(len(keep))))
    v = t.reshape(1 << len(keep), -1)
    return v @ v.conj().T


def entanglement_entropy(psi, qubit):
    """Entropy (bits) of one qubit of a pure state."""
    return von_neumann_entropy(reduced_density(psi, [qubit]))


def _pair_entropies(rows):
    # rows: (k, 4) unnormalized two-qubit states; entropy of the first qubit
    r = rows.reshape(-1, 2, 2)
    red = r @ r.conj().transpose(0, 2, 1)
    w = np.linalg.eigvalsh(red)
    w = w / np.maximum(w.sum(axis=1, keepdims=True), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > ENTROPY_CUTOFF, -w * np.log2(w), 0.0)
    return terms.sum(axis=1)


EXACT_OUTCOME_LIMIT = 1 << 10


def emergent_entanglement(psi, pair, rng=None, trials=1000, measured=None):
    """Expected pair entanglement after measuring every other qubit in the computational basis.

    Exact over all outcomes when there are at most 1024 of them; otherwise
    the average over ``trials`` sampled outcomes.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    n = n_qubits_of(psi)
    if n < 3:
        raise InvalidArgumentError("emergent entanglement needs at least three qubits")
    pair = tuple(int(q) for q in pair)
    _check_targets(pair, n)
    if len(pair) != 2 or pair[0] == pair[1]:
        raise InvalidArgumentError("pair must be two distinct qubits")
    others = [q for q in range(n) if q not in pair]
    if measured is not None:
        measured = sorted(int(q) for q in measured)
        if set(measured) & set(pair):
            raise InvalidArgumentError("measured qubits overlap the pair")
        if measured != others:
            raise InvalidArgumentError("every qubit outside the pair must be measured")
    t = np.moveaxis(psi.reshape((2,) * n), list(pair), [n - 2, n - 1])
    rows = t.reshape(-1, 4)
    probs = np.sum(np.abs(rows) ** 2, axis=1)
    if len(rows) <= EXACT_OUTCOME_LIMIT:
        live = probs > 1e-15
        return float(np.dot(probs[live], _pair_entropies(rows[live])) / probs.sum())
    if rng is None:
        raise InvalidArgumentError("sampling emergent entanglement needs an rng")
    idx = rng.choice(len(rows), size=int(trials), p=probs / probs.sum())
    return float(_pair_entropies(rows[idx]).mean())


def trace_distance(a, b):
    """Half the trace norm of ``a - b``."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"dimension mismatch {a.shape} vs {b.shape}")
    return float(0.5 * np.linalg.svd(a - b, compute_uv=False).sum())


# --------------------------------------------------------------------------
# time smoothing


def circuit_unitaries(c):
    if c.n_qubits > DENSITY_MAX_QUBITS:
        raise SizeLimitError(f"full unitaries limited to {DENSITY_MAX_QUBITS} qubits")
    return [step_unitary(g, c.n_qubits) for g in c.steps]


def time_smoothed_channels(c, raw):
    """Replace each step's noise by the average of all steps' noise moved to that step.

    With ``V_t = U_{t-1} ... U_1`` the evolution from step s to step t is
    ``U_{s,t} = V_t V_s^dagger`` (for s < t this is ``U_{t-1} ... U_s``, for
    s > t its inverse), and step t gets the channel
    ``rho -> (1/T) sum_s U_{s,t} E_s(U_{s,t}^dagger rho U_{s,t}) U_{s,t}^dagger``
    as an explicit list of Kraus operators on the whole register.
    """
    T = len(c.steps)
    if len(raw) != T:
        raise InvalidArgumentError(f"need one raw channel per step: {len(raw)} channels, {T} steps")
    n = c.n_qubits
    us = circuit_unitaries(c)
    cumulative = [np.eye(1 << n, dtype=np.complex128)]
    for u in us[:-1]:
        cumulative.append(u @ cumulative[-1])
    full = [ch.full_operators(n) for ch in raw]
    scale = 1.0 / np.sqrt(T)
    out = []
    everyone = tuple(range(n))
    for t in range(T):
        ops = []
        for s in range(T):
            w = cumulative[t] @ cumulative[s].conj().T
            ops.extend(scale * (w @ k @ w.conj().T) for k in full[s])
        ch = KrausChannel.__new__(KrausChannel)
        ch.operators, ch.targets = ops, everyone
        err = ch.completeness_error()
        if err > 1e-8:
            raise NumericalContractError(f"smoothed channel {t} lost trace preservation ({err:.2e})")
        out.append(ch)
    return out


def run_noisy_density(c, channels, state=None):
    """Density-matrix evolution applying ``channels[t]`` right after gate t."""
    if len(channels) != len(c.steps):
        raise InvalidArgumentError("need one channel per step")
    if c.n_qubits > DENSITY_MAX_QUBITS:
        raise SizeLimitError(f"density matrices limited to {DENSITY_MAX_QUBITS} qubits")
    rho = density(basis_state(c.n_qubits)) if state is None else np.asarray(state, dtype=np.complex128)
    for g, ch in zip(c.steps, channels):
        rho = apply_channel(apply_gate(rho, g), ch)
    return rho
