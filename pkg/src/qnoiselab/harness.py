"""Experiment configuration, validation, seeded execution and result persistence.

An experiment is a JSON document ``{kind, parameters, seed, output_dir}``.
:func:`validate` checks every range and cap before anything runs;
:func:`run` dispatches to the simulation modules and writes the payload
(CSV tables plus ``summary.json``) atomically. ``run_info.json`` holds the
non-deterministic metadata (duration, build id) and is not part of the
payload, so identical (config, seed) pairs give byte-identical payloads.
"""
import csv
import io
import json
import os
import subprocess
import tempfile
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from math import comb
from pathlib import Path

import numpy as np

from . import circuit as qc
from . import noise, sampling, trajectories
from .errors import InvalidArgumentError, NotFoundError, QNoiseLabError
from .limits import (
    DENSITY_MAX_QUBITS,
    ENUMERATION_CAP,
    FOURIER_MAX_BITS,
    HERMITE_MAX_DEGREE,
    PURE_MAX_QUBITS,
)
from .matrix import gaussian_matrix, haar_rows, matrix_from_json, matrix_to_json, worked_example_matrix
from .rng import MASK64, substream

KINDS = (
    "boson-exact",
    "fermion-exact",
    "fourier",
    "noise-sweep",
    "hermite-check",
    "circuit-run",
    "noisy-cat",
    "smoothing",
    "fluctuation",
)

DEFAULTS = {
    "boson-exact": {"matrix": "worked-example", "samples": 0},
    "fermion-exact": {"matrix": "worked-example", "samples": 0},
    "fourier": {"function": "majority", "n": 3, "samples": 0},
    "noise-sweep": {
        "ensemble": "gaussian",
        "n_list": [2, 3, 4],
        "eps_list": [0.05, 0.1, 0.2, 0.3, 0.4],
        "epsilon_scaling": "fixed",
        "m_rule": "n2+n",
        "mc": 2000,
        "inputs": 20,
        "renormalize": False,
    },
    "hermite-check": {"degrees": [1, 2, 3, 4], "epsilon": 0.36, "mc": 100000},
    "circuit-run": {
        "circuit": {"random": {"n": 4, "depth": 20}},
        "model": {"name": "independent", "rate": 0.01, "correlation": 0.0},
        "trials": 1000,
        "simulate_state": True,
    },
    "noisy-cat": {"state": "cat", "pair": [0, 1], "spec": [0.9, 0.04, 0.04, 0.02], "alpha": 1.5},
    "smoothing": {"circuit": {"random": {"n": 2, "depth": 6}}, "rate": 0.05},
    "fluctuation": {
        "models": [
            {"name": "independent", "rate": 0.1},
            {"name": "all-or-none", "rate": 0.1},
            {"name": "pairwise", "rate": 0.1, "correlation": 0.3},
        ],
        "sizes": [8, 16, 32, 64],
        "trials": 10000,
    },
}


@dataclass
class ExperimentConfig:
    kind: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "results"

    def to_json(self):
        return {"kind": self.kind, "parameters": self.parameters, "seed": self.seed, "output_dir": self.output_dir}

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or "kind" not in obj:
            raise InvalidArgumentError("config must be an object with a 'kind'")
        return cls(
            kind=obj["kind"],
            parameters=dict(obj.get("parameters", {})),
            seed=int(obj.get("seed", 0)),
            output_dir=str(obj.get("output_dir", "results")),
        )

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text):
        try:
            return cls.from_json(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"config is not valid JSON: {exc}") from None

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise NotFoundError(f"config file {path} not found")
        cfg = cls.loads(path.read_text())
        cfg.base_dir = path.parent
        return cfg

    def params(self):
        """Parameters with kind defaults filled in."""
        merged = json.loads(json.dumps(DEFAULTS.get(self.kind, {})))
        merged.update(self.parameters)
        return merged

    def resolve(self, p):
        p = Path(p)
        base = getattr(self, "base_dir", None)
        if not p.is_absolute() and base is not None and not p.exists():
            return Path(base) / p
        return p


@dataclass
class Violation:
    field: str
    constraint: str
    message: str
    cap: bool = False

    def __str__(self):
        return f"{self.field}: {self.constraint} ({self.message})"


def bundled_path(name):
    return resources.files("qnoiselab") / "data" / name


def bundled_configs():
    folder = resources.files("qnoiselab") / "data" / "configs"
    return sorted((p for p in folder.iterdir() if p.name.endswith(".json")), key=lambda p: p.name)


# --------------------------------------------------------------------------
# validation


def _is_int(x):
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _matrix_shape(cfg, spec, out):
    if spec == "worked-example":
        return 2, 3
    if isinstance(spec, dict):
        if spec.get("ensemble") not in ("haar", "gaussian"):
            out.append(Violation("parameters.matrix.ensemble", "one of haar, gaussian", repr(spec.get("ensemble"))))
            return None
        n, m = spec.get("n"), spec.get("m")
        if not (_is_int(n) and _is_int(m) and 1 <= n):
            out.append(Violation("parameters.matrix", "positive integer n and m", f"n={n!r}, m={m!r}"))
            return None
        return n, m
    if isinstance(spec, str):
        path = cfg.resolve(spec)
        if not path.exists():
            out.append(Violation("parameters.matrix", "file exists", str(path)))
            return None
        try:
            obj = json.loads(path.read_text())
            return int(obj["rows"]), int(obj["cols"])
        except (ValueError, KeyError, TypeError) as exc:
            out.append(Violation("parameters.matrix", "matrix JSON {rows, cols, entries}", str(exc)))
            return None
    out.append(Violation("parameters.matrix", "'worked-example', a file path or an ensemble object", repr(spec)))
    return None


def _circuit_qubits(cfg, spec, out, name="parameters.circuit"):
    if isinstance(spec, dict) and "random" in spec:
        r = spec["random"]
        n, depth = r.get("n"), r.get("depth")
        if not (_is_int(n) and _is_int(depth) and n >= 1 and depth >= 1):
            out.append(Violation(name, "random circuit needs positive n and depth", repr(r)))
            return None
        return n
    if isinstance(spec, str):
        path = cfg.resolve(spec)
        if not path.exists():
            out.append(Violation(name, "file exists", str(path)))
            return None
        try:
            return qc.circuit_from_json(json.loads(path.read_text())).n_qubits
        except (ValueError, QNoiseLabError) as exc:
            out.append(Violation(name, "valid circuit JSON", str(exc)))
            return None
    out.append(Violation(name, "a file path or {'random': {n, depth}}", repr(spec)))
    return None


def _check_eps(values, name, out, divisor=1):
    for e in values:
        if not isinstance(e, (int, float)) or not 0 <= e / divisor <= 1:
            out.append(Violation(name, "epsilon range", f"noise level {e} outside [0, 1]"))
            return


def _check_model(m, name, out):
    try:
        trajectories.NoiseModel(m.get("name"), float(m.get("rate", 0.0)), float(m.get("correlation", 0.0)))
    except (InvalidArgumentError, AttributeError, TypeError) as exc:
        out.append(Violation(name, "valid noise model", str(exc)))


def validate(config):
    """Every violation of ranges and caps, empty when the config can run."""
    out = []
    if config.kind not in KINDS:
        return [Violation("kind", f"one of {', '.join(KINDS)}", repr(config.kind))]
    if not _is_int(config.seed) or not 0 <= config.seed <= MASK64:
        out.append(Violation("seed", "64-bit unsigned integer", repr(config.seed)))
    p = config.params()
    unknown = set(p) - set(DEFAULTS[config.kind]) - {"workers"}
    for key in sorted(unknown):
        out.append(Violation(f"parameters.{key}", "known parameter", f"unknown for {config.kind}"))
    kind = config.kind

    if kind in ("boson-exact", "fermion-exact"):
        shape = _matrix_shape(config, p["matrix"], out)
        if shape:
            n, m = shape
            if n > m:
                out.append(Violation("parameters.matrix", "rows <= cols", f"{n}x{m}"))
            else:
                size = comb(m + n - 1, n) if kind == "boson-exact" else comb(m, n)
                if size > ENUMERATION_CAP:
                    out.append(Violation("parameters.matrix", "enumeration cap",
                                         f"{size} outcomes > {ENUMERATION_CAP}", cap=True))
    elif kind == "fourier":
        f = p["function"]
        if isinstance(f, str) and f in ("majority", "parity", "dictator", "random"):
            n = p.get("n")
            if not _is_int(n) or n < 1:
                out.append(Violation("parameters.n", "positive integer", repr(n)))
            elif n > FOURIER_MAX_BITS:
                out.append(Violation("parameters.n", "fourier bit cap", f"{n} > {FOURIER_MAX_BITS}", cap=True))
            elif f == "majority" and n % 2 == 0:
                out.append(Violation("parameters.n", "odd n for majority", str(n)))
        elif isinstance(f, list):
            size = len(f)
            if size == 0 or size & (size - 1):
                out.append(Violation("parameters.function", "table length 2^n", str(size)))
            elif size > 1 << FOURIER_MAX_BITS:
                out.append(Violation("parameters.function", "fourier bit cap", f"{size} entries", cap=True))
        else:
            out.append(Violation("parameters.function", "named function or +-1 table", repr(f)))
    elif kind == "noise-sweep":
        if p["ensemble"] not in noise.ENSEMBLES:
            out.append(Violation("parameters.ensemble", f"one of {sorted(noise.ENSEMBLES)}", repr(p["ensemble"])))
        if p["epsilon_scaling"] not in ("fixed", "inverse_n"):
            out.append(Violation("parameters.epsilon_scaling", "fixed or inverse_n", repr(p["epsilon_scaling"])))
        n_list = p["n_list"]
        if not n_list or not all(_is_int(n) and n >= 1 for n in n_list):
            out.append(Violation("parameters.n_list", "non-empty list of positive integers", repr(n_list)))
            n_list = []
        _check_eps(p["eps_list"], "parameters.eps_list", out,
                   divisor=1 if p["epsilon_scaling"] != "inverse_n" else min(n_list or [1]))
        if not _is_int(p["mc"]) or p["mc"] < noise.MIN_MC:
            out.append(Violation("parameters.mc", f"at least {noise.MIN_MC}", repr(p["mc"])))
        if not _is_int(p["inputs"]) or p["inputs"] < 2:
            out.append(Violation("parameters.inputs", "at least 2", repr(p["inputs"])))
        for n in n_list:
            try:
                m = noise.columns_for(n, p["m_rule"])
            except InvalidArgumentError as exc:
                out.append(Violation("parameters.m_rule", "2n, n2+n or an integer multiplier", str(exc)))
                break
            size = comb(m + n - 1, n)
            if size > ENUMERATION_CAP:
                out.append(Violation("parameters.n_list", "enumeration cap",
                                     f"n={n}, m={m}: {size} outcomes > {ENUMERATION_CAP}", cap=True))
    elif kind == "hermite-check":
        for k in p["degrees"]:
            if not _is_int(k) or not 0 <= k <= HERMITE_MAX_DEGREE:
                out.append(Violation("parameters.degrees", f"degree in [0, {HERMITE_MAX_DEGREE}]", repr(k)))
        _check_eps([p["epsilon"]], "parameters.epsilon", out)
        if not _is_int(p["mc"]) or p["mc"] < 2:
            out.append(Violation("parameters.mc", "at least 2", repr(p["mc"])))
    elif kind == "circuit-run":
        n = _circuit_qubits(config, p["circuit"], out)
        if n is not None and n > PURE_MAX_QUBITS:
            out.append(Violation("parameters.circuit", "trajectory qubit cap", f"{n} > {PURE_MAX_QUBITS}", cap=True))
        _check_model(p["model"], "parameters.model", out)
        if not _is_int(p["trials"]) or p["trials"] < 1:
            out.append(Violation("parameters.trials", "positive integer", repr(p["trials"])))
    elif kind == "noisy-cat":
        spec = p["spec"]
        try:
            cs = qc.CorrelatedNoiseSpec(*map(float, spec))
            if not (0 < cs.r1 < 1 and 0 < cs.r2 < 1):
                out.append(Violation("parameters.spec", "rates strictly between 0 and 1", repr(spec)))
        except (TypeError, ValueError, InvalidArgumentError) as exc:
            out.append(Violation("parameters.spec", "four probabilities summing to 1", str(exc)))
        if not isinstance(p["alpha"], (int, float)) or not 1 < p["alpha"] < 2:
            out.append(Violation("parameters.alpha", "alpha in (1, 2)", repr(p["alpha"])))
        st = p["state"]
        if not (st in ("cat", "product", "ghz") or (isinstance(st, dict) and "theta" in st)):
            out.append(Violation("parameters.state", "cat, product, ghz or {theta}", repr(st)))
    elif kind == "smoothing":
        n = _circuit_qubits(config, p["circuit"], out)
        if n is not None and n > DENSITY_MAX_QUBITS:
            out.append(Violation("parameters.circuit", "density qubit cap", f"{n} > {DENSITY_MAX_QUBITS}", cap=True))
        rate = p["rate"]
        if not isinstance(rate, (int, float)) or not 0 <= rate <= 1:
            out.append(Violation("parameters.rate", "probability in [0, 1]", repr(rate)))
    elif kind == "fluctuation":
        for i, m in enumerate(p["models"]):
            _check_model(m, f"parameters.models[{i}]", out)
        sizes = p["sizes"]
        if len(sizes) < 2 or sizes != sorted(set(sizes)) or not all(_is_int(s) and s >= 1 for s in sizes):
            out.append(Violation("parameters.sizes", "at least two strictly ascending positive integers", repr(sizes)))
        if not _is_int(p["trials"]) or p["trials"] < 2:
            out.append(Violation("parameters.trials", "at least 2", repr(p["trials"])))
    return out


class ValidationError(InvalidArgumentError):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(map(str, violations)))
        if any(v.cap for v in violations):
            self.exit_code = 3


# --------------------------------------------------------------------------
# persistence


def _table_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row.get(h)) for h in header])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return "" if v is None else v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_atomic(path, text):
    """Write via a temp file in the same directory and rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_id():
    here = Path(__file__).resolve().parent
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], cwd=here, capture_output=True, text=True, timeout=5
        )
        if rev.returncode == 0 and rev.stdout.strip():
            return f"git-{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    from . import __version__

    return f"qnoiselab-{__version__}"


@dataclass
class Table:
    header: list
    rows: list

    def to_csv(self):
        return _table_csv(self.header, self.rows)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    tables: dict
    summary: dict
    build_id: str = ""
    duration: float = 0.0
    files: dict = field(default_factory=dict)
    extra_payload: dict = field(default_factory=dict)
    plot_table: Table = None

    @property
    def output_dir(self):
        return Path(self.config.output_dir)


# --------------------------------------------------------------------------
# runners


def _load_matrix(cfg, spec, rng):
    if spec == "worked-example":
        return worked_example_matrix()
    if isinstance(spec, dict):
        make = haar_rows if spec["ensemble"] == "haar" else gaussian_matrix
        return make(int(spec["n"]), int(spec["m"]), rng)
    return matrix_from_json(json.loads(cfg.resolve(spec).read_text()))


def _load_circuit(cfg, spec, rng):
    if isinstance(spec, dict) and "random" in spec:
        r = spec["random"]
        return qc.random_circuit(int(r["n"]), int(r["depth"]), rng)
    return qc.circuit_from_json(json.loads(cfg.resolve(spec).read_text()))


def _samples_table(d, samples, rng):
    if not samples:
        return None
    idx = sampling.sample(d, rng, samples)
    rows = [{"draw": i, "index": int(k), "outcome": " ".join(map(str, d.outcomes[k]))} for i, k in enumerate(idx)]
    return Table(["draw", "index", "outcome"], rows)


def _run_exact(cfg, p):
    kind = cfg.kind
    if kind == "fourier":
        f = p["function"]
        rng = substream(cfg.seed, kind, 0)
        if isinstance(f, list):
            table = np.asarray(f)
        elif f == "majority":
            table = sampling.majority(p["n"])
        elif f == "parity":
            table = sampling.parity(p["n"])
        elif f == "dictator":
            table = sampling.dictator(p["n"])
        else:
            table = sampling.random_boolean_function(p["n"], rng)
        d = sampling.fourier_distribution(table)
    else:
        m = _load_matrix(cfg, p["matrix"], substream(cfg.seed, kind, 0))
        d = sampling.boson_distribution(m) if kind == "boson-exact" else sampling.fermion_distribution(m)
    rows = [{"outcome": " ".join(map(str, o)), "prob": float(q)} for o, q in zip(d.outcomes, d.probs)]
    tables = {"distribution": Table(["outcome", "prob"], rows)}
    st = _samples_table(d, int(p.get("samples", 0)), substream(cfg.seed, kind, 1))
    if st is not None:
        tables["samples"] = st
        counts = np.bincount([r["index"] for r in st.rows], minlength=len(d)) / len(st.rows)
        empirical = sampling.OutcomeDistribution(d.kind, d.outcomes, counts)
        from .noise import total_variation

        sample_tv = total_variation(d, empirical)
    else:
        sample_tv = None
    summary = {"kind": d.kind, "outcomes": len(d), "total_mass": d.total_mass, "normalized": d.normalized}
    if sample_tv is not None:
        summary["samples"] = len(st.rows)
        summary["empirical_tv"] = sample_tv
    extra = {"distribution.json": json.dumps(d.to_json(), indent=1) + "\n"}
    plot = Table(["outcome", "prob"], rows)
    return tables, summary, extra, plot


def _run_sweep(cfg, p, workers):
    curve = noise.sensitivity_sweep(
        p["ensemble"], p["n_list"], p["eps_list"], p["mc"], cfg.seed,
        inputs=p["inputs"], m_rule=p["m_rule"], epsilon_scaling=p["epsilon_scaling"],
        renormalize=p["renormalize"], workers=workers,
    )
    header = ["n", "m", "epsilon", "correlation", "tv", "stderr", "mc_samples"]
    rows = list(curve.rows())
    summary = {
        "ensemble": curve.ensemble,
        "inputs": curve.inputs,
        "mc_samples": curve.mc_samples,
        "epsilon_scaling": curve.epsilon_scaling,
        "n_values": curve.n_values,
        "m_values": curve.m_values,
        "epsilon_values": curve.epsilon_values,
        "correlation": curve.correlations,
        "correlation_stderr": curve.mc_stderr,
        "tv": curve.tv,
        "tv_stderr": curve.tv_stderr,
    }
    plot = Table(["n", "epsilon", "correlation", "stderr"], rows)
    return {"sensitivity": Table(header, rows)}, summary, {}, plot


def _run_hermite(cfg, p):
    rows = []
    for k in p["degrees"]:
        h = noise.hermite_damping_check(k, p["epsilon"], p["mc"], substream(cfg.seed, cfg.kind, k))
        rows.append({"degree": k, "epsilon": h.epsilon, "estimate": h.estimate, "stderr": h.stderr,
                     "expected": h.expected, "z_score": float(h.z_score), "mc_samples": h.draws})
    header = ["degree", "epsilon", "estimate", "stderr", "expected", "z_score", "mc_samples"]
    summary = {"max_abs_z": max((abs(r["z_score"]) for r in rows), default=0.0), "rows": rows}
    return {"hermite": Table(header, rows)}, summary, {}, Table(["degree", "estimate", "stderr"], rows)


def _model(m):
    return trajectories.NoiseModel(m["name"], float(m.get("rate", 0.0)), float(m.get("correlation", 0.0)))


def _run_circuit(cfg, p):
    c = _load_circuit(cfg, p["circuit"], substream(cfg.seed, cfg.kind, 0))
    model = _model(p["model"])
    res = trajectories.run_noisy_trajectories(
        c, model, p["trials"], substream(cfg.seed, cfg.kind, 1), simulate_state=p["simulate_state"]
    )
    summary = res.summary() if p["simulate_state"] else res.trace.summary()
    summary.update(model=asdict(model), circuit=qc.circuit_to_json(c))
    counts = res.trace.counts
    hist = summary["count_histogram"]
    plot = Table(["corrupted_count", "frequency"],
                 [{"corrupted_count": k, "frequency": v / max(counts.size, 1)} for k, v in enumerate(hist)])
    extra = {"error_trace.csv": res.trace.to_csv()}
    return {}, summary, extra, plot


def _state_for(name):
    if name == "cat":
        return qc.cat_state()
    if name == "product":
        return qc.basis_state(2)
    if name == "ghz":
        return qc.ghz_state(3)
    theta = float(name["theta"])
    return np.array([np.cos(theta), 0, 0, np.sin(theta)], dtype=np.complex128)


def _run_noisy_cat(cfg, p):
    psi = _state_for(p["state"])
    pair = tuple(p["pair"])
    spec = qc.CorrelatedNoiseSpec(*map(float, p["spec"]))
    ent = qc.entanglement_entropy(psi, pair[0]) if qc.n_qubits_of(psi) == 2 else None
    emergent = (qc.emergent_entanglement(psi, pair, substream(cfg.seed, cfg.kind, 0))
                if qc.n_qubits_of(psi) >= 3 else ent)
    used = ent if ent is not None else emergent
    verdict = qc.noisy_cat_check(used, spec, qc.NoisyCatConfig(p["alpha"]))
    row = {
        "entanglement": used,
        "emergent_entanglement": emergent,
        "r1": spec.r1,
        "r2": spec.r2,
        "correlation": verdict.correlation,
        "bound": verdict.bound,
        "margin": verdict.margin,
        "passed": int(verdict.passed),
    }
    summary = dict(row, passed=bool(verdict.passed), K=f"min(x,y)**{p['alpha']}",
                   note="K is a chosen family; only its growth condition is fixed")
    header = list(row)
    return {"noisy_cat": Table(header, [row])}, summary, {}, Table(header, [row])


def _run_smoothing(cfg, p):
    c = _load_circuit(cfg, p["circuit"], substream(cfg.seed, cfg.kind, 0))
    rate = float(p["rate"])
    raw = [qc.depolarizing_channel(g.targets[0], rate) for g in c.steps]
    smoothed = qc.time_smoothed_channels(c, raw)
    standard = qc.run_noisy_density(c, raw)
    smooth_state = qc.run_noisy_density(c, smoothed)
    ideal = qc.density(qc.run_circuit(c))
    rows = []
    for t, ch in enumerate(smoothed):
        rows.append({"step": t, "gate": c.steps[t].name, "kraus_operators": len(ch.operators),
                     "completeness_error": ch.completeness_error()})
    summary = {
        "steps": len(c.steps),
        "n_qubits": c.n_qubits,
        "rate": rate,
        "max_completeness_error": max(r["completeness_error"] for r in rows) if rows else 0.0,
        "trace_distance_standard_vs_ideal": qc.trace_distance(standard, ideal),
        "trace_distance_smoothed_vs_ideal": qc.trace_distance(smooth_state, ideal),
        "trace_distance_smoothed_vs_standard": qc.trace_distance(smooth_state, standard),
        "circuit": qc.circuit_to_json(c),
    }
    header = ["step", "gate", "kraus_operators", "completeness_error"]
    return {"smoothing": Table(header, rows)}, summary, {}, Table(header, rows)


def _run_fluctuation(cfg, p):
    rows, exps = [], {}
    for i, m in enumerate(p["models"]):
        model = _model(m)
        tab = trajectories.fluctuation_scaling(model, p["sizes"], p["trials"], substream(cfg.seed, cfg.kind, i))
        exps[f"{i}:{model.name}"] = tab.exponent
        for r in tab.rows():
            rows.append(dict(r, model=model.name, rate=model.rate, correlation=model.effective_correlation))
    header = ["model", "rate", "correlation", "N", "std", "mean", "fitted_exponent"]
    summary = {"fitted_exponents": exps, "trials": p["trials"], "sizes": p["sizes"]}
    return {"fluctuation": Table(header, rows)}, summary, {}, Table(["model", "N", "std", "fitted_exponent"], rows)


def run(config, workers=1):
    """Validate, execute and persist one experiment."""
    violations = validate(config)
    if violations:
        raise ValidationError(violations)
    p = config.params()
    workers = int(p.get("workers", workers) or 1)
    start = time.perf_counter()
    try:
        if config.kind in ("boson-exact", "fermion-exact", "fourier"):
            parts = _run_exact(config, p)
        elif config.kind == "noise-sweep":
            parts = _run_sweep(config, p, workers)
        elif config.kind == "hermite-check":
            parts = _run_hermite(config, p)
        elif config.kind == "circuit-run":
            parts = _run_circuit(config, p)
        elif config.kind == "noisy-cat":
            parts = _run_noisy_cat(config, p)
        elif config.kind == "smoothing":
            parts = _run_smoothing(config, p)
        else:
            parts = _run_fluctuation(config, p)
    except QNoiseLabError as exc:
        wrapped = type(exc)(f"{config.kind} experiment: {exc}")
        wrapped.exit_code = exc.exit_code
        raise wrapped from exc
    tables, summary, extra, plot = parts
    result = ExperimentResult(config, tables, _jsonable(summary), build_id(),
                              time.perf_counter() - start, extra_payload=extra, plot_table=plot)
    _persist(result)
    return result


def _persist(result):
    out = result.output_dir
    files = {}
    for name, table in result.tables.items():
        files[f"{name}.csv"] = table.to_csv()
    files.update(result.extra_payload)
    files["summary.json"] = json.dumps(
        {"config": result.config.to_json(), "summary": result.summary}, indent=2, sort_keys=True
    ) + "\n"
    for name, text in files.items():
        write_atomic(out / name, text)
        result.files[name] = out / name
    info = {"build_id": result.build_id, "duration_seconds": result.duration, "payload": sorted(files)}
    write_atomic(out / "run_info.json", json.dumps(info, indent=2, sort_keys=True) + "\n")
    emit_plot_data(result)


def emit_plot_data(result):
    """Long-form CSV (one observation per row) for external plotting; returns its path."""
    if result is None or result.plot_table is None:
        raise NotFoundError("result has no payload to reshape")
    path = result.output_dir / "plot_data.csv"
    write_atomic(path, result.plot_table.to_csv())
    result.files["plot_data.csv"] = path
    return path


PLOT_SOURCES = {
    "sensitivity.csv": ["n", "epsilon", "correlation", "stderr"],
    "fluctuation.csv": ["model", "N", "std", "fitted_exponent"],
    "hermite.csv": ["degree", "estimate", "stderr"],
    "distribution.csv": ["outcome", "prob"],
    "smoothing.csv": ["step", "gate", "kraus_operators", "completeness_error"],
    "noisy_cat.csv": None,
    "error_trace.csv": ["trial", "cycle", "corrupted_count"],
}


def load_result(directory):
    """Rebuild enough of an :class:`ExperimentResult` from disk to re-emit plot data."""
    directory = Path(directory)
    summary_path = directory / "summary.json"
    if not summary_path.exists():
        raise NotFoundError(f"no summary.json in {directory}")
    doc = json.loads(summary_path.read_text())
    cfg = ExperimentConfig.from_json(doc["config"])
    cfg.output_dir = str(directory)
    plot = None
    for name, cols in PLOT_SOURCES.items():
        path = directory / name
        if path.exists():
            with open(path, newline="") as fh:
                reader = csv.DictReader(fh)
                rows = list(reader)
                header = cols or reader.fieldnames
            plot = Table(header, rows)
            break
    return ExperimentResult(cfg, {}, doc["summary"], plot_table=plot)
