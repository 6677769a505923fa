import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qnoiselab import cli, harness
from qnoiselab.errors import NotFoundError
from qnoiselab.harness import ExperimentConfig, Table

WORKED_BOSON = [0, 1 / 6, 1 / 6, 2 / 6, 0, 2 / 6]


def configs():
    return {p.name: ExperimentConfig.load(Path(str(p))) for p in harness.bundled_configs()}


def test_bundled_configs_validate():
    found = configs()
    assert len(found) == 9
    for name, cfg in found.items():
        assert harness.validate(cfg) == [], name


@pytest.mark.parametrize("name", sorted(p.name for p in harness.bundled_configs()))
def test_config_round_trip(name):
    cfg = configs()[name]
    again = ExperimentConfig.loads(cfg.dumps())
    assert again.to_json() == cfg.to_json()


def test_validate_examples():
    ok = ExperimentConfig("boson-exact", {"matrix": {"ensemble": "haar", "n": 3, "m": 6}})
    assert harness.validate(ok) == []
    big = ExperimentConfig("boson-exact", {"matrix": {"ensemble": "haar", "n": 10, "m": 20}})
    (v,) = harness.validate(big)
    assert v.constraint == "enumeration cap" and v.cap and v.field == "parameters.matrix"
    sweep = ExperimentConfig("noise-sweep", {"eps_list": [0.1, 1.5]})
    assert any(v.constraint == "epsilon range" and not v.cap for v in harness.validate(sweep))


def test_validate_other_caps():
    dense = ExperimentConfig("smoothing", {"circuit": {"random": {"n": 11, "depth": 2}}})
    assert any(v.cap for v in harness.validate(dense))
    bad = ExperimentConfig("hermite-check", {"degrees": [9]})
    assert harness.validate(bad)
    assert harness.validate(ExperimentConfig("teleport"))
    assert harness.validate(ExperimentConfig("fourier", {"nope": 1}))
    missing = ExperimentConfig("boson-exact", {"matrix": "does/not/exist.json"})
    assert any("matrix" in v.field for v in harness.validate(missing))


def test_validation_error_exit_codes():
    with pytest.raises(harness.ValidationError) as exc:
        harness.run(ExperimentConfig("noise-sweep", {"eps_list": [2.0]}))
    assert exc.value.exit_code == 2
    with pytest.raises(harness.ValidationError) as exc:
        harness.run(ExperimentConfig("boson-exact", {"matrix": {"ensemble": "haar", "n": 10, "m": 20}}))
    assert exc.value.exit_code == 3


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_worked_example_run(tmp_path):
    cfg = configs()["boson_worked_example.json"]
    cfg.output_dir = str(tmp_path / "boson")
    result = harness.run(cfg)
    rows = _read_csv(result.files["distribution.csv"])
    assert [r["outcome"] for r in rows] == ["2 0 0", "1 1 0", "1 0 1", "0 2 0", "0 1 1", "0 0 2"]
    np.testing.assert_allclose([float(r["prob"]) for r in rows], WORKED_BOSON, atol=1e-12)
    summary = json.loads((tmp_path / "boson" / "summary.json").read_text())
    assert summary["summary"]["normalized"] is True
    assert len(_read_csv(result.files["samples.csv"])) == 1000
    info = json.loads((tmp_path / "boson" / "run_info.json").read_text())
    assert "duration_seconds" in info and "build_id" in info
    assert "run_info.json" not in info["payload"]


def _payload(directory):
    info = json.loads((Path(directory) / "run_info.json").read_text())
    return {name: (Path(directory) / name).read_bytes() for name in info["payload"]}


@pytest.mark.parametrize("name", ["fourier_majority.json", "circuit_bell.json", "noisy_cat.json", "smoothing.json"])
def test_rerun_is_byte_identical(tmp_path, name):
    cfg = configs()[name]
    cfg.output_dir = str(tmp_path)
    outs = []
    for _ in range(2):
        harness.run(cfg)
        outs.append(_payload(tmp_path))
    assert outs[0] == outs[1]


def test_different_seed_changes_payload(tmp_path):
    cfg = configs()["fourier_majority.json"]
    cfg.output_dir = str(tmp_path / "a")
    harness.run(cfg)
    cfg.seed += 1
    cfg.output_dir = str(tmp_path / "b")
    harness.run(cfg)
    assert _payload(tmp_path / "a")["samples.csv"] != _payload(tmp_path / "b")["samples.csv"]


def test_sweep_run_monotone_columns(tmp_path):
    cfg = ExperimentConfig("noise-sweep", {"n_list": [2, 3], "eps_list": [0.05, 0.2, 0.4], "mc": 300,
                                           "inputs": 5, "m_rule": "2n"}, seed=4, output_dir=str(tmp_path))
    result = harness.run(cfg)
    rows = _read_csv(result.files["sensitivity.csv"])
    for n in ("2", "3"):
        cur = [r for r in rows if r["n"] == n]
        corr = [float(r["correlation"]) for r in cur]
        se = [float(r["stderr"]) for r in cur]
        for j in range(len(cur) - 1):
            assert corr[j + 1] <= corr[j] + 3 * np.hypot(se[j], se[j + 1])
    plot = _read_csv(tmp_path / "plot_data.csv")
    assert list(plot[0]) == ["n", "epsilon", "correlation", "stderr"]


def test_atomic_write_leaves_no_partial_file(tmp_path, monkeypatch):
    target = tmp_path / "summary.json"
    harness.write_atomic(target, "old\n")

    def boom(src, dst):
        raise KeyboardInterrupt

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(KeyboardInterrupt):
        harness.write_atomic(target, "new contents\n")
    assert target.read_text() == "old\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["summary.json"]


def test_interrupted_run_leaves_no_payload(tmp_path, monkeypatch):
    cfg = configs()["noisy_cat.json"]
    cfg.output_dir = str(tmp_path / "out")
    monkeypatch.setattr(os, "replace", lambda *a: (_ for _ in ()).throw(OSError("disk gone")))
    with pytest.raises(OSError):
        harness.run(cfg)
    leftovers = list((tmp_path / "out").iterdir()) if (tmp_path / "out").exists() else []
    assert leftovers == []


def test_emit_plot_data_cases(tmp_path):
    cfg = ExperimentConfig("fluctuation", output_dir=str(tmp_path / "fl"), parameters={"trials": 500})
    result = harness.run(cfg)
    rows = _read_csv(result.files["plot_data.csv"])
    assert list(rows[0]) == ["model", "N", "std", "fitted_exponent"]
    assert len(rows) == 12

    empty = harness.ExperimentResult(ExperimentConfig("fourier", output_dir=str(tmp_path / "e")), {}, {},
                                     plot_table=Table(["n", "epsilon", "correlation", "stderr"], []))
    path = harness.emit_plot_data(empty)
    assert path.read_text() == "n,epsilon,correlation,stderr\n"

    with pytest.raises(NotFoundError):
        harness.emit_plot_data(None)
    with pytest.raises(NotFoundError):
        harness.load_result(tmp_path / "nowhere")


def test_load_result_round_trip(tmp_path):
    cfg = configs()["hermite_check.json"]
    cfg.parameters["mc"] = 2000
    cfg.output_dir = str(tmp_path / "h")
    harness.run(cfg)
    first = (tmp_path / "h" / "plot_data.csv").read_text()
    (tmp_path / "h" / "plot_data.csv").unlink()
    harness.emit_plot_data(harness.load_result(tmp_path / "h"))
    assert (tmp_path / "h" / "plot_data.csv").read_text() == first


# -- CLI


def test_cli_sample_worked(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "sample", "--kind", "fermion"]) == 0
    rows = _read_csv(tmp_path / "distribution.csv")
    np.testing.assert_allclose([float(r["prob"]) for r in rows], [1 / 6, 1 / 6, 4 / 6], atol=1e-12)
    assert "distribution.csv" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    out = ["--out", str(tmp_path)]
    assert cli.main(out + ["noise-sweep", "--eps", "1.5"]) == 2
    assert cli.main(out + ["sample", "--haar", "10", "20"]) == 3
    assert cli.main(out + ["smooth", "--random-n", "12"]) == 3
    assert cli.main(out + ["--seed", "-1", "noisy-cat"]) == 2
    err = capsys.readouterr().err
    assert "epsilon range" in err and "enumeration cap" in err


def test_cli_numerical_contract_exit_code(tmp_path, monkeypatch):
    from qnoiselab import sampling
    from qnoiselab.errors import NumericalContractError

    def broken(*a, **k):
        raise NumericalContractError("negative probability -1e-3")

    monkeypatch.setattr(sampling, "fermion_distribution", broken)
    assert cli.main(["--out", str(tmp_path), "sample", "--kind", "fermion"]) == 4


def test_cli_validate_subcommand(tmp_path, capsys):
    good = str(harness.bundled_path("configs") / "noise_sweep.json")
    assert cli.main(["--config", good, "validate"]) == 0
    assert capsys.readouterr().out.strip() == "ok"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "boson-exact", "parameters": {"matrix": {"ensemble": "gaussian", "n": 10, "m": 20}}}))
    assert cli.main(["--config", str(bad), "validate"]) == 3
    assert cli.main(["validate"]) == 2
    assert cli.main(["--config", str(tmp_path / "missing.json"), "validate"]) == 1


def test_cli_config_kind_must_match(tmp_path):
    cfg = str(harness.bundled_path("configs") / "noisy_cat.json")
    assert cli.main(["--config", cfg, "--out", str(tmp_path), "fluctuation"]) == 2


def test_cli_mc_override(tmp_path):
    cfg = str(harness.bundled_path("configs") / "hermite_check.json")
    assert cli.main(["--config", cfg, "--out", str(tmp_path), "--mc", "1000", "hermite-check"]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["parameters"]["mc"] == 1000


def test_cli_plot_data(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "noisy-cat"]) == 0
    (tmp_path / "plot_data.csv").unlink()
    assert cli.main(["plot-data", str(tmp_path)]) == 0
    assert (tmp_path / "plot_data.csv").exists()
    assert cli.main(["plot-data", str(tmp_path / "nothing")]) == 1


@pytest.mark.parametrize("flag", ["0", "1"])
def test_numpy_fallback_gives_same_payload(tmp_path, flag):
    # the distribution must not depend on which kernel path computed it
    env = dict(os.environ, QNOISELAB_DISABLE_NUMBA=flag)
    out = tmp_path / flag
    args = [sys.executable, "-m", "qnoiselab", "--out", str(out), "--seed", "3", "sample", "--haar", "3", "5"]
    subprocess.run(args, check=True, env=env, capture_output=True)
    probe = subprocess.run(
        [sys.executable, "-c", "import qnoiselab._accel as a; print(a.USE_NUMBA)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert probe.stdout.strip() == ("False" if flag == "1" else "True")
    rows = _read_csv(out / "distribution.csv")
    assert abs(sum(float(r["prob"]) for r in rows) - 1) <= 1e-10
