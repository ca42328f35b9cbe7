import csv
import json

import numpy as np
import pytest

from mlspike.harness import runner
from mlspike.harness.cli import main
from mlspike.harness.config import EXPERIMENTS, PRESETS, ExperimentConfig, load_config, preset
from mlspike.harness.runner import emit, run, run_single
from mlspike.neuron import ConfigurationError


def _tiny(**kw):
    base = dict(p=3, episodes=20, runs=2, n_i=20, n_h=4)
    base.update(kw)
    return preset("noise-map", **base)


def test_every_experiment_has_a_preset():
    assert set(PRESETS) == set(EXPERIMENTS)
    for name in EXPERIMENTS:
        cfg = preset(name)
        assert cfg.conditions()


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(experiment="nope")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(experiment="xor", rule="hebb")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(experiment="xor", runs=0)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(experiment="xor", sweep={"runs": [1, 2]})
    with pytest.raises(ConfigurationError):
        ExperimentConfig(experiment="xor", sigma=-1.0)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"experiment": "xor", "bogus": 1})
    assert ExperimentConfig(experiment="xor", rule="bio-backprop").rule == "bio"


def test_default_episodes_and_overrides():
    assert ExperimentConfig(experiment="capacity", p=50).total_episodes == 50_000
    assert preset("generalization").total_episodes == 75_000
    assert preset("noise-map").total_episodes == 10_000


def test_scale_shrinks_episodes_and_patterns():
    cfg = preset("bio-compare", p=40, scale=0.1)
    assert cfg.total_episodes == 4000
    assert cfg.patterns == 10  # never below the class count
    assert preset("single-map", scale=0.5).patterns == 1


def test_sweep_expansion():
    conds = preset("structure-compare").conditions()
    assert len(conds) == 12
    label, cfg = conds[0]
    assert label == "variant=free_p=10" and cfg.variant == "free" and cfg.p == 10 and not cfg.sweep
    ratio = dict(preset("ratio-sweep").conditions())
    assert ratio["n_o=20_hidden_ratio=0.5"].hidden == 10


def test_yaml_and_json_configs(tmp_path):
    (tmp_path / "c.yaml").write_text("p: 5\nsigma: 2.5\nsweep: {}\n")
    (tmp_path / "c.json").write_text(json.dumps({"p": 6}))
    assert load_config(tmp_path / "c.yaml") == {"p": 5, "sigma": 2.5, "sweep": {}}
    assert load_config(tmp_path / "c.json") == {"p": 6}
    (tmp_path / "bad.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "bad.yaml")
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.yaml")


def test_run_single_curves():
    cfg = _tiny()
    res = run_single(cfg.conditions()[0][1], 0)
    assert res.seed == 0 and res.complete and res.episodes == 20
    assert np.all((res.p_tilde >= 0) & (res.p_tilde <= 100))
    assert np.all(np.isfinite(res.d_tilde))


def test_emit_layout(tmp_path):
    cfg = _tiny(sweep={"sigma": [0.0, 5.0]})
    results = run(cfg)
    out = emit(results, cfg, tmp_path / "out")
    for label in ("sigma=0.0", "sigma=5.0"):
        for r in range(2):
            rows = list(csv.DictReader(open(out / label / f"run_{r:03d}.csv")))
            assert len(rows) == 20 and rows[0]["episode"] == "1"
            assert (out / label / f"weights_{r:03d}.json").exists()
            assert (out / label / f"patterns_{r:03d}.json").exists()
    summary = list(csv.DictReader(open(out / "summary.csv")))
    assert [row["condition"] for row in summary] == ["sigma=0.0", "sigma=5.0"]
    assert summary[0]["runs"] == "2" and summary[0]["complete"] == "True"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == {"sigma=0.0": [0, 1], "sigma=5.0": [0, 1]}
    assert ExperimentConfig.from_dict(manifest) == cfg


def test_rerun_is_byte_identical(tmp_path):
    cfg = _tiny(sigma=3.0, base_seed=7)
    for name in ("a", "b"):
        emit(run(cfg), cfg, tmp_path / name)
    for f in sorted((tmp_path / "a").rglob("*.csv")) + sorted((tmp_path / "a").rglob("*.json")):
        twin = tmp_path / "b" / f.relative_to(tmp_path / "a")
        assert f.read_bytes() == twin.read_bytes(), f.name


def test_runs_differ_by_seed():
    cfg = _tiny().conditions()[0][1]
    a, b = run_single(cfg, 0), run_single(cfg, 1)
    assert not np.array_equal(a.weights["w_hi"], b.weights["w_hi"])


def test_parallel_matches_serial():
    cfg = _tiny(runs=2)
    serial = run(cfg)
    parallel = run(cfg, workers=2)
    for s, p in zip(serial[0].runs, parallel[0].runs):
        np.testing.assert_array_equal(s.p_tilde, p.p_tilde)


def test_generalization_reports_test_accuracy():
    cfg = preset("generalization", episodes=30, runs=1, n_i=20, n_train=2, n_test=1, sweep={})
    res = run_single(cfg, 0)
    assert res.test_accuracy is not None and 0 <= res.test_accuracy <= 100
    assert res.patterns.p == 20


def test_bio_rule_runs_with_positive_outputs():
    cfg = preset("bio-compare", p=10, episodes=30, runs=1, n_i=20, rule="bio", sweep={})
    res = run_single(cfg, 0)
    assert np.min(res.weights["w_oh"]) > 0


def test_interrupt_returns_partial_results(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = runner.simulate_episode

    def flaky(*a, **kw):
        calls["n"] += 1
        if calls["n"] == 8:
            raise KeyboardInterrupt
        return real(*a, **kw)

    monkeypatch.setattr(runner, "simulate_episode", flaky)
    cfg = _tiny(sweep={})
    results = run(cfg)
    assert len(results[0].runs) == 1
    res = results[0].runs[0]
    assert not res.complete and res.episodes == 7
    out = emit(results, cfg, tmp_path)
    summary = list(csv.DictReader(open(out / "summary.csv")))
    assert summary[0]["complete"] == "False"
    assert len(list(csv.DictReader(open(out / "default" / "run_000.csv")))) == 7


def test_cli_success(tmp_path):
    code = main(["run", "xor", "--episodes", "10", "--runs", "1", "--variant", "single",
                 "--out", str(tmp_path), "-q"])
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["conditions"] == ["default"]
    assert manifest["config"]["variant"] == "single"


def test_cli_config_file_and_manifest_rerun(tmp_path):
    (tmp_path / "cfg.yaml").write_text("p: 2\nn_i: 20\nsweep: {}\n")
    assert main(["run", "noise-map", "--config", str(tmp_path / "cfg.yaml"), "--episodes", "5",
                 "--runs", "1", "--out", str(tmp_path / "a"), "-q"]) == 0
    assert main(["run", "noise-map", "--config", str(tmp_path / "a" / "manifest.json"),
                 "--out", str(tmp_path / "b"), "-q"]) == 0
    assert (tmp_path / "a" / "default" / "run_000.csv").read_bytes() == \
        (tmp_path / "b" / "default" / "run_000.csv").read_bytes()


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "xor", "--runs", "0", "--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err
    (tmp_path / "other.yaml").write_text("experiment: capacity\n")
    assert main(["run", "xor", "--config", str(tmp_path / "other.yaml"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "cfg.yaml"
    bad.write_text("c: 80\np: 80\nn_s: 1\nsweep: {}\n")
    assert main(["run", "capacity", "--config", str(bad), "--episodes", "1", "--runs", "1",
                 "--out", str(tmp_path / "x"), "-q"]) == 3
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "xor", "--episodes", "2", "--runs", "1", "--no-sweep",
                 "--out", str(blocker / "sub"), "-q"]) == 4
    with pytest.raises(SystemExit):
        main(["run", "unknown"])
