import json
from pathlib import Path

import pandas as pd

from l2c import cli

ROOT = Path(__file__).resolve().parents[1]
SYN = ROOT / "data" / "synthetic"


def write_config(tmp_path, out="out", **kw):
    cfg = {"train": str(SYN / "train.csv"), "val": str(SYN / "val.csv"), "test": str(SYN / "test.csv"),
           "schema": str(SYN / "schema.json"), "out_dir": out, "epochs": 30, "n_inputs": 4,
           "num_samples": 20, "seeds": [0]}
    cfg.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_stages_in_order(tmp_path, capsys):
    p = write_config(tmp_path)
    for stage in ("train-blackbox", "discretize", "train-l2c", "generate", "evaluate", "privacy-audit"):
        assert cli.main([stage, "--config", str(p)]) == 0, capsys.readouterr().err
    out = tmp_path / "out"
    for name in ("classifier.json", "discretizer.json", "l2c_seed0.json", "loss_seed0.csv", "report.json",
                 "report.txt", "privacy.json", "effective_config.json", "counterfactuals/seed0.csv"):
        assert (out / name).exists(), name
    frame = pd.read_csv(out / "counterfactuals" / "seed0.csv")
    schema = json.loads((SYN / "schema.json").read_text())
    assert list(frame.columns) == [f["name"] for f in schema["features"]] + ["predicted_label", "valid", "input_id"]
    assert sorted(frame["input_id"].unique()) == [0, 1, 2, 3]
    eff = cli.ExperimentConfig.load(out / "effective_config.json")
    assert eff.epochs == 30 and eff.lr == 1e-4 and eff.tau == 0.2


def test_overrides_reach_effective_config(tmp_path):
    p = write_config(tmp_path)
    assert cli.main(["train-blackbox", "--config", str(p), "--alpha", "0.01", "--tau", "0.5", "--selector", "off",
                     "--seed", "7", "--num-samples", "5", "--budget", "3", "--sparsity-filter", "40"]) == 0
    eff = json.loads((tmp_path / "out" / "effective_config.json").read_text())
    assert (eff["alpha"], eff["tau"], eff["selector"], eff["seeds"]) == (0.01, 0.5, False, [7])
    assert (eff["num_samples"], eff["budget_seconds"], eff["sparsity_filter"]) == (5, 3.0, 40.0)


def test_evaluate_without_sets_fails(tmp_path, capsys):
    p = write_config(tmp_path)
    assert cli.main(["train-blackbox", "--config", str(p)]) == 0
    assert cli.main(["discretize", "--config", str(p)]) == 0
    (tmp_path / "empty").mkdir()
    assert cli.main(["evaluate", "--config", str(p), "--cf-dir", str(tmp_path / "empty")]) != 0
    assert "no counterfactual sets found" in capsys.readouterr().err


def test_attack_without_qi_column_fails(tmp_path, capsys):
    p = write_config(tmp_path, epochs=2, n_inputs=1, num_samples=3)
    assert cli.main(["run", "--config", str(p)]) == 0
    attack = pd.read_csv(SYN / "val.csv").drop(columns="group")
    attack.to_csv(tmp_path / "attack.csv", index=False)
    capsys.readouterr()
    assert cli.main(["privacy-audit", "--config", str(p), "--attack", str(tmp_path / "attack.csv")]) != 0
    assert "group" in capsys.readouterr().err


def test_missing_inputs_fail_readably(tmp_path, capsys):
    assert cli.main(["train-l2c", "--config", str(tmp_path / "nope.json")]) != 0
    assert "config file not found" in capsys.readouterr().err
    p = write_config(tmp_path, train=str(tmp_path / "missing.csv"))
    assert cli.main(["train-blackbox", "--config", str(p)]) != 0
    assert "train file not found" in capsys.readouterr().err
    p = write_config(tmp_path)
    assert cli.main(["generate", "--config", str(p)]) != 0
    assert "run the earlier pipeline stage" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"train": "a", "test": "b", "schema": "c", "out_dir": "d", "colour": 1}))
    assert cli.main(["run", "--config", str(bad)]) != 0
    assert "colour" in capsys.readouterr().err


def test_schema_hash_mismatch_is_reported(tmp_path, capsys):
    p = write_config(tmp_path, epochs=2, n_inputs=1, num_samples=3)
    assert cli.main(["run", "--config", str(p)]) == 0
    assert cli.main(["discretize", "--config", str(p), "--strategy", "manual"]) == 0
    capsys.readouterr()
    assert cli.main(["generate", "--config", str(p)]) != 0
    assert "hash" in capsys.readouterr().err


def test_rerun_is_byte_identical(tmp_path):
    a = write_config(tmp_path, out="a", epochs=5)
    assert cli.main(["run", "--config", str(a)]) == 0
    b = write_config(tmp_path, out="b", epochs=5)
    assert cli.main(["run", "--config", str(b)]) == 0
    for name in ("counterfactuals/seed0.csv", "counterfactuals/seed0.json", "report.json", "privacy.json",
                 "l2c_seed0.json", "loss_seed0.csv", "classifier.json", "discretizer.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_make_synthetic(tmp_path):
    assert cli.main(["make-synthetic", "--out-dir", str(tmp_path / "s")]) == 0
    for name in ("train.csv", "val.csv", "test.csv", "schema.json"):
        assert (tmp_path / "s" / name).read_bytes() == (SYN / name).read_bytes()
