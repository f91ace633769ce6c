import csv
import json

import numpy as np
import pytest

from simhar.cli import main
from simhar.config import ExperimentConfig, load_config
from simhar.formats import read_manifest
from simhar.synth.dataset import GenerationConfig, generate_dataset
from simhar.synth.generator import ProceduralGenerator, default_prompts

TINY = {
    "generator": {"families": ["walk", "jump"], "real_size": 12,
                  "generators": [{"tag": "proc-a", "style_noise": 0.05}]},
    "pretrain": {"embed_dim": 8, "channels": [8, 8], "window": 32, "text_dim": 8, "batch_size": 8, "epochs": 1},
    "eval": {"n_datasets": 1, "families": ["walk", "jump"], "train_per_class": 2, "test_per_class": 2,
             "shots": [0, 1], "finetune_epochs": 1},
    "experiment": {"protocol": "real_subsampling", "fractions": [0.5]},
}


def write_config(tmp_path, overrides=None, name="cfg.json"):
    cfg = json.loads(json.dumps(TINY))
    for section, values in (overrides or {}).items():
        cfg.setdefault(section, {}).update(values) if isinstance(values, dict) else cfg.update({section: values})
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_unknown_key_is_config_error(tmp_path, capsys):
    path = write_config(tmp_path, {"pretrain": {"epochz": 3}})
    rc, _, err = run(capsys, "gen-har", "--config", path, "--out", tmp_path)
    assert rc == 2 and "epochz" in err


def test_missing_config_file(tmp_path, capsys):
    rc, _, _ = run(capsys, "gen-har", "--config", tmp_path / "nope.json", "--out", tmp_path)
    assert rc == 2


def test_missing_manifest_is_data_error(tmp_path, capsys):
    rc, _, _ = run(capsys, "subsample", "--manifest", tmp_path / "none.jsonl", "--fraction", "0.5",
                   "--config", write_config(tmp_path), "--out", tmp_path)
    assert rc == 3


def test_bad_checkpoint_is_data_error(tmp_path, capsys):
    bad = tmp_path / "x.enc1"
    bad.write_bytes(b"nope")
    rc, _, _ = run(capsys, "eval", "--checkpoint", bad, "--config", write_config(tmp_path), "--out", tmp_path)
    assert rc == 3


def test_config_round_trip_and_digest(tmp_path):
    cfg = load_config(write_config(tmp_path))
    again = ExperimentConfig.from_json(json.loads(cfg.canonical_bytes()))
    assert again.canonical_bytes() == cfg.canonical_bytes() and again.digest == cfg.digest
    assert cfg.replace(seed=3).digest != cfg.digest


def _tiny_manifest(root, tag, n):
    prompts = default_prompts(n, seed=0)[:n]
    return generate_dataset(prompts, GenerationConfig(seed=1), root, ProceduralGenerator(tag),
                            source="real" if tag == "real" else "synthetic")


def test_mix_fifty_fifty(tmp_path, capsys):
    _tiny_manifest(tmp_path / "r", "real", 60)
    _tiny_manifest(tmp_path / "s", "proc-a", 60)
    rc, out, _ = run(capsys, "mix", "--real", tmp_path / "r" / "manifest.jsonl",
                     "--synth", tmp_path / "s" / "manifest.jsonl", "--fraction", "0.5", "--total", "100",
                     "--config", write_config(tmp_path), "--out", tmp_path / "o")
    info = json.loads(out)
    assert rc == 0 and (info["records"], info["real"], info["synthetic"]) == (100, 50, 50)
    m = read_manifest(info["manifest"])
    assert sum(r.source == "real" for r in m.records) == 50


def test_subsample_command(tmp_path, capsys):
    _tiny_manifest(tmp_path / "r", "real", 20)
    rc, out, _ = run(capsys, "subsample", "--manifest", tmp_path / "r" / "manifest.jsonl", "--fraction", "0.25",
                     "--config", write_config(tmp_path), "--out", tmp_path / "o")
    assert rc == 0 and json.loads(out)["records"] == 5


def test_selftest_without_gradient(capsys):
    rc, out, _ = run(capsys, "selftest", "--skip-gradient")
    assert rc == 0 and "circular" in out and "FAIL" not in out


def test_selftest_reports_oracle_miss(monkeypatch, capsys):
    from simhar import oracles
    monkeypatch.setattr(oracles, "run_all", lambda gradient=True: [oracles.OracleResult("fake", False, "x", 0.0)])
    rc, _, err = run(capsys, "selftest")
    assert rc == 4 and "fake" in err


def test_pipeline_commands_and_report(tmp_path, capsys):
    cfg = write_config(tmp_path)
    common = ["--config", cfg, "--out", tmp_path / "o", "--deterministic"]
    rc, out, _ = run(capsys, "gen-synth", "--real", *common)
    assert rc == 0
    manifest = json.loads(out)["manifest"]
    assert len(read_manifest(manifest)) == 12
    rc, out, _ = run(capsys, "pretrain", "--manifest", manifest, *common)
    assert rc == 0
    ckpt = json.loads(out)["checkpoint"]
    rc, out, _ = run(capsys, "gen-har", *common)
    assert rc == 0
    har = json.loads(out)["har_dir"]
    rc, out, _ = run(capsys, "eval", "--checkpoint", ckpt, "--har", har, *common)
    assert rc == 0 and out.splitlines()[0] == "dataset,0-shot,1-shot"

    rc, out, _ = run(capsys, "experiment", *common)
    assert rc == 0
    base = tmp_path / "o" / load_config(cfg).digest
    assert (base / "config.json").read_bytes() == load_config(cfg).canonical_bytes()
    assert (base / "VERSION").exists()
    (base / "summary.csv").unlink()
    rc, again, _ = run(capsys, "report", "--dir", base, "--out", tmp_path / "o")
    assert rc == 0 and again == out
    rows = list(csv.DictReader((base / "plot.csv").open()))
    assert {r["method"] for r in rows} == {"real-0.5"} and "seed_0" in rows[0]
