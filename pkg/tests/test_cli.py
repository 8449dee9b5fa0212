import json

import numpy as np
import pytest

from tokgt.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def synth_dir(tmp_path, capsys):
    d = tmp_path / "data"
    code, out, _ = run_cli(capsys, "synth", "--kind", "sbm", "--out", str(d),
                           "--nodes-per-class", "30", "--p-in", "0.15", "--p-out", "0.02",
                           "--feature-dim", "4", "--separation", "2.0", "--seed", "3")
    assert code == 0
    return d


def test_unknown_subcommand_exits_one(capsys):
    code, _, err = run_cli(capsys, "frobnicate")
    assert code == 1
    assert "usage" in err.lower()


def test_missing_required_flag_exits_one(capsys):
    code, _, err = run_cli(capsys, "tokenize", "--data", "x")
    assert code == 1
    assert "usage" in err.lower()


def test_no_command_prints_usage(capsys):
    code, _, err = run_cli(capsys)
    assert code == 1


def test_help_exits_zero(capsys):
    code, out, _ = run_cli(capsys, "--help")
    assert code == 0


def test_missing_dataset_is_user_error(tmp_path, capsys):
    code, _, err = run_cli(capsys, "tokenize", "--data", str(tmp_path / "nope"),
                           "--out", str(tmp_path / "t.n2pt"), "--hops", "2", "--topk", "3")
    assert code == 1
    assert "missing dataset file" in err


def test_synth_writes_loadable_dataset(synth_dir):
    from tokgt.data import load_dataset

    ds = load_dataset(synth_dir)
    assert ds.graph.n == 60
    assert ds.n_classes == 2


def test_tokenize_smoke(synth_dir, tmp_path, capsys):
    tok = tmp_path / "t.n2pt"
    code, out, _ = run_cli(capsys, "tokenize", "--data", str(synth_dir), "--out", str(tok),
                           "--hops", "2", "--topk", "3")
    assert code == 0
    assert tok.exists()
    summary = json.loads(out)
    assert summary["nodes"] == 60

    from tokgt.cache import load_token_cache
    from tokgt.tokens import Node2ParConfig

    bundle = load_token_cache(tok, expected_config=Node2ParConfig(hops=2, topk=3))
    assert bundle.n == 60


def test_tokenize_nondefault_flags_round_trip(synth_dir, tmp_path, capsys):
    tok = tmp_path / "t.n2pt"
    code, *_ = run_cli(capsys, "tokenize", "--data", str(synth_dir), "--out", str(tok),
                       "--hops", "1", "--topk", "2", "--ppr-damping", "0.5",
                       "--ppr-steps", "3", "--attr-adj-normalize")
    assert code == 0
    from tokgt.cache import load_token_cache

    bundle = load_token_cache(tok)
    assert bundle.config.ppr_damping == 0.5
    assert bundle.config.ppr_steps == 3
    assert bundle.config.attr_adj_normalize is True


def _write_cfg(tmp_path, **extra):
    cfg = {"hops": 2, "topk": 3, "hidden_dim": 16, "fusion_dim": 8,
           "lr": 5e-3, "max_epochs": 4, "patience": 4, "batch_size": 32}
    cfg.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_train_eval_weights_round_trip(synth_dir, tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    tok = tmp_path / "t.n2pt"
    out = tmp_path / "run"
    code, stdout, _ = run_cli(capsys, "train", "--data", str(synth_dir), "--tokens", str(tok),
                              "--config", str(cfg), "--seed", "0", "--out", str(out))
    assert code == 0
    assert tok.exists()  # generated on demand
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == "train"
    assert report["config"]["hops"] == 2  # full config echo
    assert report["config"]["weight_decay"] == 1e-5
    assert report["results"]["seeds"] == [0]
    assert report["results"]["std_accuracy"] is None
    assert (out / "per_seed.csv").exists()
    assert (out / "figures" / "training_curves.png").exists()
    assert (out / "model" / "params.bin").exists()

    code, stdout, _ = run_cli(capsys, "eval", "--data", str(synth_dir), "--tokens", str(tok),
                              "--model", str(out / "model"), "--split", "test")
    assert code == 0
    ev = json.loads(stdout)
    assert ev["accuracy"] == pytest.approx(report["results"]["accuracies"][0])

    code, stdout, _ = run_cli(capsys, "weights", "--model", str(out / "model"),
                              "--data", str(synth_dir), "--tokens", str(tok))
    assert code == 0
    w = json.loads(stdout)
    assert sum(w["fusion_weights"].values()) == pytest.approx(1.0, abs=1e-6)


def test_train_multi_seed_reports_std(synth_dir, tmp_path, capsys):
    cfg = _write_cfg(tmp_path, max_epochs=2, patience=2)
    out = tmp_path / "runs"
    code, stdout, _ = run_cli(capsys, "train", "--data", str(synth_dir),
                              "--tokens", str(tmp_path / "t.n2pt"), "--config", str(cfg),
                              "--seeds", "0,1", "--out", str(out))
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["results"]["seeds"] == [0, 1]
    assert report["results"]["std_accuracy"] is not None
    assert (out / "models" / "seed_0" / "params.bin").exists()
    assert (out / "models" / "seed_1" / "params.bin").exists()


def test_cached_tokens_config_mismatch_is_user_error(synth_dir, tmp_path, capsys):
    tok = tmp_path / "t.n2pt"
    run_cli(capsys, "tokenize", "--data", str(synth_dir), "--out", str(tok),
            "--hops", "1", "--topk", "2")
    cfg = _write_cfg(tmp_path)  # wants hops=2, topk=3
    code, _, err = run_cli(capsys, "train", "--data", str(synth_dir), "--tokens", str(tok),
                           "--config", str(cfg), "--seed", "0", "--out", str(tmp_path / "r"))
    assert code == 1
    assert "config mismatch" in err


def test_weights_after_single_sequence_training(synth_dir, tmp_path, capsys):
    cfg = _write_cfg(tmp_path, sequences="no_a", max_epochs=2, patience=2)
    out = tmp_path / "single"
    code, *_ = run_cli(capsys, "train", "--data", str(synth_dir),
                       "--tokens", str(tmp_path / "t.n2pt"), "--config", str(cfg),
                       "--seed", "0", "--out", str(out))
    assert code == 0
    code, stdout, _ = run_cli(capsys, "weights", "--model", str(out / "model"),
                              "--data", str(synth_dir), "--tokens", str(tmp_path / "t.n2pt"))
    assert code == 0
    w = json.loads(stdout)
    assert w["fusion_weights"] == {"no_a": 1.0}


def test_ablate_command(synth_dir, tmp_path, capsys):
    cfg = _write_cfg(tmp_path, max_epochs=2, patience=2)
    out = tmp_path / "abl"
    code, stdout, _ = run_cli(capsys, "ablate", "--data", str(synth_dir),
                              "--tokens", str(tmp_path / "t.n2pt"), "--config", str(cfg),
                              "--sequences", "ne_t,no_a", "--fusion-modes", "mean",
                              "--seeds", "0", "--out", str(out))
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert set(doc["results"]) == {"full", "only_ne_t", "only_no_a", "fusion_mean"}
    assert (out / "ablation.csv").exists()
    assert (out / "figures" / "ablation.png").exists()


def test_sweep_command(synth_dir, tmp_path, capsys):
    cfg = _write_cfg(tmp_path, max_epochs=2, patience=2)
    out = tmp_path / "sw"
    code, stdout, _ = run_cli(capsys, "sweep", "--data", str(synth_dir),
                              "--config", str(cfg), "--param", "hops",
                              "--values", "1,2", "--seeds", "0", "--out", str(out))
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert [rec["value"] for rec in doc["results"]] == [1, 2]
    assert (out / "sweep.csv").exists()
    assert (out / "figures" / "sweep.png").exists()
    assert len(list((out / "token_cache").glob("*.n2pt"))) == 2


def test_bad_config_key_is_user_error(synth_dir, tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"hopz": 2}))
    code, _, err = run_cli(capsys, "train", "--data", str(synth_dir),
                           "--tokens", str(tmp_path / "t.n2pt"), "--config", str(p),
                           "--seed", "0", "--out", str(tmp_path / "r"))
    assert code == 1
    assert "unknown config keys" in err
