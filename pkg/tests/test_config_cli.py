import json
import math
import os
import time

import numpy as np
import pytest

from supremix.analysis import compute_nlfd
from supremix.cli import main
from supremix.config import (
    RunConfig,
    load_config,
    parse_config,
    serialize_config,
)
from supremix.errors import ValidationError

FAST_CONFIG = """
[data]
kind = "helix"
n = 120
dim = 6
noise = 0.05
label_grid = 9
seed = 0

[mix]
gamma = 2.0

[loss]
tau = 1.0

[train]
pretrain_epochs = 3
probe_epochs = 5
batch_size = 32
warmup_epochs = 1
seed = 0

[encoder]
hidden_dims = [16, 16]
embed_dim = 4

[verify]
trials = 40
grad_batches = 4
bound_trials = 10
"""


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text(FAST_CONFIG)
    return str(path)


def test_parse_defaults():
    config = parse_config("")
    assert config.loss.tau == 0.5
    assert config.train.pretrain_epochs == 200
    assert config.train.probe_epochs == 100
    assert config.train.warmup_epochs == 10
    assert config.mix.alpha == 2.0 and config.mix.beta == 8.0
    assert config.encoder.hidden_dims == (64, 64)


def test_parse_rejects_unknown_keys():
    with pytest.raises(ValidationError, match="unknown"):
        parse_config("[loss]\nbanana = 1\n")
    with pytest.raises(ValidationError, match="unknown"):
        parse_config("[dessert]\n")


def test_parse_rejects_bad_values():
    with pytest.raises(ValidationError, match="temperature"):
        parse_config("[loss]\ntau = -1.0\n")
    with pytest.raises(ValidationError, match="decreasing"):
        parse_config("[verify]\ntaus = [0.1, 0.5]\n")
    with pytest.raises(ValidationError):
        parse_config("[verify]\ntrials = 0\n")


def test_serialize_round_trip_idempotent():
    config = parse_config(FAST_CONFIG)
    text1 = serialize_config(config)
    text2 = serialize_config(parse_config(text1))
    assert text1 == text2
    assert parse_config(text1) == config


def test_seed_priority(monkeypatch, tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[train]\nseed = 7\n")
    config = load_config(str(path))
    assert config.resolved_seed() == 7
    assert config.resolved_seed(override=3) == 3

    path.write_text("")
    config = load_config(str(path))
    monkeypatch.setenv("SUPREMIX_SEED", "11")
    assert config.resolved_seed() == 11
    monkeypatch.setenv("SUPREMIX_SEED", "pear")
    with pytest.raises(ValidationError):
        config.resolved_seed()
    monkeypatch.delenv("SUPREMIX_SEED")
    assert config.resolved_seed() == 0


def test_gen_data_writes_csv(fast_config, tmp_path):
    out = tmp_path / "data.csv"
    assert main(["gen-data", "--config", fast_config, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 121  # header + n rows
    # Re-running reproduces the bytes.
    first = out.read_bytes()
    assert main(["gen-data", "--config", fast_config, "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_gen_data_large_is_fast(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[data]\nn = 10000\ndim = 8\nseed = 1\n')
    out = tmp_path / "big.csv"
    started = time.time()
    assert main(["gen-data", "--config", str(cfg), "--out", str(out)]) == 0
    assert time.time() - started < 5.0
    assert len(out.read_text().splitlines()) == 10001


def test_pretrain_smoke_and_determinism(fast_config, tmp_path):
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert main(["pretrain", "--config", fast_config, "--out", str(out1)]) == 0
    assert (out1 / "checkpoint.json").exists()
    assert (out1 / "epochs.csv").exists()
    header = (out1 / "epochs.csv").read_text().splitlines()[0]
    assert header == "epoch,loss,lr,avg_pos_logit,mean_top1k_neg_logit"
    report = json.loads((out1 / "report.json").read_text())
    assert report["method"] == "supremix"

    assert main(["pretrain", "--config", fast_config, "--out", str(out2)]) == 0
    assert (out1 / "epochs.csv").read_bytes() == (out2 / "epochs.csv").read_bytes()
    assert (out1 / "checkpoint.json").read_bytes() == (out2 / "checkpoint.json").read_bytes()


def test_pretrain_supcon_label(fast_config, tmp_path):
    cfg = tmp_path / "supcon.toml"
    cfg.write_text(FAST_CONFIG + "\n" + """
""".join([]) + "")
    text = FAST_CONFIG.replace("[loss]\ntau = 1.0",
                               "[loss]\ntau = 1.0\nuse_dm = false\nuse_mix_neg = false\nuse_mix_pos = false")
    cfg.write_text(text)
    out = tmp_path / "run"
    assert main(["pretrain", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["method"] == "supcon"


def test_probe_from_checkpoint(fast_config, tmp_path):
    run = tmp_path / "run"
    assert main(["pretrain", "--config", fast_config, "--out", str(run)]) == 0
    out = tmp_path / "probe"
    assert main(["probe", "--config", fast_config, "--out", str(out),
                 "--checkpoint", str(run / "checkpoint.json")]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert sorted(metrics) == ["gm", "mae", "mse", "pearson"]


def test_probe_missing_checkpoint_exit_2(fast_config, tmp_path):
    code = main(["probe", "--config", fast_config, "--out", str(tmp_path / "p"),
                 "--checkpoint", str(tmp_path / "nope.json")])
    assert code == 2


def test_probe_bypass_fixed_embeddings(tmp_path):
    # Collinear embeddings linear in the label: near-exact linear fit.
    t = np.tile(np.linspace(0.0, 1.0, 5), 12)
    path = tmp_path / "line.csv"
    rows = ["x0,x1,y,split"]
    for i, v in enumerate(t):
        split = "train" if i < 45 else "test"
        rows.append(f"1.0,{float(v)!r},{float(v)!r},{split}")
    path.write_text("\n".join(rows) + "\n")
    cfg = tmp_path / "c.toml"
    cfg.write_text("[train]\nprobe_epochs = 400\nbatch_size = 16\nlr = 1e-2\n"
                   "min_lr = 1e-6\nwarmup_epochs = 1\npretrain_epochs = 2\n")
    out = tmp_path / "probe"
    assert main(["probe", "--config", str(cfg), "--out", str(out),
                 "--embeddings-csv", str(path)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["mae"] < 1e-3


def test_train_vanilla_smoke(fast_config, tmp_path):
    out = tmp_path / "vanilla"
    assert main(["train-vanilla", "--config", fast_config, "--out", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert math.isfinite(metrics["mae"])
    report = json.loads((out / "report.json").read_text())
    assert report["method"] == "vanilla"


def test_verify_reference_config(fast_config, tmp_path):
    out = tmp_path / "verify"
    assert main(["verify", "--config", fast_config, "--out", str(out)]) == 0
    payload = json.loads((out / "verify.json").read_text())
    assert payload["passed"]
    assert set(payload["checks"]) == {"gradient", "lower_bound", "distance_magnifying",
                                      "infimum", "epsilon_ordered"}


def test_verify_invalid_configs_exit_2(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[verify]\ntaus = [0.1, 0.5]\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "v")]) == 2
    cfg.write_text("[verify]\ntrials = 0\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "v")]) == 2


def test_compare_smoke_single_seed(fast_config, tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "--config", fast_config, "--out", str(out),
                 "--seeds", "1", "--permuted"]) == 0
    report = json.loads((out / "comparison.json").read_text())
    assert set(report["arms"]) == {"supremix", "supcon", "vanilla",
                                   "supremix_permuted", "supcon_permuted"}
    for arm in ("supremix", "supcon", "vanilla"):
        row = report["arms"][arm]["per_seed"][0]
        assert sorted(row["metrics"]) == ["gm", "mae", "mse", "pearson"]
    permuted_row = report["arms"]["supremix_permuted"]["per_seed"][0]
    assert "ordinality_vs_genuine" in permuted_row
    assert "ordinality_vs_permuted" in permuted_row
    assert "ordinality_drop_supremix_median" in report["comparisons"]
    for arm in ("supremix", "supcon"):
        assert os.path.exists(report["arms"][arm]["per_seed"][0]["epoch_csv"])


def test_nlfd_command_matches_library(tmp_path):
    rng = np.random.default_rng(4)
    emb = rng.normal(size=(30, 4))
    emb[1] = emb[0]  # duplicate row gets excluded
    targets = rng.normal(size=30)
    emb_path = tmp_path / "emb.csv"
    tgt_path = tmp_path / "tgt.csv"
    emb_path.write_text("\n".join(
        ["e0,e1,e2,e3"] + [",".join(repr(float(v)) for v in row) for row in emb]) + "\n")
    tgt_path.write_text("\n".join(["target"] + [repr(float(v)) for v in targets]) + "\n")
    out = tmp_path / "nlfd"
    assert main(["nlfd", "--embeddings", str(emb_path), "--targets", str(tgt_path),
                 "--out", str(out)]) == 0
    payload = json.loads((out / "nlfd.json").read_text())
    direct = compute_nlfd(emb, targets)
    assert payload["mean"] == direct.mean
    assert payload["skewness"] == direct.skewness
    assert payload["excluded_pairs"] == direct.excluded_pairs >= 1
    factors = [float(x) for x in (out / "factors.csv").read_text().splitlines()[1:]]
    assert factors == pytest.approx(direct.factors.tolist())


def test_nlfd_command_hand_computed(tmp_path):
    emb_path = tmp_path / "emb.csv"
    tgt_path = tmp_path / "tgt.csv"
    emb_path.write_text("e0\n0.0\n1.0\n3.0\n")
    tgt_path.write_text("t\n0.0\n1.0\n3.0\n")
    out = tmp_path / "nlfd"
    assert main(["nlfd", "--embeddings", str(emb_path), "--targets", str(tgt_path),
                 "--out", str(out)]) == 0
    payload = json.loads((out / "nlfd.json").read_text())
    direct = compute_nlfd(np.array([[0.0], [1.0], [3.0]]), np.array([0.0, 1.0, 3.0]))
    assert payload["mean"] == pytest.approx(direct.mean)


def test_nlfd_length_mismatch_exit_2(tmp_path):
    emb_path = tmp_path / "emb.csv"
    tgt_path = tmp_path / "tgt.csv"
    emb_path.write_text("e0\n0.0\n1.0\n3.0\n")
    tgt_path.write_text("t\n0.0\n1.0\n")
    assert main(["nlfd", "--embeddings", str(emb_path), "--targets", str(tgt_path),
                 "--out", str(tmp_path / "x")]) == 2


def test_permute_subsample_filter_commands(fast_config, tmp_path):
    permuted = tmp_path / "perm.csv"
    assert main(["permute", "--config", fast_config, "--out", str(permuted)]) == 0
    assert permuted.exists()

    smaller = tmp_path / "small.csv"
    assert main(["subsample", "--config", fast_config, "--out", str(smaller),
                 "--n-train", "20"]) == 0
    lines = smaller.read_text().splitlines()
    train_rows = [l for l in lines[1:] if l.endswith(",train")]
    assert len(train_rows) == 20

    filtered = tmp_path / "filtered.csv"
    assert main(["filter-range", "--config", fast_config, "--out", str(filtered),
                 "--exclude", "0.4:0.6"]) == 0
    for line in filtered.read_text().splitlines()[1:]:
        cells = line.split(",")
        if cells[-1] == "train":
            assert not (0.4 <= float(cells[-2]) <= 0.6)

    assert main(["filter-range", "--config", fast_config, "--out", str(filtered),
                 "--exclude", "nonsense"]) == 2


def test_unknown_command_exit_2():
    assert main(["frobnicate"]) == 2


def test_missing_config_exit_2(tmp_path):
    assert main(["pretrain", "--config", str(tmp_path / "nope.toml"),
                 "--out", str(tmp_path / "o")]) == 2
