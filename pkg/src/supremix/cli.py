"""Command-line interface.

Subcommands: gen-data, pretrain, probe, train-vanilla, verify, compare,
nlfd, permute, subsample, filter-range.  Every command is deterministic
given its config and seed; reports are JSON with stable key order and
per-epoch logs are CSV.  Exit codes: 0 success, 1 property or acceptance
failure, 2 usage/IO/validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis, data, nn, theory
from .config import RunConfig, config_echo, load_config, serialize_config
from .core import LabelRange, LabeledBatch, group_by_label, label_range
from .errors import SupremixError, ValidationError
from .loss import (
    LossConfig,
    finite_difference_gradient,
    loss_lower_bound,
    supremix_loss,
)
from .mixgen import MixNegConfig, MixPosConfig, build_contrast_sets
from .rng import substream

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_USAGE = 2

INFIMUM_LABELS = [0.0, 0.25, 0.5, 0.75, 1.0] * 3
INFIMUM_DIM = 4
INFIMUM_LIMIT_TAU = 0.001


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, default=_jsonable)
        fh.write("\n")


def _write_epoch_csv(path: str, history: list) -> None:
    columns = ["epoch", "loss", "lr", "avg_pos_logit", "mean_top1k_neg_logit"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in history:
            writer.writerow([repr(row[c]) if isinstance(row.get(c), float) else row.get(c, "")
                             for c in columns])


def _load_dataset(config: RunConfig) -> data.Dataset:
    d = config.data
    if d.csv_path is not None:
        return data.load_csv(d.csv_path, label_column=d.label_column,
                             group_column=d.group_column, split_seed=d.seed)
    spec = data.SyntheticSpec(kind=d.kind, n=d.n, input_dim=d.dim,
                              noise_sigma=d.noise, label_grid=d.label_grid, seed=d.seed)
    return data.gen_synthetic(spec)


def _method_name(loss_section) -> str:
    if not (loss_section.use_dm or loss_section.use_mix_neg or loss_section.use_mix_pos):
        return "supcon"
    return "supremix"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    config = load_config(args.config)
    dataset = _load_dataset(config)
    data.save_csv(dataset, args.out)
    print(f"wrote {dataset.n} samples to {args.out}")
    return EXIT_OK


def _pretrain_with_config(config: RunConfig, dataset: data.Dataset, seed: int,
                          loss_cfg: LossConfig | None = None):
    train_cfg = config.train_config(seed)
    encoder_cfg = config.encoder_config(dataset.inputs.shape[1])
    if loss_cfg is None:
        loss_cfg = config.loss_config()
    return nn.pretrain(
        dataset, encoder_cfg, train_cfg,
        config.mix_neg_config(), config.mix_pos_config(), loss_cfg,
        rule=config.quant_rule(),
        use_group_constraint=config.mix.use_group_constraint,
    ), train_cfg, encoder_cfg


def cmd_pretrain(args) -> int:
    config = load_config(args.config)
    seed = config.resolved_seed(args.seed)
    out_dir = _ensure_dir(args.out)
    dataset = _load_dataset(config)
    started = time.time()
    result, train_cfg, encoder_cfg = _pretrain_with_config(config, dataset, seed)
    checkpoint_path = os.path.join(out_dir, "checkpoint.json")
    epochs_path = os.path.join(out_dir, "epochs.csv")
    nn.save_checkpoint(checkpoint_path, encoder_cfg, result.params, result.label_range,
                       config_echo(config))
    _write_epoch_csv(epochs_path, result.history)
    report = {
        "config": config_echo(config),
        "method": _method_name(config.loss),
        "seed": seed,
        "metrics": None,
        "epoch_csv": epochs_path,
        "checkpoint": checkpoint_path,
        "wall_clock_seconds": time.time() - started,
    }
    _write_json(os.path.join(out_dir, "report.json"), report)
    print(f"pretrained {train_cfg.pretrain_epochs} epochs; checkpoint at {checkpoint_path}")
    return EXIT_OK


def cmd_probe(args) -> int:
    config = load_config(args.config)
    seed = config.resolved_seed(args.seed)
    out_dir = _ensure_dir(args.out)
    train_cfg = config.train_config(seed)

    if args.embeddings_csv:
        dataset = data.load_csv(args.embeddings_csv, label_column="y")
        override = {
            split: dataset.inputs[dataset.indices(split)]
            for split in ("train", "test")
        }
        _, metrics = nn.linear_probe(None, dataset, train_cfg, embeddings_override=override)
    else:
        if not args.checkpoint:
            raise ValidationError("probe needs --checkpoint or --embeddings-csv")
        if not os.path.exists(args.checkpoint):
            raise ValidationError(f"checkpoint not found: {args.checkpoint}")
        _, params, _, _, _ = nn.load_checkpoint(args.checkpoint)
        dataset = _load_dataset(config)
        _, metrics = nn.linear_probe(params, dataset, train_cfg)

    metrics_path = os.path.join(out_dir, "metrics.json")
    _write_json(metrics_path, metrics.to_dict())
    print(f"probe metrics written to {metrics_path}")
    return EXIT_OK


def cmd_train_vanilla(args) -> int:
    config = load_config(args.config)
    seed = config.resolved_seed(args.seed)
    out_dir = _ensure_dir(args.out)
    dataset = _load_dataset(config)
    train_cfg = config.train_config(seed)
    encoder_cfg = config.encoder_config(dataset.inputs.shape[1])
    started = time.time()
    params, probe, history = nn.vanilla_train(dataset, encoder_cfg, train_cfg)
    X_test, y_test, _ = dataset.subset_arrays("test")
    metrics = analysis.compute_metrics(probe.predict(nn.embed_dataset(params, X_test)), y_test)

    checkpoint_path = os.path.join(out_dir, "checkpoint.json")
    epochs_path = os.path.join(out_dir, "epochs.csv")
    rng = label_range(dataset.labels[dataset.split == "train"])
    nn.save_checkpoint(checkpoint_path, encoder_cfg, params, rng, config_echo(config), probe=probe)
    _write_epoch_csv(epochs_path, history)
    _write_json(os.path.join(out_dir, "metrics.json"), metrics.to_dict())
    report = {
        "config": config_echo(config),
        "method": "vanilla",
        "seed": seed,
        "metrics": metrics.to_dict(),
        "epoch_csv": epochs_path,
        "checkpoint": checkpoint_path,
        "wall_clock_seconds": time.time() - started,
    }
    _write_json(os.path.join(out_dir, "report.json"), report)
    print(f"vanilla test MAE {metrics.mae:.6f}")
    return EXIT_OK


def _random_check_batch(seed: int, max_n: int = 32, max_d: int = 16):
    rng = substream(seed, 11)
    n = int(rng.integers(6, max_n + 1))
    d = int(rng.integers(3, max_d + 1))
    raw = rng.normal(size=(n, d))
    labels = rng.choice(np.linspace(0.0, 1.0, 9), size=n)
    while np.unique(labels).size < 3:
        labels = rng.choice(np.linspace(0.0, 1.0, 9), size=n)
    return LabeledBatch.from_raw(raw, labels)


def _gradient_check(seed: int, toggles: tuple, window_mode: str) -> float:
    batch = _random_check_batch(seed)
    groups = group_by_label(batch.labels)
    use_dm, use_neg, use_pos = toggles
    sets = build_contrast_sets(
        batch, groups,
        MixNegConfig() if use_neg else None,
        MixPosConfig(gamma=2, window_mode=window_mode) if use_pos else None,
        seed=seed,
    )
    config = LossConfig(tau=0.5, use_dm=use_dm, use_mix_neg=use_neg, use_mix_pos=use_pos,
                        label_range=LabelRange(0.0, 1.0))
    out = supremix_loss(batch, sets, config)
    fd = finite_difference_gradient(batch, sets, config, h=1e-4)
    denom = max(float(np.max(np.abs(fd))), float(np.max(np.abs(out.grad))), 1e-12)
    return float(np.max(np.abs(out.grad - fd))) / denom


def _bound_trial(seed: int) -> float:
    """Loss minus bound on one random instance (>= 0 up to round-off)."""
    batch = _random_check_batch(seed, max_n=24, max_d=12)
    groups = group_by_label(batch.labels)
    sets = build_contrast_sets(batch, groups, MixNegConfig(), MixPosConfig(gamma=2), seed=seed)
    rng = LabelRange(0.0, 1.0)
    config = LossConfig(tau=float(substream(seed, 12).uniform(0.1, 2.0)), label_range=rng)
    out = supremix_loss(batch, sets, config)
    return out.loss - loss_lower_bound(sets, groups, rng)


def cmd_verify(args) -> int:
    config = load_config(args.config)
    out_dir = _ensure_dir(args.out)
    v = config.verify
    checks = {}

    worst = 0.0
    toggle_grid = [(dm, neg, pos) for dm in (True, False) for neg in (True, False)
                   for pos in (True, False)]
    modes = ("rank", "label_distance")
    for i in range(v.grad_batches):
        toggles = toggle_grid[i % len(toggle_grid)]
        worst = max(worst, _gradient_check(1000 + i, toggles, modes[i % 2]))
    checks["gradient"] = {"passed": worst < 1e-4, "max_rel_err": worst,
                          "batches": v.grad_batches}

    worst_gap = math.inf
    for i in range(v.bound_trials):
        worst_gap = min(worst_gap, _bound_trial(2000 + i))
    checks["lower_bound"] = {"passed": worst_gap >= -1e-9, "min_gap": worst_gap,
                             "trials": v.bound_trials}

    dm_batch = _random_check_batch(7, max_n=32, max_d=8)
    dm_groups = group_by_label(dm_batch.labels)
    dm_sets = build_contrast_sets(dm_batch, dm_groups, MixNegConfig(), MixPosConfig(gamma=2),
                                  seed=7)
    dm_config = LossConfig(tau=0.5, label_range=LabelRange(0.0, 1.0))
    dm_report = theory.check_distance_magnifying(dm_batch, dm_sets, dm_config,
                                                 trials=v.trials,
                                                 rng=substream(13, 0))
    checks["distance_magnifying"] = {
        "passed": (dm_report.positivity_failures == 0 and dm_report.ratio_failures == 0
                   and dm_report.max_derivative_rel_err < 1e-4),
        **json.loads(dm_report.to_json()),
    }

    taus = list(v.taus)
    report = theory.infimum_gap(INFIMUM_LABELS, INFIMUM_DIM, taus)
    limit_report = theory.infimum_gap(INFIMUM_LABELS, INFIMUM_DIM,
                                      taus + [INFIMUM_LIMIT_TAU])
    limit_gap = limit_report.gaps[-1]
    limit_threshold = 0.05 * abs(limit_report.lower_bound) + 0.1
    gaps_ok = (all(g >= -1e-9 for g in report.gaps)
               and all(a > b for a, b in zip(report.gaps, report.gaps[1:])))
    checks["infimum"] = {
        "passed": gaps_ok and limit_gap < limit_threshold,
        "gaps": report.gaps,
        "taus": report.taus,
        "lower_bound": report.lower_bound,
        "limit_tau": INFIMUM_LIMIT_TAU,
        "limit_gap": limit_gap,
        "limit_threshold": limit_threshold,
    }

    construction = theory.construct_ordered_embeddings(INFIMUM_LABELS, INFIMUM_DIM)
    groups = group_by_label(construction.labels)
    if v.epsilon is not None:
        epsilon = v.epsilon
    else:
        reps = np.stack([construction.embeddings[g[0]] for g in groups.group_indices])
        gram = reps @ reps.T
        np.fill_diagonal(gram, -np.inf)
        epsilon = (1.0 - float(np.max(gram))) / 2.0
    ok, violations = theory.check_epsilon_ordered(construction, groups, epsilon)
    checks["epsilon_ordered"] = {"passed": ok, "epsilon": epsilon,
                                 "violations": violations}

    all_passed = all(c["passed"] for c in checks.values())
    payload = {"passed": all_passed, "checks": checks}
    _write_json(os.path.join(out_dir, "verify.json"), payload)
    for name, c in checks.items():
        print(f"{name}: {'pass' if c['passed'] else 'FAIL'}")
    return EXIT_OK if all_passed else EXIT_PROPERTY_FAILURE


def _run_comparison_arm(task):
    """One (arm, seed) training run; module-level so pools can pickle it."""
    config, dataset, arm, seed = task
    started = time.time()
    train_cfg = config.train_config(seed)
    X_test, y_test, _ = dataset.subset_arrays("test")
    if arm == "vanilla":
        encoder_cfg = config.encoder_config(dataset.inputs.shape[1])
        params, probe, history = nn.vanilla_train(dataset, encoder_cfg, train_cfg)
    else:
        if arm == "supcon":
            loss_cfg = LossConfig(tau=config.loss.tau, use_dm=False,
                                  use_mix_neg=False, use_mix_pos=False)
        else:
            loss_cfg = config.loss_config()
        result, train_cfg, encoder_cfg = _pretrain_with_config(config, dataset, seed,
                                                               loss_cfg=loss_cfg)
        params, history = result.params, result.history
        probe, _ = nn.linear_probe(params, dataset, train_cfg)
    z_test = nn.embed_dataset(params, X_test)
    metrics = analysis.compute_metrics(probe.predict(z_test), y_test)
    return {
        "arm": arm,
        "seed": seed,
        "metrics": metrics.to_dict(),
        "embeddings": z_test,
        "predictions": probe.predict(z_test),
        "history": history,
        "wall_clock_seconds": time.time() - started,
    }


def cmd_compare(args) -> int:
    config = load_config(args.config)
    base_seed = config.resolved_seed(args.seed)
    out_dir = _ensure_dir(args.out)
    dataset = _load_dataset(config)
    seeds = [base_seed + i for i in range(args.seeds)]
    genuine_test_labels = dataset.labels[dataset.indices("test")]

    arms = ["supremix", "supcon", "vanilla"]
    tasks = [(config, dataset, arm, seed) for seed in seeds for arm in arms]
    permuted_sets = {}
    if args.permuted:
        for seed in seeds:
            permuted = data.permute_labels(dataset, data.PermutationSpec(seed=seed))
            permuted_sets[seed] = permuted
            tasks.extend([(config, permuted, "supremix", seed, "permuted"),
                          (config, permuted, "supcon", seed, "permuted")])

    def run_all(task_list):
        plain = [(c, d, a, s) for (c, d, a, s, *_rest) in task_list]
        if args.threads and args.threads > 1:
            with ProcessPoolExecutor(max_workers=args.threads) as pool:
                return list(pool.map(_run_comparison_arm, plain))
        return [_run_comparison_arm(t) for t in plain]

    results = run_all(tasks)

    report = {"config": config_echo(config), "seeds": seeds, "arms": {}}
    for i, result in enumerate(results):
        task = tasks[i]
        arm_key = task[2] + ("_permuted" if len(task) > 4 else "")
        entry = report["arms"].setdefault(arm_key, {"per_seed": []})
        seed = task[3]
        row = {
            "seed": seed,
            "metrics": result["metrics"],
            "ordinality_vs_genuine": analysis.ordinality_score(
                result["embeddings"], genuine_test_labels),
            "wall_clock_seconds": result["wall_clock_seconds"],
        }
        if len(task) > 4:
            permuted_labels = permuted_sets[seed].labels[permuted_sets[seed].indices("test")]
            row["ordinality_vs_permuted"] = analysis.ordinality_score(
                result["embeddings"], permuted_labels)
        csv_path = os.path.join(out_dir, f"epochs_{arm_key}_seed{seed}.csv")
        _write_epoch_csv(csv_path, result["history"])
        row["epoch_csv"] = csv_path
        if result["history"] and "avg_pos_logit" in result["history"][-1]:
            row["final_avg_pos_logit"] = result["history"][-1]["avg_pos_logit"]
        entry["per_seed"].append(row)

    # Smoothness gaps against the vanilla arm, per seed.
    by_arm_seed = {}
    for i, result in enumerate(results):
        task = tasks[i]
        arm_key = task[2] + ("_permuted" if len(task) > 4 else "")
        by_arm_seed[(arm_key, task[3])] = result
    for arm_key in list(report["arms"]):
        if arm_key == "vanilla" or arm_key.endswith("_permuted"):
            continue
        for row in report["arms"][arm_key]["per_seed"]:
            seed = row["seed"]
            cand = by_arm_seed[(arm_key, seed)]
            ref = by_arm_seed[("vanilla", seed)]
            try:
                row["z_gap_vs_vanilla"] = analysis.z_gap(
                    analysis.compute_nlfd(cand["embeddings"], genuine_test_labels),
                    analysis.compute_nlfd(ref["embeddings"], genuine_test_labels),
                )
            except SupremixError:
                # Degenerate factor distributions (tiny smoke runs).
                row["z_gap_vs_vanilla"] = None

    for arm_key, entry in report["arms"].items():
        rows = entry["per_seed"]
        entry["median_mae"] = float(np.median([r["metrics"]["mae"] for r in rows]))
        entry["median_ordinality_vs_genuine"] = float(np.median(
            [r["ordinality_vs_genuine"] for r in rows]))

    comparisons = {}
    sup_rows = report["arms"]["supremix"]["per_seed"]
    scn_rows = report["arms"]["supcon"]["per_seed"]
    comparisons["supremix_mae_leq_supcon_seeds"] = int(sum(
        s["metrics"]["mae"] <= c["metrics"]["mae"] for s, c in zip(sup_rows, scn_rows)))
    comparisons["z_gap_positive_seeds"] = int(sum(
        r["z_gap_vs_vanilla"] is not None and r["z_gap_vs_vanilla"] > 0
        for r in sup_rows))
    if args.permuted:
        drops_sup = [g["ordinality_vs_genuine"] - p["ordinality_vs_genuine"]
                     for g, p in zip(sup_rows, report["arms"]["supremix_permuted"]["per_seed"])]
        drops_scn = [g["ordinality_vs_genuine"] - p["ordinality_vs_genuine"]
                     for g, p in zip(scn_rows, report["arms"]["supcon_permuted"]["per_seed"])]
        comparisons["ordinality_drop_supremix"] = [float(d) for d in drops_sup]
        comparisons["ordinality_drop_supcon"] = [float(d) for d in drops_scn]
        comparisons["ordinality_drop_supremix_median"] = float(np.median(drops_sup))
        comparisons["ordinality_drop_supcon_median"] = float(np.median(drops_scn))
    report["comparisons"] = comparisons
    _write_json(os.path.join(out_dir, "comparison.json"), report)
    print(json.dumps(comparisons, indent=1))
    return EXIT_OK


def cmd_nlfd(args) -> int:
    out_dir = _ensure_dir(args.out)
    emb = _read_numeric_csv(args.embeddings)
    targets = _read_numeric_csv(args.targets)
    if targets.shape[1] != 1:
        raise ValidationError("targets CSV must have exactly one column")
    if emb.shape[0] != targets.shape[0]:
        raise ValidationError(
            f"length mismatch: {emb.shape[0]} embeddings vs {targets.shape[0]} targets")
    result = analysis.compute_nlfd(emb, targets[:, 0])
    _write_json(os.path.join(out_dir, "nlfd.json"), result.to_dict())
    factors_path = os.path.join(out_dir, "factors.csv")
    with open(factors_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["factor"])
        for value in result.factors:
            writer.writerow([repr(float(value))])
    print(f"nlfd: mean={result.mean:.6f} skewness={result.skewness:.6f} "
          f"excluded={result.excluded_pairs}")
    return EXIT_OK


def _read_numeric_csv(path: str) -> np.ndarray:
    from .errors import CsvFormatError
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        rows = list(reader)
    out = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {i + 2} has {len(row)} cells")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: non-numeric cell {cell!r} at row {i + 2}, column {header[j]!r}"
                ) from None
    return out


def cmd_permute(args) -> int:
    config = load_config(args.config)
    dataset = _load_dataset(config)
    seed = config.resolved_seed(args.seed)
    permuted = data.permute_labels(dataset, data.PermutationSpec(seed=seed))
    data.save_csv(permuted, args.out)
    print(f"wrote permuted dataset to {args.out}")
    return EXIT_OK


def cmd_subsample(args) -> int:
    config = load_config(args.config)
    dataset = _load_dataset(config)
    seed = config.resolved_seed(args.seed)
    smaller = data.subsample(dataset, args.n_train, seed)
    data.save_csv(smaller, args.out)
    print(f"wrote subsampled dataset ({args.n_train} train rows) to {args.out}")
    return EXIT_OK


def cmd_filter_range(args) -> int:
    config = load_config(args.config)
    dataset = _load_dataset(config)
    intervals = []
    for spec in args.exclude:
        try:
            lo, hi = spec.split(":")
            intervals.append((float(lo), float(hi)))
        except ValueError:
            raise ValidationError(f"--exclude expects LO:HI, got {spec!r}") from None
    filtered = data.filter_label_range(dataset, intervals)
    data.save_csv(filtered, args.out)
    print(f"wrote filtered dataset ({filtered.n} rows) to {args.out}")
    return EXIT_OK


def cmd_show_config(args) -> int:
    config = load_config(args.config)
    sys.stdout.write(serialize_config(config))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="supremix",
                                     description="supervised contrastive regression with mixup")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", required=True, help="TOML config path")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=os.cpu_count(),
                       help="worker parallelism cap")
        return p

    p = add("gen-data", cmd_gen_data, help="write a synthetic dataset CSV")
    p.add_argument("--out", required=True, help="output CSV path")

    p = add("pretrain", cmd_pretrain, help="contrastive pretraining")
    p.add_argument("--out", required=True, help="output directory")

    p = add("probe", cmd_probe, help="linear probe on frozen embeddings")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--checkpoint", default=None, help="encoder checkpoint path")
    p.add_argument("--embeddings-csv", default=None,
                   help="bypass the encoder: probe these fixed embeddings (dataset CSV)")

    p = add("train-vanilla", cmd_train_vanilla, help="end-to-end L1 baseline")
    p.add_argument("--out", required=True, help="output directory")

    p = add("verify", cmd_verify, help="run the property checks")
    p.add_argument("--out", required=True, help="output directory")

    p = add("compare", cmd_compare, help="multi-seed arm comparison")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds")
    p.add_argument("--permuted", action="store_true",
                   help="add label-permuted training arms")

    p = sub.add_parser("nlfd", help="analyze externally produced embeddings")
    p.set_defaults(fn=cmd_nlfd)
    p.add_argument("--embeddings", required=True, help="embeddings CSV (numeric, header)")
    p.add_argument("--targets", required=True, help="single-column targets CSV")
    p.add_argument("--out", required=True, help="output directory")

    p = add("permute", cmd_permute, help="write a label-permuted copy of the dataset")
    p.add_argument("--out", required=True, help="output CSV path")

    p = add("subsample", cmd_subsample, help="shrink the train split")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--n-train", type=int, required=True, help="target train size")

    p = add("filter-range", cmd_filter_range, help="drop train labels in intervals")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--exclude", action="append", default=[], metavar="LO:HI",
                   help="closed label interval to remove (repeatable)")

    p = add("show-config", cmd_show_config, help="parse and re-serialize a config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (SupremixError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
