"""Command-line pipeline: generate data, train, calibrate, evaluate, export grids.

Subcommands: run, evaluate, boundary-grid, gen-data. Config files are strict
JSON; unknown keys are rejected so a typo cannot silently fall back to a
default. Exit codes: 0 success, 1 runtime contract violation, 2 usage,
config, or IO error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .calibration import select_bias
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .datastore import (
    LabeledSet,
    OpenSplit,
    Standardization,
    fit_standardization,
    gen_gaussian_blobs,
    gen_rings,
    load_csv,
    load_idx,
    save_csv,
    split_known_unknown,
)
from .metrics import evaluate
from .network import knownness_score, predict_open
from .trainer import TrainConfig, finetune_placeholders, pretrain_closed

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_USAGE = 2

GENERATOR_DEFAULTS = {
    "blobs": {"num_classes": 10, "per_class": 300, "dim": 2,
              "center_scale": 4.0, "spread": 0.6, "seed": 0},
    "rings": {"num_classes": 3, "per_class": 300, "noise": 0.05, "seed": 0},
}


class ConfigError(ValueError):
    pass


@dataclass
class DatasetConfig:
    kind: str                 # "blobs" | "rings" | "csv" | "idx"
    params: dict

    def load(self) -> LabeledSet:
        if self.kind == "blobs":
            return gen_gaussian_blobs(**self.params)
        if self.kind == "rings":
            return gen_rings(**self.params)
        if self.kind == "csv":
            return load_csv(self.params["csv"])
        return load_idx(self.params["idx_images"], self.params["idx_labels"])


@dataclass
class CalibrationConfig:
    target_rate: float = 0.95
    intervals: int = 100

    def __post_init__(self):
        if not 0.0 < self.target_rate <= 1.0:
            raise ConfigError(f"target_rate must be in (0, 1], got {self.target_rate}")
        if self.intervals < 1:
            raise ConfigError(f"intervals must be at least 1, got {self.intervals}")


@dataclass
class RunConfig:
    dataset: DatasetConfig
    split: OpenSplit
    train: TrainConfig
    calibration: CalibrationConfig
    output_dir: str


def _check_keys(block: dict, allowed: set[str], where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def parse_dataset_block(block) -> DatasetConfig:
    if not isinstance(block, dict):
        raise ConfigError("dataset block must be an object")
    if "generator" in block:
        name = block["generator"]
        if name not in GENERATOR_DEFAULTS:
            raise ConfigError(f"unknown generator {name!r}, expected one of {sorted(GENERATOR_DEFAULTS)}")
        defaults = GENERATOR_DEFAULTS[name]
        _check_keys(block, {"generator", *defaults}, f"dataset ({name})")
        params = {**defaults, **{k: v for k, v in block.items() if k != "generator"}}
        return DatasetConfig(name, params)
    if "csv" in block:
        _check_keys(block, {"csv"}, "dataset (csv)")
        return DatasetConfig("csv", {"csv": block["csv"]})
    if "idx_images" in block or "idx_labels" in block:
        _check_keys(block, {"idx_images", "idx_labels"}, "dataset (idx)")
        if "idx_images" not in block or "idx_labels" not in block:
            raise ConfigError("idx datasets need both idx_images and idx_labels")
        return DatasetConfig("idx", {"idx_images": block["idx_images"],
                                     "idx_labels": block["idx_labels"]})
    raise ConfigError("dataset block needs a 'generator', 'csv', or 'idx_images'/'idx_labels'")


def _parse_block(block, cls, where: str):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} block must be an object")
    _check_keys(block, {f.name for f in fields(cls)}, where)
    try:
        return cls(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where} block: {exc}") from None


def parse_run_config(doc) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    _check_keys(doc, {"dataset", "split", "train", "calibration", "output_dir"}, "config")
    for key in ("dataset", "split", "train", "output_dir"):
        if key not in doc:
            raise ConfigError(f"config is missing required key {key!r}")
    return RunConfig(
        dataset=parse_dataset_block(doc["dataset"]),
        split=_parse_block(doc["split"], OpenSplit, "split"),
        train=_parse_block(doc["train"], TrainConfig, "train"),
        calibration=_parse_block(doc.get("calibration", {}), CalibrationConfig, "calibration"),
        output_dir=str(doc["output_dir"]),
    )


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def load_run_config(path) -> RunConfig:
    return parse_run_config(_load_json(path))


def _prepared_splits(cfg: RunConfig) -> tuple[LabeledSet, LabeledSet, LabeledSet, Standardization]:
    data = cfg.dataset.load()
    train, val, test = split_known_unknown(data, cfg.split)
    stats = fit_standardization(train.features)
    apply = lambda s: LabeledSet(stats.apply(s.features), s.labels)
    return apply(train), apply(val), apply(test), stats


def cmd_run(config_path) -> int:
    cfg = load_run_config(config_path)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, val, test, stats = _prepared_splits(cfg)

    log_lines: list[str] = []
    model = pretrain_closed(train, cfg.train, log_lines)
    model = finetune_placeholders(model, train, cfg.train, log_lines)

    calib = select_bias(model, val, cfg.calibration.target_rate, cfg.calibration.intervals)
    model.calibration_bias = calib.chosen_bias

    score = "max_softmax" if cfg.train.train_mode == "baseline" else "knownness"
    n_test_classes = len(cfg.split.known_class_ids) + len(cfg.split.unknown_class_ids)
    report = evaluate(model, test, score=score, n_test_classes=n_test_classes)

    save_checkpoint(out_dir / "checkpoint.json", model, cfg.train, stats)
    (out_dir / "training_log.tsv").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    calib_doc = {
        "chosen_bias": calib.chosen_bias,
        "achieved_known_rate": calib.achieved_known_rate,
        "candidate_count": calib.candidate_count,
        "gap_min": calib.gap_min,
        "gap_max": calib.gap_max,
        "target_met": calib.target_met,
    }
    (out_dir / "calibration.json").write_text(json.dumps(calib_doc, indent=2) + "\n", encoding="utf-8")
    (out_dir / "report.json").write_text(report.to_text(), encoding="utf-8")
    return EXIT_OK


def cmd_evaluate(checkpoint_path, config_path) -> int:
    model, _, stats = load_checkpoint(checkpoint_path)
    cfg = load_run_config(config_path)
    data = cfg.dataset.load()
    _, _, test = split_known_unknown(data, cfg.split)
    if stats is not None:
        test = LabeledSet(stats.apply(test.features), test.labels)
    score = "max_softmax" if cfg.train.train_mode == "baseline" else "knownness"
    n_test_classes = len(cfg.split.known_class_ids) + len(cfg.split.unknown_class_ids)
    report = evaluate(model, test, score=score, n_test_classes=n_test_classes)
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_boundary_grid(checkpoint_path, out_path, x_range, y_range, resolution: int) -> int:
    model, _, stats = load_checkpoint(checkpoint_path)
    if model.input_dim != 2:
        raise ValueError(f"boundary grids need a 2-D model, this one takes {model.input_dim} inputs")
    if resolution < 1:
        raise ValueError(f"resolution must be at least 1, got {resolution}")
    xs = np.linspace(x_range[0], x_range[1], resolution)
    ys = np.linspace(y_range[0], y_range[1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    inputs = stats.apply(grid) if stats is not None else grid
    labels = predict_open(model, inputs)
    scores = knownness_score(model, inputs)
    with open(out_path, "w", encoding="utf-8") as f:
        f.write("x,y,label,score\n")
        for (x, y), label, s in zip(grid, labels, scores):
            f.write(f"{float(x)!r},{float(y)!r},{int(label)},{float(s)!r}\n")
    return EXIT_OK


def cmd_gen_data(config_path, out_path) -> int:
    doc = _load_json(config_path)
    if isinstance(doc, dict) and set(doc) == {"dataset"}:
        dataset_cfg = parse_dataset_block(doc["dataset"])
    else:
        dataset_cfg = load_run_config(config_path).dataset
    save_csv(dataset_cfg.load(), out_path)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openset",
                                     description="placeholder-based open-set recognition pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: data, train, calibrate, evaluate")
    p_run.add_argument("--config", required=True)

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint on a config's test split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", required=True)

    p_grid = sub.add_parser("boundary-grid", help="export a decision grid CSV for a 2-D model")
    p_grid.add_argument("--checkpoint", required=True)
    p_grid.add_argument("--out", required=True)
    p_grid.add_argument("--resolution", type=int, default=101)
    p_grid.add_argument("--range", type=float, nargs=4, required=True,
                        metavar=("XMIN", "XMAX", "YMIN", "YMAX"))

    p_gen = sub.add_parser("gen-data", help="write a config's dataset as CSV")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "evaluate":
            return cmd_evaluate(args.checkpoint, args.config)
        if args.command == "boundary-grid":
            rng = args.range
            return cmd_boundary_grid(args.checkpoint, args.out,
                                     (rng[0], rng[1]), (rng[2], rng[3]), args.resolution)
        return cmd_gen_data(args.config, args.out)
    except (ConfigError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
