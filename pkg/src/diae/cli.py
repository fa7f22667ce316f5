"""Command-line interface.

Subcommands
-----------
``train``            train a stack from a config file, writing the model,
                     per-layer trace CSVs and a training report.
``eval``             encode a dataset with a saved model and score it.
``sweep-lambda``     retrain a one-layer model per label-weight value and
                     tabulate the resulting residuals and accuracy.
``baseline``         train and evaluate the unsupervised (lam=0) stack under
                     the same seed and widths for comparison.
``export-features``  dump encoded features plus labels as delimited text.

Configs are flat ``key=value`` text files (``#`` starts a comment); see
:data:`CONFIG_KEYS` and the README for the key reference.  All outputs are
written to a temp file and renamed into place, so failed runs never leave
partial files behind.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field

from .classify import LabeledFeatures, accuracy, fisher_ratio, knn_predict, linear_predict
from .data import Dataset, load_delimited, load_idx, one_hot, subset
from .layer import TrainConfig, TraceRow
from .stack import StackModel, _atomic_write, encode_stack, load_model, save_model, train_stack

__all__ = ["main", "parse_config", "RunConfig", "export_features"]


class ConfigError(ValueError):
    """Raised for unparseable or invalid run configs."""


_DATASET_KEYS = ("format", "images", "labels", "path", "delimiter",
                 "label_column", "skiprows", "subset", "name")

CONFIG_KEYS = tuple(
    [f"train.{k}" for k in _DATASET_KEYS]
    + [f"test.{k}" for k in _DATASET_KEYS]
    + ["seed", "widths", "lam", "mu", "max_iter", "tol", "damping",
       "activation", "clamp", "bregman_rule", "classifier", "out"]
)


@dataclass
class DatasetSpec:
    format: str = ""
    images: str = ""
    labels: str = ""
    path: str = ""
    delimiter: str = ","
    label_column: int = 0
    skiprows: int = 0
    subset: int = 0  # 0 = use everything
    name: str = ""

    def validate(self, role: str) -> None:
        if self.format not in ("idx", "delimited"):
            raise ConfigError(
                f"key {role}.format: expected 'idx' or 'delimited', got {self.format!r}"
            )
        if self.format == "idx" and (not self.images or not self.labels):
            raise ConfigError(f"keys {role}.images and {role}.labels are required for idx data")
        if self.format == "delimited" and not self.path:
            raise ConfigError(f"key {role}.path is required for delimited data")
        if self.subset < 0:
            raise ConfigError(f"key {role}.subset must be non-negative")


@dataclass
class RunConfig:
    train: DatasetSpec = field(default_factory=DatasetSpec)
    test: DatasetSpec = field(default_factory=DatasetSpec)
    seed: int = 0
    widths: list[int] = field(default_factory=list)
    lam: list[float] = field(default_factory=lambda: [10.0])
    mu: float = 1.0
    max_iter: int = 20
    tol: float = 1e-4
    damping: float = 1e-6
    activation: str = "identity"
    clamp: float = 1e-6
    bregman_rule: str = "paper"
    classifier: str = "knn1"
    out: str = "."

    def layer_lams(self) -> list[float]:
        if len(self.lam) == 1:
            return [self.lam[0]] * len(self.widths)
        if len(self.lam) != len(self.widths):
            raise ConfigError(
                f"key lam: got {len(self.lam)} values for {len(self.widths)} layers"
            )
        return list(self.lam)

    def layer_configs(self, lam_override: float | None = None) -> list[TrainConfig]:
        lams = self.layer_lams()
        if lam_override is not None:
            lams = [lam_override] * len(self.widths)
        try:
            return [
                TrainConfig(lam=lams[k], mu=self.mu, max_iter=self.max_iter,
                            tol=self.tol, damping=self.damping, seed=self.seed + k,
                            bregman_rule=self.bregman_rule,
                            activation=self.activation, clamp=self.clamp)
                for k in range(len(self.widths))
            ]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _parse_typed(key: str, value: str):
    try:
        if key in ("seed", "max_iter") or key.endswith((".label_column", ".skiprows", ".subset")):
            return int(value)
        if key in ("mu", "tol", "damping", "clamp"):
            return float(value)
        if key == "widths":
            return [int(v) for v in value.split(",") if v.strip()]
        if key == "lam":
            return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"key {key}: cannot parse value {value!r} ({exc})") from exc
    return value


def parse_config(path) -> RunConfig:
    """Read and validate a flat key=value config file."""
    cfg = RunConfig()
    try:
        lines = open(path, "r", encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        parsed = _parse_typed(key, value)
        if "." in key:
            role, attr = key.split(".", 1)
            setattr(getattr(cfg, role), attr, parsed)
        else:
            setattr(cfg, key, parsed)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig) -> None:
    cfg.train.validate("train")
    if cfg.test.format:
        cfg.test.validate("test")
    if not cfg.widths:
        raise ConfigError("key widths: at least one hidden width is required")
    if any(l < 0 for l in cfg.lam):
        raise ConfigError("key lam: values must be non-negative")
    if cfg.classifier not in ("knn1", "linear"):
        raise ConfigError(
            f"key classifier: expected 'knn1' or 'linear', got {cfg.classifier!r}"
        )
    cfg.layer_lams()
    cfg.layer_configs()  # surfaces bad numeric fields early


def _load_dataset(spec: DatasetSpec, role: str, seed: int) -> Dataset:
    if spec.format == "idx":
        for p in (spec.images, spec.labels):
            if not os.path.exists(p):
                raise ConfigError(f"key {role}.{'images' if p == spec.images else 'labels'}: "
                                  f"file not found: {p}")
        ds = load_idx(spec.images, spec.labels, name=spec.name or role)
    else:
        if not os.path.exists(spec.path):
            raise ConfigError(f"key {role}.path: file not found: {spec.path}")
        ds = load_delimited(spec.path, delimiter=spec.delimiter,
                            label_column=spec.label_column,
                            skiprows=spec.skiprows, name=spec.name or role)
    if spec.subset:
        ds = subset(ds, spec.subset, seed)
    return ds


# ---------------------------------------------------------------------------
# Output helpers


def format_float(v: float) -> str:
    return repr(float(v))


def write_trace_csv(path, trace: list[TraceRow]) -> None:
    lines = ["iter,recon_loss,disc_loss,constraint_residual,objective"]
    for row in trace:
        lines.append(",".join([
            str(row.iteration),
            format_float(row.recon_loss),
            format_float(row.disc_loss),
            format_float(row.constraint_residual),
            format_float(row.objective),
        ]))
    _atomic_write(str(path), ("\n".join(lines) + "\n").encode("utf-8"))


def write_report(path, entries: dict[str, str]) -> str:
    text = "".join(f"{k}={v}\n" for k, v in entries.items())
    _atomic_write(str(path), text.encode("utf-8"))
    return text


def read_report(path) -> dict[str, str]:
    out = {}
    for line in open(path, "r", encoding="utf-8"):
        line = line.rstrip("\n")
        if line and "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def export_features(model: StackModel, ds: Dataset, path) -> None:
    """Write encoded features (one row per sample, label last) as CSV."""
    feats = encode_stack(model, ds.X)
    h = feats.shape[0]
    lines = [",".join([f"f{i}" for i in range(h)] + ["label"])]
    for j in range(feats.shape[1]):
        cells = [format_float(feats[i, j]) for i in range(h)]
        cells.append(str(int(ds.labels[j])))
        lines.append(",".join(cells))
    _atomic_write(str(path), ("\n".join(lines) + "\n").encode("utf-8"))


# ---------------------------------------------------------------------------
# Commands


def _train_stack_timed(cfg: RunConfig, lam_override: float | None = None,
                       state_callback=None):
    train_ds = _load_dataset(cfg.train, "train", cfg.seed)
    labels = one_hot(train_ds.labels, train_ds.n_classes)
    t0 = time.perf_counter()
    model = train_stack(train_ds.X, labels, cfg.widths,
                        cfg.layer_configs(lam_override),
                        state_callback=state_callback)
    elapsed = time.perf_counter() - t0
    return train_ds, model, elapsed


def _train_report_entries(cfg: RunConfig, model: StackModel, train_ds: Dataset,
                          train_seconds: float) -> dict[str, str]:
    entries = {
        "command": "train",
        "dataset": train_ds.name or "train",
        "n_train": str(train_ds.n_samples),
        "n_features": str(train_ds.n_features),
        "widths": ",".join(str(w) for w in model.widths),
        "time.train": format_float(train_seconds),
    }
    for k in range(len(model.layers)):
        for short in ("n_iter", "final_recon_loss", "final_disc_loss",
                      "final_objective", "final_rel_change"):
            key = f"layer{k}.{short}"
            if key in model.meta:
                entries[key] = model.meta[key]
    return entries


def cmd_train(config_path: str) -> int:
    cfg = parse_config(config_path)
    os.makedirs(cfg.out, exist_ok=True)

    states: list = []
    train_ds, model, elapsed = _train_stack_timed(
        cfg, state_callback=lambda k, state: states.append(state))
    save_model(model, os.path.join(cfg.out, "model.diae"))
    for k, state in enumerate(states):
        write_trace_csv(os.path.join(cfg.out, f"trace_layer{k}.csv"), state.trace)
    entries = _train_report_entries(cfg, model, train_ds, elapsed)
    text = write_report(os.path.join(cfg.out, "train_report.txt"), entries)
    sys.stdout.write(text)
    return 0


def _evaluate(model: StackModel, train_ds: Dataset, test_ds: Dataset,
              classifier: str) -> dict[str, str]:
    t0 = time.perf_counter()
    train_feats = encode_stack(model, train_ds.X)
    test_feats = encode_stack(model, test_ds.X)
    encode_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    if classifier == "knn1":
        ref = LabeledFeatures(features=train_feats, labels=train_ds.labels)
        predicted = knn_predict(ref, test_feats, k=1)
    else:
        predicted = linear_predict(model.layers[-1].class_map, test_feats)
    classify_seconds = time.perf_counter() - t0

    acc = accuracy(predicted, test_ds.labels)
    fr = fisher_ratio(LabeledFeatures(features=test_feats, labels=test_ds.labels))
    return {
        "classifier": classifier,
        "accuracy": format_float(acc),
        "fisher_ratio": format_float(fr),
        "n_train": str(train_ds.n_samples),
        "n_test": str(test_ds.n_samples),
        "time.encode": format_float(encode_seconds),
        "time.classify": format_float(classify_seconds),
    }


def cmd_eval(config_path: str, model_path: str, classifier: str | None) -> int:
    cfg = parse_config(config_path)
    if not cfg.test.format:
        raise ConfigError("eval requires test.* dataset keys in the config")
    os.makedirs(cfg.out, exist_ok=True)
    model = load_model(model_path)

    t0 = time.perf_counter()
    train_ds = _load_dataset(cfg.train, "train", cfg.seed)
    test_ds = _load_dataset(cfg.test, "test", cfg.seed)
    load_seconds = time.perf_counter() - t0
    if test_ds.n_features != model.n_features:
        raise ConfigError(
            f"model expects {model.n_features} features but test data has "
            f"{test_ds.n_features}"
        )

    entries = {"command": "eval", "model": model_path,
               "time.load": format_float(load_seconds)}
    entries.update(_evaluate(model, train_ds, test_ds, classifier or cfg.classifier))
    text = write_report(os.path.join(cfg.out, "eval_report.txt"), entries)
    sys.stdout.write(text)
    return 0


def cmd_baseline(config_path: str, classifier: str | None) -> int:
    cfg = parse_config(config_path)
    if not cfg.test.format:
        raise ConfigError("baseline requires test.* dataset keys in the config")
    os.makedirs(cfg.out, exist_ok=True)
    train_ds, model, elapsed = _train_stack_timed(cfg, lam_override=0.0)
    save_model(model, os.path.join(cfg.out, "baseline_model.diae"))
    t0 = time.perf_counter()
    test_ds = _load_dataset(cfg.test, "test", cfg.seed)
    load_seconds = time.perf_counter() - t0
    entries = {"command": "baseline", "model": os.path.join(cfg.out, "baseline_model.diae"),
               "time.load": format_float(load_seconds)}
    entries.update(_evaluate(model, train_ds, test_ds, classifier or cfg.classifier))
    entries["time.train"] = format_float(elapsed)
    text = write_report(os.path.join(cfg.out, "baseline_report.txt"), entries)
    sys.stdout.write(text)
    return 0


def cmd_sweep_lambda(config_path: str, lams: list[float]) -> int:
    cfg = parse_config(config_path)
    if not lams:
        raise ConfigError("sweep-lambda requires at least one lambda value")
    if any(l <= 0 for l in lams):
        raise ConfigError("sweep-lambda values must be strictly positive; "
                          "use the baseline command for the unsupervised case")
    if not cfg.test.format:
        raise ConfigError("sweep-lambda requires test.* dataset keys in the config")
    os.makedirs(cfg.out, exist_ok=True)

    train_ds = _load_dataset(cfg.train, "train", cfg.seed)
    test_ds = _load_dataset(cfg.test, "test", cfg.seed)
    labels = one_hot(train_ds.labels, train_ds.n_classes)
    width = [cfg.widths[0]]

    lines = ["lambda,recon_loss,disc_loss,accuracy"]
    for lam in lams:
        model = train_stack(train_ds.X, labels, width,
                            cfg.layer_configs(lam_override=float(lam))[:1])
        recon = float(model.meta["layer0.final_recon_loss"])
        disc = float(model.meta["layer0.final_disc_loss"])
        scores = _evaluate(model, train_ds, test_ds, "knn1")
        lines.append(",".join([format_float(lam), format_float(recon),
                               format_float(disc), scores["accuracy"]]))
    _atomic_write(os.path.join(cfg.out, "lambda_sweep.csv"),
                  ("\n".join(lines) + "\n").encode("utf-8"))
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_export_features(config_path: str, model_path: str, split: str,
                        out_path: str) -> int:
    cfg = parse_config(config_path)
    model = load_model(model_path)
    if split == "train":
        ds = _load_dataset(cfg.train, "train", cfg.seed)
    else:
        if not cfg.test.format:
            raise ConfigError("export-features --split test requires test.* keys")
        ds = _load_dataset(cfg.test, "test", cfg.seed)
    if ds.n_features != model.n_features:
        raise ConfigError(
            f"model expects {model.n_features} features but data has {ds.n_features}"
        )
    export_features(model, ds, out_path)
    sys.stdout.write(f"wrote {ds.n_samples} feature rows to {out_path}\n")
    return 0


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diae",
        description="Train and evaluate stacked discriminative autoencoders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a stack from a config file")
    p.add_argument("config")

    p = sub.add_parser("eval", help="evaluate a saved model on the configured test set")
    p.add_argument("config")
    p.add_argument("--model", required=True)
    p.add_argument("--classifier", choices=["knn1", "linear"], default=None)

    p = sub.add_parser("sweep-lambda", help="train one-layer models across label weights")
    p.add_argument("config")
    p.add_argument("--lambdas", required=True,
                   help="comma-separated positive label-weight values")

    p = sub.add_parser("baseline", help="train and evaluate the lam=0 stack")
    p.add_argument("config")
    p.add_argument("--classifier", choices=["knn1", "linear"], default=None)

    p = sub.add_parser("export-features", help="write encoded features as CSV")
    p.add_argument("config")
    p.add_argument("--model", required=True)
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args.config)
        if args.command == "eval":
            return cmd_eval(args.config, args.model, args.classifier)
        if args.command == "sweep-lambda":
            lams = [float(v) for v in args.lambdas.split(",") if v.strip()]
            return cmd_sweep_lambda(args.config, lams)
        if args.command == "baseline":
            return cmd_baseline(args.config, args.classifier)
        if args.command == "export-features":
            return cmd_export_features(args.config, args.model, args.split, args.out)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
