"""Command-line entry point: dataset synthesis, training, evaluation,
limited-data sweeps, and file inspection.

Every command is deterministic given its flags and seed. A JSON document
passed via ``--config`` supplies defaults; explicit flags override it and
unknown keys are rejected. Exit codes: 0 success, 2 argument error,
3 data/validation error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .acm import attribution_deviation
from .detector import (
    TrainConfig,
    model_from_checkpoint,
    predict,
    to_checkpoint,
    train,
)
from .errors import ArgumentError, AttribspaceError, ValidationError
from .metrics import accuracy_suite, separability
from .store import (
    CHECKPOINT_MAGIC,
    FEATURE_MAGIC,
    AttributionSource,
    FeatureDataset,
    load_checkpoint,
    load_features,
    save_checkpoint,
    save_features,
    split,
)
from .synthbench import SynthSpec, generate

THREADS_ENV = "ATTRIB_SPACE_THREADS"

_CONFIG_KEYS = {
    # synth spec
    "dim", "latent", "n", "sep", "noise", "nonlinear", "shared",
    # training
    "lr", "batch", "rounds", "acm_epochs", "cls_epochs", "source",
    "normalize", "hidden", "bottleneck", "fraction",
    # sweep
    "fractions", "seeds", "holdout",
    # shared
    "seed", "data", "ckpt", "out", "log",
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ArgumentError("config document must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _opt(args, config: dict, key: str, default=None):
    """Flag value if given, else config value, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    return config.get(key, default)


def _require(args, config: dict, key: str):
    value = _opt(args, config, key)
    if value is None:
        raise ArgumentError(f"missing required option --{key.replace('_', '-')}")
    return value


def _check_input_path(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def cmd_synth(args) -> int:
    config = _load_config(args.config)
    spec = SynthSpec(
        dim=int(_require(args, config, "dim")),
        latent_dim=int(_require(args, config, "latent")),
        n_per_class=int(_require(args, config, "n")),
        separation=float(_opt(args, config, "sep", 0.0)),
        noise_sigma=float(_opt(args, config, "noise", 0.0)),
        seed=int(_opt(args, config, "seed", 0)),
        nonlinear=bool(_opt(args, config, "nonlinear", False)),
        shared_embedding=bool(_opt(args, config, "shared", False)),
    )
    out = Path(_require(args, config, "out"))
    dataset = generate(spec)
    save_features(dataset, out)
    Path(str(out) + ".json").write_text(spec.to_json() + "\n")
    n_real, n_fake = dataset.label_counts()
    print(f"wrote {out}: {len(dataset)} records ({n_real} real, {n_fake} generated), dim {dataset.dim}")
    return 0


def _train_config(args, config: dict, seed: int) -> TrainConfig:
    kwargs = {}
    lr = _opt(args, config, "lr")
    if lr is not None:
        kwargs["learning_rate"] = float(lr)
    batch = _opt(args, config, "batch")
    if batch is not None:
        kwargs["batch_size"] = int(batch)
    rounds = _opt(args, config, "rounds")
    if rounds is not None:
        kwargs["rounds"] = int(rounds)
    acm_epochs = _opt(args, config, "acm_epochs")
    if acm_epochs is not None:
        kwargs["acm_epochs_per_round"] = int(acm_epochs)
    cls_epochs = _opt(args, config, "cls_epochs")
    if cls_epochs is not None:
        kwargs["cls_epochs_per_round"] = int(cls_epochs)
    hidden = _opt(args, config, "hidden")
    if hidden is not None:
        kwargs["hidden_dim"] = int(hidden)
    bottleneck = _opt(args, config, "bottleneck")
    if bottleneck is not None:
        kwargs["bottleneck_dim"] = int(bottleneck)
    return TrainConfig(
        source=AttributionSource.parse(_opt(args, config, "source", "real")),
        seed=seed,
        normalize=bool(_opt(args, config, "normalize", False)),
        **kwargs,
    )


def cmd_train(args) -> int:
    config = _load_config(args.config)
    data_path = _check_input_path(_require(args, config, "data"))
    out = Path(_require(args, config, "out"))
    seed = int(_opt(args, config, "seed", 0))
    train_config = _train_config(args, config, seed)

    dataset = load_features(data_path)
    fraction = float(_opt(args, config, "fraction", 1.0))
    if not (0.0 < fraction <= 1.0):
        raise ArgumentError(f"fraction must be in (0, 1], got {fraction}")
    if fraction < 1.0:
        dataset, _ = split(dataset, fraction, seed)

    result = train(dataset, train_config)
    save_checkpoint(to_checkpoint(result.model, train_config), out)

    log_path = Path(_opt(args, config, "log", str(out) + ".log.jsonl"))
    with log_path.open("w") as fh:
        for entry in result.log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    acm_losses = [e["loss"] for e in result.log if e["phase"] == "acm"]
    cls_losses = [e["loss"] for e in result.log if e["phase"] == "classifier"]
    print(
        f"trained on {len(dataset)} records (source {train_config.source.describe()}): "
        f"deviation loss {acm_losses[0]:.4f} -> {acm_losses[-1]:.4f}, "
        f"classifier loss {cls_losses[0]:.4f} -> {cls_losses[-1]:.4f}"
    )
    print(f"checkpoint: {out}")
    print(f"log: {log_path}")
    return 0


def _evaluate(model, dataset: FeatureDataset) -> dict:
    features = dataset.matrix()
    probabilities = predict(model, features)
    report = accuracy_suite(probabilities, dataset.labels)

    deviations = attribution_deviation(model.acm, features)
    mask_real = dataset.labels == 0
    sep_doc: dict | None = None
    if mask_real.any() and (~mask_real).any():
        raw = separability(features[mask_real], features[~mask_real])
        dev = separability(deviations[mask_real], deviations[~mask_real])
        amplification = (
            dev.fisher_ratio / raw.fisher_ratio if raw.fisher_ratio > 0 else None
        )
        sep_doc = {
            "raw": raw.to_dict(),
            "deviation": dev.to_dict(),
            "fisher_amplification": amplification,
        }
    return {"metrics": report.to_dict(), "separability": sep_doc}


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    ckpt_path = _check_input_path(_require(args, config, "ckpt"))
    data_path = _check_input_path(_require(args, config, "data"))

    checkpoint = load_checkpoint(ckpt_path)
    dataset = load_features(data_path)
    if dataset.dim != checkpoint.feature_dim:
        raise ValidationError(
            f"checkpoint expects dim {checkpoint.feature_dim}, data has dim {dataset.dim}"
        )
    doc = _evaluate(model_from_checkpoint(checkpoint), dataset)
    text = _dump_json(doc)
    sys.stdout.write(text)
    out = _opt(args, config, "out")
    if out is not None:
        Path(out).write_text(text)
    return 0


def _parse_number_list(value, what: str) -> list[float]:
    if isinstance(value, (list, tuple)):
        items = [float(v) for v in value]
    else:
        items = [float(v) for v in str(value).split(",") if v.strip()]
    if not items:
        raise ArgumentError(f"empty {what} list")
    return items


def _sweep_workers(n_cells: int) -> int:
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            cap = int(env)
        except ValueError:
            raise ArgumentError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if cap < 1:
            raise ArgumentError(f"{THREADS_ENV} must be >= 1, got {cap}")
    else:
        cap = min(4, os.cpu_count() or 1)
    return max(1, min(cap, n_cells))


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    data_path = _check_input_path(_require(args, config, "data"))
    fractions = _parse_number_list(_require(args, config, "fractions"), "fractions")
    seeds = [int(s) for s in _parse_number_list(_require(args, config, "seeds"), "seeds")]
    for f in fractions:
        if not (0.0 < f <= 1.0):
            raise ArgumentError(f"sweep fractions must be in (0, 1], got {f}")
    holdout = float(_opt(args, config, "holdout", 0.2))
    if not (0.0 < holdout < 1.0):
        raise ArgumentError(f"holdout must be in (0, 1), got {holdout}")
    base_seed = int(_opt(args, config, "seed", 0))
    base_config = _train_config(args, config, base_seed)

    dataset = load_features(data_path)
    pool, held_out = split(dataset, 1.0 - holdout, base_seed)

    # Across cells the manifold fit keeps its epoch count (constant per-sample
    # visits) while classifier epochs scale so probe optimizer steps stay
    # constant; see README. Larger fractions never scale below the configured
    # epoch count.
    pool_batches = math.ceil(len(pool) / base_config.batch_size)

    def run_cell(cell):
        fraction, seed = cell
        cell_train, _ = split(pool, fraction, seed)
        cell_batches = math.ceil(len(cell_train) / base_config.batch_size)
        cls_epochs = max(
            base_config.cls_epochs_per_round,
            round(base_config.cls_epochs_per_round * pool_batches / cell_batches),
        )
        cell_config = TrainConfig(
            learning_rate=base_config.learning_rate,
            batch_size=base_config.batch_size,
            rounds=base_config.rounds,
            acm_epochs_per_round=base_config.acm_epochs_per_round,
            cls_epochs_per_round=cls_epochs,
            source=base_config.source,
            seed=seed,
            normalize=base_config.normalize,
            hidden_dim=base_config.hidden_dim,
            bottleneck_dim=base_config.bottleneck_dim,
        )
        result = train(cell_train, cell_config)
        probabilities = predict(result.model, held_out.matrix())
        report = accuracy_suite(probabilities, held_out.labels)
        return {
            "fraction": fraction,
            "seed": seed,
            "train_records": len(cell_train),
            "cls_epochs_per_round": cls_epochs,
            "metrics": report.to_dict(),
        }

    cells = [(f, s) for f in fractions for s in seeds]
    with ThreadPoolExecutor(max_workers=_sweep_workers(len(cells))) as pool_exec:
        rows = list(pool_exec.map(run_cell, cells))

    doc = {"holdout_fraction": holdout, "holdout_records": len(held_out), "cells": rows}
    out = _opt(args, config, "out")
    if out is not None:
        Path(out).write_text(_dump_json(doc))

    header = f"{'fraction':>9} {'seed':>6} {'records':>8} {'acc':>8} {'ap':>8} {'f1':>8}"
    print(header)
    print("-" * len(header))
    for row in rows:
        m = row["metrics"]
        ap = f"{m['ap']:.4f}" if m["ap"] is not None else "   n/a"
        print(
            f"{row['fraction']:>9.4f} {row['seed']:>6d} {row['train_records']:>8d} "
            f"{m['acc']:>8.4f} {ap:>8} {m['f1']:>8.4f}"
        )
    if out is not None:
        print(f"report: {out}")
    return 0


def cmd_inspect(args) -> int:
    path = _check_input_path(args.path)
    with open(path, "rb") as fh:
        magic8 = fh.read(8)
    if magic8[:4] == FEATURE_MAGIC:
        dataset = load_features(path)
        n_real, n_fake = dataset.label_counts()
        doc = {
            "format": "AFV1",
            "dim": dataset.dim,
            "records": len(dataset),
            "real": n_real,
            "generated": n_fake,
            "tags": sorted(set(dataset.tags)),
        }
    elif magic8 == CHECKPOINT_MAGIC:
        ckpt = load_checkpoint(path)
        doc = {
            "format": "ACMCKPT1",
            "feature_dim": ckpt.feature_dim,
            "bottleneck_dim": ckpt.bottleneck_dim,
            "normalize": ckpt.normalize,
            "seed": ckpt.seed,
            "config": ckpt.config,
            "encoder_layers": [f"{l.in_dim}->{l.out_dim}" for l in ckpt.encoder.layers],
            "decoder_layers": [f"{l.in_dim}->{l.out_dim}" for l in ckpt.decoder.layers],
            "classifier_layers": [f"{l.in_dim}->{l.out_dim}" for l in ckpt.classifier.layers],
        }
    else:
        raise ValidationError(f"unrecognized magic bytes {magic8[:4]!r}")
    sys.stdout.write(_dump_json(doc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attribspace",
        description="Train and evaluate a single-class attribution-space detector.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic two-manifold feature file")
    p.add_argument("--dim", type=int, help="ambient feature dimension")
    p.add_argument("--latent", type=int, help="latent manifold dimension (<= dim/4)")
    p.add_argument("--n", type=int, help="samples per class")
    p.add_argument("--sep", type=float, help="offset between class manifolds (default 0)")
    p.add_argument("--noise", type=float, help="noise sigma (default 0)")
    p.add_argument("--seed", type=int)
    p.add_argument("--nonlinear", action="store_const", const=True, help="tanh-warp the latent")
    p.add_argument("--shared", action="store_const", const=True, help="both classes share the embedding")
    p.add_argument("--out", help="output AFV1 path (a .json spec sidecar is written next to it)")
    p.add_argument("--config", help="JSON config supplying defaults")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train a detector on an AFV1 feature file")
    p.add_argument("--data", help="input AFV1 feature file")
    p.add_argument("--out", help="output checkpoint path")
    p.add_argument("--source", help="attribution source: real|gen[:tag] (default real)")
    p.add_argument("--lr", type=float, help="learning rate (default 2e-4)")
    p.add_argument("--batch", type=int, help="batch size (default 256)")
    p.add_argument("--rounds", type=int, help="alternation rounds (default 10)")
    p.add_argument("--acm-epochs", dest="acm_epochs", type=int, help="manifold epochs per round (default 5)")
    p.add_argument("--cls-epochs", dest="cls_epochs", type=int, help="classifier epochs per round (default 5)")
    p.add_argument("--seed", type=int)
    p.add_argument("--fraction", type=float, help="train on this fraction of the data (default 1.0)")
    p.add_argument("--normalize", action="store_const", const=True, help="L2-normalize features")
    p.add_argument("--hidden", type=int, help="hidden width of the manifold model (default 512)")
    p.add_argument("--bottleneck", type=int, help="bottleneck dim (default: 64 for dim 768, else dim/8)")
    p.add_argument("--log", help="JSON-lines training log path (default <out>.log.jsonl)")
    p.add_argument("--config", help="JSON config supplying defaults")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on an AFV1 feature file")
    p.add_argument("--ckpt", help="checkpoint path")
    p.add_argument("--data", help="AFV1 feature file")
    p.add_argument("--out", help="also write the JSON report here")
    p.add_argument("--config", help="JSON config supplying defaults")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="train at several data fractions, evaluate on a common held-out split")
    p.add_argument("--data", help="AFV1 feature file")
    p.add_argument("--fractions", help="comma-separated training fractions, e.g. 0.1,1.0")
    p.add_argument("--seeds", help="comma-separated seeds, one detector per (fraction, seed)")
    p.add_argument("--holdout", type=float, help="held-out fraction for evaluation (default 0.2)")
    p.add_argument("--out", help="write the JSON table here")
    p.add_argument("--source", help="attribution source: real|gen[:tag] (default real)")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--acm-epochs", dest="acm_epochs", type=int)
    p.add_argument("--cls-epochs", dest="cls_epochs", type=int)
    p.add_argument("--seed", type=int, help="seed for the held-out split")
    p.add_argument("--normalize", action="store_const", const=True)
    p.add_argument("--hidden", type=int)
    p.add_argument("--bottleneck", type=int)
    p.add_argument("--config", help="JSON config supplying defaults")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("inspect", help="dump the header of an AFV1 or ACMCKPT1 file")
    p.add_argument("path", help="file to inspect")
    p.set_defaults(fn=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AttribspaceError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
