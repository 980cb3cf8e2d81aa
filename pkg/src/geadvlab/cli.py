"""Command-line interface.

Verbs: train-victim, train-gan, attack, transfer-eval, report.  Every
command is a pure function of (config file, input artifacts, seed): reruns
produce byte-identical outputs, except for `timing.json`, which records
wall-clock measurements and is documented as outside the determinism
contract (downstream commands read FPS from it instead of re-measuring).

Exit codes: 0 success, 2 configuration/validation failure, 3 numerical
failure, 4 budget-audit failure.

Heavy imports happen inside the command handlers so that --threads (or
GEADVLAB_THREADS) can cap the BLAS thread pools before numpy first loads.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

from .config import (load_config, require_paths, resolve_config, write_resolved)
from .errors import (AuditError, ConfigError, ContractError, DomainError,
                     FormatError, GeAdvLabError, NumericalError, ShapeError)

_VALIDATION_ERRORS = (ConfigError, FormatError, ShapeError, DomainError, ContractError)


def _configure_threads(threads) -> None:
    if threads is None:
        threads = os.environ.get("GEADVLAB_THREADS")
    if threads is None:
        return
    n = str(int(threads))
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = n


def _checkpoint_paths(base: str):
    return base + ".manifest.json", base + ".payload.bin"


def _require_checkpoint(cfg: dict, key: str):
    """Resolve a checkpoint base path from the config and check both files."""
    base = cfg.get(key)
    if not base:
        raise ConfigError(f"config key {key!r} must be set for this command")
    manifest, payload = _checkpoint_paths(base)
    for path in (manifest, payload):
        if not os.path.exists(path):
            raise ConfigError(f"checkpoint file does not exist: {path}")
    return manifest, payload


def _snapshot(cfg: dict) -> dict:
    """Config copy embedded in checkpoints; output location is not part of
    what defines the training run."""
    snap = dict(cfg)
    snap.pop("out", None)
    return snap


def _write_timing(out_dir: str, payload: dict) -> None:
    # Wall-clock data: the one output excluded from the byte-identity contract.
    with open(os.path.join(out_dir, "timing.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_dataset(cfg: dict):
    from .data import load_idx, synth_dataset

    d = cfg["dataset"]
    if d["kind"] == "synth":
        return synth_dataset(int(d["n"]), int(d["classes"]), tuple(d["shape"]), int(d["seed"]))
    if d["kind"] == "idx":
        require_paths(cfg, ["dataset.images", "dataset.labels"])
        return load_idx(d["images"], d["labels"])
    raise ConfigError(f"unknown dataset kind: {d['kind']!r}")


def _split_dataset(cfg: dict, dataset):
    from .data import split

    return split(dataset, cfg["split"]["fractions"], int(cfg["split"]["seed"]))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_train_victim(args) -> int:
    cfg = resolve_config(load_config(args.config), seed=args.seed, out=args.out,
                         set_overrides=args.set)
    if args.adversarial_training:
        cfg["adversarial_training"] = True
    dataset = _load_dataset(cfg)

    from .data import save_checkpoint
    from .models import build_classifier
    from .rng import RngStream
    from .training import accuracy, train_classifier

    train, probe, held_out = _split_dataset(cfg, dataset)
    net = build_classifier(cfg["arch"], train.images.shape[1:], dataset.class_count,
                           int(cfg["seed"]))
    os.makedirs(cfg["out"], exist_ok=True)
    write_resolved(cfg, cfg["out"])

    log_path = os.path.join(cfg["out"], "accuracy_log.csv")
    t0 = time.perf_counter()
    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_accuracy", "test_accuracy"])

        def on_epoch(rec):
            writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.train_accuracy),
                             repr(accuracy(net, held_out.images, held_out.labels))])

        train_classifier(
            net, train.images, train.labels, epochs=int(cfg["train"]["epochs"]),
            lr=float(cfg["train"]["lr"]), batch_size=int(cfg["train"]["batch_size"]),
            rng=RngStream(int(cfg["seed"])),
            adversarial_epsilon=(float(cfg["adversarial_epsilon"])
                                 if cfg["adversarial_training"] else None),
            optimizer=cfg["train"]["optimizer"], on_epoch=on_epoch)
    wall = time.perf_counter() - t0

    manifest, payload = _checkpoint_paths(os.path.join(cfg["out"], cfg["arch"]))
    save_checkpoint(net, manifest, payload, config=_snapshot(cfg))
    test_acc = accuracy(net, held_out.images, held_out.labels)
    _write_timing(cfg["out"], {"train_seconds": wall})
    print(f"trained {cfg['arch']} ({net.num_params()} params): "
          f"test accuracy {test_acc:.4f}")
    print(f"checkpoint: {manifest}")
    return 0


def cmd_train_gan(args) -> int:
    cfg = resolve_config(load_config(args.config), seed=args.seed, out=args.out,
                         set_overrides=args.set)
    if args.mode is not None:
        cfg["mode"] = args.mode
    if cfg["mode"] not in ("vanilla", "ge"):
        raise ConfigError(f"mode must be vanilla or ge, got {cfg['mode']!r}")
    manifest_in, payload_in = _require_checkpoint(cfg, "source_checkpoint")

    from .data import load_checkpoint, save_checkpoint
    from .losses import LossWeights
    from .models import build_discriminator, build_generator
    from .rng import RngStream
    from .spectral import SpectralConfig
    from .training import TRAIN_LOG_COLUMNS, TrainSchedule, train_advgan

    source = load_checkpoint(manifest_in, payload_in, expected_kind=cfg["arch"])
    dataset = _load_dataset(cfg)
    train, probe, _held_out = _split_dataset(cfg, dataset)

    gan = cfg["gan"]
    schedule = TrainSchedule(
        epochs=int(gan["epochs"]), change_epoch=int(gan["change_epoch"]),
        gen_steps=tuple(gan["gen_steps"]), disc_steps=tuple(gan["disc_steps"]),
        gen_lr=tuple(gan["gen_lr"]), disc_lr=tuple(gan["disc_lr"]),
        batch_size=int(gan["batch_size"]))
    weights = LossWeights(**cfg["weights"])
    spectral = (SpectralConfig(sigma=float(cfg["spectral"]["sigma"]),
                               n_samples=int(cfg["spectral"]["n_samples"]),
                               epsilon=float(cfg["epsilon"]))
                if cfg["mode"] == "ge" else None)
    seed = int(cfg["seed"])
    g_net = build_generator(source.arch.input_shape, seed)
    d_net = build_discriminator(source.arch.input_shape, seed + 1)

    os.makedirs(cfg["out"], exist_ok=True)
    write_resolved(cfg, cfg["out"])
    g_base = os.path.join(cfg["out"], "generator")
    d_base = os.path.join(cfg["out"], "discriminator")
    log_path = os.path.join(cfg["out"], "training_log.csv")

    t0 = time.perf_counter()
    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAIN_LOG_COLUMNS)

        def on_epoch(rec):
            writer.writerow([rec.epoch] + [repr(v) for v in rec.as_row()[1:]])
            fh.flush()
            # per-epoch atomic checkpoints: an interrupted run keeps its last epoch
            save_checkpoint(g_net, *_checkpoint_paths(g_base), config=_snapshot(cfg))
            save_checkpoint(d_net, *_checkpoint_paths(d_base), config=_snapshot(cfg))

        train_advgan(g_net, d_net, source, train.images, train.labels, weights,
                     schedule, mode=cfg["mode"], spectral_cfg=spectral,
                     rng=RngStream(seed + 2), probe_images=probe.images,
                     probe_labels=probe.labels, epsilon=float(cfg["epsilon"]),
                     optimizer=gan["optimizer"], on_epoch=on_epoch)
    wall = time.perf_counter() - t0
    _write_timing(cfg["out"], {"train_seconds": wall})
    print(f"trained {cfg['mode']} GAN for {schedule.epochs} epochs against {cfg['arch']}")
    print(f"checkpoints: {g_base}.*, {d_base}.*")
    return 0


def cmd_attack(args) -> int:
    cfg = resolve_config(load_config(args.config), seed=args.seed, out=args.out,
                         set_overrides=args.set)
    manifest_in, payload_in = _require_checkpoint(cfg, "generator_checkpoint")

    import numpy as np

    from .data import (load_checkpoint, quantize_images, save_idx_images,
                       save_idx_labels)
    from .evaluation import audit_budget, measure_fps
    from .training import adversarial_batch

    g_net = load_checkpoint(manifest_in, payload_in, expected_kind="generator")
    g_config = None
    with open(manifest_in, "r", encoding="utf-8") as fh:
        g_config = json.load(fh).get("config") or {}
    dataset = _load_dataset(cfg)
    _train, _probe, held_out = _split_dataset(cfg, dataset)
    x, y = held_out.images, held_out.labels
    if x.shape[1] != 1:
        raise ConfigError("the quantized IDX archive requires single-channel images")
    epsilon = float(cfg["epsilon"])

    x_adv, fps_value, wall = measure_fps(
        lambda batch: adversarial_batch(g_net, batch, epsilon), x,
        batch_size=int(cfg["attack_batch_size"]))
    max_linf = audit_budget(x_adv, x, epsilon)

    os.makedirs(cfg["out"], exist_ok=True)
    write_resolved(cfg, cfg["out"])
    save_idx_images(os.path.join(cfg["out"], "adv_images.idx"),
                    quantize_images(x_adv[:, 0]))
    save_idx_labels(os.path.join(cfg["out"], "labels.idx"), y)
    np.save(os.path.join(cfg["out"], "adv_images_f64.npy"), x_adv)
    np.save(os.path.join(cfg["out"], "clean_images_f64.npy"), x)
    archive = {
        "source": g_config.get("arch", "unknown"),
        "method": g_config.get("mode", "generator"),
        "epsilon": epsilon,
        "seed": int(cfg["seed"]),
        "n_samples": int(x.shape[0]),
        "max_linf": max_linf,
    }
    with open(os.path.join(cfg["out"], "archive.json"), "w", encoding="utf-8") as fh:
        json.dump(archive, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_timing(cfg["out"], {"n_samples": int(x.shape[0]), "wall_seconds": wall,
                               "fps": fps_value})
    print(f"budget audit: max |x_adv - x|_inf = {max_linf:.8f} <= {epsilon / 255.0:.8f}")
    print(f"archive: {cfg['out']} ({x.shape[0]} samples)")
    return 0


def cmd_transfer_eval(args) -> int:
    cfg = resolve_config(load_config(args.config), seed=args.seed, out=args.out,
                         set_overrides=args.set)
    require_paths(cfg, ["archive"])
    if not cfg["victims"]:
        raise ConfigError("transfer-eval needs a non-empty victims list")
    archive_dir = cfg["archive"]
    for name in ("adv_images_f64.npy", "clean_images_f64.npy", "labels.idx",
                 "archive.json", "timing.json"):
        if not os.path.exists(os.path.join(archive_dir, name)):
            raise ConfigError(f"archive is missing {name}: {archive_dir}")

    import numpy as np

    from .data import load_checkpoint, load_idx_labels
    from .evaluation import evaluate_victims, write_reports_csv

    x_adv = np.load(os.path.join(archive_dir, "adv_images_f64.npy"))
    x = np.load(os.path.join(archive_dir, "clean_images_f64.npy"))
    labels = load_idx_labels(os.path.join(archive_dir, "labels.idx"))
    with open(os.path.join(archive_dir, "archive.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    with open(os.path.join(archive_dir, "timing.json"), "r", encoding="utf-8") as fh:
        fps_value = float(json.load(fh)["fps"])

    victims = []
    for entry in cfg["victims"]:
        manifest, payload = _require_checkpoint(entry, "checkpoint")
        net = load_checkpoint(manifest, payload)
        if tuple(net.arch.input_shape) != tuple(x.shape[1:]):
            raise ShapeError(
                f"victim {entry['id']} expects input {net.arch.input_shape}, "
                f"samples are {x.shape[1:]}")
        victims.append((entry["id"], net))

    t0 = time.perf_counter()
    matrix = evaluate_victims(
        x, x_adv, labels, victims, source_id=meta["source"], method=meta["method"],
        seed=int(meta["seed"]), epsilon=float(meta["epsilon"]), fps_value=fps_value)
    wall = time.perf_counter() - t0

    os.makedirs(cfg["out"], exist_ok=True)
    write_resolved(cfg, cfg["out"])
    csv_path = os.path.join(cfg["out"], "transfer_matrix.csv")
    write_reports_csv(csv_path, matrix.reports, mean_row=True)
    _write_timing(cfg["out"], {"eval_seconds": wall})
    print(f"transfer matrix ({len(victims)} victims, mean ASR {matrix.mean_asr():.4f}): {csv_path}")
    return 0


def cmd_report(args) -> int:
    from .evaluation import CSV_COLUMNS, read_reports_csv

    inputs = []
    for item in args.inputs:
        path, param = item, ""
        if ":" in item and "=" in item.rsplit(":", 1)[1]:
            path, param = item.rsplit(":", 1)
        if not os.path.exists(path):
            raise ConfigError(f"input CSV does not exist: {path}")
        inputs.append((path, param))

    rows = []
    for path, param in inputs:
        for row in read_reports_csv(path):
            row["parameter"] = param
            rows.append(row)

    out_dir = args.out
    if out_dir is None:
        raise ConfigError("report requires --out")
    os.makedirs(out_dir, exist_ok=True)

    long_cols = list(CSV_COLUMNS) + ["parameter"]
    with open(os.path.join(out_dir, "report_long.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(long_cols)
        for row in rows:
            writer.writerow([_csv_cell(row[c]) for c in long_cols])

    groups: dict = {}
    for row in rows:
        key = (row["method"], row["source"], row["victim"], row["epsilon"], row["parameter"])
        groups.setdefault(key, []).append(row)
    summary_cols = ["method", "source", "victim", "epsilon", "parameter", "n_seeds",
                    "asr_mean", "asr_min", "asr_max", "apr_mean", "spr_mean", "fps_mean"]
    with open(os.path.join(out_dir, "report_summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(summary_cols)
        for key in sorted(groups):
            rs = groups[key]
            asr = [r["asr"] for r in rs]
            writer.writerow([
                key[0], key[1], key[2], _csv_cell(key[3]), key[4], len(rs),
                _csv_cell(_mean(asr)), _csv_cell(min(asr)), _csv_cell(max(asr)),
                _csv_cell(_mean([r["apr"] for r in rs])),
                _csv_cell(_mean([r["spr"] for r in rs])),
                _csv_cell(_mean([r["fps"] for r in rs])),
            ])

    params = sorted({r["parameter"] for r in rows if r["parameter"]})
    for param in params:
        fname = "curve_" + param.replace("=", "_") + ".csv"
        with open(os.path.join(out_dir, fname), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["victim", "asr_mean", "asr_min", "asr_max"])
            sub = [r for r in rows if r["parameter"] == param]
            for victim in sorted({r["victim"] for r in sub}):
                asr = [r["asr"] for r in sub if r["victim"] == victim]
                writer.writerow([victim, _csv_cell(_mean(asr)), _csv_cell(min(asr)),
                                 _csv_cell(max(asr))])

    methods = sorted({r["method"] for r in rows})
    victims = sorted({r["victim"] for r in rows})
    print("mean ASR by method and victim:")
    header = "method".ljust(12) + "".join(v.rjust(18) for v in victims)
    print(header)
    for method in methods:
        cells = []
        for victim in victims:
            vals = [r["asr"] for r in rows if r["method"] == method and r["victim"] == victim]
            cells.append((f"{_mean(vals):.4f}" if vals else "-").rjust(18))
        print(method.ljust(12) + "".join(cells))
    return 0


def _mean(vals):
    return sum(vals) / len(vals)


def _csv_cell(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geadvlab",
        description="Train, attack, and evaluate gradient-edited adversarial GANs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", help="JSON config file")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a (dotted) config key; value parsed as JSON")
            p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int,
                       help="cap BLAS threads (also env GEADVLAB_THREADS)")

    p = sub.add_parser("train-victim", help="train a desk classifier")
    common(p)
    p.add_argument("--adversarial-training", action="store_true",
                   help="mix 50%% FGSM examples into every batch")
    p.set_defaults(func=cmd_train_victim)

    p = sub.add_parser("train-gan", help="train the perturbation GAN")
    common(p)
    p.add_argument("--mode", choices=("vanilla", "ge"))
    p.set_defaults(func=cmd_train_gan)

    p = sub.add_parser("attack", help="generate an adversarial sample archive")
    common(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("transfer-eval", help="evaluate an archive on victim models")
    common(p)
    p.set_defaults(func=cmd_transfer_eval)

    p = sub.add_parser("report", help="merge transfer matrices into report tables")
    common(p, needs_config=False)
    p.add_argument("inputs", nargs="+", metavar="CSV[:param=value]",
                   help="transfer matrix CSVs, optionally tagged with a sweep parameter")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_threads(getattr(args, "threads", None))
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except AuditError as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return 4
    except GeAdvLabError as exc:  # any other package error is a validation failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
