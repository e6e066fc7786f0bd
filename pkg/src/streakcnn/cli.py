"""Command-line entry point: ``streakcnn synth|train|evaluate|classify|saliency``.

Every subcommand reads a ``key = value`` config (see :mod:`streakcnn.config`)
and writes into the ``--out`` directory. Exit codes: 0 success, 2 usage or
config error, 3 data-format error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics
from .checkpoint import load_checkpoint, save_checkpoint
from .config import Config, load_config
from .data import (Augmenter, MaskSpec, extract_cutout, load_split, normalize, read_catalog,
                   read_cutout, read_frame, read_manifest, read_mask, rejection_reason, write_cutout)
from .errors import ConfigError, FormatError, NumericError, ShapeError, StreakError
from .nn import Network, TrainConfig, TrainState, train
from .saliency import saliency_map, to_bytes
from .synth import SceneConfig, SelectionConfig, make_dataset
from .zoo import ModelConfig, build_variant

log = logging.getLogger("streakcnn")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4
CUTOUT_SHAPE = (1, 64, 64)


def _seed(cfg: Config, args) -> int:
    return args.seed if args.seed is not None else cfg.get_int("seed", 0)


def _load_model(path) -> Network:
    model = load_checkpoint(path).model
    if tuple(model.config.input_shape) != CUTOUT_SHAPE:
        raise ShapeError(f"model in {path} expects input {model.config.input_shape}, cutouts are {CUTOUT_SHAPE}")
    return model


# ---------------------------------------------------------------------------
# synth


def scene_config(cfg: Config, seed: int) -> SceneConfig:
    d = SceneConfig()
    return SceneConfig(
        width=cfg.get_int("scene.width", d.width),
        height=cfg.get_int("scene.height", d.height),
        background=cfg.get_float("scene.background", d.background),
        noise_sigma=cfg.get_float("scene.noise_sigma", d.noise_sigma),
        zero_point=cfg.get_float("scene.zero_point", d.zero_point),
        n_stars=cfg.get_int("scene.n_stars", d.n_stars),
        star_mag=cfg.get_range("scene.star_mag", d.star_mag),
        n_artefacts=cfg.get_int("scene.n_artefacts", d.n_artefacts),
        artefact_mag=cfg.get_range("scene.artefact_mag", d.artefact_mag),
        star_sigma=cfg.get_range("scene.star_sigma", d.star_sigma),
        artefact_sigma_x=cfg.get_range("scene.artefact_sigma_x", d.artefact_sigma_x),
        artefact_sigma_y=cfg.get_range("scene.artefact_sigma_y", d.artefact_sigma_y),
        max_retries=cfg.get_int("scene.max_retries", d.max_retries),
        seed=seed,
    )


def selection_config(cfg: Config) -> SelectionConfig:
    d = SelectionConfig()
    return SelectionConfig(
        per_bin=cfg.get_int("select.per_bin", d.per_bin),
        max_bins=cfg.get_int("select.max_bins", d.max_bins),
        bin_width=cfg.get_float("select.bin_width", d.bin_width),
        balance=cfg.get_bool("select.balance", d.balance),
        mask_band=cfg.get_int("select.mask_band", d.mask_band),
        mask_margin=cfg.get_int("select.mask_margin", d.mask_margin),
    )


def cmd_synth(cfg: Config, args) -> int:
    frames = cfg.get_int("synth.frames")
    if frames < 0:
        raise ConfigError("synth.frames must be >= 0")
    manifest = make_dataset(scene_config(cfg, _seed(cfg, args)), frames, args.out, selection_config(cfg),
                            cfg.get_int("synth.split_seed", None))
    counts = manifest.counts()
    log.info("wrote %d cutouts (%s) to %s", len(manifest.entries),
             ", ".join(f"{s}/{lab}={n}" for (s, lab), n in sorted(counts.items())), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def model_config(cfg: Config) -> ModelConfig:
    if "model.layers" in cfg:
        if "model.variant" in cfg:
            raise ConfigError("set either model.layers or model.variant, not both")
        return ModelConfig.from_text(cfg.get_str("model.name", "custom"), cfg.get_str("model.layers"),
                                     CUTOUT_SHAPE)
    return build_variant(cfg.get_int("model.variant", 3))


def train_config(cfg: Config, seed: int) -> TrainConfig:
    d = TrainConfig()
    return TrainConfig(
        learning_rate=cfg.get_float("train.learning_rate", d.learning_rate),
        batch_size=cfg.get_int("train.batch_size", d.batch_size),
        epochs=cfg.get_int("train.epochs", d.epochs),
        steps_per_epoch=cfg.get_int("train.steps_per_epoch", d.steps_per_epoch),
        seed=seed,
    )


def history_csv(state: TrainState) -> str:
    lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
    for r in state.history:
        values = (r.train_loss, r.train_acc, r.val_loss, r.val_acc)
        lines.append(",".join([str(r.epoch)] + [repr(float(v)) for v in values]))
    return "\n".join(lines) + "\n"


def cmd_train(cfg: Config, args) -> int:
    manifest_path = cfg.get_path("data.manifest")
    root = cfg.get_path("data.root", None) or manifest_path.parent
    manifest = read_manifest(manifest_path)
    train_set = load_split(manifest, "train", root)
    val_set = load_split(manifest, "val", root)
    tcfg = train_config(cfg, _seed(cfg, args))

    resume = cfg.get_path("train.resume", None)
    if resume is not None:
        ck = load_checkpoint(resume)
        model, state = ck.model, ck.state
        tcfg = replace(tcfg, seed=ck.train_config.seed)
    else:
        model, state = Network.initialized(model_config(cfg), tcfg.seed), None

    augmenter = Augmenter() if cfg.get_bool("train.augment", True) else None

    def report(r):
        log.info("epoch %d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f",
                 r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc)

    model, state = train(model, train_set, val_set, augmenter, tcfg, state, on_epoch=report)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "model.rpck", model, tcfg, state)
    (out / "history.csv").write_text(history_csv(state))
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(cfg: Config, args) -> int:
    model = _load_model(cfg.get_path("evaluate.checkpoint"))
    manifest_path = cfg.get_path("data.manifest")
    root = cfg.get_path("data.root", None) or manifest_path.parent
    manifest = read_manifest(manifest_path)
    split = cfg.get_str("evaluate.split", "val")
    x, y = load_split(manifest, split, root)
    scores = model.predict(x) if len(y) else np.zeros(0)

    classes = [args.positive_class]
    if cfg.get_bool("evaluate.both_conventions", False):
        classes = list(metrics.POSITIVE_CLASSES)
    reports = [metrics.build_report(scores, y, args.threshold, pc) for pc in classes]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = "".join(r.to_text(prefix=f"{pc}." if len(classes) > 1 else "") for pc, r in zip(classes, reports))
    (out / "report.txt").write_text(text)
    (out / "roc.csv").write_text(metrics.roc_csv(reports[0].roc_points))
    (out / "histogram.csv").write_text(metrics.histogram_csv(reports[0].histogram))
    rows = ["path,label,p_star"] + [f"{e.path},{e.label},{float(s)!r}" for e, s in zip(manifest.split(split), scores)]
    (out / "scores.csv").write_text("\n".join(rows) + "\n")
    r = reports[0]
    print(f"{split}: n={r.confusion.total} accuracy={r.accuracy:.4f} mcc={r.mcc:.4f} auc={r.auc:.4f}",
          file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# classify


def classify_sources(model: Network, frame: np.ndarray, sources, mask: MaskSpec, threshold: float = 0.5,
                     workers: int = 1) -> list[tuple]:
    """One row per source in catalog order: ``(source, p_star or None, status)``.

    Each source is run through the model on its own, so the result does not
    depend on how many sources share a frame or on ``workers``.
    """
    height, width = frame.shape

    def one(src):
        reason = rejection_reason(src, mask, width, height)
        if reason is not None:
            return src, None, f"skipped({reason})"
        x = normalize(extract_cutout(frame, src.x, src.y))
        p = float(model.predict(x[None])[0])
        return src, p, "star" if p >= threshold else "artefact"

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, sources))
    return [one(s) for s in sources]


def classify_csv(rows) -> str:
    lines = ["id,x,y,mag,flags,p_star,status"]
    for src, p, status in rows:
        p_text = "" if p is None else repr(p)
        # coordinates go back out in the catalog's 1-based convention
        lines.append(f"{src.id},{src.x + 1!r},{src.y + 1!r},{src.mag!r},{src.flags},{p_text},{status}")
    return "\n".join(lines) + "\n"


def cmd_classify(cfg: Config, args) -> int:
    model = _load_model(cfg.get_path("classify.checkpoint"))
    frame = read_frame(cfg.get_path("classify.frame"))
    sources = read_catalog(cfg.get_path("classify.catalog"))
    mask_path = cfg.get_path("classify.mask", None)
    mask = read_mask(mask_path) if mask_path is not None else MaskSpec()
    mask.check_bounds(frame.shape[1], frame.shape[0])
    rows = classify_sources(model, frame, sources, mask, args.threshold, cfg.get_int("classify.workers", 1))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "classify.csv").write_text(classify_csv(rows))
    statuses = [r[2] for r in rows]
    print(f"classified {len(rows)} sources: star={statuses.count('star')} "
          f"artefact={statuses.count('artefact')} skipped(masked)={statuses.count('skipped(masked)')} "
          f"skipped(edge)={statuses.count('skipped(edge)')}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# saliency


def cmd_saliency(cfg: Config, args) -> int:
    model = _load_model(cfg.get_path("saliency.checkpoint"))
    target = cfg.get_str("saliency.target", "star")
    if target not in ("star", "artefact"):
        raise ConfigError(f"saliency.target must be star or artefact, got {target!r}")
    paths = cfg.get_paths("saliency.cutouts")
    names = [p.name for p in paths]
    if len(set(names)) != len(names):
        raise ConfigError("saliency.cutouts contains duplicate basenames")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for p in paths:
        smap = saliency_map(model, normalize(read_cutout(p)), target)
        write_cutout(to_bytes(smap), out / p.name)
    log.info("wrote %d saliency maps to %s", len(paths), out)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "classify": cmd_classify,
    "saliency": cmd_saliency,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streakcnn", description="Star/artefact CNN classifier toolkit.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="key = value config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--threshold", type=float, default=0.5)
    parser.add_argument("--positive-class", choices=metrics.POSITIVE_CLASSES, default="star")
    parser.add_argument("-q", "--quiet", action="store_true", help="only warnings on stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if not 0.0 <= args.threshold <= 1.0:
        print("error: --threshold must lie in [0, 1]", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StreakError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
