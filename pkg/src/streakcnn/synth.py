"""Synthetic polarimeter-like frames with ground-truth star/artefact labels.

Stars are circular Gaussians; reflection artefacts are Gaussians stretched
along x. Both are integrated over pixel areas, sit on a flat background
and receive additive Gaussian read noise. :func:`make_dataset` pushes the
rendered frames through the same catalog/mask/cutout path real data takes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .data.catalog import SourceRecord, write_catalog
from .data.cutouts import ARTEFACT, STAR, extract_cutout, select_stars_by_magnitude
from .data.fits import write_frame
from .data.manifest import DatasetManifest, split_dataset, write_manifest
from .data.mask import CUTOUT_SIZE, MaskSpec, apply_mask, cutout_box, default_mask, write_mask
from .data.pgm import write_cutout
from .errors import ConfigError

FOOTPRINT_SIGMAS = 3.0
STAMP_SIGMAS = 6.0


@dataclass(frozen=True)
class SceneConfig:
    width: int = 1024
    height: int = 1024
    background: float = 1000.0
    noise_sigma: float = 10.0
    zero_point: float = 25.0
    n_stars: int = 250
    star_mag: tuple[float, float] = (11.0, 16.0)
    n_artefacts: int = 10
    artefact_mag: tuple[float, float] = (11.0, 14.0)
    star_sigma: tuple[float, float] = (1.5, 3.0)
    artefact_sigma_x: tuple[float, float] = (6.0, 14.0)
    artefact_sigma_y: tuple[float, float] = (1.5, 3.0)
    seed: int = 0
    max_retries: int = 1000

    def __post_init__(self):
        if self.artefact_sigma_x[0] <= self.artefact_sigma_y[1]:
            raise ConfigError("artefact x-sigma range must lie strictly above the y-sigma range")
        if self.width < 1 or self.height < 1:
            raise ConfigError("frame extents must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be non-negative")


@dataclass(frozen=True)
class TruthObject:
    source: SourceRecord
    label: int
    flux: float
    sigma_x: float
    sigma_y: float

    def footprint(self, x0: int, y0: int, width: int, height: int) -> np.ndarray:
        """Boolean 3-sigma ellipse over the pixel grid ``[y0, y0+height) x [x0, x0+width)``."""
        ys, xs = np.mgrid[y0:y0 + height, x0:x0 + width]
        u = (xs - self.source.x) / (FOOTPRINT_SIGMAS * self.sigma_x)
        v = (ys - self.source.y) / (FOOTPRINT_SIGMAS * self.sigma_y)
        return u * u + v * v <= 1.0

    def cutout_footprint(self, size: int = CUTOUT_SIZE) -> np.ndarray:
        box = cutout_box(self.source.x, self.source.y, size)
        return self.footprint(box.x0, box.y0, size, size)

    def footprint_pixels(self) -> int:
        rx = math.ceil(FOOTPRINT_SIGMAS * self.sigma_x) + 1
        ry = math.ceil(FOOTPRINT_SIGMAS * self.sigma_y) + 1
        cx, cy = round(self.source.x), round(self.source.y)
        return int(self.footprint(cx - rx, cy - ry, 2 * rx + 1, 2 * ry + 1).sum())


def mag_to_flux(mag: float, zero_point: float = 25.0) -> float:
    return 10.0 ** (-0.4 * (mag - zero_point))


def snr(flux: float, noise_sigma: float, footprint_pixels: int) -> float:
    if noise_sigma == 0:
        return math.inf
    return flux / (noise_sigma * math.sqrt(footprint_pixels))


def ground_truth_snr(obj: TruthObject, cfg: SceneConfig) -> float:
    return snr(obj.flux, cfg.noise_sigma, obj.footprint_pixels())


def _add_gaussian(frame: np.ndarray, cx: float, cy: float, flux: float, sx: float, sy: float) -> None:
    """Add a pixel-integrated elliptical Gaussian (axes along x and y)."""
    h, w = frame.shape
    x0, x1 = max(0, math.floor(cx - STAMP_SIGMAS * sx)), min(w - 1, math.ceil(cx + STAMP_SIGMAS * sx))
    y0, y1 = max(0, math.floor(cy - STAMP_SIGMAS * sy)), min(h - 1, math.ceil(cy + STAMP_SIGMAS * sy))
    xe = (np.arange(x0, x1 + 2) - 0.5 - cx) / sx
    ye = (np.arange(y0, y1 + 2) - 0.5 - cy) / sy
    px = np.diff(ndtr(xe))
    py = np.diff(ndtr(ye))
    frame[y0:y1 + 1, x0:x1 + 1] += flux * np.outer(py, px)


def _place(rng: np.random.Generator, cfg: SceneConfig, sx: float, sy: float) -> tuple[float, float]:
    mx, my = FOOTPRINT_SIGMAS * sx, FOOTPRINT_SIGMAS * sy
    for _ in range(cfg.max_retries):
        x = rng.uniform(0.0, cfg.width - 1.0)
        y = rng.uniform(0.0, cfg.height - 1.0)
        if mx <= x <= cfg.width - 1 - mx and my <= y <= cfg.height - 1 - my:
            return x, y
    raise ConfigError(f"could not place a {sx:.1f}x{sy:.1f} px object inside the frame "
                      f"after {cfg.max_retries} draws")


def render_scene(cfg: SceneConfig) -> tuple[np.ndarray, list[TruthObject]]:
    """Render one frame. Truth objects come back in catalog order (by y, then x)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5CE4E]))
    drafts = []
    for _ in range(cfg.n_stars):
        mag = rng.uniform(*cfg.star_mag)
        s = rng.uniform(*cfg.star_sigma)
        x, y = _place(rng, cfg, s, s)
        drafts.append((x, y, mag, STAR, s, s))
    for _ in range(cfg.n_artefacts):
        mag = rng.uniform(*cfg.artefact_mag)
        sx = rng.uniform(*cfg.artefact_sigma_x)
        sy = rng.uniform(*cfg.artefact_sigma_y)
        x, y = _place(rng, cfg, sx, sy)
        drafts.append((x, y, mag, ARTEFACT, sx, sy))

    frame = np.full((cfg.height, cfg.width), float(cfg.background))
    truth = []
    for k, (x, y, mag, label, sx, sy) in enumerate(sorted(drafts, key=lambda d: (d[1], d[0])), start=1):
        flux = mag_to_flux(mag, cfg.zero_point)
        _add_gaussian(frame, x, y, flux, sx, sy)
        truth.append(TruthObject(SourceRecord(k, x, y, mag, 0), label, flux, sx, sy))
    if cfg.noise_sigma > 0:
        frame += rng.normal(0.0, cfg.noise_sigma, size=frame.shape)
    return frame, truth


# ---------------------------------------------------------------------------
# truth files


def format_truth(truth: list[TruthObject]) -> str:
    lines = ["# id\tlabel\tx\ty\tmag\tflux\tsigma_x\tsigma_y"]
    for t in truth:
        s = t.source
        lines.append(f"{s.id}\t{t.label}\t{s.x!r}\t{s.y!r}\t{s.mag!r}\t{t.flux!r}\t{t.sigma_x!r}\t{t.sigma_y!r}")
    return "\n".join(lines) + "\n"


def read_truth(path) -> list[TruthObject]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        f = line.split("\t")
        out.append(TruthObject(
            SourceRecord(int(f[0]), float(f[2]), float(f[3]), float(f[4]), 0),
            int(f[1]), float(f[5]), float(f[6]), float(f[7]),
        ))
    return out


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class SelectionConfig:
    """How sources become training cutouts."""

    per_bin: int = 1
    max_bins: int = 5
    bin_width: float = 1.0
    balance: bool = True
    mask_band: int = 16
    mask_margin: int = 16


def frame_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def select_training_objects(truth: list[TruthObject], mask: MaskSpec, cfg: SceneConfig,
                            sel: SelectionConfig, rng: np.random.Generator) -> list[TruthObject]:
    """Stars by magnitude bin and artefacts from unmasked sources, optionally balanced."""
    by_id = {t.source.id: t for t in truth}
    kept, _ = apply_mask([t.source for t in truth], mask, (cfg.width, cfg.height))
    stars = [s for s in kept if by_id[s.id].label == STAR]
    artefacts = [s for s in kept if by_id[s.id].label == ARTEFACT]
    stars = select_stars_by_magnitude(stars, sel.bin_width, sel.per_bin, sel.max_bins)
    if sel.balance:
        n = min(len(stars), len(artefacts))
        if len(stars) > n:
            stars = [stars[i] for i in sorted(rng.choice(len(stars), n, replace=False))]
        if len(artefacts) > n:
            artefacts = [artefacts[i] for i in sorted(rng.choice(len(artefacts), n, replace=False))]
    chosen = {s.id for s in stars} | {s.id for s in artefacts}
    return [t for t in truth if t.source.id in chosen]


def make_dataset(cfg: SceneConfig, n_frames: int, out_dir, selection: SelectionConfig = SelectionConfig(),
                 split_seed: int | None = None) -> DatasetManifest:
    """Render ``n_frames`` scenes and write frames, catalogs, truth, cutouts and a manifest.

    Layout under ``out_dir``: ``frames/``, ``catalogs/``, ``truth/``,
    ``cutouts/``, ``mask.txt`` and ``manifest.tsv``.
    """
    out = Path(out_dir)
    for sub in ("frames", "catalogs", "truth", "cutouts"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    mask = default_mask(cfg.width, cfg.height, selection.mask_band, selection.mask_margin)
    mask.check_bounds(cfg.width, cfg.height)
    write_mask(mask, out / "mask.txt")

    samples: list[tuple[str, int]] = []
    for index in range(n_frames):
        seed = frame_seed(cfg.seed, index)
        frame, truth = render_scene(replace(cfg, seed=seed))
        # cutouts must match what a reader of the stored float32 frame sees
        frame = frame.astype(np.float32).astype(np.float64)
        name = f"frame_{index:04d}"
        write_frame(frame, out / "frames" / f"{name}.fits")
        write_catalog([t.source for t in truth], out / "catalogs" / f"{name}.cat")
        (out / "truth" / f"{name}.tsv").write_text(format_truth(truth))
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E1]))
        for t in select_training_objects(truth, mask, cfg, selection, rng):
            rel = f"cutouts/f{index:04d}_s{t.source.id:05d}.pgm"
            write_cutout(extract_cutout(frame, t.source.x, t.source.y), out / rel)
            samples.append((rel, t.label))

    seed = cfg.seed if split_seed is None else split_seed
    manifest = split_dataset(samples, seed) if samples else DatasetManifest([], seed)
    write_manifest(manifest, out / "manifest.tsv")
    return manifest
