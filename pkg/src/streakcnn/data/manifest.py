"""Train/validation manifests.

Text layout::

    # seed=7
    # path	label	split
    cutouts/f0000_s00012.pgm	1	train

Paths are stored as written (normally relative to the manifest's directory).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import FormatError
from .cutouts import normalize
from .pgm import read_cutout

TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    split: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    seed: int = 0

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def counts(self) -> dict[tuple[str, int], int]:
        """Entry count per (split, label)."""
        return dict(Counter((e.split, e.label) for e in self.entries))

    def to_text(self) -> str:
        lines = [f"# seed={self.seed}", "# path\tlabel\tsplit"]
        lines += [f"{e.path}\t{e.label}\t{e.split}" for e in self.entries]
        return "\n".join(lines) + "\n"


def split_dataset(samples: Sequence[tuple[str, int]], seed: int) -> DatasetManifest:
    """Seeded shuffle of ``(path, label)`` pairs; first 80% (floor) train, rest val."""
    if not samples:
        raise ValueError("cannot split an empty sample list")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(len(samples) * TRAIN_FRACTION)
    entries = [
        ManifestEntry(samples[i][0], int(samples[i][1]), "train" if k < n_train else "val")
        for k, i in enumerate(order)
    ]
    return DatasetManifest(entries, seed)


def parse_manifest(lines: Iterable[str]) -> DatasetManifest:
    seed = 0
    entries = []
    for lineno, line in enumerate(lines, start=1):
        text = line.rstrip("\n")
        if not text.strip():
            continue
        if text.startswith("#"):
            body = text[1:].strip()
            if body.startswith("seed="):
                try:
                    seed = int(body[5:])
                except ValueError:
                    raise FormatError(f"manifest line {lineno}: bad seed {body[5:]!r}") from None
            continue
        parts = text.split("\t")
        if len(parts) != 3:
            raise FormatError(f"manifest line {lineno}: expected path<TAB>label<TAB>split")
        path, label, split = parts
        if label not in ("0", "1") or split not in ("train", "val"):
            raise FormatError(f"manifest line {lineno}: bad label {label!r} or split {split!r}")
        entries.append(ManifestEntry(path, int(label), split))
    return DatasetManifest(entries, seed)


def read_manifest(path) -> DatasetManifest:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh)


def write_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(manifest.to_text(), encoding="utf-8")


def load_split(manifest: DatasetManifest, split: str, root) -> tuple[np.ndarray, np.ndarray]:
    """Normalized images ``(N, 64, 64)`` and labels for one split."""
    root = Path(root)
    entries = manifest.split(split)
    if not entries:
        return np.zeros((0, 64, 64)), np.zeros(0, dtype=np.int64)
    images = np.stack([normalize(read_cutout(root / e.path)) for e in entries])
    return images, np.array([e.label for e in entries], dtype=np.int64)
