"""Line-oriented ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Keys are dotted
(``train.epochs``); every key must be known, so typos fail loudly instead
of silently falling back to a default. Relative paths resolve against the
directory holding the config file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ConfigError

KNOWN_KEYS = {
    "seed",
    # synth
    "synth.frames", "synth.split_seed",
    "scene.width", "scene.height", "scene.background", "scene.noise_sigma", "scene.zero_point",
    "scene.n_stars", "scene.star_mag", "scene.n_artefacts", "scene.artefact_mag", "scene.star_sigma",
    "scene.artefact_sigma_x", "scene.artefact_sigma_y", "scene.max_retries",
    "select.per_bin", "select.max_bins", "select.bin_width", "select.balance",
    "select.mask_band", "select.mask_margin",
    # train
    "data.manifest", "data.root",
    "model.name", "model.variant", "model.layers",
    "train.learning_rate", "train.batch_size", "train.epochs", "train.steps_per_epoch",
    "train.augment", "train.resume",
    # evaluate / classify / saliency
    "evaluate.checkpoint", "evaluate.split", "evaluate.both_conventions",
    "classify.checkpoint", "classify.frame", "classify.catalog", "classify.mask", "classify.workers",
    "saliency.checkpoint", "saliency.cutouts", "saliency.target",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class Config:
    values: dict[str, str] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def _where(self, key: str) -> str:
        return f"line {self.lines[key]}" if key in self.lines else "override"

    def _convert(self, key, default, conv, kind):
        if key not in self.values:
            if default is ...:
                raise ConfigError(f"missing required key {key!r}")
            return default
        raw = self.values[key]
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"{key} ({self._where(key)}): expected {kind}, got {raw!r}") from None

    def get_str(self, key, default=...):
        return self._convert(key, default, str, "text")

    def get_int(self, key, default=...):
        return self._convert(key, default, int, "an integer")

    def get_float(self, key, default=...):
        return self._convert(key, default, float, "a number")

    def get_bool(self, key, default=...):
        def conv(raw):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        return self._convert(key, default, conv, "true/false")

    def get_range(self, key, default=...):
        """Two comma-separated numbers, e.g. ``11, 16``."""
        def conv(raw):
            parts = [float(p) for p in raw.split(",")]
            if len(parts) != 2 or parts[0] > parts[1]:
                raise ValueError(raw)
            return parts[0], parts[1]
        return self._convert(key, default, conv, "'low, high'")

    def get_path(self, key, default=...):
        raw = self.get_str(key, default)
        if raw is None:
            return None
        p = Path(raw)
        return p if p.is_absolute() else self.base_dir / p

    def get_paths(self, key) -> list[Path]:
        """Whitespace or comma separated paths; shell-style globs expand in sorted order."""
        out: list[Path] = []
        for token in self.get_str(key).replace(",", " ").split():
            p = Path(token) if Path(token).is_absolute() else self.base_dir / token
            if any(ch in token for ch in "*?["):
                out.extend(sorted(p.parent.glob(p.name)))
            else:
                out.append(p)
        return out

    def set(self, key: str, value) -> None:
        self.values[key] = str(value)
        self.lines.pop(key, None)


def parse_config(lines: Iterable[str], base_dir: Path = Path(".")) -> Config:
    cfg = Config(base_dir=base_dir)
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in cfg.values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        cfg.values[key] = value
        cfg.lines[key] = lineno
    return cfg


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text.splitlines(), path.parent)
