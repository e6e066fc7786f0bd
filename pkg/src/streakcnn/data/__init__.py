"""Catalogs, frames, cutouts, augmentation and dataset manifests."""

from .augment import AugmentPolicy, Augmenter, augment, hflip, rot180, shift_shear, vflip
from .catalog import SourceRecord, format_catalog, parse_catalog, read_catalog, write_catalog
from .cutouts import (ARTEFACT, STAR, Sample, extract_cutout, normalize,
                      select_stars_by_magnitude, stretch_to_bytes)
from .fits import encode_frame, read_frame, write_frame
from .manifest import (DatasetManifest, ManifestEntry, load_split, parse_manifest,
                       read_manifest, split_dataset, write_manifest)
from .mask import (MaskSpec, Rect, apply_mask, cutout_box, default_mask, parse_mask,
                   read_mask, rejection_reason, write_mask)
from .pgm import decode_pgm, encode_pgm, read_cutout, write_cutout

__all__ = [
    "ARTEFACT", "STAR", "AugmentPolicy", "Augmenter", "DatasetManifest", "ManifestEntry",
    "MaskSpec", "Rect", "Sample", "SourceRecord", "apply_mask", "augment", "cutout_box",
    "decode_pgm", "default_mask", "encode_frame", "encode_pgm", "extract_cutout",
    "format_catalog", "hflip", "load_split", "normalize", "parse_catalog", "parse_manifest",
    "parse_mask", "read_catalog", "read_cutout", "read_frame", "read_manifest", "read_mask",
    "rejection_reason", "rot180", "select_stars_by_magnitude", "shift_shear", "split_dataset",
    "stretch_to_bytes", "vflip", "write_catalog", "write_cutout", "write_frame",
    "write_manifest", "write_mask",
]
