"""LEVIR-CD / WHU-CD ingestion and sliding-window tiling.

Expected layouts (``root`` may also contain these under ``test/``)::

    LEVIR-CD              WHU-CD
    root/A/<id>.png       root/A/<mosaic>.tif     (earlier image)
    root/B/<id>.png       root/B/<mosaic>.tif     (later image)
    root/label/<id>.png   root/label/<mosaic>.tif (binary change label)
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image

from .adapters.base import ImagePair
from .errors import IngestionError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".tif", ".tiff", ".jpg", ".jpeg", ".bmp")
WHU_TILE = 1024


@dataclass(frozen=True)
class GroundTruth:
    mask: np.ndarray  # H×W uint8 in {0, 1}
    id: str = ""

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2 or not np.isin(m, (0, 1)).all():
            raise ValueError("ground truth must be a 2-D {0,1} raster")
        object.__setattr__(self, "mask", m.astype(np.uint8))


@dataclass(frozen=True)
class TileSpec:
    row_start: int
    col_start: int
    size: int
    source_dims: tuple

    def __post_init__(self):
        H, W = self.source_dims
        if self.row_start < 0 or self.col_start < 0 or self.size < 1:
            raise ValueError(f"invalid tile {self}")
        if self.row_start + self.size > H or self.col_start + self.size > W:
            raise ValueError(f"tile {self} does not fit a {H}×{W} source")

    @property
    def window(self):
        return (slice(self.row_start, self.row_start + self.size),
                slice(self.col_start, self.col_start + self.size))


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def read_label(path) -> np.ndarray:
    """Load a change label as {0,1}; 8-bit labels are split at >127."""
    with Image.open(path) as im:
        if im.mode == "1":
            return np.asarray(im, dtype=np.uint8)
        arr = np.asarray(im.convert("L"))
    return (arr > 127).astype(np.uint8)


def _find_split(root: Path) -> Path:
    for cand in (root, root / "test"):
        if (cand / "A").is_dir():
            return cand
    return root


def _list_images(d: Path) -> list[Path]:
    if not d.is_dir():
        return []
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _counterpart(d: Path, stem: str) -> Path:
    for suffix in IMAGE_SUFFIXES:
        p = d / (stem + suffix)
        if p.exists():
            return p
    raise IngestionError(f"missing counterpart for {stem!r} in {d}")


def enumerate_levir(root) -> Iterator[tuple[ImagePair, GroundTruth]]:
    """Stream the LEVIR-CD pairs under ``root`` in filename order."""
    split = _find_split(Path(root))
    files = _list_images(split / "A")
    if not files:
        logger.warning("no LEVIR-CD images found under %s", root)
        return
    for a in files:
        b = _counterpart(split / "B", a.stem)
        lab = _counterpart(split / "label", a.stem)
        pair = ImagePair(read_image(a), read_image(b), a.stem)
        gt = GroundTruth(read_label(lab), a.stem)
        if gt.mask.shape != pair.shape:
            raise IngestionError(f"label {lab} is {gt.mask.shape}, images are {pair.shape}")
        yield pair, gt


def tile_whu(dims, tile: int = WHU_TILE) -> list[TileSpec]:
    """Overlapping tile grid with equidistant starts covering the whole source.

    A ``dims`` = (H, W) source gets ceil(H/tile) × ceil(W/tile) windows; along
    each axis the k-th of n starts is round(k · (dim − tile) / (n − 1)).
    """
    H, W = (int(d) for d in dims)
    if H < tile or W < tile:
        raise ValueError(f"source {H}×{W} is smaller than the {tile} px tile")

    def starts(dim):
        n = math.ceil(dim / tile)
        if n == 1:
            return [0]
        return [round(k * (dim - tile) / (n - 1)) for k in range(n)]

    return [TileSpec(r, c, tile, (H, W)) for r in starts(H) for c in starts(W)]


def read_tile(source: np.ndarray, spec: TileSpec) -> np.ndarray:
    H, W = source.shape[:2]
    if spec.row_start + spec.size > H or spec.col_start + spec.size > W:
        raise ValueError(f"tile {spec} out of bounds for a {H}×{W} source")
    return np.array(source[spec.window])


def tile_id(spec: TileSpec) -> str:
    return f"r{spec.row_start:05d}_c{spec.col_start:05d}"


def _single_image(d: Path) -> Path:
    files = _list_images(d)
    if len(files) != 1:
        raise IngestionError(f"expected exactly one mosaic in {d}, found {len(files)}")
    return files[0]


def load_whu_mosaic(root):
    split = _find_split(Path(root))
    prev = Image.MAX_IMAGE_PIXELS
    Image.MAX_IMAGE_PIXELS = None  # the full mosaic is ~5e8 pixels
    try:
        a = read_image(_single_image(split / "A"))
        b = read_image(_single_image(split / "B"))
        lab = read_label(_single_image(split / "label"))
    finally:
        Image.MAX_IMAGE_PIXELS = prev
    if not (a.shape == b.shape and a.shape[:2] == lab.shape):
        raise IngestionError(f"WHU mosaics disagree in size: {a.shape}, {b.shape}, {lab.shape}")
    return a, b, lab


def enumerate_whu(root, tile: int = WHU_TILE) -> Iterator[tuple[ImagePair, GroundTruth]]:
    split = _find_split(Path(root))
    if not _list_images(split / "A"):
        logger.warning("no WHU-CD mosaic found under %s", root)
        return
    a, b, lab = load_whu_mosaic(root)
    for spec in tile_whu(a.shape[:2], tile):
        tid = tile_id(spec)
        yield (ImagePair(read_tile(a, spec), read_tile(b, spec), tid),
               GroundTruth(read_tile(lab, spec), tid))


def enumerate_dataset(kind: str, root) -> Iterator[tuple[ImagePair, GroundTruth]]:
    if kind == "levir":
        return enumerate_levir(root)
    if kind == "whu":
        return enumerate_whu(root)
    raise ValueError(f"unknown dataset {kind!r}")
