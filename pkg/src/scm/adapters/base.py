"""Domain types and the contracts every model adapter must honour."""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import SizeError

MIN_SIDE = 32


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


def check_image(image: np.ndarray) -> np.ndarray:
    """Validate an H×W×3 raster and return it as an array."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H×W×3 raster, got shape {image.shape}")
    if image.shape[0] < MIN_SIDE or image.shape[1] < MIN_SIDE:
        raise SizeError(
            f"raster {image.shape[0]}×{image.shape[1]} is smaller than "
            f"the {MIN_SIDE}×{MIN_SIDE} minimum"
        )
    return image


@dataclass(frozen=True)
class ImagePair:
    """Two co-registered rasters of the same scene."""

    t1: np.ndarray
    t2: np.ndarray
    id: str = ""

    def __post_init__(self):
        t1 = check_image(self.t1)
        t2 = check_image(self.t2)
        if t1.shape != t2.shape:
            raise ValueError(f"bi-temporal shapes differ: {t1.shape} vs {t2.shape}")
        object.__setattr__(self, "t1", _frozen(t1))
        object.__setattr__(self, "t2", _frozen(t2))

    @property
    def shape(self) -> tuple[int, int]:
        return self.t1.shape[:2]


@dataclass(frozen=True)
class FeaturePyramid:
    """Feature maps of the last three encoder stages, finest first."""

    levels: tuple
    strides: tuple
    image_shape: tuple

    def __post_init__(self):
        levels = tuple(np.asarray(lv, dtype=np.float64) for lv in self.levels)
        strides = tuple(int(s) for s in self.strides)
        if len(levels) != 3 or len(strides) != 3:
            raise ValueError("a pyramid has exactly three levels and three strides")
        H, W = (int(d) for d in self.image_shape)
        for lv, s in zip(levels, strides):
            if s < 1:
                raise ValueError(f"stride must be positive, got {s}")
            if lv.ndim != 3 or lv.shape[2] < 1:
                raise ValueError(f"level must be h×w×c with c ≥ 1, got {lv.shape}")
            expected = (math.ceil(H / s), math.ceil(W / s))
            if lv.shape[:2] != expected:
                raise ValueError(
                    f"level at stride {s} has dims {lv.shape[:2]}, expected {expected}"
                )
            if not np.all(np.isfinite(lv)):
                raise ValueError("pyramid contains non-finite values")
        for a, b in zip(levels, levels[1:]):
            if not (a.shape[0] > b.shape[0] and a.shape[1] > b.shape[1]):
                raise ValueError("pyramid spatial dims must strictly decrease")
        object.__setattr__(self, "levels", tuple(_frozen(lv) for lv in levels))
        object.__setattr__(self, "strides", strides)
        object.__setattr__(self, "image_shape", (H, W))

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(lv.shape[2] for lv in self.levels)


@dataclass(frozen=True)
class SegmentMaskSet:
    masks: tuple
    source: int
    shape: tuple = field(default=None)

    def __post_init__(self):
        masks = tuple(np.asarray(m).astype(bool) for m in self.masks)
        shape = self.shape
        if shape is None and masks:
            shape = masks[0].shape
        for m in masks:
            if m.shape != tuple(shape):
                raise ValueError(f"mask shape {m.shape} != image shape {tuple(shape)}")
            if not m.any():
                raise ValueError("masks must have at least one foreground pixel")
        if self.source not in (1, 2):
            raise ValueError(f"source must be 1 or 2, got {self.source}")
        object.__setattr__(self, "masks", tuple(_frozen(m) for m in masks))
        object.__setattr__(self, "shape", None if shape is None else tuple(shape))

    def __len__(self):
        return len(self.masks)

    def __iter__(self):
        return iter(self.masks)


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    modality: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if self.modality not in ("image", "text"):
            raise ValueError(f"unknown modality {self.modality!r}")
        if not np.all(np.isfinite(v)) or not np.any(v):
            raise ValueError("embedding must be finite with non-zero norm")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def dim(self) -> int:
        return self.values.shape[0]


class FeatureExtractor(ABC):
    strides: tuple = (8, 16, 32)

    @abstractmethod
    def extract_pyramid(self, image: np.ndarray) -> FeaturePyramid:
        ...


class MaskGenerator(ABC):
    @abstractmethod
    def generate_masks(self, image: np.ndarray, source: int = 1) -> SegmentMaskSet:
        ...


class Embedder(ABC):
    @abstractmethod
    def embed_image(self, patch: np.ndarray) -> EmbeddingVector:
        ...

    @abstractmethod
    def embed_texts(self, terms: Sequence[str]) -> list[EmbeddingVector]:
        ...


def check_terms(terms: Sequence[str]) -> list[str]:
    terms = list(terms)
    if not terms:
        raise ValueError("term list is empty")
    for t in terms:
        if not isinstance(t, str) or not t.strip():
            raise ValueError(f"blank or non-string term: {t!r}")
    return terms


@dataclass
class AdapterBundle:
    """The extractor / mask generator / embedder triple a pipeline runs on.

    Adapters hold loaded weights and are not thread-safe; give each worker
    its own bundle.
    """

    extractor: FeatureExtractor
    mask_generator: MaskGenerator | None = None
    embedder: Embedder | None = None
