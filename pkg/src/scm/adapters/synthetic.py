"""Weight-free stand-ins for the pretrained models.

Features are box-filtered, block-averaged colour projections; masks are
connected components of an intensity threshold; embeddings are unit vectors
drawn from a seeded hash of the input. Everything is deterministic and cheap,
so the whole pipeline can be exercised without downloading anything.
"""
from __future__ import annotations

import hashlib
import math
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .base import (
    AdapterBundle,
    Embedder,
    EmbeddingVector,
    FeatureExtractor,
    FeaturePyramid,
    MaskGenerator,
    SegmentMaskSet,
    check_image,
    check_terms,
)


def box_downsample(image: np.ndarray, stride: int) -> np.ndarray:
    """Average non-overlapping stride×stride blocks; ragged edges are
    padded by edge replication so the output is ceil(H/s)×ceil(W/s)."""
    H, W = image.shape[:2]
    h, w = math.ceil(H / stride), math.ceil(W / stride)
    pad = ((0, h * stride - H), (0, w * stride - W)) + ((0, 0),) * (image.ndim - 2)
    x = np.pad(image, pad, mode="edge")
    x = x.reshape(h, stride, w, stride, *image.shape[2:])
    return x.mean(axis=(1, 3))


class SyntheticExtractor(FeatureExtractor):
    def __init__(self, seed: int = 0, strides=(8, 16, 32), channels=(4, 8, 16), gain: float = 2.0):
        if len(strides) != 3 or len(channels) != 3:
            raise ValueError("need three strides and three channel counts")
        self.seed = int(seed)
        self.strides = tuple(int(s) for s in strides)
        self.channels = tuple(int(c) for c in channels)
        self.gain = float(gain)
        rng = np.random.default_rng(self.seed)
        self._weights = [rng.normal(size=(c, 3)) for c in self.channels]
        self._bias = [rng.normal(scale=0.5, size=c) for c in self.channels]

    def extract_pyramid(self, image):
        image = check_image(image)
        x = image.astype(np.float64) / 127.5 - 1.0
        levels = []
        for s, w, b in zip(self.strides, self._weights, self._bias):
            pooled = box_downsample(x, s)
            # squashed into (0, 1) so channel means stay positive
            levels.append(0.5 * (1.0 + np.tanh(self.gain * (pooled @ w.T + b))))
        return FeaturePyramid(levels, self.strides, image.shape[:2])


class SyntheticMaskGenerator(MaskGenerator):
    """Bright objects on a darker background, one mask per 4-connected blob.

    Pixels whose mean intensity exceeds the midpoint of the image's intensity
    range are foreground. Images with less than ``min_contrast`` grey levels
    of range yield no masks.
    """

    def __init__(self, min_contrast: float = 16.0, min_area: int = 1):
        self.min_contrast = min_contrast
        self.min_area = min_area

    def generate_masks(self, image, source=1):
        image = check_image(image)
        gray = image.astype(np.float64).mean(axis=2)
        lo, hi = gray.min(), gray.max()
        if hi - lo < self.min_contrast:
            return SegmentMaskSet((), source, gray.shape)
        labels, n = ndimage.label(gray > (lo + hi) / 2)
        masks = []
        for k in range(1, n + 1):
            m = labels == k
            if m.sum() >= self.min_area:
                masks.append(m)
        return SegmentMaskSet(masks, source, gray.shape)


def _hash_unit_vector(seed: int, key: bytes, dim: int) -> np.ndarray:
    digest = hashlib.sha256(seed.to_bytes(8, "little", signed=True) + key).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:16], "little"))
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


class SyntheticEmbedder(Embedder):
    """Hash-based joint embedder.

    Text and image inputs map to pseudo-random unit vectors keyed on their
    content and ``seed``. With a ``palette`` (term -> RGB colour) the embedder
    becomes colour-keyed: an image patch is embedded as the text vector of the
    term whose colour is nearest to the patch's median colour, which lets
    fixtures dictate how patches get classified.
    """

    def __init__(self, seed: int = 0, dim: int = 64,
                 palette: Mapping[str, Sequence[float]] | None = None,
                 template: str | None = None):
        self.seed = int(seed)
        self.dim = int(dim)
        self.template = template
        self.palette = dict(palette) if palette else None
        if self.palette:
            self._palette_terms = list(self.palette)
            self._palette_rgb = np.array([self.palette[t] for t in self._palette_terms], float)

    def _text_vector(self, text: str) -> np.ndarray:
        return _hash_unit_vector(self.seed, b"text:" + text.encode("utf-8"), self.dim)

    def embed_texts(self, terms):
        terms = check_terms(terms)
        return [EmbeddingVector(self._text_vector(t), "text") for t in terms]

    def embed_image(self, patch):
        patch = np.asarray(patch)
        if patch.ndim != 3 or patch.shape[0] == 0 or patch.shape[1] == 0:
            raise ValueError(f"patch must be a non-empty h×w×c raster, got {patch.shape}")
        if self.palette:
            colour = np.median(patch.reshape(-1, patch.shape[2]).astype(float), axis=0)
            term = self._palette_terms[int(np.argmin(((self._palette_rgb - colour) ** 2).sum(1)))]
            text = self.template.format(term=term) if self.template else term
            return EmbeddingVector(self._text_vector(text), "image")
        key = b"image:" + str(patch.shape).encode() + np.ascontiguousarray(patch).tobytes()
        return EmbeddingVector(_hash_unit_vector(self.seed, key, self.dim), "image")


def synthetic_backbone(seed: int = 0, strides=(8, 16, 32), channels=(4, 8, 16), **embedder_kw) -> AdapterBundle:
    """Deterministic adapter bundle that needs no model weights."""
    return AdapterBundle(
        extractor=SyntheticExtractor(seed, strides, channels),
        mask_generator=SyntheticMaskGenerator(),
        embedder=SyntheticEmbedder(seed, **embedder_kw),
    )
