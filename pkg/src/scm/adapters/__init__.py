"""Model adapters: contracts, the synthetic backbone and pretrained wrappers."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigurationError
from .base import (
    AdapterBundle,
    Embedder,
    EmbeddingVector,
    FeatureExtractor,
    FeaturePyramid,
    ImagePair,
    MaskGenerator,
    SegmentMaskSet,
)
from .synthetic import (
    SyntheticEmbedder,
    SyntheticExtractor,
    SyntheticMaskGenerator,
    synthetic_backbone,
)


@dataclass
class AdapterConfig:
    """The ``[adapter]`` block of a run configuration.

    ``kind`` is ``synthetic`` or ``fastsam-clip``. For the latter,
    ``weights`` is the FastSAM checkpoint and ``clip_weights`` a CLIP
    checkpoint directory; relative paths resolve against ``$SCM_WEIGHTS_DIR``.
    """

    kind: str = "synthetic"
    seed: int = 0
    weights: str | None = None
    clip_weights: str | None = None
    device: str = "cpu"
    strides: tuple = (8, 16, 32)
    channels: tuple = (4, 8, 16)


def load_adapters(cfg: AdapterConfig, need_semantics: bool = True) -> AdapterBundle:
    if cfg.kind == "synthetic":
        return synthetic_backbone(cfg.seed, cfg.strides, cfg.channels)
    if cfg.kind == "fastsam-clip":
        from .pretrained import ClipEmbedder, FastSAMAdapter, default_weights_dir

        root = default_weights_dir()

        def resolve(p):
            if p is None:
                return None
            return root / p if root is not None and not p.startswith("/") else p

        sam = FastSAMAdapter(resolve(cfg.weights), cfg.device, cfg.strides)
        clip = ClipEmbedder(resolve(cfg.clip_weights), cfg.device) if need_semantics else None
        return AdapterBundle(sam, sam, clip)
    raise ConfigurationError(f"unknown adapter kind {cfg.kind!r}")


__all__ = [
    "AdapterBundle", "AdapterConfig", "Embedder", "EmbeddingVector", "FeatureExtractor",
    "FeaturePyramid", "ImagePair", "MaskGenerator", "SegmentMaskSet", "SyntheticEmbedder",
    "SyntheticExtractor", "SyntheticMaskGenerator", "load_adapters", "synthetic_backbone",
]
