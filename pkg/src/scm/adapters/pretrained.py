"""Wrappers around FastSAM (via ultralytics) and CLIP (via transformers).

Both load weights from local paths only. The heavy libraries are imported
lazily so the rest of the package works without them.
"""
from __future__ import annotations

import logging
import math
import os
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, InferenceError
from .base import (
    Embedder,
    EmbeddingVector,
    FeatureExtractor,
    FeaturePyramid,
    MaskGenerator,
    SegmentMaskSet,
    check_image,
    check_terms,
)

logger = logging.getLogger(__name__)

# YOLOv8-seg backbone layers emitting the stride 8/16/32 (P3/P4/P5) maps
DEFAULT_FASTSAM_LAYERS = (4, 6, 9)


def _require_file(path, what):
    if path is None:
        raise ConfigurationError(f"no weights path configured for {what}")
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"{what} weights not found at {path}")
    return path


class FastSAMAdapter(FeatureExtractor, MaskGenerator):
    """Multi-scale encoder features and 'segment everything' masks from FastSAM."""

    def __init__(self, weights, device="cpu", strides=(8, 16, 32), layers=DEFAULT_FASTSAM_LAYERS,
                 imgsz=1024, conf=0.4, iou=0.9):
        self.weights = _require_file(weights, "FastSAM")
        self.device = device
        self.strides = tuple(strides)
        self.layers = tuple(layers)
        self.imgsz = imgsz
        self.conf = conf
        self.iou = iou
        try:
            from ultralytics import FastSAM
        except ImportError as exc:
            raise ConfigurationError("FastSAM adapter needs the 'ultralytics' package") from exc
        self._model = FastSAM(str(self.weights))

    def extract_pyramid(self, image):
        import torch

        image = check_image(image)
        H, W = image.shape[:2]
        net = self._model.model.to(self.device).eval()
        size = max(self.strides)
        ph, pw = math.ceil(H / size) * size, math.ceil(W / size) * size
        x = np.pad(image, ((0, ph - H), (0, pw - W), (0, 0)), mode="edge")
        x = torch.from_numpy(x.astype(np.float32) / 255.0).permute(2, 0, 1)[None].to(self.device)

        captured = {}
        hooks = [
            net.model[i].register_forward_hook(lambda m, inp, out, i=i: captured.__setitem__(i, out))
            for i in self.layers
        ]
        try:
            with torch.no_grad():
                net(x)
        except Exception as exc:
            raise InferenceError(f"FastSAM forward pass failed: {exc}") from exc
        finally:
            for h in hooks:
                h.remove()

        levels = []
        for i, s in zip(self.layers, self.strides):
            f = captured[i][0].permute(1, 2, 0).float().cpu().numpy()
            levels.append(f[: math.ceil(H / s), : math.ceil(W / s)])
        return FeaturePyramid(levels, self.strides, (H, W))

    def generate_masks(self, image, source=1):
        image = check_image(image)
        try:
            results = self._model(
                np.ascontiguousarray(image[:, :, ::-1]),  # ultralytics expects BGR arrays
                device=self.device, retina_masks=True, imgsz=self.imgsz,
                conf=self.conf, iou=self.iou, verbose=False,
            )
        except Exception as exc:
            raise InferenceError(f"FastSAM mask generation failed: {exc}") from exc
        masks = []
        if results and results[0].masks is not None:
            data = results[0].masks.data.cpu().numpy() > 0.5
            for m in data:
                if m.shape != image.shape[:2]:
                    from PIL import Image

                    m = np.asarray(Image.fromarray(m).resize(image.shape[1::-1], Image.NEAREST))
                if m.any():
                    masks.append(m)
        return SegmentMaskSet(masks, source, image.shape[:2])


class ClipEmbedder(Embedder):
    """Joint image/text embeddings from a locally stored CLIP checkpoint directory."""

    def __init__(self, weights, device="cpu"):
        self.weights = _require_file(weights, "CLIP")
        self.device = device
        try:
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ConfigurationError("CLIP adapter needs the 'transformers' package") from exc
        self._model = CLIPModel.from_pretrained(str(self.weights), local_files_only=True).to(device).eval()
        self._processor = CLIPProcessor.from_pretrained(str(self.weights), local_files_only=True)

    def embed_image(self, patch):
        import torch

        patch = np.asarray(patch)
        if patch.ndim != 3 or patch.size == 0:
            raise ValueError(f"patch must be a non-empty h×w×3 raster, got {patch.shape}")
        try:
            inputs = self._processor(images=patch, return_tensors="pt").to(self.device)
            with torch.no_grad():
                v = self._model.get_image_features(**inputs)[0]
        except Exception as exc:
            raise InferenceError(f"CLIP image encoder failed: {exc}") from exc
        return EmbeddingVector(v.cpu().numpy(), "image")

    def embed_texts(self, terms):
        import torch

        terms = check_terms(terms)
        try:
            inputs = self._processor(text=terms, return_tensors="pt", padding=True).to(self.device)
            with torch.no_grad():
                v = self._model.get_text_features(**inputs)
        except Exception as exc:
            raise InferenceError(f"CLIP text encoder failed: {exc}") from exc
        return [EmbeddingVector(row, "text") for row in v.cpu().numpy()]


def default_weights_dir() -> Path | None:
    d = os.environ.get("SCM_WEIGHTS_DIR")
    return Path(d) if d else None
