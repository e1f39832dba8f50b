"""Prompt-driven semantic attention.

Every segmented object in either image is classified as building or
non-building by comparing its image embedding against two groups of text
prompts; the resulting building probabilities are painted into a score map
per image, the two maps are summed, and the sum is squashed piecewise into
an attention weight in [0, 1].
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .adapters.base import AdapterBundle, Embedder, ImagePair, SegmentMaskSet
from .errors import InferenceError, SCMError

logger = logging.getLogger(__name__)

BUILDING_TERMS = ("roof", "rooftop", "building", "house", "apartment", "residential", "factory")
NONBUILDING_TERMS = ("baseball", "diamond", "bareland", "swimming pool", "basketball court",
                     "roundabout", "playground")
DEFAULT_TEMPLATE = "a satellite photo of a {term}"
DEFAULT_TEMPERATURE = 100.0
MIN_PATCH_SIDE = 16


@dataclass(frozen=True)
class PromptGroups:
    building_terms: tuple = BUILDING_TERMS
    nonbuilding_terms: tuple = NONBUILDING_TERMS

    def __post_init__(self):
        b = tuple(t.strip() for t in self.building_terms)
        n = tuple(t.strip() for t in self.nonbuilding_terms)
        if not b or not n:
            raise ValueError("both prompt groups need at least one term")
        if any(not t for t in b + n):
            raise ValueError("prompt terms must be non-blank")
        overlap = set(b) & set(n)
        if overlap:
            raise ValueError(f"terms appear in both groups: {sorted(overlap)}")
        object.__setattr__(self, "building_terms", b)
        object.__setattr__(self, "nonbuilding_terms", n)

    @property
    def terms(self) -> tuple:
        return self.building_terms + self.nonbuilding_terms

    @classmethod
    def from_file(cls, path) -> "PromptGroups":
        """Read a prompt file.

        Two sections, ``[building]`` and ``[non-building]``, each followed by
        one term per line. Blank lines and ``#`` comments are ignored.
        """
        groups: dict[str, list[str]] = {}
        current = None
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.fullmatch(r"\[\s*([\w -]+?)\s*\]", line)
            if m:
                current = m.group(1).lower().replace("_", "-").replace(" ", "-")
                if current not in ("building", "non-building"):
                    raise ValueError(f"{path}:{lineno}: unknown section [{m.group(1)}]")
                groups.setdefault(current, [])
            elif current is None:
                raise ValueError(f"{path}:{lineno}: term outside a section")
            else:
                groups[current].append(line)
        return cls(tuple(groups.get("building", ())), tuple(groups.get("non-building", ())))


@dataclass(frozen=True)
class PatchScore:
    mask_index: int
    p_bld: float
    probabilities: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class ScoreMap:
    values: np.ndarray
    temporal: object  # 1, 2 or "combined"
    covered: np.ndarray  # pixels touched by at least one mask


def extract_patch(image: np.ndarray, mask: np.ndarray, blank: bool = False,
                  min_side: int = MIN_PATCH_SIDE) -> np.ndarray:
    """Bounding-box crop of ``mask`` from ``image``.

    Sides shorter than ``min_side`` are padded by edge replication, split
    evenly around the crop. With ``blank`` the pixels outside the mask are
    zeroed before padding.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("cannot extract a patch for an empty mask")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    patch = np.array(image[r0:r1, c0:c1])
    if blank:
        patch[~mask[r0:r1, c0:c1]] = 0
    ph = max(min_side - patch.shape[0], 0)
    pw = max(min_side - patch.shape[1], 0)
    if ph or pw:
        pad = ((ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)) + ((0, 0),) * (patch.ndim - 2)
        patch = np.pad(patch, pad, mode="edge")
    return patch


def building_probability(similarities: Sequence[float], n_building: int,
                         temperature: float = DEFAULT_TEMPERATURE) -> tuple[float, np.ndarray]:
    """Softmax the scaled similarities and sum the first ``n_building`` entries."""
    z = temperature * np.asarray(similarities, dtype=np.float64)
    e = np.exp(z - z.max())
    total = e.sum()
    # ratio of sums: equal logits give exactly n_building / n
    return float(e[:n_building].sum() / total), e / total


def render_prompts(terms: Sequence[str], template: str | None = DEFAULT_TEMPLATE) -> list[str]:
    if not template:
        return list(terms)
    return [template.format(term=t) for t in terms]


class PatchClassifier:
    """Caches the text embeddings of a prompt set for repeated patch scoring."""

    def __init__(self, prompts: PromptGroups, embedder: Embedder,
                 template: str | None = DEFAULT_TEMPLATE,
                 temperature: float = DEFAULT_TEMPERATURE):
        self.prompts = prompts
        self.embedder = embedder
        self.temperature = temperature
        try:
            texts = embedder.embed_texts(render_prompts(prompts.terms, template))
        except SCMError:
            raise
        except Exception as exc:
            raise InferenceError(f"text embedding failed: {exc}") from exc
        t = np.stack([e.values for e in texts])
        self._text = t / np.linalg.norm(t, axis=1, keepdims=True)

    def similarities(self, patch: np.ndarray) -> np.ndarray:
        try:
            v = self.embedder.embed_image(patch).values
        except SCMError:
            raise
        except Exception as exc:
            raise InferenceError(f"image embedding failed: {exc}") from exc
        if v.shape[0] != self._text.shape[1]:
            raise InferenceError(
                f"image embedding dim {v.shape[0]} != text embedding dim {self._text.shape[1]}"
            )
        return self._text @ (v / np.linalg.norm(v))

    def __call__(self, patch: np.ndarray, mask_index: int = 0) -> PatchScore:
        p, probs = building_probability(
            self.similarities(patch), len(self.prompts.building_terms), self.temperature
        )
        return PatchScore(mask_index, p, probs)


def classify_patch(patch, prompts: PromptGroups, embedder: Embedder, mask_index: int = 0,
                   template: str | None = DEFAULT_TEMPLATE,
                   temperature: float = DEFAULT_TEMPERATURE) -> PatchScore:
    return PatchClassifier(prompts, embedder, template, temperature)(patch, mask_index)


def rasterize_scores(masks: SegmentMaskSet, scores: Sequence[PatchScore], dims) -> ScoreMap:
    """Paint each mask with its building probability; overlaps keep the maximum."""
    temporal = getattr(masks, "source", None)
    masks = list(masks)
    if len(masks) != len(scores):
        raise ValueError(f"{len(masks)} masks but {len(scores)} scores")
    values = np.zeros(tuple(dims), dtype=np.float64)
    covered = np.zeros(tuple(dims), dtype=bool)
    for m, s in zip(masks, scores):
        values[m] = np.maximum(values[m], s.p_bld)
        covered |= m
    return ScoreMap(values, temporal, covered)


def combine_bitemporal(s1: ScoreMap, s2: ScoreMap, mode: str = "sum") -> ScoreMap:
    """Element-wise sum of two per-image score maps (``mode="mean"`` halves it)."""
    if s1.values.shape != s2.values.shape:
        raise ValueError(f"score maps differ in shape: {s1.values.shape} vs {s2.values.shape}")
    if s1.temporal == "combined" or s2.temporal == "combined":
        raise ValueError("combine_bitemporal expects per-image score maps")
    values = s1.values + s2.values
    if mode == "mean":
        values = values / 2
    elif mode != "sum":
        raise ValueError(f"unknown combine mode {mode!r}")
    return ScoreMap(values, "combined", s1.covered | s2.covered)


def piecewise_remap(combined) -> np.ndarray:
    """1 where the score is ≥ 0.5, twice the score on (0, 0.5), 0 on background.

    Accepts a ScoreMap (background = uncovered pixels) or a bare array
    (background = non-positive score).
    """
    if isinstance(combined, ScoreMap):
        p, covered = combined.values, combined.covered
    else:
        p = np.asarray(combined, dtype=np.float64)
        covered = np.ones(p.shape, dtype=bool)
    out = np.where(p >= 0.5, 1.0, np.where(p > 0, 2.0 * p, 0.0))
    out[~covered] = 0.0
    return out


def score_image(image, masks: SegmentMaskSet, classifier: PatchClassifier,
                blank: bool = False) -> ScoreMap:
    scores = [classifier(extract_patch(image, m, blank), i) for i, m in enumerate(masks)]
    return rasterize_scores(masks, scores, image.shape[:2])


def build_psa(pair: ImagePair, adapters: AdapterBundle, prompts: PromptGroups | None = None,
              template: str | None = DEFAULT_TEMPLATE, temperature: float = DEFAULT_TEMPERATURE,
              combine: str = "sum", blank: bool = False, stats: dict | None = None) -> np.ndarray:
    """Attention map for a pair. ``stats`` (if given) receives mask/patch counts."""
    if adapters.mask_generator is None or adapters.embedder is None:
        raise ValueError("semantic attention needs a mask generator and an embedder")
    prompts = prompts or PromptGroups()
    classifier = PatchClassifier(prompts, adapters.embedder, template, temperature)
    maps = []
    n_masks = 0
    for source, image in ((1, pair.t1), (2, pair.t2)):
        masks = adapters.mask_generator.generate_masks(image, source)
        n_masks += len(masks)
        maps.append(score_image(image, masks, classifier, blank))
    if stats is not None:
        stats["mask_count"] = n_masks
        stats["patch_count"] = n_masks
    return piecewise_remap(combine_bitemporal(*maps, mode=combine))
