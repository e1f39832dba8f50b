"""Zero-shot unsupervised change detection for very-high-resolution imagery.

Bi-temporal features from a pretrained encoder are fused across scales,
compared pixel-wise by cosine distance, optionally weighted by a
prompt-driven building attention map, and split with a global OTSU
threshold.
"""
from .adapters import AdapterBundle, AdapterConfig, FeaturePyramid, ImagePair, synthetic_backbone
from .change import ChangeMap, apply_attention, binarize, cosine_difference, otsu_threshold
from .evaluation import ConfusionCounts, EvalReport, accumulate, render, scores
from .pipeline import RunConfig, run_dataset, run_pair
from .psa import PromptGroups, build_psa, piecewise_remap
from .rff import fuse_base, fuse_top_down

__version__ = "0.1.0"
