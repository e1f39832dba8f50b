"""
Inside the semantic attention map
=================================

Walks through the attention computation step by step: masks, per-patch
building probabilities, per-image score maps, their sum, and the final
piecewise remap.
"""

import numpy as np

from scm.adapters import ImagePair, SyntheticEmbedder, synthetic_backbone
from scm.psa import (
    DEFAULT_TEMPLATE,
    PatchClassifier,
    PromptGroups,
    combine_bitemporal,
    extract_patch,
    piecewise_remap,
    score_image,
)

RED, GREEN = (200, 40, 40), (40, 200, 40)

t1 = np.zeros((128, 128, 3), np.uint8)
t1[10:40, 10:40] = RED
t2 = t1.copy()
t2[70:110, 60:120] = GREEN

adapters = synthetic_backbone(seed=0)
adapters.embedder = SyntheticEmbedder(0, palette={"roof": RED, "playground": GREEN},
                                      template=DEFAULT_TEMPLATE)
prompts = PromptGroups()
print("building terms:    ", ", ".join(prompts.building_terms))
print("non-building terms:", ", ".join(prompts.nonbuilding_terms))

classifier = PatchClassifier(prompts, adapters.embedder)
pair = ImagePair(t1, t2)

maps = []
for source, image in ((1, pair.t1), (2, pair.t2)):
    masks = adapters.mask_generator.generate_masks(image, source)
    for k, mask in enumerate(masks):
        patch = extract_patch(image, mask)
        print(f"image {source} mask {k}: {mask.sum()} px, patch {patch.shape[:2]}, "
              f"p_bld={classifier(patch, k).p_bld:.3g}")
    maps.append(score_image(image, masks, classifier))

combined = combine_bitemporal(*maps)
attention = piecewise_remap(combined)
print("combined score range:", combined.values.min(), combined.values.max())
print("attention on the building:  ", attention[25, 25])
print("attention on the playground:", attention[90, 90])
print("attention on background:    ", attention[60, 5])
