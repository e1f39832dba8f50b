"""
Running on LEVIR-CD with pretrained models
==========================================

Needs the LEVIR-CD test split, a FastSAM checkpoint and a CLIP checkpoint
directory on disk, plus ``pip install ultralytics``. Weights are never
downloaded by the library: put them under ``$SCM_WEIGHTS_DIR``::

    $SCM_WEIGHTS_DIR/FastSAM-x.pt
    $SCM_WEIGHTS_DIR/clip-vit-base-patch32/   (a transformers CLIP checkpoint)

The same run from the shell::

    scm run --dataset levir --root $LEVIR_ROOT --variant scm --out runs/levir
"""

import os
import sys

from scm import RunConfig, run_dataset
from scm.adapters import AdapterConfig

root = os.environ.get("LEVIR_ROOT")
if not root or not os.environ.get("SCM_WEIGHTS_DIR"):
    sys.exit("set LEVIR_ROOT and SCM_WEIGHTS_DIR first")

adapter = AdapterConfig(kind="fastsam-clip", weights="FastSAM-x.pt",
                        clip_weights="clip-vit-base-patch32", device="cuda")

for variant in ("base", "rff", "scm"):
    cfg = RunConfig(dataset="levir", root=root, variant=variant,
                    out=f"runs/levir-{variant}", adapter=adapter)
    report = run_dataset(cfg)
    agg = report.aggregate()
    print(f"{variant:5s} F1={100 * agg['f1']:.2f} mIoU={100 * agg['miou']:.2f} OA={100 * agg['oa']:.2f}")
