import json

import numpy as np
import pytest
from PIL import Image

from scenes import GREEN, RED, blank_scene, colour_keyed, paint
from scm import cli
from scm.adapters import ImagePair, MaskGenerator, SegmentMaskSet, synthetic_backbone
from scm.errors import ConfigurationError, InferenceError
from scm.evaluation import ConfusionCounts, EvalReport, scores
from scm.pipeline import RunConfig, TileError, run_dataset, run_pair


class NoMasks(MaskGenerator):
    def generate_masks(self, image, source=1):
        return SegmentMaskSet([], source, image.shape[:2])


class Broken(MaskGenerator):
    def generate_masks(self, image, source=1):
        raise InferenceError("model exploded")


def coarse_footprint(shape, r0, r1, c0, c1, stride=32, spread=2):
    """Pixels that can see an edit in rows r0:r1, cols c0:c1.

    The coarsest box filter smears the edit over whole stride-sized cells;
    each interpolation hop can carry it at most one more cell, bounded here
    by ``spread`` cells.
    """
    H, W = shape
    a = max((r0 // stride - spread) * stride, 0)
    b = min(((r1 - 1) // stride + 1 + spread) * stride, H)
    c = max((c0 // stride - spread) * stride, 0)
    d = min(((c1 - 1) // stride + 1 + spread) * stride, W)
    fp = np.zeros(shape, bool)
    fp[a:b, c:d] = True
    return fp


def scene_pair():
    t1 = paint(paint(blank_scene(), 40, 40, 40, 40, RED), 150, 40, 48, 48, GREEN)
    t2 = paint(paint(blank_scene(), 40, 40, 40, 40, RED), 150, 150, 48, 48, GREEN)
    return ImagePair(t1, t2, "scene")


@pytest.mark.parametrize("variant", ["base", "rff", "scm"])
def test_identical_inputs_no_change(variant, rng):
    img = paint(rng.integers(0, 60, (96, 128, 3), dtype=np.uint8), 20, 20, 30, 30, RED)
    cmap, diag = run_pair(ImagePair(img, img, "same"), RunConfig(variant=variant), synthetic_backbone(0))
    assert cmap.values.shape == (96, 128)
    assert not cmap.values.any()
    assert diag["threshold_source"] == "degenerate"


def test_scm_with_zero_attention(rng):
    t1 = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
    t2 = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
    bundle = synthetic_backbone(0)
    bundle.mask_generator = NoMasks()
    cmap, diag = run_pair(ImagePair(t1, t2), RunConfig(variant="scm"), bundle)
    assert not cmap.values.any()
    assert diag["mask_count"] == 0


@pytest.mark.parametrize("seed", range(4))
def test_rff_change_stays_in_footprint(seed):
    r = np.random.default_rng(seed)
    t1 = np.random.default_rng(100).integers(0, 256, (384, 384, 3), dtype=np.uint8)
    r0, c0 = (int(x) for x in r.integers(0, 352, 2))
    t2 = paint(t1, r0, c0, 32, 32, tuple(int(x) for x in r.integers(0, 256, 3)))
    cmap, diag = run_pair(ImagePair(t1, t2), RunConfig(variant="rff"), synthetic_backbone(seed))
    assert diag["changed_pixels"] > 0
    fp = coarse_footprint((384, 384), r0, r0 + 32, c0, c0 + 32)
    assert not cmap.values[~fp].any()


def test_semantic_filtering_reduces_false_positives():
    pair = scene_pair()
    gt = np.zeros(pair.shape, np.uint8)
    fps = {}
    for variant in ("rff", "scm"):
        cmap, diag = run_pair(pair, RunConfig(variant=variant), colour_keyed())
        fps[variant] = int(((cmap.values == 1) & (gt == 0)).sum())
    assert fps["scm"] < fps["rff"]


def test_diagnostics_fields():
    _, diag = run_pair(scene_pair(), RunConfig(variant="scm"), colour_keyed())
    assert {"threshold", "zero_norm_pixels", "mask_count", "patch_count"} <= set(diag)
    assert diag["mask_count"] == 4
    assert 0 <= diag["threshold"] <= 2


def test_threshold_override():
    cmap, diag = run_pair(scene_pair(), RunConfig(variant="rff", threshold=2.0), colour_keyed())
    assert diag["threshold_source"] == "override"
    assert not cmap.values.any()


def test_adapter_errors_carry_tile_id():
    bundle = synthetic_backbone(0)
    bundle.mask_generator = Broken()
    with pytest.raises(TileError, match="scene") as info:
        run_pair(scene_pair(), RunConfig(variant="scm"), bundle)
    assert isinstance(info.value.cause, InferenceError)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        RunConfig(variant="fancy").validate()
    with pytest.raises(ConfigurationError):
        RunConfig(workers=0).validate()


def test_config_file(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text(
        "[run]\ndataset = whu\nroot = /data/whu\nvariant = rff\nworkers = 3\nthreshold =\n"
        "template =\n\n[adapter]\nkind = synthetic\nseed = 7\nchannels = 2,4,8\n"
    )
    cfg = RunConfig.from_file(f, variant="base", out=None)
    assert (cfg.dataset, cfg.root, cfg.variant, cfg.workers) == ("whu", "/data/whu", "base", 3)
    assert cfg.threshold is None and cfg.template is None
    assert cfg.adapter.seed == 7 and cfg.adapter.channels == (2, 4, 8)
    f.write_text("[run]\ncolour = red\n")
    with pytest.raises(ConfigurationError):
        RunConfig.from_file(f)


def write_scene_dataset(root, n=4):
    for sub in ("A", "B", "label"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(7)
    for k in range(n):
        r, c = (int(x) for x in rng.integers(0, 80, 2))
        t1 = paint(blank_scene(128), r, c, 24, 24, RED)
        t2 = paint(t1, 90, 90, 20, 20, RED) if k % 2 else paint(t1, r, c, 24, 24, GREEN)
        lab = np.zeros((128, 128), np.uint8)
        if k % 2:
            lab[90:110, 90:110] = 255
        Image.fromarray(t1).save(root / "A" / f"p{k}.png")
        Image.fromarray(t2).save(root / "B" / f"p{k}.png")
        Image.fromarray(lab).save(root / "label" / f"p{k}.png")


def test_run_dataset_outputs(tmp_path):
    write_scene_dataset(tmp_path / "data")
    cfg = RunConfig(dataset="levir", root=str(tmp_path / "data"), variant="scm", out=str(tmp_path / "out"))
    report = run_dataset(cfg)
    assert [tid for tid, _ in report.per_tile] == ["p0", "p1", "p2", "p3"]
    out = tmp_path / "out"
    for k in range(4):
        for suffix in ("_pred.png", "_cmp.png", "_diag.json"):
            assert (out / f"p{k}{suffix}").exists()
    # aggregate is recomputable from the persisted per-tile counts
    total = ConfusionCounts()
    for k in range(4):
        d = json.loads((out / f"p{k}_diag.json").read_text())
        total = total + ConfusionCounts(d["tp"], d["tn"], d["fp"], d["fn"])
    assert scores(total) == tuple(report.aggregate().values())
    assert EvalReport.read(out / "report.json").aggregate() == report.aggregate()


def test_rerun_is_byte_identical(tmp_path):
    write_scene_dataset(tmp_path / "data")
    digests = []
    for name, workers in (("a", 1), ("b", 1), ("c", 2)):
        cfg = RunConfig(dataset="levir", root=str(tmp_path / "data"), variant="scm",
                        out=str(tmp_path / name), workers=workers)
        run_dataset(cfg)
        digests.append({p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())})
    assert digests[0] == digests[1] == digests[2]


def test_failed_tiles_are_recorded(tmp_path, monkeypatch):
    write_scene_dataset(tmp_path / "data")
    import scm.pipeline as pipeline

    real = pipeline.run_pair

    def flaky(pair, cfg, adapters=None):
        if pair.id == "p2":
            raise TileError(pair.id, InferenceError("boom"))
        return real(pair, cfg, adapters)

    monkeypatch.setattr(pipeline, "run_pair", flaky)
    out = tmp_path / "out"
    report = run_dataset(RunConfig(root=str(tmp_path / "data"), variant="rff", out=str(out)))
    assert len(report.per_tile) == 3
    assert [f["id"] for f in report.failures] == ["p2"]
    assert json.loads((out / "failures.json").read_text())[0]["id"] == "p2"


def test_cli_run_and_eval(tmp_path, capsys):
    write_scene_dataset(tmp_path / "data")
    out = tmp_path / "out"
    code = cli.main(["run", "--dataset", "levir", "--root", str(tmp_path / "data"), "--variant", "rff",
                     "--out", str(out), "--synthetic-backbone", "0"])
    assert code == cli.EXIT_OK
    run_summary = json.loads(capsys.readouterr().out)
    assert run_summary["tiles"] == 4
    code = cli.main(["eval", "--pred", str(out), "--gt", str(tmp_path / "data"),
                     "--out", str(tmp_path / "re.json")])
    assert code == cli.EXIT_OK
    eval_summary = json.loads(capsys.readouterr().out)
    for k in ("f1", "miou", "oa"):
        assert eval_summary[k] == run_summary[k]


def test_cli_empty_dataset(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    code = cli.main(["run", "--root", str(tmp_path / "empty"), "--out", str(tmp_path / "o"),
                     "--synthetic-backbone", "0"])
    assert code == cli.EXIT_EMPTY


def test_cli_bad_config(tmp_path, capsys):
    code = cli.main(["run", "--config", str(tmp_path / "missing.ini"), "--root", "x"])
    assert code == cli.EXIT_USAGE


def test_cli_whu_eval(tmp_path, rng):
    for sub in ("A", "B", "label"):
        (tmp_path / "whu" / sub).mkdir(parents=True)
    base = paint(blank_scene(1100)[:1030], 100, 100, 64, 64, RED)
    Image.fromarray(base).save(tmp_path / "whu" / "A" / "m.tif")
    Image.fromarray(paint(base, 500, 600, 64, 64, RED)).save(tmp_path / "whu" / "B" / "m.tif")
    lab = np.zeros(base.shape[:2], np.uint8)
    lab[500:564, 600:664] = 255
    Image.fromarray(lab).save(tmp_path / "whu" / "label" / "m.tif")
    report = run_dataset(RunConfig(dataset="whu", root=str(tmp_path / "whu"), variant="rff",
                                   out=str(tmp_path / "out")))
    assert len(report.per_tile) == 4
    again = cli.evaluate_predictions(tmp_path / "out", tmp_path / "whu", "whu")
    assert again.aggregate() == report.aggregate()
