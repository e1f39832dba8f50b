import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from oracles import pixel_union_covers
from scm.datasets import (
    GroundTruth,
    TileSpec,
    enumerate_levir,
    enumerate_whu,
    read_label,
    read_tile,
    tile_whu,
)
from scm.errors import IngestionError


def write_levir(root, n=3, size=64, seed=0):
    rng = np.random.default_rng(seed)
    for sub in ("A", "B", "label"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for k in range(n):
        name = f"test_{k + 1}.png"
        Image.fromarray(rng.integers(0, 256, (size, size, 3), dtype=np.uint8)).save(root / "A" / name)
        Image.fromarray(rng.integers(0, 256, (size, size, 3), dtype=np.uint8)).save(root / "B" / name)
        lab = (rng.random((size, size)) > 0.8).astype(np.uint8) * 255
        Image.fromarray(lab).save(root / "label" / name)


def test_enumerate_levir(tmp_path):
    write_levir(tmp_path)
    items = list(enumerate_levir(tmp_path))
    assert [p.id for p, _ in items] == ["test_1", "test_2", "test_3"]
    for pair, gt in items:
        assert pair.t1.shape == (64, 64, 3)
        assert set(np.unique(gt.mask)) <= {0, 1}
    again = list(enumerate_levir(tmp_path))
    for (p, g), (q, h) in zip(items, again):
        assert p.t1.tobytes() == q.t1.tobytes() and g.mask.tobytes() == h.mask.tobytes()


def test_enumerate_levir_test_subdir(tmp_path):
    write_levir(tmp_path / "test", n=2)
    assert len(list(enumerate_levir(tmp_path))) == 2


def test_enumerate_levir_missing_counterpart(tmp_path):
    write_levir(tmp_path)
    (tmp_path / "B" / "test_2.png").unlink()
    with pytest.raises(IngestionError, match="test_2"):
        list(enumerate_levir(tmp_path))


def test_enumerate_levir_empty(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        assert list(enumerate_levir(tmp_path)) == []
    assert "no LEVIR-CD images" in caplog.text


def test_label_binarized_at_127(tmp_path):
    Image.fromarray(np.array([[0, 127, 128, 255]], np.uint8)).save(tmp_path / "l.png")
    np.testing.assert_array_equal(read_label(tmp_path / "l.png"), [[0, 0, 1, 1]])


def test_ground_truth_validation():
    with pytest.raises(ValueError):
        GroundTruth(np.array([[0, 2]]))


def test_whu_tile_count():
    H, W = 15354, 32507
    specs = tile_whu((H, W), 1024)
    assert len(specs) == 480
    assert len({s.row_start for s in specs}) == 15
    assert len({s.col_start for s in specs}) == 32
    assert pixel_union_covers(specs, H, W)


def test_whu_degenerate_and_two_tile_grids():
    assert tile_whu((1024, 1024)) == [TileSpec(0, 0, 1024, (1024, 1024))]
    specs = tile_whu((2048, 1024))
    assert [(s.row_start, s.col_start) for s in specs] == [(0, 0), (1024, 0)]


def test_whu_source_too_small():
    with pytest.raises(ValueError):
        tile_whu((1000, 4000))


@settings(max_examples=40, deadline=None)
@given(H=st.integers(100, 700), W=st.integers(100, 700), tile=st.sampled_from([32, 64, 100]))
def test_tiling_properties(H, W, tile):
    specs = tile_whu((H, W), tile)
    assert len(specs) == math.ceil(H / tile) * math.ceil(W / tile)
    assert pixel_union_covers(specs, H, W, band=128)


def test_tile_spec_must_fit():
    with pytest.raises(ValueError):
        TileSpec(10, 0, 64, (70, 70))


def test_read_tile(rng):
    src = rng.integers(0, 256, (100, 130, 3), dtype=np.uint8)
    full = TileSpec(0, 0, 100, (100, 130))
    np.testing.assert_array_equal(read_tile(src[:, :100], TileSpec(0, 0, 100, (100, 100))), src[:, :100])
    a, b = TileSpec(0, 0, 64, (100, 130)), TileSpec(36, 40, 64, (100, 130))
    ta, tb = read_tile(src, a), read_tile(src, b)
    np.testing.assert_array_equal(ta[36:64, 40:64], tb[0:28, 0:24])
    c = TileSpec(0, 64, 64, (100, 130))
    tc = read_tile(src, c)
    np.testing.assert_array_equal(np.concatenate([ta, tc], axis=1), src[:64, :128])
    with pytest.raises(ValueError):
        read_tile(src[:50], full)


def test_enumerate_whu_small_mosaic(tmp_path, rng):
    for sub in ("A", "B", "label"):
        (tmp_path / sub).mkdir()
    Image.fromarray(rng.integers(0, 256, (150, 200, 3), dtype=np.uint8)).save(tmp_path / "A" / "m.tif")
    Image.fromarray(rng.integers(0, 256, (150, 200, 3), dtype=np.uint8)).save(tmp_path / "B" / "m.tif")
    Image.fromarray(np.zeros((150, 200), np.uint8)).save(tmp_path / "label" / "m.tif")
    items = list(enumerate_whu(tmp_path, tile=64))
    assert len(items) == 3 * 4
    assert len({p.id for p, _ in items}) == 12
    assert all(p.t1.shape == (64, 64, 3) for p, _ in items)
