import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roiedge.cam import global_pool
from roiedge.errors import ParameterError, RangeError
from roiedge.geometry import Rect
from roiedge.oracle import GroundTruth
from roiedge.partition import (
    CropRef,
    crop_feature,
    crop_ref,
    frame_box_to_crop,
    full_frame_crop,
    make_crops,
    make_layout,
    map_box_to_frame,
    occupancy_stats,
)
from roiedge.tensor import FeatureMap, Tensor


def test_4k_default_layout():
    lay = make_layout(3840, 2160, 0.5, 0.5)
    assert lay.parts[1] == Rect(0, 0, 1920, 1080)
    assert lay.parts[5] == Rect(960, 540, 1920, 1080)


def test_one_to_three_variant():
    assert make_layout(3840, 2160, 0.25).top_band.h == 540


@given(st.integers(2, 5000), st.integers(2, 5000), st.floats(0.01, 0.99), st.floats(0.01, 1.0))
def test_tiling(w, h, tf, cf):
    try:
        lay = make_layout(w, h, tf, cf)
    except ParameterError:
        return
    tiles = lay.tiles()
    assert sum(t.area for t in tiles) == w * h
    for i, a in enumerate(tiles):
        assert Rect(0, 0, w, h).contains(a)
        for b in tiles[i + 1 :]:
            assert a.intersect(b).area == 0
    assert Rect(0, 0, w, h).contains(lay.parts[5])


@pytest.mark.parametrize("tf,cf", [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.5)])
def test_bad_fractions(tf, cf):
    with pytest.raises(ParameterError):
        make_layout(100, 100, tf, cf)


def test_degenerate_part():
    with pytest.raises(ParameterError):
        make_layout(1, 1)


def fm(arr):
    return FeatureMap(Tensor(np.asarray(arr, dtype=np.float32)), 32)


def test_crop_identity_and_small():
    data = np.arange(16, dtype=np.float32).reshape(1, 4, 4)
    f = fm(data)
    assert crop_feature(f, full_frame_crop(128, 128, 32)).tensor == f.tensor
    c = CropRef(1, Rect(0, 0, 64, 64), Rect(0, 0, 2, 2))
    assert crop_feature(f, c).tensor.data[0].tolist() == [[0, 1], [4, 5]]
    with pytest.raises(RangeError):
        crop_feature(f, CropRef(1, Rect(0, 0, 160, 32), Rect(0, 0, 5, 1)))


def test_crop_pool_vs_masked_mean(rng):
    data = rng.standard_normal((5, 12, 20)).astype(np.float32)
    lay = make_layout(640, 384)
    for part in range(1, 6):
        c = crop_ref(lay, part, 32)
        mask = np.zeros((12, 20), dtype=bool)
        mask[c.cells.y : c.cells.y1, c.cells.x : c.cells.x1] = True
        ref = [data[k].astype(np.float64)[mask].sum() / mask.sum() for k in range(5)]
        assert np.allclose(global_pool(crop_feature(fm(data), c)), ref, atol=1e-9)


def test_crop_cells_round_outward():
    c = crop_ref(make_layout(1280, 720), 3, 32)
    assert c.cells == Rect(0, 11, 20, 12)  # y 360 is inside cell row 11
    assert [k.part for k in make_crops(make_layout(1280, 720), 32)] == [3, 4, 5]
    assert len(make_crops(make_layout(1280, 720), 32, include_top=True)) == 5


def test_map_box_examples():
    origin = CropRef(1, Rect(0, 0, 1920, 1080), Rect(0, 0, 60, 34))
    assert map_box_to_frame(Rect(0, 0, 1, 1), origin, 32) == Rect(0, 0, 32, 32)
    shifted = CropRef(4, Rect(1920, 1088, 1920, 1072), Rect(60, 34, 60, 34))
    assert map_box_to_frame(Rect(0, 0, 1, 1), shifted, 32) == Rect(1920, 1088, 32, 32)
    # clamped when the frame size is given
    edge = CropRef(4, Rect(1920, 1080, 100, 100), Rect(60, 33, 4, 4))
    assert map_box_to_frame(Rect(3, 3, 1, 1), edge, 32, 2030, 1200).x1 == 2030


@given(st.integers(0, 1279), st.integers(0, 719), st.integers(1, 300), st.integers(1, 300))
def test_frame_crop_frame_contains(x, y, w, h):
    lay = make_layout(1280, 720)
    box = Rect(x, y, w, h).intersect(Rect(0, 0, 1280, 720))
    crop = crop_ref(lay, 5, 32)
    cells = frame_box_to_crop(box, crop, 32)
    assert map_box_to_frame(cells, crop, 32).contains(box)


def gt_of(frames):
    gt = GroundTruth(len(frames))
    for f, objs in enumerate(frames):
        for rect in objs:
            gt.add(f, 0, rect)
    return gt


def test_occupancy_examples():
    lay = make_layout(1000, 1000)
    bottom = gt_of([[Rect(100, 700, 50, 50)]] * 10)
    assert occupancy_stats(bottom, lay)["probabilities"]["top"] == 0.0
    frames = [[Rect(100, 700, 20, 20)] for _ in range(100)]
    frames[42] = [Rect(450, 100, 20, 20)]
    s = occupancy_stats(gt_of(frames), lay)
    assert s["probabilities"]["top"] == 0.01
    assert s["probabilities"]["center_top"] <= s["probabilities"]["top"]
    empty = occupancy_stats(GroundTruth(5), lay)
    assert empty["empty"] and all(v == 0 for v in empty["probabilities"].values())


def test_occupancy_counts_frames_not_objects():
    frames = [[Rect(10, 10, 5, 5), Rect(600, 10, 5, 5), Rect(800, 100, 5, 5)], []]
    s = occupancy_stats(gt_of(frames), make_layout(1000, 1000))
    assert s["probabilities"]["top"] == 0.5
    assert s["objects"] == 3
