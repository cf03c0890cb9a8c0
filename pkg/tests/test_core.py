import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from objaware.core import (BoundingBox, DetectionSet, MaskSpec, PatchGeometry, VideoTensor,
                           extract_patch, token_coords, token_index)
from objaware.errors import ParameterError, RangeError, ShapeError


def test_geometry_counts(geom):
    assert geom.temporal_slots == 2
    assert geom.spatial_count == 2 * 3
    assert geom.token_count == 12
    assert geom.patch_size == 2 * 2 * 4 * 4


@pytest.mark.parametrize("dims", [(3, 1, 8, 8, 2, 4, 4), (4, 1, 9, 8, 2, 4, 4), (4, 1, 8, 10, 2, 4, 4),
                                  (0, 1, 8, 8, 1, 4, 4)])
def test_geometry_rejects_non_tiling(dims):
    with pytest.raises(ParameterError):
        PatchGeometry(*dims)


def test_token_index_examples():
    g = PatchGeometry(16, 3, 224, 224, 2, 16, 16)
    assert token_index(0, 0, 0, g) == 0
    assert token_index(1, 0, 0, g) == 196
    assert token_index(2, 3, 5, g) == 439


def test_token_index_range_errors(geom):
    for bad in [(2, 0, 0), (0, 2, 0), (0, 0, 3), (-1, 0, 0)]:
        with pytest.raises(RangeError):
            token_index(*bad, geom)
    with pytest.raises(RangeError):
        token_coords(geom.token_count, geom)


def test_token_index_bijective(geom):
    seen = [token_index(s, r, c, geom) for s, r, c in itertools.product(
        range(geom.temporal_slots), range(geom.grid_h), range(geom.grid_w))]
    assert sorted(seen) == list(range(geom.token_count))
    for tok in range(geom.token_count):
        assert token_index(*token_coords(tok, geom), geom) == tok


def _walk_patch(data, g, token):
    """Index-walking oracle: visit (t, c, y, x) of the token's block in nested order."""
    slot, row, col = token_coords(token, g)
    out = []
    for dt in range(g.patch_t):
        for c in range(g.channels):
            for dy in range(g.patch_h):
                for dx in range(g.patch_w):
                    t, y, x = slot * g.patch_t + dt, row * g.patch_h + dy, col * g.patch_w + dx
                    out.append(data[((t * g.channels + c) * g.height + y) * g.width + x])
    return np.array(out)


def test_extract_patch_matches_index_walk(geom):
    n = int(np.prod(geom.shape))
    data = np.arange(n, dtype=float)
    v = VideoTensor(geom, data)
    for tok in range(geom.token_count):
        np.testing.assert_array_equal(extract_patch(v, tok), _walk_patch(data, geom, tok))
    np.testing.assert_array_equal(v.patches()[0], _walk_patch(data, geom, 0))


def test_constant_video_patches(geom):
    v = VideoTensor(geom, np.full(geom.shape, 3.5))
    assert np.all(v.patches() == 3.5)


def test_pixel_patches_row_major():
    g = PatchGeometry(1, 1, 2, 2, 1, 1, 1)
    v = VideoTensor(g, [1.0, 2.0, 3.0, 4.0])
    assert [extract_patch(v, i).tolist() for i in range(4)] == [[1.0], [2.0], [3.0], [4.0]]


def test_patches_are_permutation_and_round_trip(geom, rng):
    v = VideoTensor(geom, rng.normal(size=geom.shape))
    p = v.patches()
    np.testing.assert_array_equal(np.sort(p.ravel()), np.sort(v.data.ravel()))
    back = VideoTensor.from_patches(p, geom)
    np.testing.assert_array_equal(back.data, v.data)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 2), st.integers(1, 3), st.integers(1, 3),
       st.integers(1, 3), st.integers(1, 3), st.integers(1, 2))
def test_round_trip_any_geometry(slots, pt, gh, gw, ph, pw, c):
    g = PatchGeometry(slots * pt, c, gh * ph, gw * pw, pt, ph, pw)
    data = np.arange(np.prod(g.shape), dtype=float)
    v = VideoTensor(g, data)
    assert np.array_equal(VideoTensor.from_patches(v.patches(), g).data, v.data)


def test_extract_patch_range(geom):
    v = VideoTensor(geom, np.zeros(geom.shape))
    with pytest.raises(RangeError):
        extract_patch(v, geom.token_count)


def test_video_validation(geom):
    with pytest.raises(ShapeError):
        VideoTensor(geom, np.zeros(5))
    bad = np.zeros(geom.shape)
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(ParameterError):
        VideoTensor(geom, bad)


def test_video_is_immutable(geom):
    src = np.zeros(geom.shape)
    v = VideoTensor(geom, src)
    src[0, 0, 0, 0] = 1.0
    assert v.data[0, 0, 0, 0] == 0.0
    with pytest.raises(ValueError):
        v.data[0, 0, 0, 0] = 2.0


def test_box_validation():
    BoundingBox(-5.0, 1e4, 1.0, 2.0)  # centers may lie outside the frame
    with pytest.raises(ParameterError):
        BoundingBox(0, 0, 0, 1)
    with pytest.raises(ParameterError):
        BoundingBox(0, 0, 1, -1)


def test_detection_set_keeps_empty_frames():
    d = DetectionSet.from_mapping({2: [BoundingBox(1, 1, 2, 2)]}, 4)
    assert d.n_frames == 4 and d.frames[0] == () and len(d.frames[2]) == 1
    with pytest.raises(RangeError):
        DetectionSet.from_mapping({4: []}, 4)


def test_mask_spec_partition(geom):
    vis = np.zeros(geom.token_count, dtype=bool)
    vis[[0, 3, 7]] = True
    m = MaskSpec(geom, vis)
    assert m.visible_count == 3
    both = np.concatenate([m.visible_indices, m.masked_indices])
    assert sorted(both) == list(range(geom.token_count))
    assert not set(m.visible_indices) & set(m.masked_indices)
    with pytest.raises(ShapeError):
        MaskSpec(geom, vis[:-1])
