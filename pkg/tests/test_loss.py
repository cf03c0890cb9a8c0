import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from objaware.core import MaskSpec, PatchGeometry, VideoTensor
from objaware.errors import ParameterError
from objaware.loss import (LossWeights, loss_weights, normalize_patches, uniform_weights,
                           weighted_mse, weighted_mse_gradient)
from objaware.objectness import TokenScores


def line_geom(n, p=1):
    return PatchGeometry(1, 1, 1, n * p, 1, 1, p)


def all_masked(g):
    return MaskSpec(g, np.zeros(g.token_count, dtype=bool))


def test_worked_weights():
    g = line_geom(3)
    lw = loss_weights(TokenScores(g, [0.0, 1.0, 3.0]), all_masked(g))
    np.testing.assert_allclose(lw.weights, [1 / 6, 7 / 24, 13 / 24], rtol=0, atol=1e-12)
    assert lw.mu_value == pytest.approx(4 / 3)


def test_zero_scores_uniform_and_no_mu():
    g = line_geom(3)
    assert loss_weights(TokenScores(g, [0.0] * 3), all_masked(g)).weights.tolist() == [1 / 3] * 3
    lw = loss_weights(TokenScores(g, [0.0, 0.0, 5.0]), all_masked(g), use_mu=False)
    assert lw.weights.tolist() == [0.0, 0.0, 1.0]
    assert not lw.mu_used


def test_constant_scores_bit_identical_to_uniform():
    g = line_geom(7)
    m = MaskSpec(g, np.array([1, 0, 0, 1, 0, 0, 0], dtype=bool))
    lw = loss_weights(TokenScores(g, [2.5] * 7), m)
    np.testing.assert_array_equal(lw.weights, uniform_weights(m).weights)
    np.testing.assert_array_equal(lw.indices, [1, 2, 4, 5, 6])


def test_empty_masked_set():
    g = line_geom(3)
    full = MaskSpec(g, np.ones(3, dtype=bool))
    with pytest.raises(ParameterError):
        loss_weights(TokenScores(g, [1.0, 2.0, 3.0]), full)
    with pytest.raises(ParameterError):
        uniform_weights(full)


def test_weighted_mse_worked_example():
    g = line_geom(2)
    video = VideoTensor(g, np.zeros(2))
    rec = np.array([[1.0], [2.0]])
    w = LossWeights([0, 1], [0.25, 0.75])
    assert weighted_mse(video, rec, w) == pytest.approx(0.25 * 1 + 0.75 * 4, abs=1e-15)


def test_perfect_reconstruction_and_visible_rows_ignored(rng):
    g = line_geom(5, p=3)
    video = VideoTensor(g, rng.normal(size=15))
    m = MaskSpec(g, np.array([1, 0, 1, 0, 0], dtype=bool))
    lw = uniform_weights(m)
    rec = video.patches().copy()
    assert weighted_mse(video, rec, lw) == 0.0
    rec[[0, 2]] += 100.0  # visible rows
    assert weighted_mse(video, rec, lw) == 0.0


def test_uniform_reduces_to_masked_mse(rng):
    g = line_geom(6, p=4)
    video = VideoTensor(g, rng.normal(size=24))
    rec = rng.normal(size=(6, 4))
    m = MaskSpec(g, np.array([0, 1, 0, 0, 1, 0], dtype=bool))
    diff = video.patches()[~m.visible] - rec[~m.visible]
    assert weighted_mse(video, rec, uniform_weights(m)) == pytest.approx(np.mean(diff ** 2), rel=1e-14)


def test_gradient_matches_finite_differences(rng):
    g = line_geom(5, p=3)
    video = VideoTensor(g, rng.normal(size=15))
    m = MaskSpec(g, np.array([0, 1, 0, 0, 1], dtype=bool))
    lw = loss_weights(TokenScores(g, rng.random(5)), m)
    rec = rng.normal(size=(5, 3))
    grad = weighted_mse_gradient(video, rec, lw)
    h = 1e-6
    num = np.zeros_like(rec)
    for i in range(5):
        for j in range(3):
            a, b = rec.copy(), rec.copy()
            a[i, j] += h
            b[i, j] -= h
            num[i, j] = (weighted_mse(video, a, lw) - weighted_mse(video, b, lw)) / (2 * h)
    rel = np.abs(grad - num).max() / np.abs(num).max()
    assert rel < 1e-6
    assert np.all(grad[m.visible] == 0)


def test_zero_weight_zero_gradient(rng):
    g = line_geom(3, p=2)
    video = VideoTensor(g, rng.normal(size=6))
    lw = loss_weights(TokenScores(g, [0.0, 0.0, 5.0]), all_masked(g), use_mu=False)
    grad = weighted_mse_gradient(video, rng.normal(size=(3, 2)), lw)
    assert np.all(grad[:2] == 0) and np.any(grad[2] != 0)


def test_normalized_targets(rng):
    p = rng.normal(size=(4, 8)) * 3 + 1
    z = normalize_patches(p)
    np.testing.assert_allclose(z.mean(axis=1), 0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=1), 1, atol=1e-6)


@st.composite
def scored_masks(draw):
    n = draw(st.integers(2, 40))
    scores = draw(st.lists(st.floats(0, 50), min_size=n, max_size=n))
    vis = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    if all(vis):
        vis[draw(st.integers(0, n - 1))] = False
    g = line_geom(n)
    return TokenScores(g, scores), MaskSpec(g, np.array(vis))


@settings(max_examples=1000, deadline=None)
@given(scored_masks(), st.booleans())
def test_weights_sum_to_one(sm, use_mu):
    ts, m = sm
    if not use_mu and np.all(ts.scores[~m.visible] == 0):
        lw = loss_weights(ts, m, use_mu=False)  # zero numerators fall back to uniform
    else:
        lw = loss_weights(ts, m, use_mu=use_mu)
    assert lw.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(lw.weights >= 0)
    np.testing.assert_array_equal(lw.indices, m.masked_indices)


@settings(max_examples=200, deadline=None)
@given(scored_masks(), st.floats(0.01, 100))
def test_scale_invariance(sm, c):
    ts, m = sm
    a = loss_weights(ts, m).weights
    b = loss_weights(TokenScores(ts.geometry, ts.scores * c), m).weights
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(scored_masks())
def test_bias_toward_higher_scores(sm):
    ts, m = sm
    lw = loss_weights(ts, m)
    s = ts.scores[lw.indices]
    u = 1.0 / lw.indices.size
    # w_i exceeds the uniform share exactly when S_i exceeds the masked mean
    assert np.all(lw.weights[s > s.mean() + 1e-9] > u - 1e-15)
    assert np.all(lw.weights[s < s.mean() - 1e-9] < u + 1e-15)
    order = np.argsort(s, kind="stable")
    assert np.all(np.diff(lw.weights[order]) >= -1e-15)
