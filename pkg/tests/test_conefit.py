import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radcone import conefit
from radcone.errors import IterationLimitError

import oracles

AXES = np.eye(2)


def _instance(rng, n=12, n_g=5):
    gens = rng.random((n_g, n)) + 0.01
    target = conefit.normalize_shading(rng.random(n) + 0.05)
    return target, conefit.GeneratorSet(gens)


def test_normalize_examples():
    np.testing.assert_allclose(conefit.normalize_shading(np.full(4, 0.7)), 0.7)
    np.testing.assert_allclose(conefit.normalize_shading(np.full(4, 1.4)), 0.7)
    with pytest.raises(ValueError):
        conefit.normalize_shading(np.zeros(3))


@settings(max_examples=200)
@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=20), st.floats(1e-3, 1e3))
def test_normalize_mean_and_scale_invariance(vals, scale):
    s = np.array(vals)
    out = conefit.normalize_shading(s)
    assert out.mean() == pytest.approx(0.7, abs=1e-12)
    np.testing.assert_allclose(conefit.normalize_shading(scale * s), out, rtol=1e-12)


def test_generator_set_validation():
    with pytest.raises(ValueError):
        conefit.GeneratorSet(np.empty((0, 3)))
    with pytest.raises(ValueError):
        conefit.GeneratorSet([[1.0, -0.1]])
    with pytest.raises(ValueError):
        conefit.GeneratorSet([[1.0, 0.0], [0.0, 0.0]])


def test_axes_example():
    approx = conefit.fit_approx([3.0, -1.0], AXES, n_gd=0)
    np.testing.assert_array_equal(approx.weights, [3.0, 0.0])
    assert approx.residual_sq == 1.0 and approx.steps_taken == 0
    exact = conefit.fit_exact([3.0, -1.0], AXES)
    np.testing.assert_allclose(exact.weights, [3.0, 0.0])
    assert exact.residual_sq == pytest.approx(1.0)


def test_target_inside_cone():
    rng = np.random.default_rng(0)
    gens = conefit.GeneratorSet(rng.random((4, 10)) + 0.1)
    t = gens.design @ rng.random(4)
    for n_gd in (0, 1, 10):
        assert conefit.fit_approx(t, gens, n_gd).residual_sq <= 1e-10
    assert conefit.fit_exact(t, gens).residual_sq <= 1e-10


def test_negative_orthant_target():
    rng = np.random.default_rng(1)
    gens = rng.random((3, 6)) + 0.1
    t = -rng.random(6)
    res = conefit.fit_exact(t, gens)
    np.testing.assert_array_equal(res.weights, 0.0)
    assert res.residual_sq == pytest.approx(float(t @ t))


def test_exact_matches_support_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(200):
        t = rng.standard_normal(8)
        gens = conefit.GeneratorSet(rng.random((5, 8)))
        res = conefit.fit_exact(t, gens)
        _, best = oracles.nnls_enumerate(gens.design, t)
        assert res.residual_sq == pytest.approx(best, abs=1e-9)
        assert np.all(res.weights >= 0)


def test_exact_complementary_slackness():
    rng = np.random.default_rng(3)
    for _ in range(100):
        t, gens = _instance(rng)
        w = conefit.fit_exact(t, gens).weights
        grad = gens.design.T @ (gens.design @ w - t)
        assert np.all(np.abs(w * grad) <= 1e-8)
        assert np.all(grad >= -1e-8)


def test_exact_iteration_cap():
    with pytest.raises(IterationLimitError, match="cap 0"):
        conefit.fit_exact([3.0, -1.0], AXES, max_iter=0)


def test_approx_history_monotone():
    rng = np.random.default_rng(5)
    for _ in range(100):
        t, gens = _instance(rng)
        hist = []
        res = conefit.fit_approx(t, gens, n_gd=50, history=hist)
        assert len(hist) == 51
        assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(hist, hist[1:]))
        assert res.residual_sq == hist[-1]
        assert conefit.fit_approx(t, gens, 0).residual_sq == hist[0]


def test_approx_at_least_exact_and_converges():
    rng = np.random.default_rng(6)
    for _ in range(50):
        t, gens = _instance(rng)
        exact = conefit.fit_exact(t, gens).residual_sq
        assert conefit.fit_approx(t, gens, 1).residual_sq >= exact - 1e-12
        assert conefit.fit_approx(t, gens, 500).residual_sq - exact <= 1e-6


def test_approx_rejects_bad_args():
    with pytest.raises(ValueError):
        conefit.fit_approx([1.0, 2.0], AXES, n_gd=-1)
    with pytest.raises(ValueError):
        conefit.fit_approx([1.0, 2.0, 3.0], AXES)


def test_nearby_loss_examples():
    rng = np.random.default_rng(7)
    gens = conefit.GeneratorSet(rng.random((4, 10)) + 0.1)
    inside = [gens.design @ rng.random(4) for _ in range(3)]
    assert conefit.nearby_loss(inside, gens) <= 1e-10
    t = rng.random(10) + 0.1
    assert conefit.nearby_loss([t], gens, 3) == conefit.fit_approx(conefit.normalize_shading(t), gens, 3).residual_sq
    raw = [rng.random(10) + 0.1 for _ in range(4)]
    scaled = [2 * x if i % 2 else x for i, x in enumerate(raw)]
    assert conefit.nearby_loss(scaled, gens) == pytest.approx(conefit.nearby_loss(raw, gens), rel=1e-12)


def test_barrier_examples():
    q = np.array([0.2, 0.5, 0.9])
    assert conefit.barrier_loss(q, q) == pytest.approx(-math.log(1e-6))
    assert conefit.barrier_loss(q, q) == pytest.approx(13.8155, abs=1e-4)
    assert conefit.barrier_loss(2 * q, q) == pytest.approx(conefit.barrier_loss(q, q))
    near = conefit.barrier_loss(q + [0.01, 0, 0], q)
    far = conefit.barrier_loss(q + [0.3, 0, 0], q)
    assert far < near


def test_range_and_pixel_losses():
    assert conefit.range_losses([0.0, 0.5, 1.0]) == (0.0, 0.0)
    assert conefit.range_losses(np.full(3, -0.5)) == (0.25, 0.0)
    assert conefit.range_losses(np.full(3, 1.5)) == (0.0, 0.25)
    assert conefit.pixel_uniformity_loss(np.full(4, 0.95), np.full(4, 0.05)) == pytest.approx(0.0, abs=1e-15)
    assert conefit.pixel_uniformity_loss(np.full(4, 1.0), np.full(4, 0.05)) == pytest.approx(0.05)
    assert conefit.pixel_uniformity_loss(np.full(4, 0.9), np.full(4, 0.2)) == pytest.approx(0.15)


def test_fit_json_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    t, gens = _instance(rng)
    res = conefit.fit_exact(t, gens)
    path = tmp_path / "fit.json"
    conefit.write_fit_json(path, res)
    data = json.loads(path.read_text())
    assert set(data) == {"weights", "residual_sq", "steps_taken"}
    assert data["weights"] == res.weights.tolist()
    assert data["residual_sq"] == res.residual_sq


def test_read_vector_csv(tmp_path):
    p = tmp_path / "v.csv"
    p.write_text("value\n1.5\n2\n-3e-1\n")
    np.testing.assert_array_equal(conefit.read_vector_csv(p), [1.5, 2.0, -0.3])
    p.write_text("1,2,3\n")
    np.testing.assert_array_equal(conefit.read_vector_csv(p), [1.0, 2.0, 3.0])
    p.write_text("1\nx\n")
    with pytest.raises(ValueError, match=":2:"):
        conefit.read_vector_csv(p)
