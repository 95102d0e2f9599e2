import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radcone.errors import SceneError, SceneFormatError
from radcone.geometry import (
    AffinePerturbation,
    LuminaireModel,
    Patch,
    Scene,
    apply_affine,
    compose,
    condition_number,
    load_scene,
    save_scene,
    visibility,
    visibility_matrix,
)
from radcone.scenes import bundled_scene, random_affine, random_scene, two_patch_scene

import oracles


def _scene(*patches):
    return Scene(tuple(patches), LuminaireModel(np.ones((1, len(patches)))))


def test_patch_area_and_normal():
    p = Patch([0, 0, 0], [2, 0, 0], [0, 3, 0], 0.5)
    assert p.area == 6.0
    np.testing.assert_allclose(p.normal, [0, 0, 1])
    assert abs(np.linalg.norm(p.normal) - 1) < 1e-12


@pytest.mark.parametrize("albedo", [0.0, 1.0, -0.1, 1.5])
def test_patch_rejects_albedo_outside_open_interval(albedo):
    with pytest.raises(SceneError, match=r"albedo must lie in \(0,1\)"):
        Patch([0, 0, 0], [1, 0, 0], [0, 1, 0], albedo)


def test_patch_rejects_degenerate_edges():
    with pytest.raises(SceneError):
        Patch([0, 0, 0], [1, 0, 0], [2, 0, 0], 0.5)


def test_identity_map_is_bitwise_noop():
    s = bundled_scene("open_box")
    t = apply_affine(s, AffinePerturbation.identity())
    assert np.array_equal(t.centers, s.centers)
    assert np.array_equal(t.edges_u, s.edges_u)
    assert np.array_equal(t.areas, s.areas)
    assert np.array_equal(t.albedo, s.albedo)


def test_uniform_scaling_quadruples_unit_area():
    s = _scene(Patch([0, 0, 0], [1, 0, 0], [0, 1, 0], 0.5))
    t = apply_affine(s, AffinePerturbation(2 * np.eye(3)))
    assert t.areas[0] == pytest.approx(4.0)
    np.testing.assert_allclose(t.normals[0], [0, 0, 1])


def test_stretch_examples():
    s = _scene(Patch([0, 0, 0], [1, 0, 0], [0, 1, 0], 0.5), Patch([5, 0, 0], [0, 1, 0], [0, 0, 1], 0.5))
    t = apply_affine(s, AffinePerturbation(np.diag([2.0, 1, 1])))
    np.testing.assert_allclose(t.areas, [2.0, 1.0])
    np.testing.assert_allclose(t.normals, [[0, 0, 1], [1, 0, 0]])


def test_affine_rejects_singular_and_reflecting():
    with pytest.raises(SceneError):
        AffinePerturbation(np.diag([1.0, 1.0, 0.0]))
    with pytest.raises(SceneError):
        AffinePerturbation(np.diag([1.0, 1.0, -1.0]))


def test_condition_number_examples():
    assert condition_number(AffinePerturbation.identity()) == 1.0
    assert condition_number(AffinePerturbation(np.diag([3.0, 1, 1]))) == pytest.approx(3.0)


def test_condition_number_matches_gram_eigen_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        t = random_affine(rng, max_cond=3.0)
        w = np.linalg.eigvalsh(t.matrix_a.T @ t.matrix_a)
        assert condition_number(t) == pytest.approx(np.sqrt(w[-1] / w[0]), rel=1e-10)


def test_visibility_examples():
    a = Patch([0, 0, 0], [0.1, 0, 0], [0, 0.1, 0], 0.5)
    b = Patch([0, 0, 1], [0.1, 0, 0], [0, -0.1, 0], 0.5)
    blocker = Patch([0, 0, 0.5], [0.3, 0, 0], [0, 0.3, 0], 0.5)
    missed = Patch([1, 0, 0.5], [0.3, 0, 0], [0, 0.3, 0], 0.5)
    assert visibility(_scene(a, b), 0, 1) == 1
    assert visibility(_scene(a, b, blocker), 0, 1) == 0
    assert visibility(_scene(a, b, blocker), 1, 0) == 0
    assert visibility(_scene(a, b, missed), 0, 1) == 1
    with pytest.raises(ValueError):
        visibility(_scene(a, b), 1, 1)


def test_visibility_matches_linear_solve_oracle():
    rng = np.random.default_rng(1)
    for n in (5, 20, 40):
        s = random_scene(rng, n, rowsum_limit=1.0, min_gap=0.1, size_range=(0.3, 0.8))
        vis = visibility_matrix(s)
        assert np.array_equal(vis, vis.T)
        assert np.array_equal(vis, oracles.visibility_oracle(s.centers, s.edges_u, s.edges_v))


def test_visibility_invariant_under_affine_maps():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        s = random_scene(rng, int(rng.integers(3, 12)), rowsum_limit=1.0, min_gap=0.1, size_range=(0.2, 0.6))
        t = random_affine(rng, max_cond=2.0)
        assert np.array_equal(visibility_matrix(s), visibility_matrix(apply_affine(s, t)))


def test_composition():
    rng = np.random.default_rng(3)
    s = random_scene(rng, 10)
    t1, t2 = random_affine(rng), random_affine(rng)
    lhs = apply_affine(apply_affine(s, t1), t2)
    rhs = apply_affine(s, compose(t2, t1))
    np.testing.assert_allclose(lhs.centers, rhs.centers, atol=1e-12)
    np.testing.assert_allclose(lhs.edges_u, rhs.edges_u, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_normals_covariant_and_areas_sandwiched(seed):
    rng = np.random.default_rng(seed)
    s = random_scene(rng, 5, rowsum_limit=1.0)
    t = random_affine(rng, max_cond=3.0)
    moved = apply_affine(s, t)
    inv_t = np.linalg.inv(t.matrix_a).T
    expect = s.normals @ inv_t.T
    expect /= np.linalg.norm(expect, axis=1, keepdims=True)
    np.testing.assert_allclose(moved.normals, expect, atol=1e-10)
    sv = t.singular_values
    assert np.all(moved.areas >= sv[-1] ** 2 * s.areas * (1 - 1e-12))
    assert np.all(moved.areas <= sv[0] ** 2 * s.areas * (1 + 1e-12))


def test_luminaires_normalized_on_load(tmp_path):
    s = two_patch_scene()
    np.testing.assert_allclose(s.luminaires.emittance_basis ** 2 @ s.areas, [1.0, 1.0], rtol=1e-10)
    path = tmp_path / "s.json"
    save_scene(s, path)
    data = json.loads(path.read_text())
    data["luminaires"] = [[3.0, 0.0], [0.0, 1.0]]
    path.write_text(json.dumps(data))
    loaded, scales = load_scene(path)
    np.testing.assert_allclose(scales, [10 / 3, 10.0])
    np.testing.assert_allclose(loaded.luminaires.emittance_basis ** 2 @ loaded.areas, [1, 1], rtol=1e-10)


def test_load_scene_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"patches": [\n  {"center": [0, 0, 0],,}\n]}')
    with pytest.raises(SceneFormatError, match=r"bad.json:2:\d+"):
        load_scene(path)


def test_scene_rejects_mismatched_luminaires():
    p = Patch([0, 0, 0], [1, 0, 0], [0, 1, 0], 0.5)
    with pytest.raises(SceneError):
        Scene((p,), LuminaireModel(np.ones((1, 2))))
