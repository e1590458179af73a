import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sc3sim.scene import (
    Building,
    Scene,
    ScenePlacementError,
    collides,
    distance_to_buildings,
    footprint_mask,
    generate_scene,
    is_los,
    scatterers,
    segments_blocked,
)

BOX = Scene(bounds=(100.0, 100.0), buildings=(Building((50.0, 50.0), 20.0, 10.0, 30.0),))
coord = st.floats(0.0, 100.0, allow_nan=False)
point = st.tuples(coord, coord, st.floats(0.0, 60.0, allow_nan=False))


def _sampled_blocked(a, b, scene, n=4001):
    """Dense point sampling along the segment; misses only grazing contacts."""
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = np.asarray(a) + t * (np.asarray(b) - np.asarray(a))
    return bool((distance_to_buildings(pts, scene) == 0).any())


@pytest.mark.parametrize("seed", [0, 7, 42])
def test_generated_scene_respects_gaps_and_clearance(seed):
    sc = generate_scene(seed)
    assert len(sc.buildings) == 12 and len(sc.users) == 10
    for i, b in enumerate(sc.buildings):
        assert b.lo[0] >= 40 - 1e-9 and b.hi[0] <= 960 + 1e-9
        assert b.lo[1] >= 40 - 1e-9 and b.hi[1] <= 960 + 1e-9
        for other in sc.buildings[i + 1 :]:
            assert not b.footprint_overlaps(other, 30.0 - 1e-6)
    for u in sc.users:
        assert distance_to_buildings(u.position, sc).min() > 0


def test_generation_is_deterministic_and_round_trips():
    a, b = generate_scene(3), generate_scene(3)
    assert a == b
    assert Scene.loads(a.dumps()) == a
    assert generate_scene(4) != a


def test_placement_failure_raises():
    with pytest.raises(ScenePlacementError):
        generate_scene(0, 50, (200.0, 200.0), size_range=(60, 80), max_tries=200)


def test_los_known_cases():
    assert not is_los((10, 50, 10), (90, 50, 10), BOX)
    assert is_los((10, 50, 40), (90, 50, 40), BOX)
    assert is_los((10, 10, 10), (90, 10, 10), BOX)
    # grazing the roof counts as blocked (closed box)
    assert not is_los((10, 50, 30), (90, 50, 30), BOX)


@given(point, point)
def test_los_matches_sampling_and_is_symmetric(a, b):
    blocked = bool(segments_blocked(np.array(a), np.array(b), BOX))
    assert blocked == bool(segments_blocked(np.array(b), np.array(a), BOX))
    if _sampled_blocked(a, b, BOX):
        assert blocked


def test_vectorized_segments_match_scalar():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 100, (50, 3))
    b = rng.uniform(0, 100, (50, 3))
    vec = segments_blocked(a, b, BOX)
    assert [not is_los(p, q, BOX) for p, q in zip(a, b)] == list(vec)


def test_distance_and_collision():
    assert distance_to_buildings((50, 50, 10), BOX)[0] == 0
    assert distance_to_buildings((30, 50, 10), BOX)[0] == pytest.approx(10.0)
    assert distance_to_buildings((50, 50, 34), BOX)[0] == pytest.approx(4.0)
    assert collides((41, 50, 10), BOX, margin=2.0)
    assert not collides((37, 50, 10), BOX, margin=2.0)
    assert collides((-1, 50, 10), BOX)
    with pytest.raises(ValueError):
        collides((0, 0, 0), BOX, margin=-1)


def test_scatterers_lie_on_surfaces_and_are_reproducible():
    s = scatterers(BOX, 2.0, jitter=1.0, seed=5)
    d = distance_to_buildings(s.points, BOX)[:, 0]
    assert np.all(d == 0)
    b = BOX.buildings[0]
    on_surface = (
        np.isclose(s.points[:, 2], b.height)
        | np.isclose(s.points[:, 0], b.lo[0])
        | np.isclose(s.points[:, 0], b.hi[0])
        | np.isclose(s.points[:, 1], b.lo[1])
        | np.isclose(s.points[:, 1], b.hi[1])
    )
    assert on_surface.all()
    assert np.array_equal(s.points, scatterers(BOX, 2.0, jitter=1.0, seed=5).points)
    with pytest.raises(ValueError):
        scatterers(BOX, 0.0)


def test_footprint_mask_area():
    xs = np.arange(0.5, 100, 1.0)
    m = footprint_mask(BOX, xs, xs)
    assert m.sum() == 20 * 10
    assert footprint_mask(BOX, xs, xs, min_height=31).sum() == 0


def test_surface_point_counts():
    box = Scene((100.0, 100.0), (Building((50.0, 50.0), 20.0, 20.0, 30.0),))
    # roof 3 x 3 grid, plus the 8-point perimeter ring at z = 0, 10, 20
    assert len(scatterers(box, 10.0)) == 9 + 8 * 3
    assert 3.5 <= len(scatterers(box, 5.0)) / len(scatterers(box, 10.0)) <= 4.5
    assert len(scatterers(Scene((100.0, 100.0)), 1.0)) == 0


def test_los_symmetric_on_many_random_pairs():
    sc = generate_scene(7)
    rng = np.random.default_rng(0)
    hi = np.array([*sc.bounds, 120.0])
    a, b = rng.uniform(0, 1, (10_000, 3)) * hi, rng.uniform(0, 1, (10_000, 3)) * hi
    fwd, back = segments_blocked(a, b, sc), segments_blocked(b, a, sc)
    assert np.array_equal(fwd, back) and 0 < fwd.sum() < len(fwd)


def test_analytic_intersection_matches_ray_march():
    rng = np.random.default_rng(1)
    a = rng.uniform([0, 0, 0], [100, 100, 45], (1000, 3))
    b = rng.uniform([0, 0, 0], [100, 100, 45], (1000, 3))
    analytic = segments_blocked(a, b, BOX)
    marched = np.array([_sampled_blocked(p, q, BOX) for p, q in zip(a, b)])
    assert np.array_equal(analytic, marched)
    assert marched.sum() > 50
