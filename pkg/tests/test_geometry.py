import numpy as np
import pytest

from graspbb.geometry import (
    ConvexBody,
    RigidTransform,
    identity_transform,
    inflate_cone_eps,
    is_rotation,
    min_bounding_cone,
    min_bounding_sphere,
    penetration,
    rodrigues_exp,
    support,
)
from oracles import (
    cone_oracle,
    icosphere_vertices,
    meb_oracle,
    minkowski_depth,
    rotation_series,
    sweep_depth,
    unit_cube,
)

I3 = np.eye(3)
IDENT = identity_transform()


def translate(t):
    return RigidTransform(I3, np.asarray(t, dtype=float))


class TestSupport:
    def test_cube_axis(self):
        cube = ConvexBody(unit_cube())
        v = support(cube, np.array([1.0, 0.0, 0.0]))
        assert v[0] == pytest.approx(0.5)

    def test_singleton(self):
        body = ConvexBody(np.array([[1.0, 2.0, 3.0]]))
        for d in ([1, 0, 0], [0, -1, 0], [0.3, 0.2, -0.9]):
            assert np.allclose(support(body, np.array(d, dtype=float)), [1, 2, 3])

    def test_tetrahedron_vertex_direction(self):
        verts = np.array(
            [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
        )
        body = ConvexBody(verts)
        for v in verts:
            expected = verts[int(np.argmax(verts @ v))]
            assert np.allclose(support(body, v), expected)

    def test_zero_direction_rejected(self):
        body = ConvexBody(unit_cube())
        with pytest.raises(ValueError):
            support(body, np.zeros(3))


class TestPenetration:
    def test_cubes_overlap_half(self):
        cube = ConvexBody(unit_cube())
        res = penetration(cube, IDENT, cube, translate([0.5, 0, 0]))
        assert res.depth == pytest.approx(0.5, abs=1e-9)

    def test_cubes_disjoint(self):
        cube = ConvexBody(unit_cube())
        res = penetration(cube, IDENT, cube, translate([2.0, 0, 0]))
        assert res.depth == 0.0
        assert res.distance == pytest.approx(1.0, abs=1e-9)

    def test_icosphere_vs_cube_sweep_oracle(self):
        verts, _ = icosphere_vertices(1)
        assert verts.shape[0] == 42
        sphere = ConvexBody(verts)
        cube = ConvexBody(unit_cube())
        pose_b = translate([0.8, 0.0, 0.0])
        res = penetration(sphere, IDENT, cube, pose_b)
        oracle = sweep_depth(verts, unit_cube() + np.array([0.8, 0, 0]))
        assert res.depth == pytest.approx(oracle, abs=2e-2)

    def test_depth_symmetry(self):
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(60):
            a = ConvexBody(rng.normal(size=(10, 3)))
            b = ConvexBody(rng.normal(size=(10, 3)) * 0.7)
            r1 = penetration(a, IDENT, b, IDENT)
            r2 = penetration(b, IDENT, a, IDENT)
            worst = max(worst, abs(r1.depth - r2.depth))
        assert worst <= 1e-9

    def test_depth_matches_exact_minkowski_hull(self):
        rng = np.random.default_rng(7)
        for _ in range(150):
            va = rng.normal(size=(rng.integers(4, 20), 3))
            vb = rng.normal(size=(rng.integers(4, 20), 3)) + rng.normal(size=3) * 0.5
            res = penetration(ConvexBody(va), IDENT, ConvexBody(vb), IDENT)
            exact = minkowski_depth(va, vb)
            assert res.depth == pytest.approx(exact, abs=1e-6, rel=1e-6)
            if res.depth > 1e-6:
                gap = np.linalg.norm(res.witness_a - res.witness_b)
                assert gap == pytest.approx(res.depth, abs=1e-6)


class TestBoundingSphere:
    def test_singleton(self):
        s = min_bounding_sphere([[0.0, 0.0, 0.0]])
        assert np.allclose(s.center, 0.0)
        assert s.sq_radius == 0.0

    def test_pair_midpoint(self):
        # radius field is squared: midpoint at distance 1 gives sq_radius 1
        s = min_bounding_sphere([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        assert np.allclose(s.center, [1.0, 0.0, 0.0])
        assert s.sq_radius == pytest.approx(1.0, abs=1e-12)

    def test_random_sets_match_combinatorial_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            pts = rng.random(size=(20, 3))
            s = min_bounding_sphere(pts)
            _, r2 = meb_oracle(pts)
            assert np.sqrt(s.sq_radius) == pytest.approx(np.sqrt(r2), abs=1e-7)
            assert s.contains(pts, tol=1e-9)

    def test_property_containment_and_minimality(self):
        rng = np.random.default_rng(9)
        for _ in range(150):
            n = int(rng.integers(1, 51))
            pts = rng.normal(size=(n, 3)) * rng.uniform(0.1, 5.0)
            s = min_bounding_sphere(pts)
            assert s.contains(pts, tol=1e-9)
            _, r2 = meb_oracle(pts)
            assert s.sq_radius <= r2 * (1 + 1e-9) + 1e-9

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            min_bounding_sphere(np.empty((0, 3)))


class TestBoundingCone:
    def test_singleton(self):
        c = min_bounding_cone([[0.0, 0.0, 1.0]])
        assert np.allclose(c.axis, [0, 0, 1])
        assert c.sq_radius == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_pair(self):
        a = 0.3
        ns = [[np.sin(a), 0, np.cos(a)], [-np.sin(a), 0, np.cos(a)]]
        c = min_bounding_cone(ns)
        expected = np.sum((np.array(ns[0]) - np.array([0, 0, 1.0])) ** 2)
        assert np.allclose(c.axis, [0, 0, 1], atol=1e-9)
        assert c.sq_radius == pytest.approx(expected, abs=1e-9)

    def test_random_cap_matches_grid_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            # 15 normals inside a 30-degree cap around a random axis
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            ns = []
            while len(ns) < 15:
                v = rng.normal(size=3)
                v /= np.linalg.norm(v)
                if v @ axis > np.cos(np.radians(30)):
                    ns.append(v)
            ns = np.array(ns)
            c = min_bounding_cone(ns)
            assert c.contains(ns, tol=1e-9)
            assert c.sq_radius == pytest.approx(cone_oracle(ns), abs=1e-6)

    def test_hemisphere_violation_gives_full_sphere(self):
        ns = [[0, 0, 1.0], [0, 0, -1.0]]
        c = min_bounding_cone(ns)
        assert c.sq_radius == 4.0

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            min_bounding_cone([[0, 0, 2.0]])
        with pytest.raises(ValueError):
            min_bounding_cone(np.empty((0, 3)))


class TestInflateConeEps:
    def test_anchor_values(self):
        assert inflate_cone_eps(0.0, 0.0) == 0.0
        assert inflate_cone_eps(0.0, 0.05) == 0.05
        assert inflate_cone_eps(4.0, 0.1) == 4.0

    def test_formula_midrange(self):
        eps_n, eps_u = 0.3, 0.05
        theta = 2 * np.arcsin(np.sqrt(eps_n) / 2) + 2 * np.arcsin(np.sqrt(eps_u) / 2)
        expected = (2 * np.sin(min(theta, np.pi) / 2)) ** 2
        assert inflate_cone_eps(eps_n, eps_u) == pytest.approx(expected, abs=1e-12)

    def test_monotone_on_grid(self):
        vals = np.linspace(0.0, 4.0, 50)
        table = np.array([[inflate_cone_eps(a, b) for b in vals] for a in vals])
        assert (np.diff(table, axis=0) >= -1e-12).all()
        assert (np.diff(table, axis=1) >= -1e-12).all()

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            inflate_cone_eps(-0.1, 0.0)
        with pytest.raises(ValueError):
            inflate_cone_eps(0.0, 4.5)


class TestRodrigues:
    def test_identity(self):
        assert np.allclose(rodrigues_exp([0, 0, 0]), I3)

    def test_half_turn_x(self):
        assert np.allclose(rodrigues_exp([np.pi, 0, 0]), np.diag([1.0, -1.0, -1.0]), atol=1e-15)

    def test_matches_series(self):
        w = np.array([0.1, 0.2, 0.3])
        assert np.allclose(rodrigues_exp(w), rotation_series(w), atol=1e-10)

    def test_inverse_property(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            w = rng.normal(size=3)
            n = np.linalg.norm(w)
            if n > np.pi:
                w *= np.pi / n
            R = rodrigues_exp(w) @ rodrigues_exp(-w)
            assert np.allclose(R, I3, atol=1e-10)

    def test_orthonormality(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            R = rodrigues_exp(rng.normal(size=3))
            assert is_rotation(R, tol=1e-12)
