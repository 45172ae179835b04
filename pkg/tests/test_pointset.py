import numpy as np
import pytest

from graspbb.pointset import build_kdtree, sample_surface, GraspPointSet
from meshes import cube_mesh


class TestSampleSurface:
    def test_single_point_on_cube_face(self):
        v, t = cube_mesh()
        ps = sample_surface(v, t, 1, seed=0)
        assert len(ps) == 1
        p, n = ps.positions[0], ps.normals[0]
        # on the surface: one coordinate at +-0.5, rest within the face
        on_face = np.isclose(np.abs(p), 0.5, atol=1e-12)
        assert on_face.any()
        axis = int(np.argmax(on_face))
        expected = np.zeros(3)
        expected[axis] = -np.sign(p[axis])  # inward
        assert np.allclose(n, expected)

    def test_six_points_spacing_and_normals(self):
        v, t = cube_mesh()
        ps = sample_surface(v, t, 6, seed=42)
        assert len(ps) == 6
        d = ps.positions[:, None, :] - ps.positions[None, :, :]
        dist = np.sqrt((d**2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        assert dist.min() >= 0.5 * np.sqrt(6.0 / 6.0)
        # all normals inward axis-aligned
        assert np.allclose(np.abs(ps.normals).max(axis=1), 1.0)
        for p, n in zip(ps.positions, ps.normals):
            axis = int(np.argmax(np.abs(n)))
            assert p[axis] == pytest.approx(-0.5 * np.sign(n[axis]))

    def test_deterministic_per_seed(self):
        v, t = cube_mesh()
        a = sample_surface(v, t, 12, seed=7)
        b = sample_surface(v, t, 12, seed=7)
        assert (a.positions == b.positions).all()
        assert (a.normals == b.normals).all()
        c = sample_surface(v, t, 12, seed=8)
        assert not (a.positions == c.positions).all()

    def test_degenerate_mesh_rejected(self):
        v = np.zeros((3, 3))
        t = np.array([[0, 1, 2]])
        with pytest.raises(ValueError):
            sample_surface(v, t, 4, seed=0)

    def test_spacing_bound_holds_on_random_seeds(self):
        v, t = cube_mesh()
        for seed in range(8):
            ps = sample_surface(v, t, 20, seed=seed)
            d = ps.positions[:, None, :] - ps.positions[None, :, :]
            dist = np.sqrt((d**2).sum(axis=2))
            np.fill_diagonal(dist, np.inf)
            assert dist.min() >= 0.5 * np.sqrt(6.0 / 20.0)


def _point_set(positions):
    positions = np.asarray(positions, dtype=float)
    normals = np.tile([0.0, 0.0, 1.0], (len(positions), 1))
    return GraspPointSet(positions, normals)


class TestKdTree:
    def test_single_point_tree(self):
        tree = build_kdtree(_point_set([[1.0, 2.0, 3.0]]))
        root = tree.node(tree.root)
        assert root.is_leaf
        assert root.sphere.sq_radius == 0.0
        assert root.cone.sq_radius == pytest.approx(0.0, abs=1e-12)

    def test_collinear_median_split(self):
        tree = build_kdtree(_point_set([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]))
        root = tree.node(tree.root)
        left = tree.node(root.left)
        right = tree.node(root.right)
        assert left.point_indices.tolist() == [0, 1]
        assert right.point_indices.tolist() == [2, 3]
        assert root.sphere.center[0] == pytest.approx(1.5)
        assert root.sphere.sq_radius == pytest.approx(2.25, abs=1e-9)

    def test_depth_and_containment_on_random_points(self):
        rng = np.random.default_rng(3)
        pos = rng.normal(size=(100, 3))
        nrm = rng.normal(size=(100, 3))
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        tree = build_kdtree(GraspPointSet(pos, nrm))

        def depth(nid):
            node = tree.node(nid)
            if node.is_leaf:
                return 1
            return 1 + max(depth(node.left), depth(node.right))

        assert depth(tree.root) <= int(np.ceil(np.log2(100))) + 1

        # every node's sphere/cone contains all member points/normals
        for node in tree.nodes:
            assert node.sphere.contains(pos[node.point_indices], tol=1e-9)
            assert node.cone.contains(nrm[node.point_indices], tol=1e-9)
            if not node.is_leaf:
                li = tree.node(node.left).point_indices
                ri = tree.node(node.right).point_indices
                merged = np.sort(np.concatenate([li, ri]))
                assert (merged == node.point_indices).all()
                assert len(np.intersect1d(li, ri)) == 0

    def test_leaves_partition_point_set(self):
        rng = np.random.default_rng(8)
        pos = rng.normal(size=(17, 3))
        nrm = np.tile([0.0, 0.0, 1.0], (17, 1))
        tree = build_kdtree(GraspPointSet(pos, nrm))
        leaves = [n for n in tree.nodes if n.is_leaf]
        assert len(leaves) == 17
        all_idx = np.sort(np.concatenate([n.point_indices for n in leaves]))
        assert (all_idx == np.arange(17)).all()

    def test_path_to_root(self):
        rng = np.random.default_rng(1)
        pos = rng.normal(size=(8, 3))
        nrm = np.tile([0.0, 0.0, 1.0], (8, 1))
        tree = build_kdtree(GraspPointSet(pos, nrm))
        assert tree.path_to_root(tree.root) == [tree.root]

        # a leaf of the depth-3 tree has 4 ids, each the parent of the previous
        leaf_id = next(i for i, n in enumerate(tree.nodes) if n.is_leaf)
        path = tree.path_to_root(leaf_id)
        assert len(path) == 4
        for child, parent in zip(path, path[1:]):
            assert tree.node(child).parent == parent

        # intersection of member sets along any path equals the node's own set
        for nid in range(len(tree.nodes)):
            member_sets = [set(tree.node(p).point_indices.tolist()) for p in tree.path_to_root(nid)]
            inter = set.intersection(*member_sets)
            assert inter == set(tree.node(nid).point_indices.tolist())

        with pytest.raises(IndexError):
            tree.path_to_root(999)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            GraspPointSet(np.empty((0, 3)), np.empty((0, 3)))
