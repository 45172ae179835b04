"""Candidate grasp points and the KD-tree over them.

Surface sampling is a deterministic, seeded sample-elimination scheme:
oversample uniformly by area, then greedily remove one endpoint of the
closest remaining pair until the requested count is left.  Every KD-tree
node carries the minimal bounding sphere of its member positions and the
minimal bounding cone of its member (inward) normals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    BoundingCone,
    BoundingSphere,
    min_bounding_cone,
    min_bounding_sphere,
)

__all__ = ["GraspPointSet", "KdNode", "KdTree", "sample_surface", "build_kdtree"]


@dataclass(frozen=True)
class GraspPointSet:
    """Sampled surface points with inward unit normals."""

    positions: np.ndarray  # (P, 3)
    normals: np.ndarray  # (P, 3), unit, pointing into the object

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        nrm = np.asarray(self.normals, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("positions must be (P, 3) with P >= 1")
        if nrm.shape != pos.shape:
            raise ValueError("normals must match positions")
        if (np.abs(np.linalg.norm(nrm, axis=1) - 1.0) > 1e-9).any():
            raise ValueError("normals must be unit length")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "normals", nrm)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def scaled(self, factor: float) -> "GraspPointSet":
        return GraspPointSet(self.positions * float(factor), self.normals.copy())


@dataclass
class KdNode:
    point_indices: np.ndarray  # sorted member indices
    sphere: BoundingSphere
    cone: BoundingCone
    parent: int | None = None
    left: int | None = None
    right: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class KdTree:
    points: GraspPointSet
    nodes: list[KdNode] = field(default_factory=list)
    root: int = 0

    def node(self, node_id: int) -> KdNode:
        if not 0 <= node_id < len(self.nodes):
            raise IndexError(f"invalid KD node id {node_id}")
        return self.nodes[node_id]

    def path_to_root(self, node_id: int) -> list[int]:
        """Node ids from ``node_id`` up to and including the root."""
        node = self.node(node_id)
        path = [node_id]
        while node.parent is not None:
            path.append(node.parent)
            node = self.nodes[node.parent]
        return path

    def leaf_for_point(self, point_index: int) -> int:
        """Id of the singleton leaf containing ``point_index``."""
        nid = self.root
        while not self.nodes[nid].is_leaf:
            left = self.nodes[self.nodes[nid].left]
            if point_index in set(left.point_indices.tolist()):
                nid = self.nodes[nid].left
            else:
                nid = self.nodes[nid].right
        if self.nodes[nid].point_indices[0] != point_index:
            raise ValueError(f"point {point_index} not in tree")
        return nid


def _triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _sample_on_mesh(vertices, triangles, count, rng):
    """Uniform-by-area points with outward (winding) normals."""
    areas = _triangle_areas(vertices, triangles)
    total = areas.sum()
    cdf = np.cumsum(areas) / total
    tri_idx = np.searchsorted(cdf, rng.random(count))
    a = vertices[triangles[tri_idx, 0]]
    b = vertices[triangles[tri_idx, 1]]
    c = vertices[triangles[tri_idx, 2]]
    u = rng.random(count)
    v = rng.random(count)
    su = np.sqrt(u)
    w0 = 1.0 - su
    w1 = su * (1.0 - v)
    w2 = su * v
    pts = w0[:, None] * a + w1[:, None] * b + w2[:, None] * c
    nrm = np.cross(b - a, c - a)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return pts, nrm


def _eliminate_to(pts: np.ndarray, keep: int) -> np.ndarray:
    """Greedy closest-pair elimination; returns indices of survivors.

    Of the closest pair, the endpoint whose next-nearest neighbor is closer
    (the more crowded one) is removed; index order breaks ties.
    """
    n = pts.shape[0]
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    alive = np.ones(n, dtype=bool)
    for _ in range(n - keep):
        sub = np.where(alive)[0]
        dsub = d2[np.ix_(sub, sub)]
        flat = np.argmin(dsub)
        i, j = np.unravel_index(flat, dsub.shape)
        gi, gj = int(sub[i]), int(sub[j])
        row_i = dsub[i].copy()
        row_j = dsub[j].copy()
        row_i[j] = np.inf
        row_j[i] = np.inf
        second_i = row_i.min() if len(sub) > 2 else np.inf
        second_j = row_j.min() if len(sub) > 2 else np.inf
        if second_i < second_j or (second_i == second_j and gi > gj):
            alive[gi] = False
        else:
            alive[gj] = False
    return np.where(alive)[0]


def sample_surface(vertices, triangles, count: int, seed: int) -> GraspPointSet:
    """Sample ``count`` blue-noise-ish surface points with inward normals.

    Deterministic for a fixed seed.  Guarantees a pairwise minimum distance
    of at least 0.5 * sqrt(area / count); oversampling grows until the bound
    holds.  Triangles must wind counterclockwise when viewed from outside.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=int)
    if count < 1:
        raise ValueError("count must be >= 1")
    if triangles.ndim != 2 or triangles.shape[1] != 3 or triangles.shape[0] < 1:
        raise ValueError("mesh must be a non-empty triangle list")
    areas = _triangle_areas(vertices, triangles)
    total_area = float(areas.sum())
    if total_area <= 0.0:
        raise ValueError("mesh has zero surface area")
    bound = 0.5 * np.sqrt(total_area / count)

    oversample = 4
    while True:
        rng = np.random.default_rng(seed)
        pts, outward = _sample_on_mesh(vertices, triangles, oversample * count, rng)
        survivors = _eliminate_to(pts, count)
        chosen = pts[survivors]
        if count == 1:
            break
        d2 = ((chosen[:, None, :] - chosen[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        if np.sqrt(d2.min()) >= bound:
            break
        oversample *= 2
        if oversample > 256:
            raise RuntimeError(
                "sample elimination could not reach the blue-noise spacing bound"
            )
    return GraspPointSet(chosen, -outward[survivors])


def _build_node(tree: KdTree, indices: np.ndarray, parent: int | None) -> int:
    pts = tree.points
    node_id = len(tree.nodes)
    sphere = min_bounding_sphere(pts.positions[indices])
    cone = min_bounding_cone(pts.normals[indices])
    tree.nodes.append(
        KdNode(np.sort(indices.copy()), sphere, cone, parent=parent)
    )
    if len(indices) > 1:
        pos = pts.positions[indices]
        axis = int(np.argmax(pos.max(axis=0) - pos.min(axis=0)))
        # stable sort on (coordinate, index) for determinism
        order = np.lexsort((indices, pos[:, axis]))
        half = (len(indices) + 1) // 2  # lower half takes the extra point
        left_idx = indices[order[:half]]
        right_idx = indices[order[half:]]
        left_id = _build_node(tree, left_idx, node_id)
        right_id = _build_node(tree, right_idx, node_id)
        tree.nodes[node_id].left = left_id
        tree.nodes[node_id].right = right_id
    return node_id


def build_kdtree(points: GraspPointSet) -> KdTree:
    """Median-split KD-tree (widest axis) with bounding spheres and cones."""
    if len(points) < 1:
        raise ValueError("point set must be non-empty")
    tree = KdTree(points=points)
    _build_node(tree, np.arange(len(points)), None)
    return tree
