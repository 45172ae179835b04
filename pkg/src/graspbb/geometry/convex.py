"""Convex bodies, support maps, and penetration depth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._gjk_kernels import penetration_query
from .transforms import RigidTransform

__all__ = ["ConvexBody", "PenetrationResult", "support", "penetration"]


@dataclass(frozen=True)
class ConvexBody:
    """A convex body given as its vertex cloud in a body-local frame.

    The support function over the vertex set is exact for the convex hull,
    so interior/duplicate vertices are harmless.
    """

    vertices: np.ndarray

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] < 1:
            raise ValueError("vertices must be a non-empty (n, 3) array")
        if not np.isfinite(verts).all():
            raise ValueError("vertices must be finite")
        object.__setattr__(self, "vertices", verts)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    def transformed(self, pose: RigidTransform) -> np.ndarray:
        return np.ascontiguousarray(pose.apply(self.vertices))


@dataclass(frozen=True)
class PenetrationResult:
    """Penetration depth with witness points in each body's local frame.

    depth == 0 iff the interiors are disjoint (within tolerance); for a
    positive depth the witnesses realize the deepest penetration, i.e.
    translating body B by depth along the witness direction separates them.
    """

    depth: float
    witness_a: np.ndarray
    witness_b: np.ndarray
    distance: float = 0.0


def support(body: ConvexBody, direction) -> np.ndarray:
    """Vertex of ``body`` maximizing the dot product with ``direction``.

    Ties break toward the lowest vertex index.
    """
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,) or not np.isfinite(d).all() or np.dot(d, d) == 0.0:
        raise ValueError("direction must be a nonzero 3-vector")
    return body.vertices[int(np.argmax(body.vertices @ d))].copy()


def penetration(
    a: ConvexBody,
    pose_a: RigidTransform,
    b: ConvexBody,
    pose_b: RigidTransform,
) -> PenetrationResult:
    """Translational penetration depth of two posed convex bodies.

    Depth is 0 when the bodies are disjoint (the witnesses are then the
    closest points); relative accuracy 1e-6 on the scene scale.
    """
    va = a.transformed(pose_a)
    vb = b.transformed(pose_b)
    scale = max(
        1.0,
        float(np.abs(va).max(initial=0.0)),
        float(np.abs(vb).max(initial=0.0)),
    )
    eps = 1e-9 * scale
    depth, dist, wa, wb = penetration_query(va, vb, eps)
    wa_local = pose_a.inverse().apply(wa)
    wb_local = pose_b.inverse().apply(wb)
    return PenetrationResult(float(depth), wa_local, wb_local, float(dist))
