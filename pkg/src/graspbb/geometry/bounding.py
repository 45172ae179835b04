"""Minimal bounding spheres and normal cones.

Spheres use Welzl's move-to-front algorithm (exact, combinatorial).  The
minimal normal cone reduces to the minimal enclosing ball of the unit
normal tips: for unit vectors, minimizing the maximum chord distance to a
unit axis m is equivalent to maximizing the minimum dot product, and the
optimal axis is the normalized ball center.  Both radii are SQUARED.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundingSphere",
    "BoundingCone",
    "min_bounding_sphere",
    "min_bounding_cone",
    "inflate_cone_eps",
]

FULL_SPHERE_EPS = 4.0


@dataclass(frozen=True)
class BoundingSphere:
    center: np.ndarray
    sq_radius: float

    def contains(self, points, tol: float = 1e-9) -> bool:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = ((points - self.center) ** 2).sum(axis=1)
        return bool((d2 <= self.sq_radius + tol).all())


@dataclass(frozen=True)
class BoundingCone:
    """Spherical cap {n : ||n - axis||^2 <= sq_radius} over unit vectors."""

    axis: np.ndarray
    sq_radius: float

    def contains(self, normals, tol: float = 1e-9) -> bool:
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        d2 = ((normals - self.axis) ** 2).sum(axis=1)
        return bool((d2 <= self.sq_radius + tol).all())


def _ball_of(support: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """Smallest ball with the given <= 4 affinely independent boundary points."""
    k = len(support)
    if k == 0:
        return np.zeros(3), -1.0
    if k == 1:
        return support[0].copy(), 0.0
    a = support[0]
    rows = [p - a for p in support[1:]]
    A = np.array(rows)
    rhs = 0.5 * np.array([r @ r for r in rows])
    # center = a + x with x in the affine span of the support set
    AAt = A @ A.T
    try:
        lam = np.linalg.solve(AAt, rhs)
        x = A.T @ lam
    except np.linalg.LinAlgError:
        # nearly dependent support set: least-squares center, conservative radius
        x = A.T @ np.linalg.lstsq(AAt, rhs, rcond=None)[0]
        center = a + x
        r2 = max(float((p - center) @ (p - center)) for p in support)
        return center, r2
    center = a + x
    return center, float(x @ x)


def _welzl(points: np.ndarray, n: int, support: list[np.ndarray]):
    """Move-to-front Welzl recursion over points[:n] with boundary ``support``."""
    center, r2 = _ball_of(support)
    if len(support) == 4:
        return center, r2
    for i in range(n):
        p = points[i]
        if r2 < 0.0 or (p - center) @ (p - center) > r2 * (1 + 1e-12) + 1e-30:
            support.append(p.copy())
            center, r2 = _welzl(points, i, support)
            support.pop()
            # move-to-front: keep hard points early
            if i > 0:
                tmp = points[i].copy()
                points[1 : i + 1] = points[0:i]
                points[0] = tmp
    return center, r2


def min_bounding_sphere(points) -> BoundingSphere:
    """Minimal enclosing sphere of a point set; radius reported squared."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("need at least one point")
    if pts.shape[1] != 3:
        raise ValueError("points must be (n, 3)")
    work = np.unique(pts, axis=0)  # deterministic order, duplicates removed
    center, r2 = _welzl(work.copy(), work.shape[0], [])
    if r2 < 0.0:
        center, r2 = pts[0].copy(), 0.0
    return BoundingSphere(center, max(0.0, float(r2)))


def min_bounding_cone(normals) -> BoundingCone:
    """Minimal spherical cap containing a set of unit vectors.

    If the set does not fit in an open hemisphere the cap is the full sphere
    of directions (sq_radius 4, axis = first member).
    """
    ns = np.atleast_2d(np.asarray(normals, dtype=float))
    if ns.size == 0:
        raise ValueError("need at least one normal")
    if ns.shape[1] != 3:
        raise ValueError("normals must be (n, 3)")
    lens = np.linalg.norm(ns, axis=1)
    if (np.abs(lens - 1.0) > 1e-6).any():
        raise ValueError("normals must be unit length")
    sphere = min_bounding_sphere(ns)
    c = sphere.center
    cn = float(np.linalg.norm(c))
    if cn <= 1e-12:
        return BoundingCone(ns[0].copy(), FULL_SPHERE_EPS)
    axis = c / cn
    min_dot = float((ns @ axis).min())
    if min_dot <= 0.0:
        return BoundingCone(ns[0].copy(), FULL_SPHERE_EPS)
    eps = min(FULL_SPHERE_EPS, max(0.0, 2.0 - 2.0 * min_dot))
    return BoundingCone(axis, eps)


def inflate_cone_eps(eps_node: float, eps_user: float) -> float:
    """Widen a cap's squared chord radius by a user slack, in angle space.

    The cap half-angles add: theta = 2 asin(sqrt(eps_node)/2)
    + 2 asin(sqrt(eps_user)/2), and the result is the squared chord radius
    of the combined cap, saturating at the full sphere (4).
    """
    for name, val in (("eps_node", eps_node), ("eps_user", eps_user)):
        if not 0.0 <= val <= 4.0:
            raise ValueError(f"{name} must be in [0, 4], got {val}")
    # a zero term adds no angle; short-circuit keeps the other value exact
    if eps_node == 0.0:
        return float(eps_user)
    if eps_user == 0.0:
        return float(eps_node)
    theta = 2.0 * np.arcsin(np.sqrt(eps_node) / 2.0) + 2.0 * np.arcsin(
        np.sqrt(eps_user) / 2.0
    )
    half = min(theta, np.pi) / 2.0
    return float(min(FULL_SPHERE_EPS, (2.0 * np.sin(half)) ** 2))
