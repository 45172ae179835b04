"""The Q1 grasp metric: largest wrench-space ball under a unit force budget.

Each contact's quadratic friction cone is discretized into ``cone_edges``
boundary forces; every force contributes the 6-wrench (f, ((p - o) x f)/s)
with torque origin o and scale s.  Q1 is the radius of the largest
origin-centered ball inside the convex hull of all contact wrenches plus
the zero wrench, computed as the minimum origin-to-facet distance of the
6-D hull.  Monotone under adding contacts, which is what the high-level
branch-and-bound prunes with.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

__all__ = [
    "ContactModel",
    "contact_wrenches",
    "default_contact_model",
    "q1",
    "q1_upper",
    "wrench_ball_radius",
]


@dataclass(frozen=True)
class ContactModel:
    friction_mu: float = 0.5
    cone_edges: int = 8
    torque_origin: np.ndarray = None
    torque_scale: float = 1.0

    def __post_init__(self):
        if self.friction_mu <= 0:
            raise ValueError("friction_mu must be positive")
        if self.cone_edges < 3:
            raise ValueError("cone_edges must be >= 3")
        if self.torque_scale <= 0:
            raise ValueError("torque_scale must be positive")
        origin = np.zeros(3) if self.torque_origin is None else np.asarray(self.torque_origin, dtype=float)
        object.__setattr__(self, "torque_origin", origin)


def default_contact_model(points, friction_mu: float = 0.5, cone_edges: int = 8) -> ContactModel:
    """Contact model with the torque frame normalized to the sampled points.

    Origin = centroid; scale = max centroid-to-point distance, which makes
    force and torque components commensurate and Q1 invariant under uniform
    object rescaling of the same contact configuration.
    """
    pos = np.asarray(points, dtype=float)
    centroid = pos.mean(axis=0)
    scale = float(np.linalg.norm(pos - centroid, axis=1).max())
    return ContactModel(friction_mu, cone_edges, centroid, max(scale, 1e-12))


def _tangent_frame(n: np.ndarray):
    """Deterministic orthonormal (u, v) spanning the plane orthogonal to n."""
    e = np.zeros(3)
    e[int(np.argmin(np.abs(n)))] = 1.0
    u = e - (e @ n) * n
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def contact_wrenches(position, inward_normal, model: ContactModel) -> np.ndarray:
    """The (cone_edges, 6) wrenches of one contact's friction-cone edges."""
    p = np.asarray(position, dtype=float)
    n = np.asarray(inward_normal, dtype=float)
    ln = np.linalg.norm(n)
    if ln <= 0:
        raise ValueError("contact normal must be nonzero")
    n = n / ln
    u, v = _tangent_frame(n)
    m = model.cone_edges
    ang = 2.0 * np.pi * np.arange(m) / m
    forces = n[None, :] + model.friction_mu * (
        np.cos(ang)[:, None] * u[None, :] + np.sin(ang)[:, None] * v[None, :]
    )
    forces /= np.linalg.norm(forces, axis=1, keepdims=True)
    torques = np.cross(p - model.torque_origin, forces) / model.torque_scale
    return np.hstack([forces, torques])


def wrench_ball_radius(wrenches: np.ndarray) -> float:
    """Largest origin-centered ball inside the hull of the given 6-wrenches.

    Zero when the origin is not strictly interior (including all
    lower-dimensional hulls).
    """
    wrenches = np.asarray(wrenches, dtype=float)
    if wrenches.shape[0] < 7:
        return 0.0
    try:
        hull = ConvexHull(wrenches)
    except QhullError:
        return 0.0  # degenerate, lower-dimensional wrench set
    offsets = hull.equations[:, -1]
    val = float((-offsets).min())
    return val if val > 0.0 else 0.0


def q1(positions, normals, model: ContactModel) -> float:
    """Q1 of a contact set; 0 unless the origin is strictly inside the hull."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    nrm = np.atleast_2d(np.asarray(normals, dtype=float))
    if pos.shape[0] < 1:
        raise ValueError("need at least one contact")
    rows = [np.zeros((1, 6))]
    for p, n in zip(pos, nrm):
        rows.append(contact_wrenches(p, n, model))
    return wrench_ball_radius(np.vstack(rows))


def q1_upper(tree, node_ids, model: ContactModel) -> float:
    """Q1 of the union of the given KD nodes' member points.

    By monotonicity this bounds the Q1 of any selection of one member point
    per node from above.  Duplicate nodes contribute once (union semantics).
    """
    if len(node_ids) == 0:
        raise ValueError("need at least one node")
    idx = np.unique(np.concatenate([tree.node(i).point_indices for i in node_ids]))
    return q1(tree.points.positions[idx], tree.points.normals[idx], model)
