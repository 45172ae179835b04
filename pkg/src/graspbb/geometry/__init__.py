"""Convex geometry primitives: transforms, penetration, bounding volumes."""

from .bounding import (
    BoundingCone,
    BoundingSphere,
    inflate_cone_eps,
    min_bounding_cone,
    min_bounding_sphere,
)
from .convex import ConvexBody, PenetrationResult, penetration, support
from .transforms import RigidTransform, hat, identity_transform, is_rotation, rodrigues_exp

__all__ = [
    "BoundingCone",
    "BoundingSphere",
    "ConvexBody",
    "PenetrationResult",
    "RigidTransform",
    "hat",
    "identity_transform",
    "inflate_cone_eps",
    "is_rotation",
    "min_bounding_cone",
    "min_bounding_sphere",
    "penetration",
    "rodrigues_exp",
    "support",
]
