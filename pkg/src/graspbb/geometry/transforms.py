"""Rigid transforms and rotation utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RigidTransform",
    "rodrigues_exp",
    "is_rotation",
    "hat",
    "identity_transform",
]

ROTATION_TOL = 1e-9


def hat(w: np.ndarray) -> np.ndarray:
    """Skew-symmetric cross-product matrix of a 3-vector."""
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def rodrigues_exp(w) -> np.ndarray:
    """Rotation matrix exp([w]x) for an axis-angle vector ``w``.

    Uses the closed Rodrigues form with a series fallback near zero angle so
    the result is orthonormal to within 1e-12 for any input.
    """
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    K = hat(w)
    if theta < 1e-6:
        # sin(t)/t and (1-cos t)/t^2 by series; exact enough below 1e-6 rad
        a = 1.0 - theta**2 / 6.0 + theta**4 / 120.0
        b = 0.5 - theta**2 / 24.0 + theta**4 / 720.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * K + b * (K @ K)


def is_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    """True if R'R = I and det(R) = 1 within ``tol``."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    if not np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0.0):
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


@dataclass(frozen=True)
class RigidTransform:
    """Rotation plus translation; applies as ``R @ x + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))
        if self.rotation.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if self.translation.shape != (3,):
            raise ValueError("translation must be a 3-vector")

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -(self.rotation.T @ self.translation))


def identity_transform() -> RigidTransform:
    return RigidTransform(np.eye(3), np.zeros(3))
