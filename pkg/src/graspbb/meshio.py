"""Object loading: OBJ-style triangle meshes plus convex-piece sidecars."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import ConvexBody

__all__ = ["ObjectModel", "load_object", "parse_obj", "write_obj"]


class MeshError(ValueError):
    """Malformed mesh or sidecar input."""


@dataclass(frozen=True)
class ObjectModel:
    """Target object: surface mesh for sampling, convex pieces for collision.

    Without a sidecar the convex hull of the whole mesh is the single
    collision piece (a documented approximation for non-convex objects).
    """

    vertices: np.ndarray  # (V, 3)
    triangles: np.ndarray  # (T, 3) int
    pieces: tuple[ConvexBody, ...]

    @property
    def radius(self) -> float:
        """Bounding radius about the object-frame origin."""
        return float(np.linalg.norm(self.vertices, axis=1).max())

    def scaled(self, factor: float) -> "ObjectModel":
        factor = float(factor)
        return ObjectModel(
            self.vertices * factor,
            self.triangles.copy(),
            tuple(ConvexBody(p.vertices * factor) for p in self.pieces),
        )


def parse_obj(text: str):
    """Minimal OBJ parser: v and f records, polygons fan-triangulated."""
    verts, tris = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshError(f"line {lineno}: vertex needs 3 coordinates")
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise MeshError(f"line {lineno}: bad vertex coordinate ({exc})")
        elif tag == "f":
            if len(parts) < 4:
                raise MeshError(f"line {lineno}: face needs at least 3 vertices")
            try:
                idx = [int(p.split("/", 1)[0]) for p in parts[1:]]
            except ValueError as exc:
                raise MeshError(f"line {lineno}: bad face index ({exc})")
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            for k in range(1, len(idx) - 1):
                tris.append([idx[0], idx[k], idx[k + 1]])
    if not verts or not tris:
        raise MeshError("mesh has no vertices or no faces")
    vertices = np.array(verts, dtype=float)
    triangles = np.array(tris, dtype=int)
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        raise MeshError("face index out of range")
    return vertices, triangles


def write_obj(path, vertices, triangles):
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in np.asarray(vertices, dtype=float)]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(triangles, dtype=int)]
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_pieces(text: str, vertices: np.ndarray):
    pieces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            idx = np.array([int(t) for t in line.split()], dtype=int)
        except ValueError as exc:
            raise MeshError(f"pieces line {lineno}: bad index ({exc})")
        if len(idx) < 1 or idx.min() < 0 or idx.max() >= len(vertices):
            raise MeshError(f"pieces line {lineno}: vertex index out of range")
        pieces.append(ConvexBody(vertices[idx]))
    if not pieces:
        raise MeshError("pieces sidecar is empty")
    return tuple(pieces)


def load_object(mesh_path, pieces_path=None, scale: float = 1.0) -> ObjectModel:
    """Load a triangle mesh (+ optional convex-piece sidecar of vertex-index
    groups, one piece per line)."""
    mesh_path = Path(mesh_path)
    try:
        vertices, triangles = parse_obj(mesh_path.read_text())
    except OSError as exc:
        raise MeshError(f"{mesh_path}: {exc}")
    if pieces_path is not None:
        pieces = _parse_pieces(Path(pieces_path).read_text(), vertices)
    else:
        pieces = (ConvexBody(vertices),)
    obj = ObjectModel(vertices, triangles, pieces)
    if scale != 1.0:
        obj = obj.scaled(scale)
    return obj
