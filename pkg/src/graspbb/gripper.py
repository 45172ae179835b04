"""Palm-fixed articulated gripper: model, forward kinematics, rotation grids.

The palm stays at the identity (the object moves instead), so each finger's
chain depends only on its own joint values and the fingers are decoupled.
Joints are hinges (1 DOF) or balls (3 DOFs as intrinsic XYZ angles); a DOF
whose limits coincide is locked and excluded from the free joint vector.

The rotation grid tabulates, per finger, the pose of every chain link at all
(N+1)^dof joint-limit lattice points; the conic IK builder interpolates it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .geometry import ConvexBody, RigidTransform, identity_transform, penetration, rodrigues_exp

__all__ = ["Joint", "Finger", "GripperModel", "RotationGrid", "load_gripper", "forward_kinematics", "precompute_rotation_grid"]

_BALL_AXES = (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))


class GripperConfigError(ValueError):
    """Raised when a gripper config fails validation; names the field."""


@dataclass(frozen=True)
class Joint:
    kind: str  # "hinge" | "ball"
    parent: int  # link id
    child: int  # link id
    offset: np.ndarray  # translation from parent frame to joint frame
    axis: np.ndarray | None  # hinge axis (unit), None for ball
    limits: np.ndarray  # (n_dof, 2), lo <= hi; lo == hi locks the DOF
    frame: np.ndarray | None = None  # ball axes as columns, in the parent frame

    @property
    def num_dofs(self) -> int:
        return self.limits.shape[0]

    @property
    def free_mask(self) -> np.ndarray:
        return self.limits[:, 0] < self.limits[:, 1]

    def rotation(self, dof_values: np.ndarray) -> np.ndarray:
        if self.kind == "hinge":
            return rodrigues_exp(self.axis * dof_values[0])
        # intrinsic XYZ angles about the joint frame's axes
        R = np.eye(3)
        for axis, val in zip(_BALL_AXES, dof_values):
            R = R @ rodrigues_exp(axis * val)
        if self.frame is not None:
            R = self.frame @ R @ self.frame.T
        return R


@dataclass(frozen=True)
class Finger:
    joints: tuple[Joint, ...]
    link_ids: tuple[int, ...]  # chain links, palm excluded, fingertip last
    tip_point: np.ndarray  # in fingertip-link local frame
    tip_normal: np.ndarray  # unit, fingertip-link local frame

    @property
    def num_free_dofs(self) -> int:
        return int(sum(j.free_mask.sum() for j in self.joints))


@dataclass(frozen=True)
class GripperModel:
    links: tuple[ConvexBody, ...]
    link_names: tuple[str, ...]
    palm: int
    fingers: tuple[Finger, ...]

    @property
    def num_links(self) -> int:
        return len(self.links)

    @property
    def num_fingers(self) -> int:
        return len(self.fingers)

    @property
    def fingertip_links(self) -> tuple[int, ...]:
        return tuple(f.link_ids[-1] for f in self.fingers)

    @property
    def intrinsic_dofs(self) -> int:
        return int(sum(f.num_free_dofs for f in self.fingers))

    @property
    def total_dofs(self) -> int:
        """|theta|: 6 extrinsic (carried by the object) + joint DOFs."""
        return 6 + self.intrinsic_dofs

    def split_theta(self, theta) -> list[np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.intrinsic_dofs,):
            raise ValueError(
                f"theta must have length {self.intrinsic_dofs}, got {theta.shape}"
            )
        out, k = [], 0
        for f in self.fingers:
            out.append(theta[k : k + f.num_free_dofs])
            k += f.num_free_dofs
        return out

    def finger_limits(self, i: int) -> np.ndarray:
        """(num_free_dofs, 2) limits of finger i's free DOFs, chain order."""
        rows = []
        for j in self.fingers[i].joints:
            rows.extend(j.limits[j.free_mask])
        return np.array(rows).reshape(-1, 2)

    def joint_limits(self) -> np.ndarray:
        return np.vstack([self.finger_limits(i) for i in range(self.num_fingers)])


def _finger_poses(model: GripperModel, i: int, free_values: np.ndarray) -> list[RigidTransform]:
    """Poses of finger i's chain links at the given free-DOF values."""
    finger = model.fingers[i]
    pose = identity_transform()
    poses = []
    k = 0
    for joint in finger.joints:
        dof = joint.limits[:, 0].copy()  # locked DOFs sit at their pinned value
        free = joint.free_mask
        nfree = int(free.sum())
        dof[free] = free_values[k : k + nfree]
        k += nfree
        pose = pose.compose(RigidTransform(joint.rotation(dof), joint.offset))
        poses.append(pose)
    return poses


def forward_kinematics(model: GripperModel, theta) -> list[RigidTransform]:
    """World pose of every link; the palm is pinned to the identity.

    theta concatenates the free DOFs of all fingers in order.  Values outside
    the joint limits raise.
    """
    per_finger = model.split_theta(theta)
    lims = model.joint_limits()
    flat = np.concatenate(per_finger) if len(lims) else np.empty(0)
    if len(lims) and ((flat < lims[:, 0] - 1e-12) | (flat > lims[:, 1] + 1e-12)).any():
        bad = int(np.argmax((flat < lims[:, 0] - 1e-12) | (flat > lims[:, 1] + 1e-12)))
        raise ValueError(f"theta[{bad}]={flat[bad]} outside joint limits {lims[bad]}")
    poses: list[RigidTransform | None] = [None] * model.num_links
    poses[model.palm] = identity_transform()
    for i, finger in enumerate(model.fingers):
        for link_id, pose in zip(finger.link_ids, _finger_poses(model, i, per_finger[i])):
            poses[link_id] = pose
    return poses


def fingertip_world(model: GripperModel, poses: list[RigidTransform], i: int):
    """World position and normal of fingertip i under the given link poses."""
    f = model.fingers[i]
    pose = poses[f.link_ids[-1]]
    return pose.apply(f.tip_point), pose.rotation @ f.tip_normal


@dataclass(frozen=True)
class RotationGrid:
    """Per-finger link poses tabulated on the joint-limit lattice."""

    cells: int  # N
    knots: tuple[tuple[np.ndarray, ...], ...]  # [finger][dof] -> (N+1,) values
    rotations: tuple[np.ndarray, ...]  # [finger] -> (chain_len, G, 3, 3)
    translations: tuple[np.ndarray, ...]  # [finger] -> (chain_len, G, 3)

    def num_entries(self, finger: int) -> int:
        return self.rotations[finger].shape[1]

    def grid_shape(self, finger: int) -> tuple[int, ...]:
        return tuple(len(k) for k in self.knots[finger])

    def theta_at(self, finger: int, multi_index) -> np.ndarray:
        return np.array(
            [k[d] for k, d in zip(self.knots[finger], multi_index)]
        )

    def flat_index(self, finger: int, multi_index) -> int:
        return int(np.ravel_multi_index(multi_index, self.grid_shape(finger)))


def precompute_rotation_grid(model: GripperModel, cells: int) -> RotationGrid:
    """Forward kinematics of every chain link on the (N+1)^dof joint lattice.

    Knot j of a DOF with limits [l, u] sits at l*(1 - j/N) + u*(j/N), so the
    lattice corners hit the limits exactly.
    """
    if cells < 1:
        raise ValueError("cells must be >= 1")
    N = cells
    knots_all, rots_all, trans_all = [], [], []
    for i, finger in enumerate(model.fingers):
        lims = model.finger_limits(i)
        knots = tuple(
            np.array([lo * (1.0 - d / N) + hi * (d / N) for d in range(N + 1)])
            for lo, hi in lims
        )
        shape = tuple(len(k) for k in knots)
        G = int(np.prod(shape)) if shape else 1
        chain = len(finger.link_ids)
        R = np.empty((chain, G, 3, 3))
        t = np.empty((chain, G, 3))
        for flat in range(G):
            multi = np.unravel_index(flat, shape) if shape else ()
            theta_i = np.array([k[d] for k, d in zip(knots, multi)])
            poses = _finger_poses(model, i, theta_i)
            for c, pose in enumerate(poses):
                R[c, flat] = pose.rotation
                t[c, flat] = pose.translation
        knots_all.append(knots)
        rots_all.append(R)
        trans_all.append(t)
    return RotationGrid(N, tuple(knots_all), tuple(rots_all), tuple(trans_all))


def _require(cond: bool, field_name: str, message: str):
    if not cond:
        raise GripperConfigError(f"{field_name}: {message}")


def load_gripper(source) -> GripperModel:
    """Build and validate a GripperModel from a YAML document.

    ``source`` is a path, a YAML string, or an already-parsed mapping.  See
    docs/gripper_format.md for the schema.  Links are reordered so that the
    fingertip links come first (fingertip i = link i).
    """
    if isinstance(source, (str, Path)) and Path(source).exists():
        doc = yaml.safe_load(Path(source).read_text())
    elif isinstance(source, str):
        doc = yaml.safe_load(source)
    else:
        doc = source
    _require(isinstance(doc, dict), "document", "must be a mapping")

    raw_links = doc.get("links")
    _require(isinstance(raw_links, list) and raw_links, "links", "must be a non-empty list")
    names, bodies = [], []
    for k, entry in enumerate(raw_links):
        name = entry.get("name")
        _require(isinstance(name, str) and name, f"links[{k}].name", "must be a string")
        _require(name not in names, f"links[{k}].name", f"duplicate link name {name!r}")
        verts = np.asarray(entry.get("vertices", []), dtype=float)
        _require(
            verts.ndim == 2 and verts.shape[1] == 3 and verts.shape[0] >= 1,
            f"links[{k}].vertices",
            "must be a non-empty list of 3-vectors",
        )
        names.append(name)
        bodies.append(ConvexBody(verts))
    link_id = {n: i for i, n in enumerate(names)}

    raw_tips = doc.get("fingertips")
    _require(isinstance(raw_tips, list) and raw_tips, "fingertips", "must be a non-empty list")
    _require(len(raw_tips) < len(names), "fingertips", "need K < L (more links than fingertips)")

    raw_joints = doc.get("joints")
    _require(isinstance(raw_joints, list) and raw_joints, "joints", "must be a non-empty list")
    joints = []
    for k, entry in enumerate(raw_joints):
        kind = entry.get("type")
        _require(kind in ("hinge", "ball"), f"joints[{k}].type", "must be 'hinge' or 'ball'")
        for key in ("parent", "child"):
            _require(entry.get(key) in link_id, f"joints[{k}].{key}", "unknown link name")
        offset = np.asarray(entry.get("offset", [0.0, 0.0, 0.0]), dtype=float)
        _require(offset.shape == (3,), f"joints[{k}].offset", "must be a 3-vector")
        lims = np.asarray(entry.get("limits"), dtype=float)
        frame = None
        if kind == "hinge":
            axis = np.asarray(entry.get("axis"), dtype=float)
            _require(axis.shape == (3,) and np.linalg.norm(axis) > 0, f"joints[{k}].axis", "must be a nonzero 3-vector")
            axis = axis / np.linalg.norm(axis)
            lims = lims.reshape(-1, 2)
            _require(lims.shape == (1, 2), f"joints[{k}].limits", "hinge needs one [lo, hi] pair")
        else:
            axis = None
            lims = lims.reshape(-1, 2)
            _require(lims.shape == (3, 2), f"joints[{k}].limits", "ball needs three [lo, hi] pairs")
            if entry.get("frame") is not None:
                fr = np.asarray(entry["frame"], dtype=float)
                _require(fr.shape == (3, 3), f"joints[{k}].frame", "must be three 3-vectors (the ball's X/Y/Z axes)")
                frame = fr.T  # rows in the file are axes; store as columns
                _require(
                    np.allclose(frame.T @ frame, np.eye(3), atol=1e-6)
                    and np.linalg.det(frame) > 0,
                    f"joints[{k}].frame",
                    "axes must be right-handed orthonormal",
                )
        _require((lims[:, 0] <= lims[:, 1]).all(), f"joints[{k}].limits", "lower bound exceeds upper bound")
        joints.append(
            Joint(kind, link_id[entry["parent"]], link_id[entry["child"]], offset, axis, lims, frame)
        )

    # topology: exactly one root (the palm); every other link is some joint's child once
    children = [j.child for j in joints]
    _require(len(set(children)) == len(children), "joints", "a link is the child of two joints")
    roots = [i for i in range(len(names)) if i not in children]
    _require(len(roots) == 1, "joints", f"need exactly one root link (palm), found {[names[r] for r in roots]}")
    palm = roots[0]

    by_parent: dict[int, list[Joint]] = {}
    for j in joints:
        by_parent.setdefault(j.parent, []).append(j)
    for parent, js in by_parent.items():
        if parent != palm:
            _require(len(js) == 1, "joints", f"link {names[parent]!r} branches; chains must be simple")

    fingers = []
    used_links: set[int] = set()
    for k, entry in enumerate(raw_tips):
        tip_name = entry.get("link")
        _require(tip_name in link_id, f"fingertips[{k}].link", "unknown link name")
        tip = link_id[tip_name]
        point = np.asarray(entry.get("point"), dtype=float)
        _require(point.shape == (3,), f"fingertips[{k}].point", "must be a 3-vector")
        normal = np.asarray(entry.get("normal"), dtype=float)
        _require(normal.shape == (3,), f"fingertips[{k}].normal", "must be a 3-vector")
        _require(
            abs(np.linalg.norm(normal) - 1.0) <= 1e-6,
            f"fingertips[{k}].normal",
            f"must be unit length (got |n| = {np.linalg.norm(normal):.6g})",
        )
        # walk from the fingertip up to the palm
        chain_joints: list[Joint] = []
        chain_links: list[int] = []
        cur = tip
        parent_of = {j.child: j for j in joints}
        while cur != palm:
            _require(cur in parent_of, f"fingertips[{k}].link", f"link {names[cur]!r} is not connected to the palm")
            j = parent_of[cur]
            chain_joints.append(j)
            chain_links.append(cur)
            cur = j.parent
        chain_joints.reverse()
        chain_links.reverse()
        for lid in chain_links:
            _require(lid not in used_links, f"fingertips[{k}]", f"link {names[lid]!r} shared between fingers; chains must be disjoint")
            used_links.add(lid)
        # fingertip point must belong to the fingertip link's hull
        probe = ConvexBody(point[None, :])
        res = penetration(probe, identity_transform(), bodies[tip], identity_transform())
        _require(
            res.distance <= 1e-9,
            f"fingertips[{k}].point",
            "must lie inside the fingertip link's convex hull",
        )
        fingers.append(
            Finger(tuple(chain_joints), tuple(chain_links), point, normal / np.linalg.norm(normal))
        )

    # every non-palm link must belong to exactly one finger chain
    orphan = [names[i] for i in range(len(names)) if i != palm and i not in used_links]
    _require(not orphan, "links", f"links not on any finger chain: {orphan}")

    # reorder links so fingertip i = link i, palm and intermediates after
    order = [f.link_ids[-1] for f in fingers]
    order += [i for i in range(len(names)) if i not in order]
    remap = {old: new for new, old in enumerate(order)}
    bodies2 = tuple(bodies[old] for old in order)
    names2 = tuple(names[old] for old in order)
    fingers2 = tuple(
        Finger(
            tuple(
                Joint(j.kind, remap[j.parent], remap[j.child], j.offset, j.axis, j.limits, j.frame)
                for j in f.joints
            ),
            tuple(remap[l] for l in f.link_ids),
            f.tip_point,
            f.tip_normal,
        )
        for f in fingers
    )
    return GripperModel(bodies2, names2, remap[palm], fingers2)
