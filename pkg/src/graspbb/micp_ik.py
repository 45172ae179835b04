"""Conic IK feasibility program for a gripper with the palm pinned.

Per finger, the link rotations and translations are convex combinations of
the precomputed joint-lattice poses, with one log-SOS2 group per joint DOF
over the lattice marginals, so the combination lives in a single lattice
cell.  The object moves instead of the palm: its rotation interpolates a
Rodrigues lattice over [-pi, pi]^3 the same way.  Fingertip placement,
bounding-sphere and normal-cone relaxations, and lazily discovered big-M
separating-plane constraints are all linear or second-order-cone rows on
top of that base.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conic_model import ConicProgram
from .geometry import RigidTransform, inflate_cone_eps, rodrigues_exp
from .gripper import GripperModel, RotationGrid
from .pointset import KdNode

__all__ = [
    "IkProblemConfig",
    "IkVariables",
    "fibonacci_directions",
    "build_base",
    "add_fingertip_at_point",
    "add_point_in_sphere",
    "add_normal_constraint",
    "add_collision_constraint",
]


def fibonacci_directions(count: int) -> np.ndarray:
    """Deterministic, well-spread unit separating directions."""
    if count < 2:
        raise ValueError("need at least 2 separating directions")
    i = np.arange(count)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    z = 1.0 - 2.0 * (i + 0.5) / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


@dataclass(frozen=True)
class IkProblemConfig:
    cells: int  # N, lattice cells per joint DOF and per rotation axis
    normal_eps: float = 0.05  # user threshold on fingertip/surface normals
    directions: np.ndarray = None  # (S, 3) unit separating directions
    object_radius: float = 1.0  # bounding radius of the object about its origin
    big_m: float = None  # override; sized from the workspace when None

    def __post_init__(self):
        if self.cells < 1:
            raise ValueError("cells must be >= 1")
        if not 0.0 <= self.normal_eps <= 4.0:
            raise ValueError("normal_eps must be in [0, 4]")
        dirs = self.directions if self.directions is not None else fibonacci_directions(64)
        dirs = np.asarray(dirs, dtype=float)
        if (np.abs(np.linalg.norm(dirs, axis=1) - 1.0) > 1e-9).any():
            raise ValueError("separating directions must be unit length")
        if len(np.unique(dirs.round(12), axis=0)) != len(dirs):
            raise ValueError("separating directions must be pairwise distinct")
        object.__setattr__(self, "directions", dirs)

    @property
    def num_directions(self) -> int:
        return len(self.directions)


@dataclass
class IkVariables:
    """Variable ids of the base IK program plus workspace sizing."""

    model: GripperModel
    grid: RotationGrid
    link_R: list[list[int]]  # per link, 9 ids row-major
    link_t: list[list[int]]
    obj_R: list[int]
    obj_t: list[int]
    lam: list[list[int]]  # per finger
    beta: list[int]
    gamma: dict[tuple, list[int]] = field(default_factory=dict)
    reach_radius: float = 0.0
    t_halfwidth: float = 0.0
    workspace_diameter: float = 0.0

    def link_pose(self, x: np.ndarray, link: int) -> RigidTransform:
        R = np.array([x[j] for j in self.link_R[link]]).reshape(3, 3)
        t = np.array([x[j] for j in self.link_t[link]])
        return RigidTransform(R, t)

    def object_pose(self, x: np.ndarray) -> RigidTransform:
        R = np.array([x[j] for j in self.obj_R]).reshape(3, 3)
        t = np.array([x[j] for j in self.obj_t])
        return RigidTransform(R, t)

    def extract_theta(self, x: np.ndarray) -> np.ndarray:
        """Joint vector from the lattice-marginal expectation of lambda.

        Inside one cell the marginals are barycentric, so the expectation
        lies in that cell (restriction C4 by construction).
        """
        out = []
        for i, ids in enumerate(self.lam):
            vals = np.array([x[j] for j in ids])
            vals = np.maximum(vals, 0.0).reshape(self.grid.grid_shape(i))
            total = max(vals.sum(), 1e-300)
            for axis, knots in enumerate(self.grid.knots[i]):
                marg = vals.sum(axis=tuple(a for a in range(vals.ndim) if a != axis))
                out.append(float((marg / total) @ knots))
        lims = self.model.joint_limits()
        return np.clip(np.array(out), lims[:, 0], lims[:, 1])

    def extract_object_w(self, x: np.ndarray) -> np.ndarray:
        vals = np.array([x[j] for j in self.beta])
        n1 = round(len(vals) ** (1 / 3))
        vals = np.maximum(vals, 0.0).reshape((n1, n1, n1))
        total = max(vals.sum(), 1e-300)
        knots = np.linspace(-np.pi, np.pi, n1)
        w = []
        for axis in range(3):
            marg = vals.sum(axis=tuple(a for a in range(3) if a != axis))
            w.append(float((marg / total) @ knots))
        return np.array(w)


def _marginal_sos2(prog: ConicProgram, name: str, lam_ids, shape):
    """Axis-marginal variables over a lattice plus one SOS2 group per axis."""
    lam_arr = np.asarray(lam_ids).reshape(shape)
    for axis in range(len(shape)):
        knots = shape[axis]
        margs = prog.add_vars(f"{name}_marg{axis}", knots, lower=0.0, upper=1.0)
        other = tuple(a for a in range(len(shape)) if a != axis)
        for v in range(knots):
            members = np.moveaxis(lam_arr, axis, 0)[v].ravel()
            idx = np.append(members, margs[v])
            coef = np.append(np.ones(len(members)), -1.0)
            prog.add_linear(idx, coef, 0.0, "==")
        prog.add_sos2_log(margs)


def build_base(model: GripperModel, grid: RotationGrid, cfg: IkProblemConfig):
    """The shared IK base: lattice-interpolated link poses and object pose.

    Binary count is exactly (|theta| - 3) * ceil(log2(N)).
    """
    if grid.cells != cfg.cells:
        raise ValueError(f"grid built with N={grid.cells}, config wants N={cfg.cells}")
    N = cfg.cells
    prog = ConicProgram()

    # workspace sizing: everything reachable stays inside one ball
    reach = 0.0
    for i, finger in enumerate(model.fingers):
        for c, link in enumerate(finger.link_ids):
            verts = model.links[link].vertices
            for g in range(grid.num_entries(i)):
                R, t = grid.rotations[i][c, g], grid.translations[i][c, g]
                reach = max(reach, float(np.linalg.norm(verts @ R.T + t, axis=1).max()))
    reach = max(reach, float(np.linalg.norm(model.links[model.palm].vertices, axis=1).max()))
    t_halfwidth = reach + cfg.object_radius
    workspace_diameter = 2.0 * (t_halfwidth + cfg.object_radius)

    link_R: list[list[int]] = [None] * model.num_links
    link_t: list[list[int]] = [None] * model.num_links
    lam_ids = []

    for i, finger in enumerate(model.fingers):
        shape = grid.grid_shape(i)
        G = grid.num_entries(i)
        lam = prog.add_vars(f"lam{i}", G, lower=0.0, upper=1.0)
        lam_ids.append(lam)
        prog.add_linear(lam, np.ones(G), 1.0, "==")
        if shape:
            _marginal_sos2(prog, f"lam{i}", lam, shape)
        for c, link in enumerate(finger.link_ids):
            Rv = prog.add_vars(f"R{link}", 9, lower=-1.0, upper=1.0)
            tv = prog.add_vars(f"t{link}", 3, lower=-t_halfwidth, upper=t_halfwidth)
            link_R[link], link_t[link] = Rv, tv
            for entry in range(9):
                r, cc = divmod(entry, 3)
                coefs = grid.rotations[i][c, :, r, cc]
                prog.add_linear(
                    np.append(lam, Rv[entry]),
                    np.append(coefs, -1.0),
                    0.0,
                    "==",
                )
            for entry in range(3):
                coefs = grid.translations[i][c, :, entry]
                prog.add_linear(
                    np.append(lam, tv[entry]),
                    np.append(coefs, -1.0),
                    0.0,
                    "==",
                )

    # palm pinned to the identity
    Rv = prog.add_vars("R_palm", 9, lower=-1.0, upper=1.0)
    tv = prog.add_vars("t_palm", 3, lower=-t_halfwidth, upper=t_halfwidth)
    link_R[model.palm], link_t[model.palm] = Rv, tv
    eye = np.eye(3).ravel()
    for entry in range(9):
        prog.add_linear([Rv[entry]], [1.0], float(eye[entry]), "==")
    for entry in range(3):
        prog.add_linear([tv[entry]], [1.0], 0.0, "==")

    # object rotation: Rodrigues lattice over [-pi, pi]^3
    knots = np.linspace(-np.pi, np.pi, N + 1)
    Gobj = (N + 1) ** 3
    beta = prog.add_vars("beta", Gobj, lower=0.0, upper=1.0)
    prog.add_linear(beta, np.ones(Gobj), 1.0, "==")
    _marginal_sos2(prog, "beta", beta, (N + 1, N + 1, N + 1))
    rot_table = np.empty((Gobj, 3, 3))
    for flat in range(Gobj):
        d = np.unravel_index(flat, (N + 1, N + 1, N + 1))
        rot_table[flat] = rodrigues_exp([knots[d[0]], knots[d[1]], knots[d[2]]])
    obj_R = prog.add_vars("R_obj", 9, lower=-1.0, upper=1.0)
    obj_t = prog.add_vars("t_obj", 3, lower=-t_halfwidth, upper=t_halfwidth)
    for entry in range(9):
        r, cc = divmod(entry, 3)
        prog.add_linear(
            np.append(beta, obj_R[entry]),
            np.append(rot_table[:, r, cc], -1.0),
            0.0,
            "==",
        )

    ik_vars = IkVariables(
        model=model,
        grid=grid,
        link_R=link_R,
        link_t=link_t,
        obj_R=obj_R,
        obj_t=obj_t,
        lam=lam_ids,
        beta=beta,
        reach_radius=reach,
        t_halfwidth=t_halfwidth,
        workspace_diameter=workspace_diameter,
    )
    return prog, ik_vars


def _tip_minus_object_rows(ik_vars: IkVariables, finger: int, object_point):
    """Sparse rows of (R_i x_i + t_i) - (R p + t) per world component."""
    model = ik_vars.model
    f = model.fingers[finger]
    tip = f.link_ids[-1]
    x_i = f.tip_point
    p = np.asarray(object_point, dtype=float)
    rows_idx, rows_coef = [], []
    for r in range(3):
        idx = []
        coef = []
        for c in range(3):
            idx.append(ik_vars.link_R[tip][3 * r + c])
            coef.append(x_i[c])
            idx.append(ik_vars.obj_R[3 * r + c])
            coef.append(-p[c])
        idx.append(ik_vars.link_t[tip][r])
        coef.append(1.0)
        idx.append(ik_vars.obj_t[r])
        coef.append(-1.0)
        rows_idx.append(np.array(idx))
        rows_coef.append(np.array(coef))
    return rows_idx, rows_coef


def add_fingertip_at_point(prog: ConicProgram, ik_vars: IkVariables, finger: int, point):
    """Pin fingertip ``finger`` onto the transformed object point (3 equalities)."""
    rows_idx, rows_coef = _tip_minus_object_rows(ik_vars, finger, point)
    for idx, coef in zip(rows_idx, rows_coef):
        prog.add_linear(idx, coef, 0.0, "==")


def add_point_in_sphere(prog: ConicProgram, ik_vars: IkVariables, finger: int, node: KdNode):
    """Relax fingertip-in-point-set to the node's transformed bounding sphere."""
    rows_idx, rows_coef = _tip_minus_object_rows(ik_vars, finger, node.sphere.center)
    prog.add_soc(rows_idx, rows_coef, np.zeros(3), node.sphere.sq_radius)


def _normal_rows(ik_vars: IkVariables, finger: int, object_dir):
    model = ik_vars.model
    f = model.fingers[finger]
    tip = f.link_ids[-1]
    n_i = f.tip_normal
    nd = np.asarray(object_dir, dtype=float)
    rows_idx, rows_coef = [], []
    for r in range(3):
        idx, coef = [], []
        for c in range(3):
            idx.append(ik_vars.link_R[tip][3 * r + c])
            coef.append(n_i[c])
            idx.append(ik_vars.obj_R[3 * r + c])
            coef.append(-nd[c])
        rows_idx.append(np.array(idx))
        rows_coef.append(np.array(coef))
    return rows_idx, rows_coef


def add_normal_constraint(
    prog: ConicProgram,
    ik_vars: IkVariables,
    finger: int,
    cfg: IkProblemConfig,
    point_normal=None,
    node: KdNode | None = None,
):
    """Fingertip normal within a cone of the surface normal (one SOC row).

    Leaf form: target is the point's inward normal and the user threshold.
    Internal form: target is the node's cone axis with the cap widened by
    the user threshold in angle space.
    """
    if (point_normal is None) == (node is None):
        raise ValueError("pass exactly one of point_normal or node")
    if point_normal is not None:
        target, eps = point_normal, cfg.normal_eps
    else:
        target = node.cone.axis
        eps = inflate_cone_eps(node.cone.sq_radius, cfg.normal_eps)
    rows_idx, rows_coef = _normal_rows(ik_vars, finger, target)
    prog.add_soc(rows_idx, rows_coef, np.zeros(3), eps)


def big_m_value(ik_vars: IkVariables, cfg: IkProblemConfig, depth: float) -> float:
    if cfg.big_m is not None:
        return cfg.big_m
    return 2.0 * ik_vars.workspace_diameter + depth


def add_collision_constraint(
    prog: ConicProgram,
    ik_vars: IkVariables,
    cfg: IkProblemConfig,
    pair: tuple,
    witness_a,
    witness_b,
    depth: float,
):
    """Separating-plane rows for one penetrating pair.

    ``pair`` is ("object", piece_index, link) with the witness a on the
    object piece (local frame) and b on the link, or ("link", j, i) with a
    on link j and b on link i.  The first call for a pair creates its
    direction selectors (one SOS1 with ceil(log2 S) binaries); repeats add
    only the S big-M inequalities for the new witnesses.  Fingertip-link /
    object pairs are exempt by contract and rejected.
    """
    if depth <= 0:
        raise ValueError("collision constraints need a positive depth")
    kind = pair[0]
    if kind == "object":
        _, piece, link = pair
        if link in ik_vars.model.fingertip_links:
            raise ValueError(
                f"fingertip link {link} vs object is exempt from collision handling"
            )
        Ra, ta = ik_vars.obj_R, ik_vars.obj_t
    elif kind == "link":
        _, j, link = pair
        Ra, ta = ik_vars.link_R[j], ik_vars.link_t[j]
    else:
        raise ValueError(f"unknown pair kind {kind!r}")
    Rb, tb = ik_vars.link_R[link], ik_vars.link_t[link]

    key = tuple(pair)
    M = big_m_value(ik_vars, cfg, depth)
    if key not in ik_vars.gamma:
        gammas = prog.add_vars(f"gamma{len(ik_vars.gamma)}", cfg.num_directions, lower=0.0, upper=1.0)
        prog.add_sos1_log(gammas)
        ik_vars.gamma[key] = gammas
    gammas = ik_vars.gamma[key]

    a = np.asarray(witness_a, dtype=float)
    b = np.asarray(witness_b, dtype=float)
    for k, s in enumerate(cfg.directions):
        idx, coef = [], []
        for r in range(3):
            for c in range(3):
                idx.append(Ra[3 * r + c])
                coef.append(s[r] * a[c])
                idx.append(Rb[3 * r + c])
                coef.append(-s[r] * b[c])
            idx.append(ta[r])
            coef.append(s[r])
            idx.append(tb[r])
            coef.append(-s[r])
        idx.append(gammas[k])
        coef.append(M)
        prog.add_linear(np.array(idx), np.array(coef), M - depth, "<=")


def corner_substitution(
    prog: ConicProgram,
    ik_vars: IkVariables,
    corner_multi_indices,
    w,
    t,
) -> np.ndarray:
    """Variable vector for an exact lattice-corner pose (for feasibility checks).

    corner_multi_indices: per finger, the lattice multi-index; ``w`` must be
    a lattice point of the rotation grid (its exp is used exactly).
    """
    grid = ik_vars.grid
    N = grid.cells
    x = np.zeros(prog.num_vars)
    for i, multi in enumerate(corner_multi_indices):
        x[ik_vars.lam[i][grid.flat_index(i, multi)]] = 1.0
    knots = np.linspace(-np.pi, np.pi, N + 1)
    w = np.asarray(w, dtype=float)
    d = []
    for axis in range(3):
        j = int(np.argmin(np.abs(knots - w[axis])))
        if abs(knots[j] - w[axis]) > 1e-9:
            raise ValueError("w must be a rotation-lattice point")
        d.append(j)
    flat_obj = int(np.ravel_multi_index(d, (N + 1, N + 1, N + 1)))
    x[ik_vars.beta[flat_obj]] = 1.0

    # propagate: every defining equality row has exactly one -1 entry on the
    # defined variable; solve rows in order
    for lc in prog.linear:
        if lc.sense != "==":
            continue
        if len(lc.indices) >= 2 and lc.coefficients[-1] == -1.0:
            target = lc.indices[-1]
            val = lc.coefficients[:-1] @ x[lc.indices[:-1]] - lc.rhs
            x[target] = val
    # palm identity rows have a single +1 coefficient
    for lc in prog.linear:
        if lc.sense == "==" and len(lc.indices) == 1 and lc.coefficients[0] == 1.0:
            x[lc.indices[0]] = lc.rhs
    for entry in range(3):
        x[ik_vars.obj_t[entry]] = t[entry]
    # SOS binaries consistent with the chosen cells
    for group in prog.sos_groups:
        vals = x[group.members]
        if group.kind == 2:
            support = np.nonzero(vals > 1e-12)[0]
            cell = int(support.min()) if len(support) else 0
            cell = min(cell, len(group.codes) - 1)
            code = int(group.codes[cell])
        else:
            k = int(np.argmax(vals))
            code = int(group.codes[k])
        for b, y in enumerate(group.binaries):
            x[y] = (code >> b) & 1
    return x
