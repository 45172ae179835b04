"""Local nonlinear IK refinement used to short-circuit MICP solves.

Runs a projected Levenberg-Marquardt on the exact nonlinear residuals
(fingertip placement, sphere membership, normal cones) over the joint
vector, the object's rotation vector, and its translation.  A result is
reported Feasible only when the residual is tiny AND the lattice cell the
solution falls into is verified conic-feasible by a pinned-binary
relaxation solve, so a Feasible answer always implies MICP feasibility;
everything else is Unknown.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import rodrigues_exp
from ..gripper import GripperModel, forward_kinematics, fingertip_world
from ..micp_ik import IkProblemConfig, IkVariables
from .socp import WarmStart, solve_relaxation

__all__ = ["RefineResult", "local_ik_refine"]

RESIDUAL_TOL = 1e-6


@dataclass
class RefineResult:
    status: str  # "feasible" | "unknown"
    theta: np.ndarray | None = None
    object_w: np.ndarray | None = None
    object_t: np.ndarray | None = None
    point: np.ndarray | None = None  # verified conic program point
    residual: float = np.inf

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def _residuals(model, assignments, cfg, q, n_theta):
    theta = q[:n_theta]
    w = q[n_theta : n_theta + 3]
    t = q[n_theta + 3 :]
    poses = forward_kinematics(model, theta)
    R = rodrigues_exp(w)
    out = []
    for i, spec in enumerate(assignments):
        tip, n_tip = fingertip_world(model, poses, i)
        if spec["kind"] == "point":
            out.extend(tip - (R @ spec["position"] + t))
            gap = np.linalg.norm(n_tip - R @ spec["normal"])
            out.append(max(0.0, gap - np.sqrt(cfg.normal_eps)))
        else:
            for center, sq_radius in spec["spheres"]:
                gap = np.linalg.norm(tip - (R @ center + t))
                out.append(max(0.0, gap - np.sqrt(sq_radius)))
            for axis, sq_eps in spec["cones"]:
                gap = np.linalg.norm(n_tip - R @ axis)
                out.append(max(0.0, gap - np.sqrt(sq_eps)))
    return np.array(out)


def _cell_of(value, knots):
    """Lattice cell index containing ``value`` (clamped to valid cells)."""
    cell = int(np.searchsorted(knots, value, side="right") - 1)
    return int(np.clip(cell, 0, len(knots) - 2))


def _binaries_for_cells(prog, ik_vars, grid, theta, w):
    """Pin every SOS selector to the lattice cell containing (theta, w).

    Collision-direction SOS1 groups stay free (they are decided by the
    verification solve).
    """
    fixed: dict[int, int] = {}
    per_finger = ik_vars.model.split_theta(theta)
    sos2_groups = [g for g in prog.sos_groups if g.kind == 2]
    gi = 0
    for i in range(ik_vars.model.num_fingers):
        for axis, knots in enumerate(grid.knots[i]):
            cell = _cell_of(per_finger[i][axis], knots)
            code = int(sos2_groups[gi].codes[cell])
            for b, y in enumerate(sos2_groups[gi].binaries):
                fixed[int(y)] = (code >> b) & 1
            gi += 1
    wknots = np.linspace(-np.pi, np.pi, grid.cells + 1)
    for axis in range(3):
        cell = _cell_of(w[axis], wknots)
        code = int(sos2_groups[gi].codes[cell])
        for b, y in enumerate(sos2_groups[gi].binaries):
            fixed[int(y)] = (code >> b) & 1
        gi += 1
    return fixed


def local_ik_refine(
    model: GripperModel,
    grid,
    assignments,
    cfg: IkProblemConfig,
    prog,
    ik_vars: IkVariables,
    initial_theta=None,
    initial_w=None,
    initial_t=None,
    max_iterations: int = 100,
) -> RefineResult:
    """Projected LM on the exact nonlinear constraints, then verify.

    ``assignments`` has one entry per finger: {"kind": "point", "position",
    "normal"} for a pinned grasp point, or {"kind": "region", "spheres":
    [(center, sq_radius), ...], "cones": [(axis, sq_eps), ...]} for a
    KD-node region.  Soundness: Feasible is returned only if the pinned-cell
    relaxation solve confirms a conic-feasible point.
    """
    n_theta = model.intrinsic_dofs
    lims = model.joint_limits()
    lo = np.concatenate([lims[:, 0], -np.pi * np.ones(3), -ik_vars.t_halfwidth * np.ones(3)])
    hi = np.concatenate([lims[:, 1], np.pi * np.ones(3), ik_vars.t_halfwidth * np.ones(3)])

    q = np.concatenate(
        [
            np.asarray(initial_theta, dtype=float) if initial_theta is not None else lims.mean(axis=1),
            np.asarray(initial_w, dtype=float) if initial_w is not None else np.zeros(3),
            np.asarray(initial_t, dtype=float) if initial_t is not None else np.zeros(3),
        ]
    )
    q = np.clip(q, lo, hi)

    def F(qv):
        return _residuals(model, assignments, cfg, qv, n_theta)

    r = F(q)
    damping = 1e-4
    for _ in range(max_iterations):
        worst = float(np.abs(r).max(initial=0.0))
        if worst <= RESIDUAL_TOL * 0.1:
            break
        # forward-difference Jacobian; the residual dimension is tiny
        J = np.empty((len(r), len(q)))
        hstep = 1e-7
        for j in range(len(q)):
            qj = q.copy()
            qj[j] = min(qj[j] + hstep, hi[j])
            dq = qj[j] - q[j]
            if dq == 0.0:
                qj[j] = max(q[j] - hstep, lo[j])
                dq = qj[j] - q[j]
            J[:, j] = (F(qj) - r) / dq if dq != 0.0 else 0.0
        JtJ = J.T @ J
        step = np.linalg.solve(JtJ + damping * np.eye(len(q)), -J.T @ r)
        q_new = np.clip(q + step, lo, hi)
        r_new = F(q_new)
        if np.abs(r_new).max(initial=0.0) < worst:
            q, r = q_new, r_new
            damping = max(damping * 0.3, 1e-10)
        else:
            damping *= 10.0
            if damping > 1e8:
                break

    residual = float(np.abs(r).max(initial=0.0))
    if residual > RESIDUAL_TOL:
        return RefineResult("unknown", residual=residual)

    theta = q[:n_theta]
    w = q[n_theta : n_theta + 3]
    t = q[n_theta + 3 :]
    fixed = _binaries_for_cells(prog, ik_vars, grid, theta, w)
    if set(fixed) != set(prog.binary_indices()):
        # collision selectors present: leave them to a small MICP over the
        # remaining bits, still sound (feasible means conic-feasible)
        from .micp import solve_micp

        sub = prog.copy()
        for i, v in fixed.items():
            sub.add_linear([i], [1.0], float(v), "==")
        res = solve_micp(sub)
        if res.feasible:
            return RefineResult("feasible", theta, w, t, res.x, residual)
        return RefineResult("unknown", residual=residual)
    confirm = solve_relaxation(prog, None, fixed)
    if confirm.feasible:
        return RefineResult("feasible", theta, w, t, confirm.x, residual)
    return RefineResult("unknown", residual=residual)
