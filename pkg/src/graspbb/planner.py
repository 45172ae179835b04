"""Two-level branch-and-bound grasp planner.

High level: best-first search over tuples of KD-tree nodes (one per
finger), bounded by the monotone grasp metric of the union of candidate
points.  Low level: the conic IK feasibility check with lazily added
collision constraints, run bottom-up along the search tree so one feasible
check clears a whole ancestor chain and one infeasible ancestor prunes its
subtree for free.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bnb_solver import WarmStart, local_ik_refine, solve_micp
from .geometry import identity_transform, penetration, rodrigues_exp
from .gripper import GripperModel, fingertip_world, forward_kinematics, precompute_rotation_grid
from .meshio import ObjectModel
from .metric import ContactModel, default_contact_model, q1, q1_upper
from .micp_ik import (
    IkProblemConfig,
    add_collision_constraint,
    add_fingertip_at_point,
    add_normal_constraint,
    add_point_in_sphere,
    build_base,
    fibonacci_directions,
)
from .pointset import build_kdtree, sample_surface

__all__ = ["PlannerConfig", "BBNode", "GraspSolution", "PlanResult", "plan", "Planner"]

UNKNOWN, TRUE, FALSE, UNRESOLVED = "unknown", "true", "false", "unresolved"


@dataclass
class PlannerConfig:
    points: int = 100  # P surface samples
    cells: int = 8  # N lattice cells per DOF
    sep_directions: int = 64  # S
    normal_eps: float = 0.05
    friction_mu: float = 0.5
    cone_edges: int = 8
    seed: int = 0
    q_stop: float | None = None  # early stop once Q_best reaches this
    node_budget: int = 1_000_000
    micp_node_budget: int = 20_000
    collision_rounds: int = 50
    store_all: bool = False
    use_local_refine: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.points < 1:
            raise ValueError("points must be >= 1")
        if self.cells < 1:
            raise ValueError("cells must be >= 1")
        if self.sep_directions < 2:
            raise ValueError("sep_directions must be >= 2")
        if not 0.0 <= self.normal_eps <= 4.0:
            raise ValueError("normal_eps must be in [0, 4]")
        if self.friction_mu <= 0:
            raise ValueError("friction_mu must be positive")
        if self.cone_edges < 3:
            raise ValueError("cone_edges must be >= 3")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class BBNode:
    kd_ids: tuple[int, ...]
    parent: int | None = None
    low_level: str = UNKNOWN
    q_upper: float | None = None
    warm: np.ndarray | None = None  # cached conic point for child warm starts


@dataclass
class GraspSolution:
    assignment: tuple[int, ...]  # grasp-point index per finger
    quality: float
    theta: np.ndarray
    object_w: np.ndarray
    object_t: np.ndarray
    link_poses: list  # [(R, t)] per link, certified by the low-level check
    exact: bool  # True: poses are exact FK of theta (refined); False: relaxed
    max_residual: float  # fingertip placement residual at the stored poses
    max_penetration: float
    unresolved: bool = False  # collision loop hit its round cap


@dataclass
class HistoryRow:
    nodes: int
    q_best: float
    wall_ms: float
    micp_solves: int
    nodes_cut: int


@dataclass
class PlanResult:
    status: str  # "optimal" | "infeasible" | "incomplete" | "early_stop"
    solution: GraspSolution | None
    all_solutions: list[GraspSolution]
    history: list[HistoryRow]
    stats: dict

    @property
    def q_best(self) -> float:
        return self.solution.quality if self.solution else float("-inf")


class Planner:
    """Holds the precomputation (Algorithm 1) and runs the search."""

    def __init__(self, obj: ObjectModel, gripper: GripperModel, cfg: PlannerConfig):
        self.object = obj
        self.gripper = gripper
        self.cfg = cfg
        self.points = sample_surface(obj.vertices, obj.triangles, cfg.points, cfg.seed)
        self.tree = build_kdtree(self.points)
        self.contact = default_contact_model(
            self.points.positions, cfg.friction_mu, cfg.cone_edges
        )
        self.grid = precompute_rotation_grid(gripper, cfg.cells)
        radius = max(
            obj.radius, float(np.linalg.norm(self.points.positions, axis=1).max())
        )
        self.ik_cfg = IkProblemConfig(
            cells=cfg.cells,
            normal_eps=cfg.normal_eps,
            directions=fibonacci_directions(cfg.sep_directions),
            object_radius=radius,
        )
        self.base_prog, self.base_vars = build_base(gripper, self.grid, self.ik_cfg)
        from .geometry import min_bounding_sphere

        obj_sphere = min_bounding_sphere(obj.vertices)
        self.collision_tol = 1e-4 * float(np.sqrt(obj_sphere.sq_radius))
        # non-exempt collision pairs: object pieces vs non-fingertip links,
        # plus all link-link pairs
        tips = set(gripper.fingertip_links)
        self.obj_pairs = [
            (pi, l)
            for pi in range(len(obj.pieces))
            for l in range(gripper.num_links)
            if l not in tips
        ]
        self.link_pairs = [
            (a, b)
            for a in range(gripper.num_links)
            for b in range(gripper.num_links)
            if a < b
        ]
        # counters (deterministic work bookkeeping)
        self.micp_solves = 0
        self.ipm_iterations = 0
        self.penetration_queries = 0
        self.refine_hits = 0
        self.unresolved_nodes = 0

    # ----- low level -----

    def _leaf_assignment(self, node: BBNode):
        return tuple(
            int(self.tree.node(k).point_indices[0]) for k in node.kd_ids
        )

    def _build_node_program(self, node: BBNode):
        """Base + per-finger placement/normal rows; also the nonlinear specs."""
        prog = self.base_prog.copy()
        ik_vars = self.base_vars
        from dataclasses import replace

        ik_vars = replace(ik_vars, gamma={})
        assignments = []
        for i, kd_id in enumerate(node.kd_ids):
            kd = self.tree.node(kd_id)
            if kd.is_leaf:
                p_idx = int(kd.point_indices[0])
                pos = self.points.positions[p_idx]
                nrm = self.points.normals[p_idx]
                add_fingertip_at_point(prog, ik_vars, i, pos)
                add_normal_constraint(prog, ik_vars, i, self.ik_cfg, point_normal=nrm)
                assignments.append({"kind": "point", "position": pos, "normal": nrm})
            else:
                spheres, cones = [], []
                from .geometry import inflate_cone_eps

                for nid in self.tree.path_to_root(kd_id):
                    path_node = self.tree.node(nid)
                    add_point_in_sphere(prog, ik_vars, i, path_node)
                    add_normal_constraint(prog, ik_vars, i, self.ik_cfg, node=path_node)
                    spheres.append((path_node.sphere.center, path_node.sphere.sq_radius))
                    cones.append(
                        (
                            path_node.cone.axis,
                            inflate_cone_eps(path_node.cone.sq_radius, self.cfg.normal_eps),
                        )
                    )
                assignments.append({"kind": "region", "spheres": spheres, "cones": cones})
        return prog, ik_vars, assignments

    def _detect_worst_penetration(self, ik_vars, x, record):
        """Deepest non-exempt penetration at the program point x."""
        obj_pose = ik_vars.object_pose(x)
        poses = [ik_vars.link_pose(x, l) for l in range(self.gripper.num_links)]
        worst = (0.0, None, None, None)  # depth, pair, witness_a, witness_b
        for pi, l in self.obj_pairs:
            res = penetration(self.object.pieces[pi], obj_pose, self.gripper.links[l], poses[l])
            record.penetration_queries += 1
            if res.depth > worst[0]:
                worst = (res.depth, ("object", pi, l), res.witness_a, res.witness_b)
        for a, b in self.link_pairs:
            res = penetration(self.gripper.links[a], poses[a], self.gripper.links[b], poses[b])
            record.penetration_queries += 1
            if res.depth > worst[0]:
                worst = (res.depth, ("link", a, b), res.witness_a, res.witness_b)
        return worst

    def low_level_feasible(self, node: BBNode, warm: np.ndarray | None = None, counters=None):
        """Feasibility of one BBNode: conic solve + lazy collision loop.

        Returns (status, point) with status true/false/unresolved.
        """
        prog, ik_vars, assignments = self._build_node_program(node)
        record = counters if counters is not None else self
        point = None
        for _ in range(self.cfg.collision_rounds):
            found = None
            if self.cfg.use_local_refine:
                seed_theta = seed_w = seed_t = None
                if point is not None:
                    seed_theta = ik_vars.extract_theta(point)
                    seed_w = ik_vars.extract_object_w(point)
                    seed_t = np.array([point[j] for j in ik_vars.obj_t])
                ref = local_ik_refine(
                    self.gripper,
                    self.grid,
                    assignments,
                    self.ik_cfg,
                    prog,
                    ik_vars,
                    initial_theta=seed_theta,
                    initial_w=seed_w,
                    initial_t=seed_t,
                )
                if ref.feasible:
                    found = ref.point
                    record.refine_hits += 1
            if found is None:
                start = None
                if point is not None:
                    padded = np.full(prog.num_vars, 0.5)
                    padded[: len(point)] = point
                    start = WarmStart(padded)
                elif warm is not None:
                    padded = np.full(prog.num_vars, 0.5)
                    padded[: min(len(warm), prog.num_vars)] = warm[: prog.num_vars]
                    start = WarmStart(padded)
                res = solve_micp(prog, start, node_budget=self.cfg.micp_node_budget)
                record.micp_solves += 1
                record.ipm_iterations += res.ipm_iterations
                if res.status == "infeasible":
                    return FALSE, None
                if res.status == "budget_exceeded":
                    return UNRESOLVED, point
                found = res.x
            point = found
            depth, pair, wa, wb = self._detect_worst_penetration(ik_vars, point, record)
            if depth <= self.collision_tol:
                return TRUE, point
            add_collision_constraint(prog, ik_vars, self.ik_cfg, pair, wa, wb, depth)
        return UNRESOLVED, point

    # ----- bottom-up kinematics check (Lemma 1) -----

    def bottom_up_check(self, node_id: int, nodes: dict, counters=None, snapshot=None):
        """Resolve low-level statuses from a leaf toward the root.

        An already-False ancestor marks the leaf False with zero solves; a
        feasible check lets every ancestor above inherit True without solves.
        ``snapshot`` (optional) freezes the statuses read, for the batched
        parallel mode; writes are returned to the caller.
        """
        read = (lambda nid: snapshot[nid]) if snapshot is not None else (
            lambda nid: nodes[nid].low_level
        )
        writes: dict[int, str] = {}
        points: dict[int, np.ndarray] = {}
        chain = [node_id]
        while nodes[chain[-1]].parent is not None:
            chain.append(nodes[chain[-1]].parent)
        for nid in chain:
            if read(nid) == FALSE:
                writes[node_id] = FALSE
                return writes, points
        child_feasible = False
        for nid in chain:
            status = writes.get(nid, read(nid))
            if status != UNKNOWN:
                break
            if child_feasible:
                writes[nid] = TRUE
                continue
            parent = nodes[nid].parent
            warm = nodes[parent].warm if parent is not None else None
            status, point = self.low_level_feasible(nodes[nid], warm, counters)
            writes[nid] = status
            if point is not None:
                points[nid] = point
            if status == FALSE:
                child_feasible = False
            else:
                child_feasible = status == TRUE
                if status == UNRESOLVED:
                    break  # not proven feasible: ancestors must be checked on demand
        return writes, points

    # ----- solution extraction -----

    def extract_solution(self, node: BBNode, point: np.ndarray, quality: float, unresolved: bool):
        assignment = self._leaf_assignment(node)
        ik_vars = self.base_vars
        theta = ik_vars.extract_theta(point)
        w = ik_vars.extract_object_w(point)
        t = np.array([point[j] for j in ik_vars.obj_t])

        prog, vars_with_gamma, assignments = self._build_node_program(node)
        exact = False
        ref = local_ik_refine(
            self.gripper,
            self.grid,
            assignments,
            self.ik_cfg,
            prog,
            vars_with_gamma,
            initial_theta=theta,
            initial_w=w,
            initial_t=t,
        )
        if ref.feasible:
            poses_rt = forward_kinematics(self.gripper, ref.theta)
            obj_pose_exact = (rodrigues_exp(ref.object_w), ref.object_t)
            pen = self._max_penetration_at(poses_rt, obj_pose_exact)
            if pen <= self.collision_tol:
                resid = 0.0
                R_obj = rodrigues_exp(ref.object_w)
                for i, p_idx in enumerate(assignment):
                    tip, _ = fingertip_world(self.gripper, poses_rt, i)
                    target = R_obj @ self.points.positions[p_idx] + ref.object_t
                    resid = max(resid, float(np.linalg.norm(tip - target)))
                return GraspSolution(
                    assignment,
                    quality,
                    ref.theta,
                    ref.object_w,
                    ref.object_t,
                    [(p.rotation.copy(), p.translation.copy()) for p in poses_rt],
                    True,
                    resid,
                    pen,
                    unresolved,
                )
        # relaxed fallback: poses straight from the conic point
        obj_pose = ik_vars.object_pose(point)
        poses = [ik_vars.link_pose(point, l) for l in range(self.gripper.num_links)]
        resid = 0.0
        for i, p_idx in enumerate(assignment):
            f = self.gripper.fingers[i]
            tip = poses[f.link_ids[-1]].apply(f.tip_point)
            target = obj_pose.apply(self.points.positions[p_idx])
            resid = max(resid, float(np.linalg.norm(tip - target)))
        pen = self._max_penetration_at(poses, (obj_pose.rotation, obj_pose.translation))
        return GraspSolution(
            assignment,
            quality,
            theta,
            w,
            t,
            [(p.rotation.copy(), p.translation.copy()) for p in poses],
            False,
            resid,
            pen,
            unresolved,
        )

    def _max_penetration_at(self, poses, obj_pose_rt):
        from .geometry import RigidTransform

        obj_pose = RigidTransform(*obj_pose_rt)
        worst = 0.0
        for pi, l in self.obj_pairs:
            res = penetration(self.object.pieces[pi], obj_pose, self.gripper.links[l], poses[l])
            self.penetration_queries += 1
            worst = max(worst, res.depth)
        for a, b in self.link_pairs:
            res = penetration(self.gripper.links[a], poses[a], self.gripper.links[b], poses[b])
            self.penetration_queries += 1
            worst = max(worst, res.depth)
        return worst

    def leaf_quality(self, node: BBNode) -> float:
        idx = np.unique(np.array(self._leaf_assignment(node)))
        return q1(
            self.points.positions[idx], self.points.normals[idx], self.contact
        )

    # ----- the high-level search -----

    def plan(self) -> PlanResult:
        cfg = self.cfg
        tree = self.tree
        K = self.gripper.num_fingers
        nodes: dict[int, BBNode] = {}
        heap: list[tuple[float, int, int]] = []
        counter = 0

        def push(kd_ids, parent):
            nonlocal counter
            node = BBNode(kd_ids, parent)
            node.q_upper = q1_upper(tree, list(kd_ids), self.contact)
            nid = len(nodes)
            nodes[nid] = node
            heapq.heappush(heap, (-node.q_upper, counter, nid))
            counter += 1
            return nid

        push(tuple([tree.root] * K), None)

        q_best = float("-inf")
        incumbent: GraspSolution | None = None
        all_solutions: list[GraspSolution] = []
        history: list[HistoryRow] = []
        explored = 0
        cut = 0
        status = "infeasible"
        stopped = None
        executor = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None

        def record_history():
            history.append(
                HistoryRow(
                    explored,
                    q_best if np.isfinite(q_best) else 0.0,
                    self.logical_ms(),
                    self.micp_solves,
                    cut,
                )
            )

        def handle_leaf_result(nid, writes, points):
            nonlocal q_best, incumbent
            for wid, st in writes.items():
                if nodes[wid].low_level == UNKNOWN:
                    nodes[wid].low_level = st
                    if st == UNRESOLVED:
                        self.unresolved_nodes += 1
            for wid, pt in points.items():
                if nodes[wid].warm is None:
                    nodes[wid].warm = pt
            node = nodes[nid]
            if node.low_level in (TRUE, UNRESOLVED):
                q_curr = self.leaf_quality(node)
                point = node.warm
                if point is None:
                    return
                better = q_curr > q_best
                tie_upgrade = False
                if not better and q_curr == q_best and incumbent is not None and not incumbent.exact:
                    tie_upgrade = True
                if better or tie_upgrade or cfg.store_all:
                    sol = self.extract_solution(
                        node, point, q_curr, node.low_level == UNRESOLVED
                    )
                    if better or (tie_upgrade and sol.exact):
                        incumbent = sol
                        q_best = q_curr
                    if cfg.store_all:
                        all_solutions.append(sol)

        try:
            while heap:
                if explored >= cfg.node_budget:
                    status = "incomplete"
                    break
                if stopped:
                    break

                # batched deterministic parallel mode: collect independent
                # leaves, evaluate concurrently, join in pop order
                batch: list[int] = []
                while heap and len(batch) < cfg.threads:
                    if explored >= cfg.node_budget:
                        break
                    _, _, nid = heapq.heappop(heap)
                    node = nodes[nid]
                    explored += 1
                    if node.low_level == FALSE:
                        cut += 1
                        record_history()
                        continue
                    is_leaf = all(tree.node(k).is_leaf for k in node.kd_ids)
                    if is_leaf:
                        batch.append(nid)
                        if executor is None:
                            break
                    else:
                        if np.isfinite(q_best) and node.q_upper < q_best:
                            cut += 1
                            record_history()
                            continue
                        sizes = [len(tree.node(k).point_indices) for k in node.kd_ids]
                        i = int(np.argmax(sizes))
                        kd = tree.node(node.kd_ids[i])
                        for child_kd in (kd.left, kd.right):
                            ids = list(node.kd_ids)
                            ids[i] = child_kd
                            push(tuple(ids), nid)
                        record_history()
                        if batch:
                            break

                if not batch:
                    continue
                if executor is None or len(batch) == 1:
                    results = [
                        (nid,) + self.bottom_up_check(nid, nodes) for nid in batch
                    ]
                else:
                    snapshot = {k: n.low_level for k, n in nodes.items()}
                    workers = []
                    counter_objs = []
                    for nid in batch:
                        c = _Counters()
                        counter_objs.append(c)
                        workers.append(
                            executor.submit(
                                self.bottom_up_check, nid, nodes, c, snapshot
                            )
                        )
                    results = []
                    for nid, c, fut in zip(batch, counter_objs, workers):
                        writes, points = fut.result()
                        results.append((nid, writes, points))
                        self.micp_solves += c.micp_solves
                        self.ipm_iterations += c.ipm_iterations
                        self.refine_hits += c.refine_hits
                        self.penetration_queries += c.penetration_queries
                for nid, writes, points in results:
                    handle_leaf_result(nid, writes, points)
                    record_history()
                    if cfg.q_stop is not None and q_best >= cfg.q_stop:
                        stopped = "early_stop"
                        break
        finally:
            if executor is not None:
                executor.shutdown(wait=True)

        if stopped:
            status = stopped
        elif incumbent is not None and status != "incomplete":
            status = "optimal"
        elif status != "incomplete":
            status = "infeasible"

        return PlanResult(
            status,
            incumbent,
            all_solutions,
            history,
            {
                "nodes_explored": explored,
                "nodes_cut": cut,
                "micp_solves": self.micp_solves,
                "ipm_iterations": self.ipm_iterations,
                "penetration_queries": self.penetration_queries,
                "refine_hits": self.refine_hits,
                "unresolved_nodes": self.unresolved_nodes,
            },
        )

    def logical_ms(self) -> float:
        """Deterministic work measure standing in for wall-clock time.

        One unit per interior-point iteration plus a nominal cost per
        penetration query; reproducible across runs, unlike real timers.
        """
        return round(self.ipm_iterations + 0.05 * self.penetration_queries, 2)


class _Counters:
    def __init__(self):
        self.micp_solves = 0
        self.ipm_iterations = 0
        self.refine_hits = 0
        self.penetration_queries = 0


def plan(obj: ObjectModel, gripper: GripperModel, cfg: PlannerConfig) -> PlanResult:
    """Precompute (sampling, KD-tree, lattice, base program) and search."""
    return Planner(obj, gripper, cfg).plan()
