import itertools

import numpy as np
import pytest

from graspbb.conic_model import ConicProgram
from graspbb.bnb_solver import WarmStart, solve_micp, solve_relaxation


def random_socp(rng, equalities=True):
    p = ConicProgram()
    n = int(rng.integers(2, 5))
    xs = p.add_vars("x", n, lower=-2.0, upper=2.0)
    for _ in range(int(rng.integers(1, 4))):
        k = int(rng.integers(1, n + 1))
        idxs = rng.choice(n, size=k, replace=False)
        sense = "<=" if (not equalities or rng.random() < 0.7) else "=="
        p.add_linear(idxs, rng.normal(size=k), rng.normal() * 0.5, sense)
    for _ in range(int(rng.integers(1, 3))):
        rows_i = [[int(i)] for i in range(n)]
        rows_c = [[float(rng.normal())] for _ in range(n)]
        p.add_soc(rows_i, rows_c, rng.normal(size=n) * 0.5, float(rng.uniform(0.1, 2.0)))
    return p, n


def grid_oracle(p, n, per_axis=41, slack=0.0):
    """Dense box-grid feasibility check (inequality-only programs)."""
    axes = [np.linspace(-2, 2, per_axis)] * n
    pts = np.stack(np.meshgrid(*axes), axis=-1).reshape(-1, n)
    ok = np.ones(len(pts), bool)
    for lc in p.linear:
        v = pts[:, lc.indices] @ lc.coefficients
        ok &= v <= lc.rhs + slack
    for soc in p.socs:
        V = np.zeros((len(pts), len(soc.row_indices)))
        for r, (ri, rc) in enumerate(zip(soc.row_indices, soc.row_coefficients)):
            V[:, r] = pts[:, ri] @ rc + soc.offsets[r]
        ok &= (V**2).sum(axis=1) <= soc.bound + slack
    return ok


def confident_instances(seed, count):
    """Random SOCPs where the grid oracle is decisive about feasibility."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p, n = random_socp(rng, equalities=False)
        strict = grid_oracle(p, n, slack=-1e-3)
        loose = grid_oracle(p, n, slack=1e-3)
        if strict.any():
            out.append((p, True))
        elif not loose.any():
            out.append((p, False))
    return out


class TestSolveRelaxation:
    def test_contradictory_bounds_infeasible_with_certificate(self):
        p = ConicProgram()
        x = p.add_var("x")
        p.add_linear([x], [-1.0], -1.0, "<=")  # x >= 1
        p.add_linear([x], [1.0], 0.0, "<=")  # x <= 0
        r = solve_relaxation(p)
        assert r.infeasible
        assert r.certificate["violation"] >= 1e-7

    def test_unit_ball_feasible(self):
        p = ConicProgram()
        xs = p.add_vars("x", 3)
        p.add_soc([[i] for i in xs], [[1.0]] * 3, np.zeros(3), 1.0)
        r = solve_relaxation(p)
        assert r.feasible and r.max_residual <= 1e-6

    def test_fifty_random_socps_match_grid_oracle(self):
        for p, expect in confident_instances(seed=10, count=50):
            r = solve_relaxation(p)
            assert r.status != "numerical_failure"
            assert r.feasible == expect
            if r.feasible:
                assert r.max_residual <= 1e-6
            else:
                assert r.certificate["violation"] >= 1e-7

    def test_farkas_certificate_verifies_independently(self):
        from graspbb.bnb_solver import standard_form

        rng = np.random.default_rng(44)
        checked = 0
        while checked < 15:
            p, n = random_socp(rng)
            r = solve_relaxation(p)
            if not r.infeasible or "y" not in r.certificate:
                continue
            A, b, G, h, dims = standard_form(p, None)
            y, z = r.certificate["y"], r.certificate["z"]
            # z in the dual cone, A'y + G'z ~ 0, b'y + h'z < 0
            l = dims[0]
            assert (z[:l] >= -1e-9).all()
            start = l
            for q in dims[1]:
                blk = z[start : start + q]
                assert blk[0] + 1e-9 >= np.linalg.norm(blk[1:])
                start += q
            lhs = np.linalg.norm(A.T @ y + G.T @ z)
            gap = b @ y + h @ z
            assert gap < 0
            assert lhs <= 1e-6 * max(1.0, -gap)
            checked += 1

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        p, _ = random_socp(rng)
        r1 = solve_relaxation(p)
        r2 = solve_relaxation(p)
        assert r1.status == r2.status
        if r1.feasible:
            assert (r1.x == r2.x).all()

    def test_touching_feasible_set_without_interior(self):
        p = ConicProgram()
        xs = p.add_vars("x", 2)
        p.add_soc([[xs[0]], [xs[1]]], [[1.0], [1.0]], np.array([-2.0, 0.0]), 1.0)
        p.add_linear([xs[0]], [1.0], 1.0, "==")
        r = solve_relaxation(p)
        assert r.feasible
        assert np.allclose(r.x, [1.0, 0.0], atol=1e-5)


def random_mip(rng, max_binaries=7):
    p = ConicProgram()
    nb = int(rng.integers(2, max_binaries))
    bs = [p.add_binary(f"b{i}") for i in range(nb)]
    xs = p.add_vars("x", 2, lower=-3.0, upper=3.0)
    for _ in range(int(rng.integers(1, 5))):
        k = int(rng.integers(1, nb + 1))
        idx = list(rng.choice(bs, size=k, replace=False)) + [xs[0]]
        p.add_linear(idx, rng.normal(size=k + 1), rng.normal(), "<=" if rng.random() < 0.8 else "==")
    p.add_soc([[xs[0]], [xs[1]]], [[1.0], [1.0]], rng.normal(size=2) * 0.5, float(rng.uniform(0.2, 2.0)))
    return p, bs


def enumerate_verdict(p, bs):
    for assign in itertools.product([0, 1], repeat=len(bs)):
        if solve_relaxation(p, None, dict(zip(bs, assign))).feasible:
            return "feasible"
    return "infeasible"


class TestSolveMicp:
    def test_sos2_middle_cell(self):
        p = ConicProgram()
        lams = p.add_vars("lam", 3)
        p.add_sos2_log(lams)
        p.add_linear(lams, [0.0, 1.0, 2.0], 0.5, "==")  # value in cell 1
        r = solve_micp(p)
        assert r.feasible
        assert r.x[lams[2]] == pytest.approx(0.0, abs=1e-6)

    def test_contradictory_binary_infeasible(self):
        p = ConicProgram()
        b = p.add_binary("b")
        p.add_linear([b], [1.0], 1.0, "==")
        p.add_linear([b], [1.0], 0.0, "<=")
        assert solve_micp(p).status == "infeasible"

    def test_budget_exceeded_is_distinct(self):
        rng = np.random.default_rng(3)
        p, bs = random_mip(rng)
        r = solve_micp(p, node_budget=0)
        assert r.status == "budget_exceeded"

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            p, bs = random_mip(rng)
            assert solve_micp(p).status == enumerate_verdict(p, bs)

    def test_feasible_points_are_integral_and_feasible(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            p, bs = random_mip(rng)
            r = solve_micp(p)
            if r.feasible:
                assert p.residuals(r.x) <= 1e-6
                for b in bs:
                    assert abs(r.x[b] - round(r.x[b])) <= 1e-6

    def test_warm_start_never_changes_verdict(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            p, bs = random_mip(rng)
            cold = solve_micp(p)
            warm = solve_micp(p, start=WarmStart(np.zeros(p.num_vars)))
            assert cold.status == warm.status
