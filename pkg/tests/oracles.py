"""Independent brute-force oracles shared by the test modules.

These deliberately avoid the library's own code paths: spheres come from an
exhaustive combinatorial search, penetration depth from direction sweeps or
the full Minkowski-difference hull, and cones from a dense axis grid with
local refinement.
"""

import itertools

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull


def circumsphere(subset):
    """Smallest ball having all points of ``subset`` on its boundary.

    Solved in coordinates centered on the first point so the least-norm
    solution stays in the subset's affine hull (minimal radius).
    """
    subset = np.asarray(subset, dtype=float)
    p0 = subset[0]
    if len(subset) == 1:
        return p0, 0.0
    q = subset[1:] - p0
    A = 2.0 * q
    b = (q**2).sum(axis=1)
    y, *_ = np.linalg.lstsq(A, b, rcond=None)
    c = p0 + y
    r2 = float(((subset - c) ** 2).sum(axis=1).max())
    return c, r2


def _candidate_balls(pts):
    """Circumballs of all 1/2/3/4-point subsets, vectorized.

    Near-degenerate subsets are skipped; their minimal balls are realized by
    a smaller subset, so exhaustiveness is preserved.
    """
    n = len(pts)
    centers = [pts.copy()]
    radii2 = [np.zeros(n)]
    if n >= 2:
        ii, jj = np.triu_indices(n, k=1)
        mid = 0.5 * (pts[ii] + pts[jj])
        centers.append(mid)
        radii2.append(0.25 * ((pts[ii] - pts[jj]) ** 2).sum(axis=1))
    if n >= 3:
        idx = np.array(list(itertools.combinations(range(n), 3)))
        p0 = pts[idx[:, 0]]
        q = np.stack([pts[idx[:, 1]] - p0, pts[idx[:, 2]] - p0], axis=1)  # (m,2,3)
        A = 2.0 * q
        b = (q**2).sum(axis=2)
        G = A @ A.transpose(0, 2, 1)  # (m,2,2)
        det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
        ok = np.abs(det) > 1e-12
        lam = np.zeros_like(b)
        lam[ok, 0] = (G[ok, 1, 1] * b[ok, 0] - G[ok, 0, 1] * b[ok, 1]) / det[ok]
        lam[ok, 1] = (-G[ok, 1, 0] * b[ok, 0] + G[ok, 0, 0] * b[ok, 1]) / det[ok]
        y = (lam[:, :, None] * A).sum(axis=1)
        c = p0 + y
        r2 = ((pts[idx[:, 0]] - c) ** 2).sum(axis=1)
        centers.append(c[ok])
        radii2.append(r2[ok])
    if n >= 4:
        idx = np.array(list(itertools.combinations(range(n), 4)))
        p0 = pts[idx[:, 0]]
        q = np.stack([pts[idx[:, k]] - p0 for k in (1, 2, 3)], axis=1)  # (m,3,3)
        A = 2.0 * q
        b = (q**2).sum(axis=2)
        det = np.linalg.det(A)
        ok = np.abs(det) > 1e-12
        y = np.zeros_like(p0)
        if ok.any():
            y[ok] = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
        c = p0 + y
        r2 = ((pts[idx[:, 0]] - c) ** 2).sum(axis=1)
        centers.append(c[ok])
        radii2.append(r2[ok])
    return np.concatenate(centers), np.concatenate(radii2)


def meb_oracle(points):
    """Exhaustive minimal enclosing ball over all <=4-point support sets."""
    pts = np.asarray(points, dtype=float)
    centers, radii2 = _candidate_balls(pts)
    best_c, best_r2 = None, np.inf
    for lo in range(0, len(centers), 20000):
        c = centers[lo : lo + 20000]
        r2 = radii2[lo : lo + 20000]
        d2 = ((pts[None, :, :] - c[:, None, :]) ** 2).sum(axis=2).max(axis=1)
        covering = d2 <= r2 * (1 + 1e-9) + 1e-12
        if covering.any():
            k = np.argmin(np.where(covering, r2, np.inf))
            if r2[k] < best_r2:
                best_c, best_r2 = c[k], float(r2[k])
    return best_c, best_r2


def cone_oracle(normals, grid=60_000, seed=3):
    """Minimal spherical cap via dense axis grid plus Nelder-Mead refinement."""
    ns = np.asarray(normals, dtype=float)

    def worst_chord(m):
        m = m / np.linalg.norm(m)
        return ((ns - m) ** 2).sum(axis=1).max()

    i = np.arange(grid)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    z = 1.0 - 2.0 * (i + 0.5) / grid
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    axes = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    vals = ((ns[None, :, :] - axes[:, None, :]) ** 2).sum(axis=2).max(axis=1)
    m0 = axes[int(np.argmin(vals))]

    th0 = np.arccos(np.clip(m0[2], -1, 1))
    ph0 = np.arctan2(m0[1], m0[0])

    def f(x):
        th, ph = x
        m = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
        return worst_chord(m)

    res = minimize(f, [th0, ph0], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
    return min(float(res.fun), float(vals.min()))


def sweep_depth(va, vb, num_dirs=10_000, seed=11):
    """Penetration depth upper bound from sampled separating directions."""
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(num_dirs, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return float(np.min((va @ u.T).max(axis=0) - (vb @ u.T).min(axis=0)))


def minkowski_depth(va, vb):
    """Exact penetration depth from the hull of the Minkowski difference."""
    M = (va[:, None, :] - vb[None, :, :]).reshape(-1, 3)
    hull = ConvexHull(M)
    off = hull.equations[:, 3]
    if (off > 0).any():
        return 0.0
    return float((-off).min())


def rotation_series(w, terms=20):
    """Matrix exponential of [w]x via truncated power series."""
    K = np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )
    out = np.eye(3)
    term = np.eye(3)
    for k in range(1, terms + 1):
        term = term @ K / k
        out = out + term
    return out


def unit_cube(center=(0.0, 0.0, 0.0), side=1.0):
    h = side / 2.0
    c = np.asarray(center, dtype=float)
    return np.array(
        [[sx * h, sy * h, sz * h] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    ) + c


def icosphere_vertices(subdiv=1):
    """Vertices of a subdivided icosahedron on the unit sphere (42 at level 1)."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdiv):
        new_faces = []
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                m /= np.linalg.norm(m)
                verts.append(m)
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.array(verts), faces
