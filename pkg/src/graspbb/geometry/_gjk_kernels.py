"""GJK distance / EPA penetration-depth kernels.

All functions operate on world-space vertex arrays (n, 3) float64 of two
convex bodies and are compiled with numba unless GRASPBB_PURE_NUMPY is set
(see graspbb._jit).  The entry point is :func:`penetration_query`.

Conventions: the Minkowski difference M = A - B is explored through support
maps only; the origin lies inside M iff the bodies overlap.  Penetration
depth equals the distance from the origin to the boundary of M.
"""

import numpy as np

from .._jit import maybe_jit

GJK_MAX_ITER = 128
EPA_MAX_VERTS = 512
EPA_MAX_FACES = 2048


def _support_index(verts, d):
    best = -1.0e300
    arg = 0
    for i in range(verts.shape[0]):
        s = verts[i, 0] * d[0] + verts[i, 1] * d[1] + verts[i, 2] * d[2]
        if s > best:
            best = s
            arg = i
    return arg


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


def _closest_segment(a, b, bary):
    """Barycentric coords of the point of segment [a,b] closest to origin."""
    ab = b - a
    denom = _dot(ab, ab)
    if denom <= 0.0:
        bary[0] = 1.0
        bary[1] = 0.0
        return
    t = -_dot(a, ab) / denom
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    bary[0] = 1.0 - t
    bary[1] = t


def _closest_triangle(a, b, c, bary):
    """Barycentric coords of the point of triangle (a,b,c) closest to origin.

    Voronoi-region casework; degenerate triangles fall back to the best edge.
    """
    ab = b - a
    ac = c - a
    ap = -a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    if d1 <= 0.0 and d2 <= 0.0:
        bary[0] = 1.0
        bary[1] = 0.0
        bary[2] = 0.0
        return
    bp = -b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    if d3 >= 0.0 and d4 <= d3:
        bary[0] = 0.0
        bary[1] = 1.0
        bary[2] = 0.0
        return
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        bary[0] = 1.0 - t
        bary[1] = t
        bary[2] = 0.0
        return
    cp = -c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    if d6 >= 0.0 and d5 <= d6:
        bary[0] = 0.0
        bary[1] = 0.0
        bary[2] = 1.0
        return
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        bary[0] = 1.0 - t
        bary[1] = 0.0
        bary[2] = t
        return
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        bary[0] = 0.0
        bary[1] = 1.0 - t
        bary[2] = t
        return
    denom = va + vb + vc
    m2 = _dot(ab, ab)
    ac2 = _dot(ac, ac)
    if ac2 > m2:
        m2 = ac2
    if denom <= 1e-13 * m2 * m2:
        # degenerate: fall back to best of the three edges
        eb = np.empty(2)
        best = 1.0e300
        for k in range(3):
            if k == 0:
                p0, p1 = a, b
            elif k == 1:
                p0, p1 = b, c
            else:
                p0, p1 = a, c
            _closest_segment(p0, p1, eb)
            pt = eb[0] * p0 + eb[1] * p1
            d = _dot(pt, pt)
            if d < best:
                best = d
                if k == 0:
                    bary[0] = eb[0]
                    bary[1] = eb[1]
                    bary[2] = 0.0
                elif k == 1:
                    bary[0] = 0.0
                    bary[1] = eb[0]
                    bary[2] = eb[1]
                else:
                    bary[0] = eb[0]
                    bary[1] = 0.0
                    bary[2] = eb[1]
        return
    inv = 1.0 / denom
    v = vb * inv
    w = vc * inv
    bary[0] = 1.0 - v - w
    bary[1] = v
    bary[2] = w


def _closest_tetra(a, b, c, d, bary):
    """Closest point of tetra (a,b,c,d) to origin; returns 1 if origin inside."""
    # face opposite each vertex, oriented so the omitted vertex is "inside"
    inside = 1
    best = 1.0e300
    fb = np.empty(3)
    for f in range(4):
        if f == 0:
            p0, p1, p2, opp = a, b, c, d
            i0, i1, i2 = 0, 1, 2
        elif f == 1:
            p0, p1, p2, opp = a, b, d, c
            i0, i1, i2 = 0, 1, 3
        elif f == 2:
            p0, p1, p2, opp = a, c, d, b
            i0, i1, i2 = 0, 2, 3
        else:
            p0, p1, p2, opp = b, c, d, a
            i0, i1, i2 = 1, 2, 3
        n = _cross(p1 - p0, p2 - p0)
        side_origin = _dot(n, -p0)
        side_opp = _dot(n, opp - p0)
        # origin strictly outside this face's plane (opposite side from opp)
        if side_origin * side_opp < 0.0:
            inside = 0
            _closest_triangle(p0, p1, p2, fb)
            pt = fb[0] * p0 + fb[1] * p1 + fb[2] * p2
            dd = _dot(pt, pt)
            if dd < best:
                best = dd
                bary[0] = 0.0
                bary[1] = 0.0
                bary[2] = 0.0
                bary[3] = 0.0
                bary[i0] = fb[0]
                bary[i1] = fb[1]
                bary[i2] = fb[2]
    if inside == 1:
        # barycentric coords of the origin inside the tetra
        M = np.empty((3, 3))
        for r in range(3):
            M[r, 0] = b[r] - a[r]
            M[r, 1] = c[r] - a[r]
            M[r, 2] = d[r] - a[r]
        det = (
            M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
            - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
            + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0])
        )
        mmax = 0.0
        for r in range(3):
            for cidx in range(3):
                av = abs(M[r, cidx])
                if av > mmax:
                    mmax = av
        if abs(det) < 1e-12 * mmax * mmax * mmax + 1e-300:
            # flat tetra: report the best face instead of claiming interior
            inside = 0
            best = 1.0e300
            for f in range(4):
                if f == 0:
                    p0, p1, p2 = a, b, c
                    i0, i1, i2 = 0, 1, 2
                elif f == 1:
                    p0, p1, p2 = a, b, d
                    i0, i1, i2 = 0, 1, 3
                elif f == 2:
                    p0, p1, p2 = a, c, d
                    i0, i1, i2 = 0, 2, 3
                else:
                    p0, p1, p2 = b, c, d
                    i0, i1, i2 = 1, 2, 3
                _closest_triangle(p0, p1, p2, fb)
                pt = fb[0] * p0 + fb[1] * p1 + fb[2] * p2
                dd = _dot(pt, pt)
                if dd < best:
                    best = dd
                    bary[0] = 0.0
                    bary[1] = 0.0
                    bary[2] = 0.0
                    bary[3] = 0.0
                    bary[i0] = fb[0]
                    bary[i1] = fb[1]
                    bary[i2] = fb[2]
            return inside
        rhs = -a
        sol = np.linalg.solve(M, rhs.copy())
        bary[0] = 1.0 - sol[0] - sol[1] - sol[2]
        bary[1] = sol[0]
        bary[2] = sol[1]
        bary[3] = sol[2]
    return inside


def _gjk(va, vb, eps):
    """GJK closest-point loop on M = A - B.

    Returns (nsimplex, intersecting); fills simplex storage in the caller via
    returned arrays (pts, ia, ib, bary).
    """
    pts = np.zeros((4, 3))
    ia = np.zeros(4, dtype=np.int64)
    ib = np.zeros(4, dtype=np.int64)
    bary = np.zeros(4)

    d = np.empty(3)
    d[0] = va[0, 0] - vb[0, 0]
    d[1] = va[0, 1] - vb[0, 1]
    d[2] = va[0, 2] - vb[0, 2]
    if _dot(d, d) < 1e-300:
        d[0] = 1.0

    i_a = _support_index(va, -d)
    i_b = _support_index(vb, d)
    pts[0] = va[i_a] - vb[i_b]
    ia[0] = i_a
    ib[0] = i_b
    bary[0] = 1.0
    n = 1
    v = pts[0].copy()

    # best iterate so far; the loop can hit a numerical floor and cycle
    best_vv = 1.0e300
    best_pts = np.zeros((4, 3))
    best_ia = np.zeros(4, dtype=np.int64)
    best_ib = np.zeros(4, dtype=np.int64)
    best_bary = np.zeros(4)
    best_n = 0

    intersecting = 0
    for _ in range(GJK_MAX_ITER):
        vv = _dot(v, v)
        if vv < eps * eps:
            intersecting = 1
            break
        if vv < best_vv * (1.0 - 1e-12):
            best_vv = vv
            best_n = n
            for k in range(n):
                best_pts[k] = pts[k]
                best_ia[k] = ia[k]
                best_ib[k] = ib[k]
                best_bary[k] = bary[k]
        else:
            break  # numerical floor: return the best point seen
        i_a = _support_index(va, -v)
        i_b = _support_index(vb, v)
        w = va[i_a] - vb[i_b]
        # no progress toward the origin: v is (near) the closest point
        if vv - _dot(v, w) <= 1e-12 * vv + 1e-300:
            break
        dup = 0
        for k in range(n):
            if ia[k] == i_a and ib[k] == i_b:
                dup = 1
                break
        if dup == 1:
            break
        pts[n] = w
        ia[n] = i_a
        ib[n] = i_b
        n += 1

        if n == 1:
            bary[0] = 1.0
        elif n == 2:
            b2 = np.empty(2)
            _closest_segment(pts[0], pts[1], b2)
            bary[0] = b2[0]
            bary[1] = b2[1]
        elif n == 3:
            b3 = np.empty(3)
            _closest_triangle(pts[0], pts[1], pts[2], b3)
            bary[0] = b3[0]
            bary[1] = b3[1]
            bary[2] = b3[2]
        else:
            b4 = np.empty(4)
            inside = _closest_tetra(pts[0], pts[1], pts[2], pts[3], b4)
            if inside == 1:
                bary[0] = b4[0]
                bary[1] = b4[1]
                bary[2] = b4[2]
                bary[3] = b4[3]
                intersecting = 1
                break
            bary[0] = b4[0]
            bary[1] = b4[1]
            bary[2] = b4[2]
            bary[3] = b4[3]

        # drop zero-weight vertices (keep the supporting feature only)
        m = 0
        for k in range(n):
            if bary[k] > 1e-14:
                pts[m] = pts[k]
                ia[m] = ia[k]
                ib[m] = ib[k]
                bary[m] = bary[k]
                m += 1
        n = m
        v[0] = 0.0
        v[1] = 0.0
        v[2] = 0.0
        for k in range(n):
            v += bary[k] * pts[k]
    if intersecting == 0 and best_n > 0 and _dot(v, v) > best_vv:
        n = best_n
        for k in range(n):
            pts[k] = best_pts[k]
            ia[k] = best_ia[k]
            ib[k] = best_ib[k]
            bary[k] = best_bary[k]
    return pts, ia, ib, bary, n, intersecting


def _face_plane(verts, i, j, k, normal):
    """Unit normal of face (i,j,k) by winding and its signed origin offset.

    Returns (dist, ok); ok=0 flags a degenerate face.  dist = n . v_i, which
    is the signed distance of the face plane from the origin.
    """
    a = verts[i]
    n = _cross(verts[j] - a, verts[k] - a)
    ln = np.sqrt(_dot(n, n))
    if ln < 1e-300:
        return 0.0, 0
    n /= ln
    normal[0] = n[0]
    normal[1] = n[1]
    normal[2] = n[2]
    return _dot(n, a), 1


def _epa(va, vb, pts, ia, ib, n0, eps):
    """Expanding-polytope depth on an initial simplex that contains the origin.

    Returns (depth, contact normal, bary(3), face vertex indices into A and B
    (3 each), ok).
    """
    nv = n0
    verts = np.zeros((EPA_MAX_VERTS, 3))
    v_ia = np.zeros(EPA_MAX_VERTS, dtype=np.int64)
    v_ib = np.zeros(EPA_MAX_VERTS, dtype=np.int64)
    for k in range(n0):
        verts[k] = pts[k]
        v_ia[k] = ia[k]
        v_ib[k] = ib[k]

    faces = np.zeros((EPA_MAX_FACES, 3), dtype=np.int64)
    fnorm = np.zeros((EPA_MAX_FACES, 3))
    fdist = np.zeros(EPA_MAX_FACES)
    alive = np.zeros(EPA_MAX_FACES, dtype=np.int64)
    nf = 0

    # initial tetra faces, oriented outward w.r.t. the opposite vertex
    tet = np.array([[0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 3, 1], [1, 2, 3, 0]], dtype=np.int64)
    nrm = np.empty(3)
    for t in range(4):
        i, j, k, opp = tet[t, 0], tet[t, 1], tet[t, 2], tet[t, 3]
        d, ok = _face_plane(verts, i, j, k, nrm)
        if ok == 0:
            continue
        if _dot(nrm, verts[opp] - verts[i]) > 0.0:
            j, k = k, j
            nrm[0] = -nrm[0]
            nrm[1] = -nrm[1]
            nrm[2] = -nrm[2]
            d = -d
        faces[nf, 0] = i
        faces[nf, 1] = j
        faces[nf, 2] = k
        fnorm[nf] = nrm
        fdist[nf] = d
        alive[nf] = 1
        nf += 1
    if nf < 4:
        # degenerate initial polytope: flat Minkowski difference, zero depth
        bary = np.zeros(3)
        bary[0] = 1.0
        out_ia = np.zeros(3, dtype=np.int64)
        out_ib = np.zeros(3, dtype=np.int64)
        out_ia[:] = v_ia[0]
        out_ib[:] = v_ib[0]
        return 0.0, np.zeros(3), bary, out_ia, out_ib, 1

    edges = np.zeros((EPA_MAX_FACES * 3, 2), dtype=np.int64)
    best_face = -1
    for _ in range(EPA_MAX_VERTS - 4):
        # closest alive face
        best = 1.0e300
        best_face = -1
        for f in range(nf):
            if alive[f] == 1 and fdist[f] < best:
                best = fdist[f]
                best_face = f
        if best_face < 0:
            break
        nrm = fnorm[best_face]
        i_a = _support_index(va, nrm)
        i_b = _support_index(vb, -nrm)
        w = va[i_a] - vb[i_b]
        gain = _dot(nrm, w) - best
        if gain <= eps:
            break
        if nv >= EPA_MAX_VERTS:
            break
        dup = 0
        for k in range(nv):
            dv = verts[k] - w
            if _dot(dv, dv) < 1e-24:
                dup = 1
                break
        if dup == 1:
            break
        # collect faces visible from w and their horizon
        ne = 0
        overflow = 0
        for f in range(nf):
            if alive[f] == 0:
                continue
            if _dot(fnorm[f], w - verts[faces[f, 0]]) > 1e-12:
                alive[f] = 0
                for e in range(3):
                    p = faces[f, e]
                    q = faces[f, (e + 1) % 3]
                    # cancel opposite edge if already collected
                    found = -1
                    for m in range(ne):
                        if edges[m, 0] == q and edges[m, 1] == p:
                            found = m
                            break
                    if found >= 0:
                        edges[found] = edges[ne - 1]
                        ne -= 1
                    else:
                        edges[ne, 0] = p
                        edges[ne, 1] = q
                        ne += 1
        verts[nv] = w
        v_ia[nv] = i_a
        v_ib[nv] = i_b
        wi = nv
        nv += 1
        # horizon edges keep the deleted faces' winding, so (p, q, w) is outward
        nrm2 = np.empty(3)
        for m in range(ne):
            if nf >= EPA_MAX_FACES:
                overflow = 1
                break
            i, j = edges[m, 0], edges[m, 1]
            d, ok = _face_plane(verts, i, j, wi, nrm2)
            if ok == 0:
                # sliver face would tear the polytope; stop with current best
                overflow = 1
                break
            faces[nf, 0] = i
            faces[nf, 1] = j
            faces[nf, 2] = wi
            fnorm[nf] = nrm2
            fdist[nf] = d
            alive[nf] = 1
            nf += 1
        if overflow == 1:
            break

    if best_face < 0:
        bary = np.zeros(3)
        bary[0] = 1.0
        out_ia = np.zeros(3, dtype=np.int64)
        out_ib = np.zeros(3, dtype=np.int64)
        out_ia[:] = v_ia[0]
        out_ib[:] = v_ib[0]
        return 0.0, np.zeros(3), bary, out_ia, out_ib, 0

    f = best_face
    p0 = verts[faces[f, 0]]
    p1 = verts[faces[f, 1]]
    p2 = verts[faces[f, 2]]
    bary = np.empty(3)
    _closest_triangle(p0, p1, p2, bary)
    out_ia = np.empty(3, dtype=np.int64)
    out_ib = np.empty(3, dtype=np.int64)
    for k in range(3):
        out_ia[k] = v_ia[faces[f, k]]
        out_ib[k] = v_ib[faces[f, k]]
    return fdist[f], fnorm[f].copy(), bary, out_ia, out_ib, 1


def _expand_simplex(va, vb, pts, ia, ib, n):
    """Grow a 1/2/3-point GJK terminal simplex into a tetrahedron on M.

    Returns the new count (4 on success; < 4 means M is degenerate/flat).
    """
    if n == 1:
        dirs = np.eye(3)
        for s in range(6):
            d = dirs[s % 3] * (1.0 if s < 3 else -1.0)
            i_a = _support_index(va, d)
            i_b = _support_index(vb, -d)
            w = va[i_a] - vb[i_b]
            dup = 0
            for k in range(n):
                if _dot(w - pts[k], w - pts[k]) < 1e-24:
                    dup = 1
                    break
            if dup == 0:
                pts[n] = w
                ia[n] = i_a
                ib[n] = i_b
                n += 1
                if n == 2:
                    break
        if n < 2:
            return n
    if n == 2:
        axis = pts[1] - pts[0]
        la = np.sqrt(_dot(axis, axis))
        if la < 1e-300:
            return 1
        axis /= la
        # any unit vector orthogonal to the segment
        ref = np.zeros(3)
        ref[np.argmin(np.abs(axis))] = 1.0
        u = _cross(axis, ref)
        u /= np.sqrt(_dot(u, u))
        vv = _cross(axis, u)
        for s in range(3):
            ang = 2.0943951023931953 * s  # 120 degrees
            d = np.cos(ang) * u + np.sin(ang) * vv
            i_a = _support_index(va, d)
            i_b = _support_index(vb, -d)
            w = va[i_a] - vb[i_b]
            area = _cross(pts[1] - pts[0], w - pts[0])
            if _dot(area, area) > 1e-20:
                pts[n] = w
                ia[n] = i_a
                ib[n] = i_b
                n += 1
                break
        if n < 3:
            return n
    if n == 3:
        nrm = _cross(pts[1] - pts[0], pts[2] - pts[0])
        ln = np.sqrt(_dot(nrm, nrm))
        if ln < 1e-300:
            return n
        nrm /= ln
        for sgn in (1.0, -1.0):
            d = sgn * nrm
            i_a = _support_index(va, d)
            i_b = _support_index(vb, -d)
            w = va[i_a] - vb[i_b]
            if abs(_dot(nrm, w - pts[0])) > 1e-14:
                pts[n] = w
                ia[n] = i_a
                ib[n] = i_b
                n += 1
                break
    return n


def penetration_query(va, vb, eps):
    """Distance / penetration query between convex vertex sets A and B.

    Returns (depth, distance, wa, wb): exactly one of depth/distance is
    positive (both zero on touching contact).  wa/wb are world-space witness
    points on A and B; for penetration wa - wb = depth * (contact normal).
    """
    pts, ia, ib, bary, n, intersecting = _gjk(va, vb, eps)
    wa = np.zeros(3)
    wb = np.zeros(3)
    if intersecting == 0:
        v = np.zeros(3)
        for k in range(n):
            v += bary[k] * pts[k]
            wa += bary[k] * va[ia[k]]
            wb += bary[k] * vb[ib[k]]
        dist = np.sqrt(_dot(v, v))
        if dist <= eps:
            return 0.0, 0.0, wa, wb
        return 0.0, dist, wa, wb

    if n < 4:
        n = _expand_simplex(va, vb, pts, ia, ib, n)
    if n < 4:
        # flat Minkowski difference: interiors disjoint, touching contact
        for k in range(3):
            wa[k] = va[ia[0], k]
            wb[k] = vb[ib[0], k]
        return 0.0, 0.0, wa, wb

    depth, normal, fbary, fia, fib, ok = _epa(va, vb, pts, ia, ib, 4, eps)
    for k in range(3):
        wa += fbary[k] * va[fia[k]]
        wb += fbary[k] * vb[fib[k]]
    if depth <= eps:
        return 0.0, 0.0, wa, wb

    # The closest face of the expanded polytope has a certified supporting
    # plane, but the perpendicular foot may fall on a neighboring coplanar
    # triangle.  Re-derive witnesses from a closest-point query against B
    # translated just past the contact plane; this makes wa - wb = depth * n
    # exact up to the query tolerance.
    delta = max(1e-7, 1e-7 * depth)
    shift = (depth + delta) * normal
    vb_shifted = vb + shift
    pts2, ia2, ib2, bary2, n2, inter2 = _gjk(va, vb_shifted, eps)
    if inter2 == 0:
        v2 = np.zeros(3)
        wa2 = np.zeros(3)
        wb2 = np.zeros(3)
        for k in range(n2):
            v2 += bary2[k] * pts2[k]
            wa2 += bary2[k] * va[ia2[k]]
            wb2 += bary2[k] * vb_shifted[ib2[k]]
        if _dot(v2, v2) <= 100.0 * delta * delta:
            wa = wa2
            wb = wb2 - shift
    return depth, 0.0, wa, wb


_support_index = maybe_jit(_support_index)
_dot = maybe_jit(_dot)
_cross = maybe_jit(_cross)
_closest_segment = maybe_jit(_closest_segment)
_closest_triangle = maybe_jit(_closest_triangle)
_closest_tetra = maybe_jit(_closest_tetra)
_gjk = maybe_jit(_gjk)
_face_plane = maybe_jit(_face_plane)
_epa = maybe_jit(_epa)
_expand_simplex = maybe_jit(_expand_simplex)
penetration_query = maybe_jit(penetration_query)
