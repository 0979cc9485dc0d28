"""Numba kernels for ray casting and proximity queries over a triangle BVH.

All functions take the flattened BVH arrays produced by geom.build_bvh plus
precomputed per-triangle data (first vertex A, edge vectors E1, E2). They are
compiled once per process and shared by every mesh.
"""
import numpy as np
from numba import njit

RAY_MIN_T = 1e-9
_STACK = 128


@njit(cache=True, fastmath=False)
def _ray_box(ox, oy, oz, ix, iy, iz, bmin, bmax):
    """Slab test; inv direction passed in. Returns True if the ray hits the box."""
    t0 = (bmin[0] - ox) * ix
    t1 = (bmax[0] - ox) * ix
    tmin = min(t0, t1)
    tmax = max(t0, t1)
    t0 = (bmin[1] - oy) * iy
    t1 = (bmax[1] - oy) * iy
    tmin = max(tmin, min(t0, t1))
    tmax = min(tmax, max(t0, t1))
    t0 = (bmin[2] - oz) * iz
    t1 = (bmax[2] - oz) * iz
    tmin = max(tmin, min(t0, t1))
    tmax = min(tmax, max(t0, t1))
    return tmax >= tmin and tmax >= 0.0


@njit(cache=True, fastmath=False)
def _ray_tri(ox, oy, oz, dx, dy, dz, ax, ay, az,
             e1x, e1y, e1z, e2x, e2y, e2z):
    """Moller-Trumbore. Returns hit parameter t, or -1 on miss."""
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -1e-13 < det < 1e-13:
        return -1.0
    inv = 1.0 / det
    tx = ox - ax
    ty = oy - ay
    tz = oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -1e-10 or u > 1.0 + 1e-10:
        return -1.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -1e-10 or u + v > 1.0 + 1e-10:
        return -1.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return t


@njit(cache=True)
def ray_scan(o, d, nmin, nmax, nleft, nright, nstart, ncount, order, A, E1, E2):
    """Full hit scan for one ray.

    Returns (t_first, i_first, t_far, i_far, n_cross): nearest and farthest
    intersections with t > RAY_MIN_T and the number of crossings (for parity
    inside tests). Indices are -1 when there is no hit.
    """
    ix = 1.0 / d[0] if d[0] != 0.0 else 1e30
    iy = 1.0 / d[1] if d[1] != 0.0 else 1e30
    iz = 1.0 / d[2] if d[2] != 0.0 else 1e30
    stack = np.empty(_STACK, np.int32)
    sp = 0
    stack[0] = 0
    sp = 1
    t_first = np.inf
    t_far = -np.inf
    i_first = -1
    i_far = -1
    ncross = 0
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if not _ray_box(o[0], o[1], o[2], ix, iy, iz, nmin[node], nmax[node]):
            continue
        if nleft[node] < 0:
            s = nstart[node]
            for k in range(s, s + ncount[node]):
                tri = order[k]
                t = _ray_tri(o[0], o[1], o[2], d[0], d[1], d[2],
                             A[tri, 0], A[tri, 1], A[tri, 2],
                             E1[tri, 0], E1[tri, 1], E1[tri, 2],
                             E2[tri, 0], E2[tri, 1], E2[tri, 2])
                if t > RAY_MIN_T:
                    ncross += 1
                    if t < t_first:
                        t_first = t
                        i_first = tri
                    if t > t_far:
                        t_far = t
                        i_far = tri
        else:
            stack[sp] = nleft[node]
            sp += 1
            stack[sp] = nright[node]
            sp += 1
    return t_first, i_first, t_far, i_far, ncross


@njit(cache=True)
def ray_scan_batch(O, D, nmin, nmax, nleft, nright, nstart, ncount, order, A, E1, E2):
    n = O.shape[0]
    t_first = np.empty(n)
    t_far = np.empty(n)
    i_first = np.empty(n, np.int64)
    i_far = np.empty(n, np.int64)
    ncross = np.empty(n, np.int64)
    for i in range(n):
        tf, jf, tl, jl, nc = ray_scan(O[i], D[i], nmin, nmax, nleft, nright,
                                      nstart, ncount, order, A, E1, E2)
        t_first[i] = tf
        i_first[i] = jf
        t_far[i] = tl
        i_far[i] = jl
        ncross[i] = nc
    return t_first, i_first, t_far, i_far, ncross


@njit(cache=True, fastmath=False)
def _closest_on_tri(px, py, pz, a, e1, e2):
    """Closest point on triangle (a, a+e1, a+e2) to p (Ericson, RTCD 5.1.5).

    Returns (qx, qy, qz).
    """
    abx, aby, abz = e1[0], e1[1], e1[2]
    acx, acy, acz = e2[0], e2[1], e2[2]
    apx = px - a[0]
    apy = py - a[1]
    apz = pz - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return a[0], a[1], a[2]
    bpx = apx - abx
    bpy = apy - aby
    bpz = apz - abz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return a[0] + abx, a[1] + aby, a[2] + abz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        w = d1 / (d1 - d3)
        return a[0] + w * abx, a[1] + w * aby, a[2] + w * abz
    cpx = apx - acx
    cpy = apy - acy
    cpz = apz - acz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return a[0] + acx, a[1] + acy, a[2] + acz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a[0] + w * acx, a[1] + w * acy, a[2] + w * acz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return (a[0] + abx + w * (acx - abx),
                a[1] + aby + w * (acy - aby),
                a[2] + abz + w * (acz - abz))
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return (a[0] + v * abx + w * acx,
            a[1] + v * aby + w * acy,
            a[2] + v * abz + w * acz)


@njit(cache=True, fastmath=False)
def _box_dist2(px, py, pz, bmin, bmax):
    d2 = 0.0
    if px < bmin[0]:
        d2 += (bmin[0] - px) ** 2
    elif px > bmax[0]:
        d2 += (px - bmax[0]) ** 2
    if py < bmin[1]:
        d2 += (bmin[1] - py) ** 2
    elif py > bmax[1]:
        d2 += (py - bmax[1]) ** 2
    if pz < bmin[2]:
        d2 += (bmin[2] - pz) ** 2
    elif pz > bmax[2]:
        d2 += (pz - bmax[2]) ** 2
    return d2


@njit(cache=True)
def closest_point_capped(p, cap2, nmin, nmax, nleft, nright, nstart, ncount,
                         order, A, E1, E2):
    """Branch-and-bound nearest surface point with an initial upper bound on
    the squared distance. Returns (dist2, tri, qx, qy, qz); when nothing lies
    below the cap the result is (cap2, -1, 0, 0, 0)."""
    stack = np.empty(_STACK, np.int32)
    stack[0] = 0
    sp = 1
    best = cap2
    btri = -1
    bx = by = bz = 0.0
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _box_dist2(p[0], p[1], p[2], nmin[node], nmax[node]) >= best:
            continue
        if nleft[node] < 0:
            s = nstart[node]
            for k in range(s, s + ncount[node]):
                tri = order[k]
                qx, qy, qz = _closest_on_tri(p[0], p[1], p[2],
                                             A[tri], E1[tri], E2[tri])
                d2 = (p[0] - qx) ** 2 + (p[1] - qy) ** 2 + (p[2] - qz) ** 2
                if d2 < best:
                    best = d2
                    btri = tri
                    bx, by, bz = qx, qy, qz
        else:
            l = nleft[node]
            r = nright[node]
            dl = _box_dist2(p[0], p[1], p[2], nmin[l], nmax[l])
            dr = _box_dist2(p[0], p[1], p[2], nmin[r], nmax[r])
            # push the nearer child last so it is explored first
            if dl < dr:
                stack[sp] = r
                sp += 1
                stack[sp] = l
                sp += 1
            else:
                stack[sp] = l
                sp += 1
                stack[sp] = r
                sp += 1
    return best, btri, bx, by, bz


@njit(cache=True)
def closest_point(p, nmin, nmax, nleft, nright, nstart, ncount, order, A, E1, E2):
    """Exact nearest surface point. Returns (dist, tri, qx, qy, qz)."""
    d2, t, qx, qy, qz = closest_point_capped(p, np.inf, nmin, nmax, nleft,
                                             nright, nstart, ncount, order,
                                             A, E1, E2)
    return np.sqrt(d2), t, qx, qy, qz


@njit(cache=True)
def closest_point_batch(P, floor, nmin, nmax, nleft, nright, nstart, ncount,
                        order, A, E1, E2):
    """Batch nearest-point query with shared pruning. Distances below `floor`
    and below the running batch minimum are exact; larger ones may come back
    as the cap value, which never changes the batch minimum. floor=inf makes
    every entry exact."""
    n = P.shape[0]
    dist = np.empty(n)
    tri = np.empty(n, np.int64)
    Q = np.empty((n, 3))
    floor2 = floor * floor
    run2 = np.inf
    for i in range(n):
        cap2 = run2 if run2 > floor2 else floor2
        d2, t, qx, qy, qz = closest_point_capped(P[i], cap2, nmin, nmax,
                                                 nleft, nright, nstart,
                                                 ncount, order, A, E1, E2)
        if d2 < run2:
            run2 = d2
        dist[i] = np.sqrt(d2)
        tri[i] = t
        Q[i, 0] = qx
        Q[i, 1] = qy
        Q[i, 2] = qz
    return dist, tri, Q


@njit(cache=True)
def inside_batch(P, dirx, diry, dirz, nmin, nmax, nleft, nright, nstart, ncount,
                 order, A, E1, E2):
    """Parity inside test for a batch of points along one fixed direction."""
    n = P.shape[0]
    out = np.zeros(n, np.bool_)
    d = np.empty(3)
    d[0] = dirx
    d[1] = diry
    d[2] = dirz
    for i in range(n):
        _, _, _, _, nc = ray_scan(P[i], d, nmin, nmax, nleft, nright,
                                  nstart, ncount, order, A, E1, E2)
        out[i] = (nc % 2) == 1
    return out


@njit(cache=True)
def _support_value(W, u):
    best = -np.inf
    for k in range(W.shape[0]):
        dot = 0.0
        for j in range(W.shape[1]):
            dot += W[k, j] * u[j]
        if dot > best:
            best = dot
    return best


@njit(cache=True)
def _descend_support(W, u, iters):
    """Projected-gradient descent of the support function max_k W[k].u over
    the unit sphere, annealing a log-sum-exp smoothing so the iterate settles
    onto the minimizing kink instead of zigzagging across it. Mutates u."""
    K, d = W.shape
    w = np.empty(K)
    grad = np.empty(d)
    nu = np.empty(d)
    norm = 0.0
    for j in range(d):
        norm += u[j] * u[j]
    inv = 1.0 / np.sqrt(norm)
    for j in range(d):
        u[j] *= inv
    lr = 0.1
    beta = 30.0
    for _ in range(iters):
        m = -np.inf
        for k in range(K):
            dot = 0.0
            for j in range(d):
                dot += W[k, j] * u[j]
            w[k] = dot
            if dot > m:
                m = dot
        tot = 0.0
        for k in range(K):
            a = beta * (w[k] - m)
            if a < -700.0:
                a = -700.0
            w[k] = np.exp(a)
            tot += w[k]
        gu = 0.0
        for j in range(d):
            g = 0.0
            for k in range(K):
                g += w[k] * W[k, j]
            grad[j] = g / tot
            gu += grad[j] * u[j]
        gn = 0.0
        for j in range(d):
            grad[j] -= gu * u[j]
            gn += grad[j] * grad[j]
        gn = np.sqrt(gn)
        if gn < 1e-12:
            break
        step = lr
        moved = False
        while step > 1e-10:
            norm = 0.0
            for j in range(d):
                nu[j] = u[j] - step * grad[j] / gn
                norm += nu[j] * nu[j]
            inv = 1.0 / np.sqrt(norm)
            for j in range(d):
                nu[j] *= inv
            if _support_value(W, nu) < m - 1e-15:
                for j in range(d):
                    u[j] = nu[j]
                moved = True
                break
            step *= 0.5
        if not moved:
            lr *= 0.5
            if lr < 1e-9:
                break
        beta *= 1.07


@njit(cache=True)
def _snap_to_facet(W, u, val, out):
    """Try replacing u with the normal of the hyperplane through its k most
    supporting wrenches, for k = 2..10. The minimum of the support function
    lies on such a facet normal, so a good snap reaches it exactly. Writes
    the winner into out and returns its support value."""
    K, d = W.shape
    s = W @ u
    order = np.argsort(s)
    for j in range(d):
        out[j] = u[j]
    for k in range(2, 11):
        if k > K:
            break
        A = np.empty((k, d))
        for r in range(k):
            idx = order[K - k + r]
            for j in range(d):
                A[r, j] = W[idx, j]
        # Minimum-norm solution of A.cand = 1: the plane offset is nonzero
        # whenever the origin is interior, so scaling to offset 1 is safe.
        G = A @ A.T
        for r in range(k):
            G[r, r] += 1e-12
        lam = np.linalg.solve(G, np.ones(k))
        cand = A.T @ lam
        norm = 0.0
        for j in range(d):
            norm += cand[j] * cand[j]
        if norm < 1e-24:
            continue
        inv = 1.0 / np.sqrt(norm)
        for j in range(d):
            cand[j] *= inv
        pos = _support_value(W, cand)
        for j in range(d):
            cand[j] = -cand[j]
        neg = _support_value(W, cand)
        if pos < neg:
            for j in range(d):
                cand[j] = -cand[j]
            v2 = pos
        else:
            v2 = neg
        if v2 < val:
            val = v2
            for j in range(d):
                out[j] = cand[j]
    return val


@njit(cache=True)
def refine_support_min(W, U0, iters):
    """Minimize the support function max_k W[k].u over the unit sphere from
    each start row of U0: annealed projected-gradient descent alternated with
    snapping to the facet normal spanned by the active wrenches. Returns the
    smallest support value reached."""
    n_start, d = U0.shape
    best = np.inf
    u = np.empty(d)
    cand = np.empty(d)
    for s in range(n_start):
        for j in range(d):
            u[j] = U0[s, j]
        _descend_support(W, u, iters)
        val = _support_value(W, u)
        for _ in range(6):
            v2 = _snap_to_facet(W, u, val, cand)
            if v2 >= val - 1e-15:
                break
            val = v2
            for j in range(d):
                u[j] = cand[j]
        if val < best:
            best = val
    return best


@njit(cache=True)
def equality_simplex_min(A, b, c):
    """Two-phase dense simplex with Bland's rule for
    min c.x  s.t.  A x = b, x >= 0.
    Returns (status, objective) with status 0 optimal, 1 infeasible,
    2 unbounded, 3 pivot limit hit (caller should retry with a
    slower solver; tie-break tolerances can defeat the anti-cycling
    rule on heavily degenerate instances)."""
    m, n = A.shape
    N = n + m
    max_pivots = 200 * (N + 1)
    T = np.zeros((m, N + 1))
    for i in range(m):
        s = 1.0 if b[i] >= 0.0 else -1.0
        for j in range(n):
            T[i, j] = s * A[i, j]
        T[i, n + i] = 1.0
        T[i, N] = s * b[i]
    basis = np.empty(m, np.int64)
    for i in range(m):
        basis[i] = n + i
    # Reduced-cost row for phase 1 (artificials cost 1, basis = artificials).
    z = np.zeros(N + 1)
    for j in range(N + 1):
        tot = 0.0
        for i in range(m):
            tot += T[i, j]
        z[j] = -tot
    for i in range(m):
        z[n + i] = 0.0
    pivots = 0
    for phase in range(2):
        allow = N if phase == 0 else n
        while True:
            pivots += 1
            if pivots > max_pivots:
                return 3, 0.0
            enter = -1
            for j in range(allow):
                if z[j] < -1e-10:
                    enter = j
                    break
            if enter < 0:
                break
            leave = -1
            ratio = np.inf
            for i in range(m):
                if T[i, enter] > 1e-12:
                    r = T[i, N] / T[i, enter]
                    if r < ratio - 1e-15 or (r < ratio + 1e-15 and
                                             (leave < 0 or basis[i] < basis[leave])):
                        ratio = r
                        leave = i
            if leave < 0:
                return 2, 0.0
            piv = T[leave, enter]
            for j in range(N + 1):
                T[leave, j] /= piv
            for i in range(m):
                if i != leave and abs(T[i, enter]) > 0.0:
                    f = T[i, enter]
                    for j in range(N + 1):
                        T[i, j] -= f * T[leave, j]
            f = z[enter]
            for j in range(N + 1):
                z[j] -= f * T[leave, j]
            basis[leave] = enter
        if phase == 0:
            if -z[N] > 1e-8:
                return 1, 0.0
            # Rebuild reduced costs for the real objective over the current
            # basis; artificial columns stay blocked in phase 2.
            for j in range(N + 1):
                tot = 0.0
                for i in range(m):
                    bi = basis[i]
                    if bi < n:
                        tot += c[bi] * T[i, j]
                z[j] = (c[j] if j < n else 0.0) - tot
    obj = 0.0
    for i in range(m):
        bi = basis[i]
        if bi < n:
            obj += c[bi] * T[i, N]
    return 0, obj
