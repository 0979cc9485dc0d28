"""Triangle mesh geometry: loading, mass properties, ray and proximity queries,
and local quadric curvature estimation.

Meshes are immutable after construction; every query here is read-only and
safe to call from multiple workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


class ParseError(Exception):
    """Malformed mesh file."""


class DegenerateMesh(Exception):
    """Mesh does not bound a usable volume."""


class OpenSurface(Exception):
    """Signed-volume inconsistency: surface is not closed."""


MIN_TRIANGLE_AREA = 1e-12
MIN_VOLUME = 1e-12

# Fixed slightly-irrational direction for parity inside tests: avoids hitting
# edges/vertices of axis-aligned procedural meshes.
_INSIDE_DIR = np.array([0.57735026918962573, 0.51449575542752646, 0.63299316185545207])
_INSIDE_DIR = _INSIDE_DIR / np.linalg.norm(_INSIDE_DIR)


def tangent_basis(n):
    """Deterministic orthonormal (u, v) spanning the plane perpendicular to n.

    u is built from the coordinate axis with the smallest |n| component, so the
    basis is reproducible and rotation-covariant only through n itself.
    """
    n = np.asarray(n, dtype=float)
    k = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[k] = 1.0
    u = e - np.dot(e, n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        nd = np.linalg.norm(d)
        if abs(nd - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class SurfaceHit:
    point: np.ndarray
    triangle_index: int
    distance: float
    normal: np.ndarray


def _build_bvh(vertices, triangles, leaf_size=4):
    """Median-split BVH; returns flat arrays consumed by the numba kernels."""
    tri_pts = vertices[triangles]              # (m, 3, 3)
    tmin = tri_pts.min(axis=1)
    tmax = tri_pts.max(axis=1)
    centroids = tri_pts.mean(axis=1)
    m = len(triangles)

    nmin, nmax, nleft, nright, nstart, ncount = [], [], [], [], [], []
    order = np.arange(m, dtype=np.int64)

    def emit(idx):
        nmin.append(tmin[idx].min(axis=0))
        nmax.append(tmax[idx].max(axis=0))
        nleft.append(-1)
        nright.append(-1)
        nstart.append(0)
        ncount.append(0)
        return len(nmin) - 1

    # iterative build to avoid deep recursion
    out_order = np.empty(m, dtype=np.int64)
    cursor = 0
    root = emit(order)
    stack = [(root, order)]
    while stack:
        node, idx = stack.pop()
        if len(idx) <= leaf_size:
            nstart[node] = cursor
            ncount[node] = len(idx)
            out_order[cursor:cursor + len(idx)] = np.sort(idx)
            cursor += len(idx)
            continue
        c = centroids[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        ord_ = idx[np.argsort(c[:, axis], kind="stable")]
        half = len(ord_) // 2
        left = emit(ord_[:half])
        right = emit(ord_[half:])
        nleft[node] = left
        nright[node] = right
        stack.append((left, ord_[:half]))
        stack.append((right, ord_[half:]))

    return (np.asarray(nmin), np.asarray(nmax),
            np.asarray(nleft, dtype=np.int32), np.asarray(nright, dtype=np.int32),
            np.asarray(nstart, dtype=np.int64), np.asarray(ncount, dtype=np.int64),
            out_order)


def _signed_volume_terms(vertices, triangles):
    """Per-axis divergence-theorem volumes; equal for closed surfaces."""
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    n = np.cross(b - a, c - a)                  # 2 * area * normal
    centroid = (a + b + c) / 3.0
    return 0.5 * np.array([np.sum(n[:, k] * centroid[:, k]) for k in range(3)])


def _mass_properties_arrays(vertices, triangles):
    """Volume, center of mass and unit-density inertia (about the com) by
    signed-tetrahedron decomposition against the origin."""
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    det = np.einsum("ij,ij->i", a, np.cross(b, c))   # 6 * signed tet volume
    vol = det.sum() / 6.0
    if abs(vol) < MIN_VOLUME:
        raise DegenerateMesh(f"|volume| = {abs(vol):.3e} m^3 below threshold")
    com = (det[:, None] * (a + b + c)).sum(axis=0) / (24.0 * vol)

    # second moments: integral of x x^T over each tet with vertices (0, a, b, c)
    # C_tet = det * M^T Chat M with Chat diag 1/60, off-diag 1/120
    chat = np.full((3, 3), 1.0 / 120.0)
    np.fill_diagonal(chat, 1.0 / 60.0)
    C = np.zeros((3, 3))
    M = np.stack([a, b, c], axis=1)                   # (m, 3, 3) rows are verts
    C = np.einsum("i,ikj,kl,ilm->jm", det, M, chat, M)
    # shift to com: C_com = C - V * com com^T
    C -= vol * np.outer(com, com)
    inertia = np.trace(C) * np.eye(3) - C
    return vol, com, inertia


@dataclass
class Mesh:
    """Watertight triangle surface with cached mass properties and a BVH."""
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray = field(repr=False, default=None)
    volume: float = 0.0
    center_of_mass: np.ndarray = None
    inertia_tensor: np.ndarray = None
    bounding_box: tuple = None
    bounding_radius: float = 0.0

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if t.size and t.max() >= len(v):
            raise ParseError("triangle index out of range")
        # drop degenerate triangles
        n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        area2 = np.linalg.norm(n, axis=1)
        keep = area2 > 2.0 * MIN_TRIANGLE_AREA
        t = t[keep]
        n = n[keep]

        # watertightness: every undirected edge must bound exactly 2 triangles
        if t.size:
            edges = np.sort(t[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
            _, counts = np.unique(edges, axis=0, return_counts=True)
            if not np.all(counts == 2):
                bad = int(np.count_nonzero(counts != 2))
                raise OpenSurface(f"{bad} edges not shared by exactly 2 triangles")

        terms = _signed_volume_terms(v, t)
        vol = terms.mean()
        if abs(vol) < MIN_VOLUME:
            raise DegenerateMesh(f"|volume| = {abs(vol):.3e} m^3 below threshold")
        if np.max(np.abs(terms - vol)) > 0.01 * abs(vol):
            raise OpenSurface(
                f"signed-volume terms disagree: {terms.tolist()} (not closed?)")
        if vol < 0:
            t = t[:, [0, 2, 1]]
            n = -n

        self.vertices = v
        self.triangles = t
        self.normals = n / np.linalg.norm(n, axis=1, keepdims=True)
        self.volume, self.center_of_mass, self.inertia_tensor = \
            _mass_properties_arrays(v, t)
        self.bounding_box = (v.min(axis=0), v.max(axis=0))
        self.bounding_radius = float(
            np.max(np.linalg.norm(v - self.center_of_mass, axis=1)))

        self._A = np.ascontiguousarray(v[t[:, 0]])
        self._E1 = np.ascontiguousarray(v[t[:, 1]] - v[t[:, 0]])
        self._E2 = np.ascontiguousarray(v[t[:, 2]] - v[t[:, 0]])
        self._bvh = _build_bvh(v, t)
        self._vertex_tris = None

    # -- queries ----------------------------------------------------------

    def _scan(self, origin, direction):
        o = np.ascontiguousarray(origin, dtype=np.float64).reshape(1, 3)
        d = np.ascontiguousarray(direction, dtype=np.float64).reshape(1, 3)
        res = _kernels.ray_scan_batch(o, d, *self._bvh, self._A, self._E1, self._E2)
        return tuple(r[0] for r in res)

    def _hit(self, ray, t, idx):
        point = ray.origin + t * ray.direction
        return SurfaceHit(point=point, triangle_index=int(idx), distance=float(t),
                          normal=self.normals[int(idx)].copy())

    def ray_first_hit(self, ray: Ray):
        tf, jf, _, _, _ = self._scan(ray.origin, ray.direction)
        if jf < 0:
            return None
        return self._hit(ray, tf, jf)

    def ray_farthest_hit(self, ray: Ray):
        _, _, tl, jl, _ = self._scan(ray.origin, ray.direction)
        if jl < 0:
            return None
        return self._hit(ray, tl, jl)

    def ray_all_batch(self, origins, directions):
        """Batched raw scan: (t_first, i_first, t_far, i_far, n_cross) arrays."""
        O = np.ascontiguousarray(origins, dtype=np.float64)
        D = np.ascontiguousarray(directions, dtype=np.float64)
        return _kernels.ray_scan_batch(O, D, *self._bvh, self._A, self._E1, self._E2)

    def closest_points(self, points, cap_floor=np.inf):
        """Batched nearest-surface query: (distances, triangle indices, points).

        With a finite cap_floor, distances below it and below the running
        batch minimum stay exact while farther queries may be truncated at
        the cap; the batch minimum is always exact."""
        P = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        return _kernels.closest_point_batch(P, cap_floor, *self._bvh,
                                            self._A, self._E1, self._E2)

    def contains(self, points):
        """Batched parity inside test."""
        P = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
        return _kernels.inside_batch(P, _INSIDE_DIR[0], _INSIDE_DIR[1], _INSIDE_DIR[2],
                                     *self._bvh, self._A, self._E1, self._E2)

    def signed_distances(self, points):
        """Distance to surface, negative inside."""
        dist, tri, q = self.closest_points(points)
        sign = np.where(self.contains(points), -1.0, 1.0)
        return dist * sign, tri, q

    # -- curvature ---------------------------------------------------------

    def _vertex_triangle_map(self):
        if self._vertex_tris is None:
            m = {}
            for i, tri in enumerate(self.triangles):
                for vi in tri:
                    m.setdefault(int(vi), []).append(i)
            self._vertex_tris = m
        return self._vertex_tris

    def triangle_neighborhood(self, triangle_index):
        """Indices of all triangles sharing at least one vertex with the given one."""
        vt = self._vertex_triangle_map()
        out = set()
        for vi in self.triangles[triangle_index]:
            out.update(vt[int(vi)])
        return sorted(out)

    def local_quadric_curvatures(self, hit: SurfaceHit):
        """Principal curvatures (l1, l2), l1 >= l2, from a quadric fit around the hit.

        Fits z = a x^2 + b xy + c y^2 + d x + e y + f to the vertices of all
        triangles sharing a vertex with the hit triangle, in the tangent frame
        at the hit point. Sign convention: positive for locally convex surfaces
        (a sphere of radius r gives about (1/r, 1/r)). Returns (l1, l2, ok);
        ok False when the neighborhood is rank deficient (then (0, 0)).
        """
        tris = self.triangle_neighborhood(hit.triangle_index)
        vidx = np.unique(self.triangles[tris].ravel())
        if len(vidx) < 6:
            return 0.0, 0.0, False
        n = self.normals[hit.triangle_index]
        u, v = tangent_basis(n)
        rel = self.vertices[vidx] - hit.point
        x = rel @ u
        y = rel @ v
        z = rel @ n
        Q = np.column_stack([x * x, x * y, y * y, x, y, np.ones_like(x)])
        coef, _, rank, _ = np.linalg.lstsq(Q, z, rcond=None)
        if rank < 6:
            return 0.0, 0.0, False
        a, b, c = coef[0], coef[1], coef[2]
        # Hessian of the height function; negate so convex (surface bending
        # away from the outward normal) is positive curvature.
        H = -np.array([[2.0 * a, b], [b, 2.0 * c]])
        l2, l1 = np.linalg.eigvalsh(H)
        return float(l1), float(l2), True


def mass_properties(mesh: Mesh):
    """(volume, center_of_mass, inertia_tensor) of an already-loaded mesh."""
    return mesh.volume, mesh.center_of_mass, mesh.inertia_tensor


# ---------------------------------------------------------------------------
# file loading


def _fan_triangulate(face):
    return [(face[0], face[i], face[i + 1]) for i in range(1, len(face) - 1)]


def _parse_off(text):
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ParseError("missing OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4  # skip edge count
        verts = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            face = [int(x) for x in tokens[pos + 1:pos + 1 + k]]
            pos += 1 + k
            faces.extend(_fan_triangulate(face))
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed OFF file: {exc}") from exc
    return verts, np.array(faces, dtype=np.int64)


def _parse_obj(text):
    verts = []
    faces = []
    try:
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                face = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                faces.extend(_fan_triangulate(face))
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed OBJ file: {exc}") from exc
    if not verts or not faces:
        raise ParseError("OBJ file has no vertices or faces")
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64)


def load_mesh(path, fmt=None) -> Mesh:
    """Load an OFF or OBJ triangle mesh; format inferred from suffix if omitted."""
    path = str(path)
    if fmt is None:
        fmt = "OBJ" if path.lower().endswith(".obj") else "OFF"
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if fmt.upper() == "OFF":
        verts, tris = _parse_off(text)
    elif fmt.upper() == "OBJ":
        verts, tris = _parse_obj(text)
    else:
        raise ParseError(f"unsupported format {fmt!r}")
    return Mesh(verts, tris)
