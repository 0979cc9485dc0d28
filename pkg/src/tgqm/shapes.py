"""Procedural closed test meshes, sized to be graspable by the default hand.

Compound tools (hammer, knife, ...) are built as unions of closed primitives
with slight embedding; each component is individually watertight so signed
volume checks pass. The small double-counted overlap volume is irrelevant for
the qualitative experiments these shapes support.
"""
import numpy as np

from .geom import Mesh


def _mesh(verts, tris):
    return Mesh(np.asarray(verts, dtype=float), np.asarray(tris, dtype=np.int64))


def box_arrays(size, center=(0.0, 0.0, 0.0)):
    sx, sy, sz = np.asarray(size, dtype=float) / 2.0
    cx, cy, cz = center
    v = np.array([[x, y, z]
                  for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)])
    v += (cx, cy, cz)
    # 12 triangles, outward orientation
    t = np.array([
        [0, 1, 3], [0, 3, 2],      # -x
        [4, 6, 7], [4, 7, 5],      # +x
        [0, 4, 5], [0, 5, 1],      # -y
        [2, 3, 7], [2, 7, 6],      # +y
        [0, 2, 6], [0, 6, 4],      # -z
        [1, 5, 7], [1, 7, 3],      # +z
    ])
    return v, t


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> Mesh:
    return _mesh(*box_arrays(size, center))


def cube(side=1.0, center=(0.0, 0.0, 0.0)) -> Mesh:
    return box((side, side, side), center)


def icosphere_arrays(radius=1.0, subdivisions=3, center=(0.0, 0.0, 0.0)):
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    v /= np.linalg.norm(v[0])
    t = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
         (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
         (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
         (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [tuple(p) for p in v]
    index = {p: i for i, p in enumerate(verts)}

    def midpoint(i, j):
        p = tuple((np.array(verts[i]) + np.array(verts[j])) / 2.0)
        p = tuple(np.array(p) / np.linalg.norm(p))
        if p not in index:
            index[p] = len(verts)
            verts.append(p)
        return index[p]

    for _ in range(subdivisions):
        new_t = []
        for a, b, c in t:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_t += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        t = new_t
    verts = np.array(verts) * radius + np.asarray(center)
    return verts, np.array(t, dtype=np.int64)


def icosphere(radius=1.0, subdivisions=3, center=(0.0, 0.0, 0.0)) -> Mesh:
    return _mesh(*icosphere_arrays(radius, subdivisions, center))


def cylinder_arrays(radius=0.5, height=1.0, segments=32, center=(0.0, 0.0, 0.0),
                    axis=2, stacks=4):
    """Closed cylinder along the given axis, fan-capped ends.

    stacks >= 3 keeps local quadric fits on the side wall well-posed.
    """
    ang = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.column_stack([np.cos(ang) * radius, np.sin(ang) * radius])
    levels = np.linspace(-height / 2.0, height / 2.0, stacks + 1)
    verts = []
    for z in levels:
        for x, y in ring:
            verts.append([x, y, z])
    verts.append([0.0, 0.0, levels[0]])
    verts.append([0.0, 0.0, levels[-1]])
    cb, ct = len(verts) - 2, len(verts) - 1
    top = stacks * segments
    tris = []
    for s in range(stacks):
        lo = s * segments
        hi = (s + 1) * segments
        for i in range(segments):
            j = (i + 1) % segments
            tris += [[lo + i, lo + j, hi + j], [lo + i, hi + j, hi + i]]
    for i in range(segments):
        j = (i + 1) % segments
        tris += [[cb, j, i]]                  # bottom cap (faces -z)
        tris += [[ct, top + i, top + j]]      # top cap (faces +z)
    verts = np.asarray(verts, dtype=float)
    if axis != 2:
        perm = {0: [2, 1, 0], 1: [0, 2, 1]}[axis]
        verts = verts[:, perm]
        tris = [[t[0], t[2], t[1]] for t in tris]   # perm swaps handedness
    verts = verts + np.asarray(center)
    return verts, np.array(tris, dtype=np.int64)


def cylinder(radius=0.5, height=1.0, segments=32, center=(0.0, 0.0, 0.0),
             axis=2, stacks=4) -> Mesh:
    return _mesh(*cylinder_arrays(radius, height, segments, center, axis, stacks))


def wedge_arrays(length, height, back_width, edge_width, center=(0, 0, 0),
                 segments=8):
    """Blade-like prism: rectangular back tapering to a thin edge (along -z).

    Extends along x (length), tapers in y from back_width at z=+h/2 to
    edge_width at z=-h/2. Subdivided along x so curvature fits on the edge
    strip see more than two axial stations.
    """
    L, H = length / 2.0, height / 2.0
    wb, we = back_width / 2.0, edge_width / 2.0
    xs = np.linspace(-L, L, segments + 1)
    # per station: 4 corners, order (-we,-H), (+we,-H), (-wb,+H), (+wb,+H)
    verts = []
    for x in xs:
        verts += [[x, -we, -H], [x, we, -H], [x, -wb, H], [x, wb, H]]
    v = np.asarray(verts, dtype=float) + np.asarray(center, dtype=float)

    def quad(a, b, c, d):
        # outward ccw quad split
        return [[a, c, b], [a, d, c]]

    t = []
    for s in range(segments):
        o, p = 4 * s, 4 * (s + 1)
        t += quad(o + 0, p + 0, p + 1, o + 1)   # -z edge strip
        t += quad(o + 2, o + 3, p + 3, p + 2)   # +z back
        t += quad(o + 0, o + 2, p + 2, p + 0)   # -y slant
        t += quad(o + 1, p + 1, p + 3, o + 3)   # +y slant
    last = 4 * segments
    t += quad(0, 1, 3, 2)                        # -x end cap
    t += quad(last + 0, last + 2, last + 3, last + 1)  # +x end cap
    return v, np.array(t, dtype=np.int64)


def _union(*parts):
    verts = []
    tris = []
    off = 0
    for v, t in parts:
        verts.append(v)
        tris.append(np.asarray(t) + off)
        off += len(v)
    return _mesh(np.vstack(verts), np.vstack(tris))


def hammer() -> Mesh:
    """Box head on a thin handle; handle along x, head at +x end."""
    handle = cylinder_arrays(radius=0.014, height=0.24, segments=16,
                             center=(0.0, 0.0, 0.0), axis=0)
    head = box_arrays((0.05, 0.09, 0.035), center=(0.115, 0.0, 0.0))
    return _union(handle, head)


def knife() -> Mesh:
    """Thin blade with a box handle, both along x."""
    handle = box_arrays((0.11, 0.022, 0.03), center=(-0.055, 0.0, 0.0))
    blade = wedge_arrays(length=0.16, height=0.035, back_width=0.0035,
                         edge_width=0.0004, center=(0.08, 0.0, -0.002))
    return _union(handle, blade)


def sword() -> Mesh:
    handle = cylinder_arrays(radius=0.013, height=0.12, segments=12,
                             center=(-0.06, 0.0, 0.0), axis=0)
    guard = box_arrays((0.012, 0.09, 0.02), center=(-0.002, 0.0, 0.0))
    blade = wedge_arrays(length=0.34, height=0.045, back_width=0.005,
                         edge_width=0.0005, center=(0.17, 0.0, 0.0))
    return _union(handle, guard, blade)


def axe() -> Mesh:
    handle = cylinder_arrays(radius=0.015, height=0.3, segments=16,
                             center=(0.0, 0.0, 0.0), axis=0)
    # wedge edge pointing up (+y after a flip in z->y orientation)
    v, t = wedge_arrays(length=0.1, height=0.07, back_width=0.03,
                        edge_width=0.0008)
    v = v[:, [0, 2, 1]]            # edge now along -y
    t = t[:, [0, 2, 1]]
    v = v + np.array([0.135, -0.045, 0.0])
    return _union((v, t), box_arrays((0.04, 0.05, 0.035), center=(0.135, 0.0, 0.0)))


def bottle() -> Mesh:
    body = cylinder_arrays(radius=0.034, height=0.18, segments=24,
                           center=(0.0, 0.0, 0.09))
    neck = cylinder_arrays(radius=0.013, height=0.07, segments=16,
                           center=(0.0, 0.0, 0.2))
    return _union(body, neck)


def glass() -> Mesh:
    body = cylinder_arrays(radius=0.03, height=0.1, segments=24,
                           center=(0.0, 0.0, 0.05))
    return _mesh(*body)


def screwdriver() -> Mesh:
    handle = cylinder_arrays(radius=0.016, height=0.1, segments=16,
                             center=(-0.05, 0.0, 0.0), axis=0)
    shaft = cylinder_arrays(radius=0.004, height=0.13, segments=10,
                            center=(0.06, 0.0, 0.0), axis=0)
    return _union(handle, shaft)


BUILTIN = {
    "cube": lambda: cube(0.08),
    "sphere": lambda: icosphere(0.05, 2),
    "cylinder": lambda: cylinder(0.03, 0.12, 24),
    "hammer": hammer,
    "knife": knife,
    "sword": sword,
    "axe": axe,
    "bottle": bottle,
    "glass": glass,
    "screwdriver": screwdriver,
}


def builtin_mesh(name: str) -> Mesh:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise KeyError(f"unknown builtin mesh {name!r}; "
                       f"choices: {sorted(BUILTIN)}") from None
