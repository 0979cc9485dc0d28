"""Camera-in-hand range image synthesis and point-cloud export.

The camera sits one object length (bounding-box diagonal) from the center of
mass along the pregrasp approach axis and looks along the approach; depth is
distance along the optical axis, background pixels are +inf.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .geom import Mesh
from .hand import Pregrasp, pregrasp_pose

GRIM_MAGIC = b"GRIM"


@dataclass(frozen=True)
class CameraParams:
    width: int = 128
    height: int = 128
    fov_deg: float = 60.0     # vertical field of view

    def __post_init__(self):
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError("fov must be in (0, 180) degrees")
        if self.width < 8 or self.height < 8:
            raise ValueError("image must be at least 8x8")

    @property
    def focal(self):
        """Focal length in pixels (square pixels, vertical fov)."""
        return self.height / (2.0 * math.tan(math.radians(self.fov_deg) / 2.0))


@dataclass
class RangeImage:
    depth: np.ndarray            # (h, w), meters along the optical axis
    position: np.ndarray         # camera center, world
    forward: np.ndarray          # optical axis (unit)
    right: np.ndarray
    up: np.ndarray


def camera_pose(mesh: Mesh, p0: Pregrasp):
    """Camera center and frame for the camera-in-hand view of p0."""
    pose = pregrasp_pose(p0, mesh)
    diag = float(np.linalg.norm(mesh.bounding_box[1] - mesh.bounding_box[0]))
    center = mesh.center_of_mass - diag * pose.approach
    return center, pose.approach, pose.e1, pose.e2


def render_depth(mesh: Mesh, p0: Pregrasp, cam: CameraParams = CameraParams()) -> RangeImage:
    """Pinhole render: one primary ray per pixel center, first-hit depth."""
    center, fwd, right, up = camera_pose(mesh, p0)
    f = cam.focal
    u = (np.arange(cam.width) + 0.5) - cam.width / 2.0
    v = (np.arange(cam.height) + 0.5) - cam.height / 2.0
    uu, vv = np.meshgrid(u, v)
    dirs = (fwd[None, None, :]
            + (uu / f)[:, :, None] * right[None, None, :]
            + (vv / f)[:, :, None] * up[None, None, :])
    dirs = dirs.reshape(-1, 3)
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs_n = dirs / norms
    origins = np.broadcast_to(center, dirs_n.shape).copy()
    t_first, i_first, _, _, _ = mesh.ray_all_batch(origins, dirs_n)
    # depth along optical axis = t * (dir . fwd)
    axial = dirs_n @ fwd
    depth = np.where(i_first >= 0, t_first * axial, np.inf)
    return RangeImage(depth=depth.reshape(cam.height, cam.width),
                      position=center, forward=fwd, right=right, up=up)


def unproject(img: RangeImage, cam: CameraParams):
    """Finite pixels -> camera-frame points (x right, y up/down per image rows,
    z along the optical axis)."""
    h, w = img.depth.shape
    f = cam.focal
    vv, uu = np.nonzero(np.isfinite(img.depth))
    z = img.depth[vv, uu]
    x = ((uu + 0.5) - w / 2.0) / f * z
    y = ((vv + 0.5) - h / 2.0) / f * z
    return np.column_stack([x, y, z])


def project(points, cam: CameraParams):
    """Camera-frame points -> (u, v, depth) pixel coordinates."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    f = cam.focal
    z = p[:, 2]
    u = p[:, 0] / z * f + cam.width / 2.0 - 0.5
    v = p[:, 1] / z * f + cam.height / 2.0 - 0.5
    return np.column_stack([u, v, z])


def depth_to_cloud(img: RangeImage, cam: CameraParams = CameraParams(),
                   n: int = 1024, seed: int = 0):
    """Fixed-cardinality point cloud: subsample finite pixels or pad with
    points at the camera origin."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = unproject(img, cam)
    if len(pts) > n:
        rng = np.random.default_rng(seed)
        keep = rng.choice(len(pts), size=n, replace=False)
        pts = pts[np.sort(keep)]
    elif len(pts) < n:
        pad = np.zeros((n - len(pts), 3))
        pts = np.vstack([pts, pad])
    return pts


# -- file formats -------------------------------------------------------------

def write_grim(path, img: RangeImage):
    h, w = img.depth.shape
    with open(path, "wb") as f:
        f.write(GRIM_MAGIC)
        f.write(struct.pack("<II", w, h))
        f.write(img.depth.astype("<f4").tobytes())


def read_grim(path):
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != GRIM_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {GRIM_MAGIC!r}")
        w, h = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(4 * w * h), dtype="<f4")
    return data.reshape(h, w).astype(np.float64)


def write_pgm(path, img: RangeImage, max_depth=None):
    """16-bit PGM preview; finite depths scaled to [1, 65535], background 0."""
    d = img.depth
    finite = np.isfinite(d)
    if max_depth is None:
        max_depth = float(d[finite].max()) if finite.any() else 1.0
    out = np.zeros(d.shape, dtype=">u2")
    if finite.any():
        scaled = 1.0 + 65534.0 * np.clip(d[finite] / max_depth, 0.0, 1.0)
        out[finite] = scaled.astype(">u2")
    h, w = d.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode())
        f.write(out.tobytes())
