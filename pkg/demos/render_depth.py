"""Render a camera-in-hand range image of the builtin knife.

Writes a GRIM raster plus a viewable PGM, then unprojects the depth map to a
fixed-size point cloud.
"""
import tempfile
from pathlib import Path

import numpy as np

from tgqm import pipeline, render
from tgqm.hand import Pregrasp


def main():
    mesh = pipeline.resolve_object("builtin:knife")
    p0 = Pregrasp(approach_theta=0.35, approach_phi=0.2, roll=0.0,
                  offset_x=0.0, offset_y=0.0, spread=0.5)
    cam = render.CameraParams()
    img = render.render_depth(mesh, p0, cam)

    finite = np.isfinite(img.depth)
    print(f"rendered {cam.width}x{cam.height}, {finite.sum()} object pixels, "
          f"depth range [{img.depth[finite].min():.4f}, "
          f"{img.depth[finite].max():.4f}]")

    out = Path(tempfile.mkdtemp())
    render.write_grim(out / "knife.grim", img)
    render.write_pgm(out / "knife.pgm", img)
    print(f"wrote {out / 'knife.grim'} and {out / 'knife.pgm'}")

    cloud = render.depth_to_cloud(img, n=1024, seed=0)
    print(f"point cloud: {cloud.shape}, extent "
          f"{np.round(cloud.max(axis=0) - cloud.min(axis=0), 4)}")


if __name__ == "__main__":
    main()
