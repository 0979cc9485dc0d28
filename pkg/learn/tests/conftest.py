import hashlib
import json

import numpy as np
import pytest

from learn_helpers import make_rows, write_csv_dataset, write_grim


@pytest.fixture
def dataset_dir(tmp_path):
    """A synthetic 60-row dataset over 4 objects with matching rasters
    and manifest."""
    rows = make_rows(60, ["obj_a", "obj_b", "obj_c", "obj_d"], seed=5)
    dataset = tmp_path / "grasps.csv"
    write_csv_dataset(dataset, rows)
    images = tmp_path / "images"
    images.mkdir()
    rng = np.random.default_rng(11)
    for i in range(len(rows)):
        depth = np.full((16, 16), np.inf, dtype=np.float32)
        depth[4:12, 4:12] = 0.2 + 0.1 * rng.random((8, 8))
        write_grim(images / f"{i:08d}.grim", depth)
    digest = hashlib.sha256(dataset.read_bytes()).hexdigest()
    manifest = {"dataset_sha256": digest, "count": len(rows),
                "width": 16, "height": 16, "fov_deg": 60.0}
    (images / "manifest.json").write_text(json.dumps(manifest))
    return dataset, images, rows
