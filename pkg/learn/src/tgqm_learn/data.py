"""Readers for grasp datasets and GRIM depth rasters, and assembly of
train/val/test learning sets with object-level splits."""

import csv
import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

BIN_MAGIC = b"TGQM"
BIN_VERSION = 1
BIN_RECORD = struct.Struct("<16s31fBB6x")
GRIM_MAGIC = b"GRIM"

CSV_COLUMNS = (["object_id"]
               + [f"p0_{i}" for i in range(6)]
               + ["d_0", "d_1", "u_x", "u_y", "u_z", "un_x", "un_y", "un_z",
                  "n_contacts", "eps", "inertia", "e_i"]
               + [f"e_h_{i}" for i in range(6)]
               + ["delta", "u_tau", "u_g", "reached", "viable"])

# Holding-effort normalization bound: targets are sum(e_h) / TAU_EH,
# clipped to [0, 1]. Matches the viability threshold on total hold effort.
TAU_EH = 250.0


class MissingImage(Exception):
    pass


class HashMismatch(Exception):
    pass


class DataTooSmall(Exception):
    pass


@dataclass
class Record:
    """One dataset row: grasp parameters, use direction, and the twelve
    metric values (eps, inertia, e_i, e_h[0..5], delta, u_tau, u_g)."""
    object_id: str
    p0: np.ndarray               # 6
    d: np.ndarray                # 2
    use_point: np.ndarray        # 3
    use_normal: np.ndarray       # 3
    n_contacts: int
    phi: np.ndarray              # 12
    reached: bool
    viable: bool
    use_valid: bool

    @property
    def effort_hold_sum(self) -> float:
        return float(np.sum(self.phi[3:9]))


@dataclass
class LearningSample:
    """One training example: a depth raster with the grasp inputs, the
    viability label, and (for viable grasps only) the holding-effort
    target normalized to [0, 1]."""
    depth: np.ndarray            # (H, W) float32, +inf background
    p0: np.ndarray               # 6
    d: np.ndarray                # 2
    label: bool
    target: float | None = None
    object_id: str = ""

    def __post_init__(self):
        if self.target is not None and not (0.0 <= self.target <= 1.0):
            raise ValueError("target outside [0, 1]")


@dataclass
class Splits:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)
    objects: dict = field(default_factory=dict)   # split name -> object ids


# -- dataset files -------------------------------------------------------------

def read_dataset(path, objects=None):
    """Read a grasp dataset in CSV or binary format. For binary files,
    `objects` optionally maps hashed ids back to readable names."""
    with open(path, "rb") as f:
        magic = f.read(4)
    if magic == BIN_MAGIC:
        return _read_bin(path, objects)
    return _read_csv(path)


def _read_csv(path):
    records = []
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        if header != CSV_COLUMNS:
            raise ValueError("unexpected CSV header")
        for row in r:
            if not row:
                continue
            f_ = [float(x) for x in row[1:]]
            records.append(Record(
                object_id=row[0], p0=np.array(f_[0:6]), d=np.array(f_[6:8]),
                use_point=np.array(f_[8:11]), use_normal=np.array(f_[11:14]),
                n_contacts=int(f_[14]), phi=np.array(f_[15:27]),
                reached=bool(int(f_[27])), viable=bool(int(f_[28])),
                use_valid=bool(np.any(np.asarray(f_[11:14]) != 0.0))))
    return records


def _object_hash(object_id: str) -> bytes:
    return hashlib.sha256(object_id.encode()).digest()[:16]


def _read_bin(path, objects=None):
    lookup = {_object_hash(oid): oid for oid in (objects or [])}
    records = []
    with open(path, "rb") as f:
        f.read(4)
        version, count = struct.unpack("<HQ", f.read(10))
        if version != BIN_VERSION:
            raise ValueError(f"unsupported dataset version {version}")
        for _ in range(count):
            parts = BIN_RECORD.unpack(f.read(BIN_RECORD.size))
            h = parts[0]
            vals = np.array(parts[1:32], dtype=float)
            records.append(Record(
                object_id=lookup.get(h, h.hex()),
                p0=vals[0:6], d=vals[6:8], use_point=vals[8:11],
                use_normal=vals[11:14], n_contacts=int(vals[14]),
                phi=vals[15:27], reached=bool(parts[32]),
                viable=bool(parts[33]), use_valid=bool(vals[27])))
    return records


def read_grim(path):
    """Read a GRIM depth raster: magic, u32 width, u32 height, then
    row-major little-endian float32 depths (+inf background)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != GRIM_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {GRIM_MAGIC!r}")
        w, h = struct.unpack("<II", f.read(8))
        depth = np.frombuffer(f.read(4 * w * h), dtype="<f4").reshape(h, w)
    return np.ascontiguousarray(depth)


def depth_to_cloud(depth, fov_deg=60.0, n_points=1024):
    """Unproject a depth raster into a fixed-size point cloud in camera
    coordinates. Finite pixels are subsampled evenly; when fewer than
    n_points are finite the points repeat cyclically; an empty image
    gives all zeros."""
    h, w = depth.shape
    focal = 0.5 * w / math.tan(math.radians(fov_deg) / 2.0)
    ys, xs = np.nonzero(np.isfinite(depth))
    if len(xs) == 0:
        return np.zeros((n_points, 3))
    z = depth[ys, xs].astype(float)
    x = (xs + 0.5 - w / 2.0) * z / focal
    y = (ys + 0.5 - h / 2.0) * z / focal
    pts = np.column_stack([x, y, z])
    idx = np.arange(n_points) % len(pts) if len(pts) < n_points else \
        np.linspace(0, len(pts) - 1, n_points).round().astype(int)
    return pts[idx]


# -- learning-set assembly ------------------------------------------------------

def _load_samples(records, images, manifest):
    if int(manifest["count"]) != len(records):
        raise HashMismatch("image manifest count does not match the dataset")
    samples = []
    for i, rec in enumerate(records):
        raster = os.path.join(images, f"{i:08d}.grim")
        if not os.path.exists(raster):
            raise MissingImage(raster)
        depth = read_grim(raster)
        ehs = rec.effort_hold_sum
        target = (min(ehs / TAU_EH, 1.0) if rec.viable and math.isfinite(ehs)
                  else None)
        samples.append(LearningSample(
            depth=depth, p0=rec.p0, d=rec.d, label=rec.viable,
            target=target, object_id=rec.object_id))
    return samples


def _check_hash(dataset, manifest):
    with open(dataset, "rb") as f:
        digest = hashlib.sha256(f.read()).hexdigest()
    if digest != manifest.get("dataset_sha256"):
        raise HashMismatch("dataset checksum does not match the image "
                           "manifest; rasters were rendered from a "
                           "different dataset")


def build_learning_set(dataset, images, balance=False, val_fraction=0.2,
                       test_fraction=0.2, seed=0, objects=None,
                       assign=None):
    """Assemble train/val/test splits from a grasp dataset and its
    rendered rasters.

    Splits are by object: every sample of an object lands in exactly one
    split. With two objects the split is train/test only; a single object
    cannot be split. With balance=True the training multiset is
    subsampled so positives and negatives are 1:1 (val/test untouched).
    `assign` optionally fixes the split as a dict mapping split names to
    object-id lists covering every object exactly once."""
    with open(os.path.join(images, "manifest.json")) as f:
        manifest = json.load(f)
    _check_hash(dataset, manifest)
    records = read_dataset(dataset, objects=objects)
    samples = _load_samples(records, images, manifest)

    ids = sorted({s.object_id for s in samples})
    if len(ids) < 2:
        raise DataTooSmall("need at least two objects for an object-level "
                           "split")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    if assign is not None:
        assign = {"train": list(assign.get("train", [])),
                  "val": list(assign.get("val", [])),
                  "test": list(assign.get("test", []))}
        listed = sum(assign.values(), [])
        if sorted(listed) != ids:
            raise ValueError("explicit split must cover every object "
                             "exactly once")
    elif len(ids) == 2:
        assign = {"train": [order[0]], "val": [], "test": [order[1]]}
    else:
        n_test = max(1, int(round(test_fraction * len(ids))))
        n_val = max(1, int(round(val_fraction * len(ids))))
        n_val = min(n_val, len(ids) - n_test - 1)
        assign = {"test": order[:n_test],
                  "val": order[n_test:n_test + n_val],
                  "train": order[n_test + n_val:]}
    lookup = {oid: name for name, oids in assign.items() for oid in oids}
    splits = Splits(objects=assign)
    for s in samples:
        getattr(splits, lookup[s.object_id]).append(s)

    if balance:
        splits.train = _balance(splits.train, rng)
    return splits


def _balance(samples, rng):
    pos = [s for s in samples if s.label]
    neg = [s for s in samples if not s.label]
    if not pos or not neg:
        return list(samples)
    if len(neg) > len(pos):
        keep = rng.choice(len(neg), size=len(pos), replace=False)
        neg = [neg[i] for i in sorted(keep)]
    else:
        keep = rng.choice(len(pos), size=len(neg), replace=False)
        pos = [pos[i] for i in sorted(keep)]
    out = pos + neg
    rng.shuffle(out)
    return out
