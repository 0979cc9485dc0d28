"""Dataset generation and brute-force affordance search.

Sampling is counter based: sample i is drawn from a generator seeded with
(seed, i), so results are bit-identical for any worker count. Records keep
both reached and missed grasps; misses carry the no-contact metric vector.
"""
from __future__ import annotations

import csv
import hashlib
import math
import multiprocessing as mp
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import affordance, metrics, shapes
from .affordance import AffordanceConfig, Task
from .geom import Mesh, Ray, load_mesh
from .hand import HandModel, Pregrasp, execute_policy
from .metrics import MetricsConfig, MetricVector, UsePoint, compute_phi

BIN_MAGIC = b"TGQM"
BIN_VERSION = 1
BIN_RECORD = struct.Struct("<16s31fBB6x")
assert BIN_RECORD.size == 148

CSV_COLUMNS = (["object_id"]
               + [f"p0_{i}" for i in range(6)]
               + ["d_0", "d_1", "u_x", "u_y", "u_z", "un_x", "un_y", "un_z",
                  "n_contacts", "eps", "inertia", "e_i"]
               + [f"e_h_{i}" for i in range(6)]
               + ["delta", "u_tau", "u_g", "reached", "viable"])


class ObjectLoadError(Exception):
    pass


class EmptyResult(Exception):
    pass


@dataclass(frozen=True)
class UseDirection:
    d_theta: float
    d_phi: float

    def __post_init__(self):
        if not (-1.0 <= self.d_theta <= 1.0 and -1.0 <= self.d_phi <= 1.0):
            raise ValueError("use direction outside [-1, 1]^2")

    def decode(self):
        theta = (self.d_theta + 1.0) / 2.0 * math.pi
        phi = self.d_phi * math.pi
        return np.array([math.sin(theta) * math.cos(phi),
                         math.sin(theta) * math.sin(phi),
                         math.cos(theta)])


@dataclass
class GraspRecord:
    object_id: str
    p0: np.ndarray               # 6
    d: np.ndarray                # 2
    use_point: np.ndarray        # 3 (zeros when use_valid is False)
    use_normal: np.ndarray       # 3, inward
    n_contacts: int
    phi: np.ndarray              # 12: eps, inertia, e_i, e_h[6], delta, u_tau, u_g
    reached: bool
    viable: bool
    use_valid: bool = True

    def metric_vector(self) -> MetricVector:
        return MetricVector.from_array(self.phi)

    def to_csv_row(self):
        vals = ([self.object_id]
                + [repr(float(x)) for x in self.p0]
                + [repr(float(x)) for x in self.d]
                + [repr(float(x)) for x in self.use_point]
                + [repr(float(x)) for x in self.use_normal]
                + [str(self.n_contacts)]
                + [repr(float(x)) for x in self.phi]
                + [str(int(self.reached)), str(int(self.viable))])
        return vals

    @classmethod
    def from_csv_row(cls, row):
        vals = row[1:]
        f = [float(x) for x in vals]
        return cls(object_id=row[0], p0=np.array(f[0:6]), d=np.array(f[6:8]),
                   use_point=np.array(f[8:11]), use_normal=np.array(f[11:14]),
                   n_contacts=int(f[14]), phi=np.array(f[15:27]),
                   reached=bool(int(f[27])), viable=bool(int(f[28])),
                   use_valid=bool(np.any(np.asarray(f[11:14]) != 0.0)))


def object_hash(object_id: str) -> bytes:
    return hashlib.sha256(object_id.encode()).digest()[:16]


@dataclass
class RunConfig:
    objects: list
    count: int = 1000
    seed: int = 0
    workers: int = 1
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    affordance: AffordanceConfig = field(default_factory=AffordanceConfig)
    hand: HandModel = field(default_factory=HandModel)
    fmt: str = "csv"             # "csv" or "bin"

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sample count must be >= 1")
        if not self.objects:
            raise ObjectLoadError("object list is empty")

    @classmethod
    def from_dict(cls, d):
        return cls(objects=list(d.get("objects", [])),
                   count=int(d.get("count", 1000)),
                   seed=int(d.get("seed", 0)),
                   workers=int(d.get("workers", 1)),
                   metrics=MetricsConfig.from_config(d.get("metrics")),
                   affordance=affordance.config_from_dict(d.get("affordance")),
                   hand=HandModel.from_config(d.get("hand")),
                   fmt=d.get("format", "csv"))


def resolve_object(object_id: str) -> Mesh:
    """'builtin:<name>' or a mesh file path."""
    try:
        if object_id.startswith("builtin:"):
            return shapes.builtin_mesh(object_id.split(":", 1)[1])
        return load_mesh(object_id)
    except Exception as exc:
        raise ObjectLoadError(f"cannot load {object_id!r}: {exc}") from exc


def sample_rng(seed: int, index: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_pregrasp(rng) -> Pregrasp:
    """Uniform over [-1,1]^5 x [0,1]."""
    v = rng.uniform(-1.0, 1.0, size=5)
    s = rng.uniform(0.0, 1.0)
    return Pregrasp(v[0], v[1], v[2], v[3], v[4], s)


def sample_use_direction(rng) -> UseDirection:
    v = rng.uniform(-1.0, 1.0, size=2)
    return UseDirection(v[0], v[1])


def direction_map(mesh: Mesh, d: UseDirection) -> UsePoint | None:
    """Farthest intersection of the ray from the center of mass along the
    decoded direction; None when the ray misses (thin-shell numerics)."""
    ray = Ray(mesh.center_of_mass, d.decode())
    hit = mesh.ray_farthest_hit(ray)
    if hit is None:
        return None
    return UsePoint(point=hit.point, inward_normal=-hit.normal,
                    triangle_index=hit.triangle_index)


def evaluate_sample(mesh: Mesh, object_id: str, p0: Pregrasp, d: UseDirection,
                    cfg: RunConfig) -> GraspRecord:
    grasp = execute_policy(mesh, p0, cfg.hand)
    use = direction_map(mesh, d)
    phi = compute_phi(mesh, grasp, use, cfg.metrics)
    arr = phi.as_array()
    if use is None:
        u = np.zeros(3)
        un = np.zeros(3)
    else:
        u = use.point
        un = use.inward_normal
    viable = grasp.reached_object and affordance.is_viable(phi, cfg.affordance)
    return GraspRecord(object_id=object_id, p0=p0.as_array(), d=np.array([d.d_theta, d.d_phi]),
                       use_point=u, use_normal=un, n_contacts=len(grasp.contacts),
                       phi=arr, reached=grasp.reached_object, viable=viable,
                       use_valid=use is not None)


def compute_record(cfg: RunConfig, meshes: dict, index: int) -> GraspRecord:
    object_id = cfg.objects[index % len(cfg.objects)]
    rng = sample_rng(cfg.seed, index)
    p0 = sample_pregrasp(rng)
    d = sample_use_direction(rng)
    return evaluate_sample(meshes[object_id], object_id, p0, d, cfg)


# -- parallel generation ------------------------------------------------------

_WORKER = {}


def _worker_init(cfg: RunConfig):
    _WORKER["cfg"] = cfg
    _WORKER["meshes"] = {oid: resolve_object(oid) for oid in cfg.objects}


def _worker_run(indices):
    cfg = _WORKER["cfg"]
    meshes = _WORKER["meshes"]
    return [compute_record(cfg, meshes, i) for i in indices]


def generate_dataset(cfg: RunConfig, out_path) -> dict:
    """Run the sampling loop, write the dataset, return a summary dict."""
    t0 = time.time()
    for oid in cfg.objects:
        resolve_object(oid)      # fail fast on bad object ids
    indices = np.arange(cfg.count)
    if cfg.workers <= 1:
        _worker_init(cfg)
        records = _worker_run(indices)
    else:
        chunks = np.array_split(indices, cfg.workers * 4)
        ctx = mp.get_context("fork")
        with ctx.Pool(cfg.workers, initializer=_worker_init, initargs=(cfg,)) as pool:
            parts = pool.map(_worker_run, [c for c in chunks if len(c)])
        records = [r for part in parts for r in part]
    write_dataset(out_path, records, fmt=cfg.fmt)
    n_viable = sum(r.viable for r in records)
    n_reached = sum(r.reached for r in records)
    return {"count": len(records), "reached": n_reached, "viable": n_viable,
            "viability_rate": n_viable / len(records),
            "wall_time_s": time.time() - t0}


# -- dataset IO ---------------------------------------------------------------

def write_dataset(path, records, fmt="csv"):
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_COLUMNS)
            for r in records:
                w.writerow(r.to_csv_row())
    elif fmt == "bin":
        with open(path, "wb") as f:
            f.write(BIN_MAGIC)
            f.write(struct.pack("<HQ", BIN_VERSION, len(records)))
            for r in records:
                vals = np.concatenate([r.p0, r.d, r.use_point, r.use_normal,
                                       [float(r.n_contacts)], r.phi,
                                       [float(r.use_valid), 0.0, 0.0, 0.0]])
                f.write(BIN_RECORD.pack(object_hash(r.object_id),
                                        *[float(x) for x in vals],
                                        int(r.reached), int(r.viable)))
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")


def read_dataset(path, objects=None):
    """Read a CSV or binary dataset. For binary files, `objects` maps id
    hashes back to loadable ids (required to recover object_id strings)."""
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
            records.append(GraspRecord.from_csv_row(row))
    return records


def _read_bin(path, objects=None):
    lookup = {object_hash(oid): oid for oid in (objects or [])}
    records = []
    with open(path, "rb") as f:
        f.read(4)
        version, count = struct.unpack("<HQ", f.read(10))
        if version != BIN_VERSION:
            raise ValueError(f"unsupported dataset version {version}")
        for _ in range(count):
            chunk = f.read(BIN_RECORD.size)
            parts = BIN_RECORD.unpack(chunk)
            h = parts[0]
            vals = np.array(parts[1:32], dtype=float)
            records.append(GraspRecord(
                object_id=lookup.get(h, h.hex()),
                p0=vals[0:6], d=vals[6:8], use_point=vals[8:11],
                use_normal=vals[11:14], n_contacts=int(vals[14]),
                phi=vals[15:27], reached=bool(parts[32]), viable=bool(parts[33]),
                use_valid=bool(vals[27])))
    return records


# -- search and verification ---------------------------------------------------

def argmax_search(records, task: Task, cfg: AffordanceConfig = AffordanceConfig(),
                  top_k: int = 1):
    """Brute-force affordance argmax; returns [(record, score)] sorted by
    descending score, ties broken by (object_id, record index)."""
    scored = []
    for i, r in enumerate(records):
        s = affordance.score(task, r.metric_vector(), cfg).score
        if s != -math.inf:
            scored.append((-s, r.object_id, i, r))
    if not scored:
        raise EmptyResult(f"no record passes the {task.value} gates")
    scored.sort(key=lambda t: (t[0], t[1], t[2]))
    return [(r, -negs) for negs, _, _, r in scored[:top_k]]


def _deviation(a, b):
    """Relative-ish deviation; matching infinities count as zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = 0.0
    for x, y in zip(a.ravel(), b.ravel()):
        if math.isinf(x) or math.isinf(y):
            if x != y:
                return math.inf
            continue
        out = max(out, abs(x - y) / max(1.0, abs(y)))
    return out


def verify_dataset(records, cfg: RunConfig, fraction: float, seed: int = 0,
                   storage_f32: bool = False):
    """Recompute phi for a sampled fraction of records; returns the max
    deviation observed (0.0 for an intact dataset).

    storage_f32: compare at float32 precision (binary datasets store f4)."""
    if fraction <= 0.0:
        return 0.0
    n = len(records)
    k = max(1, int(math.ceil(fraction * n)))
    rng = np.random.default_rng(seed)
    picks = rng.choice(n, size=min(k, n), replace=False)
    meshes = {}
    worst = 0.0
    for i in sorted(picks):
        r = records[i]
        if r.object_id not in meshes:
            meshes[r.object_id] = resolve_object(r.object_id)
        fresh = evaluate_sample(meshes[r.object_id], r.object_id,
                                Pregrasp.from_array(r.p0),
                                UseDirection(r.d[0], r.d[1]), cfg)
        cast = (lambda a: np.asarray(a, dtype=np.float32).astype(float)) \
            if storage_f32 else (lambda a: a)
        dev = max(_deviation(cast(fresh.phi), r.phi),
                  _deviation(cast(fresh.use_point), r.use_point),
                  _deviation(cast(fresh.use_normal), r.use_normal),
                  float(fresh.n_contacts != r.n_contacts),
                  float(fresh.reached != r.reached),
                  float(fresh.viable != r.viable))
        worst = max(worst, dev)
    return worst
