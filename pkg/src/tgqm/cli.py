"""Command-line interface: evaluate / sample / optimize / render / verify.

Exit codes: 0 ok, 1 input error, 2 grasp missed the object, 3 empty search
result, 4 dataset verification failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import affordance, pipeline, render, shapes
from .affordance import Task
from .geom import Mesh
from .hand import HandModel, Pregrasp, execute_policy
from .metrics import MetricsConfig, compute_phi
from .pipeline import RunConfig, UseDirection

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MISS = 2
EXIT_EMPTY = 3
EXIT_VERIFY = 4


class CliError(Exception):
    pass


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc


def _mesh(arg) -> Mesh:
    try:
        return pipeline.resolve_object(arg)
    except pipeline.ObjectLoadError as exc:
        raise CliError(str(exc)) from exc


def _pregrasp(values) -> Pregrasp:
    if len(values) != 6:
        raise CliError(f"pregrasp needs 6 values, got {len(values)}")
    try:
        return Pregrasp.from_array(values)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _fmt(x):
    return "inf" if math.isinf(x) else f"{x:.6g}"


def cmd_evaluate(args):
    cfg = _load_config(args.config)
    mesh = _mesh(args.mesh)
    p0 = _pregrasp(args.pregrasp)
    if len(args.use_dir) != 2:
        raise CliError("use-dir needs 2 values")
    mcfg = MetricsConfig.from_config(cfg.get("metrics"))
    acfg = affordance.config_from_dict(cfg.get("affordance"))
    hand = HandModel.from_config(cfg.get("hand"))
    grasp = execute_policy(mesh, p0, hand)
    use = pipeline.direction_map(mesh, UseDirection(*args.use_dir))
    phi = compute_phi(mesh, grasp, use, mcfg)
    scores = {t.value: affordance.score(t, phi, acfg).score for t in Task}
    out = {
        "object": args.mesh,
        "reached": grasp.reached_object,
        "n_contacts": len(grasp.contacts),
        "use_valid": use is not None,
        "phi": {
            "eps": phi.eps, "inertia": phi.inertia,
            "effort_impact": phi.effort_impact,
            "effort_hold": list(phi.effort_hold),
            "discharge": phi.discharge, "use_force": phi.use_force,
            "use_geometry": phi.use_geometry,
        },
        "viable": grasp.reached_object and affordance.is_viable(phi, acfg),
        "scores": scores,
    }
    if args.json:
        print(json.dumps(_jsonable(out), indent=2))
    else:
        print(f"object      : {args.mesh}")
        print(f"reached     : {grasp.reached_object}  contacts: {len(grasp.contacts)}")
        print(f"eps         : {_fmt(phi.eps)}")
        print(f"inertia     : {_fmt(phi.inertia)}")
        print(f"effort_imp  : {_fmt(phi.effort_impact)}")
        print(f"effort_hold : {' '.join(_fmt(v) for v in phi.effort_hold)}")
        print(f"discharge   : {_fmt(phi.discharge)}")
        print(f"use_force   : {_fmt(phi.use_force)}")
        print(f"use_geom    : {_fmt(phi.use_geometry)}")
        print(f"viable      : {out['viable']}")
        for t, s in scores.items():
            print(f"score[{t:4s}] : {_fmt(s) if s != -math.inf else '-inf'}")
    return EXIT_OK if grasp.reached_object else EXIT_MISS


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(float(obj))
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def cmd_sample(args):
    cfg_dict = _load_config(args.config)
    if args.count is not None:
        cfg_dict["count"] = args.count
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("TGQM_THREADS", cfg_dict.get("workers", 1)))
    cfg_dict["workers"] = workers
    try:
        cfg = RunConfig.from_dict(cfg_dict)
        summary = pipeline.generate_dataset(cfg, args.out)
    except (pipeline.ObjectLoadError, ValueError, OSError) as exc:
        raise CliError(str(exc)) from exc
    print(json.dumps(_jsonable(summary), indent=2))
    return EXIT_OK


def cmd_optimize(args):
    cfg_dict = _load_config(args.config)
    objects = cfg_dict.get("objects")
    try:
        records = pipeline.read_dataset(args.dataset, objects=objects)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    acfg = affordance.config_from_dict(cfg_dict.get("affordance"))
    if args.preset:
        acfg = affordance.preset(args.preset)
    task = Task(args.task)
    try:
        ranked = pipeline.argmax_search(records, task, acfg, top_k=args.top_k)
    except pipeline.EmptyResult as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    print(f"{'rank':>4}  {'score':>12}  {'eps':>8}  {'object'}")
    for i, (rec, s) in enumerate(ranked):
        print(f"{i + 1:>4}  {_fmt(s):>12}  {_fmt(rec.phi[0]):>8}  {rec.object_id}")
    if args.export_scene:
        rec = ranked[0][0]
        _export_scene(args.export_scene, rec, cfg_dict)
        print(f"scene written to {args.export_scene}")
    return EXIT_OK


def _export_scene(path, rec, cfg_dict):
    """OBJ scene: object mesh, hand links as boxes, use-point marker."""
    mesh = _mesh(rec.object_id)
    hand_model = HandModel.from_config(cfg_dict.get("hand"))
    p0 = Pregrasp.from_array(rec.p0)
    grasp = execute_policy(mesh, p0, hand_model)
    from .hand import _HandGeometry
    geo = _HandGeometry(grasp.pose, grasp.spread_angle, hand_model)
    lines = ["# grasp scene export"]
    v_off = 1

    def add_group(name, verts, tris):
        nonlocal v_off
        lines.append(f"g {name}")
        for p in verts:
            lines.append(f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}")
        for t in tris:
            lines.append(f"f {t[0] + v_off} {t[1] + v_off} {t[2] + v_off}")
        v_off += len(verts)

    add_group("object", mesh.vertices, mesh.triangles)

    def segment_box(a, b, half=0.006):
        d = b - a
        L = np.linalg.norm(d)
        d = d / L
        from .geom import tangent_basis
        u, w = tangent_basis(d)
        corners = []
        for s in (0.0, L):
            for su in (-half, half):
                for sw in (-half, half):
                    corners.append(a + s * d + su * u + sw * w)
        tris = [[0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5], [0, 4, 5], [0, 5, 1],
                [2, 3, 7], [2, 7, 6], [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3]]
        return np.array(corners), tris

    wrist = grasp.pose.wrist
    for f in range(3):
        b = geo.base(wrist, f)
        k = geo.proximal_points(wrist, f, grasp.joint_angles[f, 0])[-1]
        tip = geo.distal_points(wrist, f, grasp.joint_angles[f, 0],
                                grasp.joint_angles[f, 1])[-1]
        add_group(f"hand_link_{f}_1", *segment_box(b, k))
        add_group(f"hand_link_{f}_2", *segment_box(k, tip))
    pv, pt = shapes.icosphere_arrays(hand_model.palm_radius / 4.0, 1,
                                     center=wrist)
    add_group("hand_palm", pv, pt)
    if rec.use_valid:
        mv, mt = shapes.icosphere_arrays(0.004, 1, center=rec.use_point)
        add_group("use_point", mv, mt)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def cmd_render(args):
    cam = render.CameraParams()
    if args.dataset:
        if not args.out_dir:
            raise CliError("--out-dir required with --dataset")
        cfg_dict = _load_config(args.config)
        records = pipeline.read_dataset(args.dataset,
                                        objects=cfg_dict.get("objects"))
        os.makedirs(args.out_dir, exist_ok=True)
        meshes = {}
        for i, rec in enumerate(records):
            if rec.object_id not in meshes:
                meshes[rec.object_id] = _mesh(rec.object_id)
            img = render.render_depth(meshes[rec.object_id],
                                      Pregrasp.from_array(rec.p0), cam)
            render.write_grim(os.path.join(args.out_dir, f"{i:08d}.grim"), img)
        import hashlib
        with open(args.dataset, "rb") as f:
            digest = hashlib.sha256(f.read()).hexdigest()
        manifest = {"dataset_sha256": digest, "count": len(records),
                    "width": cam.width, "height": cam.height,
                    "fov_deg": cam.fov_deg}
        with open(os.path.join(args.out_dir, "manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2)
        print(f"wrote {len(records)} range images to {args.out_dir}")
        return EXIT_OK
    mesh = _mesh(args.mesh)
    p0 = _pregrasp(args.pregrasp)
    img = render.render_depth(mesh, p0, cam)
    render.write_grim(args.out, img)
    if args.pgm:
        render.write_pgm(args.pgm, img)
    finite = np.isfinite(img.depth).sum()
    print(f"rendered {img.depth.shape[1]}x{img.depth.shape[0]}, "
          f"{finite} finite pixels -> {args.out}")
    return EXIT_OK


def cmd_verify(args):
    cfg_dict = _load_config(args.config)
    try:
        records = pipeline.read_dataset(args.dataset,
                                        objects=cfg_dict.get("objects"))
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    cfg_dict.setdefault("objects", sorted({r.object_id for r in records}))
    cfg_dict.setdefault("count", max(1, len(records)))
    cfg = RunConfig.from_dict(cfg_dict)
    with open(args.dataset, "rb") as f:
        is_bin = f.read(4) == pipeline.BIN_MAGIC
    dev = pipeline.verify_dataset(records, cfg, args.fraction, seed=args.seed,
                                  storage_f32=is_bin)
    print(f"records checked: {max(0, int(math.ceil(args.fraction * len(records))))} "
          f"of {len(records)}; max deviation: {dev:.3g}")
    if dev > 1e-6:
        return EXIT_VERIFY
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="tgqm",
                                description="task-oriented grasp quality engine")
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("evaluate", help="metrics + task scores for one grasp")
    pe.add_argument("--mesh", required=True, help="mesh path or builtin:<name>")
    pe.add_argument("--pregrasp", type=float, nargs="+", required=True)
    pe.add_argument("--use-dir", type=float, nargs="+", required=True)
    pe.add_argument("--config")
    pe.add_argument("--json", action="store_true")
    pe.set_defaults(fn=cmd_evaluate)

    ps = sub.add_parser("sample", help="generate a dataset")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", required=True)
    ps.add_argument("--count", type=int)
    ps.add_argument("--seed", type=int)
    ps.add_argument("--workers", type=int)
    ps.set_defaults(fn=cmd_sample)

    po = sub.add_parser("optimize", help="brute-force affordance argmax")
    po.add_argument("--dataset", required=True)
    po.add_argument("--task", required=True, choices=[t.value for t in Task])
    po.add_argument("--preset", choices=sorted(affordance.PRESETS))
    po.add_argument("--top-k", type=int, default=10)
    po.add_argument("--config")
    po.add_argument("--export-scene")
    po.set_defaults(fn=cmd_optimize)

    pr = sub.add_parser("render", help="camera-in-hand range image(s)")
    pr.add_argument("--mesh")
    pr.add_argument("--pregrasp", type=float, nargs="+")
    pr.add_argument("--out")
    pr.add_argument("--pgm")
    pr.add_argument("--dataset", help="batch mode: render every record")
    pr.add_argument("--out-dir")
    pr.add_argument("--config")
    pr.set_defaults(fn=cmd_render)

    pv = sub.add_parser("verify", help="recompute and check stored metrics")
    pv.add_argument("--dataset", required=True)
    pv.add_argument("--fraction", type=float, default=0.05)
    pv.add_argument("--config")
    pv.add_argument("--seed", type=int, default=0)
    pv.set_defaults(fn=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
