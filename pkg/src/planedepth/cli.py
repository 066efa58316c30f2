"""Command-line interface.

Subcommands cover the full geometric flow: synthetic dataset generation,
sparse simulation, point projection, gravity warping, plane refinement,
depth enrichment, metric evaluation, and an end-to-end pipeline runner.
Every randomized stage takes --seed; failures exit nonzero with a
machine-readable JSON error on stderr.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import project_points
from .enrich import EnrichConfig, enrich_sparse_depth
from .errors import PlaneDepthError
from .gravity import (
    build_roll_warp,
    warp_image,
    warp_labels,
    warp_normals,
    warp_sparse_depth,
)
from .metrics import eval_depth, eval_normals, eval_sparse
from .pipeline import PipelineConfig, load_frame, run_dataset
from .plane_refine import RefineConfig, refine_all
from .synth import (
    CameraPose,
    SceneConfig,
    ScenePlane,
    SparseSimConfig,
    default_texture,
    render_scene,
    simulate_sparse,
)


def _write_or_print(path, text):
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _scene_from_doc(doc):
    K = io.read_intrinsics_doc(doc["intrinsics"])
    extra = tuple(
        ScenePlane(
            n=np.asarray(p["n"], dtype=np.float64),
            d=float(p["d"]),
            bounds=(p["bounds"][0], p["bounds"][1]) if "bounds" in p else None,
        )
        for p in doc.get("extra_planes", [])
    )
    frames = []
    for pose_doc in doc["frames"]:
        pose = CameraPose(
            position=np.asarray(pose_doc["position"], dtype=np.float64),
            yaw_deg=float(pose_doc.get("yaw_deg", 0.0)),
            pitch_deg=float(pose_doc.get("pitch_deg", 0.0)),
            roll_deg=float(pose_doc.get("roll_deg", 0.0)),
        )
        frames.append(
            SceneConfig(room=doc["room"], pose=pose, K=K, extra_planes=extra)
        )
    return frames


def cmd_gen_synthetic(args):
    doc = io.load_json(args.config)
    scenes = _scene_from_doc(doc)
    out = Path(args.out)
    for index, scene in enumerate(scenes):
        frame_dir = out / f"frame_{index:04d}"
        frame_dir.mkdir(parents=True, exist_ok=True)
        rendered = render_scene(scene)
        io.write_intrinsics_json(frame_dir / "intrinsics.json", scene.K)
        io.write_pfm(frame_dir / "depth_gt.pfm", rendered.depth.astype(np.float32))
        io.write_pfm(frame_dir / "normals.pfm", rendered.normals.astype(np.float32))
        io.write_labels_png(frame_dir / "plane_masks.png", rendered.masks)
        io.write_gravity_json(frame_dir / "gravity.json", rendered.gravity)
        io.write_planes_json(frame_dir / "planes_gt.json", rendered.planes)
        tex = default_texture(scene.K.width, scene.K.height, args.seed ^ index)
        io.write_pfm(frame_dir / "texture.pfm", tex.astype(np.float32))
    print(f"wrote {len(scenes)} frame(s) to {out}")
    return 0


def cmd_simulate_sparse(args):
    frame_dir = Path(args.frame)
    bundle = load_frame(frame_dir)
    if bundle.depth_gt is None:
        raise PlaneDepthError(f"{frame_dir}: depth_gt.pfm or depth_gt.png required")
    texture = None
    if (frame_dir / "texture.pfm").exists():
        texture = io.read_pfm(frame_dir / "texture.pfm").astype(np.float64)
    cfg = SparseSimConfig(
        point_count=args.points,
        cluster_bias=args.cluster_bias,
        depth_noise_sigma=args.sigma,
        outlier_fraction=args.outlier_fraction,
        outlier_scale=args.outlier_scale,
        rng_seed=args.seed,
    )
    sd = simulate_sparse(bundle.depth_gt, cfg, texture=texture)
    out = args.out or frame_dir / "sparse_depth.json"
    io.write_sparse_json(out, sd)
    print(f"wrote {len(sd)} sparse depths to {out}")
    return 0


def cmd_project(args):
    cloud = io.read_cloud_json(args.cloud)
    K = io.read_intrinsics_json(args.intrinsics)
    sd = project_points(cloud, K)
    if args.out:
        io.write_sparse_json(args.out, sd)
        print(f"wrote {len(sd)} sparse depths to {args.out}")
    else:
        doc = [{"u": u, "v": v, "z": z} for u, v, z in sd.entries()]
        print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_warp(args):
    frame_dir = Path(args.frame)
    bundle = load_frame(frame_dir)
    if bundle.gravity is None:
        raise PlaneDepthError(f"{frame_dir}: gravity.json required for warping")
    warp = build_roll_warp(bundle.gravity, bundle.K)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_intrinsics_json(out / "intrinsics.json", bundle.K)
    if bundle.depth_gt is not None:
        warped = warp_image(bundle.depth_gt, warp, interpolation="nearest")
        io.write_pfm(out / "depth_gt.pfm", warped.astype(np.float32))
    if bundle.normals is not None:
        io.write_pfm(
            out / "normals.pfm",
            warp_normals(bundle.normals, warp).astype(np.float32),
        )
    if bundle.masks is not None:
        io.write_labels_png(out / "plane_masks.png", warp_labels(bundle.masks, warp))
    if bundle.sparse is not None:
        io.write_sparse_json(
            out / "sparse_depth.json", warp_sparse_depth(bundle.sparse, warp)
        )
    if bundle.rgb is not None:
        warped = warp_image(bundle.rgb, warp, interpolation="bilinear")
        io.write_pfm(out / "rgb.pfm", warped.astype(np.float32))
    io.write_gravity_json(out / "gravity.json", [0.0, 1.0, 0.0])
    print(f"warped frame by {np.degrees(warp.angle):.3f} deg into {out}")
    return 0


def cmd_refine_planes(args):
    frame_dir = Path(args.frame)
    bundle = load_frame(frame_dir)
    if bundle.masks is None:
        raise PlaneDepthError(f"{frame_dir}: plane_masks.png required")
    cfg = RefineConfig(rng_seed=args.seed)
    refined, planes, dropped = refine_all(
        bundle.masks, bundle.depth_gt, bundle.normals, bundle.K, cfg
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_labels_png(out / "refined_masks.png", refined)
    io.write_planes_json(out / "planes.json", planes)
    for label, reason in dropped:
        print(f"dropped annotation {label}: {reason}", file=sys.stderr)
    print(f"kept {len(planes)} of {len(planes) + len(dropped)} annotations")
    return 0


def cmd_enrich(args):
    frame_dir = Path(args.frame)
    bundle = load_frame(frame_dir)
    if bundle.masks is None or bundle.normals is None:
        raise PlaneDepthError(f"{frame_dir}: plane_masks.png and normals.pfm required")
    sparse = bundle.sparse
    if sparse is None:
        raise PlaneDepthError(f"{frame_dir}: sparse_depth.json required")
    cfg = EnrichConfig(sample_count=args.sample_count, rng_seed=args.seed)
    overrides = None
    if args.planes:
        overrides = dict(io.read_planes_json(args.planes))
    enriched, incomplete, _, skipped = enrich_sparse_depth(
        sparse, bundle.masks, bundle.normals, bundle.K, cfg, overrides
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_sparse_json(out / "enriched_sparse.json", enriched)
    io.write_pfm(out / "incomplete_depth.pfm", incomplete.astype(np.float32))
    for label, reason in skipped:
        print(f"plane {label} skipped: {reason}", file=sys.stderr)
    print(f"enriched {len(sparse)} -> {len(enriched)} points")
    return 0


def _load_depth(path):
    path = Path(path)
    if path.suffix == ".png":
        return io.read_depth_png(path)
    return io.read_pfm(path).astype(np.float64)


def cmd_eval_depth(args):
    gt = _load_depth(args.gt)
    mask = io.read_labels_png(args.mask) > 0 if args.mask else None
    if Path(args.pred).suffix == ".json":
        metrics = eval_sparse(io.read_sparse_json(args.pred), gt)
    else:
        metrics = eval_depth(_load_depth(args.pred), gt, valid_mask=mask)
    _write_or_print(args.out, io.metrics_to_json_str(metrics))
    return 0


def cmd_eval_normals(args):
    pred = io.read_pfm(args.pred).astype(np.float64)
    gt = io.read_pfm(args.gt).astype(np.float64)
    mask = io.read_labels_png(args.mask) > 0 if args.mask else None
    metrics = eval_normals(pred, gt, valid_mask=mask)
    _write_or_print(args.out, io.metrics_to_json_str(metrics))
    return 0


def cmd_pipeline(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    results, aggregate, failures = run_dataset(
        args.dataset, cfg, out_dir=args.out, save_artifacts=args.save_artifacts
    )
    for name, exc in failures:
        print(
            json.dumps({"error": type(exc).__name__, "frame": name, "message": str(exc)}),
            file=sys.stderr,
        )
    doc = {
        "frames": len(results),
        "failed_frames": [name for name, _ in failures],
        "metrics": {name: m.as_dict() for name, m in aggregate.items()},
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    if failures and args.strict:
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="planedepth",
        description="Geometric sparse-depth pipeline: projection, gravity "
        "alignment, plane refinement, enrichment, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="render a synthetic planar dataset")
    p.add_argument("--config", required=True, help="scene config JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0, help="texture seed")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("simulate-sparse", help="simulate tracked-feature depth")
    p.add_argument("--frame", required=True, help="frame directory")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--cluster-bias", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.0, help="depth noise sigma (m)")
    p.add_argument("--outlier-fraction", type=float, default=0.0)
    p.add_argument("--outlier-scale", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output JSON (default in frame dir)")
    p.set_defaults(func=cmd_simulate_sparse)

    p = sub.add_parser("project", help="project a 3D point cloud to sparse depth")
    p.add_argument("--cloud", required=True, help="point cloud JSON [[x,y,z],...]")
    p.add_argument("--intrinsics", required=True, help="intrinsics JSON")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("warp", help="gravity-align a frame by a roll warp")
    p.add_argument("--frame", required=True, help="frame directory")
    p.add_argument("--out", required=True, help="output frame directory")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("refine-planes", help="refine plane annotations")
    p.add_argument("--frame", required=True, help="frame directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_refine_planes)

    p = sub.add_parser("enrich", help="enrich sparse depth from plane masks")
    p.add_argument("--frame", required=True, help="frame directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--sample-count", type=int, default=100)
    p.add_argument("--planes", default=None, help="optional plane-parameter JSON")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("eval-depth", help="evaluate depth (dense PFM/PNG or sparse JSON)")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask", default=None, help="optional label PNG; >0 is evaluated")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval_depth)

    p = sub.add_parser("eval-normals", help="evaluate surface normals")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval_normals)

    p = sub.add_parser("pipeline", help="run warp -> refine -> enrich -> eval")
    p.add_argument("--dataset", required=True, help="dataset directory of frames")
    p.add_argument("--out", default=None, help="output directory for metrics")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--strict", action="store_true", help="fail if any frame fails")
    p.add_argument("--save-artifacts", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PlaneDepthError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
