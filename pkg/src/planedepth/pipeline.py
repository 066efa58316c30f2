"""Per-frame orchestration: warp -> refine -> enrich -> evaluate.

A dataset directory holds one subdirectory per frame (intrinsics.json,
depth_gt.pfm|png, normals.pfm, plane_masks.png, sparse_depth.json,
gravity.json, optional rgb.pfm / normals_gt.pfm / texture.pfm). Frames are
processed independently with per-frame seeds derived as seed XOR
frame_index, so parallel or reordered execution cannot change results.

Aggregate metrics pool pixels across frames before computing each metric;
they are not averages of per-frame metrics (the distinction matters for
RMSE and the median).
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .core import CameraIntrinsics, SparseDepth, sparse_to_image
from .enrich import EnrichConfig, enrich_sparse_depth
from .errors import (
    DegenerateGravityError,
    DimensionMismatchError,
    EmptyOverlapError,
    ParseError,
    PlaneDepthError,
)
from .gravity import (
    build_roll_warp,
    warp_image,
    warp_labels,
    warp_normals,
    warp_sparse_depth,
)
from .metrics import (
    depth_error_samples,
    depth_metrics_from_samples,
    eval_sparse,
    normal_error_degrees,
    normal_metrics_from_errors,
)
from .plane_refine import RefineConfig, refine_all


@dataclass(frozen=True)
class MetricToggles:
    eval_sparse: bool = True
    eval_incomplete: bool = True
    eval_enriched: bool = True
    eval_normals: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    """All pipeline knobs, loadable from one JSON document."""

    seed: int = 0
    warp: bool = True
    refine: RefineConfig = RefineConfig()
    enrich: EnrichConfig = EnrichConfig()
    use_fit_planes: bool = False
    metrics: MetricToggles = MetricToggles()

    @classmethod
    def from_doc(cls, doc):
        """Build from a parsed JSON document (schema-validated)."""
        io.validate_doc(doc, "pipeline_config")
        enrich_doc = dict(doc.get("enrich", {}))
        use_fit = enrich_doc.pop("use_fit_planes", False)
        return cls(
            seed=doc.get("seed", 0),
            warp=doc.get("warp", True),
            refine=RefineConfig(**doc.get("refine", {})),
            enrich=EnrichConfig(**enrich_doc),
            use_fit_planes=use_fit,
            metrics=MetricToggles(**doc.get("metrics", {})),
        )

    @classmethod
    def load(cls, path):
        return cls.from_doc(io.load_json(path))

    def with_seed(self, seed):
        return dataclasses.replace(self, seed=int(seed))


@dataclass
class FrameBundle:
    """One frame's worth of pipeline inputs."""

    K: CameraIntrinsics
    depth_gt: np.ndarray = None
    normals: np.ndarray = None
    normals_gt: np.ndarray = None
    masks: np.ndarray = None
    sparse: SparseDepth = None
    gravity: np.ndarray = None
    rgb: np.ndarray = None

    def check_dimensions(self):
        shape = self.K.shape
        for name in ("depth_gt", "normals", "normals_gt", "masks", "rgb"):
            img = getattr(self, name)
            if img is not None and img.shape[:2] != shape:
                raise DimensionMismatchError(
                    f"{name} is {img.shape[:2]}, camera expects {shape}"
                )
        if self.sparse is not None and len(self.sparse):
            if self.sparse.u.max() >= shape[1] or self.sparse.v.max() >= shape[0]:
                raise DimensionMismatchError("sparse entries outside the frame")


def load_frame(frame_dir):
    """Load a frame directory into a FrameBundle (missing files stay None)."""
    frame_dir = Path(frame_dir)
    intr = frame_dir / "intrinsics.json"
    if not intr.exists():
        raise ParseError(f"{frame_dir}: missing intrinsics.json")
    bundle = FrameBundle(K=io.read_intrinsics_json(intr))

    if (frame_dir / "depth_gt.pfm").exists():
        bundle.depth_gt = io.read_pfm(frame_dir / "depth_gt.pfm").astype(np.float64)
    elif (frame_dir / "depth_gt.png").exists():
        bundle.depth_gt = io.read_depth_png(frame_dir / "depth_gt.png")
    if (frame_dir / "normals.pfm").exists():
        bundle.normals = io.read_pfm(frame_dir / "normals.pfm").astype(np.float64)
    if (frame_dir / "normals_gt.pfm").exists():
        bundle.normals_gt = io.read_pfm(frame_dir / "normals_gt.pfm").astype(
            np.float64
        )
    if (frame_dir / "plane_masks.png").exists():
        bundle.masks = io.read_labels_png(frame_dir / "plane_masks.png")
    if (frame_dir / "sparse_depth.json").exists():
        bundle.sparse = io.read_sparse_json(frame_dir / "sparse_depth.json")
    if (frame_dir / "gravity.json").exists():
        bundle.gravity = io.read_gravity_json(frame_dir / "gravity.json")
    if (frame_dir / "rgb.pfm").exists():
        bundle.rgb = io.read_pfm(frame_dir / "rgb.pfm").astype(np.float64)
    bundle.check_dimensions()
    return bundle


@dataclass
class FrameResult:
    name: str
    metrics: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def _warp_bundle(bundle, result):
    """Roll-align every loaded input; ground-truth depth is resampled
    nearest so no depth value is ever invented by interpolation."""
    try:
        warp = build_roll_warp(bundle.gravity, bundle.K)
    except DegenerateGravityError:
        result.notes.append("gravity degenerate; frame left unwarped")
        return bundle
    out = FrameBundle(K=bundle.K, gravity=bundle.gravity)
    if bundle.depth_gt is not None:
        out.depth_gt = warp_image(bundle.depth_gt, warp, interpolation="nearest")
    if bundle.normals is not None:
        out.normals = warp_normals(bundle.normals, warp)
    if bundle.normals_gt is not None:
        out.normals_gt = warp_normals(bundle.normals_gt, warp)
    if bundle.masks is not None:
        out.masks = warp_labels(bundle.masks, warp)
    if bundle.sparse is not None:
        out.sparse = warp_sparse_depth(bundle.sparse, warp)
    if bundle.rgb is not None:
        out.rgb = warp_image(bundle.rgb, warp, interpolation="bilinear")
    result.artifacts["warp_angle_rad"] = warp.angle
    return out


def run_frame(bundle, cfg, frame_seed=None):
    """Run warp -> refine -> enrich -> eval on one frame."""
    seed = cfg.seed if frame_seed is None else int(frame_seed)
    result = FrameResult(name="")
    if cfg.warp and bundle.gravity is not None:
        bundle = _warp_bundle(bundle, result)

    sparse = bundle.sparse if bundle.sparse is not None else SparseDepth.empty()
    enriched = sparse
    incomplete = None
    can_refine = (
        bundle.masks is not None
        and bundle.masks.max() > 0
        and bundle.depth_gt is not None
        and bundle.normals is not None
    )
    if can_refine:
        refine_cfg = dataclasses.replace(cfg.refine, rng_seed=seed)
        refined, fit_planes, dropped = refine_all(
            bundle.masks, bundle.depth_gt, bundle.normals, bundle.K, refine_cfg
        )
        for label, reason in dropped:
            result.notes.append(f"annotation {label} discarded: {reason}")
        result.artifacts["refined_masks"] = refined
        result.artifacts["fit_planes"] = fit_planes

        enrich_cfg = dataclasses.replace(cfg.enrich, rng_seed=seed)
        overrides = fit_planes if cfg.use_fit_planes else None
        enriched, incomplete, _, skipped = enrich_sparse_depth(
            sparse, refined, bundle.normals, bundle.K, enrich_cfg, overrides
        )
        for label, reason in skipped:
            result.notes.append(f"plane {label} skipped in enrichment: {reason}")
        result.artifacts["incomplete"] = incomplete
    else:
        result.notes.append("missing plane masks, depth, or normals; enrichment skipped")
    result.artifacts["enriched"] = enriched

    if bundle.depth_gt is not None:
        gt = bundle.depth_gt
        streams = []
        if cfg.metrics.eval_sparse:
            streams.append(("sparse", sparse))
        if cfg.metrics.eval_enriched:
            streams.append(("enriched", enriched))
        for name, sd in streams:
            try:
                result.metrics[name] = eval_sparse(sd, gt)
                pred = sparse_to_image(sd, bundle.K)
                result.samples[name] = depth_error_samples(pred, gt)
            except EmptyOverlapError:
                result.notes.append(f"{name}: no overlap with ground truth")
        if cfg.metrics.eval_incomplete and incomplete is not None:
            try:
                result.samples["incomplete"] = depth_error_samples(incomplete, gt)
                result.metrics["incomplete"] = depth_metrics_from_samples(
                    *result.samples["incomplete"]
                )
            except EmptyOverlapError:
                result.notes.append("incomplete: no overlap with ground truth")
    if (
        cfg.metrics.eval_normals
        and bundle.normals is not None
        and bundle.normals_gt is not None
    ):
        try:
            errs = normal_error_degrees(bundle.normals, bundle.normals_gt)
            result.samples["normals"] = errs
            result.metrics["normals"] = normal_metrics_from_errors(errs)
        except EmptyOverlapError:
            result.notes.append("normals: no overlap with ground truth")
    return result


def aggregate_results(results):
    """Pool per-pixel samples across frames and compute aggregate metrics."""
    depth_streams = {}
    normal_errs = []
    for r in results:
        for name, sample in r.samples.items():
            if name == "normals":
                normal_errs.append(sample)
            else:
                depth_streams.setdefault(name, []).append(sample)
    out = {}
    for name, pairs in depth_streams.items():
        pred = np.concatenate([p for p, _ in pairs])
        gt = np.concatenate([g for _, g in pairs])
        if pred.size:
            out[name] = depth_metrics_from_samples(pred, gt)
    if normal_errs:
        errs = np.concatenate(normal_errs)
        if errs.size:
            out["normals"] = normal_metrics_from_errors(errs)
    return out


def frame_dirs(dataset_dir):
    """Frame subdirectories of a dataset, sorted by name."""
    dataset_dir = Path(dataset_dir)
    return sorted(p for p in dataset_dir.iterdir() if p.is_dir())


def run_dataset(dataset_dir, cfg, out_dir=None, save_artifacts=False):
    """Run the pipeline over every frame of a dataset directory.

    Returns (results, aggregate, failures) where failures is a list of
    (frame_name, error). Failed frames are skipped; callers decide whether
    that is fatal. Per-frame outputs and the aggregate are written under
    out_dir when given.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    results = []
    failures = []
    for index, frame_dir in enumerate(frame_dirs(dataset_dir)):
        try:
            bundle = load_frame(frame_dir)
            result = run_frame(bundle, cfg, frame_seed=cfg.seed ^ index)
            result.name = frame_dir.name
            results.append(result)
        except PlaneDepthError as exc:
            failures.append((frame_dir.name, exc))
            continue
        if out_dir is not None:
            frame_out = out_dir / frame_dir.name
            frame_out.mkdir(parents=True, exist_ok=True)
            doc = {name: m.as_dict() for name, m in result.metrics.items()}
            io.dump_json(frame_out / "metrics.json", doc)
            if save_artifacts:
                io.write_sparse_json(
                    frame_out / "enriched_sparse.json", result.artifacts["enriched"]
                )
                if "incomplete" in result.artifacts:
                    io.write_pfm(
                        frame_out / "incomplete_depth.pfm",
                        result.artifacts["incomplete"].astype(np.float32),
                    )
                if "refined_masks" in result.artifacts:
                    io.write_labels_png(
                        frame_out / "refined_masks.png",
                        result.artifacts["refined_masks"],
                    )
                    io.write_planes_json(
                        frame_out / "planes.json", result.artifacts["fit_planes"]
                    )
    aggregate = aggregate_results(results)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        doc = {
            "frames": len(results),
            "failed_frames": [name for name, _ in failures],
            "metrics": {name: m.as_dict() for name, m in aggregate.items()},
        }
        io.dump_json(out_dir / "aggregate.json", doc)
    return results, aggregate, failures
