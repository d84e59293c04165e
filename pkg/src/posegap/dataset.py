"""Dataset emission, background-crop harvesting and validation.

Layouts (all paths relative to the manifest):
  paired:   <root>/{source,target,ann}/%06d.{png,json} + manifest.json
  unpaired: <root>/{trainA,trainB}/%06d.png, ann/%06d.json (domain A only)
            + manifest.json

Every emission is deterministic in its root seed: sample i uses seed
root_seed + i, so serial and parallel runs produce identical trees. The
manifest echoes the full configuration and the per-object control points,
making a run reconstructible and validatable from the manifest alone.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .annotations import Annotation, AnnotationError
from .assets import DecodeError, load_image, save_image
from .augment import (AugmentParams, BackgroundPool, EmptyPool, augment,
                      pick_background)
from .edges import (LAPLACE_ENCODING, PairConfig, PairMethod, laplace_to_rgb,
                    make_pair, silhouette_iou)
from .geometry import (CameraIntrinsics, ControlPoints3D, control_points_3d,
                       default_intrinsics, project_control_points)
from .render import RandomTexture, RenderConfig, rasterize, sample_pose

PAIRED = "paired"
UNPAIRED = "unpaired"
COMPOSITED = "composited"


class DatasetError(ValueError):
    pass


class ManifestParseError(DatasetError):
    pass


class EmptySource(DatasetError):
    pass


class AlignmentGateError(DatasetError):
    pass


@dataclass(frozen=True)
class EmitConfig:
    """Shared emission knobs; defaults are the documented desk-scale ones."""

    image_size: tuple = (416, 416)
    root_seed: int = 0
    jobs: int = 1
    intrinsics: CameraIntrinsics | None = None  # None: centered default
    distance_range: tuple = (0.6, 1.4)
    azimuth_range: tuple = (0.0, 360.0)
    elevation_range: tuple = (-60.0, 60.0)
    in_plane_range: tuple = (-180.0, 180.0)
    pair: PairConfig = field(default_factory=PairConfig)
    texture_pool: BackgroundPool | None = None  # random-texture source
    augmentation: AugmentParams | None = None   # None: no augmentation
    iou_gate: float = 0.5

    def camera(self) -> CameraIntrinsics:
        if self.intrinsics is not None:
            return self.intrinsics
        w, h = self.image_size
        return default_intrinsics(int(w), int(h))

    def echo(self) -> dict:
        aug = None
        if self.augmentation is not None:
            a = self.augmentation
            aug = {"scale_range": list(a.scale_range),
                   "exposure_range": list(a.exposure_range),
                   "saturation_range": list(a.saturation_range),
                   "order": "applied after pair construction"}
        k = self.camera()
        return {
            "image_size": [int(self.image_size[0]), int(self.image_size[1])],
            "root_seed": int(self.root_seed),
            "intrinsics": {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
                           "width": k.width, "height": k.height},
            "distance_range": list(self.distance_range),
            "azimuth_range": list(self.azimuth_range),
            "elevation_range": list(self.elevation_range),
            "in_plane_range": list(self.in_plane_range),
            "augmentation": aug,
        }


@dataclass(frozen=True)
class CropSpec:
    source_dir: str
    count: int
    crop_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise DatasetError("count must be >= 0")
        if self.crop_size < 64:
            raise DatasetError("crop_size must be >= 64")


@dataclass(frozen=True)
class Violation:
    kind: str
    path: str
    message: str


@dataclass
class ValidationReport:
    manifest_path: str
    checked: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [f"{self.manifest_path}: {self.checked} records checked, "
                 f"{len(self.violations)} violation(s)"]
        for v in self.violations:
            lines.append(f"  [{v.kind}] {v.path}: {v.message}")
        return "\n".join(lines)


def _normalize_meshes(meshes):
    if isinstance(meshes, dict):
        items = sorted(meshes.items())
    elif hasattr(meshes, "vertices"):
        items = [("object", meshes)]
    else:
        items = list(meshes)
    if not items:
        raise DatasetError("need at least one mesh")
    return items


def _objects_entry(items):
    out = {}
    for object_id, mesh in items:
        cp = control_points_3d(mesh)
        out[object_id] = {"centroid": cp.centroid.tolist(),
                          "corners": cp.corners.tolist()}
    return out


def _prepare_out_dir(out_dir) -> Path:
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        raise DatasetError(f"output directory {out} is not empty")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_texture_images(pool: BackgroundPool | None, fallback: BackgroundPool):
    source = pool if pool is not None else fallback
    return tuple(load_image(p) for p in source.image_paths)


def _write_manifest(out: Path, manifest: dict) -> Path:
    path = out / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return path


def _run_jobs(fn, n, jobs):
    if jobs <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(n)))


def emit_paired(meshes, method: PairMethod, n: int, bg_pool: BackgroundPool,
                cfg: EmitConfig, out_dir) -> Path:
    """Emit n aligned (source, target, annotation) triples plus a manifest.

    Returns the manifest path. Partial output is removed on failure.
    """
    if n < 1:
        raise DatasetError("sample count must be >= 1")
    method = PairMethod(method)
    items = _normalize_meshes(meshes)
    k = cfg.camera()
    out = _prepare_out_dir(out_dir)
    for sub in ("source", "target", "ann"):
        (out / sub).mkdir()

    textures = ()
    if method == PairMethod.RANDOM_TEXTURE:
        textures = _load_texture_images(cfg.texture_pool, bg_pool)
    gate_methods = (PairMethod.UNIFORM_TO_GRAY, PairMethod.UNIFORM_TO_CHECKER)

    def build(i):
        seed = cfg.root_seed + i
        rng = np.random.default_rng(seed)
        object_id, mesh = items[int(rng.integers(len(items)))]
        center = control_points_3d(mesh).centroid
        pose = sample_pose(seed, cfg.distance_range, cfg.azimuth_range,
                           cfg.elevation_range, cfg.in_plane_range, k=k,
                           object_center=center)
        bg = pick_background(bg_pool, cfg.image_size, seed)
        pcfg = replace(cfg.pair, seed=seed, random_textures=textures)
        pair = make_pair(mesh, pose, k, method, bg, pcfg, object_id=object_id)
        if method in gate_methods:
            iou = silhouette_iou(pair.source, pair.mask)
            if iou < cfg.iou_gate:
                raise AlignmentGateError(
                    f"sample {i}: silhouette IoU {iou:.3f} below gate "
                    f"{cfg.iou_gate}")
        source_img = laplace_to_rgb(pair.source)
        target_img = pair.target
        ann = pair.annotation
        if cfg.augmentation is not None:
            params = replace(cfg.augmentation, seed=seed)
            target_img, ann = augment(target_img, ann, params)
            src_only = replace(params, exposure_range=(1.0, 1.0),
                               saturation_range=(1.0, 1.0))
            source_img, _ = augment(source_img, pair.annotation, src_only)
            # Re-project so the stored 2D points match the adjusted pose
            # exactly; the similarity-transformed points agree within the
            # documented 1.5 px approximation.
            cp = control_points_3d(mesh)
            ann = ann.with_(control_points_2d=project_control_points(
                cp, ann.pose, k))
        name = f"{i:06d}"
        save_image(source_img, out / "source" / f"{name}.png")
        save_image(target_img, out / "target" / f"{name}.png")
        ann.save(out / "ann" / f"{name}.json")
        return {"id": name,
                "source": f"source/{name}.png",
                "target": f"target/{name}.png",
                "ann": f"ann/{name}.json",
                "annotation": ann.to_dict()}

    try:
        records = _run_jobs(build, n, cfg.jobs)
        manifest = {
            "dataset_kind": PAIRED,
            "method": int(method),
            "method_name": method.name,
            "sample_count": n,
            "image_size": [int(cfg.image_size[0]), int(cfg.image_size[1])],
            "laplace_encoding": LAPLACE_ENCODING,
            "generator_version": f"posegap {__version__}",
            "root_seed": int(cfg.root_seed),
            "config": cfg.echo(),
            "objects": _objects_entry(items),
            "records": records,
        }
        return _write_manifest(out, manifest)
    except Exception:
        shutil.rmtree(out, ignore_errors=True)
        raise


def emit_unpaired(meshes, n_per_domain: int, real_pool: BackgroundPool,
                  synth_pool: BackgroundPool, cfg: EmitConfig,
                  out_dir) -> Path:
    """Emit trainA (randomly textured renders on synthetic-game backgrounds,
    with annotations) and trainB (real-photo crops, unannotated)."""
    if n_per_domain < 1:
        raise DatasetError("sample count must be >= 1")
    if len(real_pool) == 0 or len(synth_pool) == 0:
        raise EmptyPool("both pools must be non-empty")
    items = _normalize_meshes(meshes)
    k = cfg.camera()
    out = _prepare_out_dir(out_dir)
    for sub in ("trainA", "trainB", "ann"):
        (out / sub).mkdir()
    textures = _load_texture_images(cfg.texture_pool, synth_pool)

    def build_a(i):
        seed = cfg.root_seed + i
        rng = np.random.default_rng(seed)
        object_id, mesh = items[int(rng.integers(len(items)))]
        center = control_points_3d(mesh).centroid
        pose = sample_pose(seed, cfg.distance_range, cfg.azimuth_range,
                           cfg.elevation_range, cfg.in_plane_range, k=k,
                           object_center=center)
        bg = pick_background(synth_pool, cfg.image_size, seed)
        render = rasterize(mesh, pose, k,
                           RenderConfig(mode=RandomTexture(textures), seed=seed))
        img = bg.copy()
        a = render.color[:, :, 3:4].astype(np.float64) / 255.0
        img = np.floor(a * render.color[:, :, :3] + (1 - a) * img + 0.5
                       ).astype(np.uint8)
        cp2d = project_control_points(control_points_3d(mesh), pose, k)
        ann = Annotation(object_id=object_id, pose=pose, intrinsics=k,
                         control_points_2d=cp2d,
                         image_size=(k.width, k.height), source_seed=seed)
        name = f"{i:06d}"
        save_image(img, out / "trainA" / f"{name}.png")
        ann.save(out / "ann" / f"{name}.json")
        return {"id": name, "image": f"trainA/{name}.png",
                "ann": f"ann/{name}.json", "annotation": ann.to_dict()}

    def build_b(i):
        seed = cfg.root_seed + n_per_domain + i
        img = pick_background(real_pool, cfg.image_size, seed)
        name = f"{i:06d}"
        save_image(img, out / "trainB" / f"{name}.png")
        return f"trainB/{name}.png"

    try:
        records_a = _run_jobs(build_a, n_per_domain, cfg.jobs)
        records_b = _run_jobs(build_b, n_per_domain, cfg.jobs)
        manifest = {
            "dataset_kind": UNPAIRED,
            "sample_count": n_per_domain,
            "image_size": [int(cfg.image_size[0]), int(cfg.image_size[1])],
            "domains": {
                "trainA": "randomly textured renders on synthetic backgrounds",
                "trainB": "real photo crops",
            },
            "generator_version": f"posegap {__version__}",
            "root_seed": int(cfg.root_seed),
            "config": cfg.echo(),
            "objects": _objects_entry(items),
            "records": records_a,
            "train_b": records_b,
        }
        return _write_manifest(out, manifest)
    except Exception:
        shutil.rmtree(out, ignore_errors=True)
        raise


def harvest_crops(spec: CropSpec, out_dir) -> BackgroundPool:
    """Write spec.count random square crops (resized to crop_size) from the
    frames under spec.source_dir into out_dir and return it as a pool."""
    frames = tuple(sorted(str(p) for p in Path(spec.source_dir).rglob("*")
                          if p.suffix.lower() in {".png", ".jpg", ".jpeg"}))
    if not frames:
        raise EmptySource(f"no frames under {spec.source_dir}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    size = spec.crop_size
    for i in range(spec.count):
        rng = np.random.default_rng(spec.seed + i)
        frame = load_image(frames[int(rng.integers(len(frames)))])
        h, w = frame.shape[:2]
        if min(h, w) < size:
            scale = size / min(h, w)
            nw = max(int(np.ceil(w * scale)), size)
            nh = max(int(np.ceil(h * scale)), size)
            frame = np.asarray(Image.fromarray(frame).resize((nw, nh),
                                                             Image.BILINEAR))
            h, w = frame.shape[:2]
        side = int(rng.integers(size, min(h, w) + 1))
        x0 = int(rng.integers(w - side + 1))
        y0 = int(rng.integers(h - side + 1))
        crop = frame[y0:y0 + side, x0:x0 + side]
        if side != size:
            crop = np.asarray(Image.fromarray(crop).resize((size, size),
                                                           Image.BILINEAR))
        save_image(crop, out / f"{i:06d}.png")
    if spec.count == 0:
        return BackgroundPool(source_dir=str(out), image_paths=(), kind="harvested")
    return BackgroundPool.from_dir(out, kind="harvested")


REPROJECTION_TOL_PX = 1e-2


def _check_annotation(record, root: Path, objects, image_size, violations):
    ann_rel = record.get("ann")
    ann_path = root / ann_rel
    if not ann_path.exists():
        violations.append(Violation("MissingFile", ann_rel, "annotation missing"))
        return
    try:
        ann = Annotation.load(ann_path)
    except (AnnotationError, ValueError) as exc:
        violations.append(Violation("AnnotationParse", ann_rel, str(exc)))
        return
    obj = objects.get(ann.object_id)
    if obj is None:
        violations.append(Violation("UnknownObject", ann_rel,
                                    f"object {ann.object_id!r} not in manifest"))
        return
    cp = ControlPoints3D(centroid=np.asarray(obj["centroid"]),
                         corners=np.asarray(obj["corners"]))
    try:
        expected = project_control_points(cp, ann.pose, ann.intrinsics)
    except ValueError as exc:
        violations.append(Violation("ReprojectionMismatch", ann_rel, str(exc)))
        return
    residual = np.linalg.norm(
        expected.points - ann.control_points_2d.points, axis=1).max()
    if residual > REPROJECTION_TOL_PX:
        violations.append(Violation(
            "ReprojectionMismatch", ann_rel,
            f"max residual {residual:.4g} px > {REPROJECTION_TOL_PX} px"))


def _check_image(rel, root: Path, image_size, violations):
    path = root / rel
    if not path.exists():
        violations.append(Violation("MissingFile", rel, "file missing"))
        return
    try:
        img = load_image(path)
    except DecodeError as exc:
        violations.append(Violation("DecodeFailure", rel, str(exc)))
        return
    h, w = img.shape[:2]
    if [w, h] != list(image_size):
        violations.append(Violation("SizeMismatch", rel,
                                    f"{w}x{h} != {image_size}"))


def load_manifest(manifest_path) -> dict:
    path = Path(manifest_path)
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, OSError) as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
    if "dataset_kind" not in manifest or "records" not in manifest:
        raise ManifestParseError(f"{path}: missing dataset_kind/records")
    return manifest


def validate(manifest_path) -> ValidationReport:
    """Check file existence, decodability, sizes, counts and annotation
    re-projection residuals for an emitted dataset."""
    path = Path(manifest_path)
    manifest = load_manifest(path)
    root = path.parent
    violations = []
    records = manifest["records"]
    objects = manifest.get("objects", {})
    image_size = manifest.get("image_size", [0, 0])
    if manifest.get("sample_count") != len(records):
        violations.append(Violation(
            "CountMismatch", "manifest.json",
            f"sample_count {manifest.get('sample_count')} != "
            f"{len(records)} records"))
    checked = 0
    for record in records:
        checked += 1
        for key in ("source", "target", "image"):
            if key in record:
                _check_image(record[key], root, image_size, violations)
        if "ann" in record:
            _check_annotation(record, root, objects, image_size, violations)
    for rel in manifest.get("train_b", []):
        checked += 1
        _check_image(rel, root, image_size, violations)
    return ValidationReport(manifest_path=str(path), checked=checked,
                            violations=violations)


def load_ground_truth(manifest_path):
    """(sample_id -> Annotation, object_id -> ControlPoints3D) from a manifest."""
    manifest = load_manifest(manifest_path)
    root = Path(manifest_path).parent
    gts = {}
    for record in manifest["records"]:
        if "annotation" in record:
            gts[record["id"]] = Annotation.from_dict(record["annotation"])
        elif "ann" in record:
            gts[record["id"]] = Annotation.load(root / record["ann"])
    cp3d = {oid: ControlPoints3D(centroid=np.asarray(o["centroid"]),
                                 corners=np.asarray(o["corners"]))
            for oid, o in manifest.get("objects", {}).items()}
    return gts, cp3d


def hash_tree(root) -> str:
    """SHA-256 over sorted relative paths and file contents of a directory."""
    root = Path(root)
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(b"\0")
        digest.update(path.read_bytes())
        digest.update(b"\0")
    return digest.hexdigest()
