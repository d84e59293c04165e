"""Grayscale + Laplace transform into the reduced edge domain, and aligned
source/target pair construction for the four surface-mapping methods.

The discrete Laplacian uses the 4-neighbor stencil with replicate borders.
Signed responses are encoded to 8 bit as clamp(128 + raw/2), so zero
response maps to 128; the encoding is part of the dataset contract and is
echoed in every manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .annotations import Annotation
from .augment import composite
from .geometry import (CameraIntrinsics, Pose, control_points_3d,
                       project_control_points)
from .render import (Checkerboard, RandomTexture, RealTexture, RenderConfig,
                     UniformColor, rasterize, sample_lights)

LAPLACE_KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float32)

LAPLACE_ENCODING = {
    "kernel": "4-neighbor [[0,1,0],[1,-4,1],[0,1,0]]",
    "border": "replicate",
    "to_uint8": "clamp(floor(128 + raw/2 + 0.5), 0, 255)",
    "neutral": 128,
    "channels": "replicated to 3 on emission",
}


class EdgeError(ValueError):
    pass


class TooSmall(EdgeError):
    pass


@dataclass
class LaplaceImage:
    """8-bit normalized edge image plus the raw signed float responses."""

    gray8: np.ndarray  # (H, W) uint8
    raw: np.ndarray    # (H, W) float32


class PairMethod(IntEnum):
    REAL_TEXTURE = 1       # real texture on both sides
    RANDOM_TEXTURE = 2     # random texture on both sides
    UNIFORM_TO_GRAY = 3    # unlit gray source, point-lit gray target
    UNIFORM_TO_CHECKER = 4  # unlit gray source, checkerboard target


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma (0.299/0.587/0.114), rounded half-up to uint8."""
    rgb = img.astype(np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def laplace(img: np.ndarray) -> LaplaceImage:
    """4-neighbor Laplacian with replicate border handling."""
    if img.ndim != 2:
        raise EdgeError("laplace expects a single-channel image")
    h, w = img.shape
    if h < 3 or w < 3:
        raise TooSmall(f"image {w}x{h} smaller than the 3x3 kernel")
    raw = ndimage.convolve(img.astype(np.float32), LAPLACE_KERNEL,
                           mode="nearest")
    gray8 = np.clip(np.floor(128.0 + raw / 2.0 + 0.5), 0, 255).astype(np.uint8)
    return LaplaceImage(gray8=gray8, raw=raw)


def laplace_to_rgb(src: LaplaceImage) -> np.ndarray:
    """Replicate the 8-bit edge channel to 3 channels for GAN toolchains."""
    return np.repeat(src.gray8[:, :, None], 3, axis=2)


@dataclass(frozen=True)
class PairConfig:
    """Knobs for pair construction; the defaults are the documented ones."""

    seed: int = 0
    random_textures: tuple = ()          # pool for RANDOM_TEXTURE
    uniform_rgb: tuple = (128, 128, 128)
    checker: Checkerboard = field(default_factory=Checkerboard)
    light_count_range: tuple = (1, 3)
    light_radius_range: tuple = (0.5, 2.0)
    light_intensity_range: tuple = (0.4, 0.9)
    lit_ambient: float = 0.35


@dataclass
class PairSample:
    """Aligned (Laplace source, RGB target) pair with its ground truth."""

    source: LaplaceImage
    target: np.ndarray       # (H, W, 3) uint8
    annotation: Annotation
    mask: np.ndarray         # (H, W) bool render coverage of the target


def make_pair(mesh, pose: Pose, k: CameraIntrinsics, method: PairMethod,
              bg: np.ndarray, cfg: PairConfig,
              object_id: str = "object") -> PairSample:
    """Build one aligned pair: same pose, background and annotation on both
    sides; only the surface treatment differs per method."""
    method = PairMethod(method)
    unlit_gray = RenderConfig(mode=UniformColor(cfg.uniform_rgb), lights=(),
                              ambient=1.0, seed=cfg.seed)

    if method == PairMethod.REAL_TEXTURE:
        render = rasterize(mesh, pose, k, RenderConfig(mode=RealTexture(),
                                                       seed=cfg.seed))
        target = composite(render.color, bg)
        source = laplace(to_grayscale(target))
        mask = render.mask
    elif method == PairMethod.RANDOM_TEXTURE:
        mode = RandomTexture(tuple(cfg.random_textures))
        render = rasterize(mesh, pose, k, RenderConfig(mode=mode, seed=cfg.seed))
        target = composite(render.color, bg)
        source = laplace(to_grayscale(target))
        mask = render.mask
    else:
        src_render = rasterize(mesh, pose, k, unlit_gray)
        source = laplace(to_grayscale(composite(src_render.color, bg)))
        if method == PairMethod.UNIFORM_TO_GRAY:
            object_center = pose.apply(control_points_3d(mesh).centroid)
            lights = tuple(sample_lights(
                cfg.seed, cfg.light_count_range, cfg.light_radius_range,
                object_center=object_center,
                intensity_range=cfg.light_intensity_range))
            lit = RenderConfig(mode=UniformColor(cfg.uniform_rgb),
                               lights=lights, ambient=cfg.lit_ambient,
                               seed=cfg.seed)
            render = rasterize(mesh, pose, k, lit)
        else:  # UNIFORM_TO_CHECKER
            render = rasterize(mesh, pose, k,
                               RenderConfig(mode=cfg.checker, seed=cfg.seed))
        target = composite(render.color, bg)
        mask = render.mask

    cp2d = project_control_points(control_points_3d(mesh), pose, k)
    ann = Annotation(object_id=object_id, pose=pose, intrinsics=k,
                     control_points_2d=cp2d, image_size=(k.width, k.height),
                     source_seed=cfg.seed)
    return PairSample(source=source, target=target, annotation=ann, mask=mask)


def silhouette_iou(source: LaplaceImage, mask: np.ndarray,
                   threshold: float = 12.0) -> float:
    """Alignment gate: recover the object silhouette from the source's
    high-response region (close + fill holes) and intersect it with the
    render mask of the target."""
    edges = np.abs(source.raw) >= threshold
    # Close on a replicate-padded array: plain closing would erode away
    # border-touching contour pixels (outside the array counts as empty).
    pad = 3
    padded = np.pad(edges, pad, mode="edge")
    closed = ndimage.binary_closing(padded, structure=np.ones((3, 3), bool),
                                    iterations=2)[pad:-pad, pad:-pad]
    # An object cut by the frame leaves an open contour; close it along any
    # border side the edge map reaches so hole filling still works.
    if closed[:, 0].any():
        closed[:, 0] = True
    if closed[:, -1].any():
        closed[:, -1] = True
    if closed[0, :].any():
        closed[0, :] = True
    if closed[-1, :].any():
        closed[-1, :] = True
    filled = ndimage.binary_fill_holes(closed)
    union = np.logical_or(filled, mask).sum()
    if union == 0:
        return 0.0
    inter = np.logical_and(filled, mask).sum()
    return float(inter) / float(union)
