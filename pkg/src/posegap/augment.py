"""Background selection, alpha compositing and randomized augmentation.

Augmentation applies whole-frame scale jitter plus
multiplicative exposure (HSV value) and saturation jitter. Annotations are
kept consistent by applying the same similarity to the 2D control points
and dividing the pose's z translation by the scale factor (a documented
approximation, exact for a centered principal point).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from .annotations import Annotation
from .assets import DecodeError, load_image
from .geometry import ControlPoints2D, Pose

REAL_PHOTOS = "real_photos"
SYNTHETIC_GAME = "synthetic_game"

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


class AugmentError(ValueError):
    pass


class EmptyPool(AugmentError):
    pass


class SizeMismatch(AugmentError):
    pass


@dataclass(frozen=True)
class BackgroundPool:
    """Read-only directory of background images.

    Paths are discovered recursively and sorted lexicographically; the
    ordering is part of the determinism contract.
    """

    source_dir: str
    image_paths: tuple
    kind: str = REAL_PHOTOS

    @staticmethod
    def from_dir(source_dir, kind: str = REAL_PHOTOS) -> "BackgroundPool":
        from pathlib import Path
        root = Path(source_dir)
        paths = tuple(sorted(str(p) for p in root.rglob("*")
                             if p.suffix.lower() in _IMAGE_SUFFIXES))
        if not paths:
            raise EmptyPool(f"no images under {source_dir}")
        return BackgroundPool(source_dir=str(root), image_paths=paths, kind=kind)

    def __len__(self):
        return len(self.image_paths)


@dataclass(frozen=True)
class AugmentParams:
    scale_range: tuple = (0.75, 1.25)
    exposure_range: tuple = (0.67, 1.5)
    saturation_range: tuple = (0.67, 1.5)
    seed: int = 0

    def __post_init__(self):
        for lo, hi in (self.scale_range, self.exposure_range,
                       self.saturation_range):
            if not (0 < lo <= hi):
                raise AugmentError("ranges must be positive with min <= max")

    @staticmethod
    def identity(seed: int = 0) -> "AugmentParams":
        return AugmentParams((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), seed)


def pick_background(pool: BackgroundPool, target_size, seed: int) -> np.ndarray:
    """Uniformly chosen pool image, randomly cropped to (width, height).

    Images smaller than the target are scaled up first.
    """
    if len(pool) == 0:
        raise EmptyPool("background pool is empty")
    tw, th = target_size
    rng = np.random.default_rng(seed)
    path = pool.image_paths[int(rng.integers(len(pool)))]
    img = load_image(path)
    h, w = img.shape[:2]
    if w < tw or h < th:
        scale = max(tw / w, th / h)
        nw, nh = max(int(np.ceil(w * scale)), tw), max(int(np.ceil(h * scale)), th)
        img = np.asarray(Image.fromarray(img).resize((nw, nh), Image.BILINEAR))
        h, w = img.shape[:2]
    x0 = int(rng.integers(w - tw + 1))
    y0 = int(rng.integers(h - th + 1))
    return img[y0:y0 + th, x0:x0 + tw].copy()


def composite(fg: np.ndarray, bg: np.ndarray) -> np.ndarray:
    """Alpha-blend an RGBA foreground over an RGB background (half-up rounding)."""
    if fg.shape[:2] != bg.shape[:2]:
        raise SizeMismatch(f"foreground {fg.shape[:2]} vs background {bg.shape[:2]}")
    a = fg[:, :, 3:4].astype(np.float64) / 255.0
    out = a * fg[:, :, 0:3].astype(np.float64) + (1.0 - a) * bg.astype(np.float64)
    return np.floor(out + 0.5).astype(np.uint8)


def _rgb_to_hsv(rgb: np.ndarray):
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    diff = mx - mn
    s = np.where(mx > 0, diff / np.maximum(mx, 1e-12), 0.0)
    safe = np.maximum(diff, 1e-12)
    h = np.zeros_like(mx)
    h = np.where(mx == r, ((g - b) / safe) % 6.0, h)
    h = np.where(mx == g, (b - r) / safe + 2.0, h)
    h = np.where(mx == b, (r - g) / safe + 4.0, h)
    h = np.where(diff == 0, 0.0, h) / 6.0
    return h, s, mx


def _hsv_to_rgb(h, s, v):
    i = np.floor(h * 6.0) % 6.0
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    r = np.select([i == 0, i == 1, i == 2, i == 3, i == 4], [v, q, p, p, t], v)
    g = np.select([i == 0, i == 1, i == 2, i == 3, i == 4], [t, v, v, q, p], p)
    b = np.select([i == 0, i == 1, i == 2, i == 3, i == 4], [p, p, t, v, v], q)
    return np.stack([r, g, b], axis=-1)


def adjust_hsv(img: np.ndarray, exposure: float, saturation: float) -> np.ndarray:
    """Multiply HSV value by exposure and saturation by the given factor,
    clamped to range. Identity factors return the input unchanged."""
    if exposure == 1.0 and saturation == 1.0:
        return img
    rgb = img.astype(np.float64) / 255.0
    h, s, v = _rgb_to_hsv(rgb)
    s = np.clip(s * saturation, 0.0, 1.0)
    v = np.clip(v * exposure, 0.0, 1.0)
    out = _hsv_to_rgb(h, s, v) * 255.0
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def _scale_about_center(img: np.ndarray, s: float) -> np.ndarray:
    """Bilinear whole-frame scale about the image center, cropped/padded
    back to the original size (black border when shrinking)."""
    if s == 1.0:
        return img
    h, w = img.shape[:2]
    nw, nh = max(int(round(w * s)), 1), max(int(round(h * s)), 1)
    scaled = np.asarray(Image.fromarray(img).resize((nw, nh), Image.BILINEAR))
    out = np.zeros_like(img)
    sx = max((nw - w) // 2, 0)
    sy = max((nh - h) // 2, 0)
    dx = max((w - nw) // 2, 0)
    dy = max((h - nh) // 2, 0)
    cw = min(w, nw)
    ch = min(h, nh)
    out[dy:dy + ch, dx:dx + cw] = scaled[sy:sy + ch, sx:sx + cw]
    return out


def augment(img: np.ndarray, ann: Annotation,
            p: AugmentParams) -> tuple[np.ndarray, Annotation]:
    """Apply seeded scale/exposure/saturation jitter and keep the annotation
    projection-consistent. Identity parameters are a byte-exact no-op."""
    rng = np.random.default_rng(p.seed)
    s = float(rng.uniform(*p.scale_range))
    e = float(rng.uniform(*p.exposure_range))
    t = float(rng.uniform(*p.saturation_range))

    out = _scale_about_center(img, s)
    out = adjust_hsv(out, e, t)

    if s == 1.0:
        return out, ann
    h, w = img.shape[:2]
    center = np.array([w / 2.0, h / 2.0])
    pts = center + s * (ann.control_points_2d.points - center)
    pose = Pose(rotation=ann.pose.rotation,
                translation=ann.pose.translation * np.array([1.0, 1.0, 1.0 / s]))
    new_ann = replace(ann, control_points_2d=ControlPoints2D(pts), pose=pose)
    return out, new_ann
