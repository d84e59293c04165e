"""Software rasterizer: z-buffered, perspective-correct triangle rendering
of a mesh under a pose, with the four surface schemes (real texture, random
texture, uniform color, checkerboard) and optional point-light Lambert
shading. Also provides the seeded pose and light samplers used by the
dataset emitters.

All randomness flows from explicit integer seeds; a render is a pure
function of (mesh, pose, intrinsics, config).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assets import Mesh
from .geometry import (CameraIntrinsics, EmptyMesh, Pose, rot_x, rot_y, rot_z)

NEAR_PLANE = 0.01  # meters

DEFAULT_GRAY = (128, 128, 128)


class RenderError(ValueError):
    pass


class NothingVisible(RenderError):
    pass


class MissingTexture(RenderError):
    pass


@dataclass(frozen=True)
class RealTexture:
    """Use the texture shipped with the mesh."""


@dataclass(frozen=True)
class RandomTexture:
    """Texture the object with an image drawn from a pool by seed."""

    textures: tuple = ()  # tuple of (H, W, 3) uint8 arrays

    def __post_init__(self):
        if len(self.textures) == 0:
            raise RenderError("RandomTexture needs a non-empty texture pool")


@dataclass(frozen=True)
class UniformColor:
    rgb: tuple = DEFAULT_GRAY


@dataclass(frozen=True)
class Checkerboard:
    cells_per_uv: int = 8
    color_a: tuple = (0, 0, 0)
    color_b: tuple = (255, 255, 255)

    def __post_init__(self):
        if self.cells_per_uv < 1:
            raise RenderError("cells_per_uv must be >= 1")


@dataclass(frozen=True)
class PointLight:
    position: np.ndarray  # camera frame, meters
    intensity: float      # >= 0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(p)) and np.isfinite(self.intensity)
                and self.intensity >= 0):
            raise RenderError("light position/intensity must be finite, intensity >= 0")
        object.__setattr__(self, "position", p)


@dataclass(frozen=True)
class RenderConfig:
    mode: object = field(default_factory=UniformColor)
    lights: tuple = ()          # empty = unlit / albedo
    ambient: float = 1.0        # in [0, 1]
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.ambient <= 1.0):
            raise RenderError("ambient must be in [0, 1]")


@dataclass
class RenderOutput:
    color: np.ndarray  # (H, W, 4) uint8, alpha = coverage mask
    depth: np.ndarray  # (H, W) float32, +inf where empty

    @property
    def mask(self) -> np.ndarray:
        return self.color[:, :, 3] > 0


def _bilinear(tex: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Bilinear lookup with wrapping; texel centers at (i + 0.5) / size."""
    h, w = tex.shape[:2]
    u = uv[..., 0] - np.floor(uv[..., 0])
    v = uv[..., 1] - np.floor(uv[..., 1])
    x = u * w - 0.5
    y = v * h - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    x0m, x1m = x0 % w, (x0 + 1) % w
    y0m, y1m = y0 % h, (y0 + 1) % h
    t = tex.astype(np.float64)
    out = (t[y0m, x0m] * ((1 - fx) * (1 - fy))[..., None]
           + t[y0m, x1m] * (fx * (1 - fy))[..., None]
           + t[y1m, x0m] * ((1 - fx) * fy)[..., None]
           + t[y1m, x1m] * (fx * fy)[..., None])
    return out


def _albedo(mode, uv: np.ndarray, texture) -> np.ndarray:
    """Vectorized per-fragment albedo in float [0, 255], shape (..., 3)."""
    if isinstance(mode, UniformColor):
        return np.broadcast_to(np.asarray(mode.rgb, dtype=np.float64),
                               uv.shape[:-1] + (3,)).copy()
    if isinstance(mode, Checkerboard):
        n = mode.cells_per_uv
        u = uv[..., 0] - np.floor(uv[..., 0])
        v = uv[..., 1] - np.floor(uv[..., 1])
        parity = (np.floor(u * n) + np.floor(v * n)).astype(np.int64) % 2
        a = np.asarray(mode.color_a, dtype=np.float64)
        b = np.asarray(mode.color_b, dtype=np.float64)
        return np.where(parity[..., None] == 0, a, b)
    if isinstance(mode, (RealTexture, RandomTexture)):
        if texture is None:
            raise MissingTexture("surface mode requires a texture")
        return _bilinear(texture, uv)
    raise RenderError(f"unknown surface mode: {mode!r}")


def sample_surface(mode, uv, seed: int = 0, texture=None) -> np.ndarray:
    """Albedo color for a single UV coordinate, as uint8 RGB.

    For RandomTexture the pool entry is selected by seed; for RealTexture
    pass the mesh texture explicitly.
    """
    uv = np.asarray(uv, dtype=np.float64).reshape(1, 2)
    if isinstance(mode, RandomTexture):
        texture = _pick_texture(mode, seed)
    rgb = _albedo(mode, uv, texture)[0]
    return np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)


def _pick_texture(mode: RandomTexture, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return mode.textures[int(rng.integers(len(mode.textures)))]


def shade_lambert(albedo, point, normal, lights, ambient) -> np.ndarray:
    """Lambert shading with inverse-square falloff, returned as uint8 RGB."""
    rgb = _shade(np.asarray(albedo, dtype=np.float64).reshape(1, 3),
                 np.asarray(point, dtype=np.float64).reshape(1, 3),
                 np.asarray(normal, dtype=np.float64).reshape(1, 3),
                 lights, ambient)[0]
    return np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)


def _shade(albedo, points, normals, lights, ambient) -> np.ndarray:
    """Vectorized shading; albedo/points/normals are (K, 3) float."""
    factor = np.full(len(points), float(ambient))
    for light in lights:
        to_light = light.position[None, :] - points
        d2 = np.einsum("ij,ij->i", to_light, to_light)
        # Zero-distance lights clamp to full intensity instead of dividing
        # by zero; the final [0, 1] clamp bounds them anyway.
        d2 = np.maximum(d2, 1e-12)
        ndotl = np.einsum("ij,ij->i", normals, to_light) / np.sqrt(d2)
        factor += light.intensity * np.maximum(ndotl, 0.0) / d2
    return albedo * np.clip(factor, 0.0, 1.0)[:, None]


def _clip_near(tri):
    """Sutherland-Hodgman clip of one attribute-carrying triangle against
    the z = NEAR_PLANE plane. tri is (3, C) with camera-space xyz in the
    first three columns; returns a list of (3, C) triangles."""
    inside = tri[:, 2] >= NEAR_PLANE
    if inside.all():
        return [tri]
    if not inside.any():
        return []
    out = []
    poly = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        if inside[i]:
            poly.append(a)
        if inside[i] != inside[(i + 1) % 3]:
            t = (NEAR_PLANE - a[2]) / (b[2] - a[2])
            poly.append(a + t * (b - a))
    for i in range(1, len(poly) - 1):
        out.append(np.stack([poly[0], poly[i], poly[i + 1]]))
    return out


def rasterize(mesh: Mesh, pose: Pose, k: CameraIntrinsics,
              cfg: RenderConfig) -> RenderOutput:
    """Render the mesh into a (k.height, k.width) RGBA + depth buffer.

    Back faces are culled, triangles crossing the near plane are clipped,
    attributes (UV, normal, position) are interpolated perspective-correct,
    and a nearest-wins float32 z-buffer resolves occlusion.
    """
    if len(mesh.vertices) == 0 or len(mesh.faces) == 0:
        raise EmptyMesh("cannot rasterize an empty mesh")
    if k.width < 16 or k.height < 16:
        raise RenderError("image size must be at least 16x16")

    w, h = k.width, k.height
    verts_cam = pose.apply(mesh.vertices)
    normals_cam = mesh.normals @ pose.rotation.T

    depth = np.full((h, w), np.inf, dtype=np.float32)
    uv_buf = np.zeros((h, w, 2))
    n_buf = np.zeros((h, w, 3))
    p_buf = np.zeros((h, w, 3))

    for face in mesh.faces:
        pos = verts_cam[face[:, 0]]
        nrm = normals_cam[face[:, 1]]
        uv = mesh.uvs[face[:, 2]]
        packed = np.hstack([pos, nrm, uv])  # (3, 8)
        for tri in _clip_near(packed):
            p3 = tri[:, 0:3]
            # Back-face test in camera space: keep faces whose geometric
            # normal points toward the camera at the origin.
            gn = np.cross(p3[1] - p3[0], p3[2] - p3[0])
            if np.dot(gn, p3[0]) >= 0:
                continue
            z = p3[:, 2]
            sx = k.fx * p3[:, 0] / z + k.cx
            sy = k.fy * p3[:, 1] / z + k.cy
            x_lo = max(int(np.floor(sx.min() - 0.5)), 0)
            x_hi = min(int(np.ceil(sx.max() - 0.5)) + 1, w)
            y_lo = max(int(np.floor(sy.min() - 0.5)), 0)
            y_hi = min(int(np.ceil(sy.max() - 0.5)) + 1, h)
            if x_lo >= x_hi or y_lo >= y_hi:
                continue
            px, py = np.meshgrid(np.arange(x_lo, x_hi) + 0.5,
                                 np.arange(y_lo, y_hi) + 0.5)
            e01 = (sx[1] - sx[0]) * (py - sy[0]) - (sy[1] - sy[0]) * (px - sx[0])
            e12 = (sx[2] - sx[1]) * (py - sy[1]) - (sy[2] - sy[1]) * (px - sx[1])
            e20 = (sx[0] - sx[2]) * (py - sy[2]) - (sy[0] - sy[2]) * (px - sx[2])
            area = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sy[1] - sy[0]) * (sx[2] - sx[0])
            if area == 0:
                continue
            if area > 0:
                covered = (e01 >= 0) & (e12 >= 0) & (e20 >= 0)
            else:
                covered = (e01 <= 0) & (e12 <= 0) & (e20 <= 0)
            if not covered.any():
                continue
            l0 = e12[covered] / area
            l1 = e20[covered] / area
            l2 = e01[covered] / area
            invz = 1.0 / z
            denom = l0 * invz[0] + l1 * invz[1] + l2 * invz[2]
            frag_z = (1.0 / denom).astype(np.float32)
            ys, xs = np.nonzero(covered)
            ys = ys + y_lo
            xs = xs + x_lo
            nearer = frag_z < depth[ys, xs]
            if not nearer.any():
                continue
            ys, xs = ys[nearer], xs[nearer]
            frag_z = frag_z[nearer]
            lw = np.stack([l0[nearer] * invz[0], l1[nearer] * invz[1],
                           l2[nearer] * invz[2]], axis=1) * frag_z[:, None]
            depth[ys, xs] = frag_z
            uv_buf[ys, xs] = lw @ tri[:, 6:8]
            n_buf[ys, xs] = lw @ tri[:, 3:6]
            p_buf[ys, xs] = lw @ tri[:, 0:3]

    mask = np.isfinite(depth)
    if not mask.any():
        raise NothingVisible("no covered pixels; object behind camera or off-frame")

    texture = None
    if isinstance(cfg.mode, RealTexture):
        if mesh.texture is None:
            raise MissingTexture("RealTexture mode needs mesh.texture")
        texture = mesh.texture
    elif isinstance(cfg.mode, RandomTexture):
        texture = _pick_texture(cfg.mode, cfg.seed)

    uv = uv_buf[mask]
    nrm = n_buf[mask]
    length = np.linalg.norm(nrm, axis=1, keepdims=True)
    length[length < 1e-20] = 1.0
    nrm = nrm / length
    albedo = _albedo(cfg.mode, uv, texture)
    shaded = _shade(albedo, p_buf[mask], nrm, cfg.lights, cfg.ambient)

    color = np.zeros((h, w, 4), dtype=np.uint8)
    color[mask, 0:3] = np.clip(np.floor(shaded + 0.5), 0, 255).astype(np.uint8)
    color[mask, 3] = 255
    return RenderOutput(color=color, depth=depth)


def sample_lights(seed: int, count_range=(1, 3), radius_range=(0.5, 2.0),
                  object_center=(0.0, 0.0, 0.0),
                  intensity_range=(0.5, 1.5)) -> list[PointLight]:
    """Random point lights on spherical shells around the object center.

    Intensities are drawn from intensity_range and multiplied by r^2 so the
    irradiance arriving at the object is roughly distance-independent.
    """
    cmin, cmax = count_range
    rmin, rmax = radius_range
    if not (1 <= cmin <= cmax):
        raise RenderError("invalid light count range")
    if not (0 < rmin <= rmax):
        raise RenderError("invalid light radius range")
    center = np.asarray(object_center, dtype=np.float64).reshape(3)
    rng = np.random.default_rng(seed)
    count = int(rng.integers(cmin, cmax + 1))
    lights = []
    for _ in range(count):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        r = rng.uniform(rmin, rmax)
        intensity = rng.uniform(*intensity_range) * r * r
        lights.append(PointLight(position=center + r * direction,
                                 intensity=intensity))
    return lights


def sample_pose(seed: int, distance_range=(0.6, 1.4),
                azimuth_range=(0.0, 360.0), elevation_range=(-60.0, 60.0),
                in_plane_range=(-180.0, 180.0),
                k: CameraIntrinsics | None = None,
                object_center=(0.0, 0.0, 0.0),
                center_margin: float = 0.8) -> Pose:
    """Seeded camera-facing pose: uniform azimuth/elevation/in-plane rotation
    and a translation putting the object center at the sampled distance.

    With intrinsics given, the projected center lands uniformly inside the
    central center_margin fraction of the frame; otherwise on the optical
    axis.
    """
    rng = np.random.default_rng(seed)
    azimuth = rng.uniform(*azimuth_range)
    elevation = rng.uniform(*elevation_range)
    in_plane = rng.uniform(*in_plane_range)
    distance = rng.uniform(*distance_range)
    rotation = rot_z(in_plane) @ rot_x(elevation) @ rot_y(azimuth)
    if k is None:
        cam_pt = np.array([0.0, 0.0, distance])
    else:
        mx = (1.0 - center_margin) / 2.0
        px = rng.uniform(mx * k.width, (1.0 - mx) * k.width)
        py = rng.uniform(mx * k.height, (1.0 - mx) * k.height)
        cam_pt = np.array([(px - k.cx) * distance / k.fx,
                           (py - k.cy) * distance / k.fy,
                           distance])
    center = np.asarray(object_center, dtype=np.float64).reshape(3)
    translation = cam_pt - rotation @ center
    return Pose(rotation=rotation, translation=translation)
