"""Pose, camera and projection math shared by the rendering and evaluation pipelines.

All rotations are 3x3 matrices internally. Quaternions are accepted at IO
boundaries via :func:`rotation_from_quaternion`. The 9 control points of an
object are its bounding-box centroid followed by the 8 box corners in
lexicographic sign order (-,-,-), (-,-,+), ... (+,+,+).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHONORMALITY_TOL = 1e-6
MIN_DEPTH = 1e-9


class GeometryError(ValueError):
    pass


class NotARotation(GeometryError):
    pass


class NonPositiveDepth(GeometryError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class EmptyMesh(GeometryError):
    pass


def check_rotation(r) -> np.ndarray:
    """Validate and return a proper rotation matrix (orthonormal, det +1)."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise NotARotation(f"expected 3x3 matrix, got shape {r.shape}")
    if np.abs(r.T @ r - np.eye(3)).max() > ORTHONORMALITY_TOL:
        raise NotARotation("matrix is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > 1e-6:
        raise NotARotation("matrix determinant is not +1")
    return r


@dataclass(frozen=True)
class Pose:
    """Rigid transform of the object in the camera frame (meters)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = check_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise GeometryError("translation must be finite")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def apply(self, points) -> np.ndarray:
        """Map object-frame points (..., 3) into the camera frame."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole projection parameters, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise GeometryError("principal point outside image")


def default_intrinsics(width: int, height: int) -> CameraIntrinsics:
    """Centered principal point, ~53 deg horizontal field of view."""
    f = float(width)
    return CameraIntrinsics(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0,
                            width=width, height=height)


# Corner k has sign bits (k>>2, k>>1, k) & 1 selecting max (1) or min (0)
# per axis, so the order runs (-,-,-), (-,-,+), ... (+,+,+).
_CORNER_SIGNS = np.array([[(k >> 2) & 1, (k >> 1) & 1, k & 1] for k in range(8)])


@dataclass(frozen=True)
class ControlPoints3D:
    """Bounding-box centroid + 8 corners in the object frame (meters)."""

    centroid: np.ndarray
    corners: np.ndarray  # (8, 3), lexicographic sign order

    def __post_init__(self):
        object.__setattr__(self, "centroid",
                           np.asarray(self.centroid, dtype=np.float64).reshape(3))
        object.__setattr__(self, "corners",
                           np.asarray(self.corners, dtype=np.float64).reshape(8, 3))

    def stacked(self) -> np.ndarray:
        """(9, 3) array: centroid first, then the 8 corners."""
        return np.vstack([self.centroid[None, :], self.corners])


@dataclass(frozen=True)
class ControlPoints2D:
    """Projected control points in pixels, order [centroid, corner0..corner7]."""

    points: np.ndarray  # (9, 2)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.shape != (9, 2):
            raise GeometryError(f"expected 9 points, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise GeometryError("control points must be finite")
        object.__setattr__(self, "points", p)


def project_point(p, pose: Pose, k: CameraIntrinsics) -> np.ndarray:
    """Pinhole-project an object-frame point to pixel coordinates."""
    cam = pose.apply(np.asarray(p, dtype=np.float64).reshape(3))
    z = cam[2]
    if z <= MIN_DEPTH:
        raise NonPositiveDepth(f"point at camera depth {z:.3g}")
    return np.array([k.fx * cam[0] / z + k.cx, k.fy * cam[1] / z + k.cy])


def control_points_3d(mesh) -> ControlPoints3D:
    """AABB centroid + corners of a mesh (or a raw (N,3) vertex array)."""
    verts = np.asarray(getattr(mesh, "vertices", mesh), dtype=np.float64)
    if verts.size == 0:
        raise EmptyMesh("mesh has no vertices")
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    corners = np.where(_CORNER_SIGNS == 1, hi, lo)
    return ControlPoints3D(centroid=(lo + hi) / 2.0, corners=corners)


def project_control_points(cp: ControlPoints3D, pose: Pose,
                           k: CameraIntrinsics) -> ControlPoints2D:
    """Project all 9 control points, preserving order."""
    cam = pose.apply(cp.stacked())
    z = cam[:, 2]
    bad = np.nonzero(z <= MIN_DEPTH)[0]
    if bad.size:
        raise NonPositiveDepth(f"control point {bad[0]} at depth {z[bad[0]]:.3g}",
                               index=int(bad[0]))
    pts = np.stack([k.fx * cam[:, 0] / z + k.cx,
                    k.fy * cam[:, 1] / z + k.cy], axis=1)
    return ControlPoints2D(pts)


def rotation_angle_deg(r1, r2) -> float:
    """Geodesic angle between two rotations, in [0, 180] degrees."""
    r1 = check_rotation(r1)
    r2 = check_rotation(r2)
    # Clamp: numeric noise otherwise yields NaN at exactly 0/180 degrees.
    c = np.clip((np.trace(r1.T @ r2) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


def rotation_from_quaternion(q) -> np.ndarray:
    """Rotation matrix from a (w, x, y, z) quaternion; normalizes the input."""
    w, x, y, z = np.asarray(q, dtype=np.float64).reshape(4)
    n = np.sqrt(w * w + x * x + y * y + z * z)
    if n < 1e-12:
        raise NotARotation("zero quaternion")
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rot_x(deg: float) -> np.ndarray:
    a = np.radians(deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    a = np.radians(deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(deg: float) -> np.ndarray:
    a = np.radians(deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
