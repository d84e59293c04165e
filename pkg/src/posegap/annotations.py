"""Per-image ground truth record and its JSON (de)serialization.

Rotations serialize as nested 3x3 row lists; a "quaternion" key (w, x, y, z)
is accepted on input and converted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .geometry import (CameraIntrinsics, ControlPoints2D, Pose,
                       rotation_from_quaternion)


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class Annotation:
    object_id: str
    pose: Pose
    intrinsics: CameraIntrinsics
    control_points_2d: ControlPoints2D
    image_size: tuple  # (width, height)
    source_seed: int

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "rotation": self.pose.rotation.tolist(),
            "translation": self.pose.translation.tolist(),
            "intrinsics": {
                "fx": self.intrinsics.fx, "fy": self.intrinsics.fy,
                "cx": self.intrinsics.cx, "cy": self.intrinsics.cy,
                "width": self.intrinsics.width, "height": self.intrinsics.height,
            },
            "control_points_2d": self.control_points_2d.points.tolist(),
            "image_size": list(self.image_size),
            "source_seed": int(self.source_seed),
        }

    @staticmethod
    def from_dict(d: dict) -> "Annotation":
        try:
            if "quaternion" in d:
                rotation = rotation_from_quaternion(d["quaternion"])
            else:
                rotation = np.asarray(d["rotation"], dtype=np.float64)
            pose = Pose(rotation=rotation, translation=d["translation"])
            ki = d["intrinsics"]
            intrinsics = CameraIntrinsics(fx=ki["fx"], fy=ki["fy"],
                                          cx=ki["cx"], cy=ki["cy"],
                                          width=int(ki["width"]),
                                          height=int(ki["height"]))
            return Annotation(
                object_id=str(d["object_id"]),
                pose=pose,
                intrinsics=intrinsics,
                control_points_2d=ControlPoints2D(np.asarray(d["control_points_2d"])),
                image_size=tuple(int(v) for v in d["image_size"]),
                source_seed=int(d.get("source_seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise AnnotationError(f"malformed annotation: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @staticmethod
    def load(path) -> "Annotation":
        with open(path) as fh:
            try:
                return Annotation.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise AnnotationError(f"{path}: {exc}") from exc

    def with_(self, **kwargs) -> "Annotation":
        return replace(self, **kwargs)
