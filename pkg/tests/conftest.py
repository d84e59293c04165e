import numpy as np
import pytest

from posegap.assets import load_mesh, save_image
from posegap.geometry import default_intrinsics


def cube_obj_text(half=0.1):
    """Axis-aligned cube OBJ with outward CCW winding, no normals/uvs."""
    lines = [f"v {x} {y} {z}"
             for x in (-half, half) for y in (-half, half) for z in (-half, half)]
    quads = [(1, 2, 4, 3), (5, 7, 8, 6), (1, 5, 6, 2),
             (3, 4, 8, 7), (1, 3, 7, 5), (2, 6, 8, 4)]
    for a, b, c, d in quads:
        lines.append(f"f {a} {b} {c}")
        lines.append(f"f {a} {c} {d}")
    return "\n".join(lines) + "\n"


def gradient_image(width, height, seed=0, lo=160, hi=250):
    """Smooth background with luma well away from the mid-gray object color."""
    rng = np.random.default_rng(seed)
    ramp = np.linspace(lo, hi, width)[None, :].repeat(height, 0)
    if rng.integers(2):
        ramp = ramp[:, ::-1]
    r = ramp
    g = lo + (ramp - lo) * rng.uniform(0.6, 1.0)
    b = np.full((height, width), rng.uniform(lo, hi))
    return np.clip(np.stack([r, g, b], -1), 0, 255).astype(np.uint8)


@pytest.fixture(scope="session")
def cube_obj_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("mesh") / "cube.obj"
    path.write_text(cube_obj_text(half=0.1))
    return path


@pytest.fixture(scope="session")
def cube_mesh(cube_obj_path):
    return load_mesh(cube_obj_path)


@pytest.fixture(scope="session")
def bg_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("backgrounds")
    for i in range(5):
        save_image(gradient_image(320, 280, seed=100 + i), root / f"bg_{i}.png")
    return root


@pytest.fixture(scope="session")
def frames_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("frames")
    for i in range(5):
        save_image(gradient_image(480, 360, seed=200 + i), root / f"frame_{i}.png")
    return root


@pytest.fixture
def k256():
    return default_intrinsics(256, 256)


@pytest.fixture
def k128():
    return default_intrinsics(128, 128)
