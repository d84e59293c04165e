"""Fixtures emit datasets through the posegap CLI as a subprocess, so these
tests exercise the published contract (manifest/annotation/PNG layouts)
rather than any in-process shortcut."""

import subprocess
import sys

import numpy as np
import pytest
from PIL import Image


def cube_obj_text(half=0.1):
    """Axis-aligned cube OBJ with outward CCW winding."""
    lines = [f"v {x} {y} {z}"
             for x in (-half, half) for y in (-half, half) for z in (-half, half)]
    quads = [(1, 2, 4, 3), (5, 7, 8, 6), (1, 5, 6, 2),
             (3, 4, 8, 7), (1, 3, 7, 5), (2, 6, 8, 4)]
    for a, b, c, d in quads:
        lines.append(f"f {a} {b} {c}")
        lines.append(f"f {a} {c} {d}")
    return "\n".join(lines) + "\n"


def write_backgrounds(root, count=5, size=96):
    root.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        rng = np.random.default_rng(700 + i)
        ramp = np.linspace(170, 250, size)[None, :].repeat(size, 0)
        img = np.stack([ramp, ramp * rng.uniform(0.85, 1.0),
                        np.full((size, size), rng.uniform(170, 250))], -1)
        Image.fromarray(img.astype(np.uint8)).save(root / f"bg_{i}.png")


def run_posegap(*argv):
    proc = subprocess.run([sys.executable, "-m", "posegap.cli", *argv],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def emit_method3(out_dir, bg_dir, mesh_path, count, seed):
    run_posegap("pairs", "--mesh", str(mesh_path), "--method", "3",
                "--count", str(count), "--backgrounds", str(bg_dir),
                "--out", str(out_dir), "--size", "64", "--seed", str(seed),
                "--distance", "0.5:1.0")
    return out_dir / "manifest.json"


@pytest.fixture(scope="session")
def cube_obj_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("mesh") / "cube.obj"
    path.write_text(cube_obj_text())
    return path


@pytest.fixture(scope="session")
def bg_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("backgrounds")
    write_backgrounds(root)
    return root


@pytest.fixture(scope="session")
def train_manifest(tmp_path_factory, cube_obj_path, bg_dir):
    """200-pair training fixture at the 64-pixel desk resolution."""
    out = tmp_path_factory.mktemp("datasets") / "train"
    return emit_method3(out, bg_dir, cube_obj_path, count=200, seed=1)


@pytest.fixture(scope="session")
def heldout_manifest(tmp_path_factory, cube_obj_path, bg_dir):
    """Disjoint 20-pair fixture (different root seed) for adaptation checks."""
    out = tmp_path_factory.mktemp("datasets") / "heldout"
    return emit_method3(out, bg_dir, cube_obj_path, count=20, seed=9000)


@pytest.fixture(scope="session")
def small_manifest(tmp_path_factory, cube_obj_path, bg_dir):
    """40-pair fixture for fast unit-level training runs."""
    out = tmp_path_factory.mktemp("datasets") / "small"
    return emit_method3(out, bg_dir, cube_obj_path, count=40, seed=500)
