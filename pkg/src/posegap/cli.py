"""Command-line entry point exposing the pipeline as subcommands.

Exit codes: 0 success, 1 validation failure, 2 usage/config error, 3 IO
error. Progress goes to stderr; machine-readable output only to files.

A JSON config file (--config) may pre-set any flag by its long name with
dashes replaced by underscores; explicit flags win over the config file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assets import load_mesh, save_image
from .augment import BackgroundPool, REAL_PHOTOS, SYNTHETIC_GAME
from .dataset import (CropSpec, EmitConfig, emit_paired, emit_unpaired,
                      harvest_crops, load_ground_truth, validate)
from .edges import PairMethod
from .evaluate import (aggregate, load_predictions, render_table, save_figures,
                       write_csv)
from .geometry import control_points_3d, default_intrinsics, project_control_points
from .annotations import Annotation
from .render import (Checkerboard, RandomTexture, RealTexture, RenderConfig,
                     UniformColor, rasterize, sample_lights, sample_pose)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_IO = 3

_UNITS = {"m": 1.0, "mm": 1e-3}


class CliError(ValueError):
    pass


def _parse_size(text) -> tuple:
    try:
        if "x" in text:
            w, h = text.lower().split("x")
            return int(w), int(h)
        v = int(text)
        return v, v
    except ValueError as exc:
        raise CliError(f"bad size {text!r}, expected WxH") from exc


def _parse_range(text) -> tuple:
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return float(lo), float(hi)
        v = float(text)
        return v, v
    except ValueError as exc:
        raise CliError(f"bad range {text!r}, expected lo:hi") from exc


def _load_meshes(paths, units):
    scale = _UNITS[units]
    meshes = {}
    for path in paths:
        meshes[Path(path).stem] = load_mesh(path, scale=scale)
    return meshes


def _emit_config(args, default_size) -> EmitConfig:
    texture_pool = None
    if getattr(args, "textures", None):
        texture_pool = BackgroundPool.from_dir(args.textures)
    return EmitConfig(
        image_size=_parse_size(args.size) if args.size else default_size,
        root_seed=args.seed,
        jobs=args.jobs,
        distance_range=_parse_range(args.distance),
        texture_pool=texture_pool,
    )


def _add_common(p, default_size):
    p.add_argument("--config", help="JSON file pre-setting any flag")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--size", default=None,
                   help=f"output size WxH (default {default_size})")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers (output is independent of this)")
    p.add_argument("--distance", default="0.6:1.4",
                   help="object distance range in meters, lo:hi")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posegap",
        description="Synthetic pose training data factory and evaluator")
    parser.add_argument("--version", action="version",
                        version=f"posegap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one annotated frame")
    p.add_argument("--mesh", required=True, help="OBJ or ascii PLY file")
    p.add_argument("--units", choices=sorted(_UNITS), default="m",
                   help="mesh file units")
    p.add_argument("--texture", help="texture image for realtex mode")
    p.add_argument("--mode", choices=["realtex", "randtex", "uniform", "checker"],
                   default="uniform", help="surface mode")
    p.add_argument("--textures", help="texture pool directory for randtex")
    p.add_argument("--backgrounds",
                   help="background directory; when set the render is "
                        "composited to RGB instead of RGBA")
    p.add_argument("--lit", action="store_true",
                   help="add seeded random point lights")
    p.add_argument("--out", required=True,
                   help="output prefix; writes <out>.png and <out>.json")
    _add_common(p, (416, 416))

    p = sub.add_parser("pairs", help="emit a paired translation dataset")
    p.add_argument("--mesh", action="append", required=True,
                   help="mesh file (repeatable)")
    p.add_argument("--units", choices=sorted(_UNITS), default="m")
    p.add_argument("--method", type=int, choices=[1, 2, 3, 4], required=True,
                   help="1 realtex, 2 randtex, 3 uniform-to-gray, "
                        "4 uniform-to-checker")
    p.add_argument("--count", type=int, required=True, help="pair count")
    p.add_argument("--backgrounds", required=True,
                   help="background image directory")
    p.add_argument("--textures", help="texture pool for method 2 "
                                      "(defaults to the background pool)")
    p.add_argument("--out", required=True, help="output dataset directory")
    _add_common(p, (416, 416))

    p = sub.add_parser("unpaired", help="emit an unpaired translation dataset")
    p.add_argument("--mesh", action="append", required=True)
    p.add_argument("--units", choices=sorted(_UNITS), default="m")
    p.add_argument("--count", type=int, required=True,
                   help="samples per domain")
    p.add_argument("--real", required=True, help="real photo directory (trainB)")
    p.add_argument("--synthetic", required=True,
                   help="synthetic background directory (trainA backdrop)")
    p.add_argument("--textures", help="texture pool for the renders")
    p.add_argument("--out", required=True)
    _add_common(p, (256, 256))

    p = sub.add_parser("harvest", help="harvest random background crops")
    p.add_argument("--src", required=True, help="directory of frames")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--crop-size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file pre-setting any flag")
    p.add_argument("--out", required=True, help="output pool directory")

    p = sub.add_parser("validate", help="validate an emitted dataset")
    p.add_argument("manifest", help="path to manifest.json")
    p.add_argument("--config", help="JSON file pre-setting any flag")

    p = sub.add_parser("evaluate", help="score predictions against a dataset")
    p.add_argument("--pred", required=True, help="JSON-lines predictions file")
    p.add_argument("--gt", required=True, help="ground-truth manifest.json")
    p.add_argument("--label", default="run", help="row label in the report")
    p.add_argument("--report-dir",
                   help="write report.csv, table.txt and metric figures here")
    p.add_argument("--config", help="JSON file pre-setting any flag")
    return parser


def _apply_config(args, argv):
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config) as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(overrides, dict):
        raise CliError("config file must hold a JSON object")
    argv_flags = {a.lstrip("-").replace("-", "_").split("=")[0]
                  for a in argv if a.startswith("--")}
    for key, value in overrides.items():
        key = key.replace("-", "_")
        if hasattr(args, key) and key not in argv_flags:
            setattr(args, key, value)


def _cmd_render(args) -> int:
    mesh = load_mesh(args.mesh, scale=_UNITS[args.units],
                     texture_path=args.texture)
    size = _parse_size(args.size) if args.size else (416, 416)
    k = default_intrinsics(*size)
    if args.mode == "realtex":
        mode = RealTexture()
    elif args.mode == "randtex":
        if not args.textures:
            raise CliError("randtex mode needs --textures")
        pool = BackgroundPool.from_dir(args.textures)
        from .assets import load_image
        mode = RandomTexture(tuple(load_image(p) for p in pool.image_paths))
    elif args.mode == "checker":
        mode = Checkerboard()
    else:
        mode = UniformColor()
    cp = control_points_3d(mesh)
    pose = sample_pose(args.seed, _parse_range(args.distance), k=k,
                       object_center=cp.centroid)
    lights = ()
    ambient = 1.0
    if args.lit:
        center = pose.apply(cp.centroid)
        lights = tuple(sample_lights(args.seed, object_center=center))
        ambient = 0.35
    render = rasterize(mesh, pose, k,
                       RenderConfig(mode=mode, lights=lights, ambient=ambient,
                                    seed=args.seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.backgrounds:
        from .augment import composite, pick_background
        bg = pick_background(BackgroundPool.from_dir(args.backgrounds),
                             size, args.seed)
        save_image(composite(render.color, bg), f"{out}.png")
    else:
        save_image(render.color, f"{out}.png")
    ann = Annotation(object_id=Path(args.mesh).stem, pose=pose, intrinsics=k,
                     control_points_2d=project_control_points(cp, pose, k),
                     image_size=size, source_seed=args.seed)
    ann.save(f"{out}.json")
    print(f"wrote {out}.png and {out}.json", file=sys.stderr)
    return EXIT_OK


def _cmd_pairs(args) -> int:
    meshes = _load_meshes(args.mesh, args.units)
    bg_pool = BackgroundPool.from_dir(args.backgrounds)
    cfg = _emit_config(args, (416, 416))
    manifest = emit_paired(meshes, PairMethod(args.method), args.count,
                           bg_pool, cfg, args.out)
    print(f"wrote {manifest}", file=sys.stderr)
    return EXIT_OK


def _cmd_unpaired(args) -> int:
    meshes = _load_meshes(args.mesh, args.units)
    real_pool = BackgroundPool.from_dir(args.real, kind=REAL_PHOTOS)
    synth_pool = BackgroundPool.from_dir(args.synthetic, kind=SYNTHETIC_GAME)
    cfg = _emit_config(args, (256, 256))
    manifest = emit_unpaired(meshes, args.count, real_pool, synth_pool,
                             cfg, args.out)
    print(f"wrote {manifest}", file=sys.stderr)
    return EXIT_OK


def _cmd_harvest(args) -> int:
    spec = CropSpec(source_dir=args.src, count=args.count,
                    crop_size=args.crop_size, seed=args.seed)
    pool = harvest_crops(spec, args.out)
    print(f"harvested {len(pool.image_paths)} crops into {args.out}",
          file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args) -> int:
    report = validate(args.manifest)
    print(report.summary(), file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _cmd_evaluate(args) -> int:
    gts, cp3d = load_ground_truth(args.gt)
    preds = load_predictions(args.pred)
    report = aggregate(preds, gts, cp3d)
    rows = [(args.label, report)]
    table = render_table(rows)
    print(table)
    if args.report_dir:
        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(rows, out / "report.csv")
        (out / "table.txt").write_text(table + "\n")
        save_figures(rows, out)
        print(f"report written to {out}", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "render": _cmd_render,
    "pairs": _cmd_pairs,
    "unpaired": _cmd_unpaired,
    "harvest": _cmd_harvest,
    "validate": _cmd_validate,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(argv)
    try:
        _apply_config(args, argv)
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
