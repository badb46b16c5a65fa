"""Command-line entry point.

Thin adapters only: every subcommand validates arguments, calls the library,
and prints one JSON document to stdout. Progress and diagnostics go to
stderr. Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .dataset import (GammaSpec, apply_split, build_collection,
                      build_colon_model, desk_plan, full_plan, generate_video,
                      load_depth_png, load_manifest, load_rgb_png,
                      split_collection)
from .levels import level_config
from .loss import SIGMA, total_loss
from .metrics import evaluate_depth
from .rawio import load_raw
from .reconstruct import backproject, export_ply, export_surface
from .render import MAX_DEPTH_CM, DepthMap, RgbFrame
from .scene import Intrinsics

OUT_ENV = "SYNTHCOLON_OUT"


def _emit(payload) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _note(message: str) -> None:
    print(message, file=sys.stderr)


def _default_out() -> str:
    return os.environ.get(OUT_ENV, ".")


def _load_depth_values(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".raw":
        return load_raw(path).astype(np.float64)
    if path.suffix == ".png":
        return load_depth_png(path)
    raise ValueError(f"{path}: depth files must be .png or .raw")


def _load_intrinsics(path) -> Intrinsics:
    doc = json.loads(Path(path).read_text())
    if "intrinsics" in doc:        # a full video manifest also works
        doc = doc["intrinsics"]
    kwargs = {"width": int(doc["width"]), "height": int(doc["height"]),
              "focal_px": float(doc["focal_px"])}
    if "focal_cm" in doc:
        kwargs["focal_cm"] = float(doc["focal_cm"])
    if "horizontal_fov_deg" in doc:
        kwargs["horizontal_fov"] = float(doc["horizontal_fov_deg"])
    return Intrinsics(**kwargs)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_generate(args) -> int:
    manifest = generate_video(
        args.level, args.seed, args.frames, args.out, width=args.width,
        height=args.height, fps=args.fps, supersample=args.supersample,
        axial_steps=args.axial_steps, radial_steps=args.radial_steps)
    _note(f"wrote {args.frames} frame pairs under {args.out}")
    _emit(manifest)
    return 0


def _cmd_collection(args) -> int:
    plan = full_plan(args.seed) if args.preset == "full" else desk_plan(args.seed)
    if args.frames is not None:
        plan = type(plan)(videos_per_level=plan.videos_per_level,
                          n_frames=args.frames, width=plan.width,
                          height=plan.height, fps=plan.fps,
                          base_seed=plan.base_seed,
                          supersample=plan.supersample,
                          axial_steps=plan.axial_steps,
                          radial_steps=plan.radial_steps)
    _note(f"building {plan.total_videos} videos "
          f"({plan.total_frames} frames) under {args.out}")
    index = build_collection(plan, args.out)
    _emit(index)
    return 0


def _cmd_split(args) -> int:
    index_path = Path(args.index)
    index = json.loads(index_path.read_text())
    assignment = split_collection(index["videos"], args.strategy)
    if args.apply:
        stamped = apply_split(index, assignment)
        index_path.write_text(json.dumps(stamped, indent=2, sort_keys=True)
                              + "\n")
        _note(f"stamped split tags into {index_path}")
    _emit({"strategy": args.strategy, "assignment": assignment})
    return 0


def _cmd_eval(args) -> int:
    truth = _load_depth_values(args.gt)
    pred = _load_depth_values(args.pred)
    report = evaluate_depth(truth, pred)
    _emit(report.to_dict())
    return 0


def _cmd_loss(args) -> int:
    if args.sigma != SIGMA:
        raise UsageError(f"only sigma {SIGMA} is supported; the kernels are "
                         "part of the numerical contract")
    truth = _load_depth_values(args.gt)
    pred = _load_depth_values(args.pred)
    space = "linear"
    if args.gamma:
        spec = GammaSpec()
        truth = spec.apply(truth)
        pred = spec.apply(pred)
        space = "gamma"
    out = total_loss(pred, truth, weights=tuple(args.w), space=space)
    _emit(out.to_dict())
    return 0


def _cmd_reconstruct(args) -> int:
    depth = DepthMap(np.clip(_load_depth_values(args.depth), 0.0,
                             MAX_DEPTH_CM))
    if args.surface:
        export_surface(depth, args.out)
        _emit({"out": str(args.out), "kind": "surface",
               "vertices": depth.width * depth.height})
        return 0
    intrinsics = _load_intrinsics(args.intrinsics)
    rgb = RgbFrame(load_rgb_png(args.rgb)) if args.rgb else None
    cloud = backproject(depth, intrinsics, rgb=rgb,
                        frame_id=Path(args.depth).stem)
    export_ply(cloud, args.out)
    _emit({"out": str(args.out), "kind": "points", "points": len(cloud)})
    return 0


def _cmd_stats(args) -> int:
    manifest = load_manifest(args.manifest)
    base = Path(args.manifest).parent
    cfg = level_config(manifest["level"])
    model = build_colon_model(cfg, manifest["seed"], axial_steps=150,
                              radial_steps=48)
    spacings = []
    if model.folds.count > 1:
        spacings = list(np.diff(np.sort(model.folds.axial_positions)))
    counts = np.zeros(25, dtype=np.int64)
    edges = np.arange(26.0)
    scanned = 0
    for frame in manifest["frames"][:args.max_frames]:
        depth = load_depth_png(base / frame["depth"])
        counts += np.histogram(depth, bins=edges)[0]
        scanned += 1
    _emit({
        "video_id": manifest["video_id"],
        "level": manifest["level"],
        "seed": manifest["seed"],
        "centerline_length_cm": float(model.centerline.arc_length),
        "fold_count": int(model.folds.count),
        "fold_spacing_cm": {
            "min": float(min(spacings)) if spacings else None,
            "mean": float(np.mean(spacings)) if spacings else None,
            "max": float(max(spacings)) if spacings else None,
            "histogram": {
                "bin_edges_cm": list(np.arange(0.0, 10.5, 0.5)),
                "counts": [int(c) for c in np.histogram(
                    spacings, bins=np.arange(0.0, 10.5, 0.5))[0]],
            },
        },
        "polyps": {
            "count": len(manifest["polyps"]),
            "diameters_mm": [p["base_diameter_mm"]
                             for p in manifest["polyps"]],
        },
        "depth_histogram": {
            "bin_edges_cm": [float(e) for e in edges],
            "counts": [int(c) for c in counts],
            "frames_scanned": scanned,
        },
    })
    return 0


class UsageError(ValueError):
    """Bad arguments detected after parsing."""


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthcolon",
        description="Synthetic colonoscopy dataset generator and tools")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap rendering parallelism (results are "
                             "identical at any value)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render one video")
    p.add_argument("--level", type=int, required=True, choices=range(1, 6))
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--width", type=int, default=1280)
    p.add_argument("--height", type=int, default=1080)
    p.add_argument("--fps", type=int, default=15)
    p.add_argument("--supersample", type=int, default=1, choices=(1, 2))
    p.add_argument("--axial-steps", type=int, default=600,
                   help="mesh rings along the centerline")
    p.add_argument("--radial-steps", type=int, default=96,
                   help="mesh vertices per ring")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("collection", help="render a whole video collection")
    p.add_argument("--preset", choices=("full", "desk"), default="desk")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=None,
                   help="override frames per video")
    p.set_defaults(func=_cmd_collection)

    p = sub.add_parser("split", help="assign train/val/test tags")
    p.add_argument("--index", required=True)
    p.add_argument("--strategy", choices=("cl", "tl"), required=True)
    p.add_argument("--apply", action="store_true",
                   help="write tags back into the index file")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("eval", help="depth metrics for a truth/prediction pair")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("loss", help="three-term loss for a depth pair")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--w", type=float, nargs=3, default=[0.1, 0.3, 0.6],
                   metavar=("W1", "W2", "W3"))
    p.add_argument("--sigma", type=float, default=SIGMA)
    p.add_argument("--gamma", action="store_true",
                   help="gamma-encode depths before the loss")
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("reconstruct", help="back-project depth to a PLY")
    p.add_argument("--depth", required=True)
    p.add_argument("--intrinsics",
                   help="intrinsics JSON or a video manifest")
    p.add_argument("--rgb", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--surface", action="store_true",
                   help="export a 2.5d height field instead of points")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("stats", help="dataset statistics for one video")
    p.add_argument("--manifest", required=True)
    p.add_argument("--max-frames", type=int, default=100,
                   help="cap depth-histogram scanning")
    p.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:            # argparse already printed usage
        return int(exc.code or 0)
    if args.threads is not None:
        if args.threads < 1:
            _note("error: --threads must be at least 1")
            return 2
        import numba
        # requests above the machine's core budget clamp rather than fail
        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    if getattr(args, "out", "missing") is None:
        args.out = _default_out()
    if args.command == "reconstruct" and not args.surface \
            and not args.intrinsics:
        _note("error: --intrinsics is required unless --surface is given")
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        _note(f"error: {exc}")
        return 2
    except Exception as exc:             # runtime failure, not usage
        _note(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
