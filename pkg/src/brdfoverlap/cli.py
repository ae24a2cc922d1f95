"""Command-line entry point: ``brdf-check``, ``overlap``, ``render`` and ``phantom``.

Exit codes: 0 success, 1 invalid input, 2 a checked property does not hold.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .brdf.analysis import PROBE_ANGLES_DEG, plausibility, write_plausibility_csv
from .brdf.models import MODEL_CLASSES, make_model, model_names
from .io import SceneError, emit_ranking_csv, load_scene, write_pfm, write_ppm, write_volf
from .spectral import DomainError

EXIT_OK, EXIT_INVALID, EXIT_PROPERTY = 0, 1, 2
SCENE_NAMES = ("sphere", "ellipsoid", "torus")


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("width and height must be >= 1")
    return w, h


def _overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _model_defaults() -> str:
    rows = []
    for cls in MODEL_CLASSES:
        p = ", ".join(f"{k}={v:g}" for k, v in cls().get_params().items())
        rows.append(f"  {cls.name:16s} {p}")
    return "model defaults (standard parameter table):\n" + "\n".join(rows)


class _Parser(argparse.ArgumentParser):
    """Usage errors are invalid input: exit 1, keeping 2 for property violations."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    ap = _Parser(prog="brdfoverlap", description="BRDF analysis, flux-overlap ranking and volume rendering.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("brdf-check", help="energy and reciprocity report per model",
                       formatter_class=fmt, epilog=_model_defaults())
    b.add_argument("--model", default="all", help="'all' or one of: " + ", ".join(model_names()) + " (default: all)")
    b.add_argument("--samples", type=int, default=1_000_000, help="albedo samples per incidence angle (default: 1000000)")
    b.add_argument("--pairs", type=int, default=1000, help="random direction pairs for reciprocity (default: 1000)")
    b.add_argument("--seed", type=int, default=0, help="RNG seed (default: 0)")
    b.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a parameter of the selected model, e.g. roughness_x=0.2")
    b.add_argument("--out", type=Path, help="write the report as CSV")

    o = sub.add_parser("overlap", help="all-pairs flux-overlap tournament", formatter_class=fmt)
    o.add_argument("--lattice", type=_size, default=(128, 128), help="lattice size WxH (default: 128x128)")
    o.add_argument("--spp", type=int, default=16, help="jittered samples per pixel (default: 16)")
    o.add_argument("--scenes", default=",".join(SCENE_NAMES), help="comma list of sphere,ellipsoid,torus (default: all three)")
    o.add_argument("--seed", type=int, default=42, help="RNG seed (default: 42)")
    o.add_argument("--threshold", type=float, default=1e-4, help="active-flux threshold t (default: 0.0001)")
    o.add_argument("--out", type=Path, help="ranking CSV path (default: print to stdout)")
    o.add_argument("--dump-dir", type=Path, help="write every lattice as PFM into this directory")

    r = sub.add_parser("render", help="render a scene file or a volume preset", formatter_class=fmt)
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--scene", type=Path, help="scene JSON; writes its flux lattice")
    src.add_argument("--preset", type=int, help="BRDF combination 1..24 on the phantom volumes")
    r.add_argument("--figure10", action="store_true",
                   help="density maps as iso 0.70/0.75/0.80/0.85, opacity 0.3/0.4/0.5/0.6, blue/green/yellow/red")
    r.add_argument("--size", type=_size, help="image size WxH (default: 256x256 presets, scene file otherwise)")
    r.add_argument("--spp", type=int, help="jittered samples per pixel (default: 8 presets, scene file otherwise)")
    r.add_argument("--seed", type=int, help="RNG seed (default: 0)")
    r.add_argument("--workers", type=int, default=1, help="worker threads; output does not depend on it (default: 1)")
    r.add_argument("--dims", type=int, default=64, help="phantom lattice size per axis (default: 64)")
    r.add_argument("--step", type=float, default=0.05, help="ray-march step in voxels (default: 0.05)")
    r.add_argument("--upsample", type=int, default=1,
                   help="cubic B-spline resampling factor applied to the phantom volumes (default: 1)")
    r.add_argument("--out", type=Path, required=True, help="output image, .ppm (display) or .pfm (linear)")

    p = sub.add_parser("phantom", help="write the synthetic phantom volumes", formatter_class=fmt)
    p.add_argument("--dims", type=int, default=64, help="voxels per axis (default: 64)")
    p.add_argument("--seed", type=int, default=42, help="RNG seed (default: 42)")
    p.add_argument("--out", type=Path, required=True,
                   help="output path; vol.volf becomes vol_shell.volf, vol_cortex.volf, vol_density.volf")
    return ap


def cmd_brdf_check(args) -> int:
    names = model_names() if args.model == "all" else [args.model]
    overrides = _overrides(args.set)
    if overrides and args.model == "all":
        raise ValueError("--set needs a single --model")
    reports, failed = [], False
    for name in names:
        model = make_model(name, **overrides)
        rep = plausibility(model, samples=args.samples, pairs=args.pairs, seed=args.seed)
        reports.append(rep)
        ok = rep.passes_energy and rep.passes_reciprocity
        if model.traits.physically_plausible and not ok:
            failed = True
        print(f"{rep.model:16s} albedo_max={rep.albedo_max:.6f}±{rep.stderr:.6f} "
              f"reciprocity={rep.reciprocity_max_err:.2e} energy={'ok' if rep.passes_energy else 'FAIL'} "
              f"reciprocal={'ok' if rep.passes_reciprocity else 'no'} score={rep.score}")
    print(f"incidence angles: {', '.join(f'{a:g}' for a in PROBE_ANGLES_DEG)} deg")
    if args.out:
        write_plausibility_csv(reports, args.out)
    return EXIT_PROPERTY if failed else EXIT_OK


def cmd_overlap(args) -> int:
    from .overlap import OverlapConfig, render_lattices, run_tournament, tournament_scenes
    from .brdf.models import default_models

    cfg = OverlapConfig(threshold=args.threshold, spp=args.spp, size=args.lattice, seed=args.seed)
    wanted = [s.strip() for s in args.scenes.split(",") if s.strip()]
    for s in wanted:
        if s not in SCENE_NAMES:
            raise ValueError(f"unknown scene {s!r}; valid: {', '.join(SCENE_NAMES)}")
    scenes = [sc for sc in tournament_scenes(args.lattice) if sc.name in wanted]
    models = default_models()
    lattices = render_lattices(models, scenes, cfg)
    report = run_tournament(models, scenes, cfg, lattices)
    if args.dump_dir:
        args.dump_dir.mkdir(parents=True, exist_ok=True)
        for (name, si), lat in lattices.items():
            write_pfm(lat, args.dump_dir / f"{scenes[si].name}_{name}.pfm")
    if args.out:
        emit_ranking_csv(report, args.out)
    else:
        for row in report.rows:
            print(f"{row.rank:2d} {row.error:.6f} {row.brdf_a} versus {row.brdf_b} ({row.category})")
    means = report.category_means()
    print(f"category means: high={means['high']:.6f} medium={means['medium']:.6f} low={means['low']:.6f}",
          file=sys.stderr)
    return EXIT_OK if report.monotone() else EXIT_PROPERTY


def cmd_render(args) -> int:
    out = args.out
    if out.suffix.lower() not in (".ppm", ".pfm"):
        raise ValueError(f"--out must end in .ppm or .pfm, got {out.name!r}")
    if args.scene is not None:
        from .scene import measure_flux
        from .volume import to_display

        scene = load_scene(args.scene)
        w, h = args.size or (scene.sensor.width, scene.sensor.height)
        spp = args.spp if args.spp is not None else scene.render.get("spp", 16)
        seed = args.seed if args.seed is not None else scene.render.get("seed", 0)
        lattice = measure_flux(scene, scene.sensor.with_size(w, h), spp, seed, workers=args.workers)
        if out.suffix.lower() == ".pfm":
            write_pfm(lattice, out)
        else:
            write_ppm(to_display(lattice.cells), out)
        return EXIT_OK
    from .volume import RenderSettings, render_preset

    w, h = args.size or (256, 256)
    settings = RenderSettings(width=w, height=h, spp=args.spp if args.spp is not None else 8,
                              seed=args.seed if args.seed is not None else 0, workers=args.workers, step=args.step)
    result = render_preset(args.preset, settings, figure10=args.figure10, dims=args.dims,
                           upsample=args.upsample)
    if out.suffix.lower() == ".pfm":
        write_pfm(result.radiance, out)
    else:
        write_ppm(result.display(), out)
    return EXIT_OK


def cmd_phantom(args) -> int:
    from .volume import generate_phantom

    ph = generate_phantom(dims=args.dims, seed=args.seed)
    stem = args.out.with_suffix("")
    for vol in ph.volumes:
        path = stem.parent / f"{stem.name}_{vol.name}.volf"
        write_volf(vol, path)
        print(path)
    return EXIT_OK


COMMANDS = {"brdf-check": cmd_brdf_check, "overlap": cmd_overlap, "render": cmd_render, "phantom": cmd_phantom}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DomainError, SceneError, KeyError, ValueError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
