"""Command line interface for the staged PBR toolkit."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from rich.console import Console

from staged_pbr.core.gradients import finite_difference_errors, random_configs
from staged_pbr.core.lighting import (
    DirectionalLight,
    LightRig,
    build_fixed_rig,
    envmap_to_lights,
    sample_random_light,
)
from staged_pbr.core.losses import Stage
from staged_pbr.core.materials import MaterialCategory, apply_category_edit, classify_materials
from staged_pbr.core.shader import CameraModel, render_image
from staged_pbr.estimation.estimator import (
    EstimatorSettings,
    Mode,
    default_schedule,
    init_estimate,
    run_joint_baseline,
    run_progressive,
)
from staged_pbr.monitoring.logging import configure_logging, get_logger
from staged_pbr.monitoring.metrics import eval_report, heldout_rig
from staged_pbr.monitoring.report_generator import ReportGenerator, write_eval_csv
from staged_pbr.scenes.scenegen import SceneSpec, generate_scene, render_observations
from staged_pbr.storage import bundle
from staged_pbr.storage.images import write_png_preview
from staged_pbr.storage.pfm import write_pfm
from staged_pbr.utils.config import get_config
from staged_pbr.utils.display import eval_table, stage_table
from staged_pbr.utils.exceptions import PFMError, StagedPBRError

logger = get_logger(__name__)

GRADCHECK_TOLERANCE = 1e-3
EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


@dataclass
class CLIContext:
    """Holds shared resources for CLI commands."""

    config: Any
    camera: CameraModel
    threads: int
    console: Console
    err_console: Console


def build_context(args: argparse.Namespace) -> CLIContext:
    """Create the CLI context using config values."""

    config = get_config(args.config)
    log_section = config.get("logging") or {}
    configure_logging(args.log_level or log_section.get("level"), log_section.get("dir"), force=True)
    threads = int(config.runtime.threads if args.threads is None else args.threads)
    return CLIContext(
        config=config,
        camera=CameraModel.from_config(config),
        threads=threads,
        console=Console(soft_wrap=True),
        err_console=Console(stderr=True),
    )


# argument types

def parse_size(text: str) -> tuple[int, int]:
    try:
        width, height = (int(part) for part in text.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"size must look like WxH, got {text!r}") from exc
    return width, height


def parse_floats(count: int):
    def parse(text: str) -> tuple[float, ...]:
        try:
            values = tuple(float(part) for part in text.split(","))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers, got {text!r}") from exc
        if len(values) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers, got {text!r}")
        return values

    return parse


def parse_iterations(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"iterations must look like g,a,r,f, got {text!r}") from exc
    if len(values) != len(Stage) or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"iterations must be {len(Stage)} non-negative integers, got {text!r}")
    return values


def parse_category(text: str) -> MaterialCategory:
    try:
        return MaterialCategory.parse(text)
    except StagedPBRError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def parse_rig_spec(text: str) -> tuple[str, int]:
    if text == "fixed":
        return "fixed", 0
    kind, _, seed = text.partition(":")
    if kind == "random" and seed.isdigit():
        return "random", int(seed)
    raise argparse.ArgumentTypeError(f"rig must be 'fixed' or 'random:SEED', got {text!r}")


def _write_radiance(ctx: CLIContext, image: np.ndarray, out: Path, png: Optional[Path], exposure: Optional[float]) -> None:
    write_pfm(out, image)
    if png is not None:
        write_png_preview(png, image, float(ctx.config.preview.exposure if exposure is None else exposure))


def _channel_means(image: np.ndarray) -> str:
    return ",".join(f"{v:.6f}" for v in image.reshape(-1, 3).mean(axis=0))


def command_gen(ctx: CLIContext, args: argparse.Namespace) -> int:
    """Generate a scene bundle with labels and its fixed-rig observations."""

    width, height = args.size
    spec = SceneSpec(
        seed=args.seed,
        width=width,
        height=height,
        num_regions=int(ctx.config.scene.regions if args.regions is None else args.regions),
        categories=tuple(args.categories) if args.categories else None,
        boundary_blur=int(ctx.config.scene.boundary_blur if args.blur is None else args.blur),
    )
    maps, labels = generate_scene(spec, ctx.camera)
    noise = float(ctx.config.scene.noise_sigma if args.noise is None else args.noise)
    obs = render_observations(
        maps,
        ctx.camera,
        noise,
        args.seed,
        fixed_intensity=float(ctx.config.lighting.fixed_intensity),
        threads=ctx.threads,
    )
    bundle.write_maps(args.out, maps)
    bundle.write_labels(args.out, labels)
    bundle.write_scene_spec(args.out, spec)
    bundle.write_observations(args.out, obs)
    print(
        f"gen seed={spec.seed} size={width}x{height} regions={spec.num_regions} "
        f"pixels={maps.masked_count} lights={len(obs)} out={args.out}"
    )
    return EXIT_OK


def command_render(ctx: CLIContext, args: argparse.Namespace) -> int:
    """Render a bundle under the fixed rig or one random light."""

    maps = bundle.read_maps(args.maps)
    kind, seed = args.rig
    if kind == "fixed":
        intensity = float(ctx.config.lighting.fixed_intensity if args.intensity is None else args.intensity)
        rig = build_fixed_rig(intensity)
    else:
        light = sample_random_light(seed, 0)
        if args.intensity is not None:
            light = DirectionalLight.create(light.direction, args.intensity)
        rig = LightRig([light])
    image = render_image(maps, rig, ctx.camera, threads=ctx.threads)
    _write_radiance(ctx, image, args.out, args.png, args.exposure)
    print(f"render rig={kind}{'' if kind == 'fixed' else ':' + str(seed)} lights={len(rig)} mean={_channel_means(image)} out={args.out}")
    return EXIT_OK


def command_relight(ctx: CLIContext, args: argparse.Namespace) -> int:
    """Render a bundle under directional lights extracted from an environment map."""

    maps = bundle.read_maps(args.maps)
    if args.no_sss:
        maps = maps.with_channels(sss=np.zeros_like(maps.sss))
    env = bundle.read_environment(args.env)
    rig = envmap_to_lights(env, args.lights)
    image = render_image(maps, rig, ctx.camera, threads=ctx.threads)
    _write_radiance(ctx, image, args.out, args.png, args.exposure)
    print(f"relight lights={len(rig)} sss={'off' if args.no_sss else 'on'} mean={_channel_means(image)} out={args.out}")
    return EXIT_OK


def command_estimate(ctx: CLIContext, args: argparse.Namespace) -> int:
    """Recover material maps from observations (or reference maps with --supervised)."""

    section = ctx.config.estimator
    iterations = args.iters or tuple(int(section.iterations[stage.value]) for stage in Stage)
    rate = float(section.learning_rate if args.lr is None else args.lr)
    settings = EstimatorSettings.from_config(ctx.config, threads=ctx.threads)

    if args.supervised:
        target = bundle.read_maps(args.obs)
        mode = Mode.TRAINING_LOSS
    else:
        target = bundle.read_observations(args.obs)
        mode = Mode.OBSERVATION_ONLY
    init = init_estimate(target.width, target.height, target.mask, dict(section.init))

    if args.mode == "joint":
        result = run_joint_baseline(target, args.seed, sum(iterations), rate, settings, mode, init)
    else:
        schedule = default_schedule(mode, iterations, rate, args.uncontrolled)
        result = run_progressive(target, args.seed, schedule, settings, init)

    bundle.write_maps(args.out, result.maps)
    bundle.write_labels(args.out, classify_materials(result.maps))
    ReportGenerator(args.out).write_traces(result.trace_rows())
    if result.summaries:
        ctx.err_console.print(stage_table(result.summaries))
    final = result.summaries[-1].final_loss if result.summaries else 0.0
    print(
        f"estimate mode={args.mode} target={mode.value} seed={args.seed} "
        f"iters={','.join(str(i) for i in iterations)} final_loss={final:.9g} out={args.out}"
    )
    return EXIT_OK


def command_eval(ctx: CLIContext, args: argparse.Namespace) -> int:
    """Score estimated maps against ground truth."""

    section = ctx.config.evaluation
    pred = bundle.read_maps(args.pred)
    gt = bundle.read_maps(args.gt)
    rig = heldout_rig(
        int(section.heldout_seed if args.heldout_seed is None else args.heldout_seed),
        int(section.heldout_lights if args.heldout_lights is None else args.heldout_lights),
    )
    report = eval_report(pred, gt, rig, ctx.camera, cap=float(section.psnr_cap), threads=ctx.threads)
    if args.out is not None:
        write_eval_csv(args.out, report)
    ctx.console.print(eval_table(report))
    print(
        f"eval material_mean={report.material_mean:.4f} relight_mean={report.relight_mean:.4f} "
        f"total_mean={report.total_mean:.4f} normal_error_deg={report.normal_error_deg:.4f}"
    )
    return EXIT_OK


def command_edit(ctx: CLIContext, args: argparse.Namespace) -> int:
    """Swap the reflectance of one material category for another's."""

    maps = bundle.read_maps(args.maps)
    labels_file = Path(args.maps) / bundle.LABELS_FILE
    labels = bundle.read_labels(args.maps) if labels_file.exists() else classify_materials(maps)
    edited = apply_category_edit(maps, labels, args.source, args.target, args.tint)
    bundle.write_maps(args.out, edited)
    bundle.write_labels(args.out, labels)
    print(
        f"edit from={args.source.name.title()} to={args.target.name.title()} "
        f"pixels={int(labels.region(args.source).sum())} out={args.out}"
    )
    return EXIT_OK


def command_gradcheck(ctx: CLIContext, args: argparse.Namespace) -> int:
    """Compare analytic pixel Jacobians against central finite differences."""

    t, rig = random_configs(args.seed, args.configs, args.lights)
    errors = finite_difference_errors(t, rig, args.h)
    worst = float(errors.max()) if errors.size else 0.0
    passed = worst <= GRADCHECK_TOLERANCE
    logger.info("gradcheck.done", configs=args.configs, worst=worst, passed=passed)
    print(f"gradcheck configs={args.configs} h={args.h:g} max_rel_error={worst:.3e} {'ok' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_INVALID


class ToolkitArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    """Construct the CLI argument parser."""

    parser = ToolkitArgumentParser(prog="spbr", description="Staged PBR material estimation toolkit")
    parser.add_argument("--threads", type=int, help="Worker threads (never changes results)")
    parser.add_argument("--config", type=Path, help="Alternative YAML configuration file")
    parser.add_argument(
        "--log-level",
        type=str.upper,
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="Console log level (default: logging.level from the config)",
    )

    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ToolkitArgumentParser)

    gen = subparsers.add_parser("gen", help="Generate a synthetic scene bundle")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--size", type=parse_size, default=(64, 64), help="WxH (default: 64x64)")
    gen.add_argument("--regions", type=int)
    gen.add_argument("--categories", type=parse_category, nargs="+", help="Allowed categories")
    gen.add_argument("--blur", type=int, help="Boundary blur radius in pixels")
    gen.add_argument("--noise", type=float, help="Observation noise sigma")
    gen.add_argument("--out", type=Path, required=True)

    def add_image_outputs(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--out", type=Path, required=True, help="Radiance PFM")
        sub.add_argument("--png", type=Path, help="Optional sRGB preview")
        sub.add_argument("--exposure", type=float)

    render = subparsers.add_parser("render", help="Render maps under a light rig")
    render.add_argument("--maps", type=Path, required=True)
    render.add_argument("--rig", type=parse_rig_spec, default=("fixed", 0), help="fixed | random:SEED")
    render.add_argument("--intensity", type=float)
    add_image_outputs(render)

    relight = subparsers.add_parser("relight", help="Render maps under an environment map")
    relight.add_argument("--maps", type=Path, required=True)
    relight.add_argument("--env", type=Path, required=True)
    relight.add_argument("--lights", type=int, default=64)
    relight.add_argument("--no-sss", action="store_true", help="Zero the subsurface weight")
    add_image_outputs(relight)

    estimate = subparsers.add_parser("estimate", help="Estimate material maps")
    estimate.add_argument("--obs", type=Path, required=True, help="Scene bundle with observations")
    estimate.add_argument("--mode", choices=("progressive", "joint"), default="progressive")
    estimate.add_argument("--seed", type=int, default=0)
    estimate.add_argument("--iters", type=parse_iterations, help="g,a,r,f iteration counts")
    estimate.add_argument("--lr", type=float)
    estimate.add_argument("--uncontrolled", action="store_true", help="Reference values instead of fixed controls")
    estimate.add_argument("--supervised", action="store_true", help="Fit the bundle's maps instead of its observations")
    estimate.add_argument("--out", type=Path, required=True)

    evaluate = subparsers.add_parser("eval", help="PSNR report of estimated maps")
    evaluate.add_argument("--pred", type=Path, required=True)
    evaluate.add_argument("--gt", type=Path, required=True)
    evaluate.add_argument("--out", type=Path, help="CSV report")
    evaluate.add_argument("--heldout-seed", type=int)
    evaluate.add_argument("--heldout-lights", type=int)

    edit = subparsers.add_parser("edit", help="Swap one material category for another")
    edit.add_argument("--maps", type=Path, required=True)
    edit.add_argument("--from", dest="source", type=parse_category, required=True)
    edit.add_argument("--to", dest="target", type=parse_category, required=True)
    edit.add_argument("--tint", type=parse_floats(3), help="r,g,b diffuse multiplier")
    edit.add_argument("--out", type=Path, required=True)

    gradcheck = subparsers.add_parser("gradcheck", help="Finite-difference check of the shading Jacobian")
    gradcheck.add_argument("--configs", type=int, default=1000)
    gradcheck.add_argument("--h", type=float, default=1e-4)
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--lights", type=int, default=3)

    return parser


COMMANDS = {
    "gen": command_gen,
    "render": command_render,
    "relight": command_relight,
    "estimate": command_estimate,
    "eval": command_eval,
    "edit": command_edit,
    "gradcheck": command_gradcheck,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the CLI."""

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        ctx = build_context(args)
        if ctx.threads < 1:
            parser.error(f"--threads must be >= 1, got {ctx.threads}")
        return COMMANDS[args.command](ctx, args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (PFMError, OSError) as exc:
        logger.error("cli.io_error", command=args.command, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StagedPBRError as exc:
        logger.error("cli.invalid", command=args.command, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover - manual execution
    sys.exit(main())
