"""Command-line pipeline: frames -> flow -> masks -> geometry -> fusion -> artifacts.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 numerical
failure. Frame-pair flow jobs can run across a fork-based worker pool
(--jobs); partial hit-count grids merge by integer summation, so results
are identical at any parallelism level.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing as mp
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import detect as detect_mod
from . import frame_io, geometry, metrics, segmentation, synthlab, viz
from .config import PipelineConfig
from .errors import ConfigError, InputError, NumericalError, RipflowError
from .frame_io import BinaryMask, FrameSequence, MaskKind
from .optflow import (
    FlowConfig,
    FlowMethod,
    VelocityField,
    compute_gradients,
    estimate_flow,
    save_velocity,
)


@contextmanager
def _stage(name: str):
    """Prefix stage names onto pipeline errors so users see where it broke."""
    try:
        yield
    except RipflowError as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def _exit_code(exc: RipflowError) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, InputError):
        return 3
    if isinstance(exc, NumericalError):
        return 4
    return 1


# ---------------------------------------------------------------------------
# pipeline assembly

# Read-only state inherited by forked workers; set before the pool spawns.
_WORKER_STATE: dict = {}


def _count_chunk(indices: list[int]) -> np.ndarray:
    s = _WORKER_STATE
    return detect_mod.detection_counts(
        s["seq"], s["flow"], s["masks"], s["o"], indices, s["stride"], s["speed_eps"]
    )


def _detection_counts_parallel(
    seq: FrameSequence,
    flow_cfg: FlowConfig,
    masks,
    o: geometry.DirectionField,
    t_fields: int,
    stride: int,
    speed_eps: float,
    jobs: int,
) -> np.ndarray:
    if jobs <= 1:
        return detect_mod.detection_counts(
            seq, flow_cfg, masks, o, range(t_fields), stride, speed_eps
        )
    chunks = [c.tolist() for c in np.array_split(np.arange(t_fields), jobs) if c.size]
    _WORKER_STATE.update(
        seq=seq, flow=flow_cfg, masks=masks, o=o, stride=stride, speed_eps=speed_eps
    )
    try:
        ctx = mp.get_context("fork")
        with ctx.Pool(processes=len(chunks)) as pool:
            partials = pool.map(_count_chunk, chunks)
    finally:
        _WORKER_STATE.clear()
    total = np.zeros((seq.height, seq.width), dtype=np.int64)
    for part in partials:
        total += part
    return total


def _resolve_masks(cfg: PipelineConfig, seq: FrameSequence):
    """Shore mask plus the per-field combined-mask source for detection."""
    first = seq[0]
    if cfg.masks.shore_source == "external":
        shore = segmentation.shore_mask(first, cfg.masks.shore_path)
    else:
        shore = segmentation.shore_mask(first, "threshold")

    source = cfg.masks.wave_source
    if source == "auto":
        source = "hsv" if first.has_color else "none"
    if source == "none":
        empty = BinaryMask(np.zeros(shore.bits.shape, dtype=bool), MaskKind.WAVE)
        return shore, segmentation.combined_mask(shore, empty)
    if source == "external":
        wave = frame_io.load_mask(
            cfg.masks.wave_path, MaskKind.WAVE, expect_shape=shore.bits.shape
        )
        return shore, segmentation.combined_mask(shore, wave)
    per_field = [
        segmentation.combined_mask(
            shore,
            segmentation.wave_mask(
                seq[t * cfg.detect.stride], cfg.masks.s_max, cfg.masks.v_min
            ),
        )
        for t in range(cfg.detect.t_fields)
    ]
    return shore, per_field


def _detection_stage(cfg: PipelineConfig):
    """Shared by `run` and `detect`: everything up to the likelihood matrix."""
    with _stage("input"):
        seq = frame_io.load_sequence(
            cfg.input.frames_dir, cfg.input.pattern, cfg.input.frame_interval
        )
    with _stage("masks"):
        shore, masks = _resolve_masks(cfg, seq)
    with _stage("geometry"):
        o, shoreline = geometry.offshore_field(
            shore, cfg.geometry.gauss_sigma, cfg.geometry.canny_lo, cfg.geometry.canny_hi
        )
    with _stage("detect"):
        needed = cfg.detect.t_fields * cfg.detect.stride + 1
        if len(seq) < needed:
            raise InputError(
                f"need {needed} frames for T={cfg.detect.t_fields}, "
                f"stride={cfg.detect.stride}; {cfg.input.frames_dir} has {len(seq)}"
            )
        counts = _detection_counts_parallel(
            seq,
            cfg.flow,
            masks,
            o,
            cfg.detect.t_fields,
            cfg.detect.stride,
            cfg.detect.speed_eps,
            cfg.run.jobs,
        )
        likelihood = detect_mod.LikelihoodMatrix(counts=counts, t=cfg.detect.t_fields)
    return seq, shore, o, likelihood


def run_pipeline(
    config_path: str | Path,
    jobs: int | None = None,
    out_dir: str | Path | None = None,
    detect_only: bool = False,
) -> Path:
    """Execute the full pipeline described by a config file.

    Returns the artifact directory. ``detect_only`` stops after the
    likelihood artifacts (the `detect` subcommand).
    """
    cfg = config_mod.load_pipeline_config(config_path)
    if jobs is not None:
        if jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {jobs}")
        cfg.run.jobs = jobs
    if out_dir is not None:
        cfg.run.out_dir = Path(out_dir)

    seq, shore, o, likelihood = _detection_stage(cfg)

    out = cfg.run.out_dir
    out.mkdir(parents=True, exist_ok=True)
    config_mod.write_effective(cfg, out / "config.effective.toml")
    frame_io.write_grid_csv(out / "likelihood.csv", likelihood.counts, fmt="%d")
    viz.render_heatmap(likelihood, cfg.viz.colormap).save(out / "heatmap.png")

    summary = {
        "frames": len(seq),
        "width": seq.width,
        "height": seq.height,
        "method": cfg.flow.method.value,
        "T": cfg.detect.t_fields,
        "stride": cfg.detect.stride,
        "artifacts": ["config.effective.toml", "likelihood.csv", "heatmap.png"],
    }

    if not detect_only:
        if cfg.run.save_flow or cfg.viz.quiver:
            with _stage("flow"):
                for t in range(cfg.detect.t_fields):
                    i = t * cfg.detect.stride
                    g = compute_gradients(seq[i], seq[i + 1], cfg.flow.presmooth_sigma)
                    field = estimate_flow(g, cfg.flow)
                    if not (np.isfinite(field.u).all() and np.isfinite(field.v).all()):
                        raise NumericalError(f"non-finite velocities at pair {i}")
                    if cfg.run.save_flow:
                        save_velocity(out / "flow" / f"pair_{i:04d}", field)
                    if cfg.viz.quiver:
                        means = viz.block_average(
                            field, cfg.viz.quiver_block, cfg.viz.quiver_block
                        )
                        img = viz.render_quiver(seq[i], means, cfg.viz.quiver_scale)
                        (out / "quiver").mkdir(exist_ok=True)
                        img.save(out / "quiver" / f"pair_{i:04d}.png")
                if cfg.run.save_flow:
                    summary["artifacts"].append("flow/")
                if cfg.viz.quiver:
                    summary["artifacts"].append("quiver/")

        if cfg.eval.gt_path is not None:
            with _stage("eval"):
                gt = frame_io.load_mask(
                    cfg.eval.gt_path,
                    MaskKind.GROUND_TRUTH,
                    expect_shape=(seq.height, seq.width),
                )
                curve = metrics.pr_curve(likelihood, gt)
                metrics.write_pr_csv(out / "pr_curve.csv", curve)
                summary["auc"] = curve.auc
                summary["artifacts"].append("pr_curve.csv")
                if cfg.eval.plot:
                    metrics.plot_pr_curve(curve, out / "pr_curve.png")
                    summary["artifacts"].append("pr_curve.png")

    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out


# ---------------------------------------------------------------------------
# subcommands


def _add_flow_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--method", choices=[m.value for m in FlowMethod], default="hor-hs")
    sub.add_argument("--window", type=int, default=15)
    sub.add_argument("--gamma", type=float, default=100.0)
    sub.add_argument("--lambda-hor", dest="lambda_hor", type=float, default=1.0)
    sub.add_argument("--max-iters", dest="max_iters", type=int, default=300)
    sub.add_argument("--tol", type=float, default=1e-4)
    sub.add_argument("--presmooth-sigma", dest="presmooth_sigma", type=float, default=1.0)


def _flow_config(args: argparse.Namespace) -> FlowConfig:
    return FlowConfig(
        method=FlowMethod(args.method),
        window=args.window,
        gamma=args.gamma,
        lambda_hor=args.lambda_hor,
        max_iters=args.max_iters,
        tol=args.tol,
        presmooth_sigma=args.presmooth_sigma,
    )


def _load_pair(args: argparse.Namespace) -> tuple[FrameSequence, int]:
    seq = frame_io.load_sequence(args.frames, args.pattern)
    if not 0 <= args.pair < len(seq) - 1:
        raise InputError(f"--pair {args.pair} out of range for {len(seq)} frames")
    return seq, args.pair


def _estimate_pair(seq: FrameSequence, pair: int, cfg: FlowConfig) -> VelocityField:
    g = compute_gradients(seq[pair], seq[pair + 1], cfg.presmooth_sigma)
    return estimate_flow(g, cfg)


def _apply_mask_overrides(cfg: PipelineConfig, args: argparse.Namespace) -> None:
    if getattr(args, "shore_mask", None) is not None:
        cfg.masks.shore_source = "external"
        cfg.masks.shore_path = Path(args.shore_mask)
    if getattr(args, "wave_hsv", None) is not None:
        parts = args.wave_hsv.split(",")
        if len(parts) != 2:
            raise ConfigError(f"--wave-hsv expects 's_max,v_min', got {args.wave_hsv!r}")
        cfg.masks.wave_source = "hsv"
        cfg.masks.s_max = float(parts[0])
        cfg.masks.v_min = float(parts[1])


def _likelihood_from_args(args: argparse.Namespace) -> detect_mod.LikelihoodMatrix:
    counts = frame_io.read_grid_csv(args.likelihood, dtype=np.int64)
    return detect_mod.LikelihoodMatrix(counts=counts, t=args.T)


def cmd_run(args: argparse.Namespace) -> int:
    out = run_pipeline(args.config, args.jobs, args.out)
    print(f"artifacts written to {out}")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = config_mod.load_pipeline_config(args.config)
    if args.T is not None:
        cfg.detect = config_mod.DetectConfig(
            t_fields=args.T, stride=cfg.detect.stride, speed_eps=cfg.detect.speed_eps
        )
    if args.stride is not None:
        cfg.detect = config_mod.DetectConfig(
            t_fields=cfg.detect.t_fields, stride=args.stride, speed_eps=cfg.detect.speed_eps
        )
    if args.method is not None:
        cfg.flow.method = FlowMethod(args.method)
    _apply_mask_overrides(cfg, args)
    if args.jobs is not None:
        cfg.run.jobs = args.jobs
    if args.out is not None:
        cfg.run.out_dir = Path(args.out)

    seq, shore, o, likelihood = _detection_stage(cfg)
    out = cfg.run.out_dir
    out.mkdir(parents=True, exist_ok=True)
    config_mod.write_effective(cfg, out / "config.effective.toml")
    frame_io.write_grid_csv(out / "likelihood.csv", likelihood.counts, fmt="%d")
    viz.render_heatmap(likelihood, cfg.viz.colormap).save(out / "heatmap.png")
    print(f"likelihood matrix written to {out / 'likelihood.csv'}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = synthlab.scene_from_toml(args.spec)
    out = synthlab.write_scene(spec, args.out)
    print(f"scene written to {out}")
    return 0


def cmd_flow(args: argparse.Namespace) -> int:
    seq, pair = _load_pair(args)
    field = _estimate_pair(seq, pair, _flow_config(args))
    save_velocity(args.out, field)
    speed = field.speed()[field.valid]
    mean_speed = float(speed.mean()) if speed.size else 0.0
    print(
        f"pair ({pair}, {pair + 1}): valid {field.valid.mean():.1%}, "
        f"mean speed {mean_speed:.4f} px/frame, converged={field.converged}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    likelihood = _likelihood_from_args(args)
    gt = frame_io.load_mask(
        args.gt, MaskKind.GROUND_TRUTH, expect_shape=likelihood.counts.shape
    )
    curve = metrics.pr_curve(likelihood, gt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_pr_csv(out / "pr_curve.csv", curve)
    (out / "summary.json").write_text(
        json.dumps({"auc": curve.auc, "T": args.T}, indent=2, sort_keys=True) + "\n"
    )
    if args.plot:
        metrics.plot_pr_curve(curve, out / "pr_curve.png")
    print(f"AUC = {curve.auc:.6f}")
    return 0


def cmd_quiver(args: argparse.Namespace) -> int:
    seq, pair = _load_pair(args)
    field = _estimate_pair(seq, pair, _flow_config(args))
    means = viz.block_average(field, args.block, args.block)
    viz.render_quiver(seq[pair], means, args.scale).save(args.out)
    print(f"quiver written to {args.out}")
    return 0


def cmd_heatmap(args: argparse.Namespace) -> int:
    likelihood = _likelihood_from_args(args)
    viz.render_heatmap(likelihood, args.colormap, legend=not args.no_legend).save(args.out)
    print(f"heatmap written to {args.out}")
    return 0


def cmd_drifters(args: argparse.Namespace) -> int:
    seq = frame_io.load_sequence(args.frames, args.pattern)
    cfg = _flow_config(args)
    if args.static_pair is not None:
        if not 0 <= args.static_pair < len(seq) - 1:
            raise InputError(f"--static-pair {args.static_pair} out of range")
        flows: VelocityField | list[VelocityField] = _estimate_pair(seq, args.static_pair, cfg)
    else:
        flows = [_estimate_pair(seq, t, cfg) for t in range(len(seq) - 1)]
    if args.region is not None:
        parts = args.region.split(",")
        if len(parts) != 4:
            raise ConfigError(f"--region expects 'x0,y0,x1,y1', got {args.region!r}")
        region = tuple(float(p) for p in parts)
    else:
        region = (0.0, 0.0, float(seq.width - 1), float(seq.height - 1))
    traj = viz.simulate_drifters(
        flows, region, grid=args.grid, dt=args.dt, steps=args.steps, integrator=args.integrator
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    viz.write_trajectories_csv(out / "trajectories.csv", traj)
    if args.overlay:
        viz.render_drifters(seq[len(seq) - 1], traj[-1]).save(out / "drifters.png")
    print(f"{traj.shape[1]} drifters over {traj.shape[0] - 1} steps -> {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ripflow",
        description="Rip current detection from nearshore video via dense optical flow.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = subs.add_parser("detect", help="likelihood matrix only")
    p.add_argument("--config", required=True)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--method", choices=[m.value for m in FlowMethod], default=None)
    p.add_argument("--shore-mask", dest="shore_mask", default=None)
    p.add_argument("--wave-hsv", dest="wave_hsv", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_detect)

    p = subs.add_parser("synth", help="render a synthetic scene")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("flow", help="velocity field for one frame pair")
    p.add_argument("--frames", required=True)
    p.add_argument("--pattern", default="*.png")
    p.add_argument("--pair", type=int, default=0)
    _add_flow_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_flow)

    p = subs.add_parser("eval", help="PR curve and AUC from a likelihood CSV")
    p.add_argument("--likelihood", required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--plot", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("quiver", help="block-arrow rendering of one pair's flow")
    p.add_argument("--frames", required=True)
    p.add_argument("--pattern", default="*.png")
    p.add_argument("--pair", type=int, default=0)
    _add_flow_flags(p)
    p.add_argument("--block", type=int, default=16)
    p.add_argument("--scale", type=float, default=8.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quiver)

    p = subs.add_parser("heatmap", help="likelihood heatmap from a CSV")
    p.add_argument("--likelihood", required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--colormap", default="hot")
    p.add_argument("--no-legend", dest="no_legend", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = subs.add_parser("drifters", help="advect virtual drifters through the flow")
    p.add_argument("--frames", required=True)
    p.add_argument("--pattern", default="*.png")
    _add_flow_flags(p)
    p.add_argument("--static-pair", dest="static_pair", type=int, default=None)
    p.add_argument("--region", default=None)
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--integrator", choices=["euler", "rk2"], default="euler")
    p.add_argument("--overlay", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_drifters)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RipflowError as exc:
        print(f"ripflow error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
