"""Command-line entry point.

One executable, subcommand per module. Structured results are printed
as a single JSON document on stdout (pretty by default, compact with
--json); progress notes go to stderr and are silenced by --quiet.

Exit status: 0 success, 1 usage error, 2 data/format error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, NoiselibError
from .features import FEATURE_KINDS, FeatureConfig, extract_all
from .images import read_image, write_ppm
from .library import (
    build_library,
    ingest_records,
    load_library,
    sample_noise,
    save_library,
)
from .query import GoalSpec, GoalStage, bench_retrieval, load_goal, progressive_rerank
from .schedule import ADJUSTMENTS, SCHEDULE_KINDS, build_schedule, noise_offset, residual_signal_coefficient
from .synth import SynthConfig, synth_posterior, toy_denoiser


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    data errors, so remap usage problems to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _shape(text: str) -> tuple:
    try:
        dims = tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}, expected CxHxW")
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}, expected CxHxW")
    return dims


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _kinds(text: str) -> tuple:
    kinds = tuple(part.strip() for part in text.split(",") if part.strip())
    for kind in kinds:
        if kind not in FEATURE_KINDS:
            raise argparse.ArgumentTypeError(
                f"unknown feature kind {kind!r}; expected from {FEATURE_KINDS}")
    if not kinds:
        raise argparse.ArgumentTypeError("empty kinds list")
    return kinds


def _emit(payload, args) -> None:
    if args.json:
        print(json.dumps(payload, separators=(",", ":")))
    else:
        print(json.dumps(payload, indent=2))


def _note(message: str, args) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def _load_feature_config(path) -> FeatureConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"{path}: malformed config JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise InvalidParameterError(f"{path}: feature config must be a JSON object")
    return FeatureConfig.from_json_dict(obj)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_build(args) -> int:
    config = _load_feature_config(args.config) if args.config else FeatureConfig()
    lib = build_library(args.seed, args.count, shape=args.shape,
                        posterior=args.posterior, feature_config=config)
    save_library(lib, args.out)
    _note(f"wrote {args.out}.meta.jsonl and {args.out}.noise.bin", args)
    _emit(lib.header_dict(), args)
    return 0


def _cmd_ingest(args) -> int:
    lib = load_library(args.lib)
    merged = ingest_records(lib, args.records)
    save_library(merged, args.lib)
    _note(f"updated {args.lib}.meta.jsonl", args)
    _emit(merged.header_dict(), args)
    return 0


def _cmd_inspect(args) -> int:
    lib = load_library(args.lib)
    if args.id is None:
        _emit(lib.header_dict(), args)
    else:
        _emit(lib.record(args.id).to_json_dict(), args)
    return 0


def _cmd_query(args) -> int:
    lib = load_library(args.lib)
    goal = load_goal(args.goal)
    if args.top_k is not None:
        stages = list(goal.stages)
        last = stages[-1]
        stages[-1] = GoalStage(feature=last.feature, target=last.target,
                               match=last.match, keep=args.top_k)
        goal = GoalSpec(stages=tuple(stages))
    ranked = progressive_rerank(lib, goal)
    if args.emit_noise:
        winner = lib.noise_tensor(ranked[0][0])
        Path(args.emit_noise).write_bytes(
            winner.values.astype("<f4", copy=False).tobytes())
        _note(f"wrote noise_id {winner.noise_id} to {args.emit_noise}", args)
    _emit([{"noise_id": nid, "score": score} for nid, score in ranked], args)
    return 0


def _cmd_bench(args) -> int:
    lib = load_library(args.lib)
    goal = load_goal(args.goal)
    _emit(bench_retrieval(lib, goal, args.reps), args)
    return 0


def _cmd_features(args) -> int:
    config = _load_feature_config(args.config) if args.config else FeatureConfig()
    if args.kinds is not None:
        config = FeatureConfig(
            kinds=args.kinds, semantic_dim=config.semantic_dim,
            glcm_levels=config.glcm_levels, glcm_offsets=config.glcm_offsets,
            hfe_cutoff=config.hfe_cutoff, style_maps=config.style_maps)
    image = read_image(args.image)
    _emit(extract_all(image, config).to_json_dict(), args)
    return 0


def _cmd_schedule(args) -> int:
    sched = build_schedule(args.kind, args.steps, args.beta_start, args.beta_end)
    signal, noise = residual_signal_coefficient(sched)
    payload = {
        "kind": sched.kind,
        "steps": sched.steps,
        "signal": signal,
        "noise": noise,
    }
    if args.report:
        betas = sched.betas
        payload["alpha_bar_final"] = float(sched.alphas_cumprod[-1])
        payload["betas"] = {
            "first": float(betas[0]),
            "last": float(betas[-1]),
            "min": float(betas.min()),
            "max": float(betas.max()),
        }
    _emit(payload, args)
    return 0


def _cmd_synth(args) -> int:
    tensor = sample_noise(args.seed, args.id, args.shape)
    cfg = SynthConfig(blur_sigma=args.blur_sigma, color_gain=args.color_gain)
    image = synth_posterior(tensor.values, cfg)
    write_ppm(image, args.out)
    _note(f"wrote {args.out}", args)
    _emit({"out": str(args.out), "noise_id": tensor.noise_id,
           "size": [image.height, image.width]}, args)
    return 0


def _cmd_offset(args) -> int:
    if args.lib is not None:
        values = load_library(args.lib).noise_tensor(args.id).values
    elif args.seed is not None:
        values = sample_noise(args.seed, args.id, args.shape).values
    else:
        raise InvalidParameterError("offset needs --lib or --seed for its input noise")
    sched = build_schedule(args.schedule_kind, args.schedule_steps,
                           args.beta_start, args.beta_end)
    denoiser = toy_denoiser(sched, args.smoothing)
    shifted = noise_offset(values, args.delta, args.adjust, sched, denoiser,
                           args.num_steps)
    Path(args.out).write_bytes(np.asarray(shifted, dtype="<f4").tobytes())
    _note(f"wrote {args.out}", args)
    _emit({"adjust": args.adjust, "delta": args.delta,
           "num_steps": args.num_steps, "shape": list(shifted.shape),
           "out": str(args.out)}, args)
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true",
                        help="suppress progress notes on stderr")
    common.add_argument("--json", action="store_true",
                        help="compact single-line JSON output")
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="cap internal parallelism (scans are single-"
                             "threaded today; accepted for compatibility)")

    parser = _Parser(prog="noiselib",
                     description="goal-driven noise retrieval over seeded "
                                 "Gaussian libraries")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("build", parents=[common],
                       help="sample noises, extract posterior features, save")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--shape", type=_shape, default=(4, 64, 64), metavar="CxHxW")
    p.add_argument("--posterior", default="synthetic",
                   help="'synthetic' or 'ingest-dir:<path>'")
    p.add_argument("--config", default=None, help="feature config JSON file")
    p.add_argument("--out", required=True, metavar="PREFIX")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("ingest", parents=[common],
                       help="merge external feature records into a library")
    p.add_argument("--lib", required=True, metavar="PREFIX")
    p.add_argument("--records", required=True, metavar="DIR")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("inspect", parents=[common],
                       help="print a library header or one record as JSON")
    p.add_argument("--lib", required=True, metavar="PREFIX")
    p.add_argument("--id", type=int, default=None)
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("query", parents=[common],
                       help="rank library noises against a goal file")
    p.add_argument("--lib", required=True, metavar="PREFIX")
    p.add_argument("--goal", required=True, metavar="GOAL.json")
    p.add_argument("--top-k", type=_positive_int, default=None,
                   help="override the final stage's keep count")
    p.add_argument("--emit-noise", default=None, metavar="OUT.bin",
                   help="write the winning tensor as little-endian float32")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("bench", parents=[common],
                       help="time the match and select phases of a query")
    p.add_argument("--lib", required=True, metavar="PREFIX")
    p.add_argument("--goal", required=True, metavar="GOAL.json")
    p.add_argument("--reps", type=_positive_int, default=10)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("features", parents=[common],
                       help="extract features from an image file")
    p.add_argument("--image", required=True)
    p.add_argument("--kinds", type=_kinds, default=None,
                   help="comma-separated subset of "
                        "color,texture,shape,sharpness,style")
    p.add_argument("--config", default=None, help="feature config JSON file")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("schedule", parents=[common],
                       help="build a diffusion schedule and report its "
                            "terminal signal/noise split")
    p.add_argument("--kind", choices=SCHEDULE_KINDS, default="scaled-linear")
    p.add_argument("--steps", type=_positive_int, default=1000)
    p.add_argument("--beta-start", type=float, default=0.00085)
    p.add_argument("--beta-end", type=float, default=0.012)
    p.add_argument("--report", action="store_true",
                   help="include the betas summary and terminal alpha-bar")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("synth", parents=[common],
                       help="render the synthetic posterior of a seeded noise")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--shape", type=_shape, default=(4, 64, 64), metavar="CxHxW")
    p.add_argument("--blur-sigma", type=float, default=4.0)
    p.add_argument("--color-gain", type=float, default=0.5)
    p.add_argument("--out", required=True, metavar="IMG.ppm")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("offset", parents=[common],
                       help="bake a color tendency into a noise tensor via "
                            "sample + adjust + invert")
    p.add_argument("--lib", default=None, metavar="PREFIX",
                   help="take the input noise from a library")
    p.add_argument("--seed", type=int, default=None,
                   help="...or sample it from a seed")
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--shape", type=_shape, default=(4, 64, 64), metavar="CxHxW")
    p.add_argument("--adjust", choices=ADJUSTMENTS, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--schedule-kind", choices=SCHEDULE_KINDS,
                   default="scaled-linear")
    p.add_argument("--schedule-steps", type=_positive_int, default=1000)
    p.add_argument("--beta-start", type=float, default=0.00085)
    p.add_argument("--beta-end", type=float, default=0.012)
    p.add_argument("--num-steps", type=_positive_int, default=50)
    p.add_argument("--smoothing", default="identity",
                   help="toy denoiser smoothing: identity, box3, or gauss(S)")
    p.add_argument("--out", required=True, metavar="OUT.bin")
    p.set_defaults(func=_cmd_offset)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (NoiselibError, FileNotFoundError) as exc:
        print(f"noiselib: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
