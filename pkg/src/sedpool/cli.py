"""Command line entry point: ``sedpool {synth,extract,train,predict,evaluate}``."""
import argparse
import logging
import sys
from pathlib import Path

from .errors import SedError
from .manifest import load_groundtruth, read_classes
from .presets import SHIPPED, load_preset, output_resolution


def _preset(value):
    if value in SHIPPED or (value.endswith((".yaml", ".yml")) and Path(value).is_file()):
        return value
    raise argparse.ArgumentTypeError(
        f"invalid preset {value!r} (choose from {', '.join(SHIPPED)} or a preset .yaml file)"
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="sedpool", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic WAVE corpus with manifests")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-weak", type=int, default=20)
    p.add_argument("--n-strong", type=int, default=20)
    p.add_argument("--n-unlabeled", type=int, default=40)
    p.add_argument("--n-classes", type=int, default=10)
    p.add_argument("--clip-length", type=float, default=10.0)
    p.add_argument("--event-length", type=float, nargs=2, default=(2.5, 5.0), metavar=("MIN", "MAX"))

    p = sub.add_parser("extract", help="compute standardized log-mel features")
    p.add_argument("--manifest", required=True, help="manifest directory (classes.txt, weak/strong/unlabeled.tsv)")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("train", help="mean-teacher training")
    p.add_argument("--preset", required=True, type=_preset)
    p.add_argument("--config", help="training config YAML (defaults: the full 200-epoch schedule)")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="write per-threshold detection TSVs from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--preset", required=True, type=_preset)
    p.add_argument("--out", required=True)
    p.add_argument("--clips", help="durations-style table restricting which clips are decoded")

    p = sub.add_parser("evaluate", help="PSDS of a detections directory")
    p.add_argument("--detections-dir", required=True)
    p.add_argument("--groundtruth", required=True)
    p.add_argument("--durations", required=True)
    p.add_argument("--preset", required=True, type=_preset)
    p.add_argument("--classes", help="vocabulary file; defaults to the classes present in the ground truth")
    p.add_argument("--report", help="where to write the per-threshold table")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (SedError, OSError) as exc:
        print(f"sedpool {args.command}: error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args):
    from . import pipeline

    if args.command == "synth":
        from .synth import SynthSpec, synth_dataset

        spec = SynthSpec(seed=args.seed, n_weak=args.n_weak, n_strong=args.n_strong,
                         n_unlabeled=args.n_unlabeled, n_classes=args.n_classes,
                         clip_length=args.clip_length, event_length=tuple(args.event_length))
        corpus = synth_dataset(spec, args.out)
        print(f"wrote {sum(corpus.manifest.counts()[k] for k in ('weak', 'strong', 'unlabeled'))} clips, "
              f"{len(corpus.groundtruth)} events to {args.out}")
    elif args.command == "extract":
        pipeline.extract(args.manifest, args.out, jobs=args.jobs)
        print(f"features written to {args.out}")
    elif args.command == "train":
        from .training import TrainConfig

        preset = load_preset(args.preset)
        config = TrainConfig.load(args.config) if args.config else TrainConfig()
        factor, duration = output_resolution(preset)
        print(f"preset {preset.name}: time pooling x{factor}, output frame duration {duration:.4f} s")
        result = pipeline.run_training(preset, config, args.features, args.out)
        first, last = result.history[0]["total"], result.history[-1]["total"]
        print(f"loss {first:.4f} -> {last:.4f}; checkpoints in {args.out}")
    elif args.command == "predict":
        from .manifest import read_durations

        preset = load_preset(args.preset)
        clips = list(read_durations(args.clips)) if args.clips else None
        out = pipeline.run_predict(args.checkpoint, args.features, preset, args.out, clips)
        print(f"wrote {len(out)} detection files to {args.out}")
    elif args.command == "evaluate":
        preset = load_preset(args.preset)
        classes = read_classes(args.classes) if args.classes else None
        gt = load_groundtruth(args.groundtruth, args.durations, classes)
        report = pipeline.run_evaluate(args.detections_dir, gt, preset, args.report)
        print(report.summary())
    return 0


if __name__ == "__main__":
    sys.exit(main())
