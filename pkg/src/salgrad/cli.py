"""Command-line interface.

Subcommands: ``gen-data``, ``train``, ``saliency``, ``eval``, ``report``.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import imageio, synthetic
from .evaluation import batch_report
from .nn import CheckpointError, Network, TrainingDivergedError, desk_scale_net
from .pipeline import PipelineConfig, parse_config, run_pipeline

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="salgrad", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic labeled dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", default=",".join(synthetic.SHAPE_CLASSES))

    p = sub.add_parser("train", help="train the desk-scale classifier")
    p.add_argument("--train-dir", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-model", required=True)

    p = sub.add_parser("saliency", help="generate saliency maps for images")
    p.add_argument("--model", default=os.environ.get("SALGRAD_MODEL"))
    p.add_argument("--image")
    p.add_argument("--image-dir")
    p.add_argument("--config")
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--superpixels", type=int)
    p.add_argument("--compactness", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma-color", type=float)
    p.add_argument("--sigma-dist", type=float)
    p.add_argument("--stages", default=None, help="comma list of raw,smoothed,refined")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("eval", help="score saliency maps against masks")
    p.add_argument("--maps", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--beta-sq", type=float, default=0.3)
    p.add_argument("--out-csv", required=True)

    p = sub.add_parser("report", help="timing report from saliency sidecars")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out-csv", required=True)

    return parser


def _cmd_gen_data(args):
    classes = tuple(c.strip() for c in args.classes.split(",") if c.strip())
    samples = synthetic.generate_dataset(args.n, classes, args.size, args.seed)
    out = Path(args.out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    with open(out / "labels.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["image_id", "label", "class_name"])
        for i, sample in enumerate(samples):
            stem = f"{i:05d}"
            imageio.save_image(out / "images" / f"{stem}.png", sample.image)
            imageio.save_mask(out / "masks" / f"{stem}.png", sample.mask)
            writer.writerow([stem, sample.label, classes[sample.label]])
    print(f"wrote {len(samples)} samples to {out}")
    return EXIT_OK


def _load_dataset(train_dir):
    train_dir = Path(train_dir)
    labels_csv = train_dir / "labels.csv"
    if not labels_csv.exists():
        raise FileNotFoundError(f"{labels_csv} not found")
    images, labels, names = [], [], {}
    with open(labels_csv, newline="") as f:
        for row in csv.DictReader(f):
            images.append(imageio.load_image(train_dir / "images" / f"{row['image_id']}.png"))
            labels.append(int(row["label"]))
            names[int(row["label"])] = row.get("class_name", str(row["label"]))
    return np.array(images), np.array(labels), names


def _cmd_train(args):
    images, labels, names = _load_dataset(args.train_dir)
    size = images.shape[1]
    net = desk_scale_net(size, num_classes=int(labels.max()) + 1, seed=args.seed)
    net.class_names = names
    history = net.train(
        images, labels, args.epochs, args.lr, batch_size=args.batch_size, seed=args.seed
    )
    acc = net.accuracy(images, labels)
    net.save(args.out_model)
    last = history[-1] if history else float("nan")
    print(f"trained {args.epochs} epochs, final loss {last:.4f}, accuracy {acc:.3f}")
    print(f"model saved to {args.out_model}")
    return EXIT_OK


def _cmd_saliency(args):
    if not args.model:
        raise _UsageError("--model is required (or set SALGRAD_MODEL)")
    if bool(args.image) == bool(args.image_dir):
        raise _UsageError("exactly one of --image / --image-dir is required")

    if args.config:
        config = parse_config(Path(args.config).read_text())
    else:
        config = PipelineConfig()
    overrides = {
        "gamma": args.gamma,
        "epsilon": args.epsilon,
        "iterations": args.iters,
        "theta": args.theta,
        "superpixels": args.superpixels,
        "compactness": args.compactness,
        "alpha": args.alpha,
        "sigma_color": args.sigma_color,
        "sigma_dist": args.sigma_dist,
    }
    if args.stages:
        overrides["stages"] = tuple(s.strip() for s in args.stages.split(","))
    merged = {k: v for k, v in overrides.items() if v is not None}
    if merged:
        from dataclasses import replace

        config = replace(config, **merged)

    net = Network.load(args.model)
    if args.image:
        paths = [Path(args.image)]
    else:
        paths = sorted(
            p
            for p in Path(args.image_dir).iterdir()
            if p.suffix.lower() in {".png", ".pgm", ".ppm"}
        )
        if not paths:
            raise FileNotFoundError(f"no images found in {args.image_dir}")

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for path in paths:
        t0 = time.perf_counter()
        image = imageio.load_image(path)
        result = run_pipeline(net, image, config)
        for stage, s_map in result.maps.items():
            imageio.save_map(out / f"{path.stem}_{stage}.png", s_map)
        sidecar = {
            "image": path.name,
            "label": result.label,
            "class_name": (net.class_names or {}).get(result.label),
            "epsilon": result.epsilon,
            "cost_trace": result.cost_trace,
            "stage_seconds": result.timings,
            "wall_clock": time.perf_counter() - t0,
        }
        with open(out / f"{path.stem}.json", "w") as f:
            json.dump(sidecar, f, indent=2)
        print(f"{path.name}: label={result.label} -> {out}")
    return EXIT_OK


def _cmd_eval(args):
    out_csv = Path(args.out_csv)
    curve_csv = out_csv.with_name(out_csv.stem + "_curve.csv")
    rows, _, unmatched = batch_report(
        args.maps, args.gt, beta_sq=args.beta_sq, out_csv=out_csv, curve_csv=curve_csv
    )
    for name in unmatched:
        print(f"warning: unmatched file {name}", file=sys.stderr)
    mean_row = rows[-1]
    print(f"scored {len(rows) - 1} images, mean best-F {mean_row[1]:.4f}")
    print(f"wrote {out_csv} and {curve_csv}")
    return EXIT_OK


def _cmd_report(args):
    run_dir = Path(args.run_dir)
    sidecars = sorted(run_dir.glob("*.json"))
    if not sidecars:
        raise FileNotFoundError(f"no sidecar JSON files in {run_dir}")
    rows = []
    for path in sidecars:
        with open(path) as f:
            data = json.load(f)
        stage_s = data.get("stage_seconds", {})
        rows.append(
            (
                path.stem,
                stage_s.get("raw", 0.0),
                stage_s.get("smoothed", 0.0),
                stage_s.get("refined", 0.0),
                data.get("wall_clock", 0.0),
            )
        )
    with open(args.out_csv, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["image_id", "raw_s", "smoothed_s", "refined_s", "total_s"])
        for row in rows:
            writer.writerow([row[0]] + [f"{v:.4f}" for v in row[1:]])
        means = [float(np.mean([r[i] for r in rows])) for i in range(1, 5)]
        writer.writerow(["mean"] + [f"{v:.4f}" for v in means])
    print(f"wrote timing report for {len(rows)} images to {args.out_csv}")
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "saliency": _cmd_saliency,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, CheckpointError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
