"""Command-line entry point: ``bystander <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .. import abcnn
from ..attributes import DEFAULT_SCHEMA, DEFAULT_THRESHOLD, attribute_diff, decode, matches
from ..facegeom import EyePair, blur_square_from_eyes, blur_region, read_ppm, write_ppm
from ..target_filter import DetectedFace, filter_targets
from .builders import build_sweep_batch
from .metrics import SweepTrial, sweep_table, threshold_sweep
from .runner import simulate
from .scenario import Seeds, load_scenario

log = logging.getLogger("bystander")


class CLIError(Exception):
    pass


def _floats(text: str, count: int | None = None) -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise CLIError(f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(values) != count:
        raise CLIError(f"expected {count} comma-separated numbers, got {text!r}")
    return values


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise CLIError(f"expected comma-separated integers, got {text!r}") from None


def _load_yaml(path: str):
    try:
        return yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise CLIError(f"{path}: {exc}") from None


def cmd_simulate(args) -> None:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seeds(Seeds.single(args.seed))
    path = simulate(scenario, args.out, workers=args.workers)
    print(path)


def cmd_match(args) -> None:
    a = decode(args.a, DEFAULT_SCHEMA)
    b = decode(args.b, DEFAULT_SCHEMA)
    diff = attribute_diff(a, b)
    verdict = "match" if matches(a, b, args.threshold) else "no match"
    print(f"diff {diff}")
    print(verdict)


def cmd_blur(args) -> None:
    x1, y1, x2, y2 = _floats(args.eyes, 4)
    image = read_ppm(args.image)
    region = blur_square_from_eyes(EyePair((x1, y1), (x2, y2)))
    write_ppm(blur_region(image, region, args.sigma), args.out)
    print(f"blurred square center=({region.center[0]:g},{region.center[1]:g}) side={region.side:g}")


def cmd_filter(args) -> None:
    doc = _load_yaml(args.faces)
    if not isinstance(doc, dict) or "image_width" not in doc or "faces" not in doc:
        raise CLIError(f"{args.faces}: expected 'image_width' and 'faces'")
    faces = []
    for i, fd in enumerate(doc["faces"]):
        try:
            (lx, ly), (rx, ry) = fd["eyes"]
            attrs = fd.get("attributes")
            predicted = decode(attrs) if attrs else decode("-" * DEFAULT_SCHEMA.size)
            faces.append(DetectedFace.from_eyes(str(fd.get("id", i)), EyePair((lx, ly), (rx, ry)),
                                                predicted, bool(fd.get("smiling", False))))
        except (KeyError, TypeError, ValueError) as exc:
            raise CLIError(f"{args.faces}: faces[{i}]: {exc}") from None
    print("face,smiling,size,central,target")
    for v in filter_targets(faces, int(doc["image_width"])):
        print(f"{v.face_id},{int(v.rule_smiling)},{int(v.rule_size)},{int(v.rule_central)},{int(v.is_target)}")


def _target_distribution(choice, n: int) -> abcnn.ClassDistribution:
    if choice is None or choice == "balanced":
        return abcnn.ClassDistribution.balanced(n)
    if isinstance(choice, list):
        return abcnn.ClassDistribution.from_positive(choice)
    # path to a labelled validation set
    return abcnn.compute_distribution(abcnn.LabeledDataset.load(choice))


def cmd_train(args) -> None:
    data = abcnn.LabeledDataset.load(args.data)
    conf = _load_yaml(args.config) or {}
    cfg = abcnn.TrainConfig.from_dict(conf)
    hidden = list(conf.get("hidden", []))
    net = abcnn.MicroNetwork.initialize(
        [data.n_features, *hidden, data.n_attributes], conf.get("init_seed", cfg.rng_seed)
    )
    target = _target_distribution(conf.get("target"), data.n_attributes)
    model, trace = abcnn.train(net, data, target, cfg)
    abcnn.save_checkpoint(model, args.out)
    sys.stdout.write(abcnn.trace_to_csv(trace))


def cmd_eval(args) -> None:
    net = abcnn.load_checkpoint(args.ckpt)
    data = abcnn.LabeledDataset.load(args.data)
    per = abcnn.per_attribute_accuracy(net, data)
    names = DEFAULT_SCHEMA.matching_names if len(per) == DEFAULT_SCHEMA.size else [f"attr{i}" for i in range(len(per))]
    print("attribute,accuracy")
    for name, acc in zip(names, per):
        print(f"{name},{acc:.6f}")
    print(f"average,{abcnn.mean_accuracy(per):.6f}")


def cmd_gen_data(args) -> None:
    data = abcnn.synthetic_attribute_data(
        args.samples, _floats(args.positive), args.features_per_attribute, args.separation, args.seed
    )
    data.save(args.out)
    print(f"{len(data)} samples, {data.n_features} features, {data.n_attributes} attributes -> {args.out}")


def cmd_sweep(args) -> None:
    doc = _load_yaml(args.batch)
    if not isinstance(doc, dict):
        raise CLIError(f"{args.batch}: expected a mapping with 'trials' or 'generate'")
    if "trials" in doc:
        trials = []
        for i, t in enumerate(doc["trials"]):
            try:
                trials.append(SweepTrial(decode(t["a"]), decode(t["b"]), bool(t["same"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise CLIError(f"{args.batch}: trials[{i}]: {exc}") from None
    elif "generate" in doc:
        g = doc["generate"] or {}
        kwargs = {k: g[k] for k in ("seed", "prevalence", "diff_counts") if k in g}
        trials = build_sweep_batch(int(g.get("persons", 50)), **kwargs)
    else:
        raise CLIError(f"{args.batch}: expected 'trials' or 'generate'")
    sys.stdout.write(sweep_table(threshold_sweep(trials, _ints(args.thresholds))))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bystander", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario file, write blurred photos and report.json")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override every scenario seed")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("match", help="attribute difference between two encoded vectors")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("blur", help="blur the face square defined by two eye positions")
    p.add_argument("--image", required=True)
    p.add_argument("--eyes", required=True, help="x1,y1,x2,y2")
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=None, help="default: square side / 8")
    p.set_defaults(func=cmd_blur)

    p = sub.add_parser("filter", help="target/stranger verdicts for annotated faces")
    p.add_argument("--faces", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="train a micro network; prints the per-epoch trace as CSV")
    p.add_argument("--data", required=True, help=".npz with 'inputs' and 'labels'")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-attribute and average accuracy of a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-data", help="write a synthetic labelled dataset (.npz)")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--positive", default="0.5,0.5", help="positive fraction per attribute")
    p.add_argument("--features-per-attribute", type=int, default=2)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("sweep", help="true/false positives of stranger matching per threshold")
    p.add_argument("--batch", required=True)
    p.add_argument("--thresholds", default="0,1,2")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (CLIError, ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"bystander {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
