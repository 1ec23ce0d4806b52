"""Command-line front end.

    blockattack gen-data  --out data/synth --classes 10 --n 1200
    blockattack train     --data data/synth --out model.json
    blockattack attack    --config campaign.cfg --out runs/attack
    blockattack baseline  --kind random-sign --config campaign.cfg --out runs/rs
    blockattack verify    --suite theorem1 --trials 100 --seed 7
    blockattack report    runs/attack runs/rs --noise runs/fgsm/noise.npz
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, harness
from .blocks import ImageSpec
from .errors import ConfigurationError
from .models import MLP, SoftmaxRegression, accuracy, gen_synthetic, train_sgd

log = logging.getLogger("blockattack")

CAMPAIGN_KEYS = ("mode", "epsilon", "initial_k", "batch_size", "max_queries", "max_rounds", "clip",
                 "seed", "images", "model", "dataset", "synthetic", "pgd_steps", "pgd_step_size",
                 "reference")


def parse_synthetic(text):
    """``classes=10,height=28,width=28,n=200,seed=1`` -> keyword dict."""
    out = {"classes": 10, "height": 28, "width": 28, "n": 200, "seed": 0}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, _, value = part.partition("=")
        if key not in out:
            raise ConfigurationError(f"unknown synthetic key {key!r}")
        out[key] = int(value)
    return out


def load_dataset(prefix=None, synthetic=None):
    if prefix:
        return dataio.load_idx_dataset(f"{prefix}-images.idx", f"{prefix}-labels.idx")
    if synthetic:
        s = parse_synthetic(synthetic)
        return gen_synthetic(s["classes"], ImageSpec(s["height"], s["width"], 1), s["n"], s["seed"])
    raise ConfigurationError("no dataset: give --data PREFIX or a synthetic spec")


def _campaign_values(args):
    values = dataio.read_config(args.config) if args.config else {}
    for key in CAMPAIGN_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _run_campaign(args, kind):
    values = _campaign_values(args)
    cfg = harness.CampaignConfig.from_mapping(values)
    if not values.get("model"):
        raise ConfigurationError("no model: give --model or 'model' in the config")
    model = dataio.load_model(values["model"])
    data = load_dataset(values.get("dataset"), values.get("synthetic"))
    keep = bool(args.save_noise)
    if kind == "attack":
        campaign = harness.run_attack(model, data, cfg, keep_images=keep)
    else:
        campaign = harness.run_baseline(model, data, cfg, kind, keep_images=keep)
    reference = harness.read_records(values["reference"]) if values.get("reference") else None
    summary = harness.write_campaign(campaign, args.out, reference)
    _print_summary([summary])
    return 0


def _print_summary(rows):
    cols = harness.SUMMARY_COLUMNS
    print("\t".join(cols))
    for row in rows:
        print("\t".join(f"{row[c]:.4g}" if isinstance(row[c], float) else str(row[c]) for c in cols))


def cmd_gen_data(args):
    spec = ImageSpec(args.height, args.width, 1)
    data = gen_synthetic(args.classes, spec, args.n, args.seed, args.spread, args.noise)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    dataio.save_idx_dataset(data, f"{args.out}-images.idx", f"{args.out}-labels.idx")
    print(f"wrote {len(data)} images to {args.out}-images.idx / {args.out}-labels.idx")
    return 0


def cmd_train(args):
    data = load_dataset(args.data)
    train, test = data.split(int(len(data) * args.train_fraction))
    classes = int(data.labels.max()) + 1
    if args.hidden:
        model = MLP.random([data.spec.size, args.hidden, classes], seed=args.seed, spec=data.spec)
    else:
        model = SoftmaxRegression.zeros(classes, data.spec.size, data.spec)
    model = train_sgd(model, train, args.epochs, args.lr, args.seed)
    dataio.save_model(model, args.out)
    test_acc = accuracy(model, test) if len(test) else float("nan")
    print(f"train accuracy {accuracy(model, train):.4f}  test accuracy {test_acc:.4f}  -> {args.out}")
    return 0


def cmd_attack(args):
    return _run_campaign(args, "attack")


def cmd_baseline(args):
    return _run_campaign(args, args.kind)


def cmd_verify(args):
    ok, lines, seconds = harness.run_suite(args.suite, seed=args.seed, trials=args.trials)
    for line in lines:
        print(line)
    print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'} ({len(lines)} lines, {seconds:.2f}s)")
    return 0 if ok else 1


def cmd_report(args):
    rows = []
    reference = harness.read_records(args.reference) if args.reference else None
    for path in args.campaigns:
        p = Path(path)
        rec_path = p / "records.csv" if p.is_dir() else p
        name = p.name if p.is_dir() else p.stem
        comparable = True
        summ = rec_path.parent / "summary.json"
        if summ.exists():
            comparable = json.loads(summ.read_text(encoding="utf-8")).get("comparable", True)
        rows.append(harness.summarize(name, harness.read_records(rec_path), comparable, reference))
    if rows:
        _print_summary(rows)
        if args.out:
            harness.write_csv(args.out, harness.SUMMARY_COLUMNS, ([r[c] for c in harness.SUMMARY_COLUMNS] for r in rows))
    if args.noise:
        with np.load(args.noise) as npz:
            hist, vertex = harness.noise_histogram(npz["x"], npz["x_adv"], float(npz["epsilon"]), args.bins)
        print("bin_lo\tbin_hi\tfraction")
        for lo, hi, frac in hist:
            print(f"{lo:.3f}\t{hi:.3f}\t{frac:.6f}")
        print(f"vertex fraction (|noise| = epsilon): {vertex:.6f}")
        if args.hist_out:
            harness.write_csv(args.hist_out, ("bin_lo", "bin_hi", "fraction"), hist)
    return 0


def _add_campaign_flags(p):
    p.add_argument("--config", help="key/value config file")
    p.add_argument("--model")
    p.add_argument("--data", dest="dataset", help="IDX prefix (PREFIX-images.idx, PREFIX-labels.idx)")
    p.add_argument("--synthetic", help="e.g. classes=10,height=28,width=28,n=200,seed=1")
    p.add_argument("--mode", choices=("untargeted", "targeted"))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--initial-k", dest="initial_k", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--max-queries", dest="max_queries", type=int)
    p.add_argument("--max-rounds", dest="max_rounds", type=int)
    p.add_argument("--clip", choices=("on", "off"))
    p.add_argument("--seed", type=int)
    p.add_argument("--images", type=int)
    p.add_argument("--pgd-steps", dest="pgd_steps", type=int)
    p.add_argument("--pgd-step-size", dest="pgd_step_size", type=float)
    p.add_argument("--reference", help="records.csv of a baseline campaign")
    p.add_argument("--save-noise", action="store_true", help="keep x / x_adv in noise.npz")
    p.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="blockattack", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic IDX dataset")
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--height", type=int, default=28)
    p.add_argument("--width", type=int, default=28)
    p.add_argument("--n", type=int, default=1200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spread", type=float, default=0.25)
    p.add_argument("--noise", type=float, default=0.12)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a victim model")
    p.add_argument("--data", required=True, help="IDX prefix")
    p.add_argument("--out", required=True, help="model file (JSON)")
    p.add_argument("--hidden", type=int, default=0, help="hidden units; 0 = softmax regression")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=5 / 6)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="run the hierarchical attack over an image pool")
    _add_campaign_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("baseline", help="run a baseline over the same pool")
    p.add_argument("--kind", choices=("random-sign", "fgsm", "pgd"), required=True)
    _add_campaign_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("verify", help="run a property-verification suite")
    p.add_argument("--suite", choices=harness.SUITES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="summarise campaign outputs")
    p.add_argument("campaigns", nargs="*", help="campaign directories or records.csv files")
    p.add_argument("--reference", help="records.csv for the conditional average column")
    p.add_argument("--out", help="write the summary table as CSV")
    p.add_argument("--noise", help="noise.npz from a campaign run with --save-noise")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--hist-out", dest="hist_out", help="write the noise histogram as CSV")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "clip", None) is not None:
        args.clip = args.clip == "on"
    try:
        return args.func(args)
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"blockattack: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
