"""Command-line entry point: ``proxyreg <subcommand>``.

Exit codes: 0 success, 1 data error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import config as cfgmod
from .captioner import train_captioner
from .data import atomic_write, load_dataset, save_dataset, sha256_file
from .errors import ConfigError, DataError, DomainError, NumericalError
from .fixtures import generate_fixture
from .metrics import evaluate, t_test
from .persist import (
    load_checkpoint, load_predictions, save_checkpoint, save_predictions, write_manifest,
)
from .proxy_space import CentroidStore, export_centroids, train_proxy
from .text import decode, tokenize

log = logging.getLogger("proxyreg")


def _setup_logging() -> None:
    level = os.environ.get("PROXYREG_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"PROXYREG_LOG must be one of {', '.join(levels)}, got {level!r}")
    log.setLevel(levels[level])
    if not any(getattr(h, "_proxyreg", False) for h in log.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        handler._proxyreg = True
        log.addHandler(handler)


def _parse_set(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        out[key.strip()] = value.strip()
    return out


def _resolve(args) -> dict:
    overrides = _parse_set(getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "lam", None) is not None:
        overrides["stage2.lam"] = args.lam
    if getattr(args, "loss_variant", None) is not None:
        overrides["stage1.loss_variant"] = args.loss_variant
    if getattr(args, "bidirectional", False):
        overrides["stage1.bidirectional"] = True
    return cfgmod.load_config(args.config, overrides)


def _require(path, flag: str, hint: str = "") -> Path:
    if path is None:
        raise ConfigError(f"{flag} is required{hint}")
    return Path(path)


def cmd_gen_fixture(args, flat):
    spec = cfgmod.section(flat, "fixture")
    out = _require(args.out, "--out")
    save_dataset(generate_fixture(spec), out)
    write_manifest(out, "gen-fixture", spec.seed, flat, {})
    log.info("wrote %d audios to %s", spec.topics * spec.audios_per_topic, out)


def cmd_train_proxy(args, flat):
    data = _require(args.data, "--data")
    out = _require(args.out, "--out")
    cfg = cfgmod.section(flat, "stage1")
    records = load_dataset(data)
    model, history = train_proxy(records, cfg)
    save_checkpoint(out, model, cfg.epochs, {"loss": history})
    write_manifest(out, "train-proxy", cfg.seed, flat, {"data": data})
    if history:
        log.info("stage-1 loss %.6f -> %.6f", history[0], history[-1])


def cmd_export_centroids(args, flat):
    data = _require(args.data, "--data")
    ckpt = _require(args.checkpoint, "--checkpoint", " (a train-proxy checkpoint)")
    out = _require(args.out, "--out")
    model = load_checkpoint(ckpt, kind="proxy")
    store = export_centroids(load_dataset(data), model)
    store.save(out)
    write_manifest(out, "export-centroids", model.config.seed, flat, {"data": data, "checkpoint": ckpt})


def cmd_train_captioner(args, flat):
    data = _require(args.data, "--data")
    cents = _require(args.centroids, "--centroids",
                     "; run `proxyreg train-proxy` then `proxyreg export-centroids` to create one")
    if not cents.exists():
        raise ConfigError(f"centroids file {cents} does not exist; create it with `proxyreg export-centroids`")
    out = _require(args.out, "--out")
    cfg = cfgmod.section(flat, "stage2")
    store = CentroidStore.load(cents)
    model, history = train_captioner(load_dataset(data), store, cfg)
    save_checkpoint(out, model, cfg.epochs)
    hist_path = out.with_name(out.name + ".history.csv")
    lines = ["epoch,tf_prob,ce,pc,total\n"] + [
        f"{i},{tf:.17g},{e.ce:.17g},{e.pc:.17g},{e.total:.17g}\n"
        for i, (tf, e) in enumerate(zip(history.tf_probs, history.epochs))]
    atomic_write(hist_path, "".join(lines))
    write_manifest(out, "train-captioner", cfg.seed, flat, {"data": data, "centroids": cents})


def cmd_decode(args, flat):
    data = _require(args.data, "--data")
    ckpt = _require(args.checkpoint, "--checkpoint", " (a train-captioner checkpoint)")
    out = _require(args.out, "--out")
    model = load_checkpoint(ckpt, kind="captioner")
    preds = {r.audio_id: decode(model.vocab, model.caption(r.features)) for r in load_dataset(data)}
    save_predictions(out, preds, ckpt)
    write_manifest(out, "decode", model.config.seed, flat, {"data": data, "checkpoint": ckpt})


def cmd_evaluate(args, flat):
    data = _require(args.data, "--data")
    pred_path = _require(args.predictions, "--predictions")
    out = _require(args.out, "--out")
    preds, ckpt_hash = load_predictions(pred_path)
    inputs = {"data": data, "predictions": pred_path}
    if args.checkpoint is not None:
        if sha256_file(args.checkpoint) != ckpt_hash:
            raise DataError(f"predictions in {pred_path} were not produced by checkpoint {args.checkpoint}")
        inputs["checkpoint"] = Path(args.checkpoint)
    refs = {r.audio_id: [tokenize(c) for c in r.captions] for r in load_dataset(data)}
    report = evaluate(preds, refs)
    report.save(out)
    write_manifest(out, "evaluate", int(flat["seed"]), flat, inputs)
    for name, value in report.items():
        print(f"{name},{value:.6f}")


def _read_sample(path) -> list[float]:
    values = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                for cell in row:
                    cell = cell.strip()
                    if not cell:
                        continue
                    try:
                        values.append(float(cell))
                    except ValueError:
                        if values:
                            raise DataError(f"{path}: non-numeric value {cell!r}") from None
    except FileNotFoundError:
        raise DataError(f"sample file not found: {path}") from None
    return values


def cmd_ttest(args, flat):
    res = t_test(_read_sample(args.sample_a), _read_sample(args.sample_b), args.kind)
    text = f"statistic,value\nt,{res.t:.17g}\ndf,{res.df:.17g}\np,{res.p:.17g}\n"
    if args.out:
        atomic_write(args.out, text)
        write_manifest(args.out, "ttest", int(flat["seed"]), flat,
                       {"sample_a": Path(args.sample_a), "sample_b": Path(args.sample_b)})
    sys.stdout.write(text)


COMMANDS = {
    "gen-fixture": cmd_gen_fixture,
    "train-proxy": cmd_train_proxy,
    "export-centroids": cmd_export_centroids,
    "train-captioner": cmd_train_captioner,
    "decode": cmd_decode,
    "evaluate": cmd_evaluate,
    "ttest": cmd_ttest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxyreg", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default",
                        help="profile name (default, desk) or flat JSON config file")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument("--out", help="output path")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one dotted config key; repeatable")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-fixture", parents=[common], help="write a synthetic dataset")

    p = sub.add_parser("train-proxy", parents=[common], help="stage 1: train the caption encoder")
    p.add_argument("--data", required=True)
    p.add_argument("--loss-variant", choices=("exclusive", "inclusive"))
    p.add_argument("--bidirectional", action="store_true")

    p = sub.add_parser("export-centroids", parents=[common], help="stage 1: write per-audio centroids")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("train-captioner", parents=[common], help="stage 2: train the captioner")
    p.add_argument("--data", required=True)
    p.add_argument("--centroids")
    p.add_argument("--lambda", dest="lam", type=float)

    p = sub.add_parser("decode", parents=[common], help="greedy-decode every clip of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against references")
    p.add_argument("--data", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--checkpoint", help="verify predictions came from this checkpoint")

    p = sub.add_parser("ttest", parents=[common], help="two-sample t-test of two score files")
    p.add_argument("sample_a")
    p.add_argument("sample_b")
    p.add_argument("--kind", choices=("pooled", "welch"), default="pooled")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _setup_logging()
        flat = _resolve(args)
        COMMANDS[args.command](args, flat)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    except (DataError, DomainError, NumericalError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
