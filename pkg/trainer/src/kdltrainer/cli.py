"""Trainer CLI: train / infer / parity."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import TransformerConfig
from .data import load_dataset
from .export import evaluate_with_primary, export_solutions, infer
from .training import (TrainSettings, load_checkpoint, save_checkpoint,
                       train, write_loss_curve)


def _config_from_args(args, const) -> TransformerConfig:
    return TransformerConfig(n_users=const.n_users,
                             n_waveguides=const.n_waveguides,
                             pas_per_waveguide=const.pas_per_waveguide,
                             n_model=args.n_model,
                             n_heads=args.n_heads,
                             n_enc_layers=args.enc_layers,
                             n_dec_layers=args.dec_layers,
                             cross_attention_orientation=args.orientation)


def _cmd_train(args) -> int:
    data = load_dataset(args.dataset)
    config = _config_from_args(args, data.constants)
    settings = TrainSettings(steps=args.steps, batch_size=args.batch,
                             learning_rate=args.lr, seed=args.seed)
    result = train(data, config, settings)
    save_checkpoint(result.model, args.output)
    if args.curve:
        write_loss_curve(result.loss_curve, args.curve)
    status = "diverged (kept last good state)" if result.diverged else "done"
    print(f"{status}: {len(result.loss_curve)} steps, "
          f"mean sum rate {result.final_mean_rate:.4f} bits/s/Hz")
    return 0


def _cmd_infer(args) -> int:
    model = load_checkpoint(args.model)
    data = load_dataset(args.dataset)
    rates, positions, beams, timings = infer(model, data)
    export_solutions(data, positions, beams, args.output)
    mean_ms = float(np.mean(timings))
    print(f"{len(data)} solutions -> {args.output}; "
          f"mean rate {float(rates.sum(dim=1).mean()):.4f}, "
          f"{mean_ms:.1f} ms/batch")
    return 0


def _cmd_parity(args) -> int:
    model = load_checkpoint(args.model)
    data = load_dataset(args.dataset)
    rates, positions, beams, _ = infer(model, data)
    export_solutions(data, positions, beams, args.solutions)
    scored = evaluate_with_primary(args.scenarios, args.solutions,
                                   args.eval_csv)
    own = {sid: float(r) for sid, r in
           zip(data.scenario_ids, rates.sum(dim=1))}
    worst = 0.0
    for sid, theirs in scored.items():
        rel = abs(own[sid] - theirs) / max(abs(theirs), 1e-12)
        worst = max(worst, rel)
    print(f"parity over {len(scored)} instances: worst relative "
          f"difference {worst:.3e}")
    return 0 if worst <= args.tol else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kdltrainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on an exported dataset")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--curve", default=None, help="loss-curve CSV path")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-model", type=int, default=128)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--enc-layers", type=int, default=2)
    p.add_argument("--dec-layers", type=int, default=2)
    p.add_argument("--orientation", default="standard",
                   choices=["standard", "transposed"])

    p = sub.add_parser("infer", help="export solutions for a dataset")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("parity", help="compare own rates with the evaluator")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("scenarios")
    p.add_argument("--solutions", default="parity_solutions.json")
    p.add_argument("--eval-csv", default="parity_eval.csv")
    p.add_argument("--tol", type=float, default=1e-6)

    args = parser.parse_args(argv)
    handlers = {"train": _cmd_train, "infer": _cmd_infer,
                "parity": _cmd_parity}
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
