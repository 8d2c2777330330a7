"""Command-line harness.

Subcommands:
  verify     run the oracle-vs-DP numerical validation corpus
  sweep      lambda sweep over random synthetic lattices, CSV out
  train-toy  train the toy streaming model under one penalty setting
  latency    MAD/MED between hypothesis and reference timestamp files

All randomness comes from numpy's default PCG64 generator, seeded
explicitly from --seed, so outputs are byte-reproducible. The
LATTICELOSS_THREADS environment variable caps worker threads (results
are sorted and never depend on the thread count); LATTICELOSS_KERNELS
selects the compiled or pure-Python kernel backend.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._backend import backend_name
from .lattice import lattice_from_logits, TokenizedUtterance
from .latency import latency_report, parse_timestamps, pair_utterances
from .oracle import PATH_BUDGET, oracle_weights_and_davg, path_count
from .penalty import (
    DEFAULT_LAMBDAS,
    PenaltyConfig,
    apply_penalty,
    delay_score,
    path_score,
)
from .loss import viterbi
from .toy import ToyTaskConfig, ToyTrainConfig, seed_averaged_curves, train_toy
from .verify import run_verification

SWEEP_HEADER = "# latticeloss-sweep v1"
TRAIN_HEADER = "# latticeloss-train-toy v1"


def _thread_count() -> int:
    raw = os.environ.get("LATTICELOSS_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"LATTICELOSS_THREADS must be >= 1, got {raw!r}")
    return n


def _parse_dims(text: str):
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"dims must look like TxUxV, got {text!r}"
        )
    T, U, V = (int(p) for p in parts)
    if T < 1 or U < 0 or V < 2:
        raise argparse.ArgumentTypeError(f"invalid dims {text!r}")
    return T, U, V


def _parse_lambdas(text: str):
    try:
        vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}")
    return sorted(vals)


def cmd_verify(args) -> int:
    results = run_verification(corpus=args.corpus, seed=args.seed,
                               perturb=args.perturb)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        extra = f"  ({r.detail})" if r.detail else ""
        print(f"{r.name:<{width}}  max_err={r.max_err:.3e}  "
              f"tol={r.tolerance:.1e}  {status}{extra}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed "
          f"(corpus={args.corpus}, seed={args.seed}, backend={backend_name()})")
    return 1 if failed else 0


def _sweep_trial(trial: int, seed: int, dims, lambdas):
    T, U, V = dims
    rng = np.random.default_rng([seed, trial, 0x5EE9])
    tokens = rng.integers(1, V, size=U)
    logits = rng.standard_normal((T, U + 1, V))
    lat = lattice_from_logits(
        TokenizedUtterance(tokens=tokens, blank_id=0, logits=logits)
    )
    enumerable = path_count(T, U) <= PATH_BUDGET
    rows = []
    for lam in lambdas:
        pen = apply_penalty(lat, PenaltyConfig(lam=lam))
        path, _ = viterbi(pen)
        vdelay = delay_score(path, T)
        if enumerable:
            _, davg = oracle_weights_and_davg(pen)
        else:
            davg = vdelay
        loss = -path_score(lat, path)
        rows.append((lam, trial, davg, vdelay, loss))
    return rows


def cmd_sweep(args) -> int:
    threads = _thread_count()
    trials = range(args.trials)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_sweep_trial, t, args.seed, args.dims, args.lambdas)
                for t in trials
            ]
            per_trial = [f.result() for f in futures]
    else:
        per_trial = [_sweep_trial(t, args.seed, args.dims, args.lambdas)
                     for t in trials]
    rows = sorted(
        (row for rows in per_trial for row in rows),
        key=lambda r: (r[0], r[1]),
    )
    lines = [SWEEP_HEADER, "lambda,trial,d_avg,viterbi_delay,loss"]
    for lam, trial, davg, vdelay, loss in rows:
        lines.append(f"{float(lam)!r},{trial},{float(davg)!r},"
                     f"{float(vdelay)!r},{float(loss)!r}")
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    print(f"wrote {len(rows)} rows ({args.trials} trials x "
          f"{len(args.lambdas)} lambdas) to {args.out}")
    return 0


def cmd_train_toy(args) -> int:
    if args.lam > 0 and args.fastemit > 0:
        raise ValueError("--lambda and --fastemit are mutually exclusive")
    cfg = ToyTrainConfig(
        lam=args.lam,
        side=args.side,
        fastemit=args.fastemit,
        epochs=args.epochs,
        lr=args.lr,
        lambda_scale=args.lambda_scale,
        task=ToyTaskConfig(),
    )
    records = train_toy(cfg, base_seed=args.seed, num_seeds=args.seeds,
                        threads=_thread_count())
    lines = [
        TRAIN_HEADER,
        "lambda,fastemit,side,seed,epoch,train_loss,heldout_loss,mean_delay",
    ]
    for rec in records:
        lines.append(
            f"{float(args.lam)!r},{float(args.fastemit)!r},{args.side},"
            f"{rec.seed},{rec.epoch},{float(rec.train_loss)!r},"
            f"{float(rec.heldout_loss)!r},{float(rec.mean_delay)!r}"
        )
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    loss_curve, delay_curve = seed_averaged_curves(records, args.seeds,
                                                   args.epochs)
    label = (f"fastemit={args.fastemit}" if args.fastemit > 0
             else f"lambda={args.lam} (effective {cfg.effective_lam}) "
                  f"side={args.side}")
    print(f"train-toy {label} seeds={args.seeds} epochs={args.epochs}")
    print(f"final heldout loss (seed mean): {loss_curve[-1]:.6f}")
    print(f"final mean viterbi delay (seed mean): {delay_curve[-1]:.4f} frames")
    print(f"wrote {len(records)} rows to {args.out}")
    return 0


def cmd_latency(args) -> int:
    with open(args.hyp, encoding="utf-8") as f:
        hyp = parse_timestamps(f.read())
    with open(args.ref, encoding="utf-8") as f:
        ref = parse_timestamps(f.read())
    report = latency_report(pair_utterances(hyp, ref),
                            med_matched_only=not args.med_all)
    print(f"MAD: {report.mad * 1000.0:.3f} ms ({report.matched_pairs} matched words)")
    print(f"MED: {report.med * 1000.0:.3f} ms ({report.med_utterances} utterances)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latticeloss",
        description="Delay-penalized transducer loss: verification and experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the numerical validation corpus")
    p.add_argument("--corpus", type=int, default=200,
                   help="number of random lattices (default 200)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb", type=float, default=0.0,
                   help="perturb one entry on the DP side only (negative control)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="lambda sweep over random lattices")
    p.add_argument("--lambdas", type=_parse_lambdas,
                   default=list(DEFAULT_LAMBDAS),
                   help="comma-separated non-negative values "
                        "(default: the standard grid)")
    p.add_argument("--dims", type=_parse_dims, default=(6, 3, 5),
                   help="lattice dimensions TxUxV (default 6x3x5)")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train-toy", help="train the toy streaming model")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--fastemit", type=float, default=0.0)
    p.add_argument("--side", choices=["nonblank", "blank"], default="nonblank")
    p.add_argument("--epochs", type=int, default=80)
    p.add_argument("--seeds", type=int, default=5,
                   help="number of independent seeds (default 5)")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--lambda-scale", type=float, default=45.0,
                   help="multiplier mapping grid lambdas to toy-frame units")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("latency", help="MAD/MED between timestamp files")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--med-all", action="store_true",
                   help="average MED over all utterances, not only those "
                        "whose last words match")
    p.set_defaults(func=cmd_latency)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
