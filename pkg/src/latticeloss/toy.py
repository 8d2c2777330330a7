"""Desk-scale training experiment.

A tiny streaming recognition task whose optimum rewards late emission:
the acoustic evidence for each token ramps up over a multi-frame span,
and the model only sees a short causal window, so waiting until the end
of a span yields the most confident emission. Trained with the plain
loss, the model's Viterbi alignment drifts toward the span ends; trained
with the delay penalty it stays near the onsets at some likelihood cost.
This reproduces the qualitative trade-off of the full-scale systems —
absolute numbers are not comparable.

The model is linear: the logits at node (t, u) are a weight matrix
applied to a causal window of features plus a bias selected by the
previous token. Gradients are the exact chain rule through the lattice
(no autodiff).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lattice import TokenizedUtterance, lattice_from_logits
from .loss import logit_grads, loss_and_grad, viterbi
from .penalty import (
    PenaltyConfig,
    fastemit_loss_and_grad,
    penalized_loss_and_grad,
)

BLANK_ID = 0


@dataclass(frozen=True)
class ToyExample:
    """One synthetic utterance with its ground-truth evidence onsets."""

    features: np.ndarray  # (T, vocab-1) float
    tokens: np.ndarray  # (U,) ids in [1, vocab)
    onsets: np.ndarray  # (U,) frame where each token's evidence starts


@dataclass(frozen=True)
class ToyTaskConfig:
    num_frames: int = 24
    num_tokens: int = 3
    vocab: int = 5
    span: int = 6  # frames of evidence per token, ramping up
    window: int = 3  # causal feature window seen by the model
    noise: float = 0.02
    train_size: int = 24
    heldout_size: int = 8


@dataclass(frozen=True)
class ToyTrainConfig:
    """One training configuration (a single penalty/baseline setting)."""

    lam: float = 0.0
    side: str = "nonblank"
    fastemit: float = 0.0
    epochs: int = 80
    lr: float = 1.0
    lambda_scale: float = 45.0
    task: ToyTaskConfig = ToyTaskConfig()

    @property
    def effective_lam(self) -> float:
        """Per-toy-frame penalty: the configured lam times lambda_scale.

        The experiment grid's lam values assume real encoder frame rates;
        the toy task runs at a much coarser effective rate, so they are
        rescaled. Only trend direction is comparable across scales.
        """
        return self.lam * self.lambda_scale


def make_example(rng: np.random.Generator, task: ToyTaskConfig) -> ToyExample:
    """Sample one utterance.

    Token u's feature channel (tokens[u] - 1) ramps up quadratically over
    frames [onset, onset + span); spans of consecutive tokens never
    overlap. Every channel gets Gaussian noise. The ramp makes evidence
    accumulate toward the span end, so a causal model profits from
    emitting late.
    """
    T, U, V = task.num_frames, task.num_tokens, task.vocab
    span = task.span
    if U < 1:
        raise ValueError("the toy task needs at least one token")
    # Random onsets with enough slack that each full span fits in T.
    jitter = rng.integers(0, 2, size=U)
    onsets = 1 + jitter[0] + np.concatenate(
        ([0], np.cumsum(span + jitter[1:]))
    )
    if onsets[-1] + span > T:
        raise ValueError(
            f"task does not fit: last span ends at {onsets[-1] + span}, T={T}"
        )
    tokens = rng.integers(1, V, size=U)
    features = task.noise * rng.standard_normal((T, V - 1))
    ramp = (np.arange(1, span + 1) / span) ** 2
    for u in range(U):
        sl = slice(onsets[u], onsets[u] + span)
        features[sl, tokens[u] - 1] += ramp
    return ToyExample(features=features, tokens=tokens, onsets=onsets)


def _windowed(features: np.ndarray, window: int) -> np.ndarray:
    """Causal window stack: row t concatenates features[t-window+1 .. t],
    zero-padded before frame 0. Shape (T, window * F)."""
    T, F = features.shape
    padded = np.concatenate([np.zeros((window - 1, F)), features])
    return np.concatenate([padded[i : i + T] for i in range(window)], axis=1)


class ToyModel:
    """Linear streaming model: logits(t, u) = W @ window(t) + E[prev(u)].

    prev(u) is tokens[u-1], or BLANK_ID for u = 0. Zero-initialized, so
    the first lattice is exactly uniform and all symmetry breaking comes
    from the data.

    The blank row of W is pinned to zero: the blank score is a pure
    context bias (via E), never a function of the features. Otherwise
    gradient descent finds a degenerate solution — emit every token
    up-front from the prior and let feature-driven blanks absorb all the
    timing — and emission delay stops measuring anything. With the
    acoustic path restricted to non-blank scores, emission timing has to
    be read from the token evidence, which is the regime the delay
    penalty is about.
    """

    def __init__(self, task: ToyTaskConfig):
        self.task = task
        F = task.vocab - 1
        self.W = np.zeros((task.vocab, task.window * F))
        self.E = np.zeros((task.vocab, task.vocab))

    def utterance(self, ex: ToyExample) -> TokenizedUtterance:
        win = _windowed(ex.features, self.task.window)
        prev = np.concatenate(([BLANK_ID], ex.tokens))
        logits = (win @ self.W.T)[:, None, :] + self.E[prev][None, :, :]
        return TokenizedUtterance(tokens=ex.tokens, blank_id=BLANK_ID,
                                  logits=logits)

    def grad_step(self, examples, loss_fn, lr: float) -> float:
        """One full-batch gradient-descent step; returns the mean loss of
        whatever objective loss_fn computes."""
        dW = np.zeros_like(self.W)
        dE = np.zeros_like(self.E)
        total = 0.0
        for ex in examples:
            utt = self.utterance(ex)
            res = loss_fn(lattice_from_logits(utt))
            total += res.loss
            g = logit_grads(utt, res)
            win = _windowed(ex.features, self.task.window)
            dW += np.einsum("tuv,tf->vf", g, win)
            prev = np.concatenate(([BLANK_ID], ex.tokens))
            np.add.at(dE, prev, g.sum(axis=0))
        dW[BLANK_ID, :] = 0.0  # blank has no acoustic weights
        scale = lr / len(examples)
        self.W -= scale * dW
        self.E -= scale * dE
        return total / len(examples)

    def evaluate(self, examples):
        """Mean unpenalized loss and mean Viterbi delay (frames past the
        evidence onset) over a set of examples."""
        loss_sum = 0.0
        delay_sum = 0.0
        delay_n = 0
        for ex in examples:
            lat = lattice_from_logits(self.utterance(ex))
            loss_sum += loss_and_grad(lat).loss
            path, _ = viterbi(lat)
            delay_sum += float((path.emission_frames - ex.onsets).sum())
            delay_n += len(ex.tokens)
        return loss_sum / len(examples), delay_sum / delay_n


@dataclass(frozen=True)
class EpochRecord:
    seed: int
    epoch: int
    train_loss: float
    heldout_loss: float
    mean_delay: float


def _loss_fn(cfg: ToyTrainConfig):
    if cfg.fastemit > 0.0:
        return lambda lat: fastemit_loss_and_grad(lat, cfg.fastemit)
    if cfg.effective_lam > 0.0:
        pen = PenaltyConfig(lam=cfg.effective_lam, side=cfg.side)
        return lambda lat: penalized_loss_and_grad(lat, pen)
    return loss_and_grad


def train_one_seed(cfg: ToyTrainConfig, base_seed: int, run: int):
    """Train with one data seed; returns the per-epoch records."""
    task = cfg.task
    rng = np.random.default_rng([base_seed, run, 0x70F])
    train = [make_example(rng, task) for _ in range(task.train_size)]
    heldout = [make_example(rng, task) for _ in range(task.heldout_size)]
    model = ToyModel(task)
    loss_fn = _loss_fn(cfg)
    records = []
    for epoch in range(1, cfg.epochs + 1):
        train_loss = model.grad_step(train, loss_fn, cfg.lr)
        if not math.isfinite(train_loss):
            raise RuntimeError(
                f"toy training diverged at epoch {epoch} "
                f"(loss={train_loss}); lower --lr or lambda"
            )
        heldout_loss, mean_delay = model.evaluate(heldout)
        records.append(EpochRecord(seed=run, epoch=epoch, train_loss=train_loss,
                                   heldout_loss=heldout_loss,
                                   mean_delay=mean_delay))
    return records


def train_toy(cfg: ToyTrainConfig, base_seed: int = 0, num_seeds: int = 5,
              threads: int = 1):
    """Run num_seeds independent trainings; returns records sorted by
    (seed, epoch). Results do not depend on the thread count."""
    if num_seeds < 1:
        raise ValueError(f"num_seeds must be >= 1, got {num_seeds}")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(train_one_seed, cfg, base_seed, run)
                       for run in range(num_seeds)]
            per_seed = [f.result() for f in futures]
    else:
        per_seed = [train_one_seed(cfg, base_seed, run)
                    for run in range(num_seeds)]
    return [rec for records in per_seed for rec in records]


def seed_averaged_curves(records, num_seeds: int, epochs: int):
    """Per-epoch means across seeds: (heldout_loss, mean_delay) arrays."""
    loss = np.zeros(epochs)
    delay = np.zeros(epochs)
    for rec in records:
        loss[rec.epoch - 1] += rec.heldout_loss / num_seeds
        delay[rec.epoch - 1] += rec.mean_delay / num_seeds
    return loss, delay
