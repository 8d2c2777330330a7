"""Log-space forward-backward over the alignment lattice.

Computes the total log-probability over all monotone alignments, its
analytic gradients with respect to the lattice entries (posterior
occupation probabilities, negated), the chain rule back to raw logits,
and the best single alignment (Viterbi).

Conventions:
  * loss = -(total log-probability): a minimization objective.
  * alpha/beta grids are (T, U+1); alpha[t, u] is the log-probability of
    reaching node (t, u) from (0, 0), i.e. of emitting the first u tokens
    and advancing to frame t.
  * Unreachable predecessors contribute -inf, the additive identity of
    log_add.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .lattice import Lattice, TokenizedUtterance, log_softmax


def log_add(a: float, b: float) -> float:
    """Stable log(e^a + e^b).

    -inf acts as the identity element; NaN inputs propagate to a NaN
    output.
    """
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@dataclass(frozen=True)
class AlignmentPath:
    """One monotone alignment, as the frame index emitting each token.

    ``emission_frames[u]`` is the frame of the vertical transition that
    emits token u. Frames are non-decreasing; several tokens may share a
    frame.
    """

    emission_frames: np.ndarray

    def __post_init__(self):
        pi = np.ascontiguousarray(self.emission_frames, dtype=np.int64)
        if pi.ndim != 1:
            raise ValueError(f"emission_frames must be 1-D, got {pi.shape}")
        if pi.size and (pi[0] < 0 or (np.diff(pi) < 0).any()):
            raise ValueError(
                "emission frames must be non-negative and non-decreasing"
            )
        pi.setflags(write=False)
        object.__setattr__(self, "emission_frames", pi)

    def __len__(self) -> int:
        return self.emission_frames.shape[0]


@dataclass(frozen=True)
class LossResult:
    """Loss value and gradient grids.

    ``loss`` is the negated total log-probability. ``grad_y[t, u]`` and
    ``grad_blank[t, u]`` are d(loss)/d(entry); their negations are the
    posterior occupation probabilities of the corresponding transitions,
    each in [0, 1].
    """

    loss: float
    grad_y: np.ndarray
    grad_blank: np.ndarray

    @property
    def total_log_prob(self) -> float:
        return -self.loss


def forward(lat: Lattice):
    """Fill the forward grid; return ``(alpha, total)``.

    alpha[0, 0] = 0 and
    alpha[t, u] = log_add(alpha[t, u-1] + y[t, u-1],
                          alpha[t-1, u] + blank[t-1, u]);
    the total log-probability is alpha[T-1, U] + blank[T-1, U].
    """
    alpha = np.empty((lat.num_frames, lat.num_tokens + 1), dtype=np.float64)
    total = kernels.forward_fill(lat.y, lat.blank, alpha)
    return alpha, total


def backward(lat: Lattice) -> np.ndarray:
    """Fill the suffix grid: beta[t, u] = log-probability of completing the
    lattice from node (t, u). beta[0, 0] equals the forward total."""
    beta = np.empty((lat.num_frames, lat.num_tokens + 1), dtype=np.float64)
    kernels.backward_fill(lat.y, lat.blank, beta)
    return beta


def loss_and_grad(lat: Lattice) -> LossResult:
    """Loss and analytic gradients in one forward-backward pass.

    The negated gradient of each entry is its posterior occupation:
      -d(loss)/d(y[t, u])     = exp(alpha[t, u] + y[t, u] + beta[t, u+1] - total)
      -d(loss)/d(blank[t, u]) = exp(alpha[t, u] + blank[t, u] + beta[t+1, u] - total)
    The terminal blank (T-1, U) has occupation exactly 1 (every path ends
    there); the dead last-frame blank entries (T-1, u < U) get exactly 0.
    """
    T, U = lat.num_frames, lat.num_tokens
    alpha = np.empty((T, U + 1), dtype=np.float64)
    beta = np.empty((T, U + 1), dtype=np.float64)
    occ_y = np.empty((T, U), dtype=np.float64)
    occ_blank = np.empty((T, U + 1), dtype=np.float64)
    total = kernels.forward_fill(lat.y, lat.blank, alpha)
    kernels.backward_fill(lat.y, lat.blank, beta)
    kernels.occupation_fill(lat.y, lat.blank, alpha, beta, total, occ_y, occ_blank)
    np.negative(occ_y, out=occ_y)
    np.negative(occ_blank, out=occ_blank)
    return LossResult(loss=-total, grad_y=occ_y, grad_blank=occ_blank)


def viterbi(lat: Lattice):
    """Best single alignment and its score.

    Returns ``(AlignmentPath, best_score)`` where the score is the log
    probability of the best complete path (hence <= the forward total).
    Ties prefer the vertical (token) transition, so the returned path is
    the earliest-emitting one among maximal paths.
    """
    pi = np.empty(lat.num_tokens, dtype=np.int64)
    score = kernels.viterbi_fill(lat.y, lat.blank, pi)
    return AlignmentPath(emission_frames=pi), score


def logit_grads(utt: TokenizedUtterance, result: LossResult) -> np.ndarray:
    """Chain rule from lattice gradients back to raw logits.

    ``result`` must come from the lattice built by
    ``lattice_from_logits(utt)``; each node consumed two of its log-softmax
    outputs (the reference token and blank), so per node
      grad_logits[v] = g_y * (1[v = token] - p[v]) + g_blank * (1[v = blank] - p[v])
    with p the node's softmax. Nodes with zero occupation get zero rows.
    """
    T, U1, V = utt.logits.shape
    U = utt.num_tokens
    if result.grad_y.shape != (T, U) or result.grad_blank.shape != (T, U1):
        raise ValueError(
            f"gradient grids {result.grad_y.shape}/{result.grad_blank.shape} "
            f"do not match logits shape {utt.logits.shape}"
        )
    probs = np.exp(log_softmax(utt.logits))
    g_y = np.zeros((T, U1), dtype=np.float64)
    g_y[:, :U] = result.grad_y
    g_sum = g_y + result.grad_blank
    grads = -g_sum[:, :, None] * probs
    if U:
        np.add.at(grads[:, :U, :], (slice(None), np.arange(U), utt.tokens),
                  result.grad_y)
    grads[:, :, utt.blank_id] += result.grad_blank
    return grads
