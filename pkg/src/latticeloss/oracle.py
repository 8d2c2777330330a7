"""Brute-force path enumeration oracle.

Materializes every monotone alignment of a small lattice and recomputes
the loss, path weights, occupation gradients, and the delay-regularized
objective directly from per-path sums. No code is shared with the
forward-backward recursion, so agreement between the two is evidence of
correctness rather than tautology.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lattice import Lattice
from .loss import AlignmentPath

PATH_BUDGET = 10**6


class EnumerationBudgetError(ValueError):
    """Raised when a lattice has too many paths to enumerate."""


@dataclass(frozen=True)
class PathEnumeration:
    """Every monotone path of a (T, U) lattice, in lexicographic order."""

    paths: list
    count: int


def path_count(T: int, U: int) -> int:
    """Number of monotone alignments: C(T - 1 + U, U)."""
    return math.comb(T - 1 + U, U)


def _check_budget(T: int, U: int, budget: int = PATH_BUDGET) -> int:
    n = path_count(T, U)
    if n > budget:
        raise EnumerationBudgetError(
            f"lattice T={T}, U={U} has {n} paths, budget is {budget}"
        )
    return n


def _path_matrix(T: int, U: int) -> np.ndarray:
    """All emission-frame vectors as one (count, U) int64 array,
    lexicographically ordered."""
    count = _check_budget(T, U)
    if U == 0:
        return np.empty((1, 0), dtype=np.int64)
    mat = np.fromiter(
        itertools.chain.from_iterable(
            itertools.combinations_with_replacement(range(T), U)
        ),
        dtype=np.int64,
        count=count * U,
    )
    return mat.reshape(count, U)


def enumerate_paths(T: int, U: int) -> PathEnumeration:
    """Exhaustive, duplicate-free enumeration of all alignments."""
    if T < 1 or U < 0:
        raise ValueError(f"invalid dimensions T={T}, U={U}")
    mat = _path_matrix(T, U)
    paths = [AlignmentPath(emission_frames=row) for row in mat]
    return PathEnumeration(paths=paths, count=len(paths))


def _scores_and_delays(lat: Lattice):
    """Vectorized per-path scores s_i and delay scores d_i."""
    T, U = lat.num_frames, lat.num_tokens
    mat = _path_matrix(T, U)
    # Token level held when leaving frame t = #{u : pi_u <= t}.
    levels = (mat[:, :, None] <= np.arange(T)[None, None, :]).sum(axis=1)
    scores = lat.blank[np.arange(T)[None, :], levels].sum(axis=1)
    if U:
        scores = scores + lat.y[mat, np.arange(U)[None, :]].sum(axis=1)
    delays = ((T - 1) / 2.0 - mat).sum(axis=1)
    return mat, scores, delays


def _logsumexp(scores: np.ndarray) -> float:
    # Fixed reduction order: max-shift, then left-to-right sum.
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()))


def oracle_loss(lat: Lattice) -> float:
    """Total log-probability as a stable log-sum-exp over all path scores."""
    _, scores, _ = _scores_and_delays(lat)
    return _logsumexp(scores)


def oracle_weights_and_davg(lat: Lattice, return_delays: bool = False):
    """Posterior path weights w_i = exp(s_i - L) and d_avg = sum_i d_i w_i."""
    _, scores, delays = _scores_and_delays(lat)
    weights = np.exp(scores - _logsumexp(scores))
    d_avg = float(weights @ delays)
    if return_delays:
        return weights, d_avg, delays
    return weights, d_avg


def oracle_grad(lat: Lattice):
    """Occupation gradients by summing path weights per transition.

    Returns ``(grad_y, grad_blank)`` in the same minimization convention
    as the forward-backward gradients: each entry is minus the total
    weight of paths taking that transition.
    """
    T, U = lat.num_frames, lat.num_tokens
    mat, scores, _ = _scores_and_delays(lat)
    weights = np.exp(scores - _logsumexp(scores))
    occ_y = np.zeros((T, U), dtype=np.float64)
    occ_blank = np.zeros((T, U + 1), dtype=np.float64)
    levels = (mat[:, :, None] <= np.arange(T)[None, None, :]).sum(axis=1)
    frames = np.broadcast_to(np.arange(T)[None, :], levels.shape)
    np.add.at(occ_blank, (frames.ravel(), levels.ravel()),
              np.repeat(weights, T))
    if U:
        tokens = np.broadcast_to(np.arange(U)[None, :], mat.shape)
        np.add.at(occ_y, (mat.ravel(), tokens.ravel()), np.repeat(weights, U))
    return -occ_y, -occ_blank


def oracle_delay_regularized_objective(lat: Lattice, lam: float):
    """The augmented objective and its exact per-path gradients.

    Returns ``(l_aug, exact_grads, approx_grads)`` where

      l_aug       = L + lam * d_avg,
      exact_grads = (1 + lam * (d_i - d_avg)) * w_i        (exact),
      approx_grads = softmax over i of (lam * d_i + s_i)   (small-lam form,
                     identical to the penalized lattice's path weights).
    """
    _, scores, delays = _scores_and_delays(lat)
    total = _logsumexp(scores)
    weights = np.exp(scores - total)
    d_avg = float(weights @ delays)
    l_aug = total + lam * d_avg
    exact = (1.0 + lam * (delays - d_avg)) * weights
    shifted = lam * delays + scores
    approx = np.exp(shifted - _logsumexp(shifted))
    return l_aug, exact, approx
