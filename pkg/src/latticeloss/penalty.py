"""Delay penalization of transducer lattices.

The penalty shifts the non-blank log-probabilities by a per-frame offset
before the forward-backward pass:

    y'(t, u) = y(t, u) + lam * ((T - 1) / 2 - t)        (centered)
    y'(t, u) = y(t, u) - lam * t                        (uncentered)

which tilts the path posterior toward earlier emissions. At small lam this
is a first-order approximation to maximizing L + lam * d_avg, where d_avg
is the posterior-averaged path delay score; the exact gradients of that
augmented objective are available here (via brute-force enumeration) for
validation. A FastEmit-style baseline that scales non-blank gradients
instead of shifting inputs is included for comparison.
"""

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Lattice
from .loss import AlignmentPath, LossResult, loss_and_grad

SIDE_NONBLANK = "nonblank"
SIDE_BLANK = "blank"

# The lambda grid used in the experiment harness by default.
DEFAULT_LAMBDAS = (0.0015, 0.0030, 0.0060, 0.0075, 0.0100)


@dataclass(frozen=True)
class PenaltyConfig:
    """Delay-penalty settings.

    Attributes:
      lam: per-frame penalty scale, >= 0. Zero is a strict no-op.
      side: "nonblank" shifts the token grid by +lam*offset; "blank" shifts
        the blank grid by -lam*offset (the opposite direction, making early
        blanks costlier instead of early tokens cheaper).
      centered: include the (T-1)/2 term in the offset. Centering adds a
        path-independent constant to every path score, so it changes the
        loss value but never the gradients.
    """

    lam: float
    side: str = SIDE_NONBLANK
    centered: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lam must be finite and >= 0, got {self.lam}")
        if self.side not in (SIDE_NONBLANK, SIDE_BLANK):
            raise ValueError(
                f"side must be {SIDE_NONBLANK!r} or {SIDE_BLANK!r}, "
                f"got {self.side!r}"
            )


def frame_offsets(T: int, centered: bool = True) -> np.ndarray:
    """Per-frame delay offsets: (T-1)/2 - t when centered, -t otherwise."""
    t = np.arange(T, dtype=np.float64)
    return (T - 1) / 2.0 - t if centered else -t


def apply_penalty(lat: Lattice, cfg: PenaltyConfig) -> Lattice:
    """Return the penalized lattice; the input is never modified.

    lam = 0 returns the input object itself (lattices are immutable), so
    the unpenalized computation is reproduced bit-exactly. Penalized
    entries may exceed 0, so the output is flagged non-normalized.
    """
    if cfg.lam == 0.0:
        return lat
    shift = cfg.lam * frame_offsets(lat.num_frames, cfg.centered)
    if cfg.side == SIDE_NONBLANK:
        return Lattice(
            y=lat.y + shift[:, None], blank=lat.blank, normalized=False
        )
    return Lattice(
        y=lat.y, blank=lat.blank - shift[:, None], normalized=False
    )


def delay_score(path: AlignmentPath, T: int) -> float:
    """Path delay score d = sum_u ((T-1)/2 - pi_u); larger means earlier."""
    pi = path.emission_frames
    if pi.size and pi[-1] >= T:
        raise ValueError(f"emission frame {pi[-1]} out of range for T={T}")
    return float(((T - 1) / 2.0 - pi).sum())


def path_score(lat: Lattice, path: AlignmentPath) -> float:
    """Log-probability of one complete path.

    Sums the U vertical transitions y(pi_u, u) and the T blank transitions
    the path takes: blank at every frame t, at the token level the path
    holds when leaving that frame, ending with the terminal blank(T-1, U).
    """
    T, U = lat.num_frames, lat.num_tokens
    pi = path.emission_frames
    if len(path) != U:
        raise ValueError(f"path has {len(path)} tokens, lattice has {U}")
    if pi.size and pi[-1] >= T:
        raise ValueError(f"emission frame {pi[-1]} out of range for T={T}")
    # Level held when leaving frame t = number of tokens emitted at frames <= t.
    levels = np.searchsorted(pi, np.arange(T), side="right")
    s = lat.blank[np.arange(T), levels].sum()
    if U:
        s += lat.y[pi, np.arange(U)].sum()
    return float(s)


def penalized_loss_and_grad(lat: Lattice, cfg: PenaltyConfig) -> LossResult:
    """Loss and gradients of the penalized lattice.

    This is the production training path: exactly
    ``loss_and_grad(apply_penalty(lat, cfg))``.
    """
    return loss_and_grad(apply_penalty(lat, cfg))


def exact_augmented_grads(lat: Lattice, cfg: PenaltyConfig):
    """Exact per-path gradients of the augmented objective L + lam * d_avg.

    Computed by brute-force enumeration:

        g_i = (1 + lam * (d_i - d_avg)) * w_i

    with w_i the unpenalized path weights. Returns ``(grads, d_avg)``.
    Neither ``side`` nor ``centered`` enters: d_i - d_avg is invariant to
    the per-path-constant shifts those options introduce.

    Only feasible on small lattices (the path count C(T-1+U, U) is
    capped at 10**5); raises for larger ones.
    """
    from .oracle import EnumerationBudgetError, oracle_weights_and_davg, path_count

    n = path_count(lat.num_frames, lat.num_tokens)
    if n > 10**5:
        raise EnumerationBudgetError(
            f"lattice has {n} paths; exact_augmented_grads caps at {10**5}"
        )
    weights, d_avg, delays = oracle_weights_and_davg(lat, return_delays=True)
    grads = (1.0 + cfg.lam * (delays - d_avg)) * weights
    return grads, d_avg


def fastemit_loss_and_grad(lat: Lattice, lambda_fe: float) -> LossResult:
    """FastEmit-style baseline: scale non-blank gradients by (1 + lambda_fe).

    The loss value and the blank gradients are reported unmodified; only
    the token-emission gradient contributions are amplified.
    """
    if not (math.isfinite(lambda_fe) and lambda_fe >= 0):
        raise ValueError(f"lambda_fe must be finite and >= 0, got {lambda_fe}")
    res = loss_and_grad(lat)
    return LossResult(
        loss=res.loss,
        grad_y=(1.0 + lambda_fe) * res.grad_y,
        grad_blank=res.grad_blank,
    )
