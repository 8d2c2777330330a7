"""Pure-Python lattice kernels, the fallback when the compiled extension
is unavailable. Same contracts as ``_kernels``; see ``_backend``."""

import math

import numpy as np

NEG_INF = float("-inf")


def _log_add(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def forward_fill(y: np.ndarray, blank: np.ndarray, alpha: np.ndarray) -> float:
    """Fill the forward grid in place and return the total log-probability.

    ``alpha[t, u]`` is the log-probability of having emitted the first ``u``
    tokens while consuming frames ``0..t``; the total adds the terminal blank.
    """
    T, U1 = blank.shape
    U = U1 - 1
    alpha[0, 0] = 0.0
    for u in range(1, U1):
        alpha[0, u] = alpha[0, u - 1] + y[0, u - 1]
    for t in range(1, T):
        alpha[t, 0] = alpha[t - 1, 0] + blank[t - 1, 0]
        for u in range(1, U1):
            alpha[t, u] = _log_add(
                alpha[t, u - 1] + y[t, u - 1],
                alpha[t - 1, u] + blank[t - 1, u],
            )
    return alpha[T - 1, U] + blank[T - 1, U]


def backward_fill(y: np.ndarray, blank: np.ndarray, beta: np.ndarray) -> None:
    """Fill the suffix log-probability grid in place.

    ``beta[t, u]`` sums all completions from node ``(t, u)``, terminal blank
    included. The last-frame column never reads ``blank[T-1, u<U]``.
    """
    T, U1 = blank.shape
    U = U1 - 1
    beta[T - 1, U] = blank[T - 1, U]
    for u in range(U - 1, -1, -1):
        beta[T - 1, u] = y[T - 1, u] + beta[T - 1, u + 1]
    for t in range(T - 2, -1, -1):
        beta[t, U] = blank[t, U] + beta[t + 1, U]
        for u in range(U - 1, -1, -1):
            beta[t, u] = _log_add(
                y[t, u] + beta[t, u + 1],
                blank[t, u] + beta[t + 1, u],
            )


def occupation_fill(
    y: np.ndarray,
    blank: np.ndarray,
    alpha: np.ndarray,
    beta: np.ndarray,
    total: float,
    occ_y: np.ndarray,
    occ_blank: np.ndarray,
) -> None:
    """Fill per-transition posterior occupation probabilities in place.

    The terminal blank is set to exactly 1; dead last-frame blank entries
    (u < U) to exactly 0.
    """
    T, U1 = blank.shape
    U = U1 - 1
    for t in range(T):
        for u in range(U):
            occ_y[t, u] = math.exp(alpha[t, u] + y[t, u] + beta[t, u + 1] - total)
    for t in range(T - 1):
        for u in range(U1):
            occ_blank[t, u] = math.exp(
                alpha[t, u] + blank[t, u] + beta[t + 1, u] - total
            )
    for u in range(U):
        occ_blank[T - 1, u] = 0.0
    occ_blank[T - 1, U] = 1.0


def viterbi_fill(y: np.ndarray, blank: np.ndarray, pi: np.ndarray) -> float:
    """Find the best complete path; write its emission frames into ``pi``.

    Ties prefer the token transition, so among maximal paths the returned one
    emits every token as early as possible.
    """
    T, U1 = blank.shape
    U = U1 - 1
    best = np.empty((T, U1), dtype=np.float64)
    best[T - 1, U] = blank[T - 1, U]
    for u in range(U - 1, -1, -1):
        best[T - 1, u] = y[T - 1, u] + best[T - 1, u + 1]
    for t in range(T - 2, -1, -1):
        best[t, U] = blank[t, U] + best[t + 1, U]
        for u in range(U - 1, -1, -1):
            via_token = y[t, u] + best[t, u + 1]
            via_blank = blank[t, u] + best[t + 1, u]
            best[t, u] = via_token if via_token >= via_blank else via_blank
    t = 0
    u = 0
    while u < U:
        if y[t, u] + best[t, u + 1] == best[t, u]:
            pi[u] = t
            u += 1
        else:
            t += 1
    return best[0, 0]
