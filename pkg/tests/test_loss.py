"""Tests for the forward-backward loss, its gradients, Viterbi decoding,
and the chain rule back to logits.

Correctness against the enumeration oracle is checked on a seeded random
corpus; structural identities (flow conservation, terminal occupation,
alpha/beta consistency) are checked exactly.
"""

import math

import numpy as np
import pytest

from latticeloss import (
    AlignmentPath,
    Lattice,
    TokenizedUtterance,
    backward,
    enumerate_paths,
    forward,
    lattice_from_logits,
    log_add,
    logit_grads,
    loss_and_grad,
    oracle_grad,
    oracle_loss,
    path_score,
    viterbi,
)

UNIFORM_3x2_TOTAL = -1.6739764335716716


def random_lattice(rng, max_t=6, max_u=4):
    T = int(rng.integers(1, max_t + 1))
    U = int(rng.integers(0, max_u + 1))
    return Lattice(
        y=rng.uniform(-5.0, 0.0, size=(T, U)),
        blank=rng.uniform(-5.0, 0.0, size=(T, U + 1)),
    )


def logsumexp(values):
    m = max(values)
    if m == -math.inf:
        return m
    return m + math.log(sum(math.exp(v - m) for v in values))


def test_log_add_identities():
    assert log_add(-math.inf, -3.0) == -3.0
    assert log_add(-3.0, -math.inf) == -3.0
    assert log_add(-math.inf, -math.inf) == -math.inf
    assert log_add(0.0, 0.0) == pytest.approx(math.log(2.0), abs=1e-15)
    # Agrees with numpy and is symmetric.
    rng = np.random.default_rng(12)
    for _ in range(100):
        a, b = rng.uniform(-700, 60, size=2)
        assert log_add(a, b) == pytest.approx(np.logaddexp(a, b), abs=1e-13)
        assert log_add(a, b) == log_add(b, a)
    # A huge magnitude gap must not overflow.
    assert log_add(0.0, -1e6) == 0.0
    assert math.isnan(log_add(math.nan, 0.0))


def test_uniform_lattice_hand_value():
    lat = Lattice(y=np.full((3, 2), math.log(0.5)),
                  blank=np.full((3, 3), math.log(0.5)))
    alpha, total = forward(lat)
    assert total == pytest.approx(UNIFORM_3x2_TOTAL, abs=1e-14)
    assert alpha[0, 0] == 0.0
    assert loss_and_grad(lat).loss == pytest.approx(-UNIFORM_3x2_TOTAL, abs=0)


def test_forward_matches_oracle():
    rng = np.random.default_rng(1001)
    for _ in range(60):
        lat = random_lattice(rng)
        _, total = forward(lat)
        assert abs(total - oracle_loss(lat)) <= 1e-10


def test_forward_equals_logsumexp_of_path_scores():
    # Independent cross-check through path_score rather than the oracle's
    # vectorized arithmetic.
    rng = np.random.default_rng(555)
    lat = random_lattice(rng, max_t=5, max_u=3)
    scores = [path_score(lat, p)
              for p in enumerate_paths(lat.num_frames, lat.num_tokens).paths]
    _, total = forward(lat)
    assert total == pytest.approx(logsumexp(scores), abs=1e-12)


def test_backward_agrees_with_forward():
    rng = np.random.default_rng(321)
    for _ in range(40):
        lat = random_lattice(rng)
        _, total = forward(lat)
        beta = backward(lat)
        assert abs(beta[0, 0] - total) <= 1e-12


def test_alpha_beta_token_identity():
    # Every path emits token u exactly once, so marginalizing the emission
    # frame of any fixed token recovers the total:
    #   logsumexp_t(alpha[t, u] + y[t, u] + beta[t, u+1]) = total.
    rng = np.random.default_rng(88)
    lat = random_lattice(rng, max_t=6, max_u=4)
    alpha, total = forward(lat)
    beta = backward(lat)
    for u in range(lat.num_tokens):
        vals = [alpha[t, u] + lat.y[t, u] + beta[t, u + 1]
                for t in range(lat.num_frames)]
        assert logsumexp(vals) == pytest.approx(total, abs=1e-12)


def test_grad_matches_oracle():
    rng = np.random.default_rng(2002)
    for _ in range(60):
        lat = random_lattice(rng)
        res = loss_and_grad(lat)
        og_y, og_blank = oracle_grad(lat)
        np.testing.assert_allclose(res.grad_y, og_y, atol=1e-9)
        np.testing.assert_allclose(res.grad_blank, og_blank, atol=1e-9)


def test_grad_structurals_exact():
    rng = np.random.default_rng(7)
    for _ in range(20):
        lat = random_lattice(rng)
        T, U = lat.num_frames, lat.num_tokens
        res = loss_and_grad(lat)
        # The terminal blank is on every path; dead entries on none.
        assert res.grad_blank[T - 1, U] == -1.0
        np.testing.assert_array_equal(res.grad_blank[T - 1, :U], np.zeros(U))
        # Per-frame blank occupation mass and per-token emission mass are 1.
        np.testing.assert_allclose(-res.grad_blank.sum(axis=1),
                                   np.ones(T), atol=1e-12)
        if U:
            np.testing.assert_allclose(-res.grad_y.sum(axis=0),
                                       np.ones(U), atol=1e-12)
        assert res.total_log_prob == -res.loss


def test_finite_difference_spot_check():
    rng = np.random.default_rng(606)
    lat = random_lattice(rng, max_t=4, max_u=3)
    res = loss_and_grad(lat)
    step = 1e-5
    for t in range(lat.num_frames):
        for u in range(lat.num_tokens):
            if abs(res.grad_y[t, u]) < 1e-3:
                continue
            y_hi, y_lo = lat.y.copy(), lat.y.copy()
            y_hi[t, u] += step
            y_lo[t, u] -= step
            hi = loss_and_grad(Lattice(y=y_hi, blank=lat.blank)).loss
            lo = loss_and_grad(Lattice(y=y_lo, blank=lat.blank)).loss
            fd = (hi - lo) / (2 * step)
            assert fd == pytest.approx(res.grad_y[t, u], rel=1e-6)


def test_viterbi_is_argmax_over_enumeration():
    rng = np.random.default_rng(404)
    for _ in range(40):
        lat = random_lattice(rng, max_t=5, max_u=3)
        path, score = viterbi(lat)
        assert len(path) == lat.num_tokens
        scores = [path_score(lat, p)
                  for p in enumerate_paths(lat.num_frames,
                                           lat.num_tokens).paths]
        assert score == pytest.approx(max(scores), abs=1e-12)
        assert path_score(lat, path) == pytest.approx(score, abs=1e-12)
        # The best single path can never beat the sum over all paths.
        _, total = forward(lat)
        assert score <= total + 1e-12


def test_viterbi_tie_break_prefers_early_emission():
    # On a uniform lattice every path ties exactly; the vertical-first
    # trace must emit every token at frame 0.
    lat = Lattice(y=np.full((4, 3), math.log(0.5)),
                  blank=np.full((4, 4), math.log(0.5)))
    path, _ = viterbi(lat)
    np.testing.assert_array_equal(path.emission_frames, np.zeros(3, dtype=np.int64))


def test_alignment_path_validation():
    with pytest.raises(ValueError):
        AlignmentPath(emission_frames=np.array([2, 1]))
    with pytest.raises(ValueError):
        AlignmentPath(emission_frames=np.array([-1, 0]))
    with pytest.raises(ValueError):
        AlignmentPath(emission_frames=np.array([[0, 1]]))
    p = AlignmentPath(emission_frames=np.array([0, 0, 2]))
    assert len(p) == 3
    with pytest.raises(ValueError):
        p.emission_frames[0] = 1  # read-only


def random_utterance(rng, T=4, U=2, V=5):
    tokens = rng.integers(1, V, size=U)
    logits = rng.standard_normal((T, U + 1, V))
    return TokenizedUtterance(tokens=tokens, blank_id=0, logits=logits)


def test_logit_grads_rows_sum_to_zero():
    # Each node's gradient goes through one softmax, so it has zero sum
    # over the vocabulary axis.
    rng = np.random.default_rng(17)
    utt = random_utterance(rng)
    res = loss_and_grad(lattice_from_logits(utt))
    g = logit_grads(utt, res)
    assert g.shape == utt.logits.shape
    np.testing.assert_allclose(g.sum(axis=-1),
                               np.zeros(g.shape[:2]), atol=1e-12)


def test_logit_grads_match_finite_differences():
    rng = np.random.default_rng(23)
    utt = random_utterance(rng, T=3, U=2, V=4)
    res = loss_and_grad(lattice_from_logits(utt))
    g = logit_grads(utt, res)
    step = 1e-6
    probes = [(t, u, v)
              for t, u, v in np.ndindex(utt.logits.shape)
              if abs(g[t, u, v]) >= 1e-4]
    assert probes, "degenerate probe set"
    for t, u, v in probes[:24]:
        vals = []
        for sign in (1.0, -1.0):
            logits = utt.logits.copy()
            logits[t, u, v] += sign * step
            bumped = TokenizedUtterance(tokens=utt.tokens, blank_id=0,
                                        logits=logits)
            vals.append(loss_and_grad(lattice_from_logits(bumped)).loss)
        fd = (vals[0] - vals[1]) / (2 * step)
        assert fd == pytest.approx(g[t, u, v], rel=5e-5, abs=1e-9)


def test_logit_grads_shape_mismatch():
    rng = np.random.default_rng(2)
    utt = random_utterance(rng)
    other = loss_and_grad(lattice_from_logits(random_utterance(rng, T=5, U=3)))
    with pytest.raises(ValueError):
        logit_grads(utt, other)
