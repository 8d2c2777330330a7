"""Tests for the toy streaming task: data generation, the linear model's
hand-rolled backprop, and the multi-seed training driver."""

import math

import numpy as np
import pytest

from latticeloss import lattice_from_logits, loss_and_grad, logit_grads
from latticeloss.toy import (
    BLANK_ID,
    EpochRecord,
    ToyModel,
    ToyTaskConfig,
    ToyTrainConfig,
    _windowed,
    make_example,
    seed_averaged_curves,
    train_toy,
)


def test_make_example_is_seed_deterministic():
    task = ToyTaskConfig()
    a = make_example(np.random.default_rng(3), task)
    b = make_example(np.random.default_rng(3), task)
    np.testing.assert_array_equal(a.tokens, b.tokens)
    np.testing.assert_array_equal(a.onsets, b.onsets)
    np.testing.assert_array_equal(a.features, b.features)


def test_make_example_layout():
    task = ToyTaskConfig()
    rng = np.random.default_rng(10)
    for _ in range(20):
        ex = make_example(rng, task)
        assert ex.features.shape == (task.num_frames, task.vocab - 1)
        assert ex.tokens.shape == (task.num_tokens,)
        assert ((ex.tokens >= 1) & (ex.tokens < task.vocab)).all()
        # Spans are disjoint, in order, and inside the utterance.
        assert ex.onsets[0] >= 1
        assert (np.diff(ex.onsets) >= task.span).all()
        assert ex.onsets[-1] + task.span <= task.num_frames
        # The evidence actually sits where the onsets say: the in-span mean
        # on the token's channel clearly beats that channel's background.
        for u, tok in enumerate(ex.tokens):
            span = slice(ex.onsets[u], ex.onsets[u] + task.span)
            in_span = ex.features[span, tok - 1].mean()
            assert in_span > 0.2


def test_make_example_rejects_bad_tasks():
    with pytest.raises(ValueError):
        make_example(np.random.default_rng(0), ToyTaskConfig(num_tokens=0))
    with pytest.raises(ValueError, match="does not fit"):
        make_example(np.random.default_rng(0), ToyTaskConfig(num_frames=10))


def test_windowed_stacks_causally():
    feats = np.arange(8.0).reshape(4, 2)
    win = _windowed(feats, window=2)
    assert win.shape == (4, 4)
    # Row t is [features[t-1], features[t]] with zero padding at t=0.
    np.testing.assert_array_equal(win[0], [0.0, 0.0, 0.0, 1.0])
    np.testing.assert_array_equal(win[2], [2.0, 3.0, 4.0, 5.0])
    np.testing.assert_array_equal(_windowed(feats, window=1), feats)


def test_zero_init_model_is_uniform():
    task = ToyTaskConfig()
    model = ToyModel(task)
    ex = make_example(np.random.default_rng(1), task)
    utt = model.utterance(ex)
    assert utt.logits.shape == (task.num_frames, task.num_tokens + 1,
                                task.vocab)
    np.testing.assert_array_equal(utt.logits, np.zeros_like(utt.logits))
    lat = lattice_from_logits(utt)
    assert np.allclose(lat.y, math.log(1.0 / task.vocab))
    assert np.allclose(lat.blank, math.log(1.0 / task.vocab))


def model_loss(model, ex):
    lat = lattice_from_logits(model.utterance(ex))
    return loss_and_grad(lat).loss


def model_grads(model, ex):
    # The same chain rule grad_step uses, exposed for finite differencing.
    utt = model.utterance(ex)
    res = loss_and_grad(lattice_from_logits(utt))
    g = logit_grads(utt, res)
    win = _windowed(ex.features, model.task.window)
    dW = np.einsum("tuv,tf->vf", g, win)
    dE = np.zeros_like(model.E)
    prev = np.concatenate(([BLANK_ID], ex.tokens))
    np.add.at(dE, prev, g.sum(axis=0))
    return dW, dE


def test_model_gradients_match_finite_differences():
    task = ToyTaskConfig(num_frames=16, num_tokens=2, train_size=1,
                         heldout_size=1)
    rng = np.random.default_rng(8)
    ex = make_example(rng, task)
    model = ToyModel(task)
    model.W = 0.3 * rng.standard_normal(model.W.shape)
    model.E = 0.3 * rng.standard_normal(model.E.shape)
    dW, dE = model_grads(model, ex)
    h = 1e-6
    probes = [(v, f) for v, f in np.ndindex(dW.shape) if abs(dW[v, f]) > 1e-4]
    assert probes
    for v, f in probes[:12]:
        model.W[v, f] += h
        hi = model_loss(model, ex)
        model.W[v, f] -= 2 * h
        lo = model_loss(model, ex)
        model.W[v, f] += h
        assert (hi - lo) / (2 * h) == pytest.approx(dW[v, f], rel=1e-4,
                                                    abs=1e-8)
    for v, p in [(0, 0), (1, 1), (2, 0)]:
        model.E[v, p] += h
        hi = model_loss(model, ex)
        model.E[v, p] -= 2 * h
        lo = model_loss(model, ex)
        model.E[v, p] += h
        assert (hi - lo) / (2 * h) == pytest.approx(dE[v, p], rel=1e-4,
                                                    abs=1e-8)


def test_grad_step_pins_blank_row_and_descends():
    task = ToyTaskConfig()
    rng = np.random.default_rng(21)
    examples = [make_example(rng, task) for _ in range(8)]
    model = ToyModel(task)
    first = model.grad_step(examples, loss_and_grad, lr=0.5)
    np.testing.assert_array_equal(model.W[BLANK_ID], np.zeros(model.W.shape[1]))
    assert np.abs(model.W[1:]).max() > 0
    second = model.grad_step(examples, loss_and_grad, lr=0.5)
    assert second < first
    np.testing.assert_array_equal(model.W[BLANK_ID], np.zeros(model.W.shape[1]))


def test_evaluate_measures_delay_against_onsets():
    task = ToyTaskConfig()
    rng = np.random.default_rng(33)
    examples = [make_example(rng, task) for _ in range(4)]
    model = ToyModel(task)
    loss, delay = model.evaluate(examples)
    # Uniform lattice: loss is exactly the entropy-free uniform value and
    # the tie-broken Viterbi path emits everything at frame 0.
    expected_delay = -float(
        np.mean([ex.onsets.mean() for ex in examples])
    )
    assert delay == pytest.approx(expected_delay, abs=1e-12)
    assert loss > 0


def test_effective_lam_scaling():
    cfg = ToyTrainConfig(lam=0.002, lambda_scale=50.0)
    assert cfg.effective_lam == pytest.approx(0.1, abs=0)
    assert ToyTrainConfig(lam=0.0).effective_lam == 0.0


def test_train_toy_record_layout_and_thread_invariance():
    cfg = ToyTrainConfig(epochs=3)
    records = train_toy(cfg, base_seed=1, num_seeds=2)
    assert len(records) == 6
    assert [(r.seed, r.epoch) for r in records] == [
        (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3)
    ]
    threaded = train_toy(cfg, base_seed=1, num_seeds=2, threads=2)
    assert records == threaded
    with pytest.raises(ValueError):
        train_toy(cfg, num_seeds=0)


def test_seed_averaged_curves():
    records = [
        EpochRecord(seed=0, epoch=1, train_loss=0.0, heldout_loss=2.0,
                    mean_delay=1.0),
        EpochRecord(seed=0, epoch=2, train_loss=0.0, heldout_loss=1.0,
                    mean_delay=2.0),
        EpochRecord(seed=1, epoch=1, train_loss=0.0, heldout_loss=4.0,
                    mean_delay=3.0),
        EpochRecord(seed=1, epoch=2, train_loss=0.0, heldout_loss=3.0,
                    mean_delay=6.0),
    ]
    loss, delay = seed_averaged_curves(records, num_seeds=2, epochs=2)
    np.testing.assert_allclose(loss, [3.0, 2.0])
    np.testing.assert_allclose(delay, [2.0, 4.0])
