import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fingerspell_al.acquisition import (
    PredictiveSamples,
    bald,
    max_entropy,
    mean_std,
    predictive_samples,
    random_select,
    score_pool,
    select_batch,
    variation_ratio,
)
from fingerspell_al.nn import ArchSpec, forward, init_model


def scalar_entropy(row):
    return -sum(p * math.log(p) for p in row if p > 0)


def scalar_bald(probs):
    T, M, K = probs.shape
    out = []
    for m in range(M):
        mean = [sum(probs[t, m, k] for t in range(T)) / T for k in range(K)]
        expected = sum(scalar_entropy(probs[t, m]) for t in range(T)) / T
        out.append(max(scalar_entropy(mean) - expected, 0.0))
    return out


def scalar_mean_std(probs):
    T, M, K = probs.shape
    out = []
    for m in range(M):
        total = 0.0
        for k in range(K):
            vals = [probs[t, m, k] for t in range(T)]
            mu = sum(vals) / T
            total += math.sqrt(sum((v - mu) ** 2 for v in vals) / T)
        out.append(total / K)
    return out


def random_samples(rng, T, M, K):
    logits = rng.normal(0, 2, size=(T, M, K))
    p = np.exp(logits)
    return PredictiveSamples(p / p.sum(axis=-1, keepdims=True))


# -- spot values ---------------------------------------------------------------

def test_variation_ratio_values():
    rows = np.array([[0, 1, 0], [0.5, 0.3, 0.2]])
    np.testing.assert_allclose(variation_ratio(rows).scores, [0.0, 0.5])
    assert variation_ratio(np.full((1, 24), 1 / 24)).scores[0] == pytest.approx(1 - 1 / 24, abs=1e-12)


def test_entropy_values():
    assert max_entropy(np.eye(3)[:1]).scores[0] == 0.0
    assert max_entropy(np.full((1, 24), 1 / 24)).scores[0] == pytest.approx(math.log(24), abs=1e-12)
    assert max_entropy(np.array([[0.5, 0.5, 0.0]])).scores[0] == pytest.approx(math.log(2), abs=1e-12)


def test_bald_values():
    same = PredictiveSamples(np.tile([[[0.2, 0.5, 0.3]]], (4, 1, 1)))
    assert bald(same).scores[0] == pytest.approx(0.0, abs=1e-12)
    split = PredictiveSamples(np.array([[[1.0, 0.0]], [[0.0, 1.0]]]))
    assert bald(split).scores[0] == pytest.approx(math.log(2), abs=1e-12)
    single = PredictiveSamples(np.array([[[0.3, 0.7]]]))
    assert bald(single).scores[0] == 0.0


def test_mean_std_values():
    same = PredictiveSamples(np.tile([[[0.2, 0.8]]], (3, 1, 1)))
    assert mean_std(same).scores[0] == pytest.approx(0.0, abs=1e-15)
    split = PredictiveSamples(np.array([[[1.0, 0.0]], [[0.0, 1.0]]]))
    assert mean_std(split).scores[0] == pytest.approx(0.5)


@pytest.mark.parametrize("shape", [(5, 4, 3), (6, 3, 4)])
def test_bald_and_mean_std_match_scalar(shape):
    s = random_samples(np.random.default_rng(sum(shape)), *shape)
    np.testing.assert_allclose(bald(s).scores, scalar_bald(s.probs), atol=1e-12)
    np.testing.assert_allclose(mean_std(s).scores, scalar_mean_std(s.probs), atol=1e-12)


# -- selection --------------------------------------------------------------------

def test_select_batch_tie_break():
    assert select_batch(np.array([0.1, 0.9, 0.9, 0.2]), 2) == [1, 2]
    assert select_batch(np.array([0.5, 0.5, 0.5]), 1) == [0]
    assert select_batch(np.array([0.1, 0.9]), 0) == []


def test_select_batch_matches_sort_oracle():
    rng = np.random.default_rng(0)
    scores = rng.random(1000)
    ranked = sorted(range(1000), key=lambda i: (-scores[i], i))
    assert select_batch(scores, 50) == sorted(ranked[:50])


def test_select_batch_too_many():
    with pytest.raises(ValueError):
        select_batch(np.zeros(3), 4)


def test_random_select_contract():
    assert random_select(6, 6, 0) == list(range(6))
    assert random_select(100, 10, 3) == random_select(100, 10, 3)
    picks = random_select(100, 10, 3)
    assert len(set(picks)) == 10
    with pytest.raises(ValueError):
        random_select(3, 4, 0)


def test_random_select_is_uniform():
    rng = np.random.default_rng(0)
    counts = np.zeros(4)
    for seed in rng.integers(0, 2**63, size=100_000):
        counts[random_select(4, 1, int(seed))[0]] += 1
    np.testing.assert_allclose(counts / counts.sum(), 0.25, atol=0.01)


# -- predictive samples ---------------------------------------------------------

def _tiny_params(dropout=0.5, seed=0):
    arch = ArchSpec(input_resolution=4, conv_blocks=((3, 3, dropout / 2),), fc_layers=((6, dropout),), class_count=3)
    return init_model(arch, seed)


def test_single_pass_without_dropout_equals_deterministic():
    p = _tiny_params(dropout=0.0)
    x = np.random.default_rng(0).random((7, 4, 4))
    s = predictive_samples(p, x, 1, seed=5)
    np.testing.assert_array_equal(s.probs[0], forward(p, x))


def test_pass_seeds_and_determinism():
    p = _tiny_params()
    x = np.random.default_rng(1).random((5, 4, 4))
    a, b = predictive_samples(p, x, 4, 10), predictive_samples(p, x, 4, 10)
    np.testing.assert_array_equal(a.probs, b.probs)
    assert a.pass_seeds == [10, 11, 8, 9]
    np.testing.assert_allclose(a.probs.sum(axis=-1), 1.0, atol=1e-12)


def test_predictive_samples_errors():
    p = _tiny_params()
    with pytest.raises(ValueError):
        predictive_samples(p, np.zeros((0, 4, 4)), 3, 0)
    with pytest.raises(ValueError):
        predictive_samples(p, np.zeros((2, 4, 4)), 0, 0)


def test_mc_mean_converges_to_long_run_mean():
    p = _tiny_params(seed=3)
    x = np.random.default_rng(2).random((2, 4, 4))
    short = predictive_samples(p, x, 2000, seed=1).probs
    long_run = predictive_samples(p, x, 20_000, seed=99).probs.mean(axis=0)
    se = short.std(axis=0, ddof=1) / math.sqrt(short.shape[0])
    assert np.all(np.abs(short.mean(axis=0) - long_run) <= 3 * se)


def test_score_pool_variation_ratio_uses_mc_mean():
    p = _tiny_params()
    x = np.random.default_rng(4).random((6, 4, 4))
    mc = score_pool("variation_ratio", p, x, 5, seed=2)
    samples = predictive_samples(p, x, 5, 2)
    np.testing.assert_array_equal(mc.scores, variation_ratio(samples.mean_probs).scores)
    det = score_pool("variation_ratio", p, x, 1, seed=2)
    np.testing.assert_array_equal(det.scores, variation_ratio(forward(p, x)).scores)
    with pytest.raises(ValueError, match="unknown"):
        score_pool("margin", p, x, 1, 0)


# -- properties ------------------------------------------------------------------

prob_tensors = st.tuples(
    st.integers(1, 6), st.integers(1, 8), st.integers(2, 6), st.integers(0, 2**32 - 1)
).map(lambda a: random_samples(np.random.default_rng(a[3]), a[0], a[1], a[2]))


@settings(max_examples=60, deadline=None)
@given(prob_tensors)
def test_bald_nonnegative_and_entropy_bounded(s):
    K = s.probs.shape[2]
    assert np.all(bald(s).scores >= -1e-9)
    h = max_entropy(s.mean_probs).scores
    assert np.all(h >= -1e-12) and np.all(h <= math.log(K) + 1e-12)
    vr = variation_ratio(s.mean_probs).scores
    assert np.all(vr >= 0) and np.all(vr <= 1 - 1 / K + 1e-12)


@settings(max_examples=60, deadline=None)
@given(prob_tensors, st.randoms(use_true_random=False))
def test_permutation_equivariance(s, rnd):
    M = s.probs.shape[1]
    perm = list(range(M))
    rnd.shuffle(perm)
    ps = PredictiveSamples(s.probs[:, perm, :])
    for fn in (bald, mean_std):
        np.testing.assert_allclose(fn(ps).scores, fn(s).scores[perm], atol=1e-15)
    for fn in (variation_ratio, max_entropy):
        np.testing.assert_allclose(fn(ps.mean_probs).scores, fn(s.mean_probs).scores[perm], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(prob_tensors)
def test_agreeing_passes_zero_disagreement(s):
    agree = PredictiveSamples(np.repeat(s.probs[:1], 4, axis=0))
    np.testing.assert_allclose(bald(agree).scores, 0.0, atol=1e-12)
    np.testing.assert_allclose(mean_std(agree).scores, 0.0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(2, 6)), elements=st.floats(0.01, 1.0)))
def test_top1_is_argmin_of_max_probability(raw):
    p = raw / raw.sum(axis=1, keepdims=True)
    chosen = select_batch(variation_ratio(p), 1)[0]
    top = p.max(axis=1)
    assert chosen == int(np.flatnonzero(top == top.min())[0])
