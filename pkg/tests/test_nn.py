import math
import struct

import numpy as np
import pytest

from fingerspell_al.nn import (
    ArchError,
    ArchMismatchError,
    ArchSpec,
    CorruptWeightFileError,
    LabelError,
    ShapeError,
    TrainConfig,
    TrainHistory,
    WeightVersionError,
    evaluate,
    forward,
    forward_logits,
    init_model,
    load_params,
    loss_and_gradients,
    predict,
    reinit_head,
    save_params,
    train,
)

from oracles import numeric_gradients, relative_error, small_model


# -- init_model ----------------------------------------------------------------

def test_init_is_deterministic(tiny_arch):
    assert init_model(tiny_arch, 3).equals(init_model(tiny_arch, 3))


def test_init_distinct_seeds_differ(tiny_arch):
    a, b = init_model(tiny_arch, 1), init_model(tiny_arch, 2)
    assert any(not np.array_equal(x, y) for x, y in zip(a.weights, b.weights))


def test_init_biases_zero_and_fan_in_bounded(tiny_arch):
    p = init_model(tiny_arch, 0)
    for w, b in zip(p.weights, p.biases):
        assert np.all(b == 0)
        fan_in = int(np.prod(w.shape[:-1]))
        assert np.abs(w).max() <= math.sqrt(6 / fan_in)


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        (dict(conv_blocks=((4, 2, 0.0),)), "odd"),
        (dict(conv_blocks=((4, 3, 1.0),)), "dropout"),
        (dict(fc_layers=((0, 0.5),)), "width"),
        (dict(class_count=1), "class_count"),
        (dict(input_resolution=2, conv_blocks=((4, 3, 0.0), (4, 3, 0.0))), "below 1x1"),
    ],
)
def test_invalid_arch_rejected(kwargs, fragment):
    with pytest.raises(ArchError, match=fragment):
        ArchSpec(**kwargs)


def test_default_arch_matches_design():
    arch = ArchSpec()
    assert arch.conv_blocks == ((32, 3, 0.25), (64, 3, 0.25))
    assert arch.fc_layers == ((128, 0.5),)
    assert arch.class_count == 24
    assert arch.flat_features == 7 * 7 * 64


# -- forward -------------------------------------------------------------------

def test_rows_sum_to_one_both_modes(tiny_arch):
    p = init_model(tiny_arch, 0)
    x = np.random.default_rng(0).random((300, 8, 8))
    for seed in (None, 11):
        np.testing.assert_allclose(forward(p, x, seed).sum(axis=1), 1.0, atol=1e-6)


def test_stochastic_forward_is_seeded(tiny_arch):
    p = init_model(tiny_arch, 0)
    x = np.random.default_rng(1).random((5, 8, 8))
    np.testing.assert_array_equal(forward(p, x, 9), forward(p, x, 9))
    assert not np.array_equal(forward(p, x, 9), forward(p, x, 10))


def test_forward_shape_error_names_dimensions(tiny_arch):
    p = init_model(tiny_arch, 0)
    with pytest.raises(ShapeError, match=r"expected \(N, 8, 8\), got \(2, 7, 7\)"):
        forward(p, np.zeros((2, 7, 7)))


def test_one_by_one_conv_matches_hand_computation():
    arch = ArchSpec(input_resolution=4, conv_blocks=((1, 1, 0.0),), fc_layers=(), class_count=2)
    p = init_model(arch, 0)
    p.weights[0][...] = 1.0
    p.biases[0][...] = 0.0
    head = [[0.5, -1.0], [2.0, 0.25], [-0.75, 1.5], [1.0, 1.0]]
    p.weights[1][...] = head
    p.biases[1][...] = [0.1, -0.2]
    img = [
        [0.1, 0.9, -0.3, 0.2],
        [0.4, -0.5, 0.6, 0.0],
        [-0.2, 0.3, 0.8, -0.9],
        [0.7, 0.05, 0.1, 0.15],
    ]
    # scalar oracle: identity conv, ReLU, 2x2 max-pool, dense head, softmax
    relu = [[max(v, 0.0) for v in row] for row in img]
    pooled = []
    for bi in range(2):
        for bj in range(2):
            pooled.append(max(relu[2 * bi + di][2 * bj + dj] for di in range(2) for dj in range(2)))
    logits = [sum(pooled[f] * head[f][k] for f in range(4)) + (0.1, -0.2)[k] for k in range(2)]
    z = [math.exp(v) for v in logits]
    expected = [v / sum(z) for v in z]
    np.testing.assert_allclose(forward(p, np.array([img])), [expected], rtol=0, atol=1e-14)


def test_dropout_expectation_matches_deterministic():
    # dropout only ahead of the linear head, so E[logits] is exactly the deterministic value
    arch = ArchSpec(input_resolution=6, conv_blocks=((3, 3, 0.0),), fc_layers=((10, 0.5),), class_count=3)
    p = init_model(arch, 4)
    x = np.random.default_rng(2).random((1, 6, 6))
    det = forward_logits(p, x)[0]
    reps = np.repeat(x, 10_000, axis=0)
    samples = forward_logits(p, reps, dropout_seed=123)
    se = samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])
    assert np.all(np.abs(samples.mean(axis=0) - det) <= 3 * se)


# -- loss and gradients --------------------------------------------------------

def test_loss_zero_for_exact_one_hot():
    arch = ArchSpec(input_resolution=2, conv_blocks=(), fc_layers=(), class_count=3)
    p = init_model(arch, 0)
    p.weights[0][...] = 0.0
    p.biases[0][...] = [2000.0, 0.0, 0.0]
    loss, _ = loss_and_gradients(p, np.zeros((4, 2, 2)), np.zeros(4, dtype=int))
    assert loss == 0.0


def test_loss_uniform_prediction_is_log_k():
    arch = ArchSpec(input_resolution=2, conv_blocks=(), fc_layers=(), class_count=22)
    p = init_model(arch, 0)
    p.weights[0][...] = 0.0
    loss, _ = loss_and_gradients(p, np.ones((3, 2, 2)), np.array([0, 5, 21]))
    assert loss == pytest.approx(math.log(22), abs=1e-12)
    assert loss == pytest.approx(3.0910, abs=5e-5)


def test_out_of_range_label_names_index(tiny_arch):
    p = init_model(tiny_arch, 0)
    with pytest.raises(LabelError, match="index 1: 4"):
        loss_and_gradients(p, np.zeros((2, 8, 8)), np.array([0, 4]))


@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(seed):
    params, x, y = small_model(seed)
    _, grads = loss_and_gradients(params, x, y, dropout_seed=seed + 100)
    numeric = numeric_gradients(params, x, y, seed + 100)
    for g, n in zip(grads, numeric):
        assert g.shape == n.shape
        assert relative_error(g, n).max() < 1e-4


def test_gradients_mlp_only_architecture():
    rng = np.random.default_rng(5)
    arch = ArchSpec(input_resolution=3, conv_blocks=(), fc_layers=((5, 0.0), (4, 0.3)), class_count=3)
    p = init_model(arch, 5)
    x, y = rng.random((3, 3, 3)), np.array([0, 2, 1])
    _, grads = loss_and_gradients(p, x, y, dropout_seed=8)
    for g, n in zip(grads, numeric_gradients(p, x, y, 8)):
        assert relative_error(g, n).max() < 1e-4


# -- train -----------------------------------------------------------------------

def _blobs(n=200, seed=0, res=4):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = rng.normal(0.0, 0.3, size=(n, res, res))
    x[y == 1, : res // 2] += 1.0
    x[y == 0, res // 2 :] += 1.0
    return x, y


def test_training_reduces_loss():
    arch = ArchSpec(input_resolution=4, conv_blocks=((4, 3, 0.25),), fc_layers=((8, 0.5),), class_count=2)
    x, y = _blobs()
    hist = TrainHistory()
    p0 = init_model(arch, 0)
    train(p0, x, y, TrainConfig(epochs=50, seed=1), hist)
    assert len(hist.epoch_losses) == 50
    assert hist.steps == 50 * math.ceil(200 / 128)
    assert hist.epoch_losses[-1] < hist.epoch_losses[0]


def test_training_is_deterministic_and_pure():
    arch = ArchSpec(input_resolution=4, conv_blocks=((4, 3, 0.25),), fc_layers=((8, 0.5),), class_count=2)
    x, y = _blobs()
    p0 = init_model(arch, 0)
    snapshot = p0.copy()
    cfg = TrainConfig(epochs=3, seed=2)
    assert train(p0, x, y, cfg).equals(train(p0, x, y, cfg))
    assert p0.equals(snapshot)


def _brute_force_separable(f):
    """Search 3600 directions for a threshold splitting the two classes."""
    x, y = f
    for theta in np.linspace(0, 2 * np.pi, 3600, endpoint=False):
        proj = x @ np.array([np.cos(theta), np.sin(theta)])
        if proj[y == 1].min() > proj[y == 0].max():
            return True
    return False


def test_separable_toy_reaches_full_training_accuracy():
    rng = np.random.default_rng(3)
    feats = rng.uniform(-1, 1, size=(400, 2))
    margin = feats @ np.array([0.8, -0.6])
    keep = np.abs(margin) > 0.1
    feats, labels = feats[keep][:200], (margin[keep][:200] > 0).astype(int)
    assert _brute_force_separable((feats, labels))
    # two features in the first two pixels of a 2x2 image
    images = np.zeros((len(labels), 2, 2))
    images[:, 0, 0], images[:, 0, 1] = feats[:, 0], feats[:, 1]
    arch = ArchSpec(input_resolution=2, conv_blocks=(), fc_layers=((16, 0.0),), class_count=2)
    p = train(init_model(arch, 0), images, labels, TrainConfig(epochs=200, learning_rate=1e-2, seed=0))
    acc, _ = evaluate(p, images, labels)
    assert acc >= 0.99


def test_train_rejects_empty(tiny_arch):
    with pytest.raises(ValueError, match="empty"):
        train(init_model(tiny_arch, 0), np.zeros((0, 8, 8)), np.zeros(0, dtype=int), TrainConfig())


def test_train_config_invariants():
    for bad in (dict(epochs=0), dict(batch_size=0), dict(learning_rate=0.0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


# -- evaluate --------------------------------------------------------------------

def _constant_model(arch, cls):
    p = init_model(arch, 0)
    for w in p.weights:
        w[...] = 0.0
    p.biases[-1][cls] = 5.0
    return p


def test_evaluate_constant_predictor_is_class_frequency(tiny_arch):
    y = np.array([2, 2, 0, 1, 3, 2, 0, 1])
    p = _constant_model(tiny_arch, 2)
    acc, per = evaluate(p, np.zeros((8, 8, 8)), y)
    assert acc == pytest.approx(3 / 8)
    assert per == {0: 0.0, 1: 0.0, 2: 1.0, 3: 0.0}


def test_evaluate_absent_class_is_undefined(tiny_arch):
    p = _constant_model(tiny_arch, 1)
    _, per = evaluate(p, np.zeros((3, 8, 8)), np.array([1, 1, 0]))
    assert per[1] == 1.0 and per[0] == 0.0
    assert per[2] is None and per[3] is None


def test_evaluate_perfect_predictor():
    arch = ArchSpec(input_resolution=2, conv_blocks=(), fc_layers=(), class_count=4)
    p = init_model(arch, 0)
    p.weights[0][...] = 0.0
    p.biases[0][...] = 0.0
    for k in range(4):
        p.weights[0][k, k] = 10.0
    x = np.zeros((8, 2, 2))
    y = np.arange(8) % 4
    x.reshape(8, 4)[np.arange(8), y] = 1.0
    acc, per = evaluate(p, x, y)
    assert acc == 1.0 and all(v == 1.0 for v in per.values())


def test_evaluate_matches_recount(tiny_arch):
    rng = np.random.default_rng(9)
    p = init_model(tiny_arch, 9)
    x, y = rng.random((50, 8, 8)), rng.integers(0, 4, 50)
    probs = forward(p, x)
    hits = 0
    for row, label in zip(probs, y):
        best = max(range(4), key=lambda k: row[k])
        hits += int(best == label)
    acc, _ = evaluate(p, x, y)
    assert acc == hits / 50
    np.testing.assert_array_equal(predict(p, x), probs.argmax(axis=1))


# -- reinit_head -------------------------------------------------------------------

def test_reinit_head_copies_backbone_and_redraws_head(tiny_arch):
    p = init_model(tiny_arch, 0)
    for b in p.biases:
        b += 0.5
    q = reinit_head(p, 77)
    for i in range(p.n_layers - 1):
        assert p.weights[i].tobytes() == q.weights[i].tobytes()
        assert p.biases[i].tobytes() == q.biases[i].tobytes()
    assert not np.array_equal(p.weights[-1], q.weights[-1])
    assert np.all(q.biases[-1] == 0)
    # source untouched
    assert np.all(p.biases[-1] == 0.5)


def test_reinit_head_first_step_gradient_nonzero(tiny_arch):
    rng = np.random.default_rng(0)
    q = reinit_head(init_model(tiny_arch, 0), 5)
    _, grads = loss_and_gradients(q, rng.random((16, 8, 8)), rng.integers(0, 4, 16), dropout_seed=1)
    assert np.abs(grads[-2]).max() > 0
    assert np.abs(grads[-1]).max() > 0


# -- weight files --------------------------------------------------------------------

def test_save_load_round_trip(tmp_path, tiny_arch):
    p = init_model(tiny_arch, 42)
    path = tmp_path / "w.alfw"
    save_params(p, path)
    q = load_params(path)
    assert q.equals(p) and q.init_seed == 42
    assert path.read_bytes()[:4] == b"ALFW"


def test_load_bad_magic(tmp_path, tiny_arch):
    path = tmp_path / "w.alfw"
    save_params(init_model(tiny_arch, 0), path)
    data = bytearray(path.read_bytes())
    data[:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptWeightFileError, match="magic"):
        load_params(path)


def test_load_truncated_is_corrupt(tmp_path, tiny_arch):
    path = tmp_path / "w.alfw"
    save_params(init_model(tiny_arch, 0), path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(CorruptWeightFileError):
        load_params(path)


def test_load_version_mismatch(tmp_path, tiny_arch):
    path = tmp_path / "w.alfw"
    save_params(init_model(tiny_arch, 0), path)
    data = bytearray(path.read_bytes())
    data[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(data))
    with pytest.raises(WeightVersionError, match="99"):
        load_params(path)


def test_load_arch_mismatch_names_both(tmp_path, tiny_arch):
    path = tmp_path / "w.alfw"
    save_params(init_model(tiny_arch, 0), path)
    other = ArchSpec(input_resolution=8, conv_blocks=((4, 3, 0.25),), fc_layers=((16, 0.5),), class_count=5)
    with pytest.raises(ArchMismatchError) as err:
        load_params(path, expected_arch=other)
    assert "'class_count': 4" in str(err.value) and "'class_count': 5" in str(err.value)


def test_weight_errors_are_distinct():
    assert len({CorruptWeightFileError, WeightVersionError, ArchMismatchError}) == 3
    assert not issubclass(CorruptWeightFileError, WeightVersionError)
    assert not issubclass(ArchMismatchError, CorruptWeightFileError)
