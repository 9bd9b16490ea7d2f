"""Feature maps, stump boosting, and the hard-label classifier wrapper."""

from __future__ import annotations

import math

import numpy as np
import pytest

from amg import pe_model
from amg.detector import (
    DegenerateCorpus,
    Detector,
    DetectorFormatError,
    DetectorKind,
    Verdict,
    evaluate_accuracy,
    parse_kind,
    train_detector,
)
from amg.detector.boost import BoostedStumps, fit_stumps
from amg.detector.features import (
    BIGRAM_WINDOW,
    N_FEATURES_BIGRAM,
    N_FEATURES_STRUCTURAL,
    extract_features_bigram,
    extract_features_structural,
    shannon_entropy,
)


# ---------------------------------------------------------------------------
# feature maps


def test_structural_feature_vector_shape_and_range(mal_bytes):
    for raw in mal_bytes[:10]:
        img = pe_model.parse(raw)
        x = extract_features_structural(img, raw)
        assert x.shape == (N_FEATURES_STRUCTURAL,)
        assert x.dtype == np.float64
        assert np.all(np.isfinite(x))


def test_structural_checksum_and_timestamp_slots(corpus_files):
    for f in corpus_files[:40]:
        img = pe_model.parse(f.data)
        x = extract_features_structural(img, f.data)
        assert x[0] == (1.0 if img.optional.checksum == 0 else 0.0)
        assert x[1] == pytest.approx(img.coff.time_date_stamp / 2**32)
        assert x[4] == (1.0 if img.directory(6).rva else 0.0)
        assert x[5] == (1.0 if img.directory(4).rva else 0.0)


def test_bigram_histogram_is_l1_normalized(mal_bytes):
    x = extract_features_bigram(mal_bytes[0])
    assert x.shape == (N_FEATURES_BIGRAM,)
    assert x.sum() == pytest.approx(1.0)
    assert np.all(x >= 0)


def test_bigram_window_ignores_bytes_past_64k():
    head = bytes(range(256)) * 300  # > 65,536 bytes
    a = extract_features_bigram(head)
    b = extract_features_bigram(head + b"\xAB\xCD" * 5000)
    assert np.array_equal(a, b)
    # the final in-window byte (index 65,535) still participates ...
    last_in = head[: BIGRAM_WINDOW - 1] + b"\x00" + head[BIGRAM_WINDOW:]
    assert not np.array_equal(a, extract_features_bigram(last_in))
    # ... and the first out-of-window byte does not
    first_out = head[:BIGRAM_WINDOW] + b"\x00" + head[BIGRAM_WINDOW + 1 :]
    assert np.array_equal(a, extract_features_bigram(first_out))


def test_bigram_bucket_arithmetic():
    x = extract_features_bigram(b"\x01\x02")
    assert x[((0x01 << 8) | 0x02) % N_FEATURES_BIGRAM] == 1.0
    assert x.sum() == 1.0


def test_bigram_of_tiny_input_is_zero_vector():
    assert extract_features_bigram(b"").sum() == 0.0
    assert extract_features_bigram(b"A").sum() == 0.0


def test_shannon_entropy_extremes():
    assert shannon_entropy(b"") == 0.0
    assert shannon_entropy(b"\x00" * 4096) == 0.0
    assert shannon_entropy(bytes(range(256)) * 16) == pytest.approx(8.0)


# ---------------------------------------------------------------------------
# boosting


def test_stump_fit_on_hand_separable_column():
    """One informative column: values 1,2,3,4 with labels 0,0,1,1. The first
    stump must split between 2 and 3 and vote negative left, positive right."""
    X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    model = fit_stumps(X, y, n_rounds=1, learning_rate=1.0, l2=0.0)
    assert model.feature[0] == 0
    assert model.threshold[0] == pytest.approx(2.5)
    assert model.left_value[0] < 0 < model.right_value[0]


def test_boosting_drives_training_loss_down():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 6))
    y = (X[:, 2] + 0.5 * X[:, 4] > 0).astype(float)

    def logloss(model):
        m = model.margin(X)
        return float(np.mean(np.log1p(np.exp(-np.where(y > 0, m, -m)))))

    losses = [
        logloss(fit_stumps(X, y, n_rounds=r, learning_rate=0.3, seed=1))
        for r in (1, 5, 25, 100)
    ]
    assert losses == sorted(losses, reverse=True)
    assert losses[-1] < 0.1


def test_margin_one_agrees_with_batch_margin(mal_bytes, ben_bytes):
    X = np.array([extract_features_bigram(r) for r in mal_bytes[:10] + ben_bytes[:10]])
    y = np.array([1.0] * 10 + [0.0] * 10)
    model = fit_stumps(X, y, n_rounds=30, learning_rate=0.2, seed=3)
    batch = model.margin(X)
    singles = np.array([model.margin_one(row) for row in X])
    assert np.allclose(batch, singles)


def test_margin_matches_independent_stump_walk(mal_bytes, ben_bytes):
    """Recompute the ensemble sum with a plain Python loop over the stump
    table; the vectorized scorer must agree exactly."""
    X = np.array([extract_features_bigram(r) for r in mal_bytes[:8] + ben_bytes[:8]])
    y = np.array([1.0] * 8 + [0.0] * 8)
    model = fit_stumps(X, y, n_rounds=20, learning_rate=0.2, seed=5)
    for row in X:
        expected = model.bias
        for f, th, lv, rv in zip(
            model.feature, model.threshold, model.left_value, model.right_value
        ):
            expected += model.learning_rate * (lv if row[f] <= th else rv)
        assert model.margin_one(row) == pytest.approx(expected, rel=1e-12)


def test_single_label_training_is_degenerate(mal_bytes):
    samples = [(raw, 1) for raw in mal_bytes[:8]]
    with pytest.raises(DegenerateCorpus):
        train_detector(DetectorKind.STRUCTURAL, samples)


# ---------------------------------------------------------------------------
# detector wrapper


def test_kind_aliases():
    assert parse_kind("a") is DetectorKind.STRUCTURAL
    assert parse_kind("structural") is DetectorKind.STRUCTURAL
    assert parse_kind("B") is DetectorKind.BIGRAM
    with pytest.raises(ValueError):
        parse_kind("c")


def test_holdout_accuracy_gate(world):
    held = [(r, 1) for r in world.mal_val + world.mal_test]
    held += [(r, 0) for r in world.ben_val + world.ben_test]
    assert evaluate_accuracy(world.detector_a, held) >= 0.95
    assert evaluate_accuracy(world.detector_b, held) >= 0.95


def test_training_is_seed_deterministic(mal_bytes, ben_bytes):
    samples = [(r, 1) for r in mal_bytes[:30]] + [(r, 0) for r in ben_bytes[:20]]
    a = train_detector(DetectorKind.BIGRAM, samples, seed=9)
    b = train_detector(DetectorKind.BIGRAM, samples, seed=9)
    assert np.array_equal(a.model.feature, b.model.feature)
    assert np.array_equal(a.model.threshold, b.model.threshold)
    assert a.score(mal_bytes[31]) == b.score(mal_bytes[31])


def test_unparseable_input_is_malicious(world):
    for det in (world.detector_a, world.detector_b):
        assert det.classify(b"MZ but not really a file") is Verdict.MALICIOUS
        assert det.score(b"\x00" * 50) == math.inf


def test_zero_margin_reads_benign(ben_bytes):
    """Margin must be strictly positive to read Malicious; an empty ensemble
    scores every parseable file at exactly zero."""
    empty = BoostedStumps(
        bias=0.0,
        learning_rate=0.1,
        feature=np.zeros(0, dtype=np.uint32),
        threshold=np.zeros(0),
        left_value=np.zeros(0),
        right_value=np.zeros(0),
    )
    det = Detector(DetectorKind.BIGRAM, empty)
    assert det.score(ben_bytes[0]) == 0.0
    assert det.classify(ben_bytes[0]) is Verdict.BENIGN


def test_save_load_round_trip(world, mal_bytes, tmp_path):
    for name, det in (("a", world.detector_a), ("b", world.detector_b)):
        path = tmp_path / f"{name}.det"
        det.save(path)
        loaded = Detector.load(path)
        assert loaded.kind is det.kind
        for raw in mal_bytes[:10]:
            assert loaded.score(raw) == det.score(raw)


def test_load_rejects_foreign_and_truncated_files(world, tmp_path):
    path = tmp_path / "det.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    with pytest.raises(DetectorFormatError):
        Detector.load(path)
    good = tmp_path / "good.det"
    world.detector_a.save(good)
    blob = good.read_bytes()
    bad = tmp_path / "short.det"
    bad.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(DetectorFormatError):
        Detector.load(bad)
