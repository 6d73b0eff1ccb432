import numpy as np
import pytest

from oracles import accuracy_loop
from trailgrade.dataset import WindowSample
from trailgrade.errors import (
    EmptyBatch,
    EmptyDataset,
    NumericFailure,
    ShapeMismatch,
)
from trailgrade.nn import ModelConfig, build_model
from trailgrade.training import (
    ConfusionMatrix,
    TrainConfig,
    confusion_matrix,
    evaluate,
    history_from_csv,
    history_to_csv,
    sparse_categorical_accuracy,
    train,
)

TINY = ModelConfig(window_points=8, kernel_len=3, filters=(2, 3, 4), dense_units=5)


def separable_samples(n_per_class, window_points=8, seed=0, name="s", scales=(0.2, 1.0, 3.0)):
    """Trivially separable constant-signal classes with a little noise."""
    rng = np.random.default_rng(seed)
    out = []
    i = 0
    for label, scale in enumerate(scales):
        for _ in range(n_per_class):
            data = scale + rng.normal(0.0, 0.05, (window_points, 4, 3))
            out.append(WindowSample(data, label, (name, i)))
            i += 1
    return out


class TestSparseCategoricalAccuracy:
    def test_perfect(self):
        probs = np.eye(3)
        assert sparse_categorical_accuracy(probs, np.array([0, 1, 2])) == 1.0

    def test_three_of_four(self):
        probs = np.array([[0.9, 0.05, 0.05]] * 4)
        assert sparse_categorical_accuracy(probs, np.array([0, 0, 0, 1])) == 0.75

    def test_lowest_index_wins_ties(self):
        probs = np.array([[0.5, 0.5, 0.0]])
        assert sparse_categorical_accuracy(probs, np.array([0])) == 1.0
        assert sparse_categorical_accuracy(probs, np.array([1])) == 0.0

    def test_empty_batch(self):
        with pytest.raises(EmptyBatch):
            sparse_categorical_accuracy(np.empty((0, 3)), np.empty(0, dtype=int))

    def test_agrees_with_loop_oracle(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 40))
            probs = rng.random((n, 3))
            labels = rng.integers(0, 3, size=n)
            assert sparse_categorical_accuracy(probs, labels) == accuracy_loop(probs, labels)


class TestConfusionMatrix:
    def test_all_correct_is_diagonal(self):
        probs = np.eye(3)
        cm = confusion_matrix(probs, np.array([0, 1, 2]))
        assert np.array_equal(cm.counts, np.eye(3, dtype=np.int64))

    def test_single_misclassification(self):
        probs = np.array([[0.8, 0.1, 0.1]])
        cm = confusion_matrix(probs, np.array([2]))
        expected = np.zeros((3, 3), dtype=np.int64)
        expected[2, 0] = 1
        assert np.array_equal(cm.counts, expected)

    def test_trace_identity_random(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 60))
            probs = rng.random((n, 3))
            labels = rng.integers(0, 3, size=n)
            cm = confusion_matrix(probs, labels)
            assert cm.accuracy == sparse_categorical_accuracy(probs, labels)
            assert cm.total == n

    def test_csv_layout(self):
        cm = ConfusionMatrix(np.arange(9).reshape(3, 3))
        text = cm.to_csv()
        assert text.splitlines()[0] == ",0,1,2"
        assert text.splitlines()[2] == "1,3,4,5"


class TestTrainLoop:
    def test_patience_one_stops_at_epoch_two(self):
        train_set = separable_samples(10, seed=0)
        test_set = separable_samples(2, seed=1, name="t")
        result = train(train_set, test_set, TINY, TrainConfig(seed=0, max_epochs=6, patience=1))
        assert result.best_epoch == 1
        assert len(result.history) == 2
        assert result.stopped_early

    def test_descent_on_separable_data(self):
        train_set = separable_samples(10, seed=2)
        test_set = separable_samples(3, seed=3, name="t")
        result = train(train_set, test_set, TINY, TrainConfig(seed=1, max_epochs=50, patience=50))
        assert len(result.history) == 50
        assert result.history[49].train_loss < result.history[0].train_loss

    def test_deterministic_given_seed(self):
        train_set = separable_samples(6, seed=4)
        test_set = separable_samples(2, seed=5, name="t")
        config = TrainConfig(seed=11, max_epochs=5, patience=5)
        a = train(train_set, test_set, TINY, config)
        b = train(train_set, test_set, TINY, config)
        assert a.history == b.history
        for key in a.best_params.tensors:
            assert np.array_equal(a.best_params.tensors[key], b.best_params.tensors[key])
        assert np.array_equal(a.confusion.counts, b.confusion.counts)

    def test_early_stopping_law_and_snapshot(self):
        train_set = separable_samples(8, seed=6)
        test_set = separable_samples(2, seed=7, name="t")
        config = TrainConfig(seed=3, max_epochs=12, patience=4)
        result = train(train_set, test_set, TINY, config)
        last = result.history[-1].epoch
        assert (last - result.best_epoch >= config.patience) or last == config.max_epochs
        assert result.best_test_sca == max(r.test_sca for r in result.history)
        assert result.best_epoch == min(
            r.epoch for r in result.history if r.test_sca == result.best_test_sca
        )
        # the snapshot reproduces the best accuracy exactly
        accuracy, confusion = evaluate(result.best_params, test_set)
        assert accuracy == result.best_test_sca
        assert np.array_equal(confusion.counts, result.confusion.counts)
        assert confusion.total == len(test_set)

    def test_metrics_bounded(self):
        train_set = separable_samples(5, seed=8)
        test_set = separable_samples(2, seed=9, name="t")
        result = train(train_set, test_set, TINY, TrainConfig(seed=5, max_epochs=4, patience=4))
        for record in result.history:
            assert 0.0 <= record.train_sca <= 1.0
            assert 0.0 <= record.test_sca <= 1.0
            assert record.train_loss >= 0.0

    def test_empty_dataset(self):
        samples = separable_samples(2)
        with pytest.raises(EmptyDataset):
            train([], samples, TINY, TrainConfig(seed=0, max_epochs=1, patience=1))
        with pytest.raises(EmptyDataset):
            train(samples, [], TINY, TrainConfig(seed=0, max_epochs=1, patience=1))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            train(
                separable_samples(2, window_points=9),
                separable_samples(1, window_points=9, name="t"),
                TINY,
                TrainConfig(seed=0, max_epochs=1, patience=1),
            )

    def test_numeric_failure_on_absurd_l2(self):
        config = ModelConfig(
            window_points=8, kernel_len=3, filters=(2, 3, 4), dense_units=5, l2_coeff=1e308
        )
        with pytest.raises(NumericFailure):
            train(
                separable_samples(3),
                separable_samples(1, name="t"),
                config,
                TrainConfig(seed=0, max_epochs=2, patience=2),
            )

    def test_final_short_batch_is_trained(self):
        # 35 samples with batch 32 leaves a 3-sample tail; it must still count
        train_set = separable_samples(12, seed=10)[:35]
        test_set = separable_samples(2, seed=11, name="t")
        result = train(train_set, test_set, TINY, TrainConfig(seed=2, max_epochs=2, patience=2))
        assert len(result.history) == 2


class TestEvaluate:
    def test_untrained_is_chance_level(self, rng):
        params = build_model(TINY, rng)
        samples = separable_samples(200, seed=12, scales=(0.5, 1.0, 1.5))
        accuracy, _ = evaluate(params, samples)
        assert abs(accuracy - 1.0 / 3.0) < 0.1

    def test_repeatable(self, rng):
        params = build_model(TINY, rng)
        samples = separable_samples(5, seed=13)
        first = evaluate(params, samples)
        second = evaluate(params, samples)
        assert first[0] == second[0]
        assert np.array_equal(first[1].counts, second[1].counts)

    def test_single_sample(self, rng):
        params = build_model(TINY, rng)
        accuracy, _ = evaluate(params, separable_samples(1)[:1])
        assert accuracy in (0.0, 1.0)

    def test_empty(self, rng):
        with pytest.raises(EmptyDataset):
            evaluate(build_model(TINY, rng), [])


class TestHistoryCsv:
    def test_roundtrip_exact(self):
        train_set = separable_samples(4, seed=14)
        test_set = separable_samples(2, seed=15, name="t")
        result = train(train_set, test_set, TINY, TrainConfig(seed=8, max_epochs=3, patience=3))
        text = history_to_csv(result.history)
        assert text.splitlines()[0] == "epoch,train_sca,test_sca,train_loss"
        assert history_from_csv(text) == result.history

    def test_header_checked(self):
        with pytest.raises(ValueError):
            history_from_csv("nope\n1,0.5,0.5,0.1\n")
