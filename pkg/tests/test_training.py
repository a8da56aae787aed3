import numpy as np
import pytest
from numpy.testing import assert_allclose

from fractamine.activations import ActivationSpec
from fractamine.autodiff import DiffArray
from fractamine.multifractal import MfaConfig
from fractamine.neuralnet import ModelConfig, init_params
from fractamine.series import EmbeddingMatrix, LabeledDataset, synth_embedded_corpus
from fractamine.training import (
    TrainConfig,
    TrainingDiverged,
    accuracy_score,
    evaluate,
    macro_f1_score,
    split_dataset,
    train,
)


def small_model(**overrides):
    base = dict(
        n_classes=3,
        hidden=6,
        filters=4,
        blocks=1,
        conv_width=2,
        dense_width=8,
        attn_dim=3,
        mfa=MfaConfig(method="mf-dfa", q_grid=np.linspace(-2, 2, 5)),
    )
    base.update(overrides)
    return ModelConfig(**base)


def small_corpus(docs=24, seed=0):
    return synth_embedded_corpus(docs, 3, 8, 64, 4.0, seed=seed)


class TestMetrics:
    def test_accuracy(self):
        assert accuracy_score([0, 1, 2, 1], [0, 1, 1, 1]) == 0.75

    def test_macro_f1_perfect(self):
        assert macro_f1_score([0, 1, 2], [0, 1, 2], 3) == 1.0

    def test_macro_f1_known_value(self):
        # class 0: P=1, R=0.5, F1=2/3; class 1: P=0.5, R=1, F1=2/3
        y_true = [0, 0, 1]
        y_pred = [0, 1, 1]
        assert_allclose(macro_f1_score(y_true, y_pred, 2), 2 / 3, rtol=1e-12)

    def test_macro_f1_absent_class_scores_zero(self):
        # three classes but nothing labeled or predicted 2
        score = macro_f1_score([0, 1], [0, 1], 3)
        assert_allclose(score, 2 / 3, rtol=1e-12)


class TestSplit:
    def test_ratios(self):
        ds = small_corpus(docs=100)
        tr, va, te = split_dataset(ds, seed=1)
        assert (len(tr), len(va), len(te)) == (80, 10, 10)

    def test_partition_complete_and_disjoint(self):
        ds = small_corpus(docs=40)
        tr, va, te = split_dataset(ds, seed=2)

        def keys(sub):
            return {arr.tokens.tobytes() for arr, _ in sub.items}

        all_keys = keys(tr) | keys(va) | keys(te)
        assert len(all_keys) == 40
        assert not (keys(tr) & keys(va))
        assert not (keys(va) & keys(te))

    def test_deterministic(self):
        ds = small_corpus(docs=30)
        a = split_dataset(ds, seed=7)
        b = split_dataset(ds, seed=7)
        for sub_a, sub_b in zip(a, b):
            assert all(
                np.array_equal(x.tokens, y.tokens)
                for (x, _), (y, _) in zip(sub_a.items, sub_b.items)
            )

    def test_preserves_n_classes(self):
        ds = small_corpus(docs=30)
        for sub in split_dataset(ds, seed=0):
            assert sub.n_classes == 3


class TestTrain:
    def test_loss_decreases(self):
        ds = small_corpus()
        cfg = TrainConfig(epochs=4, seed=0)
        _, history = train(ds, cfg, small_model())
        assert history[-1]["loss"] < history[0]["loss"]

    def test_deterministic_per_seed(self):
        ds = small_corpus()
        cfg = TrainConfig(epochs=2, seed=5)
        params_a, hist_a = train(ds, cfg, small_model())
        params_b, hist_b = train(ds, cfg, small_model())
        assert hist_a == hist_b
        assert all(
            np.array_equal(params_a.tensors[n].data, params_b.tensors[n].data)
            for n in params_a.tensors
        )

    def test_different_seeds_differ(self):
        ds = small_corpus()
        _, hist_a = train(ds, TrainConfig(epochs=1, seed=0), small_model())
        _, hist_b = train(ds, TrainConfig(epochs=1, seed=1), small_model())
        assert hist_a != hist_b

    def test_history_schema(self):
        ds = small_corpus(docs=12)
        _, history = train(ds, TrainConfig(epochs=3, seed=0), small_model())
        assert [h["epoch"] for h in history] == [1, 2, 3]
        for h in history:
            assert set(h) == {"epoch", "loss", "accuracy"}
            assert 0.0 <= h["accuracy"] <= 1.0

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train(
                LabeledDataset(items=[], n_classes=2),
                TrainConfig(epochs=1, seed=0),
                small_model(),
            )

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_epoch_and_instance(self):
        ds = small_corpus(docs=6)
        model_cfg = small_model()
        params = init_params(model_cfg, embed_dim=64, seed=0)
        # poison one weight so the first forward pass explodes
        name = next(n for n in params.tensors if n.endswith(".wx"))
        params.tensors[name] = DiffArray(params.tensors[name].data * np.inf)
        with pytest.raises(TrainingDiverged, match="epoch 1"):
            train(ds, TrainConfig(epochs=1, seed=0), model_cfg, params=params)

    def test_activation_params_move_under_their_own_rate(self):
        ds = small_corpus(docs=12)
        model_cfg = small_model(activation=ActivationSpec("sital"))
        params, _ = train(ds, TrainConfig(epochs=2, seed=3), model_cfg)
        gammas = [t for n, t in params.tensors.items() if n.endswith(".gamma")]
        assert gammas, "sital sites must expose learnable gamma"
        assert any(not np.allclose(g.data, 1.0) for g in gammas)


class TestEvaluate:
    def test_metrics_keys_and_range(self):
        ds = small_corpus(docs=12)
        model_cfg = small_model()
        params, _ = train(ds, TrainConfig(epochs=1, seed=0), model_cfg)
        metrics = evaluate(ds, model_cfg, params)
        assert set(metrics) == {"accuracy", "macro_f1"}
        assert 0.0 <= metrics["accuracy"] <= 1.0
        assert 0.0 <= metrics["macro_f1"] <= 1.0

    def test_trained_model_beats_chance(self):
        ds = small_corpus(docs=45)
        model_cfg = small_model()
        params, _ = train(ds, TrainConfig(epochs=6, seed=0), model_cfg)
        metrics = evaluate(ds, model_cfg, params)
        assert metrics["accuracy"] > 0.6

    def test_tagging_counts_every_token(self):
        rng = np.random.default_rng(0)
        docs = [EmbeddingMatrix(rng.standard_normal((8, 12))) for _ in range(4)]
        tags = [rng.integers(0, 2, size=8) for _ in range(4)]
        ds = LabeledDataset(
            items=[(d, 0) for d in docs], n_classes=2, tag_sequences=tags
        )
        model_cfg = small_model(n_classes=2, task="tagging")
        params = init_params(model_cfg, embed_dim=12, seed=0)
        metrics = evaluate(ds, model_cfg, params)
        assert 0.0 <= metrics["accuracy"] <= 1.0
