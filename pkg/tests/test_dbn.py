import numpy as np
import pytest

import oracles
from satpipe import dbn
from satpipe.errors import DegenerateLabelsError
from satpipe.patchio import ClassScheme


def toy_params(rng, visible=3, hidden=2, scale=0.5):
    return dbn.RbmParams(
        rng.normal(0, scale, (visible, hidden)),
        rng.normal(0, scale, visible),
        rng.normal(0, scale, hidden),
    )


def toy_model(rng, sizes=(5, 4, 3), classes=2):
    stack = [dbn.random_rbm(a, b, rng, 0.5) for a, b in zip(sizes, sizes[1:])]
    return dbn.init_classifier(stack, classes, input_dim=sizes[0], seed=1, init_std=0.5)


class TestSigmoid:
    def test_zero(self):
        assert dbn.sigmoid(0.0) == 0.5

    def test_reference_value(self):
        assert dbn.sigmoid(2.0) == pytest.approx(0.8807970779778823, abs=1e-15)

    def test_symmetry(self, rng):
        x = rng.uniform(-30, 30, size=1000)
        np.testing.assert_allclose(dbn.sigmoid(x) + dbn.sigmoid(-x), 1.0, atol=1e-12)

    def test_extreme_arguments_stable(self):
        assert dbn.sigmoid(700.0) == 1.0
        assert dbn.sigmoid(-700.0) == pytest.approx(0.0, abs=1e-300)
        assert np.isfinite(dbn.sigmoid(np.array([-700.0, 700.0]))).all()


class TestEnergy:
    def test_zero_vectors(self, rng):
        params = toy_params(rng)
        assert dbn.energy(np.zeros(3), np.zeros(2), params) == 0.0

    def test_zero_params(self):
        params = dbn.RbmParams(np.zeros((3, 2)), np.zeros(3), np.zeros(2))
        assert dbn.energy(np.ones(3), np.ones(2), params) == 0.0

    def test_hand_expansion(self, rng):
        params = toy_params(rng, visible=2, hidden=2)
        v = np.array([1.0, 0.0])
        h = np.array([0.0, 1.0])
        expected = -params.visible_bias[0] - params.hidden_bias[1] - params.weights[0, 1]
        assert dbn.energy(v, h, params) == pytest.approx(expected, abs=1e-15)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            dbn.energy(np.zeros(4), np.zeros(2), toy_params(rng))


class TestConditionals:
    def test_zero_params_give_half(self):
        params = dbn.RbmParams(np.zeros((3, 2)), np.zeros(3), np.zeros(2))
        np.testing.assert_array_equal(dbn.prob_h_given_v(np.ones(3), params), [0.5, 0.5])
        np.testing.assert_array_equal(dbn.prob_v_given_h(np.ones(2), params), [0.5] * 3)

    def test_cancellation(self):
        params = dbn.RbmParams(np.array([[2.0]]), np.zeros(1), np.array([-2.0]))
        assert dbn.prob_h_given_v(np.array([1.0]), params)[0] == 0.5

    def test_matches_exhaustive_enumeration(self, rng):
        params = toy_params(rng, visible=3, hidden=2, scale=1.0)
        for v_bits in ((0, 0, 0), (1, 0, 1), (1, 1, 1)):
            ours = dbn.prob_h_given_v(np.array(v_bits, dtype=float), params)
            oracle = oracles.rbm_conditional_h(
                params.weights, params.visible_bias, params.hidden_bias, v_bits
            )
            np.testing.assert_allclose(ours, oracle, atol=1e-9)
        for h_bits in ((0, 0), (1, 0), (1, 1)):
            ours = dbn.prob_v_given_h(np.array(h_bits, dtype=float), params)
            oracle = oracles.rbm_conditional_v(
                params.weights, params.visible_bias, params.hidden_bias, h_bits
            )
            np.testing.assert_allclose(ours, oracle, atol=1e-9)

    def test_open_interval(self, rng):
        params = toy_params(rng, scale=3.0)
        probs = dbn.prob_h_given_v(rng.random((20, 3)), params)
        assert np.all(probs > 0) and np.all(probs < 1)


class TestCdUpdate:
    def test_zero_learning_rate_is_identity(self, rng):
        params = toy_params(rng)
        config = dbn.TrainConfig(layer_sizes=(2,), rbm_learning_rate=0.0)
        batch = rng.random((10, 3))
        updated = dbn.cd_update(batch, params, config, rng)
        np.testing.assert_array_equal(updated.weights, params.weights)
        np.testing.assert_array_equal(updated.visible_bias, params.visible_bias)
        np.testing.assert_array_equal(updated.hidden_bias, params.hidden_bias)

    def test_deterministic_given_seed(self, rng):
        params = toy_params(rng)
        config = dbn.TrainConfig(layer_sizes=(2,))
        batch = rng.random((10, 3))
        a = dbn.cd_update(batch, params, config, np.random.default_rng(42))
        b = dbn.cd_update(batch, params, config, np.random.default_rng(42))
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_mean_update_aligns_with_exact_gradient(self):
        rng = np.random.default_rng(99)
        params = toy_params(rng, visible=3, hidden=2, scale=0.5)
        patterns = np.array([[1, 0, 1], [0, 1, 0]], dtype=float)
        batches = [patterns[rng.integers(0, 2, size=20)] for _ in range(200)]
        config = dbn.TrainConfig(layer_sizes=(2,), rbm_learning_rate=1.0, l2_coefficient=0.0)
        deltas = []
        for batch in batches:
            updated = dbn.cd_update(batch, params, config, rng)
            deltas.append(
                np.concatenate(
                    [
                        (updated.weights - params.weights).ravel(),
                        updated.visible_bias - params.visible_bias,
                        updated.hidden_bias - params.hidden_bias,
                    ]
                )
            )
        mean_delta = np.mean(deltas, axis=0)
        gw, ga, gb = oracles.rbm_exact_gradient(
            params.weights, params.visible_bias, params.hidden_bias, np.vstack(batches)
        )
        exact = np.concatenate([gw.ravel(), ga, gb])
        cosine = mean_delta @ exact / (np.linalg.norm(mean_delta) * np.linalg.norm(exact))
        assert cosine > 0.5


class TestPretrain:
    def test_empty_layer_sizes(self):
        config = dbn.TrainConfig(layer_sizes=())
        stack, errors = dbn.pretrain(np.random.default_rng(0).random((10, 4)), config)
        assert stack == [] and errors == []

    def test_constant_data_reconstruction(self):
        data = np.tile(np.array([1.0, 0.0, 1.0, 0.0]), (50, 1))
        config = dbn.TrainConfig(
            layer_sizes=(6,), rbm_epochs=30, rbm_learning_rate=0.5, batch_size=10, seed=4
        )
        _, errors = dbn.pretrain(data, config)
        assert errors[0][-1] < 1e-2

    def test_two_layer_no_nan(self, rng):
        data = rng.random((60, 22))
        config = dbn.TrainConfig(layer_sizes=(50, 50), rbm_epochs=5, seed=1)
        stack, errors = dbn.pretrain(data, config)
        assert len(stack) == 2
        assert all(np.all(np.isfinite(p.weights)) for p in stack)
        assert all(np.isfinite(e) for layer in errors for e in layer)


class TestInitClassifier:
    def test_stack_copied_bit_exact(self, rng):
        stack = [toy_params(rng, 4, 3), toy_params(rng, 3, 2)]
        model = dbn.init_classifier(stack, 2, seed=0)
        np.testing.assert_array_equal(model.stack[0].weights, stack[0].weights)
        model.stack[0].weights[0, 0] += 1.0  # model owns a copy
        assert model.stack[0].weights[0, 0] != stack[0].weights[0, 0]

    def test_head_shape(self, rng):
        model = dbn.init_classifier([toy_params(rng, 4, 3)], 5, seed=0)
        assert model.head_weights.shape == (3, 5)
        assert model.head_bias.shape == (5,)

    def test_deterministic(self, rng):
        stack = [toy_params(rng, 4, 3)]
        a = dbn.init_classifier(stack, 2, seed=9)
        b = dbn.init_classifier(stack, 2, seed=9)
        np.testing.assert_array_equal(a.head_weights, b.head_weights)

    def test_empty_stack_needs_input_dim(self):
        with pytest.raises(ValueError):
            dbn.init_classifier([], 2)
        model = dbn.init_classifier([], 3, input_dim=7, seed=0)
        assert model.head_weights.shape == (7, 3)


class TestFinetune:
    def test_separable_blobs(self):
        rng = np.random.default_rng(5)
        n = 200
        x = np.vstack(
            [rng.normal(0.25, 0.05, size=(n, 2)), rng.normal(0.75, 0.05, size=(n, 2))]
        )
        y = np.repeat([0, 1], n)
        config = dbn.TrainConfig(
            layer_sizes=(8,),
            rbm_epochs=5,
            init_std=0.1,
            finetune_learning_rate=0.5,
            max_finetune_epochs=150,
            early_stopping_patience=50,
            seed=3,
        )
        gen = np.random.default_rng(config.seed)
        stack, _ = dbn.pretrain(x, config, gen)
        model = dbn.init_classifier(stack, 2, seed=3, init_std=0.1)
        model, _ = dbn.finetune(model, (x, y), config, gen)
        assert dbn.evaluate(model, (x, y)).accuracy >= 0.99

    def test_xor_learnable(self):
        base = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
        x = np.tile(base, (25, 1))
        y = np.tile([0, 1, 1, 0], 25)
        config = dbn.TrainConfig(
            layer_sizes=(4,),
            rbm_epochs=0,
            init_std=1.0,
            finetune_learning_rate=2.0,
            batch_size=10,
            max_finetune_epochs=500,
            early_stopping_patience=500,
            seed=11,
        )
        gen = np.random.default_rng(config.seed)
        stack, _ = dbn.pretrain(x, config, gen)
        model = dbn.init_classifier(stack, 2, seed=config.seed, init_std=config.init_std)
        model, _ = dbn.finetune(model, (x, y), config, gen)
        assert dbn.evaluate(model, (x, y)).accuracy >= 0.99

    def test_gradient_matches_finite_differences(self, rng):
        model = toy_model(rng)
        x = rng.random((5, 5))
        targets = dbn.one_hot(rng.integers(0, 2, size=5), 2)
        l2 = 0.01
        _, grads = dbn.loss_and_gradients(model, x, targets, l2)

        def loss_at(m):
            return dbn.loss_and_gradients(m, x, targets, l2)[0]

        h = 1e-5
        worst = 0.0
        arrays = [
            *[(layer.weights, grads[i][0]) for i, layer in enumerate(model.stack)],
            *[(layer.hidden_bias, grads[i][1]) for i, layer in enumerate(model.stack)],
            (model.head_weights, grads[-1][0]),
            (model.head_bias, grads[-1][1]),
        ]
        for array, grad in arrays:
            flat = array.ravel()
            gflat = np.asarray(grad).ravel()
            for idx in range(flat.size):
                original = flat[idx]
                flat[idx] = original + h
                up = loss_at(model)
                flat[idx] = original - h
                down = loss_at(model)
                flat[idx] = original
                fd = (up - down) / (2 * h)
                rel = abs(fd - gflat[idx]) / max(abs(fd), abs(gflat[idx]), 1e-10)
                worst = max(worst, rel)
        assert worst <= 1e-4

    def test_single_class_rejected(self, rng):
        model = toy_model(rng)
        x = rng.random((10, 5))
        with pytest.raises(DegenerateLabelsError):
            dbn.finetune(model, (x, np.zeros(10, dtype=int)), dbn.TrainConfig(layer_sizes=(4, 3)))

    def test_deterministic(self, rng):
        x = rng.random((40, 6))
        y = rng.integers(0, 2, size=40)
        config = dbn.TrainConfig(layer_sizes=(5,), rbm_epochs=2, max_finetune_epochs=5, seed=8)

        def run():
            gen = np.random.default_rng(config.seed)
            stack, _ = dbn.pretrain(x, config, gen)
            model = dbn.init_classifier(stack, 2, seed=config.seed)
            return dbn.finetune(model, (x, y), config, gen)[0]

        a, b = run(), run()
        np.testing.assert_array_equal(a.head_weights, b.head_weights)
        np.testing.assert_array_equal(a.stack[0].weights, b.stack[0].weights)


class TestPredict:
    def test_proba_sums_to_one(self, rng):
        model = toy_model(rng, classes=4)
        proba = dbn.predict_proba(model, rng.random((30, 5)))
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)

    def test_two_class_complement(self, rng):
        model = toy_model(rng, classes=2)
        proba = dbn.predict_proba(model, rng.random((10, 5)))
        np.testing.assert_allclose(proba[:, 1], 1.0 - proba[:, 0], atol=1e-12)

    def test_zero_head_gives_uniform(self, rng):
        model = toy_model(rng, classes=4)
        model.head_weights[:] = 0.0
        model.head_bias[:] = 0.0
        proba = dbn.predict_proba(model, rng.random(5))
        np.testing.assert_allclose(proba, 0.25, atol=1e-12)

    def test_classify_tie_breaks_low_index(self, rng):
        model = toy_model(rng, classes=3)
        model.head_weights[:] = 0.0
        model.head_bias[:] = 0.0
        assert dbn.classify(model, rng.random(5)) == 0

    def test_classify_matches_argmax(self, rng):
        model = toy_model(rng, classes=4)
        x = rng.random((1000, 5))
        np.testing.assert_array_equal(
            dbn.classify(model, x), np.argmax(dbn.predict_proba(model, x), axis=1)
        )

    def test_proba_equivariant_under_output_relabeling(self, rng):
        model = toy_model(rng, classes=4)
        x = rng.random((20, 5))
        perm = np.array([2, 0, 3, 1])
        relabeled = model.copy()
        relabeled.head_weights = relabeled.head_weights[:, perm]
        relabeled.head_bias = relabeled.head_bias[perm]
        np.testing.assert_allclose(
            dbn.predict_proba(relabeled, x),
            dbn.predict_proba(model, x)[:, perm],
            atol=1e-12,
        )


class TestEvaluate:
    def test_memorized_sample(self, rng):
        scheme = ClassScheme.from_class_count(2)
        model = dbn.DbnModel(
            stack=[],
            head_weights=np.array([[5.0, -5.0], [0.0, 0.0]]),
            head_bias=np.zeros(2),
            input_kind=dbn.INPUT_FEATURES22,
            scheme=scheme,
        )
        result = dbn.evaluate(model, (np.array([[1.0, 0.0]]), np.array([0])))
        assert result.accuracy == 1.0

    def test_confusion_sums_to_test_size(self, rng):
        model = toy_model(rng, classes=3)
        x = rng.random((57, 5))
        y = rng.integers(0, 3, size=57)
        result = dbn.evaluate(model, (x, y))
        assert result.confusion.sum() == 57
        assert result.confusion.shape == (3, 3)

    def test_accuracy_from_confusion(self, rng):
        model = toy_model(rng, classes=3)
        x = rng.random((40, 5))
        y = rng.integers(0, 3, size=40)
        result = dbn.evaluate(model, (x, y))
        assert result.accuracy == pytest.approx(np.trace(result.confusion) / 40)


class TestSerialization:
    def test_round_trip(self, tmp_path, rng):
        model = toy_model(rng, classes=3)
        config = dbn.TrainConfig(layer_sizes=(4, 3), seed=5)
        path = tmp_path / "model.json"
        dbn.save_model(path, model, config=config, seed=5, normalization={"mode": "separate"})
        loaded, doc = dbn.load_model(path)
        np.testing.assert_array_equal(loaded.head_weights, model.head_weights)
        np.testing.assert_array_equal(loaded.stack[1].weights, model.stack[1].weights)
        assert loaded.scheme == model.scheme
        assert doc["config"]["seed"] == 5
        assert doc["normalization"]["mode"] == "separate"

    def test_byte_identical_saves(self, tmp_path, rng):
        model = toy_model(rng)
        dbn.save_model(tmp_path / "a.json", model)
        dbn.save_model(tmp_path / "b.json", model)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            dbn.load_model(path)
