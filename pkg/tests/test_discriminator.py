import numpy as np
import pytest

from pfbi.discriminator import (DiscriminatorNet, DiscriminatorTrainer, LatentDataset, PriorSpec, TrainConfig,
                                accuracy, bce_loss, format_net, forward, load_net, parse_net, roc_auc,
                                save_net, train)
from pfbi.errors import DimensionMismatch, EmptyDataset, InvalidParameter, ParseError
from pfbi.mvn import RngState
from pfbi.synthdata import SynthSpec, generate


def _zero_net(sizes=(2, 4, 1)):
    return DiscriminatorNet(sizes, [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                            [np.zeros(b) for b in sizes[1:]])


def _norm_net():
    """sigmoid(10 (1 - |z|_1)) built from ReLU units on +z_i and -z_i."""
    W1 = np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]])
    W2 = -10.0 * np.ones((4, 1))
    return DiscriminatorNet((2, 4, 1), [W1, W2], [np.zeros(4), np.array([10.0])])


class TestForward:
    def test_zero_net_is_one_half(self, rng):
        net = _zero_net()
        assert forward(net, [3.0, -1.0]) == 0.5
        np.testing.assert_array_equal(net(rng.normal(size=(20, 2))), 0.5)

    def test_hand_built_net_scores_origin_high(self):
        net = _norm_net()
        assert forward(net, [0.0, 0.0]) > 0.99
        assert forward(net, [0.05, -0.05]) > 0.99
        assert forward(net, [3.0, 3.0]) < 1e-6

    def test_monotone_in_final_pre_activation(self):
        net = _zero_net((1, 1))
        outs = []
        for b in np.linspace(-40, 40, 81):
            net.biases[0][:] = b
            outs.append(forward(net, [0.0]))
        assert np.all(np.diff(outs) >= 0)
        assert 0.0 < min(outs) and max(outs) < 1.0

    def test_output_strictly_inside_unit_interval(self):
        net = _zero_net((1, 1))
        net.weights[0][:] = 1e6
        assert 0.0 < net(np.array([[-1.0], [1.0]])).min() and net(np.array([[-1.0], [1.0]])).max() < 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            forward(_zero_net(), [1.0, 2.0, 3.0])

    def test_bad_architecture(self):
        with pytest.raises(DimensionMismatch):
            DiscriminatorNet((2, 3, 1), [np.zeros((2, 3))], [np.zeros(3)])
        with pytest.raises(DimensionMismatch):
            DiscriminatorNet((2, 3, 1), [np.zeros((3, 2)), np.zeros((3, 1))], [np.zeros(3), np.zeros(1)])


class TestGradients:
    def test_backprop_matches_finite_differences(self):
        gen = RngState(3).generator()
        net = DiscriminatorNet.initialize((2, 5, 3, 1), gen)
        x = gen.normal(size=(8, 2))
        y = np.array([1, 0] * 4, dtype=float)
        _, grads = net.loss_and_grads(x, y)
        h = 1e-6
        for p, g in zip(net.params(), grads):
            idx = np.unravel_index(np.argmax(np.abs(g)), p.shape)
            old = p[idx]
            p[idx] = old + h
            up, _ = net.loss_and_grads(x, y)
            p[idx] = old - h
            down, _ = net.loss_and_grads(x, y)
            p[idx] = old
            assert (up - down) / (2 * h) == pytest.approx(g[idx], rel=1e-4, abs=1e-8)


class TestMetricsHelpers:
    def test_auc_perfect_and_chance(self):
        assert roc_auc(np.array([0.9, 0.8]), np.array([0.1, 0.2])) == 1.0
        assert roc_auc(np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.5

    def test_accuracy(self):
        assert accuracy(np.array([0.9, 0.4]), np.array([0.1, 0.6])) == 0.5

    def test_bce_of_confident_correct_scores_is_small(self):
        assert bce_loss(np.array([0.999, 0.001]), np.array([1.0, 0.0])) < 0.01


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.batch_size, cfg.steps, cfg.learning_rate) == (256, 2000, 1e-3)
        assert (cfg.beta1, cfg.beta2, cfg.epsilon) == (0.9, 0.999, 1e-8)

    @pytest.mark.parametrize("kwargs", [{'batch_size': 3}, {'steps': 0}, {'learning_rate': 0.0},
                                        {'beta1': 1.0}, {'holdout_fraction': 1.0}])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(InvalidParameter):
            TrainConfig(**kwargs)


class TestLatentDataset:
    def test_empty(self):
        with pytest.raises(EmptyDataset):
            LatentDataset(np.zeros((0, 2)))

    def test_read_only(self):
        data = LatentDataset(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            data.points[0, 0] = 1.0


class TestTrain:
    def test_half_arc_is_separated(self):
        spec = SynthSpec(kind='arc', n_points=1000, noise_sigma=0.05, span_deg=180.0, seed=1)
        trainer = DiscriminatorTrainer(TrainConfig())
        trainer.train(generate(spec), PriorSpec(2))
        assert trainer.report.heldout_auc >= 0.95
        assert trainer.report.history[0]['step'] == 0
        assert trainer.report.history[-1]['step'] == 2000

    def test_heldout_loss_falls_over_the_first_hundred_steps(self, arc_data):
        trainer = DiscriminatorTrainer(TrainConfig(steps=100, log_every=1))
        trainer.train(arc_data, PriorSpec(2))
        losses = np.array([h['eval_loss'] for h in trainer.report.history])
        assert len(losses) == 101
        # single-step rises allowed, within 0.02 of the running minimum
        assert np.max(losses - np.minimum.accumulate(losses)) <= 0.02
        windows = losses[1:].reshape(4, 25).mean(axis=1)
        assert np.all(np.diff(windows) < 0)
        assert losses[-1] < 0.5 * losses[0]

    @pytest.mark.slow
    def test_indistinguishable_classes_stay_at_chance(self):
        gen = RngState(5).generator()
        data = LatentDataset(PriorSpec(2).sample(gen, 1000))
        net = train(data, PriorSpec(2), TrainConfig())
        fresh = RngState(6).generator()
        pos = net(PriorSpec(2).sample(fresh, 5000))
        neg = net(PriorSpec(2).sample(fresh, 5000))
        assert abs(accuracy(pos, neg) - 0.5) <= 0.05

    def test_scores_fall_towards_empty_centre(self, arc_data, arc_net):
        starts = arc_data.points[::10]
        fractions = np.linspace(0.0, 1.0, 11)
        profile = [np.mean(arc_net(starts * (1.0 - f))) for f in fractions]
        assert profile[0] > profile[-1]
        assert np.polyfit(fractions, profile, 1)[0] < 0

    def test_seeded_training_is_reproducible(self, arc_data):
        cfg = TrainConfig(steps=20, seed=3)
        a = train(arc_data, PriorSpec(2), cfg, arch=(2, 8, 1))
        b = train(arc_data, PriorSpec(2), cfg, arch=(2, 8, 1))
        assert format_net(a) == format_net(b)

    def test_architecture_must_match_data(self, arc_data):
        with pytest.raises(DimensionMismatch):
            train(arc_data, PriorSpec(2), TrainConfig(steps=1), arch=(3, 8, 1))


class TestWeightFile:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        net = DiscriminatorNet.initialize((2, 7, 5, 1), rng)
        path = str(tmp_path / "net.txt")
        save_net(net, path)
        back = load_net(path)
        x = rng.normal(size=(100, 2)) * 3
        np.testing.assert_array_equal(back(x), net(x))
        assert back.layer_sizes == net.layer_sizes

    def test_trained_net_round_trip(self, tmp_path, arc_net, rng):
        path = str(tmp_path / "arc.net")
        save_net(arc_net, path)
        x = rng.normal(size=(100, 2))
        np.testing.assert_array_equal(load_net(path)(x), arc_net(x))

    def test_truncated_file(self, rng):
        text = format_net(DiscriminatorNet.initialize((2, 3, 1), rng))
        lines = text.splitlines()
        with pytest.raises(ParseError):
            parse_net("\n".join(lines[:-1]))
        with pytest.raises(ParseError):
            parse_net("\n".join(lines[:4] + ["end"]))

    def test_missing_header(self):
        with pytest.raises(ParseError):
            parse_net("dims: 1 1\nW\n0.0\nb 0.0\nend\n")

    def test_declared_dims_disagree(self, rng):
        text = format_net(DiscriminatorNet.initialize((2, 3, 1), rng))
        with pytest.raises(DimensionMismatch):
            parse_net(text.replace("dims: 2 3 1", "dims: 2 4 1"))
        with pytest.raises(DimensionMismatch):
            parse_net(text.replace("dims: 2 3 1", "dims: 2 3 3 1"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_net(str(tmp_path / "nope.net"))
