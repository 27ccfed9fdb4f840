# -*- coding: utf-8 -*-
"""
Tests for attribution.py

Tests the eleven attribution methods: linear-model reductions,
completeness of the path methods, zero-noise collapse, preconditions,
determinism and the CSV map format.
"""

from pathlib import Path

import numpy as np
import pytest

from pgig.core.attribution import (
    METHOD_NAMES,
    METHODS,
    AttributionMap,
    MethodConfig,
    SeedConvention,
    expected_gradients,
    explain,
    get_method,
    gradient_times_input,
    guided_backprop,
    integrated_gradients,
    load_attribution_csv,
    pattern_attribution,
    pgig,
    random_baseline,
    save_attribution_csv,
    smoothgrad_ig,
    smoothgrad_squared,
    vanilla_gradient,
    vargrad,
)
from pgig.core.network import Activation, Layer, Network, OutputMode, predict
from pgig.core.trainer import (
    SyntheticImageTask,
    TrainConfig,
    fit_patterns,
    generate_task,
    train,
)
from pgig.utils.errors import (
    ArgumentError,
    ConfigError,
    ConfigurationError,
    DimensionError,
    NumericError,
)

from conftest import random_network


class TestRegistry:
    """Tests for method lookup."""

    def test_eleven_methods(self):
        """Test that every method is registered under its name."""
        assert len(METHODS) == 11
        assert METHOD_NAMES[0] == "vanilla_gradient"
        assert "pgig" in METHOD_NAMES
        assert "random_baseline" in METHOD_NAMES

    def test_unknown_method_lists_valid_names(self):
        """Test the error for a misspelt method."""
        with pytest.raises(ArgumentError, match="valid methods: vanilla_gradient"):
            get_method("integrated_gradient")

    def test_explain_by_name(self, stress_net):
        """Test dispatch through explain()."""
        amap = explain("vanilla_gradient", stress_net, np.array([0.5, 0.0]), None)
        assert amap.method == "vanilla_gradient"
        assert amap.values.tolist() == [1.0, -1.0]


class TestMethodConfig:
    """Tests for hyperparameter validation."""

    def test_defaults(self):
        """Test the documented default values."""
        cfg = MethodConfig()
        assert (cfg.steps, cfg.samples, cfg.baseline_draws) == (25, 25, 49)
        assert cfg.noise_sigma ** 2 == pytest.approx(0.15)
        assert cfg.pgig_seed is SeedConvention.ONE

    @pytest.mark.parametrize("field,value", [
        ("steps", 0), ("samples", 0), ("noise_sigma", -0.1), ("baseline_draws", 0),
    ])
    def test_invalid_values(self, field, value):
        """Test that out-of-range values raise ArgumentError."""
        with pytest.raises(ArgumentError):
            MethodConfig(**{field: value})

    def test_zero_noise_uses_one_sample(self):
        """Test that sigma = 0 collapses the sample count."""
        assert MethodConfig(noise_sigma=0.0, samples=25).effective_samples == 1

    def test_baseline_shape_checked(self, stress_net):
        """Test that a mismatched baseline raises DimensionError."""
        with pytest.raises(DimensionError):
            integrated_gradients(stress_net, np.ones(2), None, MethodConfig(baseline=np.ones(3)))


class TestLinearModel:
    """Tests for the reductions on a single linear layer."""

    @pytest.mark.parametrize("steps", [1, 5, 25])
    def test_reductions(self, steps):
        """Test IG = x * w and PGIG = p * IG on linear models."""
        rng = np.random.default_rng(steps)
        for _ in range(10):
            dim = int(rng.integers(1, 8))
            net = random_network(rng, [dim, 1], patterns=True)
            layer = net.layers[0]
            x = rng.normal(size=dim)
            cfg = MethodConfig(steps=steps)

            w = layer.weights[0]
            p = layer.pattern[0]
            np.testing.assert_allclose(vanilla_gradient(net, x, None, cfg).values, w,
                                       atol=1e-12)
            np.testing.assert_allclose(gradient_times_input(net, x, None, cfg).values, x * w,
                                       atol=1e-12)
            np.testing.assert_allclose(integrated_gradients(net, x, None, cfg).values, x * w,
                                       atol=1e-12)
            np.testing.assert_allclose(pgig(net, x, None, cfg).values, x * w * p, atol=1e-12)
            np.testing.assert_allclose(pattern_attribution(net, x, None, cfg).values,
                                       predict(net, x)[0] * w * p, atol=1e-12)

    @pytest.mark.parametrize("steps", [1, 5, 25])
    def test_deep_linear_reduction(self, steps):
        """Test that on stacked linear layers PGIG is IG of the network with weights w * p."""
        rng = np.random.default_rng(100 + steps)
        for _ in range(10):
            sizes = [int(rng.integers(1, 6)) for _ in range(3)] + [1]
            net = random_network(rng, sizes, activation=Activation.LINEAR, patterns=True)
            pattern_net = Network([Layer(layer.weights * layer.pattern, layer.bias,
                                         Activation.LINEAR) for layer in net.layers])
            x = rng.normal(size=sizes[0])
            cfg = MethodConfig(steps=steps)

            chain = np.ones(1)
            for layer in reversed(net.layers):
                chain = (layer.weights * layer.pattern).T @ chain
            np.testing.assert_allclose(pgig(net, x, None, cfg).values, x * chain, atol=1e-10)
            np.testing.assert_allclose(pgig(net, x, None, cfg).values,
                                       integrated_gradients(pattern_net, x, None, cfg).values,
                                       atol=1e-10)

    def test_baseline_shifts_integral(self):
        """Test IG = (x - b) * w with a nonzero baseline."""
        rng = np.random.default_rng(3)
        net = random_network(rng, [4, 1])
        x, b = rng.normal(size=4), rng.normal(size=4)
        amap = integrated_gradients(net, x, None, MethodConfig(baseline=b))
        np.testing.assert_allclose(amap.values, (x - b) * net.layers[0].weights[0], atol=1e-12)


class TestCompleteness:
    """Tests for the summation property of integrated gradients."""

    @pytest.mark.parametrize("steps", [50, 1000, 2000])
    def test_gap_on_stress_model(self, stress_net, steps):
        """
        Test that the gap is exactly 2/m: the kink point t = 1/2 gets subgradient 0.

        At m = 1000 the gap therefore sits on the 2e-3 bound, not below it.
        """
        x = np.array([2.0, 0.0])
        amap = integrated_gradients(stress_net, x, None, MethodConfig(steps=steps))
        gap = abs(float(predict(stress_net, x)[0] - predict(stress_net, np.zeros(2))[0])
                  - float(np.sum(amap.values)))
        assert gap == pytest.approx(2.0 / steps, abs=1e-12)
        if steps >= 1000:
            assert gap <= 2e-3 + 1e-12

    def test_gap_shrinks_with_steps(self, stress_net):
        """Test gap(m = 2000) < gap(m = 50)."""
        x = np.array([2.0, 0.0])
        gaps = [abs(1.0 - float(np.sum(integrated_gradients(
            stress_net, x, None, MethodConfig(steps=m)).values))) for m in (50, 2000)]
        assert gaps[1] < gaps[0]

    def test_gap_shrinks_on_random_relu_networks(self):
        """Test that the completeness gap falls roughly like 1/m on random ReLU nets."""
        rng = np.random.default_rng(17)
        gaps = {20: [], 2000: []}
        for _ in range(20):
            net = random_network(rng, [4, 8, 6, 1])
            x = rng.normal(size=4)
            delta = float(predict(net, x)[0] - predict(net, np.zeros(4))[0])
            for m in gaps:
                amap = integrated_gradients(net, x, None, MethodConfig(steps=m))
                gaps[m].append(abs(delta - float(np.sum(amap.values))))
        assert np.mean(gaps[20]) > 0.0
        assert np.mean(gaps[2000]) < np.mean(gaps[20]) / 10.0

    def test_exact_without_kink(self, stress_net):
        """Test exact completeness when the path never crosses the kink."""
        x = np.array([0.5, 0.25])
        amap = integrated_gradients(stress_net, x, None, MethodConfig(steps=7))
        expected = predict(stress_net, x)[0] - predict(stress_net, np.zeros(2))[0]
        assert float(np.sum(amap.values)) == pytest.approx(expected, abs=1e-12)


class TestCollapse:
    """Tests for the zero-noise and degenerate-parameter identities."""

    @pytest.fixture
    def net_and_input(self):
        rng = np.random.default_rng(11)
        return random_network(rng, [5, 7, 3], output_mode=OutputMode.SOFTMAX), rng.normal(size=5)

    def test_smoothgrad_squared_without_noise(self, net_and_input):
        """Test SmoothGrad^2 with sigma = 0 equals the squared gradient."""
        net, x = net_and_input
        cfg = MethodConfig(noise_sigma=0.0)
        grad = vanilla_gradient(net, x, 1, cfg).values
        assert np.array_equal(smoothgrad_squared(net, x, 1, cfg).values, grad ** 2)

    def test_vargrad_without_noise(self, net_and_input):
        """Test VarGrad with sigma = 0 is exactly zero."""
        net, x = net_and_input
        values = vargrad(net, x, 2, MethodConfig(noise_sigma=0.0)).values
        assert np.array_equal(values, np.zeros(5))

    def test_smoothgrad_ig_without_noise(self, net_and_input):
        """Test SmoothGrad-IG with sigma = 0 equals IG."""
        net, x = net_and_input
        cfg = MethodConfig(noise_sigma=0.0, steps=10)
        assert np.array_equal(smoothgrad_ig(net, x, 0, cfg).values,
                              integrated_gradients(net, x, 0, cfg).values)

    def test_single_step_ig_is_gradient_times_input(self, net_and_input):
        """Test IG with m = 1 and zero baseline equals gradient x input."""
        net, x = net_and_input
        cfg = MethodConfig(steps=1)
        assert np.array_equal(integrated_gradients(net, x, 0, cfg).values,
                              gradient_times_input(net, x, 0, cfg).values)

    def test_pgig_with_unit_patterns_is_ig(self, net_and_input):
        """Test that all-ones patterns turn PGIG into IG."""
        net, x = net_and_input
        ones = net.with_patterns([np.ones_like(layer.weights) for layer in net.layers])
        cfg = MethodConfig(steps=8)
        assert np.array_equal(pgig(ones, x, 1, cfg).values,
                              integrated_gradients(net, x, 1, cfg).values)


class TestStressModel:
    """Tests on the distractor-cancelling model."""

    def test_pgig_ignores_distractor(self, stress_net_with_patterns):
        """Test that PGIG gives the distractor exactly zero."""
        x = np.array([0.5, 0.2])
        amap = pgig(stress_net_with_patterns, x, None, MethodConfig())
        assert amap.values.tolist() == [0.5, 0.0]

    def test_ig_leaks_into_distractor(self, stress_net):
        """Test that IG attributes to the distractor."""
        amap = integrated_gradients(stress_net, np.array([0.5, 0.2]), None, MethodConfig())
        np.testing.assert_allclose(amap.values, [0.5, -0.2], atol=1e-12)

    def test_pattern_attribution_seeded_with_output(self, stress_net_with_patterns):
        """Test PA = y-hat * (w * p) through the network."""
        amap = pattern_attribution(stress_net_with_patterns, np.array([0.5, 0.2]), None,
                                   MethodConfig())
        assert amap.values[0] == pytest.approx(0.3)
        assert amap.values[1] == 0.0

    def test_pattern_attribution_zero_on_plateau(self, stress_net_with_patterns):
        """Test that PA is zero where the ReLU is off."""
        amap = pattern_attribution(stress_net_with_patterns, np.array([2.0, 0.0]), None,
                                   MethodConfig())
        assert amap.values.tolist() == [0.0, 0.0]

    def test_pgig_output_seed_convention(self, stress_net_with_patterns):
        """Test that the output seed scales each path point by y-hat."""
        x = np.array([0.5, 0.0])
        one = pgig(stress_net_with_patterns, x, None, MethodConfig(steps=4))
        out = pgig(stress_net_with_patterns, x, None,
                   MethodConfig(steps=4, pgig_seed=SeedConvention.OUTPUT))
        assert one.values[0] == pytest.approx(0.5)
        # y-hat at k/4 * x is k/8, averaged over k = 1..4
        assert out.values[0] == pytest.approx(0.5 * (1 + 2 + 3 + 4) / 32)
        assert out.metadata["pgig_seed"] == "output"

    def test_vargrad_positive_near_kink(self, stress_net):
        """Test that gradient variance appears where the ReLU switches."""
        amap = vargrad(stress_net, np.array([1.0, 0.0]), None, MethodConfig())
        assert np.all(amap.values > 0.0)

    def test_guided_backprop_on_stress_model(self, stress_net):
        """Test that guided backprop blocks the negative upstream signal."""
        amap = guided_backprop(stress_net, np.array([0.5, 0.0]), None, MethodConfig())
        assert amap.values.tolist() == [0.0, 0.0]


@pytest.mark.slow
class TestTrainedClassifier:
    """Tests on a classifier trained on the image task."""

    def test_every_method_finite_on_random_inputs(self):
        """Test finite maps from all eleven methods on 1000 random inputs."""
        splits = generate_task(SyntheticImageTask(train_size=200, val_size=40, test_size=8))
        net = fit_patterns(train(splits, TrainConfig(hidden_sizes=[8], epochs=3)),
                           splits.train).network
        cfg = MethodConfig(steps=5, samples=3, baseline_draws=3,
                           reference=splits.train.images[:50])
        rng = np.random.default_rng(9)
        inputs = rng.uniform(-1.0, 1.0, size=(1000, 256))
        inputs[::10] *= 3.0

        for x in inputs:
            target = int(np.argmax(predict(net, x)))
            for name in METHOD_NAMES:
                values = explain(name, net, x, target, cfg).values
                assert values.shape == (256,)
                assert np.all(np.isfinite(values)), name


class TestPreconditions:
    """Tests for configuration and argument errors."""

    @pytest.mark.parametrize("method", [pgig, pattern_attribution])
    def test_pattern_methods_need_patterns(self, stress_net, method):
        """Test that pattern methods refuse a network without patterns."""
        with pytest.raises(ConfigurationError, match="patterns"):
            method(stress_net, np.zeros(2), None, MethodConfig())

    def test_expected_gradients_needs_reference(self, stress_net):
        """Test that EG without reference data fails."""
        with pytest.raises(ConfigurationError):
            expected_gradients(stress_net, np.zeros(2), None, MethodConfig())

    def test_expected_gradients_reference_width(self, stress_net):
        """Test that reference rows must match the input."""
        with pytest.raises(DimensionError):
            expected_gradients(stress_net, np.zeros(2), None,
                               MethodConfig(reference=np.ones((3, 4))))

    def test_multi_output_needs_target(self):
        """Test that softmax networks need a target class."""
        net = random_network(np.random.default_rng(0), [3, 2], output_mode=OutputMode.SOFTMAX)
        with pytest.raises(ArgumentError):
            vanilla_gradient(net, np.zeros(3), None, MethodConfig())

    def test_non_finite_input(self, stress_net):
        """Test that NaN inputs raise NumericError."""
        with pytest.raises(NumericError):
            integrated_gradients(stress_net, np.array([np.nan, 0.0]), None, MethodConfig())

    def test_wrong_input_shape(self, stress_net):
        """Test that inputs must match the network."""
        with pytest.raises(DimensionError):
            vanilla_gradient(stress_net, np.zeros(3), None, MethodConfig())


class TestSampling:
    """Tests for the seeded sampling methods."""

    def test_expected_gradients_reference_equal_to_input(self, stress_net):
        """Test that a reference identical to x gives zero attribution."""
        x = np.array([0.3, -0.7])
        amap = expected_gradients(stress_net, x, None, MethodConfig(reference=x[None, :]))
        assert amap.values.tolist() == [0.0, 0.0]

    def test_expected_gradients_on_linear_model(self):
        """Test EG = (x - mean reference) * w on a linear model."""
        rng = np.random.default_rng(2)
        net = random_network(rng, [3, 1])
        x = rng.normal(size=3)
        reference = np.array([[1.0, 0.0, -1.0], [1.0, 0.0, -1.0]])
        amap = expected_gradients(net, x, None, MethodConfig(reference=reference))
        np.testing.assert_allclose(amap.values, (x - reference[0]) * net.layers[0].weights[0],
                                   atol=1e-12)

    @pytest.mark.parametrize("method", [smoothgrad_squared, vargrad, smoothgrad_ig,
                                        random_baseline])
    def test_same_seed_same_result(self, method):
        """Test determinism for a fixed seed and sensitivity to the seed."""
        rng = np.random.default_rng(4)
        net = random_network(rng, [4, 6, 3], output_mode=OutputMode.SOFTMAX)
        x = rng.normal(size=4)
        first = method(net, x, 0, MethodConfig(random_seed=5, steps=5, samples=5))
        again = method(net, x, 0, MethodConfig(random_seed=5, steps=5, samples=5))
        other = method(net, x, 0, MethodConfig(random_seed=6, steps=5, samples=5))
        assert np.array_equal(first.values, again.values)
        assert not np.array_equal(first.values, other.values)

    def test_random_baseline_range(self, stress_net):
        """Test that the random ordering is uniform on [0, 1)."""
        values = random_baseline(stress_net, np.zeros(2), None, MethodConfig()).values
        assert values.shape == (2,)
        assert np.all((values >= 0.0) & (values < 1.0))

    def test_metadata(self, stress_net):
        """Test that path methods record their parameters."""
        amap = integrated_gradients(stress_net, np.ones(2), None, MethodConfig(steps=3))
        assert amap.metadata["steps"] == 3
        assert amap.metadata["baseline"] == "zero"
        assert amap.metadata["output"] == "raw"


class TestAttributionCsv:
    """Tests for the attribution map CSV format."""

    def test_save_and_load(self, tmp_path):
        """Test that values survive a round trip bit for bit."""
        values = np.array([0.1, -1.0 / 3.0, 2.5e-300, 0.0])
        path = save_attribution_csv(AttributionMap(values, "pgig", 1), tmp_path / "map.csv")
        assert Path(path).read_bytes().startswith(b"index,value\n0,0.1\n")
        loaded = load_attribution_csv(path, "pgig")
        assert np.array_equal(loaded.values, values)
        assert loaded.method == "pgig"

    def test_bad_header(self, tmp_path):
        """Test that a foreign header is reported on line 1."""
        path = tmp_path / "bad.csv"
        path.write_text("i,v\n0,1.0\n", encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            load_attribution_csv(path)
        assert info.value.line == 1

    def test_out_of_order_index(self, tmp_path):
        """Test that indices must count up from 0."""
        path = tmp_path / "gap.csv"
        path.write_text("index,value\n0,1.0\n2,1.0\n", encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            load_attribution_csv(path)
        assert info.value.line == 3

    def test_malformed_value(self, tmp_path):
        """Test that a non-number is reported with its line."""
        path = tmp_path / "nan.csv"
        path.write_text("index,value\n0,abc\n", encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            load_attribution_csv(path)
        assert info.value.line == 2

    def test_missing_file(self, tmp_path):
        """Test that a missing map raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_attribution_csv(tmp_path / "none.csv")
