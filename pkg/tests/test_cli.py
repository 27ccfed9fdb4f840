# -*- coding: utf-8 -*-
"""
Tests for the command line (main.py and cli/commands.py)

Runs each command end to end on small configurations and checks outputs,
manifests, reruns and exit codes.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from pgig.cli.heatmap import read_ppm
from pgig.core.network import save_network
from pgig.main import build_parser, main
from pgig.utils.config import ENV_OUT_DIR

SMALL_RUN = """\
[task]
train_size = 40
val_size = 20
test_size = 8

[train]
hidden_sizes = 8
epochs = 2
batch_size = 8

[attribution]
steps = 3
samples = 2
baseline_draws = 3
"""


@pytest.fixture(autouse=True)
def workspace(tmp_path, monkeypatch):
    """Run every test inside its own directory."""
    monkeypatch.delenv(ENV_OUT_DIR, raising=False)
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def small_ini(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL_RUN, encoding="utf-8")
    return path


@pytest.fixture
def stress_file(tmp_path, stress_net):
    """Stress network saved without patterns, plus a one-row input CSV."""
    network = save_network(stress_net, tmp_path / "stress.txt")
    point = tmp_path / "point.csv"
    point.write_text("x1,x2\n0.5,0.2\n", encoding="utf-8")
    return network, str(point)


def load_manifest(directory):
    return json.loads((Path(directory) / "manifest.json").read_text(encoding="utf-8"))


class TestParser:
    """Tests for argument parsing."""

    def test_commands(self):
        """Test that every command is a subcommand."""
        parser = build_parser()
        for command in ("stress", "train", "rerun"):
            argv = [command, "x"] if command == "rerun" else [command]
            assert parser.parse_args(argv).command == command

    def test_missing_command(self, capsys):
        """Test that argparse exits with the usage code."""
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2


class TestStressCommand:
    """Tests for 'pgig stress'."""

    def test_writes_outputs(self, workspace):
        """Test panel CSVs, report and manifest."""
        out = workspace / "stress"
        assert main(["stress", "--out", str(out)]) == 0
        assert len(list(out.glob("*.csv"))) == 11
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["passed"] is True

        manifest = load_manifest(out)
        assert manifest["command"] == "stress"
        assert manifest["seed"] == 0
        assert manifest["config"]["stress"]["noise_sigma"] == "0.25"
        assert "total" in manifest["timings"]
        assert manifest["host"]["cpu_count"] >= 1

    def test_default_out_dir(self, workspace):
        """Test that --out defaults to <out_dir>/<command>."""
        assert main(["stress"]) == 0
        assert (workspace / "results" / "stress" / "manifest.json").exists()

    def test_env_out_dir(self, workspace, monkeypatch):
        """Test that PGIG_OUT_DIR moves the default output directory."""
        monkeypatch.setenv(ENV_OUT_DIR, str(workspace / "elsewhere"))
        assert main(["stress"]) == 0
        assert (workspace / "elsewhere" / "stress" / "z.csv").exists()

    def test_seed_override_recorded(self, workspace):
        """Test that a --seed flag ends up in the manifest config."""
        out = workspace / "seeded"
        assert main(["stress", "--seed", "5", "--out", str(out)]) == 0
        manifest = load_manifest(out)
        assert manifest["seed"] == 5
        assert manifest["config"]["run"]["seed"] == "5"

    def test_corrupt_config(self, workspace, capsys):
        """Test that a malformed config file exits with 2 and names the line."""
        bad = workspace / "bad.ini"
        bad.write_text("[stress]\nnoise_sigma = loud\n", encoding="utf-8")
        assert main(["stress", "--config", str(bad)]) == 2
        assert f"{bad}:2" in capsys.readouterr().err

    def test_negative_seed(self):
        """Test that an out-of-range seed exits with 2."""
        assert main(["stress", "--seed", "-3"]) == 2


class TestRerun:
    """Tests for 'pgig rerun'."""

    def test_bit_exact(self, workspace):
        """Test that a rerun reproduces every CSV byte for byte."""
        first, second = workspace / "first", workspace / "second"
        assert main(["stress", "--seed", "11", "--out", str(first)]) == 0
        assert main(["rerun", str(first), "--out", str(second)]) == 0
        names = sorted(p.name for p in first.glob("*.csv"))
        assert names == sorted(p.name for p in second.glob("*.csv"))
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes()
        assert load_manifest(second)["seed"] == 11

    def test_render_bit_exact(self, workspace):
        """Test that a rerun reproduces a heatmap byte for byte."""
        map_file = workspace / "ramp.csv"
        map_file.write_text("index,value\n" + "".join(f"{i},{i - 4.5!r}\n" for i in range(9)),
                            encoding="utf-8")
        first, second = workspace / "first", workspace / "second"
        assert main(["render", str(map_file), "--out", str(first)]) == 0
        assert main(["rerun", str(first), "--out", str(second)]) == 0
        assert (first / "ramp.ppm").read_bytes() == (second / "ramp.ppm").read_bytes()

    def test_missing_manifest(self, workspace):
        """Test that rerunning nothing fails cleanly."""
        assert main(["rerun", str(workspace / "nowhere")]) == 3

    def test_broken_manifest(self, workspace):
        """Test that an invalid manifest is a configuration error."""
        path = workspace / "manifest.json"
        path.write_text("{\"command\": \"stress\"}\n", encoding="utf-8")
        assert main(["rerun", str(path)]) == 2


class TestExplainCommand:
    """Tests for 'pgig explain' on the stress model."""

    def test_gradient_method(self, workspace, stress_file):
        """Test a map CSV for a non-square input (no heatmap)."""
        network, point = stress_file
        out = workspace / "explain"
        code = main(["explain", "--network", network, "--input", point,
                     "--method", "integrated_gradients", "--out", str(out)])
        assert code == 0
        lines = (out / "integrated_gradients_attribution.csv").read_text().splitlines()
        assert lines[0] == "index,value"
        assert len(lines) == 3
        assert not list(out.glob("*.ppm"))

    def test_pattern_method_without_patterns(self, workspace, stress_file, capsys):
        """Test that pgig on a network without patterns exits with 3."""
        network, point = stress_file
        code = main(["explain", "--network", network, "--input", point,
                     "--method", "pgig", "--out", str(workspace / "explain")])
        assert code == 3
        assert "patterns" in capsys.readouterr().err

    def test_unknown_method(self, stress_file):
        """Test that an unknown method name exits with 2."""
        network, point = stress_file
        assert main(["explain", "--network", network, "--input", point,
                     "--method", "lime"]) == 2

    def test_missing_network(self, workspace, stress_file):
        """Test that a missing network file exits with 3."""
        _, point = stress_file
        assert main(["explain", "--network", str(workspace / "absent.txt"),
                     "--input", point]) == 3

    def test_no_input(self, stress_file):
        """Test that explain needs --input or --data with --index."""
        network, _ = stress_file
        assert main(["explain", "--network", network, "--method", "gradient_times_input"]) == 3


class TestRenderCommand:
    """Tests for 'pgig render'."""

    def test_zero_map_is_white(self, workspace):
        """Test that an all-zero map renders all white."""
        map_file = workspace / "zeros.csv"
        map_file.write_text("index,value\n" + "".join(f"{i},0.0\n" for i in range(16)),
                            encoding="utf-8")
        out = workspace / "render" / "zeros.ppm"
        assert main(["render", str(map_file), "--out", str(out), "--scale", "2"]) == 0
        pixels = read_ppm(out)
        assert pixels.shape == (8, 8, 3)
        assert np.all(pixels == 255)
        assert (workspace / "render" / "manifest.json").exists()

    def test_non_square_map(self, workspace):
        """Test that a map of non-square length exits with 3."""
        map_file = workspace / "six.csv"
        map_file.write_text("index,value\n" + "".join(f"{i},1.0\n" for i in range(6)),
                            encoding="utf-8")
        assert main(["render", str(map_file)]) == 3

    def test_malformed_map(self, workspace):
        """Test that a broken map CSV exits with 2."""
        map_file = workspace / "broken.csv"
        map_file.write_text("index,value\n0,zero\n", encoding="utf-8")
        assert main(["render", str(map_file)]) == 2


@pytest.mark.slow
class TestPipeline:
    """Tests for train -> patterns -> explain -> degrade on a small task."""

    def test_full_pipeline(self, workspace, small_ini):
        """Test each stage consuming the previous stage's outputs."""
        config = ["--config", str(small_ini)]
        trained = workspace / "trained"
        assert main(["train", *config, "--out", str(trained)]) == 0
        assert (trained / "network.txt").exists()
        assert sorted(p.name for p in (trained / "data").glob("*.csv")) == \
            ["test.csv", "train.csv", "val.csv"]
        history = (trained / "history.csv").read_text().splitlines()
        assert history[0] == "epoch,loss,val_accuracy"
        assert len(history) == 3

        fitted = workspace / "fitted"
        assert main(["patterns", *config, "--network", str(trained / "network.txt"),
                     "--data", str(trained / "data"), "--out", str(fitted)]) == 0
        report = json.loads((fitted / "patterns.json").read_text(encoding="utf-8"))
        assert report["examples"] == 40
        assert report["scope"] == "positive"

        network = str(fitted / "network_patterns.txt")
        explained = workspace / "explained"
        assert main(["explain", *config, "--network", network, "--data",
                     str(trained / "data"), "--index", "0", "--out", str(explained)]) == 0
        assert read_ppm(explained / "pgig_attribution.ppm").shape == (16, 16, 3)

        degraded = workspace / "degraded"
        assert main(["degrade", *config, "--network", network, "--data",
                     str(trained / "data"), "--method", "pgig,random_baseline",
                     "--limit", "4", "--out", str(degraded)]) == 0
        auc = (degraded / "auc.csv").read_text().splitlines()
        assert auc[0] == "method,auc"
        assert [row.split(",")[0] for row in auc[1:]] == ["pgig", "random_baseline"]
        curves = (degraded / "degradation.csv").read_text().splitlines()
        assert len(curves) == 18
        assert load_manifest(degraded)["config"]["degradation"]["methods"] == \
            "pgig,random_baseline"
