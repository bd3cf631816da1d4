import numpy as np
import pytest

from gpfl.cli import main
from gpfl.config import ExperimentConfig, save_config


def _write_config(tmp_path, **overrides):
    defaults = dict(duration=2.0, eval_seeds=(0,), controllers=("true",),
                    out_dir=str(tmp_path / "results"))
    defaults.update(overrides)
    path = tmp_path / "config.txt"
    save_config(ExperimentConfig(**defaults), path)
    return str(path)


class TestValidateCommand:
    def test_exit_zero_and_report(self, capsys):
        assert main(["validate"]) == 0
        out = capsys.readouterr().out
        assert "invariant suites passed" in out
        assert "FAIL" not in out

    def test_seed_flag_accepted(self):
        assert main(["validate", "--seed", "3"]) == 0


class TestRunCommand:
    def test_writes_trace(self, tmp_path, capsys):
        config = _write_config(tmp_path)
        assert main(["run", "--config", config, "--seed", "0",
                     "--controller", "true"]) == 0
        out = capsys.readouterr().out
        assert "rmse per joint" in out
        assert (tmp_path / "results" / "trace_true_0.csv").is_file()

    def test_out_flag_overrides_config(self, tmp_path):
        config = _write_config(tmp_path)
        override = tmp_path / "other"
        assert main(["run", "--config", config, "--controller", "true",
                     "--out", str(override)]) == 0
        assert (override / "trace_true_0.csv").is_file()

    def test_substeps_flag(self, tmp_path):
        config = _write_config(tmp_path)
        assert main(["run", "--config", config, "--controller", "true",
                     "--substeps", "3"]) == 0

    def test_unknown_controller_rejected_by_parser(self, tmp_path):
        config = _write_config(tmp_path)
        with pytest.raises(SystemExit) as exc:
            main(["run", "--config", config, "--controller", "pid"])
        assert exc.value.code == 2


class TestTrainCommand:
    def test_writes_dataset_model_and_config(self, tmp_path, capsys):
        config = _write_config(tmp_path, duration=5.0)
        assert main(["train", "--config", config]) == 0
        out_dir = tmp_path / "results"
        assert (out_dir / "gp_dataset.csv").is_file()
        assert (out_dir / "gp_model.txt").is_file()
        assert (out_dir / "config.txt").is_file()
        out = capsys.readouterr().out
        assert "trained GP on 10 samples" in out


class TestExperimentCommand:
    def test_full_sweep(self, tmp_path, capsys):
        config = _write_config(tmp_path, controllers=("true", "nominal"))
        assert main(["experiment", "--config", config]) == 0
        out = capsys.readouterr().out
        assert "controller" in out
        assert "true" in out and "nominal" in out
        out_dir = tmp_path / "results"
        assert (out_dir / "summary.csv").is_file()
        assert (out_dir / "summary.txt").is_file()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_failed_runs_flip_exit_code(self, tmp_path, capsys):
        config = _write_config(tmp_path, duration=1.0, kp=1e12,
                               initial_offset_q=0.01,
                               controllers=("nominal",))
        assert main(["experiment", "--config", config]) == 1
        assert "FAILED nominal seed 0" in capsys.readouterr().out


class TestBadInvocations:
    def test_missing_config_file(self, capsys):
        assert main(["run", "--config", "/does/not/exist.txt"]) == 1
        assert "bad config" in capsys.readouterr().err

    def test_invalid_config_contents(self, tmp_path, capsys):
        path = tmp_path / "config.txt"
        path.write_text("bogus_key = 1\n")
        assert main(["validate", "--config", str(path)]) == 1
        assert "bad config" in capsys.readouterr().err

    def test_no_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "gpfl", "validate"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "invariant suites passed" in proc.stdout
