import json

import pytest
import yaml

from config import settings
from src.experiments.runner import (CHECKPOINT_FILE, HISTORY_FILE, REPORT_JSON, REPORT_TEXT,
                                    RESOLVED_CONFIG)
from src.main import EXIT_CHECK_FAILED, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main


@pytest.fixture(autouse=True)
def quiet_logs(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "LOG_DIR", tmp_path / "logs")


def _run(*args):
    return main(["--no-banner", "--log-level", "WARNING", *args])


class TestTrain:
    def test_writes_run_outputs_with_overrides(self, tiny_config_file, tmp_path):
        code = _run("train", "--config", str(tiny_config_file), "--set", "loss.alpha=1.2",
                    "--set", "loss.kernel=sigmoid")
        assert code == EXIT_OK
        run_dir = tmp_path / "runs" / "tiny"
        for name in (RESOLVED_CONFIG, HISTORY_FILE, CHECKPOINT_FILE, REPORT_JSON, REPORT_TEXT):
            assert (run_dir / name).exists(), name
        resolved = yaml.safe_load((run_dir / RESOLVED_CONFIG).read_text(encoding="utf-8"))
        assert resolved["loss"]["alpha"] == 1.2
        assert resolved["loss"]["kernel"] == "sigmoid"
        report = json.loads((run_dir / REPORT_JSON).read_text(encoding="utf-8"))
        assert set(report["recall"]) == {"5", "10", "20"}

    def test_same_seed_same_bytes(self, tiny_config_file, tmp_path):
        for name in ("a", "b"):
            assert _run("train", "--config", str(tiny_config_file), "--seed", "3",
                        "--output-dir", str(tmp_path / name)) == EXIT_OK
        for name in (HISTORY_FILE, REPORT_JSON, REPORT_TEXT):
            assert (tmp_path / "a" / "tiny" / name).read_bytes() == (tmp_path / "b" / "tiny" / name).read_bytes()

    def test_missing_dataset_creates_nothing(self, tiny_config_file, tmp_path):
        code = _run("train", "--config", str(tiny_config_file), "--set", f"data.path={tmp_path / 'none.tsv'}")
        assert code == EXIT_RUNTIME
        assert not (tmp_path / "runs").exists()


class TestEval:
    def test_checkpoint_reproduces_test_report(self, tiny_config_file, tmp_path, capsys):
        assert _run("train", "--config", str(tiny_config_file)) == EXIT_OK
        run_dir = tmp_path / "runs" / "tiny"
        capsys.readouterr()
        code = _run("eval", "--config", str(tiny_config_file), "--checkpoint", str(run_dir / CHECKPOINT_FILE))
        assert code == EXIT_OK
        printed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        saved = json.loads((run_dir / REPORT_JSON).read_text(encoding="utf-8"))
        assert printed["recall"] == saved["recall"]

    def test_catalog_mismatch(self, tiny_config_file, tmp_path):
        from src.model.checkpoint import save_checkpoint
        from src.model.two_tower import TwoTowerModel

        path = save_checkpoint(TwoTowerModel(3, 2, 2, 2), tmp_path / "small.npz")
        assert _run("eval", "--config", str(tiny_config_file), "--checkpoint", str(path)) == EXIT_RUNTIME


class TestOtherCommands:
    def test_gradcheck_quick(self, capsys):
        assert _run("gradcheck", "--quick") == EXIT_OK
        assert "controlli superati" in capsys.readouterr().out

    def test_inspect_data_export(self, tiny_config_file, tiny_log, tmp_path, capsys):
        export = tmp_path / "exported.tsv"
        assert _run("inspect-data", "--config", str(tiny_config_file), "--export", str(export)) == EXIT_OK
        out = capsys.readouterr().out
        assert str(tiny_log.num_users) in out
        lines = export.read_text(encoding="utf-8").splitlines()
        assert len(lines) == len(tiny_log.events) + 1

    def test_sweep_with_failed_cell(self, tiny_config_file, monkeypatch):
        import src.experiments.sweep as sweep

        real = sweep.run_experiment

        def flaky(cfg, dataset, run_dir=None, progress=True):
            if cfg.loss.kernel == "softplus":
                raise FloatingPointError("boom")
            return real(cfg, dataset, run_dir, progress)

        monkeypatch.setattr(sweep, "run_experiment", flaky)
        code = _run("sweep", "--config", str(tiny_config_file), "--grid", "kernels=sigmoid,softplus;alphas=1.0")
        assert code == EXIT_CHECK_FAILED


class TestUsage:
    @pytest.mark.parametrize("argv", [[], ["fly"], ["train", "--bogus"], ["eval"],
                                      ["train", "--set", "loss.nope=1"]])
    def test_usage_errors(self, argv):
        assert _run(*argv) == EXIT_USAGE

    def test_unknown_preset(self, tiny_config_file):
        assert _run("sweep", "--config", str(tiny_config_file), "--preset", "nessuno") == EXIT_USAGE
