import pytest

from celltype_ot.config import Settings, settings
from celltype_ot.errors import ConfigurationError
from celltype_ot.infra import log_utils
from celltype_ot.run_config import RunConfig


def test_environment_overrides_defaults(monkeypatch):
    monkeypatch.setenv("UOT_LAMBDA", "10")
    monkeypatch.setenv("peak_window", "4")
    overridden = Settings()
    assert overridden.UOT_LAMBDA == 10.0
    assert overridden.PEAK_WINDOW == 4
    assert Settings().SMOOTHING_DELTA == 1e-6


def test_paths_follow_project_root(tmp_path):
    assert settings.output_dir == tmp_path / "output"
    assert settings.log_path == tmp_path / "output" / "logs" / "celltype_ot.log"


def test_log_message_appends_to_sidecar_log():
    log_utils.log_message("[test] hello", "WARN")
    log_utils.log_message("[test] hidden detail", "DEBUG")
    text = settings.log_path.read_text(encoding="utf-8")
    assert "[WARNING] [test] hello" in text
    assert "[DEBUG] [test] hidden detail" in text


def test_run_config_fills_settings_defaults():
    run = RunConfig.build(command="analyze", input="cells.csv", epsilon=None)
    assert run.lambda_ == settings.UOT_LAMBDA
    assert run.solver_config().max_iters == settings.SOLVER_MAX_ITERS
    assert run.sim_config().reducer == "principal_axes"


def test_run_config_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        RunConfig.build(command="analyze", window=0)
    with pytest.raises(ConfigurationError):
        RunConfig.build(command="unknown")
    with pytest.raises(ConfigurationError):
        RunConfig.build(command="simulate", t=10, changes=(12,)).sim_config()
