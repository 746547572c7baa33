import json
import math

import numpy as np
import pytest

from faultiso.cli import (
    EXIT_CONFIG,
    EXIT_DEGENERATE,
    EXIT_OK,
    EXIT_SYNTHESIS,
    ConfigError,
    load_config,
    main,
    parse_config,
    run_pipeline,
)


def write_cfg(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


BASE = {"stabilized_signs": True, "scenario": {"length": 1300}}


def test_empty_config_is_baseline():
    cfg = parse_config({})
    assert cfg.model == "builtin-bicycle"
    assert cfg.d_N == 3
    assert cfg.a_poles == (-0.85, -0.59, -0.58)
    assert cfg.horizon_n == 10
    assert cfg.prefilter == "dynamic"
    assert cfg.scenario.length == 2000
    assert cfg.scenario.amplitude == pytest.approx(2.3e-3)
    assert cfg.scenario.freq_hz == pytest.approx(0.3)
    assert cfg.scenario.fault_multiplicative[0] == (0, "ramp", -0.0005)
    assert cfg.E == {"component": 3}
    assert cfg.stabilized_signs is True


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        parse_config({"horizon_n": 1})
    with pytest.raises(ConfigError):
        parse_config({"a_poles": [0.5, 0.5]})
    with pytest.raises(ConfigError):
        parse_config({"a_poles": [1.2]})
    with pytest.raises(ConfigError):
        parse_config({"prefilter": "off"})
    with pytest.raises(ConfigError):
        parse_config({"nonsense": 1})
    with pytest.raises(ConfigError):
        parse_config({"E": {"component": 3, "coefficients": [1, 0, 0, 0]}})
    with pytest.raises(ConfigError):
        parse_config({"model": "builtin-unicycle"})


def test_scenario_must_cover_breakpoints():
    with pytest.raises(ConfigError):
        parse_config({"scenario": {"length": 100}})  # baseline faults reach 1250


def test_bad_config_file_exit_code(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["simulate", "--config", str(path)]) == EXIT_CONFIG


def test_synth_writes_files(tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    out = tmp_path / "synth"
    assert main(["synth", "--config", cfg, "--out", str(out)]) == EXIT_OK
    coeffs = (out / "filter_coefficients.txt").read_text()
    assert coeffs.startswith("# fault-iso filter coefficients v1")
    report = (out / "synth_report.txt").read_text()
    assert "T(1) = 1.000000000000" in report
    assert "nullspace dimension" in report


def test_synth_insufficient_degree_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, {**BASE, "d_N": 0, "a_poles": [-0.85]})
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "x")]) == EXIT_SYNTHESIS


def test_synth_undetectable_model_exit_code(tmp_path):
    # fault column identically zero: no filter can sense it
    model = {
        "A": [[0.5]],
        "B_u": [[1.0]],
        "B_f": [[0.0]],
        "C": [[1.0]],
    }
    model_path = tmp_path / "deaf.json"
    model_path.write_text(json.dumps(model), encoding="utf-8")
    cfg = write_cfg(
        tmp_path,
        {
            "model": {"file": str(model_path)},
            "d_N": 1,
            "a_poles": [0.5, -0.3],
            "E": {"component": 1},
        },
    )
    assert main(["synth", "--config", cfg, "--out", str(tmp_path / "y")]) == EXIT_SYNTHESIS


def test_simulate_trace_schema_and_reproducibility(tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(out1)]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out", str(out2)]) == EXIT_OK
    t1 = (out1 / "trace.csv").read_bytes()
    t2 = (out2 / "trace.csv").read_bytes()
    assert t1 == t2
    lines = t1.decode().splitlines()
    assert lines[0] == "# schema: fault-iso.trace.v1"
    header = lines[1].split(",")
    assert header == [
        "k", "t_s", "u", "y0", "y1", "y2", "r", "e", "f_a", "f_m",
        "f_a_hat", "f_m_hat", "err_2norm", "bound_rhs", "degenerate", "warmup",
    ]
    assert len(lines) == 2 + 1300


def test_simulate_estimates_converge(tmp_path):
    cfg = parse_config({**BASE, "scenario": {"length": 2000}})
    result = run_pipeline(cfg)
    assert result.trace.f_a_hat[-1] == pytest.approx(0.1 * math.pi / 180, rel=1e-3)
    assert result.trace.f_m_hat[-1] == pytest.approx(-0.2, rel=1e-3)
    assert len(result.bound.violations()) == 0


def test_simulate_static_prefilter_fluctuates(tmp_path):
    cfg = parse_config({**BASE, "prefilter": "static", "scenario": {"length": 2000}})
    result = run_pipeline(cfg)
    tail = slice(1500, 2000)
    err_m = np.abs(result.trace.f_m_hat[tail] + 0.2)
    assert np.max(err_m) > 1e-4  # persistent oscillation


def test_simulate_zero_fault_estimates(tmp_path):
    cfg_dict = {
        **BASE,
        "scenario": {"length": 800, "fault_additive": [], "fault_multiplicative": []},
    }
    result = run_pipeline(parse_config(cfg_dict))
    sel = ~result.trace.warmup
    assert np.max(np.abs(result.trace.f_a_hat[sel])) < 1e-9
    assert np.max(np.abs(result.trace.f_m_hat[sel])) < 1e-9


def test_degenerate_abort_exit_code(tmp_path):
    cfg = write_cfg(
        tmp_path,
        {
            **BASE,
            "degenerate_policy": "emit-error",
            "scenario": {
                "length": 100,
                "input": {"amplitude": 0.0},
                "fault_additive": [],
                "fault_multiplicative": [],
            },
        },
    )
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "d")]) == EXIT_DEGENERATE


def test_sweep_single_point_matches_simulate(tmp_path):
    payload = {
        **BASE,
        "scenario": {
            "length": 900,
            "fault_additive": [[0, "const", 0.0], [200, "const", 1e-3]],
            "fault_multiplicative": [[0, "ramp", -5e-4], [400, "const", -0.2]],
        },
        "sweep": {"points": [[10, 0.85]]},
    }
    cfg = write_cfg(tmp_path, payload)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    sweep_trace = (out / "run_n10_p0.85_dynamic.csv").read_text()
    sim_out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--out", str(sim_out)]) == EXIT_OK
    assert sweep_trace == (sim_out / "trace.csv").read_text()
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "# schema: fault-iso.sweep-summary.v1"
    assert summary[1].startswith("run,n,p,prefilter,")
    assert len(summary) == 2 + 2  # one point, both pre-filter variants


def test_external_model_roundtrip(tmp_path):
    model = {
        "A": [[0.5]],
        "B_u": [[1.0]],
        "B_f": [[1.0]],
        "C": [[1.0]],
    }
    model_path = tmp_path / "toy.json"
    model_path.write_text(json.dumps(model), encoding="utf-8")
    payload = {
        "model": {"file": str(model_path)},
        "d_N": 1,
        "a_poles": [0.5, -0.3],
        "E": {"component": 1},
        "scenario": {
            "length": 700,
            "input": {"amplitude": 0.8, "freq_hz": 2.0},
            "fault_additive": [[0, "const", 0.0], [100, "const", 0.4]],
            "fault_multiplicative": [[0, "const", 0.0], [100, "const", -0.25]],
        },
    }
    result = run_pipeline(parse_config(payload))
    assert result.trace.f_a_hat[-1] == pytest.approx(0.4, abs=1e-6)
    assert result.trace.f_m_hat[-1] == pytest.approx(-0.25, abs=1e-6)


def test_external_model_feedthrough_guard(tmp_path):
    model = {
        "A": [[0.5]],
        "B_u": [[1.0]],
        "B_f": [[1.0]],
        "C": [[1.0]],
        "D_f": [[1.0]],
    }
    model_path = tmp_path / "bad.json"
    model_path.write_text(json.dumps(model), encoding="utf-8")
    payload = {"model": {"file": str(model_path)}, "E": {"component": 0}}
    with pytest.raises(ConfigError):
        from faultiso.cli import build_model

        build_model(parse_config(payload))


def test_load_config_defaults_when_missing():
    cfg = load_config(None)
    assert cfg.horizon_n == 10


def test_seed_argument_accepted(tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    out = tmp_path / "seeded"
    assert main(["synth", "--config", cfg, "--out", str(out), "--seed", "7"]) == EXIT_OK


def test_sweep_records_per_point_failures(tmp_path):
    # second grid point collides with a baseline root: recorded, sweep continues
    payload = {
        **BASE,
        "scenario": {
            "length": 700,
            "fault_additive": [],
            "fault_multiplicative": [[0, "ramp", -5e-4], [400, "const", -0.2]],
        },
        "sweep": {"points": [[10, 0.85], [10, 0.59]]},
    }
    cfg = write_cfg(tmp_path, payload)
    out = tmp_path / "sweep_fail"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    summary = (out / "summary.csv").read_text()
    assert "run_n10_p0.85_dynamic.csv" in summary
    assert "# failed: n=10 p=0.59" in summary


def test_log_level_from_environment(monkeypatch):
    import logging

    from faultiso import cli as cli_mod

    monkeypatch.setenv("FAULT_ISO_LOG", "DEBUG")
    root = logging.getLogger()
    old_level = root.level
    old_handlers = root.handlers[:]
    try:
        root.handlers = []
        cli_mod._setup_logging()
        assert root.level == logging.DEBUG
    finally:
        root.handlers = old_handlers
        root.setLevel(old_level)
