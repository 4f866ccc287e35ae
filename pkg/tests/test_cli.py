import json
import logging
from pathlib import Path

import pytest

from tpng.cli.config import load_run_config
from tpng.cli.main import EXIT_ERROR, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_OK, main
from tpng.cli.render import diagram_svg, render
from tpng.cli.serialization import (
    dumps_diagram,
    dumps_layer,
    dumps_report,
    load_any,
    loads_diagram,
    loads_layer,
    loads_report,
)
from tpng.core.errors import ConfigError, SchemaMismatch
from tpng.experiments.suites import oracle_check
from tpng.logging_config import build_config
from tpng.model.schemas import Box

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SIM = ["--width", "10", "--height", "10", "--source-rate", "1", "--sink-rate", "2", "--t", "0.5"]


# --- configuration ----------------------------------------------------------

def test_flags_override_file_override_env(tmp_path):
    cfg_file = tmp_path / "run.toml"
    cfg_file.write_text('seed = 5\n[model]\nt = 0.3\nwidth = 20\n')
    env = {"TPNG_T": "0.2", "TPNG_HEIGHT": "7", "TPNG_SEED": "0x10"}

    cfg = load_run_config("simulate", {"model.t": 0.4}, str(cfg_file), environ=env)
    assert cfg.model.t == 0.4
    assert cfg.model.width == 20
    assert cfg.model.height == 7
    assert cfg.seed == 5

    cfg = load_run_config("simulate", {}, str(cfg_file), environ=env)
    assert cfg.model.t == 0.3

    cfg = load_run_config("simulate", {}, None, environ=env)
    assert cfg.model.t == 0.2
    assert cfg.seed == 16


def test_config_errors_name_the_offending_key(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('[model]\nt = 2.0\n')
    with pytest.raises(ConfigError) as exc:
        load_run_config("simulate", {}, str(bad), environ={})
    assert exc.value.path == "model.t"

    unknown = tmp_path / "unknown.toml"
    unknown.write_text('[model]\nbogus = 1\n')
    with pytest.raises(ConfigError) as exc:
        load_run_config("simulate", {}, str(unknown), environ={})
    assert exc.value.path == "model.bogus"


def test_config_file_problems(tmp_path):
    broken = tmp_path / "broken.toml"
    broken.write_text("[model\n")
    with pytest.raises(ConfigError, match="malformed"):
        load_run_config("simulate", {}, str(broken), environ={})
    with pytest.raises(ConfigError, match="cannot read"):
        load_run_config("simulate", {}, str(tmp_path / "missing.toml"), environ={})


def test_command_inputs_are_required():
    with pytest.raises(ConfigError):
        load_run_config("experiment", {}, None, environ={})
    with pytest.raises(ConfigError):
        load_run_config("experiment", {"experiment": "nope"}, None, environ={})
    with pytest.raises(ConfigError):
        load_run_config("render", {}, None, environ={})
    with pytest.raises(ConfigError):
        load_run_config("simulate", {"seed": "banana"}, None, environ={})



def test_unknown_experiment_params_are_rejected(tmp_path):
    cfg_file = tmp_path / "params.toml"
    cfg_file.write_text('experiment = "oracle"\n[params]\nqueries = 4\nbogus = 1\n')
    with pytest.raises(ConfigError) as exc:
        load_run_config("experiment", {}, str(cfg_file), environ={})
    assert exc.value.path == "params.bogus"

    with pytest.raises(ConfigError) as exc:
        load_run_config("oracle-check", {"params": {"radii": [1, 2]}}, None, environ={})
    assert exc.value.path == "params.radii"

    cfg = load_run_config("experiment", {"experiment": "oracle", "params": {"queries": 4}}, None, environ={})
    assert cfg.params == {"queries": 4}


@pytest.mark.parametrize("name, experiment", [
    ("lln.toml", "lln-height"),
    ("local-conv.toml", "local-conv"),
    ("blocking-chain.toml", "blocking-chain"),
    ("tail-bound.toml", "tail-bound"),
])
def test_shipped_configs_load(name, experiment):
    cfg = load_run_config("experiment", {"experiment": experiment}, str(CONFIGS / name), environ={})
    assert cfg.experiment == experiment
    assert cfg.params

# --- documents ----------------------------------------------------------------

def test_diagram_document_round_trip(reference_diagram):
    text = dumps_diagram(reference_diagram)
    again = loads_diagram(text)
    assert again == reference_diagram
    assert dumps_diagram(again) == text
    assert json.loads(text)["schema"] == "tpng-diagram/1"


def test_layer_document_round_trip(reference_layer):
    text = dumps_layer(reference_layer)
    loaded = loads_layer(text)
    assert loaded.base == reference_layer.base
    assert loaded.psi == reference_layer.psi
    assert [p.label for p in loaded.paths] == [-1, 0, 1, 2, 3]
    assert [s.sigma for s in loaded.swaps] == sorted(s.sigma for s in loaded.swaps)


def test_layer_digest_is_checked(reference_layer):
    payload = json.loads(dumps_layer(reference_layer))
    payload["base_digest"] = "0" * 64
    with pytest.raises(SchemaMismatch, match="digest"):
        loads_layer(json.dumps(payload))


def test_schema_tags_are_enforced(reference_diagram, reference_layer):
    with pytest.raises(SchemaMismatch):
        loads_diagram(dumps_layer(reference_layer))
    with pytest.raises(SchemaMismatch):
        loads_layer(dumps_diagram(reference_diagram))
    with pytest.raises(SchemaMismatch):
        loads_diagram("not json")
    payload = json.loads(dumps_diagram(reference_diagram))
    payload["exits_top"] = "many"
    with pytest.raises(SchemaMismatch):
        loads_diagram(json.dumps(payload))


def test_report_round_trip():
    report = oracle_check(replicas=2, queries=3, box=Box(width=4, height=4), seed=1)
    text = dumps_report(report)
    assert dumps_report(loads_report(text)) == text


def test_load_any_dispatches(tmp_path, reference_diagram, reference_layer):
    d_path, l_path, x_path = tmp_path / "d.json", tmp_path / "l.json", tmp_path / "x.json"
    d_path.write_text(dumps_diagram(reference_diagram))
    l_path.write_text(dumps_layer(reference_layer))
    x_path.write_text('{"schema": "other/1"}')
    assert load_any(d_path) == reference_diagram
    assert load_any(l_path).psi == reference_layer.psi
    with pytest.raises(SchemaMismatch):
        load_any(x_path)


# --- rendering ----------------------------------------------------------------

def test_svg_is_deterministic(tmp_path, reference_diagram):
    first = render(reference_diagram, tmp_path / "a.svg", title="fixture").read_text()
    second = render(reference_diagram, tmp_path / "b.svg", title="fixture").read_text()
    assert first == second
    assert "<svg" in first
    assert diagram_svg(reference_diagram) != first


def test_layer_svg(tmp_path, reference_layer):
    path = tmp_path / "layer.json"
    path.write_text(dumps_layer(reference_layer))
    out = render(load_any(path), tmp_path / "layer.svg")
    assert out.read_text().lstrip().startswith("<?xml")


# --- entry point ----------------------------------------------------------------

def test_simulate_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["simulate", *SIM, "--seed", "42", "--out", str(a)]) == EXIT_OK
    assert main(["simulate", *SIM, "--seed", "42", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    summary, _ = json.JSONDecoder().raw_decode(capsys.readouterr().out)
    assert summary["file"] == str(a)


def test_couple_then_render(tmp_path):
    layer = tmp_path / "layer.json"
    code = main(["couple", *SIM, "--psi-source-rate", "1.5", "--psi-sink-rate", "0", "--seed", "3", "--out", str(layer)])
    assert code == EXIT_OK
    assert loads_layer(layer.read_text()).base.box == Box(width=10, height=10)
    assert main(["render", str(layer)]) == EXIT_OK
    assert (tmp_path / "layer.svg").exists()


def test_couple_rejects_unordered_rates(tmp_path, capsys):
    code = main(["couple", *SIM, "--psi-source-rate", "0.5", "--out", str(tmp_path / "l.json")])
    assert code == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_triple_writes_trace(tmp_path):
    out = tmp_path / "triple.json"
    assert main(["triple", "--width", "10", "--height", "10", "--t", "0.5", "--seed", "2", "--out", str(out)]) == EXIT_OK
    summary = json.loads(out.read_text())
    assert summary["occupancy_problems"] == []
    assert (tmp_path / "triple.csv").exists()


def test_experiment_exit_codes(tmp_path):
    ok = main(["experiment", "oracle", "--replicas", "2", "--param", "queries=3",
               "--param", 'box={"width": 4, "height": 4}', "--out", str(tmp_path / "o.json")])
    assert ok == EXIT_OK
    assert (tmp_path / "o.csv").exists()

    inconclusive = main(["experiment", "local-conv", "--replicas", "10", "--param", "radii=[10, 15, 20]",
                         "--out", str(tmp_path / "lc.json")])
    assert inconclusive == EXIT_INCONCLUSIVE

    failed = main(["experiment", "lln-height", "--replicas", "3", "--param", "radii=[5, 10, 20]",
                   "--param", "tolerance=0", "--out", str(tmp_path / "lln.json")])
    assert failed == EXIT_FAIL
    report = loads_report((tmp_path / "lln.json").read_text())
    assert report.verdict == "fail"


def test_oracle_check_command(tmp_path):
    code = main(["oracle-check", "--width", "5", "--height", "5", "--replicas", "3", "--queries", "4",
                 "--out", str(tmp_path / "oracle.json")])
    assert code == EXIT_OK


def test_usage_errors_exit_one(tmp_path, capsys):
    assert main(["experiment", "no-such-thing"]) == EXIT_ERROR
    assert "config error" in capsys.readouterr().err

    bad = tmp_path / "bad.toml"
    bad.write_text("[model]\nt = 3\n")
    assert main(["simulate", "--config", str(bad)]) == EXIT_ERROR
    assert "model.t" in capsys.readouterr().err

    assert main(["render", str(tmp_path / "missing.json")]) == EXIT_ERROR

    assert main(["experiment", "oracle", "--replicas", "1", "--param", "bogus=1"]) == EXIT_ERROR
    assert "params.bogus" in capsys.readouterr().err


def test_logging_config_attaches_to_package_logger():
    cfg = build_config("DEBUG", json_lines=True)
    assert cfg["handlers"]["stderr"]["formatter"] == "jsonl"
    assert cfg["loggers"]["tpng"]["level"] == "DEBUG"
    assert "" not in cfg["loggers"]
    assert build_config("INFO", json_lines=False)["handlers"]["stderr"]["formatter"] == "plain"


def test_simulate_logs_the_derived_streams(tmp_path, monkeypatch, caplog):
    monkeypatch.setattr("tpng.cli.main.setup_logging", lambda: None)
    monkeypatch.setattr(logging.getLogger("tpng"), "propagate", True)
    with caplog.at_level(logging.DEBUG, logger="tpng"):
        assert main(["simulate", *SIM, "--seed", "7", "--out", str(tmp_path / "d.json")]) == EXIT_OK
    derived = [json.loads(r.getMessage()) for r in caplog.records if "streams_derived" in r.getMessage()]
    assert derived and derived[0]["context"] == "simulate"
