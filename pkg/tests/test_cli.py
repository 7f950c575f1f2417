import io
import json
import subprocess
import sys

import pytest

from obsgram import __version__
from obsgram.cli import ConfigError, main, parse_config, run

OSC = {"command": "gramian", "system": {"name": "oscillator"}, "x0": [0, 0], "t1": 10}


def csv_body(text):
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def test_defaults_filled():
    cfg = parse_config(json.dumps(OSC))
    assert (cfg.dt, cfg.eps, cfg.seed, cfg.samples) == (1e-3, 1e-2, 0, 500)
    assert cfg.format == "json"


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"command": "sweep", "system": {"name": "noise_affine", "params": {"q": 0.1}}, "x0": [0, 1], "t1": 1}, "sweep.param"),
        ({**OSC, "system": {"name": "pendulum"}}, "system.name"),
        ({**OSC, "eps": -1}, "eps"),
        ({**OSC, "t1": 0}, "t1"),
        ({**OSC, "dt": 0.3}, "dt"),
        ({k: v for k, v in OSC.items() if k != "x0"}, "x0"),
        ({**OSC, "x0": [0, 0, 0]}, "x0"),
        ({**OSC, "sweep": {"param": "q", "values": [1]}}, "sweep"),
        ({**OSC, "colour": "red"}, "colour"),
        ({**OSC, "format": "xml"}, "format"),
        ({**OSC, "command": "stochtest"}, "system.name"),
        ({"command": "ensemble", "system": {"name": "noise_affine"}, "x0": [0, 1], "t1": 1}, "system.params"),
    ],
)
def test_validation_names_field(doc, path):
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps(doc))
    assert info.value.path == path
    assert path in str(info.value)


def test_fixed_q_ensemble_config():
    doc = {"command": "ensemble", "system": {"name": "noise_affine", "params": {"q": 0.1}},
           "samples": 500, "seed": 42, "x0": [0, 1], "t1": 10, "eps": 0.1}
    cfg = parse_config(json.dumps(doc))
    assert cfg.samples == 500 and cfg.seed == 42 and cfg.format == "csv"


def test_gramian_json_fields_and_roundtrip():
    cfg = parse_config(json.dumps(OSC))
    out = io.StringIO()
    assert run(cfg, stdout=out) == 0
    doc = json.loads(out.getvalue())
    res = doc["result"]
    assert set(res) >= {"W", "eigenvalues", "sigma_min", "nu", "kappa"}
    assert len(res["W"]) == 2 and len(res["W"][0]) == 2
    assert doc["metadata"]["version"] == __version__
    assert parse_config(json.dumps(doc["metadata"]["config"])) == cfg


def test_ensemble_csv_schema_and_determinism(tmp_path):
    doc = {"command": "ensemble", "system": {"name": "noise_affine", "params": {"q": 0.1}},
           "x0": [0, 1], "t1": 1, "dt": 0.01, "eps": 0.1, "samples": 8, "seed": 2}
    cfg = parse_config(json.dumps(doc))
    a, b = io.StringIO(), io.StringIO()
    run(cfg, stdout=a)
    run(cfg, stdout=b)
    assert csv_body(a.getvalue()) == csv_body(b.getvalue())
    lines = a.getvalue().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    assert any("version" in ln for ln in meta) and any(ln.startswith("# config:") for ln in meta)
    body = csv_body(a.getvalue()).splitlines()
    assert body[0] == "sample_index,lambda_min,lambda_max,nu,kappa"
    assert len(body) == 9
    # shortest round-trip floats
    for field in body[1].split(",")[1:]:
        assert repr(float(field)) == field


def test_sweep_csv_schema():
    doc = {"command": "sweep", "system": {"name": "noise_affine", "params": {"q": 0.1}},
           "x0": [0, 1], "t1": 1, "dt": 0.01, "eps": 0.1, "samples": 5,
           "sweep": {"param": "q", "values": [0.05, 0.1]}}
    out = io.StringIO()
    assert run(parse_config(json.dumps(doc)), stdout=out) == 0
    body = csv_body(out.getvalue()).splitlines()
    assert body[0] == "param_value,metric,median,q25,q75,p5,p95,mean,n_degenerate"
    assert len(body) == 1 + 2 * 3


@pytest.mark.parametrize(
    "doc",
    [
        {"command": "bound", "system": {"name": "unicycle_det"}, "x0": [0, 0, 0, 0], "t1": 1, "dt": 0.01},
        {"command": "expected", "system": {"name": "ou_linear", "params": {"A": [[-1.0]], "C": [[1.0]], "Omega": [[0.3]]}}, "t1": 1},
        {"command": "stochtest", "system": {"name": "bs_linear", "params": {"A": [[-1.0]], "C": [[1.0]], "Omega_list": [[[0.3]]]}}, "t1": 1},
        {"command": "decompose", "system": {"name": "noise_affine", "params": {"q": 0.1}}, "x0": [0, 1], "t1": 1, "dt": 0.01, "samples": 4},
        {"command": "headings", "system": {"name": "unicycle_sde", "params": {"q": 0.1}}, "t1": 1, "dt": 0.01, "samples": 10},
    ],
    ids=lambda d: d["command"],
)
@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_every_command_runs(doc, fmt):
    out = io.StringIO()
    assert run(parse_config(json.dumps({**doc, "format": fmt})), stdout=out) == 0
    text = out.getvalue()
    if fmt == "json":
        assert json.loads(text)["metadata"]["config"]["command"] == doc["command"]
    else:
        assert text.startswith("# tool: obsgram")


def test_main_overrides_and_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(OSC))
    out = tmp_path / "out.json"
    assert main(["gramian", "--config", str(cfg), "--t1", "2", "--eps", "0.1", "--out", str(out)]) == 0
    rec = json.loads(out.read_text())["metadata"]["config"]
    assert rec["t1"] == 2.0 and rec["eps"] == 0.1 and rec["output"] == str(out)

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**OSC, "system": {"name": "nope"}}))
    assert main(["gramian", "--config", str(bad)]) == 1
    assert "system.name" in capsys.readouterr().err

    blow = tmp_path / "blow.json"
    blow.write_text(json.dumps({"command": "gramian", "system": {"name": "ou_linear",
                    "params": {"A": [[400.0]], "C": [[1.0]], "Omega": [[0.0]]}}, "x0": [1.0], "t1": 10}))
    assert main(["gramian", "--config", str(blow)]) == 2
    assert "numerical" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({**OSC, "t1": 1}))
    proc = subprocess.run([sys.executable, "-m", "obsgram.cli", "gramian", "--config", str(cfg)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "sigma_min" in proc.stdout


def test_demo_configs_parse():
    from pathlib import Path

    configs = sorted((Path(__file__).parent.parent / "demos" / "configs").glob("*.json"))
    assert configs
    for path in configs:
        parse_config(path.read_text())
