import csv
import dataclasses
import io
import json
import xml.etree.ElementTree as ET

import pytest

from kahlerlab import cli, curvature
from kahlerlab.errors import ConfigError
from kahlerlab.report import AnalysisReport, build_report, config_hash, load_config, normalize_config


def _write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    return str(path)


def _error(capsys):
    out = capsys.readouterr().out.strip().splitlines()[-1]
    return json.loads(out)["error"]


# -- analyze ----------------------------------------------------------------------------------
def test_analyze_family3(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, {"profile": {"kind": "family3", "params": {"alpha": 2}}, "n": 2, "oracle": False,
                                "weights": [{"kind": "TheoremB", "p": 1}]})
    out = tmp_path / "out"
    assert cli.main(["analyze", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["diameter"]["class"] == "Convergent"
    assert rep["condition_k"]["class"] == "Convergent"
    assert rep["dini"]["class"] == "Divergent"
    assert rep["orlicz"][0]["class"] == "Convergent"
    assert set(rep) == {f.name for f in dataclasses.fields(AnalysisReport)}
    assert (out / "curves" / "ricci.csv").exists() and (out / "curves" / "modulus.csv").exists()
    capsys.readouterr()


def test_analyze_family1_bounded(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, {"profile": {"kind": "family1", "params": {"alpha": 0.5}}, "n": 2})
    assert cli.main(["analyze", "--config", cfg]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["ricci"]["bound"]["label"] == "UniformlyBounded(0)"
    assert rep["oracle"]["points"] > 0
    assert rep["oracle"]["metric_max_rel_err"] < 1e-5
    assert rep["oracle"]["ricci_max_rel_err"] < 1e-3


def test_analyze_markdown(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, {"profile": {"kind": "family2", "params": {"alpha": 3}}, "oracle": False})
    assert cli.main(["analyze", "--config", cfg, "--format", "md"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# family2 (alpha = 3)")
    assert "| Dini transform | Convergent |" in text


@pytest.mark.parametrize("text", ["{not json", "[]", "{}", '{"profile": {"kind": "family9", "params": {"alpha": 1}}}',
                                  '{"profile": {"kind": "family1", "params": {"alpha": 1}}, "tol": 1}',
                                  '{"profile": {"kind": "family1", "params": {"alpha": 1}}, "colour": 1}',
                                  '{"profile": {"expr": "exp(a*", "params": {"a": 1}}}'])
def test_malformed_config(tmp_path, capsys, text):
    cfg = _write_cfg(tmp_path, text)
    assert cli.main(["analyze", "--config", cfg]) == 2
    assert _error(capsys)["type"] == "ConfigError"


def test_missing_config(tmp_path, capsys):
    assert cli.main(["analyze", "--config", str(tmp_path / "nope.json")]) == 2
    assert "cannot read" in _error(capsys)["message"]


def test_usage_errors(capsys):
    assert cli.main(["frobnicate"]) == 2
    assert _error(capsys)["type"] == "UsageError"
    assert cli.main(["sweep", "--config", "x.json", "--threads", "0"]) == 2


# -- report object -------------------------------------------------------------------------------
def test_report_round_trip():
    cfg = normalize_config({"profile": {"kind": "family2", "params": {"alpha": 1.5}}, "n": 2, "oracle": False,
                            "weights": [{"kind": "LogPower", "eps": 0.5}]})
    rep = build_report(cfg)
    back = AnalysisReport.from_json(rep.to_json())
    assert back == AnalysisReport.from_dict(json.loads(rep.to_json()))
    assert back.to_json() == rep.to_json()


def test_config_hash_semantics(tmp_path):
    a = {"profile": {"kind": "family3", "params": {"alpha": 2}}, "n": 2}
    b = {"n": 2, "tol": 1e-8, "profile": {"params": {"alpha": 2.0}, "kind": "family3"}, "C_list": [1000, 0, 1, 10, 100]}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "n": 3})
    assert config_hash(a) != config_hash({**a, "profile": {"kind": "family3", "params": {"alpha": 2.5}}})
    toml = _write_cfg(tmp_path, 'n = 2\n[profile]\nkind = "family3"\nparams = {alpha = 2}\n', "cfg.toml")
    assert config_hash(load_config(toml)) == config_hash(a)


def test_empty_sweep_grid():
    with pytest.raises(ConfigError):
        normalize_config({"profile": {"kind": "family3", "params": {"alpha": 2}}, "sweep": {"values": []}})


# -- reproduce ------------------------------------------------------------------------------------
def test_reproduce_all_rows_pass(tmp_path, capsys):
    assert cli.main(["reproduce", "--out", str(tmp_path), "--format", "json"]) == 0
    table = json.loads((tmp_path / "reproduce.json").read_text())
    assert table["all_pass"] and len(table["rows"]) == 10
    md = (tmp_path / "reproduce.md").read_text()
    assert md.count("| PASS |") == 10
    capsys.readouterr()


# -- sweep ------------------------------------------------------------------------------------------
def test_sweep_family3_diameter_single_flip(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, {"profile": {"kind": "family3", "params": {"alpha": 1}},
                                "sweep": {"param": "alpha", "linspace": [0.5, 3, 26], "quantity": "diameter"}})
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "sweep.csv").read_text())))
    assert list(rows[0]) == ["param", "class", "value", "error_estimate", "diagnostics_ref"]
    classes = [r["class"] for r in rows]
    flips = [i for i in range(1, len(classes)) if classes[i] != classes[i - 1]]
    assert len(flips) == 1
    assert float(rows[flips[0] - 1]["param"]) <= 1.0 < float(rows[flips[0]]["param"])
    assert classes[0] == "Divergent" and classes[-1] == "Convergent"
    diag = json.loads((tmp_path / "sweep_diagnostics.json").read_text())
    assert [d["index"] for d in diag] == list(range(26))
    capsys.readouterr()


def test_sweep_mu_min_decreasing():
    cfg = normalize_config({"profile": {"kind": "family4", "params": {"alpha": 1}}, "n": 1,
                            "sweep": {"param": "eps", "pow2": [4, 20], "quantity": "mu_min"}})
    text, _ = cli.run_sweep(cfg)
    vals = [float(r["value"]) for r in csv.DictReader(io.StringIO(text))]
    assert len(vals) == 17
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_sweep_threads_identical():
    cfg = normalize_config({"profile": {"kind": "family3", "params": {"alpha": 1}},
                            "sweep": {"param": "alpha", "linspace": [0.5, 3, 12], "quantity": "condition_k"}})
    assert cli.run_sweep(cfg, 1) == cli.run_sweep(cfg, 3)


# -- verify --------------------------------------------------------------------------------------------
def test_verify_fast_passes(tmp_path, capsys):
    assert cli.main(["verify", "--level", "fast", "--out", str(tmp_path)]) == 0
    root = ET.parse(tmp_path / "verify-junit.xml").getroot()
    assert root.tag == "testsuites" and root.get("failures") == "0"
    suites = {s.get("name") for s in root}
    assert {"profile", "quadrature", "geometry", "curvature", "integrability", "oracle", "cli"} <= suites
    assert "FAIL" not in capsys.readouterr().out


def test_verify_catches_mu_mutation(tmp_path, capsys, monkeypatch):
    original = curvature._ricci_from

    def corrupted(*args):
        p = original(*args)
        return dataclasses.replace(p, mu=p.mu * 1.01)

    monkeypatch.setattr(curvature, "_ricci_from", corrupted)
    assert cli.main(["verify", "--level", "fast", "--out", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "FAIL curvature." in out
    root = ET.parse(tmp_path / "verify-junit.xml").getroot()
    failed = {f"{tc.get('classname')}.{tc.get('name')}" for tc in root.iter("testcase") if tc.find("failure") is not None}
    assert failed and all(name.split(".")[0] in ("curvature", "cli") for name in failed)
    assert all(name in out for name in failed)
