import json

import numpy as np
import pytest

from bergmod import cli, modforms
from bergmod.errors import ConfigError


def test_default_config_valid():
    config = cli.load_config(None, {})
    assert config["level"] == 6


def test_config_rejects_unknown_keys(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"bogus": 1}')
    with pytest.raises(ConfigError):
        cli.load_config(p)


def test_config_rejects_out_of_range(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"level": 99}')
    with pytest.raises(ConfigError):
        cli.load_config(p)
    p.write_text('{"ladder": [80, 40]}')
    with pytest.raises(ConfigError):
        cli.load_config(p)
    p.write_text('{"weights": [11]}')
    with pytest.raises(ConfigError):
        cli.load_config(p)


def test_config_rejects_malformed_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        cli.load_config(p)


def test_malformed_config_exits_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    code = cli.main(["poincare", "--config", str(p)])
    assert code == 2
    assert capsys.readouterr().out == ""  # no partial outputs


def test_unknown_command_rejected():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["frobnicate"])


def test_poincare_command_runs(tmp_path, capsys):
    code = cli.main(["poincare", "--out", str(tmp_path), "--seed", "7"])
    out = capsys.readouterr().out
    assert code == 0
    assert "overall: pass" in out
    report = json.loads((tmp_path / "report_poincare.json").read_text())
    assert report["format"] == "report_v1"
    assert report["passed"] is True
    assert "timings" in report["volatile"]
    assert (tmp_path / "checks_poincare.csv").exists()
    assert (tmp_path / "separation_ladder.csv").exists()


def test_report_deterministic_modulo_volatile(tmp_path, cache_dir):
    config = cli.load_config(None, {"cache_dir": cache_dir})
    r1 = cli.run_command("poincare", config)
    r2 = cli.run_command("poincare", config)
    strip = lambda r: {k: v for k, v in r.items() if k != "volatile"}
    assert (json.dumps(strip(r1), sort_keys=True)
            == json.dumps(strip(r2), sort_keys=True))


def test_density_command_emits_figures(tmp_path, cache_dir):
    config = cli.load_config(None, {"out_dir": str(tmp_path),
                                    "cache_dir": cache_dir,
                                    "emit_svg": True})
    report = cli.run_command("density", config)
    cli.write_report(report, tmp_path)
    cli.write_csv_tables(report, tmp_path)
    figs = cli.write_figures(report, config, tmp_path)
    svg = tmp_path / "density_residuals.svg"
    assert svg.exists() and svg.stat().st_size > 0
    text = svg.read_text()
    assert report["config_hash"] in text
    csv = (tmp_path / "density_residuals.csv").read_text().splitlines()
    assert csv[0] == "size,symbol_residual,operator_residual"
    assert len(csv) > 3


def test_report_render_table(cache_dir):
    config = cli.load_config(None, {"cache_dir": cache_dir})
    report = cli.run_command("poincare", config)
    table = cli.report_render(report)
    assert "criterion" in table.splitlines()[0]
    assert "overall: pass" in table
    # ladder annotation present
    assert "monotone: True" in table


def test_report_render_empty_checklist():
    report = {"criteria": [], "passed": True, "command": "x"}
    table = cli.report_render(report)
    assert "criterion" in table.splitlines()[0]
    assert "overall: pass" in table


def test_qexpansion_ingestion(tmp_path, cache_dir, delta200):
    qpath = tmp_path / "form.json"
    modforms.save_qexpansion(delta200, qpath)
    config = cli.load_config(None, {"cache_dir": cache_dir,
                                    "qexpansion_file": str(qpath),
                                    "ladder": [20, 40]})
    report = cli.run_command("cusp-action", config)
    names = [c["name"] for c in report["criteria"]]
    assert "external_form" in names
    ext = report["criteria"][names.index("external_form")]
    assert ext["info"]["weight"] == 12
    assert ext["passed"]


def test_capacity_error_exits_3(monkeypatch, capsys):
    from bergmod.errors import CapacityExceeded

    def boom(command, config):
        raise CapacityExceeded("too many group elements")

    monkeypatch.setattr(cli, "run_command", boom)
    assert cli.main(["poincare"]) == 3
    assert "capacity" in capsys.readouterr().err


def test_config_hash_stable():
    c1 = cli.load_config(None, {})
    c2 = cli.load_config(None, {})
    assert cli.config_hash(c1) == cli.config_hash(c2)
    c3 = cli.load_config(None, {"seed": 5})
    assert cli.config_hash(c1) != cli.config_hash(c3)
