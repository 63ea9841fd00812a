import json

import pytest

from nacdyn import build_parser, main


@pytest.fixture
def synth_dir(tmp_path):
    assert main(["synth", str(tmp_path), "--coarse", "3", "3", "--grid", "12", "12", "--t-final", "0.5"]) == 0
    return tmp_path


def test_synth_writes_a_run(synth_dir):
    config = json.loads((synth_dir / "config.json").read_text())
    assert config["grid"]["n_r"] == 12
    assert config["dynamics"]["t_final_fs"] == 0.5
    assert len(json.loads((synth_dir / "manifest.json").read_text())["points"]) == 9
    assert (synth_dir / "surfaces_model.bin").is_file()


def test_validate(synth_dir, capsys):
    assert main(["validate", str(synth_dir / "config.json")]) == 0
    assert "FATAL" not in capsys.readouterr().out
    (synth_dir / "fcidump" / "p00_00_center.fcidump").unlink()
    assert main(["validate", str(synth_dir / "config.json")]) == 1
    assert "FATAL: missing FCIDUMP fcidump/p00_00_center.fcidump" in capsys.readouterr().out


def test_single_stage_needs_its_inputs(synth_dir):
    assert main(["dynamics", str(synth_dir / "config.json"), "--no-progress"]) == 1
    assert main(["run", str(synth_dir / "config.json"), "--stages", "interp", "--no-progress"]) == 1


def test_bad_config_path(tmp_path):
    assert main(["run", str(tmp_path / "absent.json")]) == 1
    (tmp_path / "broken.json").write_text("{")
    assert main(["validate", str(tmp_path / "broken.json")]) == 1


def test_plotdata_needs_populations(tmp_path):
    assert main(["plotdata", str(tmp_path)]) == 1


def test_parser_rejects_unknown_stage():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "config.json", "--stages", "fit"])


def test_mcp_tools(synth_dir):
    pytest.importorskip("mcp")
    import nacdyn_mcp

    assert nacdyn_mcp.validate_config_tool(str(synth_dir / "config.json")) == "config is valid"
    with pytest.raises(Exception):
        nacdyn_mcp.run_summary_tool(str(synth_dir))
