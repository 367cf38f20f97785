import json
import os

import pytest

from shotlimit import cli
from shotlimit.errors import ConfigError

VERIFY = """
[model]
model = inhom_poisson
c = 1
w = 1
[response]
beta = 1
[experiment]
command = verify
scale_t = 200
seed = 101
"""


def test_minimal_config_defaults():
    cfg = cli.parse_config(VERIFY)
    assert cfg.command == "verify"
    assert cfg.experiment.n_paths == 5000
    assert cfg.experiment.u_points == (0.25, 0.5, 0.75, 1.0)
    assert cfg.workers == 1


@pytest.mark.parametrize("edit,key", [
    (("beta = 1", "beta = -1"), "response.beta"),
    (("scale_t = 200", "scale_t = 200\nbogus = 1"), "experiment.bogus"),
    (("seed = 101", ""), "experiment.seed"),
    (("model = inhom_poisson", "model = nope"), "model.model"),
    (("c = 1", "c = -2"), "model.c"),
    (("u_points", "u_points"), None),
])
def test_config_errors_name_the_key(edit, key):
    if key is None:
        text = VERIFY.replace("seed = 101", "seed = 101\nu_points = 0, 0.5")
        key = "experiment.u_points"
    else:
        text = VERIFY.replace(*edit)
    with pytest.raises(ConfigError) as e:
        cli.parse_config(text)
    assert e.value.key == key
    assert str(e.value).startswith(key)


def test_branching_k_one_is_domain_error():
    text = VERIFY.replace("model = inhom_poisson\nc = 1\nw = 1", "model = branching\nincrement = exponential(1)\nk = 1")
    with pytest.raises(ConfigError) as e:
        cli.parse_config(text)
    assert e.value.key == "model.k" and ">= 2" in str(e.value)


def test_verify_exit_zero_and_reports(tmp_path, capsys):
    cfg = tmp_path / "v.ini"
    cfg.write_text(VERIFY)
    status = cli.main(["--config", str(cfg), "--out", str(tmp_path / "out")])
    assert status == 0
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert doc["schema_version"] == 1 and doc["passed"]
    run = json.loads((tmp_path / "out" / "run.json").read_text())
    assert run["config"]["experiment"]["scale_t"] == 200.0
    lines = (tmp_path / "out" / "cov.csv").read_text().splitlines()
    assert lines[0] == "# schema_version=1" and lines[1] == "u_i,u_j,empirical,theoretical,se"


def test_unwritable_output_dir(tmp_path, capsys):
    cfg = tmp_path / "v.ini"
    cfg.write_text(VERIFY)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    status = cli.main(["--config", str(cfg), "--out", str(blocker / "sub")])
    assert status == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error reason=io:")


def test_env_overrides_output_dir(tmp_path, monkeypatch):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[experiment]\ncommand = cov\nseed = 1\ndriver = bm\nbeta = 1\n[output]\noutput_dir = nowhere\n")
    monkeypatch.setenv(cli.ENV_OUTPUT, str(tmp_path / "env"))
    assert cli.main(["--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "cov.csv").exists()
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "cov.csv").exists()


def test_flags_override_file(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[experiment]\ncommand = verify\nseed = 1\ndriver = bm\nbeta = 1\n")
    assert cli.main(["--config", str(cfg), "--command", "cov", "--out", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "run.json").read_text())["config"]["command"] == "cov"


def test_all_commands_and_byte_identical_reruns(tmp_path):
    base = VERIFY.replace("seed = 101", "seed = 3\nn_paths = 200")
    configs = {
        "simulate": base.replace("command = verify", "command = simulate") + "grid_points = 11\n",
        "sweep": base.replace("command = verify", "command = sweep").replace("scale_t = 200", "scales = 20, 40, 80"),
        "holder": "[experiment]\ncommand = holder\nseed = 2\ndriver = bm\nrho = 0, 0.5\ngrid_m = 9\nn_paths = 5\n",
        "cov": "[experiment]\ncommand = cov\nseed = 2\ndriver = rl(1)\nbeta = 0.5\n",
        "identity": "[experiment]\ncommand = identity\nseed = 2\ngrid_ms = 8, 9, 10\n",
    }
    expected = {"simulate": "paths.csv", "sweep": "sweep.csv", "holder": "holder.csv", "cov": "cov.csv",
                "identity": "identity.csv"}
    for cmd, text in configs.items():
        cfg = tmp_path / f"{cmd}.ini"
        cfg.write_text(text)
        outs = []
        for i in range(2):
            out = tmp_path / f"{cmd}{i}"
            assert cli.main(["--config", str(cfg), "--out", str(out), "--workers", str(i + 1)]) in (0, 1)
            outs.append((out / expected[cmd]).read_bytes())
        assert outs[0] == outs[1]
        text_lines = outs[0].decode().splitlines()
        header = next(l for l in text_lines if not l.startswith("#"))
        assert "," in header and not header[0].isdigit()
