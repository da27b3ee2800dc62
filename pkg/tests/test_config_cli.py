import re
from pathlib import Path

import numpy as np
import pytest
import yaml

from vmme import config as cfgmod
from vmme import harness, signaling
from vmme.config import ConfigError, ExperimentConfig

SMALL = {
    "num_users": 40,
    "sim_duration_s": 2000.0,
    "mc_sessions": 5000,
    "sweep": {"user_counts": [2000, 20000, 60000], "instances": [1, 2], "window_s": 20.0},
}


def write_cfg(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_defaults_round_trip(tmp_path):
    cfg = ExperimentConfig()
    path = tmp_path / "c.yaml"
    path.write_text(cfgmod.dump(cfg))
    assert cfgmod.load(path) == cfg
    assert cfgmod.dump(cfgmod.load(path)) == cfgmod.dump(cfg)


def test_empty_file_is_reference_scenario(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    cfg = cfgmod.load(path)
    assert cfg == ExperimentConfig()
    assert cfg.grid.num_cells == 12 and cfg.timer_s == 10.0
    assert cfg.link.downlink_rate == 3e8


def test_partial_override():
    cfg = cfgmod.from_dict({"mix": {"p_web": 0.0, "p_video": 0.0, "p_call": 1.0},
                            "traffic": {"call": {"holding_time": {"kind": "Constant", "value": 30}}}})
    assert cfg.mix.p_call == 1.0
    assert cfg.traffic.call.holding_time.kind == "Constant"
    assert cfg.traffic.web == ExperimentConfig().traffic.web


@pytest.mark.parametrize("data,field", [
    ({"num_users": 0}, "config"),
    ({"mix": {"p_web": 0.9}}, "mix"),
    ({"qnet": {"db_probability": 2.0}}, "qnet"),
    ({"traffic": {"web": {"pageviews": {"kind": "Geometric", "p": 1.5}}}},
     "traffic.web.pageviews"),
    ({"grid": {"colls": 3}}, "grid.colls"),
    ({"qnet": {"nfv_profile": {"instructions": {"XX1": 1e6}}}}, "qnet.nfv_profile.instructions.XX1"),
    ({"sweep": {"budget_s": -1}}, "sweep"),
])
def test_validation_names_field(data, field):
    with pytest.raises(ConfigError, match="^" + re.escape(field) + r"\b"):
        cfgmod.from_dict(data)


def test_bad_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("num_users: [1,\n")
    with pytest.raises(ConfigError):
        cfgmod.load(path)


# -- CLI -------------------------------------------------------------------------------

def cli(*args):
    return harness.main([str(a) for a in args])


def test_cli_validation_exit_code(tmp_path, capsys):
    path = write_cfg(tmp_path, {"mix": {"p_web": 2.0}})
    assert cli("generate-trace", "--config", path, "--out", tmp_path) == 2
    assert "mix" in capsys.readouterr().err


def test_cli_missing_config_is_io_error(tmp_path):
    assert cli("generate-trace", "--config", tmp_path / "nope.yaml") == 3


def test_cli_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write_cfg(tmp_path, SMALL)
    assert cli("generate-trace", "--config", cfg, "--out", blocker / "sub") == 3


def test_cli_malformed_trace(tmp_path, capsys):
    bad = tmp_path / "trace.csv"
    bad.write_text("time_s,ue_id,procedure,message,procedure_id\n0.1,0,SR,1,0\nabc,0,SR,2,0\n")
    assert cli("simulate", "--trace", bad, "--out", tmp_path) == 2
    assert ":3:" in capsys.readouterr().err


def test_cli_empty_trace(tmp_path):
    empty = tmp_path / "trace.csv"
    empty.write_text("time_s,ue_id,procedure,message,procedure_id\n")
    assert cli("simulate", "--trace", empty, "--out", tmp_path) == 0
    lines = (tmp_path / "delays.csv").read_text().splitlines()
    assert all(line.split(",")[1] == "0" for line in lines[1:])


def test_cli_single_message(tmp_path):
    one = tmp_path / "trace.csv"
    one.write_text("time_s,ue_id,procedure,message,procedure_id\n1.000000000,0,SR,1,0\n")
    assert cli("simulate", "--trace", one, "--out", tmp_path) == 0
    row = [r for r in (tmp_path / "delays.csv").read_text().splitlines() if r.startswith("overall")][0]
    _, count, mean, _, _, mx = row.split(",")
    assert count == "1" and float(mean) == float(mx)
    assert abs(float(mean) - 1.459e-4) < 1e-7


def test_cli_advise(capsys):
    assert cli("advise", "1173900") == 0
    assert capsys.readouterr().out.strip() == "3"
    assert cli("advise", "2e6") == 0
    assert "beyond" in capsys.readouterr().out
    assert cli("advise", "-5") == 2


def test_cli_show_config(capsys):
    assert cli("show-config", "--seed", "9") == 0
    data = yaml.safe_load(capsys.readouterr().out)
    assert data["seed"] == 9


def test_single_call_user(tmp_path):
    # one 30 s call at t=100, released at t=140, horizon ends before a second session
    cfg = write_cfg(tmp_path, {
        "num_users": 1, "sim_duration_s": 150.0, "mix": {"p_web": 0, "p_video": 0, "p_call": 1},
        "traffic": {"inter_session": {"kind": "Constant", "value": 100.0},
                    "call": {"holding_time": {"kind": "Constant", "value": 30.0}}},
    })
    assert cli("generate-trace", "--config", cfg, "--out", tmp_path) == 0
    tr = signaling.read_trace_csv(tmp_path / "trace.csv")
    assert tr.procedure_counts()["SR"] == 1 and tr.procedure_counts()["SRR"] == 1


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Every command twice with the same config and seed."""
    base = tmp_path_factory.mktemp("det")
    cfg = write_cfg(base, SMALL)
    outs = []
    for k in range(2):
        out = base / f"run{k}"
        assert cli("generate-trace", "--config", cfg, "--out", out, "--seed", 5) == 0
        assert cli("predict-rates", "--config", cfg, "--out", out, "--seed", 5, "--empirical") == 0
        assert cli("simulate", "--config", cfg, "--out", out, "--seed", 5) == 0
        assert cli("capacity-sweep", "--config", cfg, "--out", out, "--seed", 5) == 0
        outs.append(out)
    return outs


def test_all_outputs_byte_identical(runs):
    a, b = runs
    names = sorted(p.name for p in a.iterdir())
    assert names == ["delays.csv", "rates.csv", "rates_empirical.csv", "sweep.csv", "trace.csv",
                     "utilization.csv"]
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_csv_format(runs):
    for p in runs[0].iterdir():
        text = p.read_text()
        assert text.endswith("\n") and "\r" not in text
        header = text.splitlines()[0]
        assert header and not header[0].isdigit()


def test_rates_csv_columns(runs):
    rows = np.loadtxt(runs[0] / "rates.csv", delimiter=",", skiprows=1)
    assert np.array_equal(rows[:, 1], rows[:, 2])
    assert np.all(np.diff(rows[:, 1]) < 0)


def test_sweep_budget_infinite(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    assert cli("capacity-sweep", "--config", cfg, "--out", tmp_path, "--budget-ms", "inf") == 0
    out = capsys.readouterr().out
    assert "m=1: capacity within inf ms = 60000 users" in out
    assert "m=2: capacity within inf ms = 60000 users" in out
    assert "advisor(1173900) = 3" in out


def test_seed_changes_trace(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    cli("generate-trace", "--config", cfg, "--out", tmp_path / "a", "--seed", 1)
    cli("generate-trace", "--config", cfg, "--out", tmp_path / "b", "--seed", 2)
    assert (tmp_path / "a/trace.csv").read_bytes() != (tmp_path / "b/trace.csv").read_bytes()
