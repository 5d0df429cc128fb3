import csv
import io

import pytest

from sbpc.cli import main
from sbpc.scenario import ScenarioError, parse_scenario, parse_scenario_text, serialize_scenario

MINIMAL = """
[model]
kind = integrator
dt = 1
[horizon]
k_f = 4
L = 2
[inputs]
alphabet = {-1, 0, 1}
[initial]
state = 0, 0
[terminal]
center = 4, 0
"""


def test_minimal_parses():
    s = parse_scenario_text(MINIMAL)
    assert s.k_f == 4 and s.alphabet == (-1.0, 0.0, 1.0) and s.terminal_half_widths == (0.0, 0.0)


def test_driver_assistance_alphabet_round_trip(train_demo):
    assert train_demo.alphabet == (-1.0, 0.0, 0.5, 0.75, 1.0)
    again = parse_scenario_text(serialize_scenario(train_demo))
    assert again == train_demo


@pytest.mark.parametrize("name", ["desk_integrator.ini", "short_integrator.ini", "train_demo.ini"])
def test_round_trip(scenario_dir, name):
    s = parse_scenario(scenario_dir / name)
    assert parse_scenario_text(serialize_scenario(s)) == s


def test_negative_L_names_field():
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text(MINIMAL.replace("L = 2", "L = -3"))
    assert any(e.startswith("horizon.L:") for e in err.value.errors)


def test_all_errors_reported():
    text = MINIMAL.replace("L = 2", "L = -3").replace("dt = 1", "dt = fast").replace("center = 4, 0", "center = 4")
    text += "[disturbance]\nd_bar = -1\n"
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text(text)
    fields = {e.split(":")[0] for e in err.value.errors}
    assert {"horizon.L", "model.dt", "terminal_center", "disturbance.d_bar"} <= fields


def test_missing_fields_and_discrete_alphabet():
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text("[model]\nkind = integrator\n[inputs]\nmode = discrete\n")
    msgs = "\n".join(err.value.errors)
    for name in ("model.dt", "horizon.k_f", "horizon.L", "initial.state", "terminal.center", "inputs.alphabet"):
        assert name in msgs


def test_train_needs_track():
    text = MINIMAL.replace("kind = integrator", "kind = train") + "[train]\nmass = 1\n"
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text(text)
    msgs = "\n".join(err.value.errors)
    assert "train.track" in msgs and "train.static_mass" in msgs


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        parse_scenario(tmp_path / "nope.ini")


# -- CLI ---------------------------------------------------------------------------


def test_run_writes_outputs(scenario_dir, tmp_path, capsys):
    path = tmp_path / "calm.ini"
    path.write_text((scenario_dir / "desk_integrator.ini").read_text().replace("d_bar = 0.05", "d_bar = 0"))
    assert main(["run", str(path), "-o", str(tmp_path), "--algorithm", "nominal"]) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "steps.csv").read_text())))
    assert len(rows) == 13  # k_f moves plus the terminal state
    plot = list(csv.DictReader(io.StringIO((tmp_path / "plot.csv").read_text())))
    assert len(plot) == 13 and plot[-1]["input"] == ""
    assert "terminal_delta" in (tmp_path / "summary.txt").read_text()


def test_run_is_byte_identical(scenario_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", str(scenario_dir / "desk_integrator.ini"), "-o", str(out)]) == 0
    for name in ("steps.csv", "summary.txt", "plot.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_run_infeasible_exit_code(scenario_dir, tmp_path):
    text = (scenario_dir / "desk_integrator.ini").read_text().replace("center = 27, 0", "center = 500, 0")
    path = tmp_path / "far.ini"
    path.write_text(text)
    assert main(["run", str(path), "-o", str(tmp_path / "o"), "--algorithm", "nominal"]) == 2


def test_invalid_scenario_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(MINIMAL.replace("L = 2", "L = -1"))
    assert main(["bound", str(path)]) == 1
    assert "horizon.L" in capsys.readouterr().err


def test_bound_linear_example(tmp_path, capsys):
    path = tmp_path / "lin.ini"
    text = MINIMAL.replace("k_f = 4", "k_f = 3").replace("L = 2", "L = 1")
    path.write_text(text + "[disturbance]\nd_bar = 0.1\n[bound]\nmoduli = linear\nk_x = 1.5\nk_u = 2.0\n")
    assert main(["bound", str(path)]) == 0
    out = capsys.readouterr().out
    total = float(out.split("beta_total = ")[1].split()[0])
    assert total == pytest.approx(1.65, abs=1e-12)


def test_bound_zero_disturbance(tmp_path, capsys):
    path = tmp_path / "z.ini"
    path.write_text(MINIMAL)
    assert main(["bound", str(path)]) == 0
    assert "beta_total = 0.0" in capsys.readouterr().out


def test_bound_train_reports_estimate(scenario_dir, capsys):
    assert main(["bound", str(scenario_dir / "train_demo.ini")]) == 0
    assert "inflated x1.2" in capsys.readouterr().out


def test_verify_exit_codes(scenario_dir, capsys):
    short = str(scenario_dir / "short_integrator.ini")
    assert main(["verify", short, "--runs", "200"]) == 0
    assert main(["verify", short, "--runs", "200", "--halve-bound"]) == 2


def test_sweep_single_value_matches_run(scenario_dir, tmp_path, capsys):
    scen = str(scenario_dir / "desk_integrator.ini")
    assert main(["run", scen, "-o", str(tmp_path)]) == 0
    summary = dict(line.split(" = ", 1) for line in (tmp_path / "summary.txt").read_text().splitlines())
    capsys.readouterr()
    assert main(["sweep", scen, "--param", "d_bar", "--values", "0.05"]) == 0
    row = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))[0]
    assert row["terminal_delta"] == summary["terminal_delta"]
    assert row["total_cost"] == summary["total_cost"]


def test_sweep_L_nodes_decrease(scenario_dir, capsys):
    assert main(["sweep", str(scenario_dir / "desk_integrator.ini"), "--param", "L", "--values", "1,2,3,4,6"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    nodes = [int(r["nodes0"]) for r in rows]
    assert all(b < a for a, b in zip(nodes, nodes[1:]))
    assert [int(r["candidates0"]) for r in rows] == [3**12, 3**6, 3**4, 3**3, 3**2]


def test_sweep_bad_values(scenario_dir, capsys):
    assert main(["sweep", str(scenario_dir / "desk_integrator.ini"), "--param", "L", "--values", "0"]) == 1
