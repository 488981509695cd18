import csv
import json

import pytest

from kunary import figure1_spec
from kunary.cli import main
from kunary.networkfile import network_to_dict

from conftest import chain_spec


@pytest.fixture
def net(tmp_path):
    p = tmp_path / "fig1.json"
    p.write_text(json.dumps(network_to_dict(figure1_spec())))
    return str(p)


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_equilibrium_report(capsys, net):
    code, out, _ = run(capsys, "equilibrium", "--network", net, "--y", "1.25")
    rep = json.loads(out)
    assert code == 0
    assert rep["z"] == pytest.approx([0.5, 0.25, 1.0, 1.25])
    assert rep["reduced"]["kappa_bar"][0] == pytest.approx([0, 0.625])
    assert rep["reduced"]["kappa_bar"][1] == pytest.approx([0.5, 0])
    assert rep["fast_map"]["L"] == pytest.approx(rep["ell"][:3])


def test_reduce_with_order(capsys, net):
    code, out, _ = run(capsys, "reduce", "--network", net, "--order", "3,2,1")
    assert code == 0 and json.loads(out)["kept"] == [0, 4]


def test_simulate_grid_and_events(capsys, net, tmp_path):
    code, out, _ = run(capsys, "simulate", "--network", net, "--N", "100", "--T", "0.1", "--points", "10", "--seed", "3")
    rows = list(csv.reader(out.splitlines()))
    assert code == 0 and rows[0] == ["t", "x_1", "x_2", "x_3", "x_4"] and len(rows) == 12
    d = tmp_path / "sim"
    code, _, _ = run(capsys, "simulate", "--network", net, "--N", "100", "--T", "0.1", "--full-events",
                     "--out", str(d), "--replicas", "2")
    assert code == 0
    head = (d / "trajectory_r1.csv").read_text().splitlines()[0]
    assert head == "t,i,j,x_1,x_2,x_3,x_4"
    recs = [json.loads(line) for line in (d / "occupation_r0.jsonl").read_text().splitlines()]
    assert sum(r["w"] for r in recs) == pytest.approx(0.1)


def test_simulate_is_reproducible(capsys, net):
    args = ("simulate", "--network", net, "--N", "100", "--T", "0.1", "--points", "5", "--seed", "11")
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_ode_outputs(capsys, net, tmp_path):
    code, out, _ = run(capsys, "ode", "--network", net, "--alpha", "0.5", "--T", "2", "--out", str(tmp_path))
    rep = json.loads(out)
    assert code == 0 and rep["rhs_norm_at_fixed_point"] <= 1e-10
    assert (tmp_path / "ode_slow.csv").read_text().startswith("t,x_4\n")
    code, out, _ = run(capsys, "ode", "--network", net, "--mode", "full", "--N", "10", "--T", "0.5")
    assert code == 0 and len(json.loads(out)["end"]) == 4


def test_entropy_report(capsys, net):
    code, out, _ = run(capsys, "entropy", "--network", net, "--point", "1,1,1,1", "--directions", "50")
    rep = json.loads(out)
    assert code == 0 and rep["F"] > 0 and rep["min_quadratic_form"] > 0


def test_stationary_threshold_exit_codes(capsys, net):
    base = ("stationary", "--network", net, "--N", "20", "--T", "20", "--seed", "1")
    assert run(capsys, *base, "--max-tv", "1.0")[0] == 0
    assert run(capsys, *base, "--max-tv", "1e-6")[0] == 2


def test_verify_exit_codes(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    doc = {"network": network_to_dict(chain_spec()), "N_ladder": [100], "alpha": [1, 1e-9], "replicas": 2,
           "thresholds": {"slow_sup": 10.0}}
    cfg.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "verify", "--config", str(cfg), "--out", str(tmp_path / "v"))
    assert code == 0 and json.loads(out)["passed"]
    doc["thresholds"] = {"slow_sup": 1e-12}
    cfg.write_text(json.dumps(doc))
    assert run(capsys, "verify", "--config", str(cfg), "--out", str(tmp_path / "w"))[0] == 2


def test_errors_exit_one(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"k": [1], "reactions": [{"from": 0, "to": 1, "rate": -2}]}')
    code, _, err = run(capsys, "equilibrium", "--network", str(bad))
    assert code == 1 and "reactions[0].rate" in err
    assert run(capsys, "equilibrium")[0] == 1
    assert run(capsys, "no-such-command")[0] == 1
    assert run(capsys, "verify")[0] == 1
