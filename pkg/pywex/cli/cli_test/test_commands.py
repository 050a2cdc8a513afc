import json

import pytest

from pywex.cli import main, build_parser, EXIT_OK, EXIT_FAILED, EXIT_CONFIG


def _run(tmp_path, *argv):
    return main([*argv, "--output", str(tmp_path)])


def test_every_command_has_a_parser():
    parser = build_parser()
    for command in ("simulate", "evolve-master", "solve-fpe", "analytic", "compare", "converge"):
        args = vars(parser.parse_args([command, "--x0", "3"]))
        assert args["command"] == command
        assert args["model.x0"] == "3"
        assert "model.N" not in args


def test_simulate_without_steps_writes_the_start(tmp_path):
    assert _run(tmp_path, "simulate", "--x0", "3", "--count", "1", "--t-max", "0") == EXIT_OK
    assert (tmp_path / "simulate.csv").read_text().splitlines() == ["trajectory,t,w0,w1", "0,0,3,7"]
    absorption = (tmp_path / "simulate-absorption.csv").read_text().splitlines()
    assert absorption[1].endswith(",-1,-1,3,7")
    hitting = json.loads((tmp_path / "simulate-hitting.json").read_text())
    assert hitting["hitting"]["unabsorbed"] == 1
    assert hitting["exact"]["probabilities"] == pytest.approx([0.3, 0.7])

    manifest = json.loads((tmp_path / "simulate-manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["config"]["ensemble"]["count"] == 1
    assert set(manifest["files"]) == {"simulate.csv", "simulate-absorption.csv", "simulate-hitting.json"}


def test_simulate_is_byte_identical_for_a_seed(tmp_path):
    outputs = []
    for run in ("a", "b"):
        assert _run(tmp_path / run, "simulate", "--n", "3", "--x0", "4,3,3", "--kernel", "constant(0.1)",
                    "--count", "200", "--seed", "3", "--t-max", "300") == EXIT_OK
        outputs.append([(tmp_path / run / name).read_bytes() for name in ("simulate.csv", "simulate-absorption.csv")])
    assert outputs[0] == outputs[1]


def test_configuration_errors_stop_before_running(tmp_path, capsys):
    assert _run(tmp_path, "simulate", "--x0", "3.5") == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "model.x0[0]" in err
    assert "1 erreur(s) de configuration" in err
    assert not (tmp_path / "simulate.csv").exists()


def test_absorption_split(tmp_path, capsys):
    assert _run(tmp_path, "analytic", "--absorption", "--N", "10", "--x0", "3") == EXIT_OK
    assert capsys.readouterr().out.strip() == "u=0.7 v=0.3"
    data = json.loads((tmp_path / "analytic-absorption.json").read_text())
    assert data["u"] == pytest.approx(0.7)


def test_analytic_line_snapshots(tmp_path):
    assert _run(tmp_path, "analytic", "--x0", "3", "--h", "0.5", "--T", "2", "--snapshots", "2") == EXIT_OK
    lines = (tmp_path / "analytic.csv").read_text().splitlines()
    assert lines[0] == "t,x,density"
    assert len(lines) == 1 + 2 * 21
    boundary = json.loads((tmp_path / "analytic-boundary.json").read_text())
    assert [entry["t"] for entry in boundary] == [1.0, 2.0]


def test_evolve_master(tmp_path):
    assert _run(tmp_path, "evolve-master", "--N", "2", "--x0", "1", "--kernel", "constant(0.25)", "--steps", "1",
                "--snapshots", "0,1") == EXIT_OK
    lines = (tmp_path / "evolve-master.csv").read_text().splitlines()
    assert lines == ["t,w0,w1,mass", "0,1,1,1", "1,2,0,0.25", "1,1,1,0.5", "1,0,2,0.25"]
    summary = json.loads((tmp_path / "evolve-master-summary.json").read_text())
    assert summary["states"] == 3
    assert summary["absorption"]["probabilities"] == pytest.approx([0.5, 0.5])


def test_solve_fpe_on_the_line(tmp_path):
    assert _run(tmp_path, "solve-fpe", "--x0", "3", "--h", "0.5", "--T", "1", "--snapshots", "2") == EXIT_OK
    boundary = json.loads((tmp_path / "solve-fpe-boundary.json").read_text())
    assert len(boundary) == 3
    for entry in boundary:
        assert entry["interior_mass"] + sum(entry["atoms"]) == pytest.approx(1.0)


def test_solve_fpe_on_the_triangle(tmp_path):
    assert _run(tmp_path, "solve-fpe", "--n", "3", "--x0", "4,3,3", "--kernel", "constant(0.1)", "--h", "0.5",
                "--T", "1", "--snapshots", "1") == EXIT_OK
    assert (tmp_path / "solve-fpe.dat").read_text().startswith("# t = 0\n")
    assert (tmp_path / "solve-fpe-final.csv").exists()
    boundary = json.loads((tmp_path / "solve-fpe-boundary.json").read_text())
    assert [e["edge"] for e in boundary[-1]["edges"]] == [0, 1, 2]


def test_route_failures_exit_with_one(tmp_path, capsys):
    # 3.25 lies halfway between two nodes of spacing 0.5.
    assert _run(tmp_path, "solve-fpe", "--x0", "3.25", "--h", "0.5", "--T", "1") == EXIT_FAILED
    assert "mi-chemin" in capsys.readouterr().err


def test_compare_exit_status_follows_the_tolerances(tmp_path, capsys):
    argv = ["compare", "--routes", "master,analytic", "--l", "0.1", "--x0", "3", "--t", "1"]
    assert _run(tmp_path / "ok", *argv) == EXIT_OK
    report = json.loads((tmp_path / "ok" / "compare.json").read_text())
    assert report["passed"] is True
    assert report["routes"] == ["master", "analytic"]

    assert _run(tmp_path / "strict", *argv, "--tv", "0") == EXIT_FAILED
    captured = capsys.readouterr()
    assert "ÉCHEC" in captured.out
    assert "Error (compare.tolerances): Les routes master et analytic divergent : tv = " in captured.err
    assert "> 0." in captured.err


def test_converge_with_the_exact_chain(tmp_path):
    assert _run(tmp_path, "converge", "--route", "master", "--x0", "3", "--T", "4", "--ls", "1,0.5,0.25") == EXIT_OK
    lines = (tmp_path / "converge.csv").read_text().splitlines()
    assert lines[0] == "l,tv,l1,ks,tv_noise,interior_variance"
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "0.5", "0.25"]
    assert json.loads((tmp_path / "converge.json").read_text())["trend_holds"] is True
