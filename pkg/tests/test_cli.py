import hashlib

import pytest

from bubbleblue import crypto
from bubbleblue.cli import main
from bubbleblue.udg import Graph, path_graph


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_sweep_csv_is_byte_identical(capsys):
    argv = ["sweep", "--dim", "1", "--ell", "10", "--lambda", "5,10", "--trials", "4",
            "--algos", "wu-li,mpr-cds", "--workers", "1"]
    code, first, _ = run_cli(capsys, *argv)
    assert code == 0
    assert first.splitlines()[0].startswith("dim,ell,lambda,algorithm")
    assert len(first.splitlines()) == 5
    _, second, _ = run_cli(capsys, *argv)
    _, parallel, _ = run_cli(capsys, *argv[:-1], "2")
    assert first == second == parallel


def test_sweep_report(capsys):
    code, _, err = run_cli(capsys, "sweep", "--lambda", "3,4,5", "--trials", "2", "--ell", "6",
                           "--workers", "1", "--report")
    assert code == 0
    assert "slope wu-li-1999" in err and "slope mpr-cds" in err


def test_env_seed_fallback(capsys, monkeypatch):
    argv = ["sweep", "--lambda", "3", "--trials", "3", "--ell", "6", "--workers", "1"]
    _, base, _ = run_cli(capsys, *argv)
    monkeypatch.setenv("BB_SEED", "5")
    _, env, _ = run_cli(capsys, *argv)
    _, flag, _ = run_cli(capsys, *argv, "--seed", "5")
    assert env == flag != base
    monkeypatch.setenv("BB_SEED", "abc")
    assert run_cli(capsys, *argv)[0] == 2


def test_keygen(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "keygen", "--n", "5", "--seed", "7", "--out-dir", str(tmp_path / "keys"))
    assert code == 0
    files = sorted((tmp_path / "keys").iterdir())
    assert [f.name for f in files] == [f"member-{i:03d}.bbkc" for i in range(5)]
    assert out.splitlines()[0] == "member-000.bbkc leader"
    cols = [crypto.KeyColumn.from_bytes(f.read_bytes()) for f in files]
    assert cols[2].column[3] == cols[3].column[2]
    digest = [hashlib.sha256(f.read_bytes()).hexdigest() for f in files]
    run_cli(capsys, "keygen", "--n", "5", "--seed", "7", "--out-dir", str(tmp_path / "again"))
    assert digest == [hashlib.sha256(f.read_bytes()).hexdigest() for f in sorted((tmp_path / "again").iterdir())]
    assert run_cli(capsys, "keygen", "--n", "60", "--seed", "1", "--out-dir", str(tmp_path / "x"))[0] == 2


def test_graph_and_flood(tmp_path, capsys):
    path = tmp_path / "g.txt"
    code, _, _ = run_cli(capsys, "graph", "--spec", "dim=1,ell=5,lambda=3,seed=2", "--out", str(path))
    assert code == 0
    g = Graph.loads(path.read_text())
    assert g.n == 15
    code, out, _ = run_cli(capsys, "flood", "--graph", str(path), "--cds-algo", "optimal")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("optimal ")
    assert lines[1].split()[1] == lines[2].split()[1]
    code, out, _ = run_cli(capsys, "flood", "--graph", str(path), "--cds-algo", "mpr", "--valve")
    assert code == 0 and "measured valve" in out


def test_flood_path_graph(tmp_path, capsys):
    path = tmp_path / "p.txt"
    path.write_text(path_graph(3).dumps())
    _, out, _ = run_cli(capsys, "flood", "--graph", str(path), "--cds-algo", "optimal")
    assert out.splitlines() == ["optimal 1 2 1", "formula 8/3 2.666667", "measured 8/3 2.666667"]


def test_scenario_command(tmp_path, capsys):
    scn = tmp_path / "s.scn"
    scn.write_text("graph path 3\nduration 3s\ntc off\nat 2500ms chat 0 hi\n")
    code, out, err = run_cli(capsys, "scenario", str(scn), "--no-hello")
    assert code == 0
    assert "deliver 2 chat:0:1 sealed-by=0" in out and "hello:" not in out
    assert "trace_sha256=" in err
    _, again, _ = run_cli(capsys, "scenario", str(scn), "--no-hello")
    assert again == out


@pytest.mark.parametrize("argv", [
    ["bogus"], [], ["sweep", "--trials", "0"], ["sweep", "--algos", "greedy"],
    ["sweep", "--algos", "optimal", "--lambda", "50"], ["graph", "--spec", "dim=1"],
    ["graph", "--spec", "ell=-1,lambda=2"], ["flood", "--graph", "/nonexistent/g.txt"],
])
def test_validation_errors_exit_2(argv, capsys):
    assert run_cli(capsys, *argv)[0] == 2


def test_bad_scenario_exit_2(tmp_path, capsys):
    scn = tmp_path / "bad.scn"
    scn.write_text("graph path 3\nat 1s chat 9 x\n")
    assert run_cli(capsys, "scenario", str(scn))[0] == 2


def test_help_mentions_every_flag(capsys):
    with pytest.raises(SystemExit):
        from bubbleblue.cli import build_parser
        build_parser().parse_args(["sweep", "--help"])
    out = capsys.readouterr().out
    for flag in ("--dim", "--ell", "--lambda", "--trials", "--algos", "--valve", "--cap", "--seed", "--workers"):
        assert flag in out
