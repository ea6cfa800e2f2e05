import csv
import json
import subprocess
import sys

import pytest

from towgame.cli import main

BASE = """\
eps = ["0.2", "0.1"]
seed = 7

[domain]
shape = "disk"
center = ["0", "0"]
radius = "1"
T = "{T}"
eta = "0.2"

[family]
kind = "{kind}"
rho = "{rho}"
c = "0.5"

[payoff]
{payoff}

[grid]
h_factor = "0.5"
dt_factor = "1"
resolution = 2

[simulate]
x0 = ["0.1", "0"]
t0 = "0.3"
runs = 50
record = 5

[operator]
probes = 2
envelope_args = 20
resolution = 8
"""


def manifest(tmp_path, name="m.toml", kind="ball", rho="0.5", T="0.5", payoff='name = "constant"\nvalue = "3"',
             extra=""):
    path = tmp_path / name
    path.write_text(BASE.format(kind=kind, rho=rho, T=T, payoff=payoff) + extra)
    return path


def run(path, cmd, out, *more):
    return main([cmd, "--manifest", str(path), "--out", str(out), *more])


def test_solve_constant(tmp_path):
    path = manifest(tmp_path)
    assert run(path, "solve", tmp_path / "out") == 0
    rows = list(csv.reader(open(tmp_path / "out" / "solve_eps0.1.csv", newline="")))
    assert rows[0] == ["x1", "x2", "t", "u"]
    assert len(rows) > 100 and all(float(r[3]) == 3.0 for r in rows[1:])
    meta = json.loads((tmp_path / "out" / "solve_eps0.1.json").read_text())
    assert meta["seed"] == 7 and len(meta["manifest_hash"]) == 64 and meta["bounds_ok"]


def test_solve_is_reproducible(tmp_path, monkeypatch):
    path = manifest(tmp_path, payoff='expr = "abs(x1) + 0.5*x2"')
    assert run(path, "solve", tmp_path / "a") == 0
    monkeypatch.setenv("TOWGAME_THREADS", "3")
    assert run(path, "solve", tmp_path / "b") == 0
    for e in ("0.2", "0.1"):
        assert (tmp_path / "a" / f"solve_eps{e}.csv").read_bytes() == (tmp_path / "b" / f"solve_eps{e}.csv").read_bytes()


def test_seed_override_is_recorded(tmp_path):
    path = manifest(tmp_path)
    assert run(path, "solve", tmp_path / "o", "--seed", "123") == 0
    assert json.loads((tmp_path / "o" / "solve_eps0.2.json").read_text())["seed"] == 123


def test_simulate(tmp_path):
    path = manifest(tmp_path, payoff='expr = "x1 - x2"')
    assert run(path, "simulate", tmp_path / "o") == 0
    lines = (tmp_path / "o" / "simulate_eps0.2.jsonl").read_text().splitlines()
    assert len(lines) == 5 and json.loads(lines[0])["seed"] == 7
    ledger = (tmp_path / "o" / "simulate_ledger.csv").read_text().splitlines()
    assert len(ledger) == 3 and ledger[0].startswith("experiment,mean,se,runs,seed")


def test_operator(tmp_path):
    path = manifest(tmp_path)
    assert run(path, "operator", tmp_path / "o") == 0
    rows = list(csv.DictReader(open(tmp_path / "o" / "operator_consistency.csv", newline="")))
    assert len(rows) == 8 and {r["verdict"] for r in rows} == {"PASS"}
    assert json.loads((tmp_path / "o" / "operator.json").read_text())["passed"]


def test_converge_linear(tmp_path):
    path = manifest(tmp_path, payoff='name = "linear"\nv = ["0.5", "-1"]\nb = "0.25"')
    assert run(path, "converge", tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o" / "converge.json").read_text())
    assert rep["verdict"] == "PASS" and all(d <= 1e-9 for d in rep["differences"])
    assert "manifest_hash" in rep
    assert (tmp_path / "o" / "converge.csv").read_bytes().startswith(b"k,eps_k,eps_k1,d_k\r\n")


def test_axioms_pass_and_fail(tmp_path):
    assert run(manifest(tmp_path), "axioms", tmp_path / "o") == 0
    assert json.loads((tmp_path / "o" / "axioms.json").read_text())["passed"]
    # not symmetric in y: A3 fails
    bad = manifest(tmp_path, "bad.toml", kind="tabulated",
                   extra="")
    text = bad.read_text().replace('kind = "tabulated"', 'kind = "tabulated"\npoints = [[0, 0, 0], ["0.3", 0, 0]]')
    bad.write_text(text)
    assert run(bad, "axioms", tmp_path / "p") == 1


@pytest.mark.parametrize(
    "kwargs,needle",
    [
        ({"rho": "1.5"}, "family"),
        ({"payoff": 'expr = "x1 +"'}, "offset 4"),
        ({"payoff": 'expr = "x3"'}, "payoff"),
        ({"kind": "cube"}, "family.kind"),
        ({"T": "zero"}, "domain.T"),
    ],
)
def test_invalid_manifests(tmp_path, capsys, kwargs, needle):
    path = manifest(tmp_path, **kwargs)
    assert run(path, "solve", tmp_path / "o") == 2
    assert needle in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_invalid_grid_and_threads(tmp_path, monkeypatch):
    path = manifest(tmp_path)
    path.write_text(path.read_text().replace('dt_factor = "1"', 'dt_factor = "2"'))
    assert run(path, "solve", tmp_path / "o") == 2
    path = manifest(tmp_path, "ok.toml")
    assert run(path, "solve", tmp_path / "o", "--threads", "0") == 2
    monkeypatch.setenv("TOWGAME_THREADS", "many")
    assert run(path, "solve", tmp_path / "o") == 2
    assert run(tmp_path / "missing.toml", "solve", tmp_path / "o") == 2


def test_json_manifest(tmp_path):
    doc = {
        "eps": ["0.2"],
        "domain": {"shape": "interval", "a": "-1", "b": "1", "T": "0.3", "eta": "0.2"},
        "family": {"kind": "paraboloid", "rho": "0.5", "c": "0.5"},
        "payoff": {"expr": "x1^2"},
    }
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    assert run(path, "solve", tmp_path / "o") == 0
    assert (tmp_path / "o" / "solve_eps0.2.csv").exists()


def test_module_entry_point(tmp_path):
    path = manifest(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "towgame.cli", "axioms", "--manifest", str(path), "--out",
                           str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout
