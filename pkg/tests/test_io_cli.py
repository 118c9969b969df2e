import json
import subprocess
import sys

import numpy as np
import pytest

from geomonge import io
from geomonge.cli import main
from geomonge.kantorovich import DiscreteMeasure, TransportPlan
from geomonge.space import build_segment


def test_space_roundtrip(tmp_path):
    sp = build_segment(7, length=2.0)
    p = tmp_path / "s.json"
    io.write_json(p, io.space_to_json(sp))
    back = io.load_space(p)
    assert np.array_equal(back.d, sp.d) and np.array_equal(back.dL, sp.dL)


def test_infinite_entries_and_euclidean():
    data = {"n": 2, "d": [[0, 1], [1, 0]], "dL": [[0, "inf"], ["inf", 0]]}
    assert np.isinf(io.space_from_json(data).dL[0, 1])
    with pytest.raises(ValueError):
        io.space_from_json({"n": 2, "metric": "euclidean", "dL": [[0, 1], [1, 0]]})


def test_measure_roundtrip(tmp_path):
    mu = DiscreteMeasure.from_atoms(5, {1: 0.1, 3: 0.9})
    p = tmp_path / "m.csv"
    io.write_measure(p, mu)
    assert p.read_text().splitlines()[0] == "point_index,weight"
    assert np.array_equal(io.read_measure(p, 5).weights, mu.weights)


def test_dumps_stable():
    a = io.dumps({"b": np.float64(1.5), "a": [np.int64(2), np.nan, np.inf], "c": np.bool_(True)})
    assert a == io.dumps({"c": True, "a": [2, float("nan"), float("inf")], "b": 1.5})
    assert json.loads(a)["a"] == [2, "nan", "inf"]


@pytest.fixture
def files(tmp_path):
    sp = build_segment(9)
    io.write_json(tmp_path / "space.json", io.space_to_json(sp))
    io.write_measure(tmp_path / "mu.csv", DiscreteMeasure.from_atoms(9, {0: 0.5, 2: 0.5}))
    io.write_measure(tmp_path / "nu.csv", DiscreteMeasure.from_atoms(9, {5: 0.5, 8: 0.5}))
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_cli_pipeline(files):
    t = files
    assert run("space", "validate", t / "space.json", "--out", t / "v.json") == 0
    assert json.loads((t / "v.json").read_text())["non_branching"] is True
    assert run("kanto", "solve", t / "space.json", t / "mu.csv", t / "nu.csv", "--out", t / "plan.json") == 0
    assert run("kanto", "certify", t / "space.json", t / "plan.json", "--out", t / "cert.json") == 0
    assert run("rays", "build", t / "space.json", t / "plan.json", "--out", t / "rays.json") == 0
    assert run("monge", "solve", t / "space.json", t / "mu.csv", t / "nu.csv", "--out", t / "map.json") == 0
    m = json.loads((t / "map.json").read_text())
    assert m["cost"] == pytest.approx(0.5 * 5 / 8 + 0.5 * 6 / 8)
    assert run("flow", "solve", t / "rays.json", t / "mu.csv", t / "nu.csv", "--out", t / "flow.json") == 0
    assert run("disint", "run", t / "space.json", t / "plan.json", t / "mu.csv", "--out", t / "dis.json") == 0
    (t / "set.json").write_text("[0, 1]")
    assert run("disint", "evolve", t / "rays.json", t / "set.json", "--t", 0.125, 0.25, "--out", t / "ev.json") == 0
    assert run("mcp", "check", t / "space.json", t / "mu.csv", "--K", 0, "--N", 1, "--out", t / "mcp.json") == 0


def test_cli_error_exit(files, capsys):
    assert run("space", "validate", files / "missing.json") == 2
    io.write_measure(files / "bad.csv", DiscreteMeasure.from_atoms(9, {0: 0.5}))
    assert run("kanto", "solve", files / "space.json", files / "mu.csv", files / "bad.csv") == 2
    assert "error" in capsys.readouterr().err


def test_cli_gen_and_run(tmp_path):
    assert run("space", "gen", "segment", "--n", 5, "--out", tmp_path / "s.json") == 0
    assert io.load_space(tmp_path / "s.json").n == 5
    assert run("run", "identity", "--out", tmp_path / "r.json") == 0
    assert (tmp_path / "r.json").exists()


def test_console_entry(tmp_path):
    out = subprocess.run([sys.executable, "-m", "geomonge.cli", "run", "regularity", "--set", "dirac=true"],
                         capture_output=True, text=True)
    assert out.returncode == 1
    assert json.loads(out.stdout)["checks"]["regularity"] == "FAIL"


def test_cli_regularity_levels(tmp_path):
    from geomonge.kantorovich import TransportPlan
    from geomonge.rays import rays_from_plan

    levels = []
    for n in (10, 20, 40):
        sp = build_segment(n)
        io.write_json(tmp_path / f"s{n}.json", io.space_to_json(sp))
        io.write_json(tmp_path / f"r{n}.json", rays_from_plan(sp, TransportPlan(n, [(0, n - 1, 1.0)])).to_json())
        io.write_measure(tmp_path / f"m{n}.csv", DiscreteMeasure(np.full(n, 1.0 / n)))
        levels.append({"space": f"s{n}.json", "rays": f"r{n}.json", "mu": f"m{n}.csv"})
    io.write_json(tmp_path / "levels.json", {"levels": levels})
    assert run("disint", "regularity", tmp_path / "levels.json", "--out", tmp_path / "reg.json") == 0
    assert json.loads((tmp_path / "reg.json").read_text())["passed"] is True
