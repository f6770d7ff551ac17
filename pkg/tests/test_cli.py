import json

import pytest

from distortkit.cli import main


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def test_norm_examples(tmp_path, capsys):
    v = write(tmp_path, "v.json", {"mode": "float", "coords": [[1, 1.0], [2, 1.0], [3, 1.0]]})
    assert main(["norm", v, "--space", "s"]) == 0
    assert capsys.readouterr().out.strip() == "1.5"
    w = write(tmp_path, "w.json", {"mode": "exact", "coords": [[3, 1, 1], [4, 1, 1], [5, 1, 1]]})
    assert main(["norm", w, "--space", "t"]) == 0
    assert capsys.readouterr().out.strip() == "3/2"


def test_exit_codes(tmp_path):
    bad = write(tmp_path, "bad.json", "{not json")
    zero = write(tmp_path, "zero.json", {"mode": "float", "coords": []})
    assert main(["norm", bad]) == 2
    assert main(["norm", "--bogus"]) == 2
    assert main(["functional", zero]) == 3
    assert main(["build", "ris", "--k", "2", "--scale", "1"]) == 4
    assert main(["probe", "ortho", "--bundle", str(tmp_path / "nope.json")]) == 5
    assert main(["norm", str(tmp_path / "nope.json")]) == 5


def test_functional_writes_tree(tmp_path):
    v = write(tmp_path, "v.json", {"mode": "float", "coords": [[0, 2.0], [5, -1.0]]})
    out = tmp_path / "f.json"
    assert main(["functional", v, "--space", "s", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "tree" and doc["pairing"] == pytest.approx(2.0)
    assert main(["functional", v, "--space", "t2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["kind"] == "vector"


def test_build_verify_and_ortho(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["build", "dm", "--m", "2", "--r", "3", "--out", str(a), "--verify"]) == 0
    assert main(["build", "dm", "--m", "2", "--r", "3", "--start", "20", "--out", str(b)]) == 0
    capsys.readouterr()
    assert main(["verify", str(a)]) == 0
    assert capsys.readouterr().out.strip().endswith("verified")
    out = tmp_path / "o.csv"
    assert main(["probe", "ortho", "--bundle", str(a), "--bundle", str(b), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "sqrt_pairing,l1_distance,bound_check"
    assert float(lines[1].split(",")[1]) == pytest.approx(2.0)
    doc = json.loads(a.read_text())
    doc["record"]["t"]["coords"][0][1] *= 3
    a.write_text(json.dumps(doc))
    assert main(["verify", str(a)]) == 3


def test_gamma_and_asymp(tmp_path):
    g = tmp_path / "g.json"
    assert main(["build", "gamma", "--space", "t2", "--k", "1", "--verify", "--budget", "8",
                 "--workspace", str(tmp_path), "--out", str(g)]) == 0
    assert (tmp_path / "calibration-tp_2.json").exists()
    d = tmp_path / "d.json"
    assert main(["build", "delta", "--space", "t2", "--N", "4", "--m", "2", "--budget", "8",
                 "--workspace", str(tmp_path), "--out", str(d)]) == 0
    out = tmp_path / "asymp.csv"
    assert main(["probe", "asymp", "--bundle", str(d), "--space", "t2",
                 "--workspace", str(tmp_path), "--out", str(out)]) == 0
    assert float(out.read_text().splitlines()[1].split(",")[-1]) < 1e-9
    assert main(["probe", "asymp", "--bundle", str(g), "--space", "t2",
                 "--workspace", str(tmp_path)]) == 3


def test_reports_are_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"fg{i}.csv"
        plot = tmp_path / f"fg{i}.gp"
        assert main(["probe", "fg", "--space", "t2", "--n", "3", "--budget", "8", "--seed", "4",
                     "--workspace", str(tmp_path), "--out", str(out), "--plot", str(plot)]) == 0
        outs.append(out.read_bytes())
        assert plot.exists()
    assert outs[0] == outs[1]
    a, b = tmp_path / "s0.json", tmp_path / "s1.json"
    for p in (a, b):
        assert main(["probe", "seq", "--space", "t2", "--count", "2", "--format", "json",
                     "--budget", "8", "--workspace", str(tmp_path), "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
