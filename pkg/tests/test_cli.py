import json
import math
import subprocess
import sys

import pytest

from edgeforge.cli import main, parse_z_grid
from edgeforge.graph import read_edge_list


def _run(argv):
    assert main(argv) == 0


def _load(path):
    with open(path) as fh:
        return json.load(fh)


@pytest.fixture
def rrg(tmp_path):
    path = tmp_path / "rrg.txt"
    _run(["sample-rrg", "--n", "200", "--d", "3", "--seed", "1", "--simple", "--out", str(path)])
    return path


def test_parse_z_grid():
    zs = parse_z_grid("E:0:1:0.25", 0.05)
    assert [z.real for z in zs] == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])
    assert all(z.imag == 0.05 for z in zs)
    assert parse_z_grid("2.2,2.5", 0.1) == [complex(2.2, 0.1), complex(2.5, 0.1)]
    with pytest.raises(ValueError):
        parse_z_grid("E:0:1:0", 0.1)
    with pytest.raises(ValueError):
        parse_z_grid("a:b", 0.1)


def test_sample_rrg_and_percolate(rrg, tmp_path):
    g = read_edge_list(rrg)
    assert g.n == 200 and g.is_regular(3) and g.is_simple()
    out = tmp_path / "perc.txt"
    _run(["percolate", "--input", str(rrg), "--p", "0.5", "--seed", "2", "--out", str(out)])
    h = read_edge_list(out)
    assert h.n == 200 and 0 < h.edge_count < g.edge_count


def test_spectrum_and_verify(rrg, tmp_path):
    spec, ver = tmp_path / "s.json", tmp_path / "v.json"
    _run(["spectrum", "--input", str(rrg), "--topk", "2", "--json", str(spec)])
    _run(["verify", "--input", str(rrg), "--topk", "2", "--json", str(ver)])
    s, v = _load(spec), _load(ver)
    assert s["eigenvalues"][0] == pytest.approx(3.0)
    assert v["regular"] and v["simple"] and v["d"] == 3
    assert v["ramanujan_bound"] == pytest.approx(2 * math.sqrt(2))


def test_nb_spectrum_with_restriction(rrg, tmp_path):
    full, part = tmp_path / "f.json", tmp_path / "p.json"
    _run(["nb-spectrum", "--input", str(rrg), "--json", str(full)])
    assert _load(full)["rho"] == pytest.approx(2.0, abs=1e-6)
    assert _load(full)["mapped_mu"] == pytest.approx(3.0, abs=1e-5)
    restrict = tmp_path / "r.json"
    restrict.write_text(json.dumps({"V0": list(range(10))}))
    _run(["nb-spectrum", "--input", str(rrg), "--restrict", str(restrict), "--json", str(part)])
    assert _load(part)["rho"] < 2.0


def test_branching_stats(tmp_path):
    out = tmp_path / "b.json"
    _run(["branching-stats", "--d", "3", "--p", "0.9", "--depth", "5", "--trials", "500", "--json", str(out)])
    assert isinstance(_load(out), dict)


def test_gadget(tmp_path):
    out, js = tmp_path / "g.txt", tmp_path / "g.json"
    _run(["gadget", "--d", "3", "--mu", "2.9", "--n", "400", "--seed", "1", "--out", str(out), "--json", str(js)])
    prov = _load(js)
    assert prov["n"] == 400 and prov["girth_at_least"] == 4
    assert prov["theta"] == pytest.approx(1.7701562, abs=1e-6)
    assert read_edge_list(out).edge_count == prov["edges"]


def test_green_law(tmp_path):
    g, js = tmp_path / "g.txt", tmp_path / "g.json"
    _run(["gadget", "--d", "3", "--mu", "2.9", "--n", "60", "--seed", "2", "--out", str(g)])
    _run(["green-law", "--input", str(g), "--d", "3", "--p", "0.8850781", "--z-grid", "2.2,2.5",
          "--eta", "0.5", "--ell", "2", "--samples", "5", "--json", str(js)])
    rows = _load(js)
    assert len(rows) == 2
    for row in rows:
        assert row["mN"]["im"] > 0 and row["ward_max"] < 1e-8


def test_synth(tmp_path):
    out, rep = tmp_path / "syn.txt", tmp_path / "syn.json"
    _run(["synth", "--d", "3", "--targets", "2.9", "--base-size", "5000", "--depth", "4", "--seed", "3",
          "--out", str(out), "--report", str(rep)])
    g = read_edge_list(out)
    assert g.is_regular(3) and g.is_simple()
    assert _load(rep)["final"]["n"] == g.n


def test_errors_exit_with_code_two(tmp_path, capsys):
    out = tmp_path / "x.txt"
    assert main(["synth", "--d", "3", "--targets", "2.5", "--base-size", "100", "--out", str(out)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["sample-rrg", "--n", "3", "--d", "3", "--out", str(out)]) == 2


def test_console_entry_point(tmp_path):
    out = tmp_path / "e.txt"
    proc = subprocess.run([sys.executable, "-m", "edgeforge.cli", "sample-rrg", "--n", "10", "--d", "3",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and read_edge_list(out).n == 10
