import csv
import json

import pytest
import yaml

from capstab import report
from capstab.cli import main
from capstab.config import load_config, validate
from capstab.errors import ConfigError, NumericalError


def _write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data) if name.endswith(".json") else yaml.safe_dump(data))
    return str(p)


FLAT = {"surface": {"family": "flat_disk", "params": {"c": 0.0}}, "mesh_level": 1}


def test_defaults_and_formats(tmp_path):
    for name in ("a.json", "a.yaml"):
        cfg = load_config(_write(tmp_path, name, FLAT))
        assert cfg["ambient"] == {"space": "euclidean", "radius": 1.0}
        assert cfg["spectrum"]["count"] == 12 and cfg["mesh_level"] == 1


@pytest.mark.parametrize("raw", [
    {"surfaces": {}},
    {"surface": {"family": "flat_disk", "param": {}}},
    {"surface": {"family": "trinoid"}},
    {"surface": {"family": "flat_disk", "mesh": "x.off"}},
    {"ambient": {"space": "lorentzian"}},
    {"ambient": {"radius": -1}},
    {"mesh_level": 9},
    {"mesh_level": True},
    {"tolerances": {"eps_rel": 0}},
    {"tolerances": {"guard_factor": 0.5}},
    {"spectrum": {"count": 2.5}},
    {"sweep": {"parameter": "c"}},
    {"sweep": {"parameter": "c", "values": []}},
    [],
])
def test_validation_errors(raw):
    with pytest.raises(ConfigError):
        validate(raw)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("surface: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    txt = tmp_path / "c.txt"
    txt.write_text("{}")
    with pytest.raises(ConfigError):
        load_config(txt)


def test_analyze_writes_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, "flat.yaml", FLAT)
    out = tmp_path / "out"
    assert main(["analyze", "--config", cfg, "--out-dir", str(out)]) == 0
    rep = json.loads((out / "analysis.json").read_text())
    assert rep["verdict"] == "stable" and rep["spectrum"]["constrained_index"] == 0
    assert rep["index_bracket"]["bracket"] == [0, 1]
    assert rep["structural"]["assembly_symmetric"]
    assert rep["topology"]["violations"] == []
    rows = list(csv.reader(open(out / "analysis_spectrum.csv")))
    assert rows[0] == ["kind", "index", "eigenvalue"] and len(rows) > 12
    for svg in ("analysis_spectrum.svg", "analysis_witness.svg"):
        assert (out / svg).read_text().lstrip().startswith("<?xml")
    assert "verdict stable" in capsys.readouterr().out


def test_analyze_mesh_file_and_matrices(tmp_path):
    from capstab.mesh import write_mesh
    from capstab.surface import SurfaceFamily, build_family
    s = build_family(SurfaceFamily.make("catenoid", critical=True), level=0)
    write_mesh(s.mesh, tmp_path / "cat.off")
    cfg = _write(tmp_path, "m.json", {"surface": {"mesh": "cat.off"}, "output": {"export_matrices": True,
                                                                                  "figures": False}})
    out = tmp_path / "out"
    assert main(["analyze", "--config", cfg, "--out-dir", str(out)]) == 0
    rep = json.loads((out / "analysis.json").read_text())
    assert rep["verdict"] == "unstable"
    assert rep["topology"]["boundary_components"] == 2
    assert any((out / "matrices").iterdir())


def test_exit_codes(tmp_path, monkeypatch):
    assert main(["analyze"]) == 2
    assert main(["verify", "--suite", "nonsense"]) == 2
    assert main(["analyze", "--config", str(tmp_path / "none.yaml")]) == 2
    cfg = _write(tmp_path, "bad.yaml", {"surface": {"family": "flat_disk", "params": {"c": 1.5}}, "mesh_level": 0})
    assert main(["analyze", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2
    monkeypatch.setenv("CAPSTAB_LOG", "loud")
    assert main(["analyze", "--config", cfg]) == 2


def test_sweep_records_point_errors(tmp_path):
    cfg = _write(tmp_path, "sw.yaml", {**FLAT, "sweep": {"parameter": "c", "values": [0.0, 1.5]}})
    out = tmp_path / "sw"
    assert main(["sweep", "--config", cfg, "--out-dir", str(out), "--threads", "2"]) == 0
    rows = list(csv.DictReader(open(out / "sweep.csv")))
    assert rows[0]["verdict"] == "stable" and rows[0]["error"] == ""
    assert rows[1]["verdict"] == "error" and "offset" in rows[1]["error"]
    assert (out / "sweep.svg").exists()


def test_verify_exit_codes(tmp_path, monkeypatch):
    def fake(checks=(), exc=None):
        def job():
            if exc is not None:
                raise exc
            return [{"id": "x", "residual_max": v, "tolerance": 1.0, "pass": v <= 1.0} for v in checks]
        return lambda suite: [("job", job)]

    out = ["--out-dir", str(tmp_path)]
    monkeypatch.setattr(report, "suite_jobs", fake([0.5]))
    assert main(["verify", "--suite", "euclidean", *out]) == 0
    monkeypatch.setattr(report, "suite_jobs", fake([0.5, 2.0]))
    assert main(["verify", "--suite", "euclidean", *out]) == 1
    monkeypatch.setattr(report, "suite_jobs", fake(exc=NumericalError("boom")))
    assert main(["verify", "--suite", "euclidean", *out]) == 3
    rep = json.loads((tmp_path / "verify_euclidean.json").read_text())
    assert rep["errors"][0]["exit_code"] == 3 and not rep["pass"]
