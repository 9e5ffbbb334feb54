import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from submanifold import __version__
from submanifold.catalog import catalog_entries, get_entry
from submanifold.cli import RunConfig, emit_report, main, run_verification
from submanifold.errors import ConfigError

NUM = {"type": "number"}
NUM_OR_NULL = {"type": ["number", "null"]}
RESIDUAL_MAP = {
    "type": "object",
    "properties": {k: NUM_OR_NULL for k in ("gauss", "codazzi", "ricci", "reconstruction")},
    "required": ["gauss", "codazzi", "ricci", "reconstruction"],
}
SCHEMA = {
    "type": "object",
    "required": ["embedding", "n", "D", "signature", "points", "aggregate", "verdict",
                 "config", "version"],
    "properties": {
        "embedding": {"type": "string"},
        "n": {"type": "integer"},
        "D": {"type": "integer"},
        "signature": {"type": "array", "items": {"enum": [1, -1]}},
        "points": {"type": "array", "items": {
            "type": "object",
            "required": ["x", "gauss", "codazzi", "ricci", "reconstruction", "scale",
                         "degenerate"],
            "properties": {
                "x": {"type": "array", "items": NUM},
                "gauss": NUM_OR_NULL, "codazzi": NUM_OR_NULL, "ricci": NUM_OR_NULL,
                "reconstruction": NUM_OR_NULL, "scale": NUM_OR_NULL,
                "degenerate": {"type": "boolean"},
            },
        }},
        "aggregate": {"type": "object", "required": ["max", "mean"],
                      "properties": {"max": RESIDUAL_MAP, "mean": RESIDUAL_MAP}},
        "verdict": {"enum": ["pass", "fail", "degenerate"]},
        "config": {"type": "object"},
        "version": {"type": "string"},
    },
}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_plane_passes_with_zero_residuals(capsys):
    code, out, _ = run(capsys, "verify", "catalog:euclidean-plane", "--points", "10",
                       "--seed", "1", "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert report["verdict"] == "pass"
    assert all(p[k] == 0 for p in report["points"]
               for k in ("gauss", "codazzi", "ricci", "reconstruction"))


def test_sphere_passes(capsys):
    code, out, _ = run(capsys, "verify", "catalog:unit-sphere", "--points", "100",
                       "--seed", "0", "--tol", "1e-7")
    assert code == 0
    assert out.rstrip().endswith("PASS")


def test_sphere_corruption_fails(capsys):
    code, out, _ = run(capsys, "verify", "catalog:unit-sphere", "--corrupt", "b:scale:1.001",
                       "--format", "json")
    assert code == 1
    report = json.loads(out)
    assert report["verdict"] == "fail"
    assert report["config"]["corrupt"] == "b:scale:1.001"
    assert report["aggregate"]["max"]["gauss"] == pytest.approx(2e-3, rel=0.01)


def test_json_schema_and_fields(capsys):
    code, out, _ = run(capsys, "verify", "catalog:de-sitter", "--points", "5", "--format", "json")
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    assert (report["n"], report["D"], report["signature"]) == (4, 5, [-1, 1, 1, 1, 1])
    assert report["version"] == __version__
    assert report["config"] == {"input": "catalog:de-sitter", "points": 5, "seed": 0,
                                "tol": 1e-7, "corrupt": None}
    assert len(report["points"]) == 5 and report["skipped"] == 0


def test_csv_format(capsys):
    code, out, _ = run(capsys, "verify", "catalog:unit-sphere", "--points", "4",
                       "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["x_theta", "x_phi", "gauss", "codazzi", "ricci", "reconstruction",
                       "scale", "degenerate"]
    assert len(rows) == 5
    report = run_verification(RunConfig("catalog:unit-sphere", points=4))
    for row, point in zip(rows[1:], report.points):
        assert float(row[0]) == point["x"][0]            # 17 digits round-trip
        assert float(row[2]) == point["gauss"]
        assert row[-1] == "false"


def test_text_format_shape():
    report = run_verification(RunConfig("catalog:cylinder", points=3))
    text = emit_report(report, "text")
    lines = text.splitlines()
    assert lines[0].startswith("embedding   cylinder")
    assert [ln.split()[0] for ln in lines[4:8]] == ["gauss", "codazzi", "ricci", "reconstruction"]
    assert lines[-1] == "PASS"


def test_reports_are_reproducible(capsys):
    args = ["verify", "catalog:schwarzschild-6d", "--points", "8", "--seed", "3",
            "--format", "json"]
    first = run(capsys, *args)[1]
    second = run(capsys, *args)[1]
    assert first == second
    parallel = run(capsys, *args, "--jobs", "2")[1]
    assert parallel == first


def test_jobs_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("SUBMANIFOLD_JOBS", "2")
    a = run(capsys, "verify", "catalog:cylinder", "--points", "6", "--format", "json")[1]
    monkeypatch.setenv("SUBMANIFOLD_JOBS", "0")
    b = run(capsys, "verify", "catalog:cylinder", "--points", "6", "--format", "json")[1]
    assert a == b
    monkeypatch.setenv("SUBMANIFOLD_JOBS", "many")
    code, _, err = run(capsys, "verify", "catalog:cylinder", "--points", "6")
    assert code == 2 and "SUBMANIFOLD_JOBS" in err


def test_seed_changes_points():
    a = run_verification(RunConfig("catalog:cylinder", points=3, seed=1))
    b = run_verification(RunConfig("catalog:cylinder", points=3, seed=2))
    assert a.points[0]["x"] != b.points[0]["x"]


@pytest.mark.parametrize("argv", [
    ["verify", "catalog:nowhere"],
    ["verify", "/nonexistent/file.emb"],
    ["verify", "catalog:unit-sphere", "--corrupt", "b:scale"],
    ["verify", "catalog:unit-sphere", "--corrupt", "q:scale:1"],
    ["verify", "catalog:unit-sphere", "--corrupt", "b:scale:-2"],
    ["verify", "catalog:unit-sphere", "--points", "0"],
    ["verify", "catalog:unit-sphere", "--tol", "-1"],
    ["verify", "catalog:unit-sphere", "--jobs", "-1"],
    ["catalog", "show", "nowhere"],
])
def test_input_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("error:")
    assert out == ""


def test_bad_dsl_file_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.emb"
    path.write_text('embedding "b" {\n  chart x in (0, 1);\n  ambient signature (+, +);\n'
                    '  map x; sin(y);\n}\n')
    code, _, err = run(capsys, "verify", str(path))
    assert code == 2
    assert "4:14" in err and "'y'" in err


def test_argparse_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["verify", "catalog:unit-sphere", "--format", "xml"])
    assert info.value.code == 2


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig("x", points=0)
    with pytest.raises(ConfigError):
        RunConfig("x", tol=float("nan"))
    with pytest.raises(ConfigError):
        RunConfig("x", format="yaml")


def test_degenerate_points_are_skipped(tmp_path, capsys):
    # a sphere chart squeezed against the pole: every sample is degenerate
    path = tmp_path / "pole.emb"
    path.write_text(get_entry("unit-sphere").source.replace("(0.1, 3.04)", "(1e-10, 2e-10)"))
    code, out, err = run(capsys, "verify", str(path), "--points", "5", "--format", "json")
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    assert code == 1 and report["verdict"] == "degenerate"
    assert report["skipped"] == 5
    assert all(p["degenerate"] and p["gauss"] is None for p in report["points"])
    assert "5 of 5 points skipped" in err


@pytest.mark.parametrize("lo,verdict", [(-0.05, "pass"), (-1.0, "degenerate")])
def test_degenerate_fraction_threshold(tmp_path, lo, verdict):
    # log(x) cannot be evaluated for x <= 0, so that slice of the chart is skipped
    path = tmp_path / "partial.emb"
    path.write_text(f'embedding "partial" {{ chart x in ({lo}, 1), y in (0, 1);'
                    ' ambient signature (+, +, +); map x; y; y^2 + 0*log(x); }')
    report = run_verification(RunConfig(str(path), points=50))
    assert 0 < report.skipped < 50
    assert report.verdict == verdict
    assert report.exit_code == (0 if verdict == "pass" else 1)
    good = [p for p in report.points if not p["degenerate"]]
    assert report.aggregate["max"]["gauss"] == max(p["gauss"] for p in good)


def test_file_input_matches_catalog(tmp_path, capsys):
    path = tmp_path / "sphere.emb"
    path.write_text(get_entry("unit-sphere").source)
    from_file = run(capsys, "verify", str(path), "--points", "5", "--format", "csv")[1]
    from_catalog = run(capsys, "verify", "catalog:unit-sphere", "--points", "5",
                       "--format", "csv")[1]
    assert from_file == from_catalog


def test_catalog_commands(capsys):
    code, out, _ = run(capsys, "catalog", "list")
    assert code == 0
    names = [line.split()[0] for line in out.splitlines()]
    assert names == [e.name for e in catalog_entries()]
    code, out, _ = run(capsys, "catalog", "show", "schwarzschild-6d")
    assert code == 0 and out == get_entry("schwarzschild-6d").source


@pytest.mark.parametrize("entry", catalog_entries(), ids=lambda e: e.name)
def test_every_catalog_entry_exits_zero(entry, capsys):
    code, out, _ = run(capsys, "verify", f"catalog:{entry.name}", "--points", "20")
    assert code == 0, out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "submanifold", "verify",
                           "catalog:euclidean-plane", "--points", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.rstrip().endswith("PASS")
