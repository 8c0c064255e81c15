import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mtwist.cli import main, run
from mtwist.geodesics import geodesic_integrate, write_curve_csv, write_variation_csv
from mtwist.library import sinusoidal_fields, static_library, unit_timelike
from mtwist.report import ReportWriteError, emit_report, format_float, load_report, to_csv, to_json, to_text

SPECS = Path(__file__).resolve().parent.parent / "specs"


def spec_path(name):
    return str(SPECS / name)


# ---------------------------------------------------------------------------
# report serialization


def test_float_formatting():
    assert format_float(1.0) == "1.0"
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1e300) == "1.0000000000000001e+300"
    assert format_float(math.nan) == "NaN"
    assert format_float(-math.inf) == "-Infinity"


def test_json_keys_sorted_and_numpy_values():
    text = to_json({"b": np.float64(2.0), "a": [np.int64(1), True, None], "c": np.array([0.5])})
    assert text == '{\n  "a": [\n    1,\n    true,\n    null\n  ],\n  "b": 2.0,\n  "c": [\n    0.5\n  ]\n}\n'


def test_json_round_trip(tmp_path):
    rep = {"summary": {"x": 0.1, "y": [1.5, -2.0]}, "table": {"columns": ["a"], "rows": [[3.25]]}}
    emit_report(rep, "json", tmp_path / "r.json")
    assert load_report(tmp_path / "r.json") == rep


def test_empty_table_artifacts(tmp_path):
    rep = {"summary": {}, "table": {"columns": ["t", "x0"], "rows": []}}
    assert to_csv(rep) == "t,x0\n"
    assert json.loads(to_json(rep))["table"]["rows"] == []
    assert to_text(rep).endswith("t  x0\n")


def test_csv_without_table_lists_keys():
    rows = list(csv.reader(io.StringIO(to_csv({"b": {"c": 1.0}, "a": "z"}))))
    assert rows == [["key", "value"], ["a", "z"], ["b.c", "1.0"]]


def test_unwritable_path_reports_path(tmp_path):
    with pytest.raises(ReportWriteError) as err:
        emit_report({"a": 1}, "json", tmp_path / "missing" / "r.json")
    assert "missing" in err.value.path


def test_unknown_format():
    with pytest.raises(ValueError):
        emit_report({}, "yaml", None)


# ---------------------------------------------------------------------------
# command line


def test_validate_ok_and_classification(capsys):
    code, rep = run(["validate", spec_path("twisted.json"), "--format", "json"])
    assert code == 0
    assert rep["summary"]["classification"] == ["twisted", "warped"]
    assert json.loads(capsys.readouterr().out)["summary"]["ok"] is True


def test_validate_failure_exit_code(tmp_path, capsys):
    d = json.loads(Path(spec_path("twisted.json")).read_text())
    d["warps"][1] = "t - 0.5"
    (tmp_path / "bad.json").write_text(json.dumps(d))
    assert run(["validate", str(tmp_path / "bad.json")])[0] == 2


def test_malformed_input_exit_code(tmp_path, capsys):
    (tmp_path / "x.json").write_text("{not json")
    assert run(["validate", str(tmp_path / "x.json")])[0] == 2
    assert run(["validate", str(tmp_path / "absent.json")])[0] == 2
    assert "mtwist: error:" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["curvature"]) == 64
    assert main(["no-such-command"]) == 64
    assert main(["geodesic", spec_path("static.json"), "--p0", "0,0", "--v0", "1,0"]) == 64
    assert "usage" in capsys.readouterr().err


def test_help_and_version(capsys):
    assert main(["--version"]) == 0
    assert "0.1.0" in capsys.readouterr().out
    assert main(["--help"]) == 0


def test_oracle_diff_random_spec(capsys):
    code, rep = run(["oracle-diff", "--tol", "1e-6", "--seed", "3", "--points", "4", "--format", "json"])
    assert code == 0 and rep["summary"]["ok"]
    assert rep["table"]["columns"][-3:] == ["curvature", "ricci", "scalar"]
    assert len(rep["table"]["rows"]) == 4


def test_oracle_diff_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["oracle-diff", "--seed", "7", "--points", "5", "--format", "json", "-o", str(a)]) == 0
    assert main(["oracle-diff", "--seed", "7", "--points", "5", "--format", "json", "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.json"
    main(["oracle-diff", "--seed", "8", "--points", "5", "--format", "json", "-o", str(c)])
    assert c.read_bytes() != a.read_bytes()


def test_einstein_solve_quarter(capsys):
    code, rep = run(["einstein-solve", "--family", "grw", "--lambda", "0.25", "--assert", "--format", "json"])
    assert code == 0
    (fam,) = rep["results"]
    assert fam["branch"] == "repeated" and fam["verified"]


def test_einstein_solve_kasner3_flagged_assert(capsys):
    code, rep = run(["einstein-solve", "--family", "kasner3", "--p", "2,0,0", "--assert"])
    assert code == 3 and not rep["summary"]["all_verified"]


def test_scalar_solve(capsys):
    code, rep = run(["scalar-solve", "--family", "grw", "--scalar", "-6", "--fiber-scalar", "0.9",
                     "--assert", "--format", "json"])
    assert code == 0 and rep["summary"]["verified"]


def test_killing_check_pass_and_assert(capsys):
    assert run(["killing-check", spec_path("linear_warp_killing.json"), "--field", "linear_warp",
                "--assert"])[0] == 0
    assert run(["killing-check", spec_path("linear_warp_killing.json"), "--field", "dilation",
                "--assert"])[0] == 3
    assert run(["killing-check", spec_path("linear_warp_killing.json"), "--field", "none"])[0] == 64


def test_tensor_commands(capsys):
    code, rep = run(["scalar", spec_path("grw_torsion.json"), "--connection", "ss", "--random", "3",
                     "--assert", "--format", "json"])
    assert code == 0 and rep["summary"]["oracle_max_relative_diff"] < 1e-6
    code, rep = run(["curvature", spec_path("twisted.json"), "--at", "0.5,0.1,0.2,0.0", "--format", "json"])
    assert code == 0 and rep["table"]["columns"][-5:] == ["l", "i", "j", "k", "value"]
    assert len(rep["table"]["rows"]) == 4**4
    code, rep = run(["ricci", spec_path("twisted.json"), "--sweep", "2", "--format", "json"])
    assert code == 0 and rep["summary"]["points"] == 16


def test_geodesic_csv_columns(capsys):
    code, _ = run(["geodesic", spec_path("static.json"), "--p0", "0,0.1,0.2,0", "--v0", "1,0.2,0.1,0",
                   "--span", "0,0.1", "--step", "0.01", "--format", "csv", "--assert"])
    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert out[0] == "t,x0,x1,x2,x3,v0,v1,v2,v3"
    assert len(out) == 12


def test_index_form_command(tmp_path, capsys):
    spec = static_library()[0]
    p0 = np.array([0.0, 0.1, 0.2, 0.0])
    c = geodesic_integrate(spec, p0, unit_timelike(spec, p0, [1.0, 0.3, 0.2, -0.1]), (0, 1))
    write_curve_csv(tmp_path / "c.csv", c)
    write_variation_csv(tmp_path / "v.csv", sinusoidal_fields(spec, c, 1, seed=2)[0])
    code, rep = run(["index-form", spec_path("static.json"), "--curve", str(tmp_path / "c.csv"),
                     "--field", str(tmp_path / "v.csv"), "--assert", "--format", "json"])
    assert code == 0
    s = rep["summary"]
    assert s["difference"] < s["threshold"]
    assert abs(s["static_index_form"] - s["index_form"]) < 1e-8


def test_finsler_ops(capsys):
    for op in ("spray", "berwald", "cartan"):
        code, rep = run(["finsler", spec_path("finsler_randers.json"), "--op", op, "--samples", "3",
                         "--format", "json"] + (["--assert"] if op != "berwald" else []))
        assert code == 0, op
    code, rep = run(["finsler", spec_path("finsler_randers.json"), "--op", "predicates", "--samples", "3",
                     "--assert"])
    assert code == 0 and rep["summary"]["all_consistent"]
    code, rep = run(["finsler", spec_path("finsler_randers.json"), "--op", "spray", "--samples", "0",
                     "--format", "csv"])
    assert code == 0 and rep["table"]["rows"] == []
    assert run(["finsler", spec_path("twisted.json"), "--op", "spray"])[0] == 64


def test_seeded_sweeps_reproduce(capsys):
    a = run(["scalar", spec_path("twisted.json"), "--random", "3", "--seed", "5", "--format", "json"])[1]
    b = run(["scalar", spec_path("twisted.json"), "--random", "3", "--seed", "5", "--format", "json"])[1]
    assert a == b


def test_report_write_error_exit(tmp_path, capsys):
    code = main(["validate", spec_path("twisted.json"), "-o", str(tmp_path / "no" / "r.txt")])
    assert code == 74


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "mtwist", "validate", spec_path("twisted.json"),
                          "--format", "csv"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.splitlines()[0] == "fiber,classification,max_fiber_derivative"
