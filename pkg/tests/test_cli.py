import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from conftest import FIXTURES, source
from spsys import __version__
from spsys.cli import main

EARLY = str(FIXTURES / "incare_early.spsys")
FINAL = str(FIXTURES / "incare_final.spsys")
REQS = str(FIXTURES / "incare_requirements.spsys")
EDITS = str(FIXTURES / "incare_merge.edits")
SCHEMA = json.loads(resources.files("spsys").joinpath("schema/report.schema.json").read_text())


def run(*argv: str):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv: str):
    code, out, err = run("--format", "json", *argv)
    data = json.loads(out)
    jsonschema.validate(data, SCHEMA)
    return code, data


@pytest.fixture
def broken(tmp_path):
    path = tmp_path / "broken.spsys"
    path.write_text(source("agent A : hybrid { owns subsystem Cont : cont hybrid; owns subsystem R : real_rec physical; }"))
    return str(path)


def test_eval_final():
    code, out, _ = run("eval", FINAL)
    assert code == 0
    assert "IIF = 6/6 (= 1.00)" in out
    assert "DTC = 2/3 (= 0.67)" in out


def test_eval_early():
    code, out, _ = run("eval", EARLY)
    assert code == 0
    assert out.splitlines()[:5] == ["IIF = 5/7 (= 0.71)", "MIF_Robot = 3/3 (= 1.00)", "MIF_FallDetector = 0/1 (= 0.00)",
                                    "DGF = 20/22 (= 0.91)", "DTC = 2/3 (= 0.67)"]
    assert "MergeControllers" in out


def test_check_broken(broken):
    code, out, err = run("check", broken)
    assert code == 1
    lines = [line for line in err.splitlines() if " E004 " in line]
    assert len(lines) == 1
    assert lines[0].startswith("error E004 [A]")


def test_check_final_reports_one_w101():
    code, out, err = run("check", FINAL)
    assert code == 0
    assert err.splitlines() == [line for line in err.splitlines() if "W101" in line]
    assert len(err.splitlines()) == 1
    assert out == "ok: incare (1 warning(s))\n"


def test_setups_final():
    code, out, _ = run("setups", FINAL)
    assert code == 0
    assert len(out.splitlines()) == 6


def test_setups_functional_flag():
    _, out, _ = run("setups", FINAL, "--functional")
    assert out.splitlines()[-1] == "functional configurations = 2"


def test_parse_failure_exit_code(tmp_path):
    path = tmp_path / "bad.spsys"
    path.write_text('model "m" { requirements { req A : functional magical; } structure {} }')
    code, _, err = run("check", str(path))
    assert code == 2
    assert "P020" in err


@pytest.mark.parametrize("argv", [[], ["frobnicate", FINAL], ["check"], ["trace", FINAL], ["--format", "xml", "check", FINAL],
                                  ["check", "/no/such/file.spsys"]])
def test_usage_errors(argv):
    code, _, _ = run(*argv)
    assert code == 3


def test_strict_promotes_warnings():
    assert run("check", FINAL)[0] == 0
    code, _, err = run("--strict", "check", FINAL)
    assert code == 4
    assert "strict" in err


def test_strict_undefined_factor(tmp_path):
    path = tmp_path / "empty.spsys"
    path.write_text('model "m" { requirements {} structure {} }')
    assert run("eval", str(path))[0] == 0
    code, _, err = run("eval", str(path), "--strict")
    assert code == 4
    assert "IIF is undefined" in err


def test_flags_accepted_after_subcommand():
    code, data = run_json("eval", FINAL)
    code2, out2, _ = run("eval", FINAL, "--format", "json")
    assert json.loads(out2) == data


def test_json_envelope():
    code, data = run_json("eval", FINAL)
    assert code == 0
    assert data["toolVersion"] == __version__
    assert data["modelName"] == "incare"
    assert data["command"] == "eval"
    assert len(data["inputDigest"]) == 64
    assert data["factors"]["IIF"] == {"numerator": 6, "denominator": 6, "defined": True, "rounded": "1.00"}
    assert data["diagnostics"][0]["code"] == "W101"


@pytest.mark.parametrize("argv", [
    ["check", FINAL], ["eval", EARLY], ["setups", FINAL], ["trace", FINAL, "--element", "TiagoPhy"],
    ["scaffold", REQS], ["whatif", EARLY, "--edits", EDITS], ["report", EARLY],
])
def test_every_command_emits_schema_valid_json(argv):
    code, data = run_json(*argv)
    assert code == 0
    assert data["status"] == "ok"


def test_json_on_failure_is_schema_valid(broken):
    code, data = run_json("check", broken)
    assert code == 1
    assert data["status"] == "invalid"


def test_report_equals_individual_payloads():
    _, report = run_json("report", EARLY)
    _, evaluated = run_json("eval", EARLY)
    _, setups = run_json("setups", EARLY)
    assert report["factors"] == evaluated["factors"]
    assert report["findings"] == evaluated["findings"]
    assert report["setups"] == setups["setups"]
    assert report["diagnostics"] == evaluated["diagnostics"]


def test_report_writes_directory(tmp_path):
    outdir = tmp_path / "out"
    code, out, _ = run("report", FINAL, "-o", str(outdir))
    assert code == 0
    assert (outdir / "report.txt").read_text() == out
    data = json.loads((outdir / "report.json").read_text())
    jsonschema.validate(data, SCHEMA)
    assert data["setups"]["count"] == 6


def test_whatif_text():
    code, out, _ = run("whatif", EARLY, "--edits", EDITS)
    assert code == 0
    assert "IIF: 5/7 (= 0.71) -> 6/6 (= 1.00)" in out


def test_whatif_precondition_failure(tmp_path):
    edits = tmp_path / "e.edits"
    edits.write_text("make_hybrid RobotIf\n")
    code, _, err = run("whatif", FINAL, "--edits", str(edits))
    assert code == 1
    assert "edit 1" in err


def test_whatif_bad_script(tmp_path):
    edits = tmp_path / "e.edits"
    edits.write_text("explode everything\n")
    assert run("whatif", FINAL, "--edits", str(edits))[0] == 3


def test_trace_text():
    code, out, _ = run("trace", FINAL, "--element", "TiagoPhy.Lidar")
    assert code == 0
    assert out == "TiagoPhy.Lidar <- allocate <- HwLidar -> satisfies -> Navigation\n"


def test_trace_unknown_element():
    assert run("trace", FINAL, "--element", "Nope")[0] == 3


def test_scaffold_output_checks_clean(tmp_path):
    target = tmp_path / "scaffold.spsys"
    code, out, _ = run("scaffold", REQS, "-o", str(target))
    assert code == 0
    code, _, err = run("check", str(target))
    assert code == 0
    assert "error" not in err


def test_output_is_deterministic():
    for argv in (["report", EARLY], ["--format", "json", "report", EARLY], ["scaffold", REQS]):
        assert run(*argv) == run(*argv)


def test_subprocess_entry_point_and_streams():
    result = subprocess.run([sys.executable, "-m", "spsys", "eval", FINAL], capture_output=True, text=True)
    assert result.returncode == 0
    assert "IIF = 6/6 (= 1.00)" in result.stdout
    assert "W101" in result.stderr
    assert "warning W101" not in result.stdout
    assert "\x1b[" not in result.stderr


def test_color_is_disabled_by_env(monkeypatch):
    class Tty(io.StringIO):
        def isatty(self):
            return True

    err = Tty()
    main(["check", FINAL], io.StringIO(), err)
    assert "\x1b[" in err.getvalue()
    monkeypatch.setenv("SPSYS_NO_COLOR", "1")
    err = Tty()
    main(["check", FINAL], io.StringIO(), err)
    assert "\x1b[" not in err.getvalue()
    err = Tty()
    monkeypatch.delenv("SPSYS_NO_COLOR")
    main(["--no-color", "check", FINAL], io.StringIO(), err)
    assert "\x1b[" not in err.getvalue()
