import json
import subprocess
import sys
from pathlib import Path

import pytest

from hopfren import combinatorics
from hopfren.cli import SCHEMA, main
from hopfren.hopf import HopfElement, antipode, parse_element
from hopfren.theory import resolve_theory

BUBBLE = "V=v3,v3;X=0:s,1:s;E=0-1:s,0-1:s"
NESTED = "V=v3,v3,v3,v3;X=2:s,3:s;E=0-1:s,0-1:s,0-2:s,1-3:s,2-3:s"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


def test_check_phi3_d6(capsys):
    code, out, _ = run(capsys, "check", "phi3_d6")
    assert code == 0
    assert "all-renormalizable" in out and "compatible" in out


def test_check_toygrav(capsys):
    code, rep = run_json(capsys, "check", "toygrav")
    assert code == 0
    assert rep["schema"] == SCHEMA and rep["command"] == "check"
    text = json.dumps(rep)
    assert "non-renormalizable" in text and "loop-compatible" in text
    assert "criterion-certified cograph-divergent" in text


def test_check_writes_field_path_for_bad_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dimension": 4, "edges": [{"name": "a", "weight": "x"}], "vertices": [],
                               "couplings": []}))
    code, _, err = run(capsys, "check", str(bad))
    assert code == 2
    assert "edges[0].weight" in err


def test_check_accepts_a_file_path(capsys):
    import hopfren

    path = Path(hopfren.__file__).parent / "fixtures" / "phi4_d4.json"
    code, _, _ = run(capsys, "check", str(path))
    assert code == 0


def test_enumerate_examples(capsys):
    code, out, _ = run(capsys, "enumerate", "phi3_d6", "s", "1")
    rows = [line for line in out.splitlines() if not line.startswith("#")]
    assert code == 0 and rows == [f"2 2 {BUBBLE}"]
    code, out, _ = run(capsys, "enumerate", "phi3_d6", "v3", "1")
    rows = [line for line in out.splitlines() if not line.startswith("#")]
    assert len(rows) == 1 and rows[0].split()[:2] == ["1", "0"]
    code, out, _ = run(capsys, "enumerate", "phi3_d6", "s", "0")
    assert code == 0 and not [line for line in out.splitlines() if not line.startswith("#")]


def test_enumerate_json_is_sorted(capsys):
    code, rep = run_json(capsys, "enumerate", "phi3_d6", "s", "2", "--no-timings")
    keys = [g["key"] for g in rep["graphs"]]
    assert code == 0 and keys == sorted(keys) and len(keys) == 2


def test_resource_cap_exit(capsys):
    code, _, err = run(capsys, "enumerate", "phi3_d6", "s", "3", "--max-graphs", "2")
    assert code == 3 and err
    assert combinatorics._max_graphs == combinatorics.DEFAULT_MAX_GRAPHS


def test_cache_option_and_environment(capsys, tmp_path, monkeypatch):
    code, _, _ = run(capsys, "enumerate", "phi4_d4", "s", "2", "--cache", str(tmp_path / "opt"))
    assert code == 0
    assert combinatorics._active_cache_dir() is None
    monkeypatch.setenv("HOPFREN_CACHE", str(tmp_path / "env"))
    assert combinatorics._active_cache_dir() == tmp_path / "env"


def test_antipode_command(capsys):
    code, out, _ = run(capsys, "antipode", "phi3_d6", NESTED)
    theory = resolve_theory("phi3_d6")
    assert code == 0
    assert parse_element(theory, out) == antipode(HopfElement(theory, {(NESTED,): 1}))


def test_coproduct_command(capsys):
    code, out, _ = run(capsys, "coproduct", "phi3_d6", NESTED)
    assert code == 0
    assert f"1 * [{BUBBLE}] (x) [{BUBBLE}]" in out


def test_renorm_counterterm_anchor(capsys):
    code, out, _ = run(capsys, "renorm", "counterterm", "phi3_d6", NESTED)
    assert code == 0
    assert out.split() == "-1/4 * eps^-2 1/2 * eps^-1".split()


def test_renorm_criteria(capsys):
    code, rep = run_json(capsys, "renorm", "criteria", "toyym_1edge", "--character", "qgs_symmetric",
                         "--no-timings")
    assert code == 0 and rep["verdict"] == "pass"


@pytest.mark.parametrize("theory, suite", [
    ("phi3_d6", "hopf-axioms"), ("toyym_1edge", "qgs-ideal"), ("phi3_d6", "birkhoff"),
])
def test_verify_examples(capsys, theory, suite):
    code, rep = run_json(capsys, "verify", theory, suite, "--loops", "2")
    assert code == 0 and rep["verdict"] == "pass"
    assert "timings" in rep


def test_verify_failure_exit(capsys):
    code, out, _ = run(capsys, "verify", "phi3_d4", "hopf-axioms", "--loops", "3")
    assert code == 1
    assert "fail" in out and "first witness:" in out


def test_reports_are_byte_stable(capsys):
    argv = ["verify", "phi3_d6", "lemma12", "--loops", "2", "--format", "json", "--no-timings"]
    first = run(capsys, *argv)[1]
    second = run(capsys, *argv)[1]
    assert first == second and "timings" not in json.loads(first)


@pytest.mark.parametrize("argv", [
    ["verify", "phi3_d6", "nonsense"],
    ["bogus"],
    ["check", "no_such_theory"],
    ["renorm", "counterterm", "phi3_d6"],
])
def test_usage_errors_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        sys.exit(main(argv))
    assert exc.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hopfren", "check", "phi3_d6"], capture_output=True, text=True)
    assert proc.returncode == 0 and "all-renormalizable" in proc.stdout
