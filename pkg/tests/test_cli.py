import io
import json

import pytest

from fragsolve.cli import EXIT_ERROR, EXIT_OK, EXIT_TIME_LIMIT, main
from fragsolve.instance import small_paper_instance


@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_paper_instance().to_json()))
    return str(path)


def test_solve_writes_report(small_file, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["solve", small_file, "--variant", "DF", "--json-out", str(out)]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    saved = json.loads(out.read_text())
    assert printed == saved
    assert saved["status"] == "optimal" and saved["vehicles"] == 1
    assert saved["cost"] == pytest.approx(166.74)
    assert saved["routes"] == [[0, 1, 4, 2, 3, 5, 6, 7]]


def test_oracle_output(small_file, capsys):
    assert main(["oracle", small_file]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == ["vehicles 1", "cost 166.74", "route 0 1 4 2 3 5 6 7"]


def test_fragments_dump(small_file, capsys):
    assert main(["fragments", small_file]) == EXIT_OK
    assert len(json.loads(capsys.readouterr().out)) == 13


def test_gen_then_solve_from_stdin(monkeypatch, capsys):
    assert main(["gen", "--pairs", "3", "--seed", "7"]) == EXIT_OK
    text = capsys.readouterr().out
    assert main(["gen", "--pairs", "3", "--seed", "7"]) == EXIT_OK
    assert capsys.readouterr().out == text
    runs = []
    for _ in range(2):
        monkeypatch.setattr("sys.stdin", io.StringIO(text))
        assert main(["solve", "-"]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        for p in data["phases"]:
            p.pop("seconds")
        runs.append(data)
    assert runs[0] == runs[1] and runs[0]["status"] == "optimal"


def test_exit_codes(small_file, tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.json")]) == EXIT_ERROR
    assert main(["solve", small_file, "--variant", "Z"]) == EXIT_ERROR
    assert main(["solve", small_file, "--time-limit", "0"]) == EXIT_ERROR
    assert main(["gen", "--pairs", "-1", "--seed", "0"]) == EXIT_ERROR
    assert main(["--help"]) == EXIT_OK
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["oracle", str(bad)]) == EXIT_ERROR
    assert "fragsolve: error" in capsys.readouterr().err


def test_time_limit_exit_code(small_file, monkeypatch, capsys):
    from fragsolve import driver
    monkeypatch.setattr(driver, "_check_time", lambda deadline: (_ for _ in ()).throw(driver._TimeUp()))
    assert main(["solve", small_file, "--time-limit", "1"]) == EXIT_TIME_LIMIT
    assert json.loads(capsys.readouterr().out)["status"] == "time_limit"


def test_log_level_validation(small_file, monkeypatch, capsys):
    monkeypatch.setenv("FRAGSOLVE_LOG", "loud")
    assert main(["oracle", small_file]) == EXIT_ERROR
    assert "FRAGSOLVE_LOG" in capsys.readouterr().err
    monkeypatch.setenv("FRAGSOLVE_LOG", "info")
    assert main(["oracle", small_file]) == EXIT_OK
