"""Command-line interface: subcommands, exit codes, output formats."""

import json
import subprocess
import sys

import pytest

from tracecheck.cli import main


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def happy_run(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, out, err = run_cli(
        ["run", "twophase", "--rms", "2", "--seed", "3",
         "--out", str(out_dir)], capsys)
    assert code == 0
    return out_dir


def test_run_reports_outputs(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, out, err = run_cli(
        ["run", "twophase", "--rms", "2", "--seed", "1",
         "--out", str(out_dir)], capsys)
    assert code == 0
    assert "merged.ndjson" in out
    assert "manifest" in out
    assert (out_dir / "merged.ndjson").exists()
    assert (out_dir / "manifest.json").exists()
    assert (out_dir / "tm.ndjson").exists()


def test_run_honors_trace_path_env(tmp_path, capsys, monkeypatch):
    target = tmp_path / "from-env"
    monkeypatch.setenv("TRACE_PATH", str(target))
    code, out, _ = run_cli(["run", "twophase", "--seed", "0"], capsys)
    assert code == 0
    assert target.exists()


def test_run_and_validate_accepts(tmp_path, capsys):
    code, out, err = run_cli(
        ["run", "twophase", "--rms", "3", "--seed", "5",
         "--out", str(tmp_path / "r"), "--and-validate"], capsys)
    assert code == 0
    assert "accepted" in out


def test_run_counter_bug_and_validate_rejects(tmp_path, capsys):
    code, out, err = run_cli(
        ["run", "twophase", "--rms", "3", "--seed", "0",
         "--bug", "counter", "--force-resend",
         "--resend-logging", "silent",
         "--out", str(tmp_path / "r"), "--and-validate"], capsys)
    assert code == 1
    assert "rejected" in out
    assert "TMCommit" in out


def test_run_tokenring_and_validate_uses_manifest_composition(tmp_path,
                                                              capsys):
    code, out, err = run_cli(
        ["run", "tokenring", "--n", "3", "--seed", "2",
         "--out", str(tmp_path / "r"), "--and-validate"], capsys)
    assert code == 0
    assert "accepted" in out


def test_validate_accepted(happy_run, capsys):
    code, out, err = run_cli(
        ["validate", "--spec", "twophase:2",
         "--trace", str(happy_run / "merged.ndjson")], capsys)
    assert code == 0
    assert out.startswith("accepted")


def test_validate_dfs_and_json(happy_run, capsys):
    code, out, err = run_cli(
        ["validate", "--spec", "twophase:2", "--search", "dfs", "--json",
         "--trace", str(happy_run / "merged.ndjson")], capsys)
    assert code == 0
    obj = json.loads(out)
    assert obj["status"] == "accepted"
    assert obj["search"] == "dfs"


def test_validate_rejects_against_wrong_spec(happy_run, capsys):
    # same protocol, different RM population: the trace cannot fit
    code, out, err = run_cli(
        ["validate", "--spec", "twophase:rm-0,other",
         "--trace", str(happy_run / "merged.ndjson")], capsys)
    assert code == 1
    assert "rejected" in out


def test_validate_inconclusive_on_tiny_budget(happy_run, capsys):
    code, out, err = run_cli(
        ["validate", "--spec", "twophase:2", "--max-states", "1",
         "--trace", str(happy_run / "merged.ndjson")], capsys)
    assert code == 2
    assert "inconclusive" in out


def test_validate_writes_dot(happy_run, tmp_path, capsys):
    dot_file = tmp_path / "graph.dot"
    code, out, err = run_cli(
        ["validate", "--spec", "twophase:2", "--dot", str(dot_file),
         "--trace", str(happy_run / "merged.ndjson")], capsys)
    assert code == 0
    assert dot_file.read_text().startswith("digraph")


def test_validate_unknown_event_exits_usage_with_hint(tmp_path, capsys):
    out_dir = tmp_path / "ring"
    code, _, _ = run_cli(
        ["run", "tokenring", "--n", "3", "--seed", "2",
         "--out", str(out_dir)], capsys)
    assert code == 0
    code, out, err = run_cli(
        ["validate", "--spec", "tokenring:3",
         "--trace", str(out_dir / "merged.ndjson")], capsys)
    assert code == 3
    assert "--compose" in err

    code, out, err = run_cli(
        ["validate", "--spec", "tokenring:3",
         "--compose", str(out_dir / "manifest.json"),
         "--trace", str(out_dir / "merged.ndjson")], capsys)
    assert code == 0


def test_validate_compose_direct_mapping(tmp_path, capsys):
    out_dir = tmp_path / "ring"
    run_cli(["run", "tokenring", "--n", "3", "--seed", "2",
             "--out", str(out_dir)], capsys)
    mapping = tmp_path / "compose.json"
    mapping.write_text(json.dumps(
        {"DetectAndInit": ["DetectTermination", "InitiateProbe"]}))
    code, out, err = run_cli(
        ["validate", "--spec", "tokenring:3", "--compose", str(mapping),
         "--trace", str(out_dir / "merged.ndjson")], capsys)
    assert code == 0


def test_validate_allow_stutter_flag(tmp_path, capsys):
    out_dir = tmp_path / "r"
    run_cli(["run", "twophase", "--rms", "2", "--seed", "0",
             "--delay", "10,10", "--work", "1,1", "--timeout", "12",
             "--out", str(out_dir)], capsys)
    trace = str(out_dir / "merged.ndjson")
    code, _, _ = run_cli(
        ["validate", "--spec", "twophase:2", "--trace", trace], capsys)
    assert code == 1
    code, _, _ = run_cli(
        ["validate", "--spec", "twophase:2", "--allow-stutter",
         "--trace", trace], capsys)
    assert code == 0


def test_usage_errors_exit_three(tmp_path, capsys):
    cases = [
        ["validate", "--spec", "nosuch:2", "--trace", "x.ndjson"],
        ["validate", "--spec", "twophase:", "--trace", "x.ndjson"],
        ["validate", "--spec", "tokenring:x", "--trace", "x.ndjson"],
        ["validate", "--spec", "twophase:2",
         "--trace", str(tmp_path / "missing.ndjson")],
        ["run", "twophase", "--rms", "0", "--out", str(tmp_path / "o")],
        ["run", "twophase", "--delay", "oops",
         "--out", str(tmp_path / "o2")],
        ["run", "tokenring", "--n", "1", "--out", str(tmp_path / "o3")],
    ]
    for argv in cases:
        code, out, err = run_cli(argv, capsys)
        assert code == 3, argv
        assert "error:" in err


def test_bad_compose_file_exits_three(happy_run, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    code, _, err = run_cli(
        ["validate", "--spec", "twophase:2", "--compose", str(bad),
         "--trace", str(happy_run / "merged.ndjson")], capsys)
    assert code == 3
    assert "composition" in err

    worse = tmp_path / "worse.json"
    worse.write_text('{"Ev": "not-a-list"}')
    code, _, err = run_cli(
        ["validate", "--spec", "twophase:2", "--compose", str(worse),
         "--trace", str(happy_run / "merged.ndjson")], capsys)
    assert code == 3


def test_merge_to_stdout_and_file(happy_run, tmp_path, capsys):
    files = [str(happy_run / "tm.ndjson"),
             str(happy_run / "rm-0.ndjson"),
             str(happy_run / "rm-1.ndjson")]
    code, out, _ = run_cli(["merge", *files], capsys)
    assert code == 0
    clocks = [json.loads(line)["clock"] for line in out.splitlines()]
    assert clocks == sorted(clocks)

    target = tmp_path / "merged.ndjson"
    code, out, _ = run_cli(["merge", *files, "-o", str(target)], capsys)
    assert code == 0
    assert target.exists()
    assert str(target) in out


def test_schema_check_clean_and_dirty(happy_run, tmp_path, capsys):
    code, out, _ = run_cli(
        ["schema-check", str(happy_run / "merged.ndjson")], capsys)
    assert code == 0
    assert out.startswith("ok:")

    dirty = tmp_path / "dirty.ndjson"
    dirty.write_text('{"clock":0}\n'
                     'not json\n'
                     '{"clock":-1}\n'
                     '{"event":"NoClock"}\n')
    code, out, _ = run_cli(["schema-check", str(dirty)], capsys)
    assert code == 1
    assert "line 2" in out
    assert "3 of 4" in out


def test_schema_check_truncates_long_problem_lists(tmp_path, capsys):
    many = tmp_path / "many.ndjson"
    many.write_text("\n".join('{"clock":-1}' for _ in range(30)) + "\n")
    code, out, _ = run_cli(["schema-check", str(many)], capsys)
    assert code == 1
    assert "and 10 more problem(s)" in out


def test_console_script_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "tracecheck.cli", "run", "twophase",
         "--rms", "2", "--seed", "1", "--out", str(tmp_path / "r"),
         "--and-validate"],
        capture_output=True, text=True)
    assert result.returncode == 0
    assert "accepted" in result.stdout
