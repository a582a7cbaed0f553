"""Command-line interface: exit codes, output formats, byte-stable JSON."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from carekb.cli import main
from carekb.session import SessionStore, finalize_step1, override_factor
from carekb.tribool import TriBool

from conftest import REVIEW_PATTERNS, review_kb_document, review_record_document


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "kb.json").write_text(json.dumps(review_kb_document()))
    (tmp_path / "record.json").write_text(json.dumps(review_record_document()))
    (tmp_path / "patterns.json").write_text(json.dumps(REVIEW_PATTERNS))
    return tmp_path


def snapshot_kb(runner, workdir):
    result = runner.invoke(
        main,
        ["kb", "snapshot", str(workdir / "kb.json"), "--registry", str(workdir / "reg")],
    )
    assert result.exit_code == 0, result.output
    return result


# --- kb lint ----------------------------------------------------------------------


def test_lint_clean_file(runner, workdir):
    result = runner.invoke(main, ["kb", "lint", str(workdir / "kb.json")])
    assert result.exit_code == 0
    assert result.output == "no findings\n"


def test_lint_warnings_exit_zero(runner, workdir):
    doc = review_kb_document()
    doc["factors"].append({"name": "spare", "question": "Unused?"})
    path = workdir / "warned.json"
    path.write_text(json.dumps(doc))
    result = runner.invoke(main, ["kb", "lint", str(path)])
    assert result.exit_code == 0
    assert "UNUSED_FACTOR" in result.output
    assert "spare" in result.output


def test_lint_errors_exit_three(runner, workdir):
    doc = review_kb_document()
    doc["recommendations"][0]["relevance_rule"] = "pregnant AND NOT pregnant"
    path = workdir / "broken.json"
    path.write_text(json.dumps(doc))
    result = runner.invoke(main, ["kb", "lint", str(path)])
    assert result.exit_code == 3
    assert "UNSATISFIABLE_RULE" in result.output


def test_lint_unparseable_file_exit_one(runner, workdir):
    path = workdir / "bad.json"
    path.write_text("{not json")
    result = runner.invoke(main, ["kb", "lint", str(path)])
    assert result.exit_code == 1


def test_lint_missing_file_is_usage_error(runner, workdir):
    result = runner.invoke(main, ["kb", "lint", str(workdir / "absent.json")])
    assert result.exit_code == 2


def test_lint_exhaustive_limit_option(runner, workdir):
    names = [f"a{i}" for i in range(1, 14)]
    doc = {
        "namespace": "wide.demo",
        "version": "1.0",
        "factors": [{"name": n, "question": f"{n}?"} for n in names],
        "recommendations": [
            {
                "id": "wide",
                "title": "Wide",
                "category": "t",
                "relevance_rule": "(a1 AND NOT a1) AND " + " AND ".join(names[1:]),
                "completion_rule": " AND ".join(names),
            }
        ],
    }
    path = workdir / "wide.json"
    path.write_text(json.dumps(doc))
    sampled = runner.invoke(main, ["kb", "lint", str(path)])
    assert sampled.exit_code == 0  # sampled verdicts are warnings
    assert "sampled" in sampled.output
    exhaustive = runner.invoke(
        main, ["kb", "lint", str(path), "--exhaustive-limit", "20"]
    )
    assert exhaustive.exit_code == 3


# --- kb snapshot ------------------------------------------------------------------


def test_snapshot_registers_and_prints_ref_and_hash(runner, workdir):
    result = snapshot_kb(runner, workdir)
    line = result.output.strip()
    assert line.startswith("registered onc.review@1.0 ")
    digest = line.split()[-1]
    assert len(digest) == 64 and set(digest) <= set("0123456789abcdef")
    assert (workdir / "reg" / "index.json").exists()


def test_snapshot_duplicate_version_fails(runner, workdir):
    snapshot_kb(runner, workdir)
    result = runner.invoke(
        main,
        ["kb", "snapshot", str(workdir / "kb.json"), "--registry", str(workdir / "reg")],
    )
    assert result.exit_code == 1
    assert "already registered" in result.output


def test_snapshot_blocked_by_lint_errors(runner, workdir):
    doc = review_kb_document()
    doc["recommendations"][0]["relevance_rule"] = "pregnant AND NOT pregnant"
    path = workdir / "broken.json"
    path.write_text(json.dumps(doc))
    result = runner.invoke(
        main, ["kb", "snapshot", str(path), "--registry", str(workdir / "reg")]
    )
    assert result.exit_code == 3
    assert "UNSATISFIABLE_RULE" in result.output
    assert "snapshot blocked by lint errors" in result.output
    assert not (workdir / "reg" / "index.json").exists()


# --- eval ------------------------------------------------------------------------------


def eval_args(workdir, *extra):
    return [
        "eval",
        "--record",
        str(workdir / "record.json"),
        "--stack",
        "onc.review@1.0",
        "--registry",
        str(workdir / "reg"),
        "--extractor",
        str(workdir / "patterns.json"),
        *extra,
    ]


def test_eval_table_output(runner, workdir):
    snapshot_kb(runner, workdir)
    result = runner.invoke(main, eval_args(workdir))
    assert result.exit_code == 0, result.output
    assert "patient pt-001, stack onc.review@1.0" in result.output
    assert "FACTOR" in result.output and "STATUS" in result.output
    lines = result.output.splitlines()
    factor_line = next(l for l in lines if l.startswith("pet_ct_done"))
    assert "no" in factor_line.split()
    status_line = next(l for l in lines if "pet_ct " in l and "GAP" in l)
    assert status_line.split()[0] == "GAP"
    assert any("COMPLETE" in l and "cea_baseline" in l for l in lines)


def test_eval_json_output(runner, workdir):
    snapshot_kb(runner, workdir)
    result = runner.invoke(main, eval_args(workdir, "--format", "json"))
    assert result.exit_code == 0, result.output
    document = json.loads(result.output)
    assert document["patient_id"] == "pt-001"
    assert document["stack"] == ["onc.review@1.0"]
    assert document["answers"]["pet_ct_done"]["value"] == "no"
    assert [(r["id"], r["status"]) for r in document["results"]] == [
        ("cea_baseline", "COMPLETE"),
        ("pet_ct", "GAP"),
    ]
    assert all(r["explanation"] for r in document["results"])


def test_eval_without_extractor_yields_unknowns(runner, workdir):
    snapshot_kb(runner, workdir)
    args = eval_args(workdir, "--format", "json")
    args.remove("--extractor")
    args.remove(str(workdir / "patterns.json"))
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    document = json.loads(result.output)
    # structured field still answers pregnant; everything else is unknown
    assert document["answers"]["pregnant"]["value"] == "no"
    assert document["answers"]["cancer_confirmed"]["value"] == "unknown"
    assert {r["status"] for r in document["results"]} == {"INDETERMINATE"}


def test_eval_missing_stack_ref_fails_cleanly(runner, workdir):
    snapshot_kb(runner, workdir)
    result = runner.invoke(
        main, eval_args(workdir)[:3] + ["--stack", "ghost.ns@1.0", "--registry", str(workdir / "reg")]
    )
    assert result.exit_code == 1
    assert "ghost.ns" in result.output


def test_eval_usage_errors(runner, workdir):
    # missing required --stack
    result = runner.invoke(
        main,
        [
            "eval",
            "--record",
            str(workdir / "record.json"),
            "--registry",
            str(workdir / "reg"),
        ],
    )
    assert result.exit_code == 2
    # registry directory must already exist
    result = runner.invoke(
        main,
        eval_args(workdir)[:5] + ["--registry", str(workdir / "missing-reg")],
    )
    assert result.exit_code == 2


# --- metrics -------------------------------------------------------------------------------


@pytest.fixture
def session_dir(tmp_path, review_registry, review_extractor):
    from carekb.records import load_record
    from carekb.session import create_session

    store = SessionStore(tmp_path / "sessions")
    session = create_session(
        load_record(review_record_document()),
        ["onc.review@1.0"],
        review_extractor,
        review_registry,
        session_id="sess-metrics",
        timestamp="2025-02-01T09:00:00+00:00",
    )
    store.create(session)
    store.append_event(
        session.session_id,
        override_factor(session, "pet_ct_done", TriBool.TRUE, "outside imaging"),
    )
    store.append_event(session.session_id, finalize_step1(session))
    return tmp_path / "sessions"


def test_metrics_table(runner, session_dir):
    result = runner.invoke(main, ["metrics", str(session_dir), "--stage", "step1"])
    assert result.exit_code == 0
    assert result.output == "step1: 1/5 items adjusted (20.00%)\n"


def test_metrics_json(runner, session_dir):
    result = runner.invoke(
        main, ["metrics", str(session_dir), "--stage", "step2", "--format", "json"]
    )
    assert result.exit_code == 0
    assert json.loads(result.output) == {
        "stage": "step2",
        "total_items": 2,
        "adjusted_items": 0,
        "adjustment_percentage": 0.0,
    }


def test_metrics_empty_directory_fails(runner, tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    result = runner.invoke(main, ["metrics", str(empty), "--stage", "step1"])
    assert result.exit_code == 1


def test_metrics_bad_stage_is_usage_error(runner, session_dir):
    result = runner.invoke(main, ["metrics", str(session_dir), "--stage", "overall"])
    assert result.exit_code == 2


# --- subprocess: stdout purity and byte stability --------------------------------------------


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "carekb.cli", *args],
        capture_output=True,
        cwd=cwd,
        timeout=60,
    )


def test_eval_json_stdout_is_pure_and_reproducible(workdir):
    setup = run_cli(
        ["kb", "snapshot", str(workdir / "kb.json"), "--registry", str(workdir / "reg")],
        workdir,
    )
    assert setup.returncode == 0, setup.stderr.decode()

    args = [
        "eval",
        "--record",
        str(workdir / "record.json"),
        "--stack",
        "onc.review@1.0",
        "--registry",
        str(workdir / "reg"),
        "--extractor",
        str(workdir / "patterns.json"),
        "--format",
        "json",
    ]
    first = run_cli(args, workdir)
    second = run_cli(args, workdir)
    assert first.returncode == 0, first.stderr.decode()
    assert first.stdout == second.stdout
    json.loads(first.stdout)  # stdout holds exactly one JSON document
    assert first.stderr == b""


def test_snapshot_lint_failure_reports_on_stderr(workdir):
    doc = review_kb_document()
    doc["recommendations"][0]["relevance_rule"] = "pregnant AND NOT pregnant"
    (workdir / "broken.json").write_text(json.dumps(doc))
    result = run_cli(
        ["kb", "snapshot", str(workdir / "broken.json"), "--registry", str(workdir / "reg")],
        workdir,
    )
    assert result.returncode == 3
    assert result.stdout == b""
    assert b"UNSATISFIABLE_RULE" in result.stderr
    assert b"snapshot blocked by lint errors" in result.stderr


def test_console_script_entry_point(workdir):
    result = subprocess.run(
        ["carekb", "--help"], capture_output=True, timeout=60, cwd=workdir
    )
    assert result.returncode == 0
    for command in [b"kb", b"eval", b"serve", b"metrics"]:
        assert command in result.stdout
