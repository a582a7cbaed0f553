"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 lint errors
found. With ``--format json`` the JSON document is the only thing written to
stdout, and identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from .errors import CarekbError, LintBlocked
from .evaluation import evaluate_with_explanations
from .extraction import extract_all
from .extractors import MockExtractor
from .kb import load_kb, parse_kb_document
from .lint import DEFAULT_EXHAUSTIVE_LIMIT, has_errors, lint_kb
from .records import load_record
from .registry import Registry, register_kb_document, snapshot
from .service import ServiceConfig, serve
from .session import SessionStore
from .stacking import resolve_stack
from .stats import compute_stats

EXIT_LINT_ERRORS = 3


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(str(exc))


def _print_table(headers: tuple[str, ...], rows: list[tuple[str, ...]]) -> None:
    widths = [len(h) for h in headers]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    click.echo(line.rstrip())
    click.echo("  ".join("-" * w for w in widths))
    for row in rows:
        click.echo("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())


def _emit_json(document) -> None:
    click.echo(json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False))


@click.group()
def main():
    """Guideline knowledge bases, rule evaluation, and workup review."""


@main.group()
def kb():
    """Author-side knowledge-base tools."""


@kb.command("lint")
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--exhaustive-limit",
    default=DEFAULT_EXHAUSTIVE_LIMIT,
    show_default=True,
    help="Max rule variables checked by full enumeration; sampled above.",
)
def kb_lint(file: Path, exhaustive_limit: int):
    """Check a knowledge-base file; exits 3 when errors are found."""
    try:
        document = parse_kb_document(file.read_bytes())
        findings = lint_kb(document, exhaustive_limit)
    except CarekbError as exc:
        raise _fail(exc)
    if not findings:
        click.echo("no findings")
        return
    _print_table(
        ("SEVERITY", "CODE", "SUBJECT", "MESSAGE"),
        [(f.severity.value, f.code.value, f.subject, f.message) for f in findings],
    )
    if has_errors(findings):
        raise SystemExit(EXIT_LINT_ERRORS)


@kb.command("snapshot")
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--registry",
    "registry_dir",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Registry directory; created when missing.",
)
def kb_snapshot(file: Path, registry_dir: Path):
    """Validate, freeze, and register a knowledge base."""
    try:
        artifact = register_kb_document(Registry(registry_dir), file.read_bytes())
    except LintBlocked as exc:
        for finding in exc.findings:
            click.echo(
                f"{finding.severity.value} {finding.code.value} "
                f"{finding.subject}: {finding.message}",
                err=True,
            )
        click.echo("snapshot blocked by lint errors", err=True)
        raise SystemExit(EXIT_LINT_ERRORS)
    except CarekbError as exc:
        raise _fail(exc)
    click.echo(f"registered {artifact.ref} {artifact.content_hash}")


@main.command("eval")
@click.option(
    "--record",
    "record_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
@click.option(
    "--stack",
    "stack_refs",
    multiple=True,
    required=True,
    help="Artifact reference namespace@version; repeat lowest priority first.",
)
@click.option(
    "--registry",
    "registry_dir",
    required=True,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
)
@click.option(
    "--extractor",
    "extractor_config",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Mock extractor config JSON; without it every factor is unknown.",
)
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["json", "table"]),
    default="table",
    show_default=True,
)
def eval_command(
    record_path: Path,
    stack_refs: tuple[str, ...],
    registry_dir: Path,
    extractor_config: Path | None,
    output_format: str,
):
    """Extract factors from a record and evaluate the stacked rules."""
    try:
        registry = Registry(registry_dir)
        effective_kb = resolve_stack(registry, list(stack_refs))
        record = load_record(record_path.read_bytes())
        extractor = (
            MockExtractor.from_file(extractor_config)
            if extractor_config
            else MockExtractor({})
        )
        answers = extract_all(effective_kb, record, extractor)
        results = evaluate_with_explanations(effective_kb, answers)
    except CarekbError as exc:
        raise _fail(exc)

    if output_format == "json":
        _emit_json(
            {
                "patient_id": record.patient_id,
                "stack": list(effective_kb.stack),
                "answers": answers.to_dict()["answers"],
                "results": [r.to_dict() for r in results],
            }
        )
        return
    click.echo(f"patient {record.patient_id}, stack {', '.join(effective_kb.stack)}")
    click.echo("")
    _print_table(
        ("FACTOR", "VALUE", "SOURCE"),
        [
            (name, answers.answers[name].value.as_answer(), answers.answers[name].extractor_id)
            for name in sorted(answers.answers)
        ],
    )
    click.echo("")
    _print_table(
        ("STATUS", "ID", "CATEGORY", "TITLE"),
        [(r.status.value, r.recommendation_id, r.category, r.title) for r in results],
    )


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option(
    "--registry",
    "registry_dir",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
)
@click.option(
    "--sessions",
    "session_dir",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
)
@click.option(
    "--extractor",
    type=click.Choice(["mock", "llm"]),
    default="mock",
    show_default=True,
)
@click.option(
    "--mock-config",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
)
@click.option(
    "--records",
    "records_dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    default=None,
    help="Directory of record files create-session may reference by name.",
)
def serve_command(
    host: str,
    port: int,
    registry_dir: Path,
    session_dir: Path,
    extractor: str,
    mock_config: Path | None,
    records_dir: Path | None,
):
    """Run the HTTP service."""
    config = ServiceConfig.from_env(
        registry_dir=str(registry_dir),
        session_dir=str(session_dir),
        extractor=extractor,
        mock_config_path=str(mock_config) if mock_config else None,
        records_dir=str(records_dir) if records_dir else None,
    )
    try:
        serve(config, host=host, port=port)
    except CarekbError as exc:
        raise _fail(exc)
    except OSError as exc:
        raise _fail(exc)


@main.command("metrics")
@click.argument(
    "session_dir", type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@click.option("--stage", type=click.Choice(["step1", "step2"]), required=True)
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["json", "table"]),
    default="table",
    show_default=True,
)
def metrics_command(session_dir: Path, stage: str, output_format: str):
    """Clinician adjustment rates across recorded sessions."""
    try:
        sessions = SessionStore(session_dir).load_all()
        stats = compute_stats(sessions, stage)
    except CarekbError as exc:
        raise _fail(exc)
    if output_format == "json":
        _emit_json(stats.to_dict())
        return
    click.echo(
        f"{stats.stage}: {stats.adjusted_items}/{stats.total_items} items adjusted "
        f"({stats.adjustment_percentage:.2f}%)"
    )


if __name__ == "__main__":
    main()
