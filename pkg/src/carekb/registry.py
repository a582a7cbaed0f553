"""Versioned, append-only storage for knowledge-base snapshots.

A registry is a directory of ``<namespace>@<version>.json`` artifact files
plus an ``index.json`` listing. Registered artifacts are never mutated or
deleted; publishing a fix means publishing a new version.
"""

from __future__ import annotations

import functools
import hashlib
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .errors import IntegrityError, LintBlocked, NotFound, SchemaError, VersionConflict
from .kb import KnowledgeBase, canonical_kb_bytes, kb_to_document, load_kb
from .lint import has_errors, lint_kb

_INDEX_NAME = "index.json"


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def content_hash(kb: KnowledgeBase) -> str:
    return hashlib.sha256(canonical_kb_bytes(kb)).hexdigest()


@dataclass(frozen=True)
class VersionedArtifact:
    kb: KnowledgeBase
    content_hash: str
    created_at: str

    @property
    def ref(self) -> str:
        return self.kb.ref


def snapshot(kb: KnowledgeBase, *, created_at: str | None = None) -> VersionedArtifact:
    """Freeze a knowledge base into an immutable artifact.

    Refuses knowledge bases with lint errors; warnings pass.
    """
    findings = lint_kb(kb)
    if has_errors(findings):
        raise LintBlocked([f for f in findings if f.severity.value == "ERROR"])
    return VersionedArtifact(
        kb=kb,
        content_hash=content_hash(kb),
        created_at=created_at or utc_now_iso(),
    )


# --- version ordering -------------------------------------------------------


def _compare_segments(a: str, b: str) -> int:
    if a.isdigit() and b.isdigit():
        left, right = int(a), int(b)
    else:
        left, right = a, b  # type: ignore[assignment]
    if left < right:
        return -1
    if left > right:
        return 1
    return 0


def compare_versions(a: str, b: str) -> int:
    """Dot-segment comparison: numeric when both segments are numeric,
    lexicographic otherwise; a strict prefix sorts lower."""
    seg_a = a.split(".")
    seg_b = b.split(".")
    for left, right in zip(seg_a, seg_b):
        order = _compare_segments(left, right)
        if order != 0:
            return order
    return (len(seg_a) > len(seg_b)) - (len(seg_a) < len(seg_b))


_version_sort_key = functools.cmp_to_key(compare_versions)


# --- directory-backed registry ----------------------------------------------


def parse_ref(ref: str) -> tuple[str, str]:
    """Split a "namespace@version" reference."""
    namespace, separator, version = ref.partition("@")
    if not separator or not namespace or not version:
        raise SchemaError(f"invalid artifact reference: {ref!r}")
    return namespace, version


class Registry:
    """Artifact store rooted at a directory; safe for in-process concurrency."""

    def __init__(self, root: str | Path):
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._index = self._read_index()

    # index entries: {"namespace", "version", "content_hash", "created_at", "file"}
    def _read_index(self) -> list[dict[str, str]]:
        path = self._root / _INDEX_NAME
        if not path.exists():
            return []
        try:
            data = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise IntegrityError(f"registry index is not valid JSON: {exc}") from exc
        entries = data.get("entries")
        if not isinstance(entries, list):
            raise IntegrityError("registry index has no entries array")
        return entries

    def _write_index(self) -> None:
        path = self._root / _INDEX_NAME
        tmp = path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps({"entries": self._index}, indent=2, sort_keys=True) + "\n",
            "utf-8",
        )
        os.replace(tmp, path)

    def _artifact_path(self, namespace: str, version: str) -> Path:
        return self._root / f"{namespace}@{version}.json"

    def register(self, artifact: VersionedArtifact) -> None:
        """Add an artifact; raises VersionConflict if the slot is taken."""
        kb = artifact.kb
        with self._lock:
            for entry in self._index:
                if entry["namespace"] == kb.namespace and entry["version"] == kb.version:
                    raise VersionConflict(f"{kb.ref} is already registered")
            path = self._artifact_path(kb.namespace, kb.version)
            document = {
                "namespace": kb.namespace,
                "version": kb.version,
                "content_hash": artifact.content_hash,
                "created_at": artifact.created_at,
                "kb": kb_to_document(kb),
            }
            path.write_text(
                json.dumps(document, indent=2, sort_keys=True) + "\n", "utf-8"
            )
            self._index.append(
                {
                    "namespace": kb.namespace,
                    "version": kb.version,
                    "content_hash": artifact.content_hash,
                    "created_at": artifact.created_at,
                    "file": path.name,
                }
            )
            self._write_index()

    def list_artifacts(self) -> list[dict[str, str]]:
        """Registered artifact metadata, sorted by namespace then version."""
        with self._lock:
            entries = [dict(entry) for entry in self._index]
        entries.sort(key=lambda e: (e["namespace"], _version_sort_key(e["version"])))
        for entry in entries:
            entry.pop("file", None)
        return entries

    def _versions_of(self, namespace: str) -> list[str]:
        return [e["version"] for e in self._index if e["namespace"] == namespace]

    def resolve(self, namespace: str, version: str = "latest") -> VersionedArtifact:
        """Fetch an artifact; version "latest" picks the highest version."""
        with self._lock:
            if version == "latest":
                versions = self._versions_of(namespace)
                if not versions:
                    raise NotFound(f"no artifact in namespace {namespace!r}")
                version = max(versions, key=_version_sort_key)
            elif version not in self._versions_of(namespace):
                raise NotFound(f"no artifact {namespace}@{version}")
            path = self._artifact_path(namespace, version)
        if not path.exists():
            raise IntegrityError(f"index lists {namespace}@{version} but file is gone")
        document = json.loads(path.read_text("utf-8"))
        kb = load_kb(document["kb"])
        stored_hash = document["content_hash"]
        actual = content_hash(kb)
        if actual != stored_hash:
            raise IntegrityError(
                f"artifact {namespace}@{version} content hash mismatch: "
                f"stored {stored_hash}, recomputed {actual}"
            )
        return VersionedArtifact(
            kb=kb, content_hash=stored_hash, created_at=document["created_at"]
        )

    def resolve_ref(self, ref: str) -> VersionedArtifact:
        namespace, version = parse_ref(ref)
        return self.resolve(namespace, version)


def register_kb_document(registry: Registry, data: bytes | str | dict[str, Any]) -> VersionedArtifact:
    """Load, lint-gate, snapshot, and register a raw KB document in one step."""
    artifact = snapshot(load_kb(data))
    registry.register(artifact)
    return artifact
