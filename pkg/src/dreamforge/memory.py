"""Append-only local memory of phase conclusions and artifacts.

One store per run. Keys are phase ids or artifact names; entries are never
mutated after insertion and iterate in insertion order. Text entries hold the
conclusion string; artifact entries reference a file stored beside the index,
guarded by a content hash. Single writer (the pipeline driver), unlimited
readers after each put returns.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ArtifactIntegrityError, DuplicateKeyError, MissingKeyError
from .storage import atomic_write_bytes, atomic_write_json, read_json, sha256_hex, utc_now_iso

INDEX_NAME = "index.json"


@dataclass(frozen=True)
class MemoryEntry:
    key: str
    kind: str  # "text" | "artifact"
    value: str  # conclusion text, or artifact path relative to the store root
    sha256: Optional[str] = None
    source_phase: Optional[str] = None
    created_at: str = ""

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "kind": self.kind,
            "value": self.value,
            "sha256": self.sha256,
            "source_phase": self.source_phase,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MemoryEntry":
        return cls(**payload)


class MemoryStore:
    """Disk-backed ordered map; every put persists before returning."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._entries: dict[str, MemoryEntry] = {}

    # -- writes ---------------------------------------------------------

    def put(self, key: str, value: str, source_phase: Optional[str] = None) -> None:
        """Record a text conclusion. Duplicate keys are an error: append-only."""
        self._insert(
            MemoryEntry(
                key=key,
                kind="text",
                value=value,
                source_phase=source_phase,
                created_at=utc_now_iso(),
            )
        )

    def put_artifact(
        self,
        key: str,
        data: bytes,
        filename: str,
        source_phase: Optional[str] = None,
    ) -> Path:
        """Store a file beside the index and record a hash-guarded reference."""
        if key in self._entries:
            raise DuplicateKeyError(f"memory key {key!r} already present")
        path = self.root / filename
        atomic_write_bytes(path, data)
        self._insert(
            MemoryEntry(
                key=key,
                kind="artifact",
                value=filename,
                sha256=sha256_hex(data),
                source_phase=source_phase,
                created_at=utc_now_iso(),
            )
        )
        return path

    def _insert(self, entry: MemoryEntry) -> None:
        if entry.key in self._entries:
            raise DuplicateKeyError(f"memory key {entry.key!r} already present")
        self._entries[entry.key] = entry
        self._persist()

    def _persist(self) -> None:
        atomic_write_json(
            self.root / INDEX_NAME,
            {"schema_version": 1, "entries": [e.to_dict() for e in self._entries.values()]},
        )

    # -- reads ----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def keys(self) -> list[str]:
        return list(self._entries.keys())

    def entry(self, key: str) -> MemoryEntry:
        if key not in self._entries:
            raise MissingKeyError(key)
        return self._entries[key]

    def get(self, key: str) -> str:
        """The entry's text; for artifacts, the absolute path after a hash check."""
        entry = self.entry(key)
        if entry.kind == "text":
            return entry.value
        path = self.root / entry.value
        if not path.is_file():
            raise ArtifactIntegrityError(f"artifact for {key!r} is missing: {path}")
        actual = sha256_hex(path.read_bytes())
        if actual != entry.sha256:
            raise ArtifactIntegrityError(
                f"artifact for {key!r} was modified (hash {actual[:12]} != {str(entry.sha256)[:12]})"
            )
        return str(path)

    def gather(self, keys: list[str]) -> list[tuple[str, str]]:
        """Values for the requested keys, in the requested order; read-only."""
        for key in keys:
            if key not in self._entries:
                raise MissingKeyError(key)
        return [(key, self.get(key)) for key in keys]

    def entries(self) -> list[MemoryEntry]:
        return list(self._entries.values())

    # -- persistence ----------------------------------------------------

    @classmethod
    def load(cls, root: Path | str) -> "MemoryStore":
        store = cls(root)
        index_path = store.root / INDEX_NAME
        if index_path.is_file():
            payload = read_json(index_path)
            for raw in payload["entries"]:
                entry = MemoryEntry.from_dict(raw)
                store._entries[entry.key] = entry
        return store
