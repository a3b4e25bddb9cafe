"""File-backed registry of published system manifests.

Layout: `<root>/index.tsv` plus one canonical `<system_id>.consert` per
system. Files are written to a temporary name and renamed into place, and the
index is rewritten only after the manifest file is complete, so a crash never
leaves a half-written file in the index.
"""

from __future__ import annotations

import contextlib
import csv
import fcntl
import hashlib
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Dict, Iterator, List

import pytz

from consert import config
from consert.diagnostics import has_errors
from consert.dsl import parse_text
from consert.errors import RegistryError, ValidationError
from consert.fmt import format_canonical
from consert.model import Catalog, SystemManifest
from consert.validate import validate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegistryEntry:
    system_id: str
    hash: str
    filename: str
    published_at_utc: str = ""

    def published_at(self, tz_name: str = config.DEFAULT_TIMEZONE) -> str:
        if not self.published_at_utc:
            return "-"
        try:
            tz = pytz.timezone(tz_name)
        except pytz.UnknownTimeZoneError:
            raise RegistryError(f"unknown timezone {tz_name!r}", "BAD_TIMEZONE")
        return datetime.fromisoformat(self.published_at_utc).astimezone(tz).isoformat()


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def atomic_write(path: Path, text: str) -> None:
    tmp = NamedTemporaryFile(
        "w", dir=path.parent, prefix=".tmp-", suffix=path.suffix, delete=False, encoding="utf-8", newline=""
    )
    try:
        with tmp:
            tmp.write(text)
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp.name, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp.name)
        raise


class Registry:
    def __init__(self, root):
        self.root = Path(root)

    @property
    def index_path(self) -> Path:
        return self.root / config.INDEX_FILE

    def __repr__(self) -> str:
        return f"Registry({str(self.root)!r})"

    @contextlib.contextmanager
    def _locked(self) -> Iterator[None]:
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.root / config.INDEX_LOCK, "a", encoding="utf-8") as lock:
            fcntl.flock(lock.fileno(), fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(lock.fileno(), fcntl.LOCK_UN)

    def entries(self) -> Dict[str, RegistryEntry]:
        if not self.index_path.is_file():
            return {}
        out: Dict[str, RegistryEntry] = {}
        with self.index_path.open("r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f, delimiter="\t")
            for n, row in enumerate(reader, start=2):
                if not row.get("system_id") or not row.get("hash") or not row.get("filename"):
                    raise RegistryError(f"{self.index_path}:{n}: malformed index row", "BAD_INDEX")
                out[row["system_id"]] = RegistryEntry(
                    row["system_id"], row["hash"], row["filename"], row.get("published_at_utc") or ""
                )
        return out

    def _write_index(self, entries: Dict[str, RegistryEntry]) -> None:
        lines = ["\t".join(config.INDEX_HEADER)]
        for e in sorted(entries.values(), key=lambda e: e.system_id):
            lines.append("\t".join([e.system_id, e.hash, e.filename, e.published_at_utc]))
        atomic_write(self.index_path, "\n".join(lines) + "\n")

    def publish(self, manifest: SystemManifest, catalog: Catalog) -> str:
        diagnostics = validate(manifest, catalog)
        if has_errors(diagnostics):
            raise ValidationError(f"{manifest.system_id} does not validate against {catalog.name}", diagnostics)

        text = format_canonical(manifest)
        digest = content_hash(text)
        with self._locked():
            entries = self.entries()
            existing = entries.get(manifest.system_id)
            if existing is not None:
                if existing.hash == digest:
                    logger.debug("%s already published as %s", manifest.system_id, digest[:12])
                    return digest
                raise RegistryError(
                    f"{manifest.system_id} is already published with different content ({existing.hash[:12]})",
                    "ID_CONFLICT",
                )
            filename = f"{manifest.system_id}{config.MANIFEST_EXT}"
            atomic_write(self.root / filename, text)
            entries[manifest.system_id] = RegistryEntry(
                manifest.system_id, digest, filename, datetime.now(pytz.utc).isoformat()
            )
            self._write_index(entries)
        logger.info("published %s (%s)", manifest.system_id, digest[:12])
        return digest

    def _entry(self, system_id: str) -> RegistryEntry:
        entry = self.entries().get(system_id)
        if entry is None:
            raise RegistryError(f"{system_id} is not published in {self.root}", "NOT_FOUND")
        return entry

    def lookup(self, system_id: str) -> str:
        return self._read(self._entry(system_id))

    def _read(self, entry: RegistryEntry) -> str:
        path = self.root / entry.filename
        try:
            text = path.read_bytes().decode("utf-8")
        except (OSError, UnicodeDecodeError) as exn:
            raise RegistryError(f"cannot read {path}: {exn}", "TAMPERED")
        if content_hash(text) != entry.hash:
            raise RegistryError(f"{path} does not match its indexed hash", "TAMPERED")
        return text

    def load(self, system_id: str) -> SystemManifest:
        entry = self._entry(system_id)
        return parse_text(self._read(entry), str(self.root / entry.filename), kind="manifest")

    def list(self) -> List[RegistryEntry]:
        return sorted(self.entries().values(), key=lambda e: e.system_id)
