from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from consert import config
from consert.diagnostics import has_errors
from consert.dsl import parse
from consert.dsl import SourceDocument
from consert.errors import RegistryError
from consert.fmt import format_canonical
from consert.model import Catalog
from consert.registry import Registry, content_hash
from consert.validate import validate


@dataclass
class Findings:
    root: str = ""
    checked: int = 0
    fails: List[str] = field(default_factory=list)
    warns: List[str] = field(default_factory=list)
    infos: List[str] = field(default_factory=list)

    @property
    def status(self) -> str:
        if self.fails:
            return "FAIL"
        if self.warns:
            return "WARN"
        return "PASS"


def check_registry(reg: Registry, catalog: Optional[Catalog] = None) -> Findings:
    findings = Findings(root=str(reg.root))

    # --- Load index
    try:
        entries = reg.entries()
    except RegistryError as exn:
        findings.fails.append(f"Index unreadable: {exn}")
        return findings
    if not entries:
        findings.warns.append(f"No published systems in {reg.root}.")

    findings.checked = len(entries)

    # --- Per-entry checks
    for system_id, entry in sorted(entries.items()):
        path = reg.root / entry.filename
        if entry.filename != f"{system_id}{config.MANIFEST_EXT}":
            findings.warns.append(f"{system_id}: unexpected filename {entry.filename}.")
        if not path.is_file():
            findings.fails.append(f"{system_id}: indexed file {entry.filename} is missing.")
            continue
        try:
            text = path.read_bytes().decode("utf-8")
        except UnicodeDecodeError:
            findings.fails.append(f"{system_id}: {entry.filename} is not UTF-8.")
            continue
        if content_hash(text) != entry.hash:
            findings.fails.append(f"{system_id}: content hash mismatch (tampered or corrupted).")
            continue
        result = parse(SourceDocument(text, str(path), "manifest"))
        if result.model is None:
            findings.fails.append(f"{system_id}: stored text does not parse ({result.diagnostics[0].message}).")
            continue
        if result.model.system_id != system_id:
            findings.fails.append(f"{system_id}: stored manifest declares system {result.model.system_id}.")
        if format_canonical(result.model) != text:
            findings.warns.append(f"{system_id}: stored text is not in canonical form.")
        if catalog is not None and has_errors(validate(result.model, catalog)):
            findings.fails.append(f"{system_id}: does not validate against catalog {catalog.name}.")
        findings.infos.append(f"{system_id}: OK {entry.hash[:12]}")

    # --- Stray files
    indexed = {e.filename for e in entries.values()}
    if reg.root.is_dir():
        for path in sorted(reg.root.iterdir()):
            if path.name.startswith(".tmp-"):
                findings.warns.append(f"Leftover temporary file {path.name} (interrupted publish).")
            elif path.suffix == config.MANIFEST_EXT and path.name not in indexed:
                findings.warns.append(f"Unindexed manifest {path.name}.")

    return findings


def _count(n: int, noun: str) -> str:
    return f"{n} {noun}" if n == 1 else f"{n} {noun}s"


def print_report(findings: Findings) -> None:
    """One tab-separated line per finding, failures first, then a one-line verdict."""
    for severity, messages in (("FAIL", findings.fails), ("WARN", findings.warns), ("INFO", findings.infos)):
        for x in messages:
            print(f"{severity}\t{x}")
    print(
        f"registry {findings.root}: {findings.status} ({_count(findings.checked, 'system')} checked, "
        f"{_count(len(findings.fails), 'failure')}, {_count(len(findings.warns), 'warning')})"
    )
