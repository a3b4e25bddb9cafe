#!/usr/bin/env python
"""Command-line front end: validate, fmt, eval, explain, simulate, registry."""

from __future__ import annotations

import argparse
import enum
import logging
import re
import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from consert import config
from consert import diagnostics as dg
from consert.dsl import SourceDocument, load_file, parse, read_document
from consert.errors import CompositionError, ConsertError, ParseError, ValidationError
from consert.evaluation import evaluate_composition, explain
from consert.fmt import format_canonical
from consert.health import check_registry, print_report
from consert.model import Catalog, CompositionGraph, SystemManifest, Tri
from consert.registry import Registry, atomic_write
from consert.session import replay
from consert.validate import check, validate

logger = logging.getLogger(__name__)


class ExitStatus(enum.IntEnum):
    OK = 0
    FAILED = 1  # error diagnostics or failed expectations
    USAGE = 2  # bad arguments or unreadable input


BIND_RE = re.compile(r"^(\w+)\.(\w+)=(\w+)\.(\w+)$")
RTE_RE = re.compile(r"^(\w+)\.(\w+)=(true|false|unknown)$")
SERVICE_RE = re.compile(r"^(\w+)\.(\w+)$")


class UsageError(ConsertError):
    code = "USAGE"


def _print_diagnostics(diags) -> None:
    for d in diags:
        print(d.render())


def _split_service(value: str, flag: str) -> Tuple[str, str]:
    m = SERVICE_RE.match(value)
    if m is None:
        raise UsageError(f"{flag} expects SYSTEM.SERVICE, got {value!r}")
    return m.group(1), m.group(2)


# --- validate / fmt


def cmd_validate(args) -> int:
    parsed = []
    for path in args.paths:
        try:
            doc = read_document(path)
        except ParseError as exn:
            parsed.append((path, None, exn.diagnostics))
            continue
        result = parse(doc)
        parsed.append((path, result.model, result.diagnostics))

    catalog: Optional[Catalog] = None
    if args.catalog:
        catalog = load_file(args.catalog, kind="catalog")
    else:
        catalog = next((m for _, m, _ in parsed if isinstance(m, Catalog)), None)

    failed = False
    for path, model, diags in parsed:
        found = list(diags)
        if isinstance(model, SystemManifest):
            if catalog is None:
                line, column = model.locate("system", model.system_id)
                found.append(dg.warning("NO_CATALOG", "no catalog given, cross-file checks skipped", line, column, path))
            else:
                found.extend(check(model, catalog, path))
        found = dg.sort_diagnostics(found)
        _print_diagnostics(found)
        failed = failed or dg.has_errors(found)
    return ExitStatus.FAILED if failed else ExitStatus.OK


def cmd_fmt(args) -> int:
    status = ExitStatus.OK
    for path in args.paths:
        doc = read_document(path)
        result = parse(doc)
        if result.model is None:
            _print_diagnostics(result.diagnostics)
            status = ExitStatus.FAILED
            continue
        text = format_canonical(result.model)
        if args.check:
            if text != doc.text:
                print(f"{path}: not in canonical form")
                status = ExitStatus.FAILED
        elif args.write:
            if text != doc.text:
                atomic_write(Path(path), text)
                logger.info("reformatted %s", path)
        else:
            sys.stdout.write(text)
    return status


# --- eval / explain


def _build_composition(args) -> Tuple[Catalog, CompositionGraph, Dict[Tuple[str, str], Tri]]:
    catalog = load_file(args.catalog, kind="catalog")
    systems: Dict[str, SystemManifest] = {}
    for path in args.manifests:
        m = load_file(path, kind="manifest")
        diags = validate(m, catalog, str(path))
        if dg.has_errors(diags):
            raise ValidationError(f"{path} does not validate", diags)
        if m.system_id in systems:
            raise ValidationError(f"system {m.system_id} given twice", [])
        systems[m.system_id] = m

    bindings = {}
    for value in args.bind:
        b = BIND_RE.match(value)
        if b is None:
            raise UsageError(f"--bind expects CONSUMER.SLOT=PROVIDER.SERVICE, got {value!r}")
        key = (b.group(1), b.group(2))
        target = (b.group(3), b.group(4))
        if key in bindings and bindings[key] != target:
            raise UsageError(f"contradictory --bind for {key[0]}.{key[1]}")
        bindings[key] = target

    rtes: Dict[Tuple[str, str], Tri] = {}
    for value in args.rte:
        r = RTE_RE.match(value)
        if r is None:
            raise UsageError(f"--rte expects SYSTEM.LABEL=true|false|unknown, got {value!r}")
        key = (r.group(1), r.group(2))
        if key[0] not in systems or systems[key[0]].rte(key[1]) is None:
            raise CompositionError(f"{key[0]} declares no rte {key[1]}", "UNKNOWN_RTE")
        if key in rtes and rtes[key] is not Tri(r.group(3)):
            raise UsageError(f"contradictory --rte for {key[0]}.{key[1]}")
        rtes[key] = Tri(r.group(3))
    default = Tri(args.rte_default)
    for sid, m in systems.items():
        for r in m.rtes:
            rtes.setdefault((sid, r.label), default)

    root = _split_service(args.root, "--root") if args.root else None
    return catalog, CompositionGraph(systems, bindings, root), rtes


def _report_line(res, root) -> str:
    key = f"{res.system_id}.{res.service_type}"
    marker = "  [root]" if root == (res.system_id, res.service_type) else ""
    if res.achieved is None:
        return f"{key} none: {res.trace.reason}{marker}"
    g = res.achieved
    return f"{key} order {g.order} {g.label}: {g.render()}{marker}"


def cmd_eval(args) -> int:
    catalog, graph, rtes = _build_composition(args)
    result = evaluate_composition(graph, catalog, rtes)
    for _, res in sorted(result.services.items()):
        print(_report_line(res, graph.root))
    if args.explain:
        keys = [graph.root] if graph.root else sorted(result.services)
        for system_id, service in keys:
            print()
            print("\n".join(explain(result, system_id, service).render()))
    return ExitStatus.OK


def cmd_explain(args) -> int:
    catalog, graph, rtes = _build_composition(args)
    if args.service:
        target = _split_service(args.service, "--service")
    elif graph.root:
        target = graph.root
    else:
        raise UsageError("explain needs --service or --root")
    result = evaluate_composition(graph, catalog, rtes)
    print("\n".join(explain(result, *target).render()))
    return ExitStatus.OK


# --- simulate / registry


def _registry_dir(args) -> Optional[str]:
    return args.registry or config.registry_dir_from_env()


def cmd_simulate(args) -> int:
    doc = read_document(args.scenario)
    result = parse(SourceDocument(doc.text, doc.path, "scenario"))
    if result.model is None:
        _print_diagnostics(result.diagnostics)
        return ExitStatus.FAILED
    base_dir = Path(args.scenario).parent
    root = _registry_dir(args)
    if root is None:
        with tempfile.TemporaryDirectory(prefix="consert-registry-") as tmp:
            transcript = replay(result.model, Registry(tmp), base_dir)
    else:
        transcript = replay(result.model, Registry(root), base_dir)
    sys.stdout.write(transcript.render())
    return ExitStatus.FAILED if transcript.failures else ExitStatus.OK


def _require_registry(args) -> Registry:
    root = _registry_dir(args)
    if root is None:
        raise UsageError(f"no registry: pass --registry or set {config.REGISTRY_ENV}")
    return Registry(root)


def cmd_registry_publish(args) -> int:
    reg = _require_registry(args)
    catalog = load_file(args.catalog, kind="catalog")
    for path in args.manifests:
        m = load_file(path, kind="manifest")
        print(f"{m.system_id}\t{reg.publish(m, catalog)}")
    return ExitStatus.OK


def cmd_registry_list(args) -> int:
    reg = _require_registry(args)
    tz = args.tz or config.display_timezone()
    for e in reg.list():
        cols = [e.system_id, e.hash, e.filename]
        if args.long:
            cols.append(e.published_at(tz))
        print("\t".join(cols))
    return ExitStatus.OK


def cmd_registry_show(args) -> int:
    sys.stdout.write(_require_registry(args).lookup(args.system_id))
    return ExitStatus.OK


def cmd_registry_verify(args) -> int:
    reg = _require_registry(args)
    catalog = load_file(args.catalog, kind="catalog") if args.catalog else None
    findings = check_registry(reg, catalog)
    print_report(findings)
    return ExitStatus.FAILED if findings.fails else ExitStatus.OK


def _add_composition_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("catalog", help="Service-type catalog (.consert-catalog).")
    p.add_argument("manifests", nargs="+", help="System manifests (.consert).")
    p.add_argument("--bind", action="append", default=[], metavar="C.SLOT=P.SERVICE")
    p.add_argument("--rte", action="append", default=[], metavar="SYSTEM.LABEL=VALUE")
    p.add_argument("--rte-default", default="unknown", choices=[t.value for t in Tri],
                   help="Value for rtes not given with --rte (default unknown).")
    p.add_argument("--root", help="Application service, SYSTEM.SERVICE.")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="consert", description="Conditional safety certificate tooling.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="Parse and validate documents.")
    p.add_argument("paths", nargs="+")
    p.add_argument("--catalog", help="Catalog to validate manifests against.")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fmt", help="Print or rewrite documents in canonical form.")
    p.add_argument("paths", nargs="+")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--check", action="store_true", help="Exit 1 if any file is not canonical.")
    mode.add_argument("--write", action="store_true", help="Rewrite files in place.")
    p.set_defaults(func=cmd_fmt)

    p = sub.add_parser("eval", help="Evaluate one composition.")
    _add_composition_args(p)
    p.add_argument("--explain", action="store_true", help="Print substantiation trees.")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="Print the substantiation tree of one service.")
    _add_composition_args(p)
    p.add_argument("--service", help="SYSTEM.SERVICE to explain (default: --root).")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("simulate", help="Replay a scenario.")
    p.add_argument("scenario")
    p.add_argument("--registry", help=f"Registry directory (default ${config.REGISTRY_ENV}, else a temporary one).")
    p.set_defaults(func=cmd_simulate)

    reg = sub.add_parser("registry", help="Manage the manifest registry.")
    reg.add_argument("--registry", help=f"Registry directory (default ${config.REGISTRY_ENV}).")
    reg_sub = reg.add_subparsers(dest="registry_command", required=True)

    p = reg_sub.add_parser("publish")
    p.add_argument("--catalog", required=True)
    p.add_argument("manifests", nargs="+")
    p.set_defaults(func=cmd_registry_publish)

    p = reg_sub.add_parser("list")
    p.add_argument("--long", action="store_true", help="Include publication time.")
    p.add_argument("--tz", help=f"Display timezone (default ${config.TIMEZONE_ENV} or {config.DEFAULT_TIMEZONE}).")
    p.set_defaults(func=cmd_registry_list)

    p = reg_sub.add_parser("show")
    p.add_argument("system_id")
    p.set_defaults(func=cmd_registry_show)

    p = reg_sub.add_parser("verify")
    p.add_argument("--catalog")
    p.set_defaults(func=cmd_registry_verify)

    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        return int(args.func(args))
    except UsageError as exn:
        print(f"usage error: {exn.args[0]}", file=sys.stderr)
        return ExitStatus.USAGE
    except OSError as exn:
        print(f"error: {exn.filename or ''}: {exn.strerror or exn}", file=sys.stderr)
        return ExitStatus.USAGE
    except (ParseError, ValidationError) as exn:
        _print_diagnostics(exn.diagnostics)
        print(f"error: {exn}", file=sys.stderr)
        return ExitStatus.FAILED
    except ConsertError as exn:
        print(f"error: {exn}", file=sys.stderr)
        return ExitStatus.USAGE if exn.code in ("UNRESOLVABLE", "NO_CATALOG", "BAD_TIMEZONE") else ExitStatus.FAILED


if __name__ == "__main__":
    raise SystemExit(main())
