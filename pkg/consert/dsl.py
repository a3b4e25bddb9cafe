"""Parser for catalogs, system manifests and scenarios."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import lark

from consert import config
from consert import diagnostics as dg
from consert.diagnostics import Diagnostic
from consert.errors import ParseError
from consert.events import Bind, Expect, Join, Leave, Scenario, SetRoot, SetRte
from consert.grammar import describe_terminal, document_parser, expects_keyword, quoted_parser
from consert.model import (
    TRUE,
    Catalog,
    ConditionFunction,
    Demand,
    Gate,
    Guarantee,
    IntegrityLevel,
    Mode,
    PropertyGuarantee,
    PropertyParams,
    Ref,
    RteKind,
    RuntimeEvidence,
    ServiceType,
    Slot,
    SystemManifest,
    Tri,
    reachable_gates,
)

logger = logging.getLogger(__name__)

Model = Union[Catalog, SystemManifest, Scenario]

PARAMS_RE = re.compile(r"^\{\s*(?:(?P<window>[0-9]+)\s*s)?\s*,\s*(?P<mode>[A-Za-z]+)\s*\}$")


@dataclass(frozen=True)
class SourceDocument:
    text: str
    path: str = ""
    kind: Optional[str] = None


@dataclass
class ParseResult:
    model: Optional[Model]
    diagnostics: List[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.model is not None


def _end_position(text: str) -> Tuple[int, int]:
    lines = text.split("\n")
    return len(lines), len(lines[-1]) + 1


def _position(exn, text: str) -> Tuple[int, int]:
    line = getattr(exn, "line", None)
    column = getattr(exn, "column", None)
    if not isinstance(line, int) or line < 1 or not isinstance(column, int) or column < 1:
        return _end_position(text)
    return line, column


def _syntax_diagnostic(exn: lark.exceptions.UnexpectedInput, text: str, parser: lark.Lark,
                       path: str, line_offset: int = 0, column_offset: int = 0) -> Diagnostic:
    line, column = _position(exn, text)
    if line_offset:
        line = line_offset
        column = column + column_offset
    if isinstance(exn, lark.exceptions.UnexpectedToken):
        token = exn.token
        expected = ", ".join(sorted(describe_terminal(parser, t) for t in exn.expected)[:8])
        if token.type == "$END":
            return dg.error(dg.SYNTAX_ERROR, f"unexpected end of input, expected {expected}", line, column, path)
        keywords_expected = expects_keyword(parser, exn.expected)
        if token.type in ("NAME", "PATH") and re.match(r"^[A-Za-z_-]+$", str(token)) and keywords_expected:
            return dg.error(dg.UNKNOWN_KEYWORD, f"unknown keyword '{token}', expected {expected}", line, column, path)
        return dg.error(dg.SYNTAX_ERROR, f"unexpected '{token}', expected {expected}", line, column, path)
    if isinstance(exn, lark.exceptions.UnexpectedCharacters):
        char = text[exn.pos_in_stream] if 0 <= exn.pos_in_stream < len(text) else "?"
        return dg.error(dg.SYNTAX_ERROR, f"unexpected character {char!r}", line, column, path)
    return dg.error(dg.SYNTAX_ERROR, "unexpected end of input", line, column, path)


def _parse_level(token, diags: List[Diagnostic], where) -> Optional[IntegrityLevel]:
    try:
        return IntegrityLevel(str(token))
    except ValueError:
        line, column = where(token)
        diags.append(dg.error(dg.BAD_LEVEL, f"unknown integrity level '{token}' (QM, a..e)", line, column))
        return None


def _parse_params(token, diags: List[Diagnostic], where) -> Optional[PropertyParams]:
    m = PARAMS_RE.match(str(token))
    line, column = where(token)
    if m is None:
        diags.append(dg.error(dg.BAD_PARAMS, f"malformed parameters {token}, expected {{<window>s,<mode>}}", line, column))
        return None
    try:
        mode = Mode(m.group("mode"))
    except ValueError:
        diags.append(dg.error(dg.BAD_PARAMS, f"unknown mode '{m.group('mode')}' (Standstill, Moving, Any)", line, column))
        return None
    window = m.group("window")
    return PropertyParams(int(window) if window is not None else None, mode)


class _QuotedTransformer(lark.Transformer):
    """Turns a quoted guarantee/demand string into plain values."""

    def __init__(self, line: int, column: int):
        super().__init__()
        self.line = line
        self.column = column
        self.diagnostics: List[Diagnostic] = []

    def where(self, token) -> Tuple[int, int]:
        return self.line, self.column + token.column

    def prop(self, children):
        name, params_tok, level_tok = children
        params = _parse_params(params_tok, self.diagnostics, self.where)
        level = _parse_level(level_tok, self.diagnostics, self.where)
        if params is None or level is None:
            return None
        return PropertyGuarantee(str(name), params, level)

    def service_level(self, children):
        return ("level", children[0], _parse_level(children[0], self.diagnostics, self.where))

    def guarantee_body(self, children):
        items = [c for c in children if c is not None]
        name, order_tok, rest = items[0], items[1], items[2:]
        order = int(order_tok)
        if order < 1:
            line, column = self.where(order_tok)
            self.diagnostics.append(dg.error(dg.BAD_ORDER, f"guarantee order must be >= 1, got {order}", line, column))
        level = None
        seen_level = False
        props = []
        for item in rest:
            if isinstance(item, tuple):
                if seen_level:
                    line, column = self.where(item[1])
                    self.diagnostics.append(dg.error(dg.DUPLICATE_SERVICE_LEVEL, "service-level integrity given twice", line, column))
                seen_level = True
                level = item[2]
            else:
                props.append(item)
        return {"service_type": str(name), "order": order, "service_level": level, "properties": props}

    def demand_body(self, children):
        items = [c for c in children if c is not None]
        return {"service_type": str(items[0]), "properties": items[1:]}


def _parse_body(token, start: str, path: str, diags: List[Diagnostic]):
    text = str(token)[1:-1]
    parser = quoted_parser()
    try:
        tree = parser.parse(text, start=start)
    except lark.exceptions.UnexpectedInput as exn:
        diags.append(_syntax_diagnostic(exn, text, parser, path, token.line, token.column))
        return None
    transformer = _QuotedTransformer(token.line, token.column)
    value = transformer.transform(tree)
    diags.extend(transformer.diagnostics)
    if dg.has_errors(transformer.diagnostics):
        return None
    return value


class _DocTransformer(lark.Transformer):
    def __init__(self, path: str):
        super().__init__()
        self.path = path
        self.diagnostics: List[Diagnostic] = []
        self.source: Dict[Tuple[str, str], Tuple[int, int]] = {}

    def _claim(self, kind: str, token) -> bool:
        key = (kind, str(token))
        if key in self.source:
            line, column = self.source[key]
            self.diagnostics.append(
                dg.error(
                    dg.DUPLICATE_LABEL,
                    f"duplicate {kind} '{token}' (first declared at {line}:{column})",
                    token.line,
                    token.column,
                    self.path,
                )
            )
            return False
        self.source[key] = (token.line, token.column)
        return True

    def start(self, children):
        return children[0]

    # --- catalog

    def property_decl(self, children):
        return children[0]

    def servicetype(self, children):
        name, props = children[0], children[1:]
        self._claim("servicetype", name)
        names = []
        seen = set()
        for p in props:
            if str(p) in seen:
                self.diagnostics.append(
                    dg.error(dg.DUPLICATE_LABEL, f"duplicate property '{p}' in '{name}'", p.line, p.column, self.path)
                )
                continue
            seen.add(str(p))
            self.source[("property", f"{name}.{p}")] = (p.line, p.column)
            names.append(str(p))
        return ServiceType(str(name), tuple(names))

    def catalog(self, children):
        name, service_types = children[0], children[1:]
        self.source[("catalog", str(name))] = (name.line, name.column)
        unique = {}
        for st in service_types:
            unique.setdefault(st.name, st)
        return Catalog(str(name), tuple(unique.values()), source=self.source)

    # --- expressions

    def const_true(self, children):
        return TRUE

    def demand_ref(self, children):
        return Ref("demand", str(children[0]))

    def rte_ref(self, children):
        return Ref("rte", str(children[0]))

    def gate_ref(self, children):
        return Ref("gate", str(children[0]))

    def gate_expr(self, children):
        return Gate(str(children[0]), tuple(children[1:]))

    # --- manifest

    def provides(self, children):
        return ("provides", children[0])

    def requires(self, children):
        return ("requires", children[0], children[1])

    def rte_decl(self, children):
        return ("rte", children[0], children[1])

    def demand_decl(self, children):
        return ("demand", children[0], children[1], children[2])

    def gate_decl(self, children):
        return ("gate", children[0], children[1])

    def guarantee_decl(self, children):
        return ("guarantee", children[0], children[1], children[2])

    def manifest(self, children):
        name, decls = children[0], children[1:]
        self.source[("system", str(name))] = (name.line, name.column)
        provided, slots, rtes, demands, gates, pending = [], [], [], [], {}, []
        for decl in decls:
            kind, label = decl[0], decl[1]
            if not self._claim(kind, label):
                continue
            if kind == "provides":
                provided.append(str(label))
            elif kind == "requires":
                slots.append(Slot(str(label), str(decl[2])))
            elif kind == "rte":
                rtes.append(RuntimeEvidence(str(label), RteKind(str(decl[2]))))
            elif kind == "demand":
                body = _parse_body(decl[2], "demand_body", self.path, self.diagnostics)
                if body is not None:
                    demands.append(Demand(str(label), str(decl[3]), body["service_type"], tuple(body["properties"])))
            elif kind == "gate":
                gates[str(label)] = decl[2]
            elif kind == "guarantee":
                pending.append(decl)

        guarantees = []
        for _, label, quoted, expr in pending:
            body = _parse_body(quoted, "guarantee_body", self.path, self.diagnostics)
            if body is None or body["order"] < 1:
                continue
            g = Guarantee(
                service_type=body["service_type"],
                order=body["order"],
                label=str(label),
                service_level=body["service_level"],
                properties=tuple(body["properties"]),
            )
            guarantees.append((g, ConditionFunction(str(label), expr, reachable_gates(expr, gates))))

        return SystemManifest(
            system_id=str(name),
            provided=tuple(provided),
            required=tuple(slots),
            rtes=tuple(rtes),
            demands=tuple(demands),
            gates=tuple(gates.items()),
            guarantees=tuple(guarantees),
            source=self.source,
        )

    # --- scenario

    def load(self, children):
        tok = children[0]
        self.source[("load", str(tok))] = (tok.line, tok.column)
        return ("load", str(tok))

    def _step(self, step, token):
        self.source.setdefault(("step", step.render()), (token.line, token.column))
        return step

    def join(self, children):
        return self._step(Join(str(children[0])), children[0])

    def leave(self, children):
        return self._step(Leave(str(children[0])), children[0])

    def bind(self, children):
        c = [str(x) for x in children]
        return self._step(Bind(c[0], c[1], c[2], c[3]), children[0])

    def set_rte(self, children):
        return self._step(SetRte(str(children[0]), str(children[1]), Tri(str(children[2]))), children[0])

    def set_root(self, children):
        return self._step(SetRoot(str(children[0]), str(children[1])), children[0])

    def expect_order(self, children):
        order = int(children[2])
        if order < 1:
            tok = children[2]
            self.diagnostics.append(dg.error(dg.BAD_ORDER, f"expected order must be >= 1, got {order}", tok.line, tok.column, self.path))
        return self._step(Expect(str(children[0]), str(children[1]), order), children[0])

    def expect_none(self, children):
        return self._step(Expect(str(children[0]), str(children[1]), None), children[0])

    def scenario(self, children):
        name, items = children[0], children[1:]
        self.source[("scenario", str(name))] = (name.line, name.column)
        loads = tuple(item[1] for item in items if isinstance(item, tuple))
        steps = tuple(item for item in items if not isinstance(item, tuple))
        return Scenario(str(name), loads, steps, source=self.source)


def _too_deep(tree: lark.Tree, limit: int) -> Optional[lark.Token]:
    """Operator token of the first gate nested deeper than limit."""
    stack = [(tree, 0)]
    while stack:
        node, depth = stack.pop()
        if node.data == "gate_expr":
            depth += 1
            if depth > limit:
                return node.children[0]
        stack.extend((c, depth) for c in reversed(node.children) if isinstance(c, lark.Tree))
    return None


def parse(doc: SourceDocument) -> ParseResult:
    """Parse one document; never raises on malformed input."""
    parser = document_parser()
    path = doc.path
    try:
        tree = parser.parse(doc.text)
    except lark.exceptions.UnexpectedInput as exn:
        diag = _syntax_diagnostic(exn, doc.text, parser, path)
        logger.debug("parse failed for %s: %s", path or "<input>", diag.message)
        return ParseResult(None, [diag])

    deep = _too_deep(tree, config.MAX_CONDITION_DEPTH)
    if deep is not None:
        message = f"condition nests gates more than {config.MAX_CONDITION_DEPTH} levels deep"
        return ParseResult(None, [dg.error(dg.NESTING_TOO_DEEP, message, deep.line, deep.column, path)])

    transformer = _DocTransformer(path)
    try:
        model = transformer.transform(tree)
    except lark.exceptions.VisitError as exn:
        if isinstance(exn.orig_exc, RecursionError):
            return ParseResult(None, [dg.error(dg.NESTING_TOO_DEEP, "document nests too deeply to build", 1, 1, path)])
        line, column = _end_position(doc.text)
        return ParseResult(None, [dg.error(dg.SYNTAX_ERROR, f"malformed document: {exn.orig_exc}", line, column, path)])
    except RecursionError:
        return ParseResult(None, [dg.error(dg.NESTING_TOO_DEEP, "document nests too deeply to build", 1, 1, path)])

    diags = [d if d.path else _with_path(d, path) for d in transformer.diagnostics]
    expected_kind = config.kind_for_path(path) if path else None
    actual_kind = {Catalog: "catalog", SystemManifest: "manifest", Scenario: "scenario"}[type(model)]
    if expected_kind and expected_kind != actual_kind:
        diags.append(dg.warning(dg.KIND_MISMATCH, f"{actual_kind} document in a {expected_kind} file", 1, 1, path))
    if doc.kind and doc.kind != actual_kind:
        diags.append(dg.error(dg.KIND_MISMATCH, f"expected a {doc.kind} document, found {actual_kind}", 1, 1, path))

    if dg.has_errors(diags):
        return ParseResult(None, dg.sort_diagnostics(diags))
    return ParseResult(model, dg.sort_diagnostics(diags))


def _with_path(d: Diagnostic, path: str) -> Diagnostic:
    return Diagnostic(d.severity, d.line, d.column, d.code, d.message, path)


def parse_text(text: str, path: str = "", kind: Optional[str] = None) -> Model:
    result = parse(SourceDocument(text, path, kind))
    if result.model is None:
        raise ParseError(f"cannot parse {path or '<input>'}", result.diagnostics)
    return result.model


def read_document(path) -> SourceDocument:
    """Read a file; raises OSError when unreadable."""
    p = Path(path)
    raw = p.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exn:
        raise ParseError(
            f"{p} is not UTF-8",
            [dg.error(dg.ENCODING_ERROR, f"invalid UTF-8 at byte {exn.start}", 1, 1, str(p))],
        )
    return SourceDocument(text, str(p))


def load_file(path, kind: Optional[str] = None) -> Model:
    doc = read_document(path)
    return parse_text(doc.text, doc.path, kind)
