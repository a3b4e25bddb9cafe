import functools

import lark

DOCUMENT_GRAMMAR = r"""
start: catalog | manifest | scenario

// catalogs
catalog: "catalog" NAME servicetype*
servicetype: "servicetype" NAME "{" property_decl* "}"
property_decl: "property" NAME "(" "window" "," "mode" ")"

// system manifests
manifest: "system" NAME _manifest_decl*
_manifest_decl: provides | requires | rte_decl | demand_decl | gate_decl | guarantee_decl
provides: "provides" NAME
requires: "requires" NAME ":" NAME
rte_decl: "rte" NAME "kind" RTE_KIND
demand_decl: "demand" NAME "=" QUOTED "on" NAME
gate_decl: "gate" NAME "=" gate_expr
guarantee_decl: "guarantee" NAME "=" QUOTED "when" expr

?expr: "TRUE" -> const_true
     | "demand" NAME -> demand_ref
     | "rte" NAME -> rte_ref
     | "gate" NAME -> gate_ref
     | gate_expr
gate_expr: GATE_OP "(" expr ("," expr)* ")"

// scenarios
scenario: "scenario" NAME _scenario_item*
_scenario_item: load | "event" _event
load: "load" PATH
_event: join | leave | bind | set_rte | set_root | expect_order | expect_none
join: "join" NAME
leave: "leave" NAME
bind: "bind" NAME "." NAME "->" NAME "." NAME
set_rte: "set-rte" NAME "." NAME RTE_VALUE
set_root: "root" NAME "." NAME
expect_order: "expect" NAME "." NAME "order" INT
expect_none: "expect" NAME "." NAME "none"

GATE_OP: "AND" | "OR"
RTE_KIND: "intra-device" | "inter-device"
RTE_VALUE: "true" | "false" | "unknown"
NAME: /[A-Za-z_][A-Za-z0-9_]*/
INT: /[0-9]+/
QUOTED: /"[^"\n]*"/
PATH: /[^\s#"]+/
COMMENT: /#[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""

# Contents of the quoted guarantee and demand strings.
QUOTED_GRAMMAR = r"""
guarantee_body: NAME "(" INT ")" ":" [_item ("," _item)*] [","]
demand_body: NAME ":" [prop ("," prop)*] [","]
_item: service_level | prop
service_level: "AgPL" "=" NAME
prop: NAME PARAMS "." "AgPL" "=" NAME

NAME: /[A-Za-z_][A-Za-z0-9_]*/
INT: /[0-9]+/
PARAMS: /\{[^{}"]*\}/

%import common.WS
%ignore WS
"""


@functools.lru_cache(maxsize=None)
def document_parser() -> lark.Lark:
    return lark.Lark(DOCUMENT_GRAMMAR, start="start", parser="lalr", lexer="contextual")


@functools.lru_cache(maxsize=None)
def quoted_parser() -> lark.Lark:
    return lark.Lark(
        QUOTED_GRAMMAR,
        start=["guarantee_body", "demand_body"],
        parser="lalr",
        lexer="contextual",
    )


def describe_terminal(parser: lark.Lark, name: str) -> str:
    if name == "$END":
        return "end of input"
    try:
        term = parser.get_terminal(name)
    except KeyError:
        return name
    if isinstance(term.pattern, lark.lexer.PatternStr):
        return f"'{term.pattern.value}'"
    return name


def expects_keyword(parser: lark.Lark, expected) -> bool:
    """True if any expected terminal is a literal word such as `provides`."""
    for name in expected:
        try:
            term = parser.get_terminal(name)
        except KeyError:
            continue
        if isinstance(term.pattern, lark.lexer.PatternStr) and term.pattern.value[:1].isalpha():
            return True
    return False
