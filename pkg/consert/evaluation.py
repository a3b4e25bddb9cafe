"""Demand matching, condition evaluation and leaf-first composition evaluation."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from consert.errors import CompositionError, EvaluationError
from consert.model import (
    Catalog,
    CompositionGraph,
    ConditionFunction,
    ConSert,
    Const,
    Demand,
    DemandMatch,
    EvaluationResult,
    Guarantee,
    GuaranteeEntry,
    Ref,
    ServiceKey,
    ServiceResult,
    Trace,
    Tri,
    expand_guarantee,
    frozen_mapping,
    mapping_key,
    node_id,
    params_dominate,
)

logger = logging.getLogger(__name__)

NO_FUNCTION_SATISFIED = "no function satisfied"

RteValues = Mapping[Tuple[str, str], Tri]  # (system_id, label) -> value


@dataclass(frozen=True)
class Assignment:
    demand_values: Mapping[str, bool] = field(default_factory=dict)
    rte_values: Mapping[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "demand_values", frozen_mapping(self.demand_values))
        object.__setattr__(self, "rte_values", frozen_mapping(self.rte_values))

    def __hash__(self) -> int:
        return hash((mapping_key(self.demand_values), mapping_key(self.rte_values)))


def match_demand(d: Demand, g: Guarantee, catalog: Catalog) -> bool:
    if g.service_type != d.service_type:
        return False
    for p in d.properties:
        if not catalog.has_property(d.service_type, p.property_type):
            raise EvaluationError(
                f"property {p.property_type} is not cataloged for {d.service_type}", "UNKNOWN_PROPERTY"
            )
    offered = expand_guarantee(g, catalog).properties
    for p in d.properties:
        met = any(
            q.property_type == p.property_type
            and params_dominate(q.params, p.params)
            and q.level >= p.level
            for q in offered
        )
        if not met:
            return False
    return True


def evaluate_function(f: ConditionFunction, a: Assignment) -> bool:
    missing = sorted(
        [f"demand {x}" for x in f.demands - a.demand_values.keys()]
        + [f"rte {x}" for x in f.rtes - a.rte_values.keys()]
    )
    if missing:
        raise EvaluationError(f"assignment for {f.output} lacks {', '.join(missing)}", "MISSING_INPUT")

    gate_map = f.gate_map
    memo: Dict = {}
    active = set()

    def ev(e) -> bool:
        if isinstance(e, Const):
            return True
        if isinstance(e, Ref):
            if e.kind == "demand":
                return a.demand_values[e.label]
            if e.kind == "rte":
                return a.rte_values[e.label]
            body = gate_map.get(e.label)
            if body is None:
                raise EvaluationError(f"gate {e.label} is not declared", "UNDECLARED_LABEL")
        else:
            body = e
        key = node_id(e)
        if key in memo:
            return memo[key]
        if key in active:
            raise EvaluationError(f"condition of {f.output} is cyclic at {key[1]}", "CYCLIC_CONDITION")
        active.add(key)
        values = [ev(i) for i in body.inputs]
        active.discard(key)
        memo[key] = all(values) if body.op == "AND" else any(values)
        return memo[key]

    return ev(f.expr)


def function_inputs(f: ConditionFunction) -> List[Tuple[str, str]]:
    return [("demand", x) for x in sorted(f.demands)] + [("rte", x) for x in sorted(f.rtes)]


def _assignment(inputs: Sequence[Tuple[str, str]], values: Sequence[bool]) -> Assignment:
    demands = {label: v for (kind, label), v in zip(inputs, values) if kind == "demand"}
    rtes = {label: v for (kind, label), v in zip(inputs, values) if kind == "rte"}
    return Assignment(demands, rtes)


def truth_table(f: ConditionFunction) -> Tuple[List[Tuple[str, str]], Dict[Tuple[bool, ...], bool]]:
    inputs = function_inputs(f)
    table = {}
    for values in itertools.product((False, True), repeat=len(inputs)):
        table[values] = evaluate_function(f, _assignment(inputs, values))
    return inputs, table


def implies(f: ConditionFunction, g: ConditionFunction) -> bool:
    """True iff every assignment satisfying f also satisfies g."""
    inputs = sorted(set(function_inputs(f)) | set(function_inputs(g)))
    for values in itertools.product((False, True), repeat=len(inputs)):
        a = _assignment(inputs, values)
        if evaluate_function(f, a) and not evaluate_function(g, a):
            return False
    return True


def _best_entry(entries: Sequence[GuaranteeEntry], a: Assignment) -> Optional[GuaranteeEntry]:
    for g, f in sorted(entries, key=lambda e: e[0].order):
        if evaluate_function(f, a):
            return g, f
    return None


def best_guarantee(c: ConSert, service: str, a: Assignment) -> Optional[Guarantee]:
    entry = _best_entry(c.for_service(service), a)
    return None if entry is None else entry[0]


# --- composition


def check_composition(graph: CompositionGraph) -> None:
    for (consumer, slot_name), (provider, service) in sorted(graph.bindings.items()):
        if consumer not in graph.systems:
            raise CompositionError(f"binding from unknown system {consumer}", "UNKNOWN_SYSTEM")
        if provider not in graph.systems:
            raise CompositionError(f"binding to unknown system {provider}", "UNKNOWN_SYSTEM")
        slot = graph.systems[consumer].slot(slot_name)
        if slot is None:
            raise CompositionError(f"{consumer} has no required slot {slot_name}", "UNKNOWN_SLOT")
        if service not in graph.systems[provider].provided:
            raise CompositionError(f"{provider} does not provide {service}", "INCOMPATIBLE_BINDING")
        if slot.service_type != service:
            raise CompositionError(
                f"{consumer}.{slot_name} expects {slot.service_type}, {provider} offers {service}",
                "INCOMPATIBLE_BINDING",
            )
    deps = graph.dependency_graph()
    if not nx.is_directed_acyclic_graph(deps):
        cycle = nx.find_cycle(deps)
        path = " -> ".join([u for u, _ in cycle] + [cycle[0][0]])
        raise CompositionError(f"service dependencies form a cycle: {path}", "CYCLIC_DEPENDENCY")
    if graph.root is not None:
        system_id, service = graph.root
        if system_id not in graph.systems or service not in graph.systems[system_id].provided:
            raise CompositionError(f"root {system_id}.{service} is not a live provided service", "UNKNOWN_SYSTEM")


def leaf_first_order(graph: CompositionGraph) -> List[str]:
    # Reversed edges run provider -> consumer, so sources are the leaves.
    return list(nx.lexicographical_topological_sort(graph.dependency_graph().reverse()))


def topological_orders(graph: CompositionGraph) -> Iterator[List[str]]:
    return nx.all_topological_sorts(graph.dependency_graph().reverse())


def _check_order(graph: CompositionGraph, order: Sequence[str]) -> None:
    if sorted(order) != sorted(graph.systems):
        raise CompositionError("evaluation order must list every live system once", "BAD_ORDER")
    position = {sid: i for i, sid in enumerate(order)}
    for consumer, provider in graph.dependency_graph().edges:
        if position[provider] > position[consumer]:
            raise CompositionError(f"{provider} must be evaluated before {consumer}", "BAD_ORDER")


def evaluate_composition(
    graph: CompositionGraph,
    catalog: Catalog,
    rtes: Optional[RteValues] = None,
    order: Optional[Sequence[str]] = None,
) -> EvaluationResult:
    check_composition(graph)
    if order is None:
        order = leaf_first_order(graph)
    else:
        _check_order(graph, order)
    rtes = rtes or {}

    results: Dict[ServiceKey, ServiceResult] = {}
    for system_id in order:
        m = graph.systems[system_id]
        demand_values: Dict[str, bool] = {}
        matches: Dict[str, DemandMatch] = {}
        for d in m.demands:
            provider = graph.provider_of(system_id, d.required_service)
            offered = results.get(provider) if provider is not None else None
            ok = bool(offered and offered.achieved and match_demand(d, offered.achieved, catalog))
            if ok:
                matches[d.label] = DemandMatch(d.label, d.required_service, provider, offered.achieved)
            demand_values[d.label] = ok
        rte_values = {r.label: rtes.get((system_id, r.label), r.value).as_bool() for r in m.rtes}
        a = Assignment(demand_values, rte_values)

        consert = m.consert
        for service in m.provided:
            entry = _best_entry(consert.for_service(service), a)
            if entry is None:
                trace = Trace(reason=NO_FUNCTION_SATISFIED)
                achieved = None
            else:
                g, f = entry
                inputs = tuple(
                    (kind, label, demand_values[label] if kind == "demand" else rte_values[label])
                    for kind, label in function_inputs(f)
                )
                used = tuple(matches[label] for kind, label, value in inputs if kind == "demand" and value)
                trace = Trace(inputs=inputs, matches=used, constant=f.is_constant)
                achieved = expand_guarantee(g, catalog)
            results[(system_id, service)] = ServiceResult(system_id, service, achieved, trace)
            logger.debug(
                "%s.%s -> %s", system_id, service, "none" if achieved is None else f"order {achieved.order}"
            )
    return EvaluationResult(dict(sorted(results.items())), graph.root)


# --- explanation


@dataclass(frozen=True)
class TraceNode:
    kind: str  # guarantee | demand | rte | none
    system_id: str
    label: str
    text: str
    children: Tuple["TraceNode", ...] = ()

    def leaves(self) -> List["TraceNode"]:
        if not self.children:
            return [self]
        out = []
        for c in self.children:
            out.extend(c.leaves())
        return out

    def render(self, indent: int = 0) -> List[str]:
        lines = ["  " * indent + self.text]
        for c in self.children:
            lines.extend(c.render(indent + 1))
        return lines


def _guarantee_node(result: EvaluationResult, res: ServiceResult) -> TraceNode:
    g = res.achieved
    head = f"{res.system_id}.{res.service_type} order {g.order} {g.label}"
    matches = {m.demand: m for m in res.trace.matches}
    children = []
    for kind, label, value in res.trace.inputs:
        if not value:
            continue
        if kind == "rte":
            children.append(TraceNode("rte", res.system_id, label, f"rte {label} = true"))
            continue
        m = matches[label]
        provider = result.services[m.provider]
        children.append(
            TraceNode(
                "demand",
                res.system_id,
                label,
                f"demand {label} via {m.slot} -> {m.provider[0]}.{m.provider[1]}",
                (_guarantee_node(result, provider),),
            )
        )
    if not children:
        head += " [TRUE]"
    return TraceNode("guarantee", res.system_id, g.label, head, tuple(children))


def explain(result: EvaluationResult, system_id: str, service_type: str) -> TraceNode:
    res = result.get(system_id, service_type)
    if res is None:
        raise EvaluationError(f"{system_id}.{service_type} is not part of the result", "UNKNOWN_SERVICE")
    if res.achieved is None:
        return TraceNode("none", system_id, service_type, f"{system_id}.{service_type} none: {res.trace.reason}")
    return _guarantee_node(result, res)
