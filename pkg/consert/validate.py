"""Cross-file validation and lint checks for parsed models."""

from __future__ import annotations

import logging
from typing import Dict, List, Optional

import networkx as nx

from consert import config
from consert import diagnostics as dg
from consert.diagnostics import Diagnostic
from consert.errors import EvaluationError
from consert.evaluation import function_inputs, implies
from consert.events import Scenario
from consert.model import Catalog, ConditionFunction, Ref, SystemManifest

logger = logging.getLogger(__name__)


class _Collector:
    def __init__(self, model, path: str):
        self.model = model
        self.path = path
        self.items: List[Diagnostic] = []

    def error(self, code: str, message: str, kind: str, label: str) -> None:
        line, column = self.model.locate(kind, label)
        self.items.append(dg.error(code, message, line, column, self.path))

    def warning(self, code: str, message: str, kind: str, label: str) -> None:
        line, column = self.model.locate(kind, label)
        self.items.append(dg.warning(code, message, line, column, self.path))


def _check_properties(out: _Collector, catalog: Catalog, service_type: str, props, kind: str, label: str) -> None:
    if catalog.service(service_type) is None:
        out.error(dg.UNKNOWN_SERVICE_TYPE, f"service type '{service_type}' is not in catalog '{catalog.name}'", kind, label)
        return
    for p in props:
        if not catalog.has_property(service_type, p.property_type):
            out.error(
                dg.UNKNOWN_PROPERTY,
                f"property '{p.property_type}' is not declared for service type '{service_type}'",
                kind,
                label,
            )


def _gate_cycles(m: SystemManifest) -> List[List[str]]:
    g = nx.DiGraph()
    for label, body in m.gates:
        g.add_node(label)
        stack = list(body.inputs)
        while stack:
            e = stack.pop()
            if isinstance(e, Ref) and e.kind == "gate":
                g.add_edge(label, e.label)
            elif hasattr(e, "inputs"):
                stack.extend(e.inputs)
    cycles = []
    for component in nx.strongly_connected_components(g):
        members = sorted(component)
        if len(members) > 1 or g.has_edge(members[0], members[0]):
            cycles.append(members)
    return sorted(cycles)


def _check_function(out: _Collector, m: SystemManifest, f: ConditionFunction, cyclic: set) -> bool:
    """Reports undeclared references; returns True when the function is evaluable."""
    declared = {
        "demand": {d.label for d in m.demands},
        "rte": {r.label for r in m.rtes},
        "gate": {label for label, _ in m.gates},
    }
    ok = True
    for kind, labels in (("demand", f.demands), ("rte", f.rtes), ("gate", f.gate_refs)):
        for label in sorted(labels - declared[kind]):
            out.error(dg.UNDECLARED_LABEL, f"{f.output} references undeclared {kind} '{label}'", "guarantee", f.output)
            ok = False
    if f.gate_refs & cyclic:
        ok = False
    return ok


def _validate_manifest(m: SystemManifest, catalog: Catalog, path: str, lint: bool) -> List[Diagnostic]:
    out = _Collector(m, path)

    for name in m.provided:
        if catalog.service(name) is None:
            out.error(dg.UNKNOWN_SERVICE_TYPE, f"service type '{name}' is not in catalog '{catalog.name}'", "provides", name)
    for slot in m.required:
        if catalog.service(slot.service_type) is None:
            out.error(
                dg.UNKNOWN_SERVICE_TYPE,
                f"slot '{slot.name}' expects unknown service type '{slot.service_type}'",
                "requires",
                slot.name,
            )

    for d in m.demands:
        slot = m.slot(d.required_service)
        if slot is None:
            out.error(dg.UNDECLARED_SLOT, f"demand {d.label} is on undeclared slot '{d.required_service}'", "demand", d.label)
        elif slot.service_type != d.service_type:
            out.error(
                dg.SLOT_TYPE_MISMATCH,
                f"demand {d.label} is for {d.service_type} but slot '{slot.name}' expects {slot.service_type}",
                "demand",
                d.label,
            )
        _check_properties(out, catalog, d.service_type, d.properties, "demand", d.label)

    cycles = _gate_cycles(m)
    cyclic = set()
    for members in cycles:
        cyclic.update(members)
        out.error(dg.CYCLIC_CONDITION, f"gates form a cycle: {' -> '.join(members + members[:1])}", "gate", members[0])

    evaluable: Dict[str, bool] = {}
    by_service: Dict[str, list] = {}
    for g, f in m.guarantees:
        by_service.setdefault(g.service_type, []).append((g, f))
        if g.service_type not in m.provided:
            out.error(dg.UNPROVIDED_SERVICE, f"guarantee {g.label} is for '{g.service_type}', which {m.system_id} does not provide", "guarantee", g.label)
        _check_properties(out, catalog, g.service_type, g.properties, "guarantee", g.label)
        st = catalog.service(g.service_type)
        if g.service_level is not None and st is not None and not st.properties:
            out.error(dg.SHORTCUT_UNEXPANDABLE, f"service type '{g.service_type}' has no properties to apply AgPL = {g.service_level} to", "guarantee", g.label)
        evaluable[g.label] = _check_function(out, m, f, cyclic)

    for service, entries in sorted(by_service.items()):
        orders = [g.order for g, _ in entries]
        seen = set()
        for g, _ in entries:
            if g.order in seen:
                out.error(dg.DUPLICATE_ORDER, f"order {g.order} used twice for {service}", "guarantee", g.label)
            seen.add(g.order)
        expected = set(range(1, len(seen) + 1))
        if seen != expected:
            first_bad = min(o for o in seen if o not in expected)
            label = next(g.label for g, _ in entries if g.order == first_bad)
            out.error(
                dg.ORDER_GAP,
                f"orders for {service} must be contiguous from 1, got {sorted(set(orders))}",
                "guarantee",
                label,
            )

    if not lint:
        return out.items
    out.items = []

    # --- lint
    for name in m.provided:
        entries = by_service.get(name, [])
        if not entries:
            out.warning(dg.NO_GUARANTEES, f"{name} has no guarantees and will always be disabled", "provides", name)
            continue
        worst_g, worst_f = entries[-1]
        if evaluable.get(worst_g.label) and not worst_f.is_constant:
            out.warning(dg.NO_DEFAULT_GUARANTEE, f"{name} has no default guarantee that is always granted", "guarantee", worst_g.label)
        _lint_unreachable(out, entries, evaluable)

    used = {"demand": set(), "rte": set(), "gate": set()}
    for _, f in m.guarantees:
        used["demand"] |= f.demands
        used["rte"] |= f.rtes
        used["gate"] |= f.gate_refs
    for d in m.demands:
        if d.label not in used["demand"]:
            out.warning(dg.UNUSED_DEMAND, f"demand {d.label} is not used by any guarantee", "demand", d.label)
    for r in m.rtes:
        if r.label not in used["rte"]:
            out.warning(dg.UNUSED_RTE, f"rte {r.label} is not used by any guarantee", "rte", r.label)
    for label, _ in m.gates:
        if label not in used["gate"]:
            out.warning(dg.UNUSED_GATE, f"gate {label} is not used by any guarantee", "gate", label)

    return out.items


def _lint_unreachable(out: _Collector, entries, evaluable: Dict[str, bool]) -> None:
    for j, (gj, fj) in enumerate(entries):
        if not evaluable.get(gj.label):
            continue
        for gi, fi in entries[:j]:
            if not evaluable.get(gi.label) or gi.order >= gj.order:
                continue
            width = len(set(function_inputs(fi)) | set(function_inputs(fj)))
            if width > config.TRUTH_TABLE_MAX_INPUTS:
                continue
            try:
                shadowed = implies(fj, fi)
            except EvaluationError:
                continue
            if shadowed:
                out.warning(
                    dg.UNREACHABLE_GUARANTEE,
                    f"{gj.label} can never be achieved: whenever it holds, {gi.label} (order {gi.order}) holds too",
                    "guarantee",
                    gj.label,
                )
                break


def _run(model, catalog: Catalog, path: str, lint: bool) -> List[Diagnostic]:
    if isinstance(model, SystemManifest):
        items = _validate_manifest(model, catalog, path, lint)
    elif isinstance(model, (Catalog, Scenario)):
        items = []
    else:
        raise TypeError(f"cannot validate {type(model).__name__}")
    logger.debug("%s %s: %d finding(s)", "linted" if lint else "validated", path or "<model>", len(items))
    return dg.sort_diagnostics(items)


def validate(model, catalog: Catalog, path: str = "") -> List[Diagnostic]:
    """Error findings; empty iff the model is well-formed against the catalog."""
    return _run(model, catalog, path, lint=False)


def lint(model, catalog: Catalog, path: str = "") -> List[Diagnostic]:
    """Warnings about well-formed but suspicious certificates."""
    return _run(model, catalog, path, lint=True)


def check(model, catalog: Catalog, path: str = "") -> List[Diagnostic]:
    return dg.sort_diagnostics(validate(model, catalog, path) + lint(model, catalog, path))
