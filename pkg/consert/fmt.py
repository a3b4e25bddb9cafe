from __future__ import annotations

from typing import List

from consert.events import Scenario
from consert.model import Catalog, SystemManifest


def _catalog_lines(catalog: Catalog) -> List[str]:
    lines = [f"catalog {catalog.name}"]
    for st in catalog.service_types:
        lines.append(f"servicetype {st.name} {{")
        lines.extend(f"  property {p}(window, mode)" for p in st.properties)
        lines.append("}")
    return lines


def _manifest_lines(m: SystemManifest) -> List[str]:
    lines = [f"system {m.system_id}"]
    lines.extend(f"provides {name}" for name in m.provided)
    lines.extend(f"requires {s.name}: {s.service_type}" for s in m.required)
    lines.extend(f"rte {r.label} kind {r.kind}" for r in m.rtes)
    lines.extend(f'demand {d.label} = "{d.render()}" on {d.required_service}' for d in m.demands)
    lines.extend(f"gate {label} = {gate.render()}" for label, gate in m.gates)
    lines.extend(f'guarantee {g.label} = "{g.render()}" when {f.expr.render()}' for g, f in m.guarantees)
    return lines


def _scenario_lines(s: Scenario) -> List[str]:
    lines = [f"scenario {s.name}"]
    lines.extend(f"load {path}" for path in s.loads)
    lines.extend(f"event {step.render()}" for step in s.steps)
    return lines


def format_canonical(model) -> str:
    if isinstance(model, Catalog):
        lines = _catalog_lines(model)
    elif isinstance(model, SystemManifest):
        lines = _manifest_lines(model)
    elif isinstance(model, Scenario):
        lines = _scenario_lines(model)
    else:
        raise TypeError(f"cannot format {type(model).__name__}")
    return "\n".join(lines) + "\n"
