"""Domain model for conditional safety certificates.

Every value here is an immutable dataclass. Collections are tuples kept in a
canonical order at construction, so two models built from differently ordered
declarations compare equal.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Tuple, Union

import networkx as nx


def frozen_mapping(items=()) -> Mapping:
    """Read-only view over a private copy."""
    return MappingProxyType(dict(items))


def mapping_key(m: Mapping) -> Tuple:
    return tuple(sorted(m.items()))


class Ordering(enum.Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@functools.total_ordering
class IntegrityLevel(enum.Enum):
    """Agricultural performance level, QM being the weakest."""

    QM = "QM"
    A = "a"
    B = "b"
    C = "c"
    D = "d"
    E = "e"

    @property
    def rank(self) -> int:
        return _LEVEL_RANKS[self]

    def __lt__(self, other):
        if not isinstance(other, IntegrityLevel):
            return NotImplemented
        return self.rank < other.rank

    def __str__(self) -> str:
        return self.value


_LEVEL_RANKS = {lvl: i for i, lvl in enumerate(IntegrityLevel)}


def compare_levels(x: IntegrityLevel, y: IntegrityLevel) -> Ordering:
    if x.rank < y.rank:
        return Ordering.LESS
    if x.rank > y.rank:
        return Ordering.GREATER
    return Ordering.EQUAL


class Mode(enum.Enum):
    STANDSTILL = "Standstill"
    MOVING = "Moving"
    ANY = "Any"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PropertyParams:
    window: Optional[int] = None  # seconds; None = unbounded
    mode: Mode = Mode.ANY

    def __post_init__(self):
        if self.window is not None and self.window < 0:
            raise ValueError(f"negative window: {self.window}")

    def render(self) -> str:
        window = "" if self.window is None else f"{self.window}s"
        return "{" + f"{window},{self.mode}" + "}"


def params_dominate(offered: PropertyParams, demanded: PropertyParams) -> bool:
    mode_ok = demanded.mode is Mode.ANY or offered.mode is demanded.mode
    if not mode_ok:
        return False
    if offered.window is None:
        return True
    if demanded.window is None:
        return False
    return offered.window <= demanded.window


@dataclass(frozen=True)
class PropertyGuarantee:
    property_type: str
    params: PropertyParams
    level: IntegrityLevel

    def render(self) -> str:
        return f"{self.property_type}{self.params.render()}.AgPL = {self.level}"


@dataclass(frozen=True)
class Guarantee:
    service_type: str
    order: int
    label: str
    service_level: Optional[IntegrityLevel] = None
    properties: Tuple[PropertyGuarantee, ...] = ()

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"guarantee order must be >= 1, got {self.order}")
        object.__setattr__(self, "properties", tuple(self.properties))

    def render(self) -> str:
        items = []
        if self.service_level is not None:
            items.append(f"AgPL = {self.service_level}")
        items.extend(p.render() for p in self.properties)
        head = f"{self.service_type}({self.order}):"
        return f"{head} {', '.join(items)}" if items else head


@dataclass(frozen=True)
class Demand:
    label: str
    required_service: str
    service_type: str
    properties: Tuple[PropertyGuarantee, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "properties", tuple(self.properties))

    def render(self) -> str:
        head = f"{self.service_type}:"
        if not self.properties:
            return head
        return f"{head} {', '.join(p.render() for p in self.properties)}"


class Tri(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    def as_bool(self) -> bool:
        # unknown is fail-safe false
        return self is Tri.TRUE

    def __str__(self) -> str:
        return self.value


class RteKind(enum.Enum):
    INTRA = "intra-device"
    INTER = "inter-device"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class RuntimeEvidence:
    label: str
    kind: RteKind
    value: Tri = Tri.UNKNOWN


# --- Condition expressions


@dataclass(frozen=True)
class Const:
    def render(self) -> str:
        return "TRUE"


TRUE = Const()

REF_KINDS = ("demand", "rte", "gate")
GATE_OPS = ("AND", "OR")


@dataclass(frozen=True)
class Ref:
    kind: str
    label: str

    def __post_init__(self):
        if self.kind not in REF_KINDS:
            raise ValueError(f"unknown reference kind: {self.kind}")

    def render(self) -> str:
        return f"{self.kind} {self.label}"


@dataclass(frozen=True, eq=False, repr=False)
class Gate:
    """AND/OR node; its canonical text is computed once and is its identity."""

    op: str
    inputs: Tuple["Expr", ...]

    def __post_init__(self):
        if self.op not in GATE_OPS:
            raise ValueError(f"unsupported gate: {self.op}")
        if not self.inputs:
            raise ValueError(f"{self.op} gate needs at least one input")
        inputs = tuple(sorted(self.inputs, key=lambda e: e.render()))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "_text", f"{self.op}({', '.join(i.render() for i in inputs)})")

    def render(self) -> str:
        return self._text

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        return self._text == other._text

    def __hash__(self) -> int:
        return hash(self._text)

    def __repr__(self) -> str:
        return f"Gate({self._text!r})"


Expr = Union[Const, Ref, Gate]
NodeId = Tuple[str, str]


def node_id(expr: Expr) -> NodeId:
    if isinstance(expr, Const):
        return ("const", "TRUE")
    if isinstance(expr, Ref):
        return (expr.kind, expr.label)
    return ("gate", expr.render())


def reachable_gates(expr: Expr, gates: Mapping[str, Gate]) -> Tuple[Tuple[str, Gate], ...]:
    """Named gates transitively referenced from expr (stops on cycles)."""
    found: Dict[str, Gate] = {}
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Gate):
            stack.extend(e.inputs)
        elif isinstance(e, Ref) and e.kind == "gate" and e.label not in found:
            body = gates.get(e.label)
            if body is not None:
                found[e.label] = body
                stack.append(body)
    return tuple(sorted(found.items()))


@dataclass(frozen=True)
class ConditionFunction:
    """Boolean function gating one guarantee.

    `expr` is the output's input; named gates it references are carried in
    `gates`. The (D, R, BG, E, g) view is available through `graph()`.
    """

    output: str
    expr: Expr = TRUE
    gates: Tuple[Tuple[str, Gate], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(sorted(self.gates)))

    @property
    def gate_map(self) -> Dict[str, Gate]:
        return dict(self.gates)

    def walk(self) -> Iterator[Expr]:
        gate_map = self.gate_map
        seen = set()
        stack = [self.expr]
        while stack:
            e = stack.pop()
            yield e
            if isinstance(e, Gate):
                stack.extend(e.inputs)
            elif isinstance(e, Ref) and e.kind == "gate" and e.label not in seen:
                seen.add(e.label)
                if e.label in gate_map:
                    stack.append(gate_map[e.label])

    def _labels(self, kind: str) -> FrozenSet[str]:
        return frozenset(e.label for e in self.walk() if isinstance(e, Ref) and e.kind == kind)

    @property
    def demands(self) -> FrozenSet[str]:
        return self._labels("demand")

    @property
    def rtes(self) -> FrozenSet[str]:
        return self._labels("rte")

    @property
    def gate_refs(self) -> FrozenSet[str]:
        return self._labels("gate")

    @property
    def is_constant(self) -> bool:
        return not self.demands and not self.rtes

    def graph(self) -> nx.DiGraph:
        gate_map = self.gate_map
        g = nx.DiGraph()
        out = ("output", self.output)
        g.add_edge(node_id(self.expr), out)
        seen = set()
        stack = [self.expr]
        while stack:
            e = stack.pop()
            nid = node_id(e)
            if nid in seen:
                continue
            seen.add(nid)
            g.add_node(nid)
            body = e if isinstance(e, Gate) else None
            if isinstance(e, Ref) and e.kind == "gate":
                body = gate_map.get(e.label)
            if body is None:
                continue
            for i in body.inputs:
                g.add_edge(node_id(i), nid)
                stack.append(i)
        return g


@dataclass(frozen=True)
class Slot:
    name: str
    service_type: str


@dataclass(frozen=True)
class ServiceType:
    name: str
    properties: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "properties", tuple(sorted(self.properties)))


@dataclass(frozen=True)
class Catalog:
    name: str
    service_types: Tuple[ServiceType, ...] = ()
    source: Mapping = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "source", frozen_mapping(self.source))
        object.__setattr__(self, "service_types", tuple(sorted(self.service_types, key=lambda s: s.name)))

    def service(self, name: str) -> Optional[ServiceType]:
        for st in self.service_types:
            if st.name == name:
                return st
        return None

    def has_property(self, service_type: str, prop: str) -> bool:
        st = self.service(service_type)
        return st is not None and prop in st.properties

    def locate(self, kind: str, label: str) -> Tuple[int, int]:
        return self.source.get((kind, label), (1, 1))


def expand_guarantee(g: Guarantee, catalog: Catalog) -> Guarantee:
    """Apply the service-level shortcut; idempotent."""
    if g.service_level is None:
        return g
    st = catalog.service(g.service_type)
    if st is None:
        return g
    props: List[PropertyGuarantee] = list(g.properties)
    for name in st.properties:
        p = PropertyGuarantee(name, PropertyParams(None, Mode.ANY), g.service_level)
        if p not in props:
            props.append(p)
    return Guarantee(
        service_type=g.service_type,
        order=g.order,
        label=g.label,
        service_level=g.service_level,
        properties=tuple(props),
    )


GuaranteeEntry = Tuple[Guarantee, ConditionFunction]


@dataclass(frozen=True)
class ConSert:
    services: Mapping[str, Tuple[GuaranteeEntry, ...]]

    def __post_init__(self):
        object.__setattr__(self, "services", frozen_mapping(self.services))

    def __hash__(self) -> int:
        return hash(mapping_key(self.services))

    def for_service(self, service_type: str) -> Tuple[GuaranteeEntry, ...]:
        return self.services.get(service_type, ())


@dataclass(frozen=True)
class SystemManifest:
    system_id: str
    provided: Tuple[str, ...] = ()
    required: Tuple[Slot, ...] = ()
    rtes: Tuple[RuntimeEvidence, ...] = ()
    demands: Tuple[Demand, ...] = ()
    gates: Tuple[Tuple[str, Gate], ...] = ()
    guarantees: Tuple[GuaranteeEntry, ...] = ()
    source: Mapping = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "source", frozen_mapping(self.source))
        object.__setattr__(self, "provided", tuple(sorted(self.provided)))
        object.__setattr__(self, "required", tuple(sorted(self.required, key=lambda s: s.name)))
        object.__setattr__(self, "rtes", tuple(sorted(self.rtes, key=lambda r: r.label)))
        object.__setattr__(self, "demands", tuple(sorted(self.demands, key=lambda d: d.label)))
        object.__setattr__(self, "gates", tuple(sorted(self.gates)))
        object.__setattr__(
            self,
            "guarantees",
            tuple(sorted(self.guarantees, key=lambda e: (e[0].service_type, e[0].order, e[0].label))),
        )

    @property
    def consert(self) -> ConSert:
        services: Dict[str, List[GuaranteeEntry]] = {}
        for entry in self.guarantees:
            services.setdefault(entry[0].service_type, []).append(entry)
        return ConSert({k: tuple(v) for k, v in services.items()})

    def slot(self, name: str) -> Optional[Slot]:
        for s in self.required:
            if s.name == name:
                return s
        return None

    def demand(self, label: str) -> Optional[Demand]:
        for d in self.demands:
            if d.label == label:
                return d
        return None

    def rte(self, label: str) -> Optional[RuntimeEvidence]:
        for r in self.rtes:
            if r.label == label:
                return r
        return None

    def locate(self, kind: str, label: str) -> Tuple[int, int]:
        return self.source.get((kind, label), self.source.get(("system", self.system_id), (1, 1)))


ServiceKey = Tuple[str, str]  # (system_id, service_type)
SlotKey = Tuple[str, str]  # (system_id, slot)


@dataclass(frozen=True)
class CompositionGraph:
    systems: Mapping[str, SystemManifest] = field(default_factory=dict)
    bindings: Mapping[SlotKey, ServiceKey] = field(default_factory=dict)
    root: Optional[ServiceKey] = None

    def __post_init__(self):
        object.__setattr__(self, "systems", frozen_mapping(self.systems))
        object.__setattr__(self, "bindings", frozen_mapping(self.bindings))

    def __hash__(self) -> int:
        return hash((mapping_key(self.systems), mapping_key(self.bindings), self.root))

    def dependency_graph(self) -> nx.DiGraph:
        """System-level dependencies, edges consumer -> provider."""
        g = nx.DiGraph()
        g.add_nodes_from(sorted(self.systems))
        for (consumer, _slot), (provider, _service) in sorted(self.bindings.items()):
            g.add_edge(consumer, provider)
        return g

    def provider_of(self, system_id: str, slot: str) -> Optional[ServiceKey]:
        return self.bindings.get((system_id, slot))

    def with_system(self, manifest: SystemManifest) -> "CompositionGraph":
        systems = dict(self.systems)
        systems[manifest.system_id] = manifest
        return CompositionGraph(systems, dict(self.bindings), self.root)

    def without_system(self, system_id: str) -> "CompositionGraph":
        systems = {k: v for k, v in self.systems.items() if k != system_id}
        bindings = {
            k: v for k, v in self.bindings.items() if k[0] != system_id and v[0] != system_id
        }
        root = None if self.root and self.root[0] == system_id else self.root
        return CompositionGraph(systems, bindings, root)

    def with_binding(self, consumer: SlotKey, provider: ServiceKey) -> "CompositionGraph":
        bindings = dict(self.bindings)
        bindings[consumer] = provider
        return CompositionGraph(dict(self.systems), bindings, self.root)

    def with_root(self, root: Optional[ServiceKey]) -> "CompositionGraph":
        return CompositionGraph(dict(self.systems), dict(self.bindings), root)


@dataclass(frozen=True)
class DemandMatch:
    demand: str
    slot: str
    provider: ServiceKey
    guarantee: Guarantee


@dataclass(frozen=True)
class Trace:
    inputs: Tuple[Tuple[str, str, bool], ...] = ()  # (kind, label, value)
    matches: Tuple[DemandMatch, ...] = ()
    constant: bool = False
    reason: str = ""


@dataclass(frozen=True)
class ServiceResult:
    system_id: str
    service_type: str
    achieved: Optional[Guarantee]
    trace: Trace

    @property
    def order(self) -> Optional[int]:
        return None if self.achieved is None else self.achieved.order


@dataclass(frozen=True)
class EvaluationResult:
    services: Mapping[ServiceKey, ServiceResult] = field(default_factory=dict)
    root: Optional[ServiceKey] = None

    def __post_init__(self):
        object.__setattr__(self, "services", frozen_mapping(self.services))

    def __hash__(self) -> int:
        return hash((mapping_key(self.services), self.root))

    def get(self, system_id: str, service_type: str) -> Optional[ServiceResult]:
        return self.services.get((system_id, service_type))

    def orders(self) -> Dict[ServiceKey, Optional[int]]:
        return {k: v.order for k, v in sorted(self.services.items())}
