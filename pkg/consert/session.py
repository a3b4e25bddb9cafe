"""Event-driven composition session and scenario replay.

Events are applied strictly in order. Every accepted event triggers a full
re-evaluation of the composition; a rejected event leaves the session as it was.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Tuple

from consert import config
from consert.dsl import parse, read_document
from consert.errors import ConsertError, ParseError, ScenarioError, SessionError
from consert.evaluation import check_composition, evaluate_composition
from consert.events import Bind, Event, Expect, Join, Leave, Scenario, SetRoot, SetRte, with_seq
from consert.model import (
    Catalog,
    CompositionGraph,
    EvaluationResult,
    SystemManifest,
    Tri,
    frozen_mapping,
    mapping_key,
)
from consert.registry import Registry

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Change:
    system_id: str
    service_type: str
    old: Optional[int]
    new: Optional[int]

    @property
    def degraded(self) -> bool:
        if self.new is None:
            return self.old is not None
        return self.old is not None and self.new > self.old

    def render(self) -> str:
        old = "none" if self.old is None else str(self.old)
        new = "none" if self.new is None else str(self.new)
        return f"{self.system_id}.{self.service_type} {old}->{new}"


Delta = Tuple[Change, ...]


def render_delta(delta: Delta) -> str:
    return "; ".join(c.render() for c in delta) if delta else "-"


def diff_results(old: EvaluationResult, new: EvaluationResult) -> Delta:
    before, after = old.orders(), new.orders()
    changes = []
    for key in sorted(set(before) | set(after)):
        if before.get(key) != after.get(key):
            changes.append(Change(key[0], key[1], before.get(key), after.get(key)))
    return tuple(changes)


@dataclass(frozen=True)
class Session:
    catalog: Catalog
    registry: Registry = field(compare=False, repr=False)
    graph: CompositionGraph = field(default_factory=CompositionGraph)
    rtes: Mapping[Tuple[str, str], Tri] = field(default_factory=dict)
    log: Tuple[Event, ...] = ()
    result: EvaluationResult = field(default_factory=EvaluationResult)

    def __post_init__(self):
        object.__setattr__(self, "rtes", frozen_mapping(self.rtes))

    def __hash__(self) -> int:
        return hash((self.catalog, self.graph, mapping_key(self.rtes), self.log, self.result))


def new_session(catalog: Catalog, registry: Registry) -> Session:
    return Session(catalog, registry)


def _require_live(graph: CompositionGraph, system_id: str) -> SystemManifest:
    m = graph.systems.get(system_id)
    if m is None:
        raise SessionError(f"{system_id} is not part of the composition", "NOT_LIVE")
    return m


def apply_event(s: Session, e: Event) -> Tuple[Session, Delta]:
    e = with_seq(e, len(s.log) + 1)
    graph = s.graph
    rtes = dict(s.rtes)

    if isinstance(e, Join):
        if e.system_id in graph.systems:
            raise SessionError(f"{e.system_id} has already joined", "ALREADY_LIVE")
        try:
            manifest = s.registry.load(e.system_id)
        except ConsertError as exn:
            if exn.code == "NOT_FOUND":
                raise SessionError(f"{e.system_id} is not published in the registry", "UNKNOWN_SYSTEM") from exn
            raise
        graph = graph.with_system(manifest)
    elif isinstance(e, Leave):
        _require_live(graph, e.system_id)
        if graph.root is not None and graph.root[0] == e.system_id:
            raise SessionError(f"{e.system_id} hosts the root service and cannot leave", "ROOT_LEAVE")
        graph = graph.without_system(e.system_id)
        rtes = {k: v for k, v in rtes.items() if k[0] != e.system_id}
    elif isinstance(e, Bind):
        _require_live(graph, e.consumer)
        _require_live(graph, e.provider)
        graph = graph.with_binding((e.consumer, e.slot), (e.provider, e.service_type))
    elif isinstance(e, SetRte):
        m = _require_live(graph, e.system_id)
        if m.rte(e.label) is None:
            raise SessionError(f"{e.system_id} declares no rte {e.label}", "UNKNOWN_RTE")
        rtes[(e.system_id, e.label)] = e.value
    elif isinstance(e, SetRoot):
        m = _require_live(graph, e.system_id)
        if e.service_type not in m.provided:
            raise SessionError(f"{e.system_id} does not provide {e.service_type}", "UNKNOWN_SERVICE")
        graph = graph.with_root((e.system_id, e.service_type))
    else:
        raise SessionError(f"unsupported event {e!r}", "BAD_EVENT")

    check_composition(graph)
    result = evaluate_composition(graph, s.catalog, rtes)
    delta = diff_results(s.result, result)
    logger.debug("event %d %s: %s", e.seq, e.render(), render_delta(delta))
    for change in delta:
        if change.degraded:
            logger.info("degradation after %s: %s", e.render(), change.render())
    return Session(s.catalog, s.registry, graph, rtes, s.log + (e,), result), delta


def replay_log(log: Iterable[Event], registry: Registry, catalog: Catalog) -> Session:
    s = new_session(catalog, registry)
    for e in log:
        s, _ = apply_event(s, e)
    return s


# --- scenarios


@dataclass(frozen=True)
class TranscriptLine:
    seq: str
    event: str
    delta: str
    verdict: str

    def render(self) -> str:
        return config.TRANSCRIPT_SEP.join([self.seq, self.event, self.delta, self.verdict])


@dataclass(frozen=True)
class Transcript:
    lines: Tuple[TranscriptLine, ...]
    failures: int
    session: Optional[Session] = field(default=None, compare=False)

    def render(self) -> str:
        return "".join(line.render() + "\n" for line in self.lines)


def _check_expectation(s: Session, x: Expect) -> str:
    if x.system_id not in s.graph.systems:
        got = "not live"
    else:
        res = s.result.get(x.system_id, x.service_type)
        if res is None:
            got = "unknown service"
        elif res.order == x.order:
            return "PASS"
        else:
            got = "none" if res.order is None else f"order {res.order}"
    return f"FAIL (got {got})"


def _resolve_loads(scenario: Scenario, base_dir: Path) -> Tuple[Optional[Catalog], List[SystemManifest]]:
    catalog = None
    manifests = []
    for rel in scenario.loads:
        path = base_dir / rel
        try:
            doc = read_document(path)
        except OSError as exn:
            raise ScenarioError(f"cannot load {rel}: {exn.strerror or exn}", "UNRESOLVABLE")
        except ParseError as exn:
            raise ScenarioError(f"cannot load {rel}: {exn.diagnostics[0].message}", "UNRESOLVABLE")
        result = parse(doc)
        if result.model is None:
            first = result.diagnostics[0]
            raise ScenarioError(f"cannot load {rel}: {first.line}:{first.column}: {first.message}", "UNRESOLVABLE")
        model = result.model
        if isinstance(model, Catalog):
            if catalog is not None and catalog != model:
                raise ScenarioError(f"{rel}: a scenario loads exactly one catalog", "UNRESOLVABLE")
            catalog = model
        elif isinstance(model, SystemManifest):
            manifests.append(model)
        else:
            raise ScenarioError(f"{rel}: scenarios cannot load other scenarios", "UNRESOLVABLE")
    return catalog, manifests


def replay(scenario: Scenario, registry: Registry, base_dir=".") -> Transcript:
    """Load, publish, then apply every step; expectation failures do not stop the replay."""
    if not scenario.loads and not scenario.steps:
        return Transcript((), 0)

    catalog, manifests = _resolve_loads(scenario, Path(base_dir))
    if catalog is None:
        raise ScenarioError(f"scenario {scenario.name} loads no catalog", "NO_CATALOG")
    for m in manifests:
        try:
            registry.publish(m, catalog)
        except ConsertError as exn:
            raise ScenarioError(f"cannot publish {m.system_id}: {exn}", "UNRESOLVABLE") from exn

    s = new_session(catalog, registry)
    lines: List[TranscriptLine] = []
    failures = 0
    for step in scenario.steps:
        if isinstance(step, Expect):
            verdict = _check_expectation(s, step)
            if verdict != "PASS":
                failures += 1
            lines.append(TranscriptLine("-", step.render(), "-", verdict))
            continue
        try:
            s, delta = apply_event(s, step)
        except ConsertError as exn:
            logger.debug("rejected %s: %s", step.render(), exn)
            lines.append(TranscriptLine("-", step.render(), "-", f"REJECTED {exn.code}"))
            continue
        lines.append(TranscriptLine(str(len(s.log)), step.render(), render_delta(delta), "ok"))
    return Transcript(tuple(lines), failures, s)
