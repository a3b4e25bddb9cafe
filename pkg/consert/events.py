"""Runtime events and scenario steps."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Tuple, Union

from consert.model import Tri, frozen_mapping


@dataclass(frozen=True)
class Join:
    system_id: str
    seq: int = 0

    def render(self) -> str:
        return f"join {self.system_id}"


@dataclass(frozen=True)
class Leave:
    system_id: str
    seq: int = 0

    def render(self) -> str:
        return f"leave {self.system_id}"


@dataclass(frozen=True)
class Bind:
    consumer: str
    slot: str
    provider: str
    service_type: str
    seq: int = 0

    def render(self) -> str:
        return f"bind {self.consumer}.{self.slot} -> {self.provider}.{self.service_type}"


@dataclass(frozen=True)
class SetRte:
    system_id: str
    label: str
    value: Tri
    seq: int = 0

    def render(self) -> str:
        return f"set-rte {self.system_id}.{self.label} {self.value}"


@dataclass(frozen=True)
class SetRoot:
    system_id: str
    service_type: str
    seq: int = 0

    def render(self) -> str:
        return f"root {self.system_id}.{self.service_type}"


Event = Union[Join, Leave, Bind, SetRte, SetRoot]


def with_seq(event: Event, seq: int) -> Event:
    return replace(event, seq=seq)


@dataclass(frozen=True)
class Expect:
    system_id: str
    service_type: str
    order: Optional[int]  # None = no guarantee expected

    def render(self) -> str:
        tail = "none" if self.order is None else f"order {self.order}"
        return f"expect {self.system_id}.{self.service_type} {tail}"


Step = Union[Join, Leave, Bind, SetRte, SetRoot, Expect]


@dataclass(frozen=True)
class Scenario:
    name: str
    loads: Tuple[str, ...] = ()
    steps: Tuple[Step, ...] = ()
    source: Mapping = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "source", frozen_mapping(self.source))

    def locate(self, kind: str, label: str) -> Tuple[int, int]:
        return self.source.get((kind, label), (1, 1))
