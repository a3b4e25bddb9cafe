import random
from pathlib import Path

import pytest

from consert.dsl import load_file, parse_text
from consert.model import CompositionGraph, Tri
from consert.registry import Registry

DATA = Path(__file__).resolve().parent.parent / "data"
TIM = DATA / "tim"
GOLDEN = DATA / "golden"

MANIFEST_FILES = ["baler.consert", "tractor.consert", "swath_scanner.consert", "terminal.consert"]

TIM_BINDINGS = {
    ("Baler", "tractor"): ("Tractor", "TractorCtrl"),
    ("Baler", "scanner"): ("SwathScanner", "SwathScan"),
    ("Baler", "terminal"): ("Terminal", "OperatorUI"),
}

TIM_RTES = {
    ("Baler", "BaleChamberOk"): Tri.TRUE,
    ("Tractor", "GpsSafeArea"): Tri.TRUE,
    ("Tractor", "StandstillMonitor"): Tri.TRUE,
    ("SwathScanner", "LensClean"): Tri.TRUE,
    ("Terminal", "DisplayAlive"): Tri.TRUE,
}

ROOT = ("Baler", "TIMBalingSwSc")


############ Fixture files
@pytest.fixture(scope="session")
def tim_dir():
    return TIM


@pytest.fixture(scope="session")
def golden_dir():
    return GOLDEN


@pytest.fixture(scope="session")
def catalog():
    return load_file(TIM / "agri.consert-catalog")


@pytest.fixture(scope="session")
def manifests():
    return {m.system_id: m for m in (load_file(TIM / name) for name in MANIFEST_FILES)}


@pytest.fixture
def tim_graph(manifests):
    return CompositionGraph(dict(manifests), dict(TIM_BINDINGS), ROOT)


@pytest.fixture
def all_true():
    return dict(TIM_RTES)


############ Registry
@pytest.fixture
def registry(tmp_path):
    return Registry(tmp_path / "registry")


@pytest.fixture
def published(registry, catalog, manifests):
    for m in manifests.values():
        registry.publish(m, catalog)
    return registry


############ Randomness
@pytest.fixture
def rng():
    return random.Random(20240611)


def manifest(text: str):
    return parse_text(text, "test.consert")


############ Random compositions
RANDOM_CATALOG = "catalog rnd\nservicetype Svc {\n  property P(window, mode)\n  property Q(window, mode)\n}\n"
LEVELS = ["QM", "a", "b", "c", "d"]


def random_manifest(rng, index, providers):
    """System S<index> providing Svc and requiring one slot per provider index."""
    lines = [f"system S{index}", "provides Svc", "rte R0 kind intra-device", "rte R1 kind inter-device"]
    demands = []
    for j in providers:
        lines.append(f"requires s{j}: Svc")
        lines.append(f'demand D{j} = "Svc: P{{{rng.choice(["", "5s"])},Any}}.AgPL = {rng.choice(LEVELS)}" on s{j}')
        demands.append(f"demand D{j}")
    top = ", ".join(demands + ["rte R0"])
    mid = ", ".join(demands + ["rte R1"])
    lines.append(f'guarantee G1 = "Svc(1): AgPL = {rng.choice(LEVELS)}, P{{2s,Moving}}.AgPL = d" when AND({top})')
    lines.append(f'guarantee G2 = "Svc(2): P{{,Any}}.AgPL = {rng.choice(LEVELS)}" when OR({mid})')
    lines.append('guarantee G3 = "Svc(3): AgPL = QM" when TRUE')
    return manifest("\n".join(lines) + "\n")


def random_composition(rng, max_systems=10):
    """Random DAG: system i may only depend on systems with a smaller index."""
    n = rng.randint(1, max_systems)
    systems, bindings, rtes = {}, {}, {}
    for i in range(n):
        providers = sorted(rng.sample(range(i), rng.randint(0, min(i, 3))))
        m = random_manifest(rng, i, providers)
        systems[m.system_id] = m
        for j in providers:
            if rng.random() < 0.85:
                bindings[(m.system_id, f"s{j}")] = (f"S{j}", "Svc")
        for label in ("R0", "R1"):
            rtes[(m.system_id, label)] = rng.choice(list(Tri))
    root = (f"S{n - 1}", "Svc")
    return CompositionGraph(systems, bindings, root), rtes
