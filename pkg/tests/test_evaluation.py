import itertools
from dataclasses import replace
import random

import networkx as nx
import pytest

from conftest import RANDOM_CATALOG, ROOT, TIM_BINDINGS, manifest, random_composition
from consert.dsl import parse_text
from consert.errors import CompositionError, EvaluationError
from consert.evaluation import (
    Assignment,
    best_guarantee,
    check_composition,
    evaluate_composition,
    evaluate_function,
    explain,
    function_inputs,
    leaf_first_order,
    match_demand,
    topological_orders,
    truth_table,
)
from consert.model import (
    GATE_OPS,
    TRUE,
    CompositionGraph,
    ConditionFunction,
    ConSert,
    Const,
    Demand,
    Gate,
    Guarantee,
    IntegrityLevel,
    Mode,
    PropertyGuarantee,
    PropertyParams,
    Ref,
    Tri,
    reachable_gates,
)

L = IntegrityLevel


def _prop(name, window, mode, level):
    return PropertyGuarantee(name, PropertyParams(window, mode), level)


SELF_ACC_D = Demand("D", "tractor", "TractorCtrl", (_prop("SelfAcc", None, Mode.STANDSTILL, L.D),))


############ match_demand
def test_match_demand_at_equal_level(catalog):
    g = Guarantee("TractorCtrl", 1, "T", properties=(_prop("SelfAcc", None, Mode.STANDSTILL, L.D),))
    assert match_demand(SELF_ACC_D, g, catalog)


def test_level_c_does_not_satisfy_level_d(catalog):
    g = Guarantee("TractorCtrl", 1, "T", properties=(_prop("SelfAcc", None, Mode.STANDSTILL, L.C),))
    assert match_demand(SELF_ACC_D, g, catalog) is False


def test_empty_demand_and_service_type(catalog):
    g = Guarantee("TractorCtrl", 3, "T", L.QM)
    assert match_demand(Demand("D", "tractor", "TractorCtrl"), g, catalog)
    assert not match_demand(Demand("D", "ui", "OperatorUI"), g, catalog)


def test_match_demand_uses_shortcut_expansion(catalog):
    d = Demand("D", "ui", "OperatorUI", (_prop("StopButton", None, Mode.ANY, L.B),))
    assert match_demand(d, Guarantee("OperatorUI", 1, "U", L.B), catalog)
    assert not match_demand(d, Guarantee("OperatorUI", 1, "U", L.A), catalog)


def test_match_demand_unknown_property(catalog):
    d = Demand("D", "tractor", "TractorCtrl", (_prop("Hover", None, Mode.ANY, L.A),))
    with pytest.raises(EvaluationError) as info:
        match_demand(d, Guarantee("TractorCtrl", 1, "T", L.E), catalog)
    assert info.value.code == "UNKNOWN_PROPERTY"


def test_match_demand_is_monotone_in_the_guarantee(catalog):
    rng = random.Random(3)
    windows = [None, 1, 10, 30, 60]
    for _ in range(500):
        demanded = tuple(
            _prop(name, rng.choice(windows), rng.choice(list(Mode)), rng.choice(list(L)))
            for name in rng.sample(["LateAcc", "SelfAcc", "SelfSteer"], rng.randint(0, 3))
        )
        offered = [
            _prop(name, rng.choice(windows), rng.choice(list(Mode)), rng.choice(list(L)))
            for name in ["LateAcc", "SelfAcc", "SelfSteer"]
        ]
        d = Demand("D", "tractor", "TractorCtrl", demanded)
        before = match_demand(d, Guarantee("TractorCtrl", 1, "T", properties=tuple(offered)), catalog)
        k = rng.randrange(len(offered))
        p = offered[k]
        stronger_level = list(L)[min(p.level.rank + 1, len(L) - 1)]
        tighter = None if p.params.window is None else p.params.window // 2
        offered[k] = _prop(p.property_type, tighter, p.params.mode, stronger_level)
        after = match_demand(d, Guarantee("TractorCtrl", 1, "T", properties=tuple(offered)), catalog)
        assert not (before and not after)


############ evaluate_function / best_guarantee
def _fn(expr, gates=()):
    return ConditionFunction("G", expr, gates)


def test_evaluate_function_examples():
    f = _fn(Gate("AND", (Ref("demand", "D1"), Ref("rte", "R1"))))
    assert evaluate_function(f, Assignment({"D1": True}, {"R1": True})) is True
    assert evaluate_function(f, Assignment({"D1": True}, {"R1": False})) is False
    assert evaluate_function(_fn(TRUE), Assignment()) is True


def test_assignment_is_a_snapshot():
    rtes = {"R1": True}
    a = Assignment({"D1": True}, rtes)
    rtes["R1"] = False
    assert a.rte_values["R1"] is True
    assert hash(a) == hash(Assignment({"D1": True}, {"R1": True}))
    with pytest.raises(TypeError):
        a.demand_values["D1"] = False


def test_evaluate_function_missing_input():
    f = _fn(Gate("OR", (Ref("demand", "D1"), Ref("rte", "R1"))))
    with pytest.raises(EvaluationError) as info:
        evaluate_function(f, Assignment({"D1": True}, {}))
    assert info.value.code == "MISSING_INPUT"
    assert "rte R1" in str(info.value)


def test_evaluate_function_rejects_cycles():
    gates = (("a", Gate("AND", (Ref("gate", "b"), Ref("rte", "R")))), ("b", Gate("OR", (Ref("gate", "a"),))))
    f = _fn(Ref("gate", "a"), gates)
    with pytest.raises(EvaluationError) as info:
        evaluate_function(f, Assignment({}, {"R": True}))
    assert info.value.code == "CYCLIC_CONDITION"


def _consert(*functions):
    entries = tuple((Guarantee("Svc", i, f"G{i}"), _fn(expr)) for i, expr in enumerate(functions, start=1))
    return ConSert({"Svc": entries})


def test_best_guarantee_picks_first_true():
    c = _consert(Ref("rte", "A"), Ref("rte", "B"), TRUE)
    a = Assignment({}, {"A": False, "B": True})
    assert best_guarantee(c, "Svc", a).order == 2


def test_best_guarantee_absent():
    c = _consert(Ref("rte", "A"), Ref("rte", "B"))
    assert best_guarantee(c, "Svc", Assignment({}, {"A": False, "B": False})) is None
    assert best_guarantee(c, "Other", Assignment({}, {"A": True, "B": True})) is None


def test_default_guarantee_is_never_absent(manifests):
    c = manifests["Baler"].consert
    labels = sorted({d.label for d in manifests["Baler"].demands})
    for values in itertools.product((False, True), repeat=len(labels) + 1):
        a = Assignment(dict(zip(labels, values)), {"BaleChamberOk": values[-1]})
        assert best_guarantee(c, "TIMBalingSwSc", a) is not None


def test_truth_table_of_full_tier(manifests):
    (_, f) = manifests["Baler"].consert.for_service("TIMBalingSwSc")[0]
    inputs, table = truth_table(f)
    assert inputs == [
        ("demand", "D_scanner"),
        ("demand", "D_terminal"),
        ("demand", "D_tractor_high"),
        ("rte", "BaleChamberOk"),
    ]
    assert len(table) == 16
    assert [k for k, v in table.items() if v] == [(True, True, True, True)]


############ Oracle equivalence
def _random_function(rng, n_inputs):
    leaves = [Ref(rng.choice(["demand", "rte"]), f"x{i}") for i in range(n_inputs)]
    pool = list(leaves) or [TRUE]
    gates = {}
    for k in range(rng.randint(0, 5)):
        inputs = rng.sample(pool, rng.randint(1, min(3, len(pool))))
        gates[f"g{k}"] = Gate(rng.choice(GATE_OPS), tuple(inputs))
        pool.append(Ref("gate", f"g{k}"))
    extra = [x for x in leaves if rng.random() < 0.7]
    inputs = rng.sample(pool, rng.randint(1, min(4, len(pool)))) + extra
    expr = Gate(rng.choice(GATE_OPS), tuple(dict.fromkeys(inputs)))
    return ConditionFunction("G", expr, reachable_gates(expr, gates))


def _oracle(expr, gates, values):
    if isinstance(expr, Const):
        return True
    if isinstance(expr, Ref):
        if expr.kind == "gate":
            return _oracle(gates[expr.label], gates, values)
        return values[(expr.kind, expr.label)]
    results = [_oracle(i, gates, values) for i in expr.inputs]
    return all(results) if expr.op == "AND" else any(results)


def test_dag_evaluation_matches_brute_force_oracle():
    rng = random.Random(11)
    for n in range(1000):
        width = 12 if n % 100 == 0 else rng.randint(0, 9)
        f = _random_function(rng, width)
        inputs = function_inputs(f)
        assert len(inputs) <= 12
        gates = f.gate_map
        for values in itertools.product((False, True), repeat=len(inputs)):
            a = Assignment(
                {label: v for (kind, label), v in zip(inputs, values) if kind == "demand"},
                {label: v for (kind, label), v in zip(inputs, values) if kind == "rte"},
            )
            assert evaluate_function(f, a) == _oracle(f.expr, gates, dict(zip(inputs, values)))


############ Monotonicity
MONO_LABELS = [("demand", f"d{i}") for i in range(3)] + [("rte", f"r{i}") for i in range(3)]


def _random_consert(rng):
    entries = []
    for order in range(1, rng.randint(2, 5)):
        refs = [Ref(kind, label) for kind, label in rng.sample(MONO_LABELS, rng.randint(1, 4))]
        expr = Gate(rng.choice(GATE_OPS), tuple(refs))
        if rng.random() < 0.5:
            expr = Gate(rng.choice(GATE_OPS), (expr, Ref(*rng.choice(MONO_LABELS))))
        entries.append((Guarantee("Svc", order, f"G{order}"), ConditionFunction(f"G{order}", expr)))
    return ConSert({"Svc": tuple(entries)})


def _achieved_order(c, values):
    a = Assignment(
        {label: v for (kind, label), v in values.items() if kind == "demand"},
        {label: v for (kind, label), v in values.items() if kind == "rte"},
    )
    g = best_guarantee(c, "Svc", a)
    return float("inf") if g is None else g.order


def test_flipping_an_input_true_never_worsens_the_order():
    rng = random.Random(5)
    checked = 0
    while checked < 1000:
        c = _random_consert(rng)
        values = {label: rng.random() < 0.5 for label in MONO_LABELS}
        false_inputs = [label for label, v in values.items() if not v]
        if not false_inputs:
            continue
        flip = rng.choice(false_inputs)
        assert _achieved_order(c, {**values, flip: True}) <= _achieved_order(c, values)
        checked += 1


############ TIM composition
def test_all_evidence_true_reaches_top_tier(tim_graph, catalog, all_true):
    result = evaluate_composition(tim_graph, catalog, all_true)
    root = result.get(*ROOT)
    assert root.order == 1
    assert root.achieved.label == "G_full"
    assert "SelfAcc{,Standstill}.AgPL = d" in root.achieved.render()
    assert result.orders() == {
        ("Baler", "TIMBalingSwSc"): 1,
        ("SwathScanner", "SwathScan"): 1,
        ("Terminal", "OperatorUI"): 1,
        ("Tractor", "TractorCtrl"): 1,
    }


def test_outside_gps_safe_area_drops_to_second_tier(tim_graph, catalog, all_true):
    all_true[("Tractor", "GpsSafeArea")] = Tri.FALSE
    result = evaluate_composition(tim_graph, catalog, all_true)
    assert result.get(*ROOT).order == 2
    assert result.get("Tractor", "TractorCtrl").order == 2


def test_missing_swath_scanner_falls_back_to_default(tim_graph, catalog, all_true):
    unbound = CompositionGraph(tim_graph.systems, {k: v for k, v in TIM_BINDINGS.items() if k[1] != "scanner"}, ROOT)
    assert evaluate_composition(unbound, catalog, all_true).get(*ROOT).order == 3

    absent = tim_graph.without_system("SwathScanner")
    result = evaluate_composition(absent, catalog, all_true)
    assert result.get(*ROOT).order == 3
    assert result.get("SwathScanner", "SwathScan") is None


def test_unknown_evidence_is_treated_as_false(tim_graph, catalog, all_true):
    all_true[("Baler", "BaleChamberOk")] = Tri.UNKNOWN
    assert evaluate_composition(tim_graph, catalog, all_true).get(*ROOT).order == 3
    assert evaluate_composition(tim_graph, catalog).get(*ROOT).order == 3


def test_trace_records_inputs_and_matches(tim_graph, catalog, all_true):
    trace = evaluate_composition(tim_graph, catalog, all_true).get(*ROOT).trace
    assert ("rte", "BaleChamberOk", True) in trace.inputs
    providers = {m.demand: m.provider for m in trace.matches}
    assert providers == {
        "D_scanner": ("SwathScanner", "SwathScan"),
        "D_terminal": ("Terminal", "OperatorUI"),
        "D_tractor_high": ("Tractor", "TractorCtrl"),
    }


def test_composition_errors(tim_graph, catalog):
    with pytest.raises(CompositionError) as info:
        check_composition(tim_graph.with_binding(("Baler", "tractor"), ("Terminal", "OperatorUI")))
    assert info.value.code == "INCOMPATIBLE_BINDING"
    with pytest.raises(CompositionError) as info:
        check_composition(tim_graph.with_binding(("Baler", "plough"), ("Tractor", "TractorCtrl")))
    assert info.value.code == "UNKNOWN_SLOT"
    with pytest.raises(CompositionError) as info:
        check_composition(tim_graph.with_binding(("Baler", "tractor"), ("Combine", "TractorCtrl")))
    assert info.value.code == "UNKNOWN_SYSTEM"


def test_cyclic_dependency_rejected(catalog):
    a = manifest("system A\nprovides TractorCtrl\nrequires t: TractorCtrl\n")
    b = manifest("system B\nprovides TractorCtrl\nrequires t: TractorCtrl\n")
    graph = CompositionGraph({"A": a, "B": b}, {("A", "t"): ("B", "TractorCtrl"), ("B", "t"): ("A", "TractorCtrl")})
    with pytest.raises(CompositionError) as info:
        evaluate_composition(graph, catalog)
    assert info.value.code == "CYCLIC_DEPENDENCY"


def test_leaf_first_order(tim_graph):
    order = leaf_first_order(tim_graph)
    assert order[-1] == "Baler"
    assert sorted(order) == ["Baler", "SwathScanner", "Terminal", "Tractor"]


def test_explicit_order_must_respect_dependencies(tim_graph, catalog):
    with pytest.raises(CompositionError) as info:
        evaluate_composition(tim_graph, catalog, order=["Baler", "SwathScanner", "Terminal", "Tractor"])
    assert info.value.code == "BAD_ORDER"
    with pytest.raises(CompositionError):
        evaluate_composition(tim_graph, catalog, order=["Tractor"])


############ Order invariance and locality
def test_result_is_independent_of_topological_order():
    catalog = parse_text(RANDOM_CATALOG)
    rng = random.Random(17)
    for _ in range(100):
        graph, rtes = random_composition(rng)
        baseline = evaluate_composition(graph, catalog, rtes)
        orders = list(itertools.islice(topological_orders(graph), 5))
        orders.append(list(nx.lexicographical_topological_sort(graph.dependency_graph().reverse(), key=lambda s: -int(s[1:]))))
        for order in orders:
            assert evaluate_composition(graph, catalog, rtes, order) == baseline


def test_changing_one_consert_only_affects_dependents():
    catalog = parse_text(RANDOM_CATALOG)
    rng = random.Random(23)
    for _ in range(50):
        graph, rtes = random_composition(rng)
        target = rng.choice(sorted(graph.systems))
        default_only = ((Guarantee("Svc", 1, "G1", L.QM), ConditionFunction("G1")),)
        changed = graph.with_system(replace(graph.systems[target], guarantees=default_only))
        before = evaluate_composition(graph, catalog, rtes)
        after = evaluate_composition(changed, catalog, rtes)
        dependents = nx.ancestors(graph.dependency_graph(), target) | {target}
        for key, res in before.services.items():
            if key[0] not in dependents:
                assert after.services[key] == res


############ explain
def test_explain_top_tier_leaves_are_evidence(tim_graph, catalog, all_true):
    result = evaluate_composition(tim_graph, catalog, all_true)
    tree = explain(result, *ROOT)
    assert tree.kind == "guarantee"
    assert {c.label for c in tree.children} == {"D_scanner", "D_terminal", "D_tractor_high", "BaleChamberOk"}
    leaves = tree.leaves()
    assert {leaf.kind for leaf in leaves} == {"rte"}
    assert {leaf.label for leaf in leaves} == {"BaleChamberOk", "DisplayAlive", "GpsSafeArea", "LensClean", "StandstillMonitor"}
    lines = tree.render()
    assert lines[0] == "Baler.TIMBalingSwSc order 1 G_full"
    assert "  demand D_tractor_high via tractor -> Tractor.TractorCtrl" in lines


def test_explain_default_tier_is_single_node(tim_graph, catalog):
    tree = explain(evaluate_composition(tim_graph, catalog), *ROOT)
    assert tree.children == ()
    assert tree.text == "Baler.TIMBalingSwSc order 3 G_default [TRUE]"


def test_explain_absent_guarantee(catalog):
    m = manifest('system S\nprovides TractorCtrl\nrte R kind intra-device\nguarantee G1 = "TractorCtrl(1):" when rte R\n')
    result = evaluate_composition(CompositionGraph({"S": m}, {}), catalog)
    tree = explain(result, "S", "TractorCtrl")
    assert tree.kind == "none"
    assert tree.children == ()
    assert "no function satisfied" in tree.text
    with pytest.raises(EvaluationError) as info:
        explain(result, "S", "OperatorUI")
    assert info.value.code == "UNKNOWN_SERVICE"
