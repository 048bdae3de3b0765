from __future__ import annotations

import itertools

import pytest

from awaresynth.compiler import (
    MissingTreeOrder, StrategyKind, UnknownStrategyKind, compile_behavior_rules,
    compile_classification_rules, compile_env_assumptions, compile_model, compile_subclass_rules,
)
from awaresynth.kb import classify, load_ontology
from awaresynth.ltl import (
    Atom, Implies, Next, Side, atoms, eval_boolean, eval_step, parse_spec_file, partition_gr1, unparse,
)
from awaresynth.scenario import traffic_ontology

YIELD = """
concept Sign
individual yield : Sign
action giveWay
action slowDown
role hasColor yield yellow
role hasShape yield triangle
role hasAction yield giveWay
subclass yield Sign
role hasAction Sign slowDown
"""

FEATURES = ("sign", "red", "octagon")


def texts(fs):
    return [unparse(f) for f in fs]


def test_yield_golden():
    spec = compile_model(load_ontology(YIELD), StrategyKind.AWARE)
    assert set(texts(spec.sigma)) == {
        "G (yield -> sign)",
        "G (sign & yellow & triangle -> yield)",
        "G (yield -> X giveWay)",
        "G (sign -> X slowDown)",
    }
    assert len(spec.sigma) == 4


def test_rule_families():
    m = traffic_ontology()
    assert "G (stop -> sign)" in texts(compile_subclass_rules(m))
    assert texts(compile_classification_rules(m)) == [
        "G (sign & red & octagon -> stop)", "G (sign & yellow & triangle -> yield)"]
    assert "G (sign -> X slowDown)" in texts(compile_behavior_rules(m))
    empty = load_ontology("")
    assert compile_behavior_rules(empty) == [] and compile_subclass_rules(empty) == []


def test_subclass_chain_entails_transitive_implication():
    m = load_ontology("concept A\nconcept B\nconcept C\nsubclass A B\nsubclass B C\n")
    rules = [f.arg for f in compile_subclass_rules(m)]
    assert len(rules) == 2
    for bits in itertools.product([False, True], repeat=3):
        v = dict(zip("abc", bits))
        if all(eval_boolean(r, v) for r in rules):
            assert eval_boolean(Implies(Atom("a"), Atom("c")), v)


def test_classification_rule_agrees_with_classify():
    m = traffic_ontology()
    (rule,) = [r for r in compile_classification_rules(m) if "stop" in unparse(r)]
    for bits in itertools.product([False, True], repeat=3):
        v = {f: b for f, b in zip(FEATURES, bits)}
        antecedent = eval_boolean(rule.arg.left, v)
        assert antecedent == classify(m, v, "stop")


def test_env_assumptions():
    fs = compile_env_assumptions(FEATURES)
    assert texts(fs) == ["G (sign -> X sign)", "G (red -> X red)", "G (octagon -> X octagon)"]
    assert compile_env_assumptions([]) == []


def test_persistent_traces_are_the_monotone_sequences():
    rules = [f.arg for f in compile_env_assumptions(FEATURES)]
    vals = [frozenset(c) for k in range(4) for c in itertools.combinations(FEATURES, k)]
    steps = 5
    legal = 0
    for word in itertools.product(vals, repeat=steps):
        if all(eval_step(r, a, b) for a, b in zip(word, word[1:]) for r in rules):
            legal += 1
    # each feature independently switches on at one of the steps or never
    assert legal == (steps + 1) ** len(FEATURES)


def test_base_has_no_partial_feature_triggers():
    spec = compile_model(traffic_ontology(), "base")
    for f in spec.sigma:
        body = f.arg
        if isinstance(body, Implies) and isinstance(body.right, Next):
            assert body.left in (Atom("stop"), Atom("yield"))


def test_aware_contains_early_reaction():
    spec = compile_model(traffic_ontology(), "aware")
    assert "G (sign -> X slowDown)" in texts(spec.sigma)
    assert compile_model(load_ontology(""), "aware").sigma == ()


def test_ptree_levels():
    spec = compile_model(traffic_ontology(), "ptree", ("sign", "octagon", "red"))
    t = texts(spec.sigma)
    assert "G (pt1 -> sign)" in t and "G (sign -> pt1)" in t
    assert "G (pt1 & octagon -> pt2)" in t and "G (pt2 -> pt1 & octagon)" in t
    assert "G (pt1 -> X slowDown)" in t
    assert "G (pt3 -> stop)" in t
    assert {p.name for p in spec.aux} >= {"pt1", "pt2", "pt3", "stop", "yield"}
    with pytest.raises(MissingTreeOrder):
        compile_model(traffic_ontology(), "ptree", None)
    with pytest.raises(MissingTreeOrder):
        compile_model(traffic_ontology(), "ptree", ("sign", "giveWay"))


def test_unknown_kind():
    with pytest.raises(UnknownStrategyKind):
        compile_model(traffic_ontology(), "fancy")


def _obligations(spec):
    """(feature valuation, action) pairs forced at the next step."""
    out = set()
    for bits in itertools.product([False, True], repeat=3):
        now = {f for f, b in zip(FEATURES, bits) if b}
        # close under the Boolean rules (least model)
        changed = True
        while changed:
            changed = False
            for f in spec.sigma:
                body = f.arg
                if isinstance(body, Implies) and not isinstance(body.right, Next) \
                        and isinstance(body.right, Atom) and eval_boolean(body.left, now, True) \
                        and body.right.name not in now:
                    now.add(body.right.name)
                    changed = True
        for f in spec.sigma:
            body = f.arg
            if isinstance(body, Implies) and isinstance(body.right, Next) and eval_boolean(body.left, now, True):
                out.add((bits, body.right.arg.name))
    return out


def test_obligation_containment():
    m = traffic_ontology()
    base, ptree, aware = (_obligations(compile_model(m, k, ("sign", "octagon", "red")))
                          for k in ("base", "ptree", "aware"))
    assert base <= ptree <= aware
    assert base < aware


def test_determinism_and_shapes():
    m = traffic_ontology()
    for kind in StrategyKind:
        a = compile_model(m, kind, ("sign", "octagon", "red"))
        b = compile_model(m, kind, ("sign", "octagon", "red"))
        assert a == b
        spec = partition_gr1([(Side.SYS, f) for f in a.sigma] + [(Side.ENV, f) for f in a.env_assumptions])
        assert len(spec.sys_safety) == len(a.sigma)
        assert len(spec.env_safety) == len(a.env_assumptions)
        names = {p.name for p in a.universe}
        for f in a.sigma:
            assert atoms(f) <= names


def test_dump_parses_back():
    spec = compile_model(traffic_ontology(), "aware")
    text = spec.dump()
    assert "# provenance: hasAction(Sign, slowDown)" in text
    formulas, _ = parse_spec_file(text)
    assert [f for s, f in formulas if s is Side.SYS] == list(spec.sigma)
