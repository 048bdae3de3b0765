"""The stop-sign case study: ontology, assumptions and goals around the car model."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from .compiler import DEFAULT_TREE_ORDER, CompiledSpec, StrategyKind, compile_model
from .fts import Fts, build_car_fts
from .kb import OntologyModel, load_ontology
from .ltl import (
    Always, And, Atom, Eventually, Formula, Implies, Kind, Next, Not, Proposition, Side,
    atoms, conj, format_spec_file, partition_gr1, Gr1Spec,
)
from .synth import (
    GameStructure, MealyController, SolveResult, build_game, extract_controller, solve_gr1,
)

__all__ = [
    "TARGET", "traffic_ontology_text", "traffic_ontology", "target_features",
    "case_study_formulas", "Pipeline", "synthesize", "spec_text",
]

TARGET = "stop"


def traffic_ontology_text() -> str:
    return resources.files("awaresynth").joinpath("data/traffic.onto").read_text()


def traffic_ontology() -> OntologyModel:
    return load_ontology(traffic_ontology_text())


def target_features(model: OntologyModel, target: str = TARGET) -> tuple[str, ...]:
    return model.feature_list(target)


def _sign_cell(loc: int = 0) -> Formula:
    return Atom(f"loc{loc}")


def case_study_formulas(
    compiled: CompiledSpec,
    features: Sequence[str],
    extra: Iterable[Formula] = (),
) -> list[tuple[Side, Formula]]:
    """System rules from ``compiled`` plus the lap-scoped environment model.

    A detected feature stays detected until the car reaches the sign cell,
    nothing new shows up on the sign cell itself, and the view is cleared
    once the car has stopped there.
    """
    out: list[tuple[Side, Formula]] = [(Side.SYS, f) for f in compiled.sigma]
    out += [(Side.SYS, f) for f in extra]
    at_sign = _sign_cell()
    for f in features:
        a = Atom(f)
        out.append((Side.ENV, Always(Implies(And(a, Not(at_sign)), Next(a)))))
        out.append((Side.ENV, Always(Implies(And(at_sign, Atom("stopping")), Next(Not(a))))))
        out.append((Side.ENV, Always(Implies(And(Atom("loc1"), Not(a)), Next(Not(a))))))
    out.append((Side.ENV, Always(Eventually(conj([Atom(f) for f in features])))))
    out.append((Side.SYS, Always(Eventually(And(at_sign, Atom("stopping"))))))
    out.append((Side.SYS, Always(Eventually(Atom("moving")))))
    return out


def spec_text(compiled: CompiledSpec, features: Sequence[str], extra: Iterable[Formula] = ()) -> str:
    formulas = case_study_formulas(compiled, features, extra)
    notes = dict(enumerate(compiled.provenance))
    fts = build_car_fts()
    decl = sorted(compiled.universe | fts.props | {Proposition(y, Kind.OUTPUT) for y in fts.outputs})
    return format_spec_file(formulas, decl, notes, header=[f"strategy: {compiled.kind.value}"])


@dataclass
class Pipeline:
    compiled: CompiledSpec
    spec: Gr1Spec
    fts: Fts
    game: GameStructure
    result: SolveResult
    controller: MealyController | None

    @property
    def realizable(self) -> bool:
        return self.result.realizable


def synthesize(
    kind: StrategyKind | str,
    model: OntologyModel | None = None,
    tree_order: Sequence[str] | None = DEFAULT_TREE_ORDER,
    target: str = TARGET,
    extra: Iterable[Formula] = (),
    cap: int | None = None,
) -> Pipeline:
    model = model or traffic_ontology()
    compiled = compile_model(model, kind, tree_order, env_assumptions=False)
    features = [f for f in target_features(model, target)]
    formulas = case_study_formulas(compiled, features, extra)
    aux = [p for p in compiled.universe if p.kind is Kind.AUXILIARY]
    env = [Proposition(f, Kind.INPUT) for f in features]
    spec = partition_gr1(formulas, env_vars=env, sys_vars=sorted(aux))
    fts = build_car_fts()
    used = set().union(*(atoms(f) for _, f in formulas))
    # inputs the car never sees and actions the car cannot perform stay false
    free = {p.name for p in compiled.universe if p.kind is not Kind.AUXILIARY}
    fixed = (used & free) - set(features) - set(fts.outputs)
    game = build_game(fts, spec, fixed_false=fixed, cap=cap)
    result = solve_gr1(game)
    ctrl = extract_controller(game, result) if result.realizable else None
    return Pipeline(compiled, spec, fts, game, result, ctrl)
