"""Translate ontology relations into LTL safety formulas for the three
controller flavours (base, perception tree, knowledge aware)."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .kb import SUBCLASS, OntologyModel
from .ltl import (
    Always, Atom, Formula, Implies, Kind, Next, Proposition, Side, conj, format_spec_file,
)

__all__ = [
    "StrategyKind", "CompiledSpec", "UnknownStrategyKind", "MissingTreeOrder",
    "compile_subclass_rules", "compile_behavior_rules", "compile_classification_rules",
    "compile_env_assumptions", "raw_features", "compile_model", "DEFAULT_TREE_ORDER",
]

DEFAULT_TREE_ORDER = ("sign", "octagon", "red")


class UnknownStrategyKind(ValueError):
    pass


class MissingTreeOrder(ValueError):
    pass


class StrategyKind(enum.Enum):
    BASE = "base"
    PTREE = "ptree"
    AWARE = "aware"

    @classmethod
    def parse(cls, text: str) -> "StrategyKind":
        try:
            return cls(text)
        except ValueError:
            raise UnknownStrategyKind(text) from None


@dataclass(frozen=True)
class CompiledSpec:
    kind: StrategyKind
    sigma: tuple[Formula, ...]
    env_assumptions: tuple[Formula, ...]
    universe: frozenset[Proposition]
    provenance: tuple[str, ...] = ()
    env_provenance: tuple[str, ...] = ()

    @property
    def aux(self) -> tuple[Proposition, ...]:
        return tuple(sorted(p for p in self.universe if p.kind is Kind.AUXILIARY))

    def dump(self) -> str:
        formulas = [(Side.SYS, f) for f in self.sigma] + [(Side.ENV, f) for f in self.env_assumptions]
        notes = dict(enumerate(self.provenance + self.env_provenance))
        return format_spec_file(formulas, sorted(self.universe), notes,
                                header=[f"strategy: {self.kind.value}"])


def _rule(a: Formula, b: Formula) -> Formula:
    return Always(Implies(a, b))


def _atoms(names: Iterable[str]) -> Formula:
    return conj([Atom(n) for n in names])


def _subclass(model: OntologyModel) -> list[tuple[Formula, str]]:
    roles = _subclass_roles(model)
    return [(_rule(Atom(model.symbol_of(r.source)), Atom(model.symbol_of(r.target))),
             f"{SUBCLASS}({r.source}, {r.target})") for r in roles]


def _classification(model: OntologyModel) -> list[tuple[Formula, str]]:
    return [(_rule(_atoms(model.feature_list(o)), Atom(model.symbol_of(o))),
             f"features({o})") for o in model.objects()]


def _behaviour(model: OntologyModel) -> list[tuple[Formula, str]]:
    roles = sorted(model.omega_uy, key=lambda r: (r.source, r.target))
    return [(_rule(Atom(model.symbol_of(r.source)), Next(Atom(model.symbol_of(r.target)))),
             f"{r.name}({r.source}, {r.target})") for r in roles]


def compile_subclass_rules(model: OntologyModel) -> list[Formula]:
    return [f for f, _ in _subclass(model)]


def compile_behavior_rules(model: OntologyModel) -> list[Formula]:
    return [f for f, _ in _behaviour(model)]


def compile_classification_rules(model: OntologyModel) -> list[Formula]:
    return [f for f, _ in _classification(model)]


def compile_env_assumptions(input_features: Iterable[str | Proposition]) -> list[Formula]:
    out = []
    for f in input_features:
        name = f.name if isinstance(f, Proposition) else f
        out.append(_rule(Atom(name), Next(Atom(name))))
    return out


def raw_features(model: OntologyModel) -> tuple[str, ...]:
    """Detectable feature propositions: everything some object description needs."""
    objs = {model.symbol_of(o) for o in model.objects()}
    out = [f for o in model.objects() for f in model.feature_list(o) if f not in objs]
    return tuple(dict.fromkeys(out))


def _action_taxonomy(model: OntologyModel) -> list[tuple[Formula, str]]:
    return [(f, p) for (f, p), r in zip(_subclass(model), _subclass_roles(model))
            if not model.is_input(r.source)]


def _subclass_roles(model: OntologyModel):
    return sorted(model.roles_named(SUBCLASS), key=lambda r: (r.source, r.target))


def _base(model: OntologyModel) -> list[tuple[Formula, str]]:
    # only fully classified objects trigger behaviour; their inherited
    # prescriptions are attached directly since partial-feature rules are absent.
    # The action hierarchy is plant knowledge and is kept.
    out = _action_taxonomy(model) + _classification(model)
    for o in model.objects():
        for a in sorted(model.actions_of(o, inherited=True)):
            out.append((_rule(Atom(model.symbol_of(o)), Next(Atom(model.symbol_of(a)))),
                        f"hasAction*({o}, {a})"))
    return out


def _tree(model: OntologyModel, order: Sequence[str]) -> tuple[list[tuple[Formula, str]], list[str]]:
    inputs = {p.name for p in model.input_symbols}
    by_symbol = {e.symbol: e.name for e in model.entities}
    for f in order:
        if f not in inputs:
            raise MissingTreeOrder(f"tree feature {f!r} is not an input proposition")
    out: list[tuple[Formula, str]] = []
    levels = [f"pt{k}" for k in range(1, len(order) + 1)]
    seen_objects: set[str] = set()
    for k, (feat, lvl) in enumerate(zip(order, levels)):
        prev = [Atom(levels[k - 1])] if k else []
        body = conj(prev + [Atom(feat)])
        out.append((_rule(body, Atom(lvl)), f"tree level {k + 1} <- {feat}"))
        out.append((_rule(Atom(lvl), body), f"tree level {k + 1} -> {feat}"))
        for a in sorted(model.actions_of(by_symbol[feat])):
            out.append((_rule(Atom(lvl), Next(Atom(model.symbol_of(a)))),
                        f"early reaction at tree level {k + 1}"))
        prefix = set(order[:k + 1])
        for o in model.objects():
            if o not in seen_objects and set(model.feature_list(o)) <= prefix:
                seen_objects.add(o)
                out.append((_rule(Atom(lvl), Atom(model.symbol_of(o))),
                            f"tree classification of {o}"))
    return out, levels


def compile_model(
    model: OntologyModel,
    kind: StrategyKind | str,
    tree_order: Sequence[str] | None = None,
    env_assumptions: bool = True,
) -> CompiledSpec:
    if isinstance(kind, str):
        kind = StrategyKind.parse(kind)
    if not isinstance(kind, StrategyKind):
        raise UnknownStrategyKind(str(kind))
    objects = {model.symbol_of(o) for o in model.objects()}
    aux = set(objects)
    if kind is StrategyKind.AWARE:
        rules = _subclass(model) + _classification(model) + _behaviour(model)
    elif kind is StrategyKind.BASE:
        rules = _base(model)
    else:
        if not tree_order:
            raise MissingTreeOrder("perception-tree compilation needs a feature order")
        tree, levels = _tree(model, tree_order)
        rules = _base(model) + tree
        aux.update(levels)
    features = raw_features(model) if env_assumptions else ()
    universe = {Proposition(p.name, Kind.AUXILIARY if p.name in aux else Kind.INPUT)
                for p in model.input_symbols}
    universe |= set(model.output_symbols)
    universe |= {Proposition(a, Kind.AUXILIARY) for a in aux}
    return CompiledSpec(
        kind=kind,
        sigma=tuple(f for f, _ in rules),
        env_assumptions=tuple(compile_env_assumptions(features)),
        universe=frozenset(universe),
        provenance=tuple(p for _, p in rules),
        env_provenance=tuple(f"persistence({f})" for f in features),
    )
