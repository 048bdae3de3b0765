"""Description-logic knowledge base: ontology model, DSL loader, subclass
closure and feature-based classification.

DSL, one statement per line, ``#`` starts a comment::

    concept <Name>
    individual <name> : <ConceptName>
    role <roleName> <source> <target>
    subclass <name> <name>
    action <name>
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

from .ltl import IDENT_RE, KEYWORDS, Kind, Proposition

__all__ = [
    "OntologyError", "ParseError", "UndefinedEntity", "SubclassCycle", "DuplicateName",
    "InvalidRole", "NotAnInputEntity", "EntityKind", "Entity", "Role", "OntologyModel",
    "SUBCLASS", "load_ontology", "subclass_closure", "required_features", "classify",
]

SUBCLASS = "isSubClass"
ACTION_ROLE = "hasAction"


class OntologyError(Exception):
    pass


class ParseError(OntologyError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class UndefinedEntity(OntologyError):
    def __init__(self, name: str, lineno: int | None = None):
        self.name = name
        where = f"line {lineno}: " if lineno else ""
        super().__init__(f"{where}undefined entity {name!r}")


class SubclassCycle(OntologyError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("subclass cycle: " + " -> ".join(cycle))


class DuplicateName(OntologyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate name {name!r}")


class InvalidRole(OntologyError):
    pass


class NotAnInputEntity(OntologyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"{name!r} is not an input-side entity")


class EntityKind(enum.Enum):
    CONCEPT = "concept"
    INDIVIDUAL = "individual"


@dataclass(frozen=True)
class Entity:
    name: str
    kind: EntityKind
    is_action: bool = False
    instance_of: str | None = None

    @property
    def symbol(self) -> str:
        return self.name[0].lower() + self.name[1:]


@dataclass(frozen=True)
class Role:
    name: str
    source: str
    target: str


@dataclass(frozen=True)
class OntologyModel:
    entities: tuple[Entity, ...] = ()
    roles: tuple[Role, ...] = ()
    _index: Mapping[str, Entity] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {e.name: e for e in self.entities})

    def entity(self, name: str) -> Entity:
        try:
            return self._index[name]
        except KeyError:
            raise UndefinedEntity(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def symbol_of(self, name: str) -> str:
        return self.entity(name).symbol

    def is_input(self, name: str) -> bool:
        return not self.entity(name).is_action

    @property
    def input_symbols(self) -> frozenset[Proposition]:
        return frozenset(Proposition(e.symbol, Kind.INPUT) for e in self.entities if not e.is_action)

    @property
    def output_symbols(self) -> frozenset[Proposition]:
        return frozenset(Proposition(e.symbol, Kind.OUTPUT) for e in self.entities if e.is_action)

    def roles_named(self, name: str) -> list[Role]:
        return [r for r in self.roles if r.name == name]

    def _side(self, r: Role) -> str:
        src, dst = self.is_input(r.source), self.is_input(r.target)
        if src and dst:
            return "U"
        if not src and not dst:
            return "Y"
        if src:
            return "UY"
        raise InvalidRole(f"role {r.name}({r.source}, {r.target}) points from a behaviour to an input")

    @property
    def omega_u(self) -> tuple[Role, ...]:
        return tuple(r for r in self.roles if self._side(r) == "U")

    @property
    def omega_y(self) -> tuple[Role, ...]:
        return tuple(r for r in self.roles if self._side(r) == "Y")

    @property
    def omega_uy(self) -> tuple[Role, ...]:
        return tuple(r for r in self.roles if self._side(r) == "UY")

    @cached_property
    def closure(self) -> dict[str, tuple[str, ...]]:
        return _closure(self)

    def ancestors(self, name: str) -> tuple[str, ...]:
        """Proper superclasses in breadth-first order."""
        return self.closure[name][1:]

    def feature_list(self, name: str) -> tuple[str, ...]:
        """Ordered required-feature propositions: superclasses first, then bound features."""
        if not self.is_input(name):
            raise NotAnInputEntity(name)
        out: list[str] = []
        for sup in self.ancestors(name):
            if self.is_input(sup):
                out.append(self.symbol_of(sup))
        for r in self.roles:
            if r.source == name and r.name != SUBCLASS and self.is_input(r.target):
                out.append(self.symbol_of(r.target))
        return tuple(dict.fromkeys(out))

    def objects(self) -> tuple[str, ...]:
        """Input entities with a non-empty feature description, sorted by name."""
        return tuple(sorted(e.name for e in self.entities
                            if not e.is_action and self.feature_list(e.name)))

    def actions_of(self, name: str, inherited: bool = False) -> tuple[str, ...]:
        sources = self.closure[name] if inherited else (name,)
        out = [r.target for s in sources for r in self.roles
               if r.source == s and not self.is_input(r.target) and self.is_input(r.source)]
        return tuple(dict.fromkeys(out))


def _closure(model: OntologyModel) -> dict[str, tuple[str, ...]]:
    parents: dict[str, list[str]] = {e.name: [] for e in model.entities}
    for r in model.roles_named(SUBCLASS):
        parents[r.source].append(r.target)
    out = {}
    for e in model.entities:
        seen = [e.name]
        frontier = [e.name]
        while frontier:
            nxt = []
            for n in frontier:
                for p in parents[n]:
                    if p not in seen:
                        seen.append(p)
                        nxt.append(p)
            frontier = nxt
        out[e.name] = tuple(seen)
    return out


def _find_cycle(entities: Iterable[str], edges: list[tuple[str, str]]) -> list[str] | None:
    graph: dict[str, list[str]] = {n: [] for n in entities}
    for a, b in edges:
        graph[a].append(b)
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(n):
        state[n] = 1
        stack.append(n)
        for m in graph[n]:
            if state.get(m) == 1:
                return stack[stack.index(m):] + [m]
            if m not in state:
                found = visit(m)
                if found:
                    return found
        stack.pop()
        state[n] = 2
        return None

    for n in graph:
        if n not in state:
            found = visit(n)
            if found:
                return found
    return None


def _ident(tok: str, lineno: int) -> str:
    if not IDENT_RE.match(tok) or tok in KEYWORDS:
        raise ParseError(lineno, f"bad identifier {tok!r}")
    return tok


def load_ontology(document: str) -> OntologyModel:
    entities: dict[str, Entity] = {}
    symbols: dict[str, str] = {}
    pending: list[tuple[int, str, str, str]] = []

    def declare(e: Entity):
        if e.name in entities:
            raise DuplicateName(e.name)
        if e.symbol in symbols:
            raise DuplicateName(e.symbol)
        entities[e.name] = e
        symbols[e.symbol] = e.name

    for lineno, raw in enumerate(document.splitlines(), 1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        head, args = words[0], words[1:]
        if head == "concept" and len(args) == 1:
            declare(Entity(_ident(args[0], lineno), EntityKind.CONCEPT))
        elif head == "action" and len(args) == 1:
            declare(Entity(_ident(args[0], lineno), EntityKind.INDIVIDUAL, is_action=True))
        elif head == "individual" and len(args) == 3 and args[1] == ":":
            concept = args[2]
            if concept not in entities or entities[concept].kind is not EntityKind.CONCEPT:
                raise UndefinedEntity(concept, lineno)
            declare(Entity(_ident(args[0], lineno), EntityKind.INDIVIDUAL, instance_of=concept))
        elif head == "role" and len(args) == 3:
            pending.append((lineno, _ident(args[0], lineno), _ident(args[1], lineno),
                            _ident(args[2], lineno)))
        elif head == "subclass" and len(args) == 2:
            pending.append((lineno, SUBCLASS, _ident(args[0], lineno), _ident(args[1], lineno)))
        else:
            raise ParseError(lineno, f"cannot parse {raw.strip()!r}")

    roles: list[Role] = []
    for lineno, name, src, dst in pending:
        if src not in entities:
            raise UndefinedEntity(src, lineno)
        if dst not in entities:
            # feature values (colours, shapes) may be introduced by their first binding
            if name in (SUBCLASS, ACTION_ROLE):
                raise UndefinedEntity(dst, lineno)
            declare(Entity(dst, EntityKind.INDIVIDUAL))
        roles.append(Role(name, src, dst))

    cycle = _find_cycle(entities, [(r.source, r.target) for r in roles if r.name == SUBCLASS])
    if cycle:
        raise SubclassCycle(cycle)
    model = OntologyModel(tuple(entities.values()), tuple(roles))
    for r in roles:
        side = model._side(r)
        if r.name == SUBCLASS and side == "UY":
            raise InvalidRole(f"subclass {r.source} {r.target} mixes an input and a behaviour")
    return model


def subclass_closure(model: OntologyModel) -> dict[str, frozenset[str]]:
    """Reflexive-transitive closure of ``isSubClass``."""
    return {k: frozenset(v) for k, v in model.closure.items()}


def required_features(model: OntologyModel, obj: str) -> frozenset[str]:
    return frozenset(model.feature_list(obj))


def classify(model: OntologyModel, m: Iterable[str] | Mapping[str, bool], obj: str) -> bool:
    """True iff every required feature of ``obj`` is true in ``m`` (closed world)."""
    feats = required_features(model, obj)
    if isinstance(m, Mapping):
        true = {k for k, v in m.items() if v}
    else:
        true = set(m)
    return feats <= true
