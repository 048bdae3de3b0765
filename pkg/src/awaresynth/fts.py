"""Labelled finite transition systems and the five-cell car model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .ltl import Kind, Proposition

__all__ = [
    "Fts", "UnknownState", "Violation", "NonBlocking", "OutputTotality", "Dangling",
    "build_car_fts", "successors", "validate", "dump_fts", "car_state", "state_location",
    "CELLS", "MOVE", "SLOW", "HALT",
]

CELLS = 5
MOVE, SLOW, HALT = "move", "slowDown", "halt"


class UnknownState(KeyError):
    pass


@dataclass(frozen=True)
class Fts:
    states: tuple[str, ...]
    init: frozenset[str]
    transitions: frozenset[tuple[str, str]]
    props: frozenset[Proposition]
    labels: Mapping[str, frozenset[str]]
    output: Mapping[tuple[str, str], str]
    _succ: Mapping[str, tuple[tuple[str, str], ...]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        order = {q: i for i, q in enumerate(self.states)}
        succ: dict[str, list[tuple[str, str]]] = {q: [] for q in self.states}
        for (a, b) in self.transitions:
            if a in succ:
                succ[a].append((b, self.output.get((a, b), "")))
        object.__setattr__(self, "_succ", {
            q: tuple(sorted(v, key=lambda e: order.get(e[0], len(order)))) for q, v in succ.items()})

    @property
    def outputs(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.output.values())))

    def index(self, q: str) -> int:
        try:
            return self.states.index(q)
        except ValueError:
            raise UnknownState(q) from None


def successors(fts: Fts, q: str) -> tuple[tuple[str, str], ...]:
    """Pairs (q', output) ordered by state id."""
    try:
        return fts._succ[q]
    except KeyError:
        raise UnknownState(q) from None


@dataclass(frozen=True)
class Violation:
    where: object

    def __str__(self) -> str:
        return f"{type(self).__name__}({self.where})"


class NonBlocking(Violation):
    pass


class OutputTotality(Violation):
    pass


class Dangling(Violation):
    pass


def validate(fts: Fts) -> list[Violation]:
    out: list[Violation] = []
    qs = set(fts.states)
    for q in sorted(fts.init - qs):
        out.append(Dangling(q))
    for e in sorted(fts.transitions):
        if e[0] not in qs or e[1] not in qs:
            out.append(Dangling(e))
        if e not in fts.output:
            out.append(OutputTotality(e))
    for e in sorted(set(fts.output) - fts.transitions):
        out.append(OutputTotality(e))
    for q in fts.states:
        if not fts._succ.get(q):
            out.append(NonBlocking(q))
    return out


def car_state(mode: str, loc: int) -> str:
    return f"{mode}{loc}"


def state_location(q: str) -> int:
    return int(q[1:])


def build_car_fts(cells: int = CELLS) -> Fts:
    """Car on a ring of cells counting down to the sign at location 0.

    States are ``M<i>`` (moving) and ``S<i>`` (stopping); state ids run
    M top..0 then S top..0.
    """
    top = cells - 1
    M = [car_state("M", i) for i in range(cells)]
    S = [car_state("S", i) for i in range(cells)]
    out: dict[tuple[str, str], str] = {}
    for i in range(1, cells):
        out[(M[i], M[i - 1])] = MOVE
        out[(M[i], S[i - 1])] = SLOW
        out[(S[i], S[i - 1])] = SLOW
        out[(S[i], M[i - 1])] = MOVE
    out[(M[0], M[top])] = MOVE
    out[(S[0], S[0])] = HALT
    out[(S[0], M[top])] = MOVE
    labels = {}
    for i in range(cells):
        labels[M[i]] = frozenset({f"loc{i}", "moving"})
        labels[S[i]] = frozenset({f"loc{i}", "stopping"})
    props = {Proposition(f"loc{i}", Kind.AUXILIARY) for i in range(cells)}
    props |= {Proposition("moving", Kind.AUXILIARY), Proposition("stopping", Kind.AUXILIARY)}
    return Fts(
        states=tuple(M[::-1] + S[::-1]),
        init=frozenset({M[top]}),
        transitions=frozenset(out),
        props=frozenset(props),
        labels=labels,
        output=out,
    )


def dump_fts(fts: Fts) -> str:
    lines = [f"state {q}" for q in fts.states]
    lines += [f"init {q}" for q in fts.states if q in fts.init]
    for q in fts.states:
        for q2, y in successors(fts, q):
            lines.append(f"trans {q} {q2} {y}")
    for q in fts.states:
        lines += [f"label {q} {p}" for p in sorted(fts.labels.get(q, ()))]
    return "\n".join(lines) + "\n"
