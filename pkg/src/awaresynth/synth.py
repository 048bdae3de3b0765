"""Explicit-state GR(1) games over an FTS, the nested fixpoint solver,
strategy extraction into a Mealy controller and a bounded checker.

Turn order per step: in state ``(q, u, y)`` (FTS state, input valuation,
output of the edge that led here) the system commits to an FTS edge without
seeing the next input; the environment then picks ``u'``. Auxiliary
propositions are not chosen by anyone: each state carries the least
assignment that satisfies the non-temporal system constraints.
"""
from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .fts import Fts, successors
from .ltl import (
    And, Atom, FalseF, Formula, Gr1Spec, Implies, Next, Not, Or, TrueF,
    atoms, next_depth, unparse,
)

__all__ = [
    "SynthError", "UniverseMismatch", "StateSpaceTooLarge", "NotRealizable", "ControllerDeadEnd",
    "DepthTooLargeForBudget", "GameStructure", "SolveResult", "MealyController", "Node",
    "Violation", "build_game", "solve_gr1", "extract_controller", "verify_bounded",
    "DEFAULT_STATE_CAP",
]

DEFAULT_STATE_CAP = 1 << 20
VERIFY_BUDGET = 20_000_000


class SynthError(Exception):
    pass


class UniverseMismatch(SynthError):
    def __init__(self, names: Iterable[str]):
        self.names = sorted(names)
        super().__init__("propositions outside the game universe: " + ", ".join(self.names))


class StateSpaceTooLarge(SynthError):
    def __init__(self, size: int, cap: int):
        self.size, self.cap = size, cap
        super().__init__(f"game would have up to {size} states (cap {cap})")


class NotRealizable(SynthError):
    pass


class ControllerDeadEnd(SynthError):
    def __init__(self, message: str, trial: int | None = None):
        self.trial = trial
        super().__init__(message if trial is None else f"trial {trial}: {message}")


class DepthTooLargeForBudget(SynthError):
    pass


Valuation = frozenset
StepFn = Callable[[frozenset, frozenset], bool]


def _compile(f: Formula) -> StepFn:
    """Turn a formula with at most one level of X into a fast closure."""
    if isinstance(f, TrueF):
        return lambda a, b: True
    if isinstance(f, FalseF):
        return lambda a, b: False
    if isinstance(f, Atom):
        n = f.name
        return lambda a, b: n in a
    if isinstance(f, Next):
        g = _compile(f.arg)
        return lambda a, b: g(b, b)
    if isinstance(f, Not):
        g = _compile(f.arg)
        return lambda a, b: not g(a, b)
    if isinstance(f, And):
        l, r = _compile(f.left), _compile(f.right)
        return lambda a, b: l(a, b) and r(a, b)
    if isinstance(f, Or):
        l, r = _compile(f.left), _compile(f.right)
        return lambda a, b: l(a, b) or r(a, b)
    if isinstance(f, Implies):
        l, r = _compile(f.left), _compile(f.right)
        return lambda a, b: (not l(a, b)) or r(a, b)
    raise ValueError(f"unsupported operator in {unparse(f)}")


def _all(fns: Sequence[StepFn]) -> StepFn:
    fns = tuple(fns)
    return lambda a, b: all(g(a, b) for g in fns)


def _subsets(items: Sequence[str]):
    for k in range(len(items) + 1):
        for combo in itertools.combinations(items, k):
            yield frozenset(combo)


State = tuple  # (fts state, input valuation, incoming output or None)


@dataclass
class GameStructure:
    fts: Fts
    spec: Gr1Spec
    env_vars: tuple[str, ...]
    aux_vars: tuple[str, ...]
    out_vars: tuple[str, ...]
    states: list[State]
    index: dict[State, int]
    vals: list[frozenset | None]
    edges: list[list[tuple[str, str]]]
    succ: np.ndarray
    valid: np.ndarray
    init: np.ndarray
    init_inputs: list[frozenset]
    env_goals: list[np.ndarray]
    sys_goals: list[np.ndarray]
    env_moves: list[frozenset]
    env_ok: StepFn
    sys_ok: StepFn
    fixed_false: frozenset[str] = frozenset()

    @property
    def size(self) -> int:
        return len(self.states)

    def state_name(self, s: int) -> str:
        q, u, y = self.states[s]
        return f"{q}{{{','.join(sorted(u))}}}/{y or '-'}"


def _valuations(names: Sequence[str]) -> list[frozenset]:
    return list(_subsets(names))


def build_game(
    fts: Fts,
    spec: Gr1Spec,
    fixed_false: Iterable[str] = (),
    cap: int | None = None,
) -> GameStructure:
    """Materialize the reachable part of the product of ``fts`` with the spec's variables.

    ``fixed_false`` names inputs mentioned by the formulas that the environment
    never raises in this game.
    """
    if cap is None:
        cap = int(os.environ.get("AWARESYNTH_STATE_CAP", DEFAULT_STATE_CAP))
    fixed = frozenset(fixed_false)
    env_vars = tuple(sorted(p.name for p in spec.env_vars))
    aux_vars = tuple(sorted(p.name for p in spec.sys_vars))
    out_vars = tuple(sorted(set(fts.output.values())))
    known = set(env_vars) | set(aux_vars) | set(out_vars) | {p.name for p in fts.props} | fixed
    used = set().union(*(atoms(f) for f in spec.formulas())) if spec.formulas() else set()
    if used - known:
        raise UniverseMismatch(used - known)
    bound = len(fts.states) * (1 << len(env_vars)) * (len(out_vars) + 1)
    if bound > cap:
        raise StateSpaceTooLarge(bound, cap)

    now_sys = [f for f in spec.sys_safety if next_depth(f) == 0]
    step_sys = [f for f in spec.sys_safety if next_depth(f) == 1]
    static_ok = _all([_compile(f) for f in now_sys])
    sys_ok = _all([_compile(f) for f in step_sys])
    env_ok = _all([_compile(f) for f in spec.env_safety])
    env_init = _compile(spec.env_init)
    sys_init = _compile(spec.sys_init)
    env_goal_fns = [_compile(f) for f in spec.env_liveness] or [lambda a, b: True]
    sys_goal_fns = [_compile(f) for f in spec.sys_liveness] or [lambda a, b: True]

    # least completion of aux/output propositions, keyed by what the constraints can see
    free = tuple(aux_vars) + out_vars
    relevant = set().union(*(atoms(f) for f in now_sys)) if now_sys else set()
    model_cache: dict[frozenset, frozenset | None] = {}

    def complete(base: frozenset) -> frozenset | None:
        key = base & relevant
        if key not in model_cache:
            found = None
            for extra in _subsets([v for v in free if v not in base]):
                cand = base | extra
                if static_ok(cand, cand):
                    found = extra
                    break
            model_cache[key] = found
        extra = model_cache[key]
        return None if extra is None else base | extra

    def valuation(s: State) -> frozenset | None:
        q, u, y = s
        base = u | fts.labels.get(q, frozenset())
        if y is not None:
            base = base | {y}
        return complete(frozenset(base))

    env_moves = _valuations(env_vars)
    states: list[State] = []
    index: dict[State, int] = {}
    vals: list[frozenset | None] = []

    def add(s: State) -> int:
        if s not in index:
            index[s] = len(states)
            states.append(s)
            vals.append(valuation(s))
        return index[s]

    init_ids = []
    init_inputs = []
    for u in env_moves:
        if not env_init(u, u):
            continue
        init_inputs.append(u)
        for q in fts.states:
            if q in fts.init:
                s = add((q, u, None))
                v = vals[s]
                if v is not None and sys_init(v, v):
                    init_ids.append(s)

    edges: list[list[tuple[str, str]]] = []
    rows: list[list[list[int]]] = []
    ok_rows: list[list[bool]] = []
    k = 0
    while k < len(states):
        q, u, y = states[k]
        v = vals[k]
        out_edges = list(successors(fts, q))
        legal = [u2 for u2 in env_moves if v is not None and env_ok(v, u2)]
        legal_set = set(legal)
        row, oks = [], []
        for q2, y2 in out_edges:
            targets, ok = [], v is not None
            for u2 in env_moves:
                if u2 not in legal_set:
                    targets.append(-1)
                    continue
                t = add((q2, u2, y2))
                targets.append(t)
                v2 = vals[t]
                if ok and (v2 is None or not sys_ok(v, v2)):
                    ok = False
            row.append(targets)
            oks.append(ok)
        edges.append(out_edges)
        rows.append(row)
        ok_rows.append(oks)
        k += 1

    n = len(states)
    if n > cap:
        raise StateSpaceTooLarge(n, cap)
    degree = max((len(e) for e in edges), default=0) or 1
    succ = np.full((n, degree, max(1, len(env_moves))), n, dtype=np.int64)
    valid = np.zeros((n, degree), dtype=bool)
    for s in range(n):
        for e, targets in enumerate(rows[s]):
            succ[s, e, :len(targets)] = [t if t >= 0 else n for t in targets]
            valid[s, e] = ok_rows[s][e]
    init = np.zeros(n, dtype=bool)
    init[init_ids] = True

    def goal_mask(fn):
        return np.array([v is not None and fn(v, v) for v in vals], dtype=bool)

    return GameStructure(
        fts=fts, spec=spec, env_vars=env_vars, aux_vars=aux_vars, out_vars=out_vars,
        states=states, index=index, vals=vals, edges=edges, succ=succ, valid=valid,
        init=init, init_inputs=init_inputs,
        env_goals=[goal_mask(f) for f in env_goal_fns],
        sys_goals=[goal_mask(f) for f in sys_goal_fns],
        env_moves=env_moves, env_ok=env_ok, sys_ok=sys_ok, fixed_false=fixed,
    )


# --- solving -----------------------------------------------------------------

def _cpre(game: GameStructure, target: np.ndarray) -> np.ndarray:
    ext = np.append(target, True)
    return (ext[game.succ].all(axis=2) & game.valid).any(axis=1)


def _edges_into(game: GameStructure, s: int, target: np.ndarray) -> list[int]:
    ext = np.append(target, True)
    hits = ext[game.succ[s]].all(axis=1) & game.valid[s]
    return [int(e) for e in np.flatnonzero(hits)]


@dataclass
class SolveResult:
    realizable: bool
    winning: np.ndarray
    y_layers: list[list[np.ndarray]] = field(default_factory=list)
    x_sets: list[list[list[np.ndarray]]] = field(default_factory=list)
    counter_initial: list[frozenset] = field(default_factory=list)
    iterations: int = 0

    def rank(self, j: int, s: int) -> int:
        for r, layer in enumerate(self.y_layers[j]):
            if layer[s]:
                return r
        return len(self.y_layers[j])


def _reach(game: GameStructure, Z: np.ndarray, j: int):
    goal = game.sys_goals[j] & _cpre(game, Z)
    layers = [np.zeros_like(Z)]
    xs: list[list[np.ndarray]] = [[np.zeros_like(Z) for _ in game.env_goals]]
    while True:
        Y = layers[-1]
        start = goal | _cpre(game, Y)
        row = []
        for Je in game.env_goals:
            X = Z.copy()
            while True:
                nx = start | (~Je & _cpre(game, X))
                nx &= Z
                assert not (nx & ~X).any(), "X iterate grew"
                if (nx == X).all():
                    break
                X = nx
            row.append(X)
        newY = np.logical_or.reduce(row) | Y
        assert not (Y & ~newY).any(), "Y iterate shrank"
        if (newY == Y).all():
            return layers, xs
        layers.append(newY)
        xs.append(row)


def solve_gr1(game: GameStructure) -> SolveResult:
    Z = np.ones(game.size, dtype=bool)
    rounds = 0
    while True:
        rounds += 1
        newZ = Z.copy()
        for j in range(len(game.sys_goals)):
            layers, _ = _reach(game, Z, j)
            newZ &= layers[-1]
        assert not (newZ & ~Z).any(), "Z iterate grew"
        if (newZ == Z).all():
            break
        Z = newZ
    y_layers, x_sets = [], []
    for j in range(len(game.sys_goals)):
        layers, xs = _reach(game, Z, j)
        y_layers.append(layers)
        x_sets.append(xs)
    counter = []
    for u in game.init_inputs:
        ok = any(game.init[s] and Z[s] for s in range(game.size)
                 if game.states[s][1] == u and game.states[s][2] is None)
        if not ok:
            counter.append(u)
    return SolveResult(not counter, Z, y_layers, x_sets, counter, rounds)


# --- controller ----------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Node:
    state: int
    goal: int
    mode: int = -1
    rank: int = -1


@dataclass(frozen=True)
class Decision:
    edge: int
    target: str
    output: str
    goal: int
    mode: int
    rank: int


class MealyController:
    """Deterministic strategy; decisions are computed on first use and cached."""

    def __init__(self, game: GameStructure, result: SolveResult,
                 overrides: Mapping[tuple[str, frozenset], str] | None = None):
        if not result.realizable:
            raise NotRealizable("cannot extract a controller from an unrealizable game")
        self.game = game
        self.result = result
        self.overrides = dict(overrides or {})
        self._order = {q: i for i, q in enumerate(game.fts.states)}
        self._cache: dict[Node, Decision] = {}

    def with_overrides(self, overrides: Mapping[tuple[str, frozenset], str]) -> "MealyController":
        return MealyController(self.game, self.result, {**self.overrides, **overrides})

    def initial(self, u: Iterable[str] = ()) -> Node:
        u = frozenset(u)
        for s in range(self.game.size):
            q, u0, y = self.game.states[s]
            if y is None and u0 == u and self.game.init[s] and self.result.winning[s]:
                return Node(s, 0)
        raise ControllerDeadEnd(f"no winning initial state for inputs {sorted(u)}")

    def _pick(self, s: int, cands: list[int], key=None) -> int:
        targets = self.game.edges[s]
        return min(cands, key=lambda e: ((key(e) if key else 0), self._order[targets[e][0]]))

    def decide(self, node: Node) -> Decision:
        hit = self._cache.get(node)
        if hit is None:
            hit = self._cache[node] = self._decide(node)
        return hit

    def _decision(self, s: int, e: int, goal: int, mode: int, rank: int) -> Decision:
        q2, y = self.game.edges[s][e]
        return Decision(e, q2, y, goal, mode, rank)

    def _decide(self, node: Node) -> Decision:
        g, res = self.game, self.result
        s, j = node.state, node.goal
        if not res.winning[s]:
            raise ControllerDeadEnd(f"state {g.state_name(s)} is outside the winning region")
        q, u, _ = g.states[s]
        forced = self.overrides.get((q, u))
        if forced is not None:
            for e, (q2, y) in enumerate(g.edges[s]):
                if y == forced:
                    return self._decision(s, e, j, -1, -1)
        Z = res.winning
        if g.sys_goals[j][s]:
            cands = _edges_into(g, s, Z)
            return self._decision(s, self._pick(s, cands), (j + 1) % len(g.sys_goals), -1, -1)
        r = res.rank(j, s)
        xs = res.x_sets[j][r]
        # keep waiting in the same env-goal mode while that goal is unmet
        modes = ([node.mode] if node.mode >= 0 and node.rank == r else []) + list(range(len(g.env_goals)))
        for i in modes:
            if g.env_goals[i][s] or not xs[i][s]:
                continue
            cands = _edges_into(g, s, xs[i])
            if cands:
                return self._decision(s, self._pick(s, cands), j, i, r)
        below = res.y_layers[j][r - 1]
        cands = _edges_into(g, s, below)
        if not cands:
            raise ControllerDeadEnd(f"no progress move at {g.state_name(s)} for goal {j}")

        def worst(e):
            ts = [t for t in g.succ[s, e] if t < g.size]
            return max((res.rank(j, int(t)) for t in ts), default=0)

        return self._decision(s, self._pick(s, cands, worst), j, -1, -1)

    def step(self, node: Node, u_next: Iterable[str]) -> tuple[Node, str, str]:
        d = self.decide(node)
        key = (d.target, frozenset(u_next), d.output)
        t = self.game.index.get(key)
        if t is None or not self.result.winning[t]:
            raise ControllerDeadEnd(
                f"no response to inputs {sorted(key[1])} after {self.game.state_name(node.state)}")
        return Node(t, d.goal, d.mode, d.rank), d.output, d.target

    def legal_inputs(self, node: Node) -> list[frozenset]:
        v = self.game.vals[node.state]
        return [u for u in self.game.env_moves if v is not None and self.game.env_ok(v, u)]

    def node_name(self, node: Node) -> str:
        extra = f",m{node.mode}@{node.rank}" if node.mode >= 0 else ""
        return f"{self.game.state_name(node.state)}#g{node.goal}{extra}"

    def reachable(self) -> list[Node]:
        seen: dict[Node, None] = {}
        frontier = [self.initial(u) for u in self.game.init_inputs]
        while frontier:
            nxt = []
            for n in frontier:
                if n in seen:
                    continue
                seen[n] = None
                for u in self.legal_inputs(n):
                    nxt.append(self.step(n, u)[0])
            frontier = nxt
        return sorted(seen)

    def table(self) -> list[tuple[Node, frozenset, Node, str]]:
        rows = []
        for n in self.reachable():
            for u in self.legal_inputs(n):
                n2, y, _ = self.step(n, u)
                rows.append((n, u, n2, y))
        return rows

    def dump(self) -> str:
        lines = ["node | env-input | next-node | output"]
        for n, u, n2, y in self.table():
            lines.append(f"{self.node_name(n)} | {{{','.join(sorted(u))}}} | {self.node_name(n2)} | {y}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        rows = [{"node": self.node_name(n), "input": sorted(u), "next": self.node_name(n2), "output": y}
                for n, u, n2, y in self.table()]
        init = {",".join(sorted(u)): self.node_name(self.initial(u)) for u in self.game.init_inputs}
        return json.dumps({"initial": init, "transitions": rows}, indent=1, sort_keys=True) + "\n"


def extract_controller(game: GameStructure, result: SolveResult) -> MealyController:
    return MealyController(game, result)


# --- bounded verification ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    trace: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}\n  " + "\n  ".join(self.trace)


def verify_bounded(
    controller: MealyController,
    depth: int,
    starts: Sequence[Node] | None = None,
    window: int | None = None,
    budget: int = VERIFY_BUDGET,
) -> Violation | None:
    """Explore every input sequence allowed by the assumptions up to ``depth`` steps.

    Checks each system safety formula on every step, that the controller
    always has an answer, and that while every environment goal keeps
    recurring each system goal is met within ``window`` steps.
    Returns ``None`` when nothing is found.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    g = controller.game
    if g.size * len(g.sys_goals) * depth > budget:
        raise DepthTooLargeForBudget(f"{g.size} states x depth {depth} exceeds budget {budget}")
    window = window or 2 * len(g.fts.states)
    spec = g.spec
    step_checks = [(unparse(f), _compile(f)) for f in spec.sys_safety]
    n_env, n_sys = len(g.env_goals), len(g.sys_goals)
    full = (1 << n_env) - 1

    if starts is None:
        starts = [controller.initial(u) for u in g.init_inputs]
    # memo: (node, liveness bookkeeping) -> largest remaining depth already explored
    best: dict[tuple, int] = {}

    def seen_mask(s: int) -> int:
        return sum(1 << i for i in range(n_env) if g.env_goals[i][s])

    def book(s: int, prev: tuple) -> tuple[tuple, int | None]:
        env_here = seen_mask(s)
        out = []
        for j in range(n_sys):
            mask, since = prev[j]
            if g.sys_goals[j][s]:
                out.append((0, -1))
                continue
            mask |= env_here
            if mask == full:
                since = since + 1 if since >= 0 else 0
                if since >= window:
                    return tuple(out), j
            out.append((mask, since))
        return tuple(out), None

    stack = []
    for n in starts:
        bk, bad = book(n.state, tuple((0, -1) for _ in range(n_sys)))
        stack.append((n, bk, depth, (controller.node_name(n),)))
    while stack:
        node, bk, left, trace = stack.pop()
        key = (node, bk)
        if best.get(key, -1) >= left:
            continue
        best[key] = left
        if left == 0:
            continue
        v = g.vals[node.state]
        try:
            d = controller.decide(node)
        except ControllerDeadEnd as exc:
            return Violation("dead-end", str(exc), trace)
        for u in controller.legal_inputs(node):
            t = g.index.get((d.target, u, d.output))
            label = f"--{d.output}/{{{','.join(sorted(u))}}}-->"
            if t is None or g.vals[t] is None:
                return Violation("safety", "auxiliary constraints unsatisfiable", trace + (label,))
            v2 = g.vals[t]
            for text, fn in step_checks:
                if not fn(v, v2):
                    return Violation("safety", text, trace + (label, g.state_name(t)))
            if not controller.result.winning[t]:
                return Violation("dead-end", f"left the winning region at {g.state_name(t)}",
                                 trace + (label,))
            n2 = Node(t, d.goal, d.mode, d.rank)
            bk2, late = book(t, bk)
            if late is not None:
                return Violation("liveness", f"goal {unparse(spec.sys_liveness[late]) if spec.sys_liveness else 'true'}"
                                 f" not met within {window} steps", trace + (label, g.state_name(t)))
            stack.append((n2, bk2, left - 1, trace + (label, controller.node_name(n2))))
    return None
