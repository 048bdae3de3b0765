"""LTL abstract syntax, text parser/printer and the GR(1) specification container.

Concrete syntax::

    formula := "true" | "false" | ident | "!" formula | "(" formula ")"
             | formula ("&" | "|" | "->" | "U") formula
             | ("X" | "F" | "G") formula

Unary operators bind tightest, then ``U``, ``&``, ``|`` and finally the
right-associative ``->``.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

__all__ = [
    "Kind", "Proposition", "Formula", "TrueF", "FalseF", "TRUE", "FALSE", "Atom",
    "Not", "And", "Or", "Implies", "Next", "Until", "Eventually", "Always",
    "LtlError", "LtlSyntaxError", "UnknownProposition", "NotInGr1Fragment",
    "TemporalOperatorPresent", "MissingAtomValuation", "Side", "Gr1Spec",
    "parse_ltl", "unparse", "partition_gr1", "eval_boolean", "eval_step",
    "eval_lasso", "atoms", "is_boolean", "next_depth", "to_core", "conj",
    "parse_spec_file", "format_spec_file",
]

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
KEYWORDS = frozenset({"true", "false", "X", "F", "G", "U"})


class LtlError(Exception):
    pass


class LtlSyntaxError(LtlError):
    def __init__(self, text: str, position: int, expected: Iterable[str]):
        self.text = text
        self.position = position
        self.expected = tuple(sorted(set(expected)))
        super().__init__(
            f"syntax error at column {position}: expected one of {', '.join(self.expected)}"
        )


class UnknownProposition(LtlError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown proposition {name!r}")


class NotInGr1Fragment(LtlError):
    def __init__(self, formula: "Formula", reason: str):
        self.formula = formula
        self.reason = reason
        super().__init__(f"{unparse(formula)}: {reason}")


class TemporalOperatorPresent(LtlError):
    pass


class MissingAtomValuation(LtlError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no truth value for {name!r}")


class Kind(enum.Enum):
    INPUT = "input"
    OUTPUT = "output"
    AUXILIARY = "aux"


@dataclass(frozen=True, order=True)
class Proposition:
    name: str
    kind: Kind = field(default=Kind.INPUT, compare=False)

    def __post_init__(self):
        if not IDENT_RE.match(self.name) or self.name in KEYWORDS:
            raise ValueError(f"invalid proposition name {self.name!r}")


# --- AST -------------------------------------------------------------------

class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return unparse(self)


@dataclass(frozen=True, repr=False)
class TrueF(Formula):
    def __repr__(self):
        return "TRUE"


@dataclass(frozen=True, repr=False)
class FalseF(Formula):
    def __repr__(self):
        return "FALSE"


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula


@dataclass(frozen=True)
class Always(Formula):
    arg: Formula


UNARY = (Not, Next, Eventually, Always)
BINARY = (And, Or, Implies, Until)
TEMPORAL = (Next, Until, Eventually, Always)


def conj(parts: Sequence[Formula]) -> Formula:
    """Left-nested conjunction; ``TRUE`` for an empty sequence."""
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def atoms(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return frozenset((f.name,))
    if isinstance(f, UNARY):
        return atoms(f.arg)
    if isinstance(f, BINARY):
        return atoms(f.left) | atoms(f.right)
    return frozenset()


def is_boolean(f: Formula) -> bool:
    if isinstance(f, TEMPORAL):
        return False
    if isinstance(f, Not):
        return is_boolean(f.arg)
    if isinstance(f, BINARY):
        return is_boolean(f.left) and is_boolean(f.right)
    return True


def next_depth(f: Formula) -> int:
    """Nesting depth of ``X``; -1 when other temporal operators occur."""
    if isinstance(f, (Until, Eventually, Always)):
        return -1
    if isinstance(f, Next):
        d = next_depth(f.arg)
        return -1 if d < 0 else d + 1
    if isinstance(f, Not):
        return next_depth(f.arg)
    if isinstance(f, BINARY):
        a, b = next_depth(f.left), next_depth(f.right)
        return -1 if min(a, b) < 0 else max(a, b)
    return 0


def to_core(f: Formula) -> Formula:
    """Rewrite derived operators into true/atom/not/and/next/until."""
    if isinstance(f, (TrueF, Atom)):
        return f
    if isinstance(f, FalseF):
        return Not(TRUE)
    if isinstance(f, Not):
        return Not(to_core(f.arg))
    if isinstance(f, And):
        return And(to_core(f.left), to_core(f.right))
    if isinstance(f, Or):
        return Not(And(Not(to_core(f.left)), Not(to_core(f.right))))
    if isinstance(f, Implies):
        return Not(And(to_core(f.left), Not(to_core(f.right))))
    if isinstance(f, Next):
        return Next(to_core(f.arg))
    if isinstance(f, Until):
        return Until(to_core(f.left), to_core(f.right))
    if isinstance(f, Eventually):
        return Until(TRUE, to_core(f.arg))
    if isinstance(f, Always):
        return Not(Until(TRUE, Not(to_core(f.arg))))
    raise TypeError(f)


# --- printer ---------------------------------------------------------------

_PREC = {Implies: 1, Or: 2, And: 3, Until: 4}
_SYM = {Implies: "->", Or: "|", And: "&", Until: "U", Next: "X", Eventually: "F", Always: "G"}


def _prec(f: Formula) -> int:
    if isinstance(f, BINARY):
        return _PREC[type(f)]
    if isinstance(f, UNARY):
        return 5
    return 6


def unparse(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, UNARY):
        inner = unparse(f.arg)
        if _prec(f.arg) < 5:
            inner = f"({inner})"
        if isinstance(f, Not):
            return "!" + inner
        return f"{_SYM[type(f)]} {inner}"
    p = _PREC[type(f)]
    left, right = unparse(f.left), unparse(f.right)
    right_assoc = isinstance(f, Implies)
    lp, rp = _prec(f.left), _prec(f.right)
    if lp < p or (lp == p and right_assoc):
        left = f"({left})"
    if rp < p or (rp == p and not right_assoc):
        right = f"({right})"
    return f"{left} {_SYM[type(f)]} {right}"


# --- parser ----------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(?:(->)|([!&|()])|([A-Za-z_][A-Za-z0-9_]*))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise LtlSyntaxError(text, pos, ["operator", "identifier", "'('"])
        tokens.append((m.group(m.lastindex), m.start(m.lastindex)))
        pos = m.end()
    tokens.append(("<end>", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, universe: frozenset[str] | None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.universe = universe

    def peek(self) -> str:
        return self.toks[self.i][0]

    def take(self) -> str:
        tok = self.toks[self.i][0]
        self.i += 1
        return tok

    def fail(self, expected):
        raise LtlSyntaxError(self.text, self.toks[self.i][1], expected)

    def parse(self) -> Formula:
        f = self.implies()
        if self.peek() != "<end>":
            self.fail(["->", "|", "&", "U", "<end>"])
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.until()
        while self.peek() == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        f = self.unary()
        while self.peek() == "U":
            self.take()
            f = Until(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok in ("X", "F", "G"):
            self.take()
            arg = self.unary()
            return {"X": Next, "F": Eventually, "G": Always}[tok](arg)
        return self.primary()

    def primary(self) -> Formula:
        tok = self.peek()
        if tok == "(":
            self.take()
            f = self.implies()
            if self.peek() != ")":
                self.fail(["')'"])
            self.take()
            return f
        if tok == "true":
            self.take()
            return TRUE
        if tok == "false":
            self.take()
            return FALSE
        if IDENT_RE.match(tok) and tok not in KEYWORDS:
            self.take()
            if self.universe is not None and tok not in self.universe:
                raise UnknownProposition(tok)
            return Atom(tok)
        self.fail(["true", "false", "identifier", "!", "X", "F", "G", "'('"])


def _names(universe) -> frozenset[str] | None:
    if universe is None:
        return None
    return frozenset(p.name if isinstance(p, Proposition) else p for p in universe)


def parse_ltl(text: str, universe: Iterable[Proposition | str] | None = None) -> Formula:
    """Parse ``text``; every atom must be in ``universe`` unless it is ``None``."""
    return _Parser(text, _names(universe)).parse()


# --- evaluation ------------------------------------------------------------

Valuation = Union[Mapping[str, bool], frozenset, set]


def _lookup(v: Valuation, name: str, closed: bool) -> bool:
    if isinstance(v, (set, frozenset)):
        return name in v
    if name in v:
        return bool(v[name])
    if closed:
        return False
    raise MissingAtomValuation(name)


def eval_boolean(f: Formula, valuation: Valuation, closed_world: bool = False) -> bool:
    """Propositional truth of ``f``. Set valuations are read closed-world."""
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Atom):
        return _lookup(valuation, f.name, closed_world)
    if isinstance(f, Not):
        return not eval_boolean(f.arg, valuation, closed_world)
    if isinstance(f, And):
        return eval_boolean(f.left, valuation, closed_world) and eval_boolean(f.right, valuation, closed_world)
    if isinstance(f, Or):
        return eval_boolean(f.left, valuation, closed_world) or eval_boolean(f.right, valuation, closed_world)
    if isinstance(f, Implies):
        return (not eval_boolean(f.left, valuation, closed_world)) or eval_boolean(f.right, valuation, closed_world)
    raise TemporalOperatorPresent(unparse(f))


def eval_step(f: Formula, now: Valuation, nxt: Valuation) -> bool:
    """Evaluate a formula with at most one level of ``X`` over a pair of states."""
    if isinstance(f, Next):
        return eval_boolean(f.arg, nxt, True)
    if isinstance(f, Not):
        return not eval_step(f.arg, now, nxt)
    if isinstance(f, And):
        return eval_step(f.left, now, nxt) and eval_step(f.right, now, nxt)
    if isinstance(f, Or):
        return eval_step(f.left, now, nxt) or eval_step(f.right, now, nxt)
    if isinstance(f, Implies):
        return (not eval_step(f.left, now, nxt)) or eval_step(f.right, now, nxt)
    return eval_boolean(f, now, True)


def eval_lasso(f: Formula, word: Sequence[Valuation], loop: int, pos: int = 0) -> bool:
    """Full LTL semantics on the ultimately periodic word ``word[:loop] word[loop:]^w``."""
    n = len(word)
    if not 0 <= loop < n:
        raise ValueError("loop start out of range")
    succ = [i + 1 for i in range(n - 1)] + [loop]

    def sat(g: Formula) -> list[bool]:
        if isinstance(g, TrueF):
            return [True] * n
        if isinstance(g, FalseF):
            return [False] * n
        if isinstance(g, Atom):
            return [_lookup(w, g.name, True) for w in word]
        if isinstance(g, Not):
            return [not x for x in sat(g.arg)]
        if isinstance(g, (And, Or, Implies)):
            a, b = sat(g.left), sat(g.right)
            if isinstance(g, And):
                return [x and y for x, y in zip(a, b)]
            if isinstance(g, Or):
                return [x or y for x, y in zip(a, b)]
            return [(not x) or y for x, y in zip(a, b)]
        if isinstance(g, Next):
            a = sat(g.arg)
            return [a[succ[i]] for i in range(n)]
        if isinstance(g, (Until, Eventually)):
            a = sat(g.left) if isinstance(g, Until) else [True] * n
            b = sat(g.right if isinstance(g, Until) else g.arg)
            out = [False] * n
            for _ in range(n + 1):
                out = [b[i] or (a[i] and out[succ[i]]) for i in range(n)]
            return out
        if isinstance(g, Always):
            a = sat(g.arg)
            out = [True] * n
            for _ in range(n + 1):
                out = [a[i] and out[succ[i]] for i in range(n)]
            return out
        raise TypeError(g)

    return sat(f)[pos]


# --- GR(1) ----------------------------------------------------------------

class Side(enum.Enum):
    ENV = "env"
    SYS = "sys"


@dataclass(frozen=True)
class Gr1Spec:
    env_init: Formula = TRUE
    sys_init: Formula = TRUE
    env_safety: tuple[Formula, ...] = ()
    sys_safety: tuple[Formula, ...] = ()
    env_liveness: tuple[Formula, ...] = ()
    sys_liveness: tuple[Formula, ...] = ()
    env_vars: tuple[Proposition, ...] = ()
    sys_vars: tuple[Proposition, ...] = ()

    def __post_init__(self):
        clash = {p.name for p in self.env_vars} & {p.name for p in self.sys_vars}
        if clash:
            raise ValueError(f"propositions on both sides: {sorted(clash)}")
        for f in self.env_safety + self.sys_safety:
            if next_depth(f) not in (0, 1):
                raise NotInGr1Fragment(f, "safety formula needs at most one X and no U/F/G")
        for f in self.env_liveness + self.sys_liveness + (self.env_init, self.sys_init):
            if not is_boolean(f):
                raise NotInGr1Fragment(f, "init and liveness formulas must be Boolean")

    def formulas(self) -> tuple[Formula, ...]:
        return (self.env_init, self.sys_init) + self.env_safety + self.sys_safety \
            + self.env_liveness + self.sys_liveness


def _classify(f: Formula) -> tuple[str, Formula]:
    if is_boolean(f):
        return "init", f
    if isinstance(f, Always):
        body = f.arg
        if isinstance(body, Eventually):
            if is_boolean(body.arg):
                return "liveness", body.arg
            raise NotInGr1Fragment(f, "recurrence goal must be Boolean under G F")
        d = next_depth(body)
        if d == 0 or d == 1:
            return "safety", body
        if d > 1:
            raise NotInGr1Fragment(f, "nested X inside a safety formula")
        raise NotInGr1Fragment(f, "U/F/G inside a safety formula")
    raise NotInGr1Fragment(f, "top level must be Boolean, G(...) or G F(...)")


def partition_gr1(
    formulas: Iterable[tuple[Side, Formula]],
    env_vars: Sequence[Proposition] = (),
    sys_vars: Sequence[Proposition] = (),
) -> Gr1Spec:
    buckets: dict[tuple[Side, str], list[Formula]] = {}
    for side, f in formulas:
        kind, body = _classify(f)
        buckets.setdefault((side, kind), []).append(body)

    def get(side, kind):
        return tuple(buckets.get((side, kind), ()))

    return Gr1Spec(
        env_init=conj(get(Side.ENV, "init")),
        sys_init=conj(get(Side.SYS, "init")),
        env_safety=get(Side.ENV, "safety"),
        sys_safety=get(Side.SYS, "safety"),
        env_liveness=get(Side.ENV, "liveness"),
        sys_liveness=get(Side.SYS, "liveness"),
        env_vars=tuple(env_vars),
        sys_vars=tuple(sys_vars),
    )


# --- spec files ------------------------------------------------------------

_DECL = {"input": Kind.INPUT, "output": Kind.OUTPUT, "aux": Kind.AUXILIARY}


def parse_spec_file(
    text: str, universe: Iterable[Proposition | str] = ()
) -> tuple[list[tuple[Side, Formula]], list[Proposition]]:
    """Read ``env:``/``sys:`` formula lines plus optional ``input:``/``output:``/``aux:``
    declarations. Declared names extend ``universe``."""
    declared: list[Proposition] = []
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        head = head.strip()
        if not sep or head not in ("env", "sys", *_DECL):
            raise LtlSyntaxError(raw, 0, ["env:", "sys:", "input:", "output:", "aux:"])
        if head in _DECL:
            declared.extend(Proposition(n, _DECL[head]) for n in rest.split())
        else:
            lines.append((lineno, Side(head), rest))
    names = _names(universe) | {p.name for p in declared}
    out = [(side, parse_ltl(body, names)) for _, side, body in lines]
    return out, declared


def format_spec_file(
    formulas: Iterable[tuple[Side, Formula]],
    declarations: Iterable[Proposition] = (),
    comments: Mapping[int, str] | None = None,
    header: Sequence[str] = (),
) -> str:
    out = [f"# {h}" for h in header]
    by_kind: dict[Kind, list[str]] = {}
    for p in declarations:
        by_kind.setdefault(p.kind, []).append(p.name)
    for key, kind in _DECL.items():
        if by_kind.get(kind):
            out.append(f"{key}: {' '.join(by_kind[kind])}")
    for i, (side, f) in enumerate(formulas):
        if comments and i in comments:
            out.append(f"# provenance: {comments[i]}")
        out.append(f"{side.value}: {unparse(f)}")
    return "\n".join(out) + "\n"
