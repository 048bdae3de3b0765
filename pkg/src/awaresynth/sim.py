"""Random feature-reveal traces, closed-loop trials and histogram statistics."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fts import HALT, SLOW, state_location
from .synth import ControllerDeadEnd, MealyController

__all__ = [
    "ProfileKind", "TraceProfile", "EnvTrace", "Verdict", "INFEASIBLE", "TrialOutcome",
    "Histogram", "ComparisonReport", "MismatchedProfiles", "gen_trace", "trace_from_reveals",
    "run_trial", "run_batch", "compare", "trial_rng", "DEFAULT_FEATURES", "profile",
    "verdict_rank",
]

DEFAULT_FEATURES = ("sign", "red", "octagon")


class ProfileKind(enum.Enum):
    P1_LINEAR_PDF = 1
    P2_CONSECUTIVE_RANDOM = 2
    P3_LOOSE_RANDOM = 3


@dataclass(frozen=True)
class TraceProfile:
    kind: ProfileKind
    horizon: int = 4
    features: tuple[str, ...] = DEFAULT_FEATURES
    # profile 1: "pdf" draws each feature's first location from the normalised
    # visibility curve; "cumulative" makes the curve the cumulative visibility
    p1_mode: str = "pdf"
    # profiles 2/3: first reveal location range (inclusive, counted in cells)
    first: tuple[int, int] | None = None
    # profile 3: largest extra gap before each reveal
    gap: int = 3

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not self.features:
            raise ValueError("a profile needs at least one feature")
        if self.p1_mode not in ("pdf", "cumulative"):
            raise ValueError(f"unknown profile-1 mode {self.p1_mode!r}")

    @property
    def first_range(self) -> tuple[int, int]:
        if self.first is not None:
            return self.first
        return (1, self.horizon - 1) if self.horizon > 1 else (1, 1)

    @property
    def label(self) -> str:
        return f"P{self.kind.value}"


def profile(n: int, **kw) -> TraceProfile:
    return TraceProfile(ProfileKind(n), **kw)


@dataclass(frozen=True)
class EnvTrace:
    """Cumulative feature sets; ``reveals[k]`` is what is visible at location ``horizon - k``."""
    reveals: tuple[frozenset, ...]

    @property
    def horizon(self) -> int:
        return len(self.reveals) - 1

    def at(self, loc: int) -> frozenset:
        return self.reveals[self.horizon - loc]

    def __post_init__(self):
        for a, b in zip(self.reveals, self.reveals[1:]):
            if not a <= b:
                raise ValueError("feature sets must grow towards the sign")


def trace_from_reveals(horizon: int, first_seen: dict[str, int]) -> EnvTrace:
    """Build a trace from the location at which each feature first shows up."""
    out = []
    for loc in range(horizon, -1, -1):
        out.append(frozenset(f for f, d in first_seen.items() if d is not None and d >= loc))
    return EnvTrace(tuple(out))


def _p(horizon: int, d: int) -> float:
    return 0.5 + 0.5 * (horizon - d) / horizon


def gen_trace(prof: TraceProfile, rng: np.random.Generator) -> EnvTrace:
    H, feats = prof.horizon, prof.features
    first_seen: dict[str, int | None] = {}
    if prof.kind is ProfileKind.P1_LINEAR_PDF:
        locs = np.arange(H, -1, -1)
        curve = np.array([_p(H, d) for d in locs])
        if prof.p1_mode == "pdf":
            pdf = curve / curve.sum()
            for f, d in zip(feats, rng.choice(locs, size=len(feats), p=pdf)):
                first_seen[f] = int(d)
        else:
            for f in feats:
                prev = 0.0
                for d, c in zip(locs, curve):
                    if rng.random() < (c - prev) / (1.0 - prev):
                        first_seen[f] = int(d)
                        break
                    prev = c
    else:
        lo, hi = prof.first_range
        order = [feats[i] for i in rng.permutation(len(feats))]
        loose = prof.kind is ProfileKind.P3_LOOSE_RANDOM
        d = int(rng.integers(lo, hi + 1))
        for k, f in enumerate(order):
            if k:
                d -= 1
            if loose:
                d -= int(rng.integers(0, prof.gap + 1))
            first_seen[f] = d if d >= 0 else None
    return trace_from_reveals(H, first_seen)


# --- trials -------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Verdict:
    """``stop`` is the number of cells of anticipation; 0 means infeasible."""
    stop: int

    @property
    def feasible(self) -> bool:
        return self.stop > 0

    @property
    def column(self) -> str:
        return f"stop_in_{self.stop}" if self.stop else "infeasible"

    def __str__(self) -> str:
        return f"StopIn({self.stop})" if self.stop else "Infeasible"


INFEASIBLE = Verdict(0)


def verdict_rank(v: Verdict) -> int:
    return v.stop


@dataclass(frozen=True)
class TrialOutcome:
    verdict: Verdict
    first_slowdown_location: int | None
    halted_at_sign: bool
    path: tuple[tuple[str, str], ...] = ()
    states: tuple[int, ...] = ()


def run_trial(controller: MealyController, trace: EnvTrace, trial: int | None = None) -> TrialOutcome:
    """Drive one lap from the far end of the road to the sign."""
    H = trace.horizon
    path: list[tuple[str, str]] = []
    states: list[int] = []
    try:
        node = controller.initial(trace.at(H))
        states.append(node.state)
        loc = H
        first_slow = None
        for _ in range(2 * (H + 1)):
            d = controller.decide(node)
            path.append((d.target, d.output))
            if d.output in (SLOW, HALT) and first_slow is None:
                first_slow = loc
            if d.output == HALT:
                return TrialOutcome(Verdict(first_slow), first_slow, True, tuple(path), tuple(states))
            nxt = state_location(d.target)
            if nxt == 0 and d.target.startswith("M") or nxt > loc:
                break
            # the sign cell shows nothing that was not already visible one cell earlier
            u = trace.at(max(nxt, 1))
            node, _, _ = controller.step(node, u)
            states.append(node.state)
            loc = nxt
    except ControllerDeadEnd as exc:
        raise ControllerDeadEnd(str(exc), trial) from None
    return TrialOutcome(INFEASIBLE, first_slow, False, tuple(path), tuple(states))


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


@dataclass
class Histogram:
    profile: str
    controller: str
    runs: int
    seed: int
    horizon: int
    counts: dict[Verdict, int] = field(default_factory=dict)

    @property
    def columns(self) -> list[Verdict]:
        return [Verdict(n) for n in range(self.horizon, 0, -1)] + [INFEASIBLE]

    @property
    def fractions(self) -> dict[Verdict, float]:
        return {v: self.counts.get(v, 0) / self.runs for v in self.columns}

    def fraction(self, v: Verdict) -> float:
        return self.counts.get(v, 0) / self.runs

    @property
    def infeasible(self) -> float:
        return self.fraction(INFEASIBLE)


def run_batch(
    controller: MealyController,
    prof: TraceProfile,
    runs: int,
    seed: int,
    label: str = "",
) -> Histogram:
    if runs < 1:
        raise ValueError("runs must be at least 1")
    hist = Histogram(prof.label, label, runs, seed, prof.horizon)
    memo: dict[EnvTrace, Verdict] = {}
    for i in range(runs):
        tr = gen_trace(prof, trial_rng(seed, i))
        v = memo.get(tr)
        if v is None:
            v = memo[tr] = run_trial(controller, tr, trial=i).verdict
        hist.counts[v] = hist.counts.get(v, 0) + 1
    return hist


# --- comparison ---------------------------------------------------------------

class MismatchedProfiles(ValueError):
    pass


SAFETY_ORDER = ("base", "ptree", "aware")


@dataclass
class ComparisonReport:
    profile: str
    rows: dict[str, dict[str, float]]
    deltas: dict[tuple[str, str], dict[str, float]]
    violations: list[str]

    def render(self) -> str:
        if not self.rows:
            return f"{self.profile}: no data\n"
        cols = list(next(iter(self.rows.values())))
        width = max(10, *(len(c) for c in cols))
        head = "controller".ljust(10) + "".join(c.rjust(width + 1) for c in cols)
        lines = [f"profile {self.profile}", head]
        for name, row in self.rows.items():
            lines.append(name.ljust(10) + "".join(f"{row[c]:{width + 1}.4f}" for c in cols))
        for (a, b), d in self.deltas.items():
            lines.append(f"{a}-{b}".ljust(10) + "".join(f"{d[c]:+{width + 1}.4f}" for c in cols))
        lines += [f"ordering violation: {v}" for v in self.violations]
        return "\n".join(lines) + "\n"


def compare(histograms: Sequence[Histogram]) -> ComparisonReport:
    if not histograms:
        raise MismatchedProfiles("nothing to compare")
    first = histograms[0]
    for h in histograms[1:]:
        if (h.profile, h.runs) != (first.profile, first.runs):
            raise MismatchedProfiles(f"{h.profile}/{h.runs} vs {first.profile}/{first.runs}")
    rows = {h.controller: {v.column: h.fraction(v) for v in h.columns} for h in histograms}
    names = list(rows)
    deltas = {}
    for a, b in zip(names, names[1:]):
        deltas[(a, b)] = {c: rows[a][c] - rows[b][c] for c in rows[a]}
    violations = []
    ranked = [n for n in SAFETY_ORDER if n in rows]
    for lo, hi in zip(ranked, ranked[1:]):
        if rows[hi]["infeasible"] > rows[lo]["infeasible"]:
            violations.append(f"{hi} misses more stops than {lo}")
    return ComparisonReport(first.profile, rows, deltas, violations)
