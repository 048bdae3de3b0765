from __future__ import annotations

import numpy as np
import pytest

from awaresynth.ltl import eval_step
from awaresynth.scenario import synthesize
from awaresynth.sim import (
    INFEASIBLE, EnvTrace, MismatchedProfiles, ProfileKind, TraceProfile, Verdict, compare, gen_trace,
    profile, run_batch, run_trial, trace_from_reveals, trial_rng,
)

H = 4
FEATS = ("sign", "red", "octagon")


@pytest.fixture(scope="module")
def ctrls():
    return {k: synthesize(k).controller for k in ("base", "ptree", "aware")}


def test_profile_validation():
    with pytest.raises(ValueError):
        TraceProfile(ProfileKind.P1_LINEAR_PDF, horizon=0)
    with pytest.raises(ValueError):
        TraceProfile(ProfileKind.P2_CONSECUTIVE_RANDOM, features=())
    with pytest.raises(ValueError):
        profile(1, p1_mode="weird")


def test_trace_from_reveals():
    tr = trace_from_reveals(H, {"sign": 4, "octagon": 3, "red": 2})
    assert tr.at(4) == {"sign"}
    assert tr.at(3) == {"sign", "octagon"}
    assert tr.at(2) == tr.at(1) == tr.at(0) == set(FEATS)
    with pytest.raises(ValueError):
        EnvTrace((frozenset({"sign"}), frozenset()))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_traces_are_monotone(n):
    rng = np.random.default_rng(1)
    for _ in range(2000):
        tr = gen_trace(profile(n), rng)
        assert all(a <= b for a, b in zip(tr.reveals, tr.reveals[1:]))
        assert len(tr.reveals) == H + 1


def test_p2_reveals_one_feature_per_cell():
    rng = np.random.default_rng(3)
    prof = profile(2, first=(4, 4))
    for _ in range(200):
        tr = gen_trace(prof, rng)
        assert [len(tr.at(d)) for d in range(4, -1, -1)] == [1, 2, 3, 3, 3]
    firsts = set()
    for _ in range(3000):
        tr = gen_trace(profile(2), rng)
        firsts.add(max(d for d in range(H + 1) if len(tr.at(d)) == 1 and len(tr.at(d + 1) if d < H else ()) == 0)
                   if any(tr.reveals) else None)
    assert firsts == {1, 2, 3}


def test_p3_first_reveal_law():
    # first reveal = uniform{1..3} minus uniform{0..3}; at the sign cell or later w.p. 1/2
    rng = np.random.default_rng(5)
    n = 40000
    late = sum(1 for _ in range(n) if not gen_trace(profile(3), rng).at(1))
    assert abs(late / n - 0.5) < 0.01


def test_p1_cumulative_visibility_matches_curve():
    rng = np.random.default_rng(11)
    n = 60_000
    prof = profile(1, p1_mode="cumulative")
    seen = np.zeros(H + 1)
    for _ in range(n):
        tr = gen_trace(prof, rng)
        for d in range(H + 1):
            seen[d] += len(tr.at(d))
    freq = seen / (n * len(FEATS))
    expected = [0.5 + 0.5 * (H - d) / H for d in range(H + 1)]
    assert np.allclose(freq, expected, atol=0.005)


def test_p1_pdf_first_location_frequencies():
    rng = np.random.default_rng(13)
    n = 60_000
    counts = np.zeros(H + 1)
    for _ in range(n):
        prev = frozenset()
        for k, now in enumerate(gen_trace(profile(1), rng).reveals):
            counts[H - k] += len(now - prev)
            prev = now
    curve = np.array([0.5 + 0.5 * (H - d) / H for d in range(H + 1)])
    assert np.allclose(counts / counts.sum(), curve / curve.sum(), atol=0.005)


def test_all_visible_early_gives_smoothest_stop(ctrls):
    tr = trace_from_reveals(H, {f: 4 for f in FEATS})
    for c in ctrls.values():
        out = run_trial(c, tr)
        assert out.verdict == Verdict(4) and out.halted_at_sign
        assert [y for _, y in out.path] == ["slowDown"] * 4 + ["halt"]


def test_late_detection_is_infeasible(ctrls):
    tr = trace_from_reveals(H, {"sign": 2, "red": 1, "octagon": 0})
    out = run_trial(ctrls["base"], tr)
    assert out.verdict == INFEASIBLE and not out.halted_at_sign
    assert run_trial(ctrls["aware"], tr).verdict == Verdict(2)
    nothing = trace_from_reveals(H, {f: 0 for f in FEATS})
    for c in ctrls.values():
        assert run_trial(c, nothing).verdict == INFEASIBLE


def test_sign_first_at_far_end(ctrls):
    tr = trace_from_reveals(H, {"sign": 4, "octagon": 3, "red": 2})
    assert run_trial(ctrls["aware"], tr).verdict == Verdict(4)
    assert run_trial(ctrls["ptree"], tr).verdict == Verdict(4)
    assert run_trial(ctrls["base"], tr).verdict == Verdict(2)


def _all_traces():
    import itertools
    for locs in itertools.product([None, 0, 1, 2, 3, 4], repeat=3):
        yield trace_from_reveals(H, dict(zip(FEATS, locs)))


def test_exhaustive_dominance_and_safety_replay(ctrls):
    for tr in _all_traces():
        outs = {k: run_trial(c, tr) for k, c in ctrls.items()}
        assert outs["aware"].verdict >= outs["base"].verdict
        for k, out in outs.items():
            if out.verdict.feasible:
                g = ctrls[k].game
                for a, b in zip(out.states, out.states[1:]):
                    assert all(eval_step(f, g.vals[a], g.vals[b]) for f in g.spec.sys_safety)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dominance_on_random_traces(ctrls, n):
    rng = np.random.default_rng(100 + n)
    for _ in range(10_000):
        tr = gen_trace(profile(n), rng)
        assert run_trial(ctrls["aware"], tr).verdict >= run_trial(ctrls["base"], tr).verdict


def test_batch_determinism_and_totals(ctrls):
    a = run_batch(ctrls["aware"], profile(2), 2000, 42, "aware")
    b = run_batch(ctrls["aware"], profile(2), 2000, 42, "aware")
    assert a.counts == b.counts
    assert sum(a.counts.values()) == 2000
    assert abs(sum(a.fractions.values()) - 1.0) < 1e-12
    assert a.infeasible == 0.0
    with pytest.raises(ValueError):
        run_batch(ctrls["aware"], profile(2), 0, 42)


def test_substreams_are_order_independent():
    prof = profile(3)
    forward = [gen_trace(prof, trial_rng(9, i)) for i in range(50)]
    backward = [gen_trace(prof, trial_rng(9, i)) for i in reversed(range(50))][::-1]
    assert forward == backward


def test_compare(ctrls):
    hs = [run_batch(ctrls[k], profile(3), 3000, 1, k) for k in ("base", "ptree", "aware")]
    rep = compare(hs)
    assert rep.violations == []
    assert rep.rows["base"]["infeasible"] > rep.rows["ptree"]["infeasible"] > rep.rows["aware"]["infeasible"]
    assert ("base", "ptree") in rep.deltas
    single = compare(hs[:1])
    assert single.deltas == {} and single.violations == []
    swapped = [hs[2], hs[0]]
    swapped[0].controller, swapped[1].controller = "base", "aware"
    assert compare(swapped).violations
    with pytest.raises(MismatchedProfiles):
        compare([hs[0], run_batch(ctrls["base"], profile(2), 3000, 1, "base")])
    assert "profile P3" in rep.render()
