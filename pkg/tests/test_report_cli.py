from __future__ import annotations

import csv

import pytest

from awaresynth import cli
from awaresynth.report import (
    CSV_HEADER, CsvFormatError, check_thresholds, format_csv, read_csv, render_chart, write_csv,
)
from awaresynth.sim import INFEASIBLE, Histogram, Verdict
from awaresynth.synth import ControllerDeadEnd, Violation


def hist(profile, controller, fracs, runs=1000):
    h = Histogram(profile, controller, runs, 42, 4)
    for v, f in zip(h.columns, fracs):
        h.counts[v] = round(f * runs)
    return h


def test_csv_round_trip(tmp_path):
    hs = [hist("P2", "aware", [0, 0.3, 0.3, 0.4, 0]), hist("P2", "base", [0, 0, 0, 0.35, 0.65])]
    path = tmp_path / "h.csv"
    write_csv(path, hs)
    rows = list(csv.reader(path.open()))
    assert rows[0] == CSV_HEADER
    assert rows[0] == "profile,controller,runs,seed,stop_in_4,stop_in_3,stop_in_2,stop_in_1,infeasible".split(",")
    back = read_csv(path)
    assert [(h.profile, h.controller, h.runs, h.seed) for h in back] == [("P2", "aware", 1000, 42),
                                                                        ("P2", "base", 1000, 42)]
    assert back[1].infeasible == pytest.approx(0.65)
    assert format_csv(back) == format_csv(hs)


@pytest.mark.parametrize("mutate", [
    lambda rows: [rows[0][::-1]] + rows[1:],
    lambda rows: [rows[0], rows[1][:-1]],
    lambda rows: [rows[0], rows[1][:4] + ["x"] + rows[1][5:]],
    lambda rows: [rows[0], rows[1][:4] + ["0.9"] * 5],
])
def test_malformed_csv(tmp_path, mutate):
    path = tmp_path / "h.csv"
    write_csv(path, [hist("P1", "base", [0.1, 0.1, 0.1, 0.1, 0.6])])
    rows = mutate(list(csv.reader(path.open())))
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    with pytest.raises(CsvFormatError):
        read_csv(path)


def test_chart_is_deterministic_svg(tmp_path):
    hs = [hist("P3", k, [0, 0.1, 0.1, 0.1, 0.7]) for k in ("base", "ptree", "aware")]
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    render_chart(hs, a)
    render_chart(hs, b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().lstrip().startswith("<?xml")
    assert "<svg" in a.read_text()


def test_thresholds():
    good = [
        hist("P2", "aware", [0, 0.4, 0.3, 0.3, 0]),
        hist("P2", "base", [0, 0, 0, 0.34, 0.66]),
        hist("P3", "base", [0, 0, 0, 0.05, 0.95]),
        hist("P3", "ptree", [0, 0.05, 0.05, 0.1, 0.8]),
        hist("P3", "aware", [0, 0.1, 0.2, 0.2, 0.5]),
        hist("P1", "base", [0, 0.1, 0.1, 0.2, 0.6]),
        hist("P1", "ptree", [0.1, 0.2, 0.2, 0.2, 0.3]),
        hist("P1", "aware", [0.3, 0.3, 0.2, 0.2, 0.0]),
    ]
    checks = check_thresholds(good)
    assert len(checks) == 4 and all(c.passed for c in checks)
    bad = [hist("P2", "base", [0, 0, 0.1, 0.3, 0.6])]
    (c,) = check_thresholds(bad)
    assert not c.passed and str(c).startswith("FAIL")
    assert check_thresholds([hist("P1", "aware", [1, 0, 0, 0, 0])]) == []


# --- command line ----------------------------------------------------------------

def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_compile(tmp_path, capsys):
    code, _, _ = run(capsys, "compile", "--strategy", "aware", "--out", tmp_path)
    assert code == 0
    assert "sys: G (sign -> X slowDown)" in (tmp_path / "aware.spec").read_text()
    empty = tmp_path / "empty.onto"
    empty.write_text("# nothing here\n")
    code, _, _ = run(capsys, "compile", "--ontology", empty, "--strategy", "aware", "--out", tmp_path / "e")
    assert code == 0
    assert "sys:" not in (tmp_path / "e" / "aware.spec").read_text()


def test_compile_cycle(tmp_path, capsys):
    bad = tmp_path / "cycle.onto"
    bad.write_text("concept A\nconcept B\nsubclass A B\nsubclass B A\n")
    code, _, err = run(capsys, "compile", "--ontology", bad, "--out", tmp_path)
    assert code == 2
    assert err.strip().startswith("awaresynth: error[SubclassCycle]:")
    assert len(err.strip().splitlines()) == 1


def test_synthesize_paths(tmp_path, capsys):
    code, out, _ = run(capsys, "synthesize", "--strategy", "aware", "--out", tmp_path, "--fts-dump")
    assert code == 0 and "realizable" in out
    assert (tmp_path / "aware.verify.txt").read_text() == "ok\n"
    assert (tmp_path / "aware.controller.txt").read_text().startswith("node | env-input | next-node | output")
    assert "trans M1 S0 slowDown" in (tmp_path / "car.fts").read_text()
    contra = tmp_path / "contra.spec"
    contra.write_text("sys: G (sign -> X halt)\n")
    code, _, err = run(capsys, "synthesize", "--strategy", "aware", "--spec", contra, "--out", tmp_path)
    assert code == 3 and "error[Unrealizable]" in err
    code, _, err = run(capsys, "synthesize", "--verify-depth", "0", "--out", tmp_path)
    assert code == 1 and "error[Usage]" in err


def test_synthesize_violation_exit(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(cli, "verify_bounded", lambda c, d: Violation("safety", "G (stop -> X slowDown)", ()))
    code, _, err = run(capsys, "synthesize", "--strategy", "base", "--out", tmp_path)
    assert code == 4 and "error[Violation]" in err


def test_simulate_dead_end_exit(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise ControllerDeadEnd("no move", 7)
    monkeypatch.setattr(cli, "run_batch", boom)
    code, _, err = run(capsys, "simulate", "--runs", "5", "--out", tmp_path)
    assert code == 5 and "error[ControllerDeadEnd]" in err and "trial 7" in err


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "simulate", "--runs", "0")[0] == 1
    assert run(capsys, "simulate", "--strategies", "fancy")[0] == 1
    assert run(capsys, "simulate", "--profiles", "7")[0] == 1


def test_simulate_and_report(tmp_path, capsys):
    args = ["simulate", "--strategies", "base,ptree,aware", "--profiles", "1,2,3", "--runs", "300",
            "--seed", "42"]
    assert run(capsys, *args, "--out", tmp_path / "a")[0] == 0
    assert run(capsys, *args, "--out", tmp_path / "b")[0] == 0
    a = (tmp_path / "a" / "histograms.csv").read_bytes()
    assert a == (tmp_path / "b" / "histograms.csv").read_bytes()
    assert len(a.decode().strip().splitlines()) == 10
    assert sorted(p.name for p in (tmp_path / "a").glob("*.svg")) == [
        "profile1.svg", "profile2.svg", "profile3.svg"]
    code, out, _ = run(capsys, "report", "--in", tmp_path / "a")
    assert code == 0
    assert "profile P3" in out and "P3 ordering and levels" in out


def test_report_errors(tmp_path, capsys):
    (tmp_path / "h.csv").write_text("controller,profile\nx,y\n")
    code, _, err = run(capsys, "report", "--in", tmp_path)
    assert code == 2 and "error[CsvFormatError]" in err
    assert run(capsys, "report", "--in", tmp_path / "missing")[0] == 2


def test_report_single_controller(tmp_path, capsys):
    write_csv(tmp_path / "one.csv", [hist("P3", "aware", [0, 0.1, 0.2, 0.2, 0.5])])
    code, out, _ = run(capsys, "report", "--in", tmp_path)
    assert code == 0
    assert "aware" in out and "ordering" not in out and "PASS" not in out
