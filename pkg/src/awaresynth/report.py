"""Histogram CSV files, grouped-bar charts and threshold checks."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .sim import INFEASIBLE, Histogram, Verdict, compare

__all__ = [
    "CSV_HEADER", "CsvFormatError", "write_csv", "format_csv", "read_csv", "render_chart",
    "Check", "check_thresholds", "atomic_write",
]

HORIZON = 4
CSV_HEADER = ["profile", "controller", "runs", "seed"] + \
    [f"stop_in_{n}" for n in range(HORIZON, 0, -1)] + ["infeasible"]


class CsvFormatError(ValueError):
    pass


def atomic_write(path: Path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def format_csv(histograms: Iterable[Histogram]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for h in histograms:
        if h.horizon != HORIZON:
            raise ValueError(f"CSV columns assume a horizon of {HORIZON}")
        w.writerow([h.profile, h.controller, h.runs, h.seed]
                   + [repr(h.fraction(v)) for v in h.columns])
    return buf.getvalue()


def write_csv(path: Path, histograms: Iterable[Histogram]) -> None:
    atomic_write(path, format_csv(histograms))


def read_csv(path: Path) -> list[Histogram]:
    """Read histograms back; counts are reconstructed from fractions and runs."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CsvFormatError(str(exc)) from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise CsvFormatError(f"{path}: header must be {','.join(CSV_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise CsvFormatError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
        try:
            runs, seed = int(row[2]), int(row[3])
            fracs = [float(x) for x in row[4:]]
        except ValueError as exc:
            raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
        if runs < 1 or any(not 0.0 <= f <= 1.0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise CsvFormatError(f"{path}:{lineno}: fractions out of range")
        h = Histogram(row[0], row[1], runs, seed, HORIZON)
        cols = h.columns
        for v, f in zip(cols, fracs):
            h.counts[v] = round(f * runs)
        out.append(h)
    return out


def render_chart(histograms: Sequence[Histogram], path: Path, title: str | None = None) -> None:
    """Grouped bars: one group per verdict column, one bar per controller."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "awaresynth"
    cols = histograms[0].columns
    width = 0.8 / max(1, len(histograms))
    fig, ax = plt.subplots(figsize=(7, 3.6))
    for k, h in enumerate(histograms):
        xs = [i + (k - (len(histograms) - 1) / 2) * width for i in range(len(cols))]
        ax.bar(xs, [h.fraction(v) for v in cols], width, label=h.controller)
    ax.set_xticks(range(len(cols)))
    ax.set_xticklabels([str(v) if v.feasible else "infeasible" for v in cols])
    ax.set_ylim(0, 1)
    ax.set_ylabel("fraction of runs")
    ax.set_title(title or f"profile {histograms[0].profile}, {histograms[0].runs} runs")
    ax.legend()
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    atomic_write(path, buf.getvalue())


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def __str__(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _within(x: float, centre: float, tol: float) -> bool:
    return abs(x - centre) <= tol + 1e-12


def check_thresholds(histograms: Iterable[Histogram]) -> list[Check]:
    """Reproduction thresholds for whichever profile/controller cells are present."""
    cells = {(h.profile, h.controller): h for h in histograms}
    out: list[Check] = []

    def get(p, c):
        return cells.get((p, c))

    aware2, base2 = get("P2", "aware"), get("P2", "base")
    if aware2:
        x = aware2.infeasible
        out.append(Check("P2 aware never misses", x == 0.0, f"infeasible={x:.4f}"))
    if base2:
        x = base2.infeasible
        late = Verdict(1)
        rest = 1.0 - x - base2.fraction(late)
        out.append(Check("P2 base misses about 65%", _within(x, 0.65, 0.15) and rest < 1e-12,
                         f"infeasible={x:.4f}, feasible mass outside stop_in_1={rest:.4f}"))
    p3 = [get("P3", c) for c in ("base", "ptree", "aware")]
    if all(p3):
        b, p, a = (h.infeasible for h in p3)
        ok = b > p > a and _within(b, 0.90, 0.15) and _within(p, 0.80, 0.15) and _within(a, 0.50, 0.15)
        out.append(Check("P3 ordering and levels", ok, f"base={b:.4f} ptree={p:.4f} aware={a:.4f}"))
    p1 = [get("P1", c) for c in ("base", "ptree", "aware")]
    if all(p1):
        b, p, a = (h.infeasible for h in p1)
        d3 = p1[2].fraction(Verdict(3)) - p1[1].fraction(Verdict(3))
        out.append(Check("P1 both improve on base and aware anticipates", p < b and a < b and d3 >= 0.05,
                         f"base={b:.4f} ptree={p:.4f} aware={a:.4f} stop_in_3 delta={d3:+.4f}"))
    return out


def comparison_text(histograms: Sequence[Histogram]) -> str:
    by_profile: dict[str, list[Histogram]] = {}
    for h in histograms:
        by_profile.setdefault(h.profile, []).append(h)
    parts = [compare(hs).render() for _, hs in sorted(by_profile.items())]
    parts += [str(c) for c in check_thresholds(histograms)]
    return "\n".join(parts) + "\n"
