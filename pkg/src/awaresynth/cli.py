"""Command line entry point: ``awaresynth compile|synthesize|simulate|report``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .compiler import DEFAULT_TREE_ORDER, MissingTreeOrder, StrategyKind, UnknownStrategyKind, compile_model
from .fts import build_car_fts, dump_fts
from .kb import OntologyError, load_ontology
from .ltl import LtlError, Side, parse_spec_file
from .report import CsvFormatError, atomic_write, comparison_text, read_csv, render_chart, write_csv
from .scenario import synthesize, traffic_ontology_text
from .sim import profile, run_batch
from .synth import ControllerDeadEnd, SynthError, verify_bounded

EXIT_USAGE, EXIT_INPUT, EXIT_UNREALIZABLE, EXIT_VIOLATION, EXIT_DEAD_END = 1, 2, 3, 4, 5


class Failure(Exception):
    def __init__(self, code: int, kind: str, message: str):
        self.code, self.kind = code, kind
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise Failure(EXIT_USAGE, "Usage", message)


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _strategies(values: Sequence[str]) -> list[StrategyKind]:
    out = []
    for v in values:
        for name in _csv_list(v):
            try:
                out.append(StrategyKind.parse(name))
            except UnknownStrategyKind:
                raise Failure(EXIT_USAGE, "UnknownStrategyKind", f"unknown strategy {name!r}") from None
    return list(dict.fromkeys(out)) or list(StrategyKind)


def _model(path: str | None):
    try:
        text = Path(path).read_text() if path else traffic_ontology_text()
    except OSError as exc:
        raise Failure(EXIT_INPUT, "Io", str(exc)) from None
    try:
        return load_ontology(text)
    except OntologyError as exc:
        raise Failure(EXIT_INPUT, type(exc).__name__, str(exc)) from None


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="awaresynth", description="Ontology-driven GR(1) controller synthesis.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, many=False):
        sp.add_argument("--ontology", help="ontology file (default: bundled traffic ontology)")
        sp.add_argument("--strategies" if many else "--strategy", action="append", default=[],
                        metavar="KINDS", help="base, ptree, aware (comma separated, repeatable)")
        sp.add_argument("--tree-order", type=_csv_list, default=list(DEFAULT_TREE_ORDER))
        sp.add_argument("--out", type=Path, default=Path("out"))
        sp.add_argument("--state-cap", type=int, default=None)

    c = sub.add_parser("compile", help="write one spec file per strategy")
    common(c)
    s = sub.add_parser("synthesize", help="solve, extract and verify controllers")
    common(s)
    s.add_argument("--verify-depth", type=int, default=15)
    s.add_argument("--spec", type=Path, help="extra sys: formulas added to every strategy")
    s.add_argument("--fts-dump", action="store_true")
    m = sub.add_parser("simulate", help="run the strategy x profile grid")
    common(m, many=True)
    m.add_argument("--profiles", type=_csv_list, default=["1", "2", "3"])
    m.add_argument("--runs", type=_positive, default=10000)
    m.add_argument("--seed", type=int, default=42)
    r = sub.add_parser("report", help="compare histograms and check thresholds")
    r.add_argument("--in", dest="indir", type=Path, required=True)
    return p


def cmd_compile(args) -> int:
    model = _model(args.ontology)
    for kind in _strategies(args.strategy):
        try:
            spec = compile_model(model, kind, args.tree_order)
        except (MissingTreeOrder, OntologyError) as exc:
            raise Failure(EXIT_INPUT, type(exc).__name__, str(exc)) from None
        atomic_write(args.out / f"{kind.value}.spec", spec.dump())
        print(f"{kind.value}: {len(spec.sigma)} rules -> {args.out / (kind.value + '.spec')}")
    return 0


def _extra(path: Path | None, model, tree_order):
    if path is None:
        return []
    fts = build_car_fts()
    names = {p.name for p in model.input_symbols | model.output_symbols | fts.props}
    names |= set(fts.outputs) | {f"pt{k}" for k in range(1, len(tree_order) + 1)}
    try:
        formulas, _ = parse_spec_file(path.read_text(), names)
    except OSError as exc:
        raise Failure(EXIT_INPUT, "Io", str(exc)) from None
    except LtlError as exc:
        raise Failure(EXIT_INPUT, type(exc).__name__, str(exc)) from None
    return [f for side, f in formulas if side is Side.SYS]


def _pipeline(model, kind, args, extra=()):
    try:
        return synthesize(kind, model, args.tree_order, extra=extra, cap=args.state_cap)
    except (SynthError, MissingTreeOrder, OntologyError, LtlError) as exc:
        raise Failure(EXIT_INPUT, type(exc).__name__, str(exc)) from None


def cmd_synthesize(args) -> int:
    if args.verify_depth < 1:
        raise Failure(EXIT_USAGE, "Usage", "--verify-depth must be at least 1")
    model = _model(args.ontology)
    extra = _extra(args.spec, model, args.tree_order)
    if args.fts_dump:
        atomic_write(args.out / "car.fts", dump_fts(build_car_fts()))
    for kind in _strategies(args.strategy):
        pipe = _pipeline(model, kind, args, extra)
        name = kind.value
        if not pipe.realizable:
            bad = "; ".join("{" + ",".join(sorted(u)) + "}" for u in pipe.result.counter_initial)
            raise Failure(EXIT_UNREALIZABLE, "Unrealizable", f"{name}: losing initial inputs {bad}")
        ctrl = pipe.controller
        atomic_write(args.out / f"{name}.controller.txt", ctrl.dump())
        atomic_write(args.out / f"{name}.controller.json", ctrl.to_json())
        violation = verify_bounded(ctrl, args.verify_depth)
        report = "ok\n" if violation is None else f"{violation}\n"
        atomic_write(args.out / f"{name}.verify.txt", report)
        if violation is not None:
            raise Failure(EXIT_VIOLATION, "Violation", f"{name}: {violation.kind}: {violation.detail}")
        print(f"{name}: realizable, {pipe.game.size} game states, "
              f"verified to depth {args.verify_depth}")
    return 0


def cmd_simulate(args) -> int:
    model = _model(args.ontology)
    kinds = _strategies(args.strategies)
    try:
        profiles = [profile(int(p)) for p in args.profiles]
    except ValueError:
        raise Failure(EXIT_USAGE, "Usage", f"profiles must be among 1,2,3: {args.profiles}") from None
    controllers = {k: _pipeline(model, k, args).controller for k in kinds}
    if any(c is None for c in controllers.values()):
        raise Failure(EXIT_UNREALIZABLE, "Unrealizable", "a strategy has no controller")
    hists = []
    for prof in profiles:
        row = []
        for kind, ctrl in controllers.items():
            try:
                row.append(run_batch(ctrl, prof, args.runs, args.seed, kind.value))
            except ControllerDeadEnd as exc:
                raise Failure(EXIT_DEAD_END, "ControllerDeadEnd", f"{kind.value}/{prof.label}: {exc}") from None
        render_chart(row, args.out / f"profile{prof.kind.value}.svg")
        hists += row
    write_csv(args.out / "histograms.csv", hists)
    print(f"{len(hists)} rows -> {args.out / 'histograms.csv'}")
    return 0


def cmd_report(args) -> int:
    paths = sorted(Path(args.indir).glob("*.csv"))
    if not paths:
        raise Failure(EXIT_INPUT, "CsvFormatError", f"no CSV files in {args.indir}")
    hists = []
    for p in paths:
        try:
            hists += read_csv(p)
        except CsvFormatError as exc:
            raise Failure(EXIT_INPUT, "CsvFormatError", str(exc)) from None
    sys.stdout.write(comparison_text(hists))
    return 0


COMMANDS = {"compile": cmd_compile, "synthesize": cmd_synthesize,
            "simulate": cmd_simulate, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except Failure as exc:
        print(f"awaresynth: error[{exc.kind}]: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
