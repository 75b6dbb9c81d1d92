"""Command-line entry point: analyze, run, verify and corpus."""

from __future__ import annotations

import argparse
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .acceptability import NotWellModed
from .callset import query_patterns
from .interpreter import FiniteTree, LoopEvidence, dump_trace, ld_explore, sample_queries
from .solver import ProofCertificate, Terminating, Unknown, analyze, verify_certificate
from .syntax import ArityClashError, ParseError, Program, UnknownPredicate, parse_goal, parse_program

EXIT_OK, EXIT_NO, EXIT_INPUT = 0, 1, 2
ORACLE_QUERIES = 20
ORACLE_DEPTH = 500


class InputError(Exception):
    pass


@dataclass
class AnalysisReport:
    verdict: object
    timings: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    certificate_path: Optional[str] = None

    @property
    def exit_code(self) -> int:
        return EXIT_OK if isinstance(self.verdict, Terminating) else EXIT_NO


def _load(path) -> Program:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    try:
        return parse_program(text)
    except ParseError as e:
        raise InputError(f"{path}: {e.msg}") from e
    except ArityClashError as e:
        raise InputError(f"{path}: {e}") from e


def cmd_analyze(file, mode="rigid", order="auto", emit=None, verbose=False, out=None) -> AnalysisReport:
    out = out or sys.stdout
    p = _load(file)
    if mode == "rigid" and not p.directives:
        raise InputError(f"{file}: rigid mode needs a '%% query:' directive")
    if mode == "wellmoded" and not p.modes:
        raise InputError(f"{file}: well-moded mode needs '%% mode:' directives")
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            a = analyze(p, mode, order)
    except (NotWellModed, UnknownPredicate, ValueError) as e:
        raise InputError(f"{file}: {e}") from e
    report = AnalysisReport(a.verdict, a.timings, [str(c) for c in a.constraints])
    print(f"verdict: {'Terminating' if isinstance(a.verdict, Terminating) else 'Unknown'}", file=out)
    if isinstance(a.verdict, Unknown):
        print(f"reason: {a.verdict.reason}", file=out)
    for w in caught:
        print(f"warning: {w.message}", file=out)
    if verbose:
        if a.call_set is not None and len(a.call_set):
            print(f"call set: {a.call_set}", file=out)
        print(f"ignored: {a.rigidity}", file=out)
        print("constraints:", file=out)
        for i, c in enumerate(a.constraints):
            print(f"  ({i}) {c}", file=out)
        if isinstance(a.verdict, Terminating):
            cert = a.verdict.certificate
            for ob in cert.interarg:
                print(f"relation: {ob.required}", file=out)
            print(f"order: {_order_line(cert.order)}", file=out)
    print("timings: " + ", ".join(f"{k} {v * 1000:.1f} ms" for k, v in a.timings.items()), file=out)
    if emit and isinstance(a.verdict, Terminating):
        Path(emit).write_text(a.verdict.certificate.dumps())
        report.certificate_path = str(emit)
        print(f"certificate: {emit}", file=out)
    return report


def _order_line(order: dict) -> str:
    if order["kind"] == "rpo":
        chain = [order["precedence"][0][0]] + [g for _, g in order["precedence"]] if order["precedence"] else []
        return "rpo " + " > ".join(chain)
    return f"norm {order.get('name', '')}"


def cmd_run(file, query, depth=50, trace=False, out=None) -> int:
    out = out or sys.stdout
    p = _load(file)
    try:
        goal = parse_goal(query)
    except ParseError as e:
        raise InputError(f"query: {e.msg}") from e
    nodes = [] if trace else None
    res = ld_explore(p, goal, depth, nodes)
    if trace:
        print(dump_trace(nodes), file=out)
    if isinstance(res, FiniteTree):
        print(f"FiniteTree answers={res.answer_count} nodes={res.node_count} depth={res.max_depth}", file=out)
        return EXIT_OK
    if isinstance(res, LoopEvidence):
        print("LoopEvidence (heuristic): " + " -> ".join(map(str, res.sequence)), file=out)
    else:
        print(f"DepthLimitHit at depth {depth}: " + " -> ".join(str(n.selected) for n in res.witness[-5:]), file=out)
    return EXIT_NO


def cmd_verify(file, cert_path, out=None) -> int:
    out = out or sys.stdout
    p = _load(file)
    try:
        cert = ProofCertificate.loads(Path(cert_path).read_text())
    except (OSError, ValueError, KeyError) as e:
        raise InputError(f"{cert_path}: {e}") from e
    res = verify_certificate(p, cert)
    print("certificate valid" if res else f"certificate invalid: {res.failure}", file=out)
    return EXIT_OK if res else EXIT_NO


# ------------------------------------------------------------------ corpus

EXPECTED = {"terminating", "unknown", "unknown-or-terminating"}


def read_manifest(path) -> dict:
    rows = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[1] not in ("rigid", "wellmoded") or parts[2] not in EXPECTED:
            raise InputError(f"bad manifest line: {line!r}")
        rows[parts[0]] = (parts[1], parts[2])
    return rows


def oracle_agrees(p, queries=ORACLE_QUERIES, depth=ORACLE_DEPTH, seed=0) -> bool:
    """Every sampled concrete query has a finite LD-tree."""
    qs = sample_queries(p, query_patterns(p), queries, 6, seed)
    return all(isinstance(ld_explore(p, q, depth), FiniteTree) for q in qs)


def corpus_row(args) -> tuple:
    path, mode, expected = args
    p = _load(path)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = analyze(p, mode)
    actual = "terminating" if isinstance(a.verdict, Terminating) else "unknown"
    oracle = "n/a"
    if actual == "terminating":
        oracle = "agree" if p.directives and oracle_agrees(p) else "DISAGREE"
    ok = (expected == actual or expected == "unknown-or-terminating") and oracle != "DISAGREE"
    return Path(path).name, mode, expected, actual, oracle, ok


def cmd_corpus(directory, jobs=None, out=None) -> int:
    out = out or sys.stdout
    d = Path(directory)
    files = sorted(f.name for f in d.glob("*.pl"))
    manifest = d / "manifest.txt"
    rows = read_manifest(manifest) if manifest.exists() else {}
    missing = [f for f in files if f not in rows]
    if missing:
        raise InputError(f"no manifest entry for {missing[0]}")
    absent = [f for f in rows if f not in files]
    if absent:
        raise InputError(f"manifest lists missing file {absent[0]}")
    work = [(str(d / f), *rows[f]) for f in files]
    if jobs == 1 or len(work) <= 1:
        results = [corpus_row(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(corpus_row, work))
    print(f"{'file':24} {'mode':10} {'expected':24} {'actual':12} {'oracle':8} match", file=out)
    for name, mode, exp, act, orc, ok in results:
        print(f"{name:24} {mode:10} {exp:24} {act:12} {orc:8} {'yes' if ok else 'NO'}", file=out)
    bad = sum(1 for r in results if not r[-1])
    print(f"{len(results)} programs, {bad} mismatches", file=out)
    return EXIT_OK if bad == 0 else EXIT_NO


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="termlog", description="Termination analysis of definite logic programs under left-to-right selection.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    a = sub.add_parser("analyze", help="prove LD-termination for the declared queries")
    a.add_argument("file")
    a.add_argument("--mode", choices=["rigid", "wellmoded"], default="rigid")
    a.add_argument("--order", choices=["auto", "rpo", "listlen", "termsize"], default="auto")
    a.add_argument("--emit", metavar="PATH", help="write the proof certificate here")
    a.add_argument("--verbose", "-v", action="store_true")
    r = sub.add_parser("run", help="explore the LD-tree of a query")
    r.add_argument("file")
    r.add_argument("query")
    r.add_argument("--depth", type=int, default=50)
    r.add_argument("--trace", action="store_true", help="print every node: depth, selected atom, clause, mgu")
    v = sub.add_parser("verify", help="check a certificate against a program")
    v.add_argument("file")
    v.add_argument("certificate")
    c = sub.add_parser("corpus", help="analyze every program of a directory against its manifest")
    c.add_argument("dir")
    c.add_argument("--jobs", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "analyze":
            return cmd_analyze(args.file, args.mode, args.order, args.emit, args.verbose).exit_code
        if args.cmd == "run":
            if args.depth < 1:
                raise InputError("--depth must be positive")
            return cmd_run(args.file, args.query, args.depth, args.trace)
        if args.cmd == "verify":
            return cmd_verify(args.file, args.certificate)
        if args.cmd == "corpus":
            return cmd_corpus(args.dir, args.jobs)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
