"""Order search, proof certificates and their verification.

Stage 1 works on abstract demands only: every constraint must have at least
one reduction whose demanded positions avoid the ignored ones.  Stage 2 tries
concrete orders (the two stock norms, then RPO precedences) and accepts the
first one under which every constraint has a reduction whose demands, and
the obligations it raises, all hold.
"""

from __future__ import annotations

import json
import os
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

from .acceptability import (
    DecreaseConstraint,
    InterargObligation,
    ReductionOutcome,
    discharge_obligation,
    generate_constraints,
    generate_wellmoded_constraints,
    hypotheses_for,
    output_requirement,
    reduction_candidates,
    wellmoded_check,
)
from .callset import (
    CallSet,
    RigidityRequirement,
    infer_call_set,
    leq,
    pattern_atom,
    rigidity_requirements,
)
from .demands import (
    ConditionalDecrease,
    Equality,
    GroundDecrease,
    Gt,
    InterargRelation,
    MonotoneAt,
    Proof,
    SubtermAt,
    demand_from_json,
)
from .orders import (
    NormBased,
    PositionFamily,
    Rpo,
    _closure,
    equal_under,
    families,
    greater_under,
    is_rigid,
    list_length_norm,
    order_from_json,
    order_to_json,
    precedence_chain,
    term_size_norm,
)
from .syntax import Atom, Compound, Program, Symbol, Var, const, dependency_graph, parse_atom, symbols_of

DEFAULT_BUDGET = 10_000
FORMAT = "termlog-certificate/1"


class BudgetExceeded(RuntimeError):
    pass


def budget_from_env(default: int = DEFAULT_BUDGET) -> int:
    raw = os.environ.get("TERMLOG_BUDGET")
    if not raw:
        return default
    n = int(raw)
    if n < 1:
        raise ValueError("TERMLOG_BUDGET must be positive")
    return n


# ---------------------------------------------------------------- verdicts


@dataclass(frozen=True)
class Terminating:
    certificate: object
    order: object = None

    def __str__(self):
        return "Terminating"


@dataclass(frozen=True)
class Unknown:
    reason: str
    unreduced: tuple = ()

    def __str__(self):
        return f"Unknown: {self.reason}"


Verdict = Union[Terminating, Unknown]


# ------------------------------------------------------- checking demands


def _declared(order_json: dict) -> tuple:
    return (
        PositionFamily.from_json(order_json.get("monotone", {})),
        PositionFamily.from_json(order_json.get("subterm", {})),
    )


def demand_failure(spec, fams, d) -> Optional[str]:
    """None if demand d holds under the order with (monotone, subterm) families fams."""
    mono, sub = fams
    if isinstance(d, SubtermAt):
        return None if (d.sym, d.pos) in sub else f"{d.sym} position {d.pos} is not a subterm position"
    if isinstance(d, MonotoneAt):
        return None if (d.sym, d.pos) in mono else f"{d.sym} position {d.pos} is not a monotone position"
    if isinstance(d, Equality):
        return None if equal_under(spec, d.lhs, d.rhs) else f"{d} does not hold"
    if isinstance(d, (GroundDecrease, ConditionalDecrease)):
        hyps = [(g.lhs, g.rhs) for g in d.premises if isinstance(g, Gt)]
        c = d.conclusion
        return None if greater_under(spec, hyps, c.lhs, c.rhs) else f"{d} does not hold"
    raise TypeError(d)


def _first_failure(spec, fams, demands) -> Optional[str]:
    for d in demands:
        msg = demand_failure(spec, fams, d)
        if msg:
            return msg
    return None


@dataclass(frozen=True)
class SolvedDemands:
    """Certificate for a bare demand set: the order and the demands it satisfies."""

    order: object
    demands: tuple
    signature: tuple = ()

    def check(self) -> bool:
        fams = families(self.order, self.signature)
        return _first_failure(self.order, fams, self.demands) is None


# --------------------------------------------------------- order candidates


def _stock_norms(p: Program, ignored: PositionFamily, choice: str):
    preds = p.predicates()
    if choice in ("auto", "listlen"):
        yield NormBased(list_length_norm(preds, ignored))
    if choice in ("auto", "termsize"):
        yield NormBased(term_size_norm(p.functors(), preds, ignored))


def harvest_precedence(decreases, symbols) -> tuple:
    """Pairs root(l) above root(r) wherever root(r) does not occur in l; cycles are skipped."""
    pairs = []
    for lhs, rhs in decreases:
        lhs = lhs.as_term() if isinstance(lhs, Atom) else lhs
        rhs = rhs.as_term() if isinstance(rhs, Atom) else rhs
        if not (isinstance(lhs, Compound) and isinstance(rhs, Compound)):
            continue
        f, g = lhs.sym, rhs.sym
        if f == g or g in set(symbols_of(lhs)) or f not in symbols or g not in symbols:
            continue
        if (f, g) in pairs or (g, f) in _closure(tuple(pairs)):
            continue
        pairs.append((f, g))
    return tuple(pairs)


def linear_extensions(symbols, pairs):
    """Total orders (highest first) extending pairs, in lexicographic order of symbol index."""
    symbols = list(symbols)
    above = {s: set() for s in symbols}
    for f, g in _closure(tuple(pairs)):
        if g in above:
            above[g].add(f)
    chosen = []
    placed = set()

    def go():
        if len(chosen) == len(symbols):
            yield tuple(chosen)
            return
        for s in symbols:
            if s in placed or not above[s] <= placed:
                continue
            chosen.append(s)
            placed.add(s)
            yield from go()
            chosen.pop()
            placed.discard(s)

    yield from go()


def order_candidates(p: Program, ignored: PositionFamily, decreases, choice: str = "auto"):
    yield from _stock_norms(p, ignored, choice)
    if choice not in ("auto", "rpo"):
        return
    symbols = list(dict.fromkeys(p.predicates() + p.functors()))
    pairs = harvest_precedence(decreases, set(symbols))
    for ext in linear_extensions(symbols, pairs):
        yield Rpo(precedence_chain(ext), frozenset(), ignored)


# ----------------------------------------------------------- analysis


@dataclass(frozen=True)
class Justification:
    """How one constraint is discharged under the certificate's order."""

    option: str
    demands: tuple = ()
    proof: Optional[Proof] = None
    relations: tuple = ()
    hypotheses: tuple = ()

    def to_json(self):
        d = {
            "option": self.option,
            "demands": [x.to_json() for x in self.demands],
            "relations": list(self.relations),
            "lemma": _lemma(self),
        }
        if self.proof is not None:
            d["proof"] = self.proof.to_json()
        return d


def _lemma(j: Justification) -> str:
    if j.option == "layering":
        return "layering"
    if j.proof is not None:
        return j.proof.rule
    return "order-comparison"


@dataclass(frozen=True)
class ProofCertificate:
    mode: str
    call_set: CallSet
    rigidity: RigidityRequirement
    constraints: tuple
    interarg: tuple
    order: dict
    per_constraint: tuple
    modes: tuple = ()
    search_trace: int = 0

    def order_spec(self):
        return order_from_json(self.order)

    def to_json(self) -> dict:
        d = {
            "format": FORMAT,
            "mode": self.mode,
            "callSet": self.call_set.to_json(),
            "rigidity": self.rigidity.to_json(),
            "constraints": [c.to_json() for c in self.constraints],
            "interarg": [_ob_to_json(ob) for ob in self.interarg],
            "order": self.order,
            "perConstraint": [j.to_json() for j in self.per_constraint],
            "searchTrace": self.search_trace,
        }
        if self.mode == "wellmoded":
            d["modes"] = {str(s): list(ms) for s, ms in self.modes}
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(d: dict) -> "ProofCertificate":
        if d.get("format") != FORMAT:
            raise ValueError(f"unsupported certificate format {d.get('format')!r}")
        cons = []
        for c in d["constraints"]:
            cons.append(DecreaseConstraint(
                c["clause"], c["bodyIndex"], parse_atom(c["head"]), parse_atom(c["body"]),
                tuple(parse_atom(a) for a in c["conditions"]), layered=c.get("layered", False),
            ))
        per = []
        for j in d["perConstraint"]:
            per.append(Justification(
                j["option"],
                tuple(demand_from_json(x) for x in j["demands"]),
                Proof.from_json(j["proof"]) if "proof" in j else None,
                tuple(j["relations"]),
            ))
        modes = tuple((Symbol.parse(k), tuple(v)) for k, v in d.get("modes", {}).items())
        return ProofCertificate(
            d["mode"],
            CallSet.from_json(d["callSet"]),
            RigidityRequirement.from_json(d["rigidity"]),
            tuple(cons),
            tuple(_ob_from_json(x) for x in d["interarg"]),
            d["order"],
            tuple(per),
            modes,
            d.get("searchTrace", 0),
        )

    @staticmethod
    def loads(text: str) -> "ProofCertificate":
        return ProofCertificate.from_json(json.loads(text))


def _ob_to_json(ob: InterargObligation) -> dict:
    d = {"key": ob.required.key, "relation": ob.required.to_json()}
    if ob.pattern:
        d["pattern"] = [str(a) for a in ob.pattern]
    return d


def _ob_from_json(d) -> InterargObligation:
    return InterargObligation(InterargRelation.from_json(d["relation"]), tuple(parse_atom(a) for a in d.get("pattern", [])))


@dataclass
class Analysis:
    verdict: object
    mode: str
    call_set: Optional[CallSet] = None
    rigidity: Optional[RigidityRequirement] = None
    constraints: tuple = ()
    timings: dict = field(default_factory=dict)


class _Search:
    """Per-order check of every constraint, with discharges cached across orders."""

    def __init__(self, p: Program, constraints, options, mode):
        self.p = p
        self.constraints = constraints
        self.options = options
        self.mode = mode
        self.discharges = {}

    def discharge(self, ob, relations) -> list:
        key = (ob, relations)
        if key not in self.discharges:
            self.discharges[key] = discharge_obligation(self.p, ob, relations)
        return self.discharges[key]

    def try_order(self, spec, fams):
        chosen, obligations = [], []
        relations = ()
        for c, opts in zip(self.constraints, self.options):
            pick = None
            for r in opts:
                j = self._check(spec, fams, c, r, relations)
                if j is not None:
                    pick = (r, j)
                    break
            if pick is None:
                return None
            r, j = pick
            chosen.append(j)
            for ob in r.obligations:
                if ob not in obligations:
                    obligations.append(ob)
            relations = tuple(dict.fromkeys(relations + r.relations))
        return chosen, obligations

    def _check(self, spec, fams, c, r: ReductionOutcome, relations):
        if r.option == "layering":
            return Justification("layering")
        if r.option == "unreducible":
            return None
        if _first_failure(spec, fams, r.demands):
            return None
        rels = tuple(dict.fromkeys(relations + r.relations))
        hyps = hypotheses_for(c.conditions, r.relations)[0] if r.relations else ()
        if not greater_under(spec, hyps, c.head, c.body):
            return None
        for ob in r.obligations:
            if _first_failure(spec, fams, self.discharge(ob, rels)):
                return None
        return Justification(r.option, r.demands, r.proof, tuple(x.key for x in r.relations), hyps)


def analyze(p: Program, mode: str = "rigid", order: str = "auto", budget: Optional[int] = None) -> Analysis:
    """Run the whole pipeline on a program; never raises for a merely unprovable program."""
    budget = budget if budget is not None else budget_from_env()
    timings = {}
    t0 = time.perf_counter()
    modes = ()
    if mode == "rigid":
        cs = infer_call_set(p)
        rr = rigidity_requirements(cs, p)
        timings["callset"] = time.perf_counter() - t0
        constraints = generate_constraints(p, cs, rr)
        ignored = rr.all_ignored()
        conj = False
    elif mode == "wellmoded":
        mm = p.mode_map()
        if not mm:
            raise ValueError("no mode declarations: add '%% mode:' directives")
        modes = tuple(mm.items())
        constraints = generate_wellmoded_constraints(p, mm)
        rr = output_requirement(mm)
        cs = infer_call_set(p) if p.directives else CallSet()
        timings["callset"] = time.perf_counter() - t0
        ignored = rr.all_ignored()
        conj = True
    else:
        raise ValueError(f"unknown mode {mode!r}")
    t1 = time.perf_counter()
    timings["constraints"] = t1 - t0 - timings["callset"]
    constraints = tuple(constraints)

    def done(verdict):
        timings["solve"] = time.perf_counter() - t1
        return Analysis(verdict, mode, cs, rr, constraints, timings)

    # stage 1: every constraint needs a reduction at all
    options = []
    for c in constraints:
        opts = [r for r in reduction_candidates(c, rr, conj) if r.reducible]
        if not opts:
            return done(Unknown(f"no strict decrease possible for {c}", (str(c),)))
        options.append(opts)

    decreases = [(c.head, c.body) for c in constraints if not c.layered]
    search = _Search(p, constraints, options, mode)
    for opts in options:
        for r in opts:
            for ob in r.obligations:
                for d in search.discharge(ob, r.relations):
                    if isinstance(d, (GroundDecrease, ConditionalDecrease)):
                        decreases.append((d.conclusion.lhs, d.conclusion.rhs))
    signature = list(dict.fromkeys(p.predicates() + p.functors()))

    # stage 2: concrete orders
    tried = 0
    for spec in order_candidates(p, ignored, decreases, order):
        tried += 1
        if tried > budget:
            return done(Unknown(f"search budget of {budget} orders exhausted ({BudgetExceeded.__name__})"))
        fams = families(spec, signature)
        if mode == "rigid" and not all(is_rigid(spec, pattern_atom(a)) for a in cs.atoms):
            continue
        res = search.try_order(spec, fams)
        if res is None:
            continue
        chosen, obligations = res
        cert = ProofCertificate(
            mode, cs, rr, constraints, tuple(obligations),
            order_to_json(spec, signature), tuple(chosen), modes, tried,
        )
        ok = verify_certificate(p, cert)
        if not ok:
            raise AssertionError(f"internal error: emitted certificate fails ({ok.failure})")
        return done(Terminating(cert, spec))
    unreduced = tuple(str(c) for c in constraints if not c.layered)
    return done(Unknown(f"no order among {tried} candidates satisfies all constraints", unreduced))


def solve(demands, rr: RigidityRequirement, symbols=(), budget: Optional[int] = None, order: str = "auto") -> Verdict:
    """Find a concrete order satisfying a bare list of demands."""
    budget = budget if budget is not None else budget_from_env()
    demands = list(demands)
    ignored = rr.all_ignored()
    for d in demands:
        if isinstance(d, (SubtermAt, MonotoneAt)) and (d.sym, d.pos) in ignored:
            return Unknown(f"{d} demanded at an ignored position", (str(d),))
    symbols = list(dict.fromkeys(symbols)) if symbols else _demand_symbols(demands)
    decreases = [(d.conclusion.lhs, d.conclusion.rhs) for d in demands if isinstance(d, (GroundDecrease, ConditionalDecrease))]
    tried = 0
    for spec in _demand_orders(symbols, ignored, decreases, order):
        tried += 1
        if tried > budget:
            return Unknown(f"search budget of {budget} orders exhausted ({BudgetExceeded.__name__})")
        fams = families(spec, symbols)
        if _first_failure(spec, fams, demands) is None:
            return Terminating(SolvedDemands(spec, tuple(demands), tuple(symbols)), spec)
    return Unknown(f"no order among {tried} candidates satisfies the demands", tuple(str(d) for d in demands))


def _demand_symbols(demands) -> list:
    seen = {}
    for d in demands:
        if isinstance(d, (SubtermAt, MonotoneAt)):
            seen.setdefault(d.sym, None)
            continue
        terms = []
        if isinstance(d, (GroundDecrease, ConditionalDecrease)):
            terms = [d.conclusion.lhs, d.conclusion.rhs]
            terms += [x for g in d.premises if isinstance(g, Gt) for x in (g.lhs, g.rhs)]
        elif isinstance(d, Equality):
            terms = [d.lhs, d.rhs]
        for t in terms:
            t = t.as_term() if isinstance(t, Atom) else t
            for s in symbols_of(t):
                seen.setdefault(s, None)
    return list(seen)


def _demand_orders(symbols, ignored, decreases, choice):
    if choice in ("auto", "listlen"):
        yield NormBased(list_length_norm((), ignored))
    if choice in ("auto", "termsize"):
        yield NormBased(term_size_norm(symbols, (), ignored))
    if choice in ("auto", "rpo"):
        for ext in linear_extensions(symbols, harvest_precedence(decreases, set(symbols))):
            yield Rpo(precedence_chain(ext), frozenset(), ignored)


# ------------------------------------------------------------ verification


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    failure: str = ""

    def __bool__(self):
        return self.ok


def _fail(msg) -> VerifyResult:
    return VerifyResult(False, msg)


def verify_certificate(p: Program, cert) -> VerifyResult:
    """Replay a certificate against a program; reports the first failing check."""
    if isinstance(cert, dict):
        cert = ProofCertificate.from_json(cert)
    try:
        spec = cert.order_spec()
    except ValueError as e:
        return _fail(f"order: {e}")
    if not isinstance(spec, (Rpo, NormBased)):
        return _fail("order: not a concrete order")
    signature = list(dict.fromkeys(p.predicates() + p.functors()))
    declared = _declared(cert.order)
    rr = cert.rigidity

    # 1. constraints are the ones the program gives rise to
    if cert.mode == "rigid":
        if p.directives:
            inferred = infer_call_set(p)
            for a in inferred.atoms:
                b = cert.call_set.get(a.pred)
                if b is None or not all(leq(x, y) for x, y in zip(a.args, b.args)):
                    return _fail(f"call set: {a} is not covered by the certificate")
        need = rigidity_requirements(cert.call_set, p)
        if not _contains(rr.ignored_pred, need.ignored_pred) or not _contains(rr.ignored_fun, need.ignored_fun):
            return _fail("rigidity: certificate ignores fewer positions than the call set requires")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            expected = generate_constraints(p, cert.call_set, rr)
    elif cert.mode == "wellmoded":
        mm = dict(cert.modes)
        if not wellmoded_check(p, mm):
            return _fail("modes: program is not well-moded")
        expected = generate_wellmoded_constraints(p, mm)
    else:
        return _fail(f"unknown mode {cert.mode!r}")
    got = [str(c) for c in cert.constraints]
    want = [str(c) for c in expected]
    if got != want:
        return _fail(f"constraints: certificate lists {len(got)}, program gives {len(want)} (first difference: {_first_diff(got, want)})")
    if len(cert.per_constraint) != len(expected):
        return _fail("perConstraint: one justification per constraint is required")

    # 2. every constraint holds
    relations = {ob.required.key: ob.required for ob in cert.interarg}
    dg = dependency_graph(p)
    for k, (c, j) in enumerate(zip(expected, cert.per_constraint)):
        if j.option == "layering":
            if not (c.layered and not dg.mutual(c.head.pred, c.body.pred)):
                return _fail(f"constraint {k} ({c}): layering only justifies decreases into lower classes")
            continue
        for d in j.demands:
            msg = demand_failure(spec, declared, d)
            if msg:
                return _fail(f"constraint {k} ({c}): {msg}")
        missing = [r for r in j.relations if r not in relations]
        if missing:
            return _fail(f"constraint {k} ({c}): relation {missing[0]} is not in the certificate")
        hyps = hypotheses_for(c.conditions, tuple(relations[r] for r in j.relations))[0] if j.relations else ()
        if not greater_under(spec, hyps, c.head, c.body):
            return _fail(f"constraint {k} ({c}): decrease does not hold under the order")

    # 3. rigidity, or output independence
    if cert.mode == "rigid":
        for a in cert.call_set.atoms:
            if not is_rigid(spec, pattern_atom(a)):
                return _fail(f"rigidity: order is not rigid on {a}")
    else:
        for pred, ms in cert.modes:
            probe = Atom(pred, tuple(Var(f"O{i}") if m == "out" else const("g") for i, m in enumerate(ms, 1)))
            if not is_rigid(spec, probe):
                return _fail(f"output independence: order looks at an output of {pred}")

    # 4. interargument relations are valid
    rels = tuple(ob.required for ob in cert.interarg)
    for ob in cert.interarg:
        for d in discharge_obligation(p, ob, rels):
            msg = demand_failure(spec, declared, d)
            if msg:
                return _fail(f"relation {ob.required.key}: {msg}")

    # 5. declared families are ones the order really has
    mono, sub = families(spec, signature)
    if not _contains(mono, declared[0]) or not _contains(sub, declared[1]):
        return _fail("order: declared positions exceed the order's own")
    return VerifyResult(True)


def _contains(big: PositionFamily, small: PositionFamily) -> bool:
    return all(idx <= big.get(s) for s, idx in small.entries)


def _first_diff(a, b) -> str:
    for x, y in zip(a, b):
        if x != y:
            return f"{x!r} vs {y!r}"
    return "lengths differ"
