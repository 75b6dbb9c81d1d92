"""Abstract call patterns under left-to-right selection.

A small mode/shape domain describes each argument of a call.  The analysis
computes one joined abstract atom per predicate, an over-approximation of
the atoms selected in LD-derivations from the query patterns, and from that
the argument positions a rigid order has to ignore.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .orders import PositionFamily
from .syntax import (
    CONS,
    NIL,
    Atom,
    Compound,
    Program,
    QueryPattern,
    Symbol,
    Var,
    UnknownPredicate,
    const,
    mklist,
)

WIDEN_AFTER = 3


class AbstractTerm(enum.Enum):
    GROUND = "Ground"
    FREE = "Free"
    NILLIST_GROUND = "NilListGround"
    NILLIST_ANY = "NilListAny"
    ANY = "Any"

    def __str__(self):
        return self.value


G, F, NLG, NLA, ANY = (
    AbstractTerm.GROUND,
    AbstractTerm.FREE,
    AbstractTerm.NILLIST_GROUND,
    AbstractTerm.NILLIST_ANY,
    AbstractTerm.ANY,
)

DIRECTIVE_WORDS = {"ground": G, "free": F, "nillist": NLA, "nillist_ground": NLG, "any": ANY}


def leq(a: AbstractTerm, b: AbstractTerm) -> bool:
    if a == b or b == ANY:
        return True
    return a == NLG and b in (NLA, G)


def join(a, b):
    if a is None:
        return b
    if b is None:
        return a
    if leq(a, b):
        return b
    if leq(b, a):
        return a
    return ANY


def meet(a: AbstractTerm, b: AbstractTerm) -> AbstractTerm:
    """Description of a term known to satisfy both a and b once instantiated.

    Free stands for "still unbound", so any other information refines it.
    """
    if a == b:
        return a
    if a == F:
        return b
    if b == F:
        return a
    if a == ANY:
        return b
    if b == ANY:
        return a
    # remaining pairs mix Ground, NilListGround and NilListAny
    return NLG


def _groundish(a) -> bool:
    return a in (G, NLG)


@dataclass(frozen=True)
class AbstractAtom:
    pred: Symbol
    args: tuple

    def __str__(self):
        return f"{self.pred.name}({', '.join(map(str, self.args))})"

    @staticmethod
    def from_directive(q: QueryPattern) -> "AbstractAtom":
        return AbstractAtom(q.pred, tuple(DIRECTIVE_WORDS[w] for w in q.modes))

    def to_json(self):
        return {"pred": str(self.pred), "args": [a.value for a in self.args]}

    @staticmethod
    def from_json(d):
        return AbstractAtom(Symbol.parse(d["pred"]), tuple(AbstractTerm(a) for a in d["args"]))


@dataclass(frozen=True)
class CallSet:
    atoms: tuple = ()
    successes: tuple = ()

    def get(self, pred: Symbol):
        for a in self.atoms:
            if a.pred == pred:
                return a
        return None

    def success(self, pred: Symbol):
        for a in self.successes:
            if a.pred == pred:
                return a
        return None

    def predicates(self):
        return [a.pred for a in self.atoms]

    def __iter__(self):
        return iter(self.atoms)

    def __len__(self):
        return len(self.atoms)

    def __str__(self):
        return "{" + ", ".join(map(str, self.atoms)) + "}"

    def to_json(self):
        return [a.to_json() for a in self.atoms]

    @staticmethod
    def from_json(items):
        return CallSet(tuple(AbstractAtom.from_json(d) for d in items))


@dataclass(frozen=True)
class RigidityRequirement:
    ignored_pred: PositionFamily = PositionFamily()
    ignored_fun: PositionFamily = PositionFamily()

    def all_ignored(self) -> PositionFamily:
        return self.ignored_pred.union(self.ignored_fun)

    def to_json(self):
        return {"ignoredPred": self.ignored_pred.to_json(), "ignoredFun": self.ignored_fun.to_json()}

    @staticmethod
    def from_json(d):
        return RigidityRequirement(PositionFamily.from_json(d["ignoredPred"]), PositionFamily.from_json(d["ignoredFun"]))

    def __str__(self):
        return f"ignore predicates {self.ignored_pred}, functors {self.ignored_fun}"


# ------------------------------------------------------- abstract operations


def decompose(t, a: AbstractTerm, out: list) -> bool:
    """Abstractly unify term t with a value described by a.

    Appends (variable, description) constraints to out; False when the
    unification must fail.
    """
    if isinstance(t, Var):
        out.append((t, a))
        return True
    if a in (F, ANY, G):
        # free: the caller's variable gets bound to t, whose variables stay as they are
        for v in _vars(t):
            out.append((v, a))
        return True
    # nil-terminated lists
    if t.sym == NIL:
        return True
    if t.sym == CONS:
        elem = G if a == NLG else ANY
        return decompose(t.args[0], elem, out) and decompose(t.args[1], a, out)
    return False


def _vars(t):
    if isinstance(t, Var):
        yield t
    else:
        for x in t.args:
            yield from _vars(x)


def alpha(t, env: dict) -> AbstractTerm:
    """Description of term t given descriptions of its variables."""
    if isinstance(t, Var):
        return env.get(t, F)
    if t.sym == NIL:
        return NLG
    if t.sym == CONS:
        h, tl = alpha(t.args[0], env), alpha(t.args[1], env)
        if tl in (NLG, NLA):
            return NLG if _groundish(h) and tl == NLG else NLA
        return G if _groundish(h) and _groundish(tl) else ANY
    return G if all(_groundish(alpha(x, env)) for x in t.args) else ANY


def _bind(env: dict, constraints) -> None:
    for v, a in constraints:
        env[v] = meet(env[v], a) if v in env else a


class _Fixpoint:
    """Chaotic iteration over call variants.

    Success patterns are kept per (predicate, call pattern) so that a
    predicate used in several modes does not blur its outputs; the reported
    call set joins the variants into one abstract atom per predicate.
    """

    def __init__(self, program: Program):
        self.p = program
        self.variants = {}
        self.succ = {}
        self.joins = {}

    def add_call(self, pred, vals) -> bool:
        vs = self.variants.setdefault(pred, [])
        vals = tuple(vals)
        if vals in vs:
            return False
        vs.append(vals)
        return True

    def add_success(self, key, vals) -> bool:
        old = self.succ.get(key)
        if old is None:
            self.succ[key] = tuple(vals)
            return True
        new = []
        for i, (o, v) in enumerate(zip(old, vals)):
            j = join(o, v)
            if j != o:
                self.joins[(key, i)] = self.joins.get((key, i), 0) + 1
                if self.joins[(key, i)] >= WIDEN_AFTER:
                    j = ANY
            new.append(j)
        new = tuple(new)
        if new != old:
            self.succ[key] = new
            return True
        return False

    def clause_pass(self, clause, call) -> bool:
        changed = False
        out = []
        for t, a in zip(clause.head.args, call):
            if not decompose(t, a, out):
                return False
        env = {}
        _bind(env, out)
        for b in clause.body:
            cv = tuple(alpha(t, env) for t in b.args)
            changed |= self.add_call(b.pred, cv)
            s = self.succ.get((b.pred, cv))
            if s is None:
                return changed
            cons = []
            if not all(decompose(t, meet(c, sv), cons) for t, c, sv in zip(b.args, cv, s)):
                return changed
            _bind(env, cons)
        hv = tuple(alpha(t, env) for t in clause.head.args)
        changed |= self.add_success((clause.head.pred, tuple(call)), hv)
        return changed

    def step(self) -> bool:
        changed = False
        for pred in list(self.variants):
            for call in list(self.variants[pred]):
                for _, c in self.p.clauses_for(pred):
                    changed |= self.clause_pass(c, call)
        return changed

    def run(self, limit=10_000):
        for _ in range(limit):
            if not self.step():
                return
        raise RuntimeError("abstract fixpoint did not stabilise")

    def result(self) -> CallSet:
        order = {p: i for i, p in enumerate(self.p.predicates())}
        key = lambda pred: (order.get(pred, len(order)), pred)
        atoms, succs = [], []
        for pred in sorted(self.variants, key=key):
            joined, sj = None, None
            for call in self.variants[pred]:
                joined = call if joined is None else tuple(join(a, b) for a, b in zip(joined, call))
                s = self.succ.get((pred, call))
                if s is not None:
                    sj = s if sj is None else tuple(join(a, b) for a, b in zip(sj, s))
            atoms.append(AbstractAtom(pred, joined))
            if sj is not None:
                succs.append(AbstractAtom(pred, sj))
        return CallSet(tuple(atoms), tuple(succs))


def query_patterns(p: Program) -> list:
    return [AbstractAtom.from_directive(q) for q in p.directives]


def infer_call_set(p: Program, patterns=None) -> CallSet:
    """Least fixpoint of abstract left-to-right traversal from the patterns."""
    if patterns is None:
        patterns = query_patterns(p)
    patterns = list(patterns)
    if not patterns:
        raise ValueError("no query patterns: add a '%% query:' directive")
    defined = p.defined()
    for pat in patterns:
        if pat.pred not in defined:
            raise UnknownPredicate(f"query pattern for undefined predicate {pat.pred}")
    fx = _Fixpoint(p)
    for pat in patterns:
        fx.add_call(pat.pred, pat.args)
    fx.run()
    return fx.result()


def _solved(p: Program, patterns) -> _Fixpoint:
    fx = _Fixpoint(p)
    for pat in patterns if patterns is not None else query_patterns(p):
        fx.add_call(pat.pred, pat.args)
    fx.run()
    return fx


def call_variants(p: Program, patterns=None) -> dict:
    """Every distinct abstract call met during the analysis, per predicate."""
    return {pred: list(v) for pred, v in _solved(p, patterns).variants.items()}


def is_stable(p: Program, patterns=None) -> bool:
    """One more abstract pass after the fixpoint changes nothing."""
    fx = _solved(p, patterns)
    before = fx.result()
    return not fx.step() and fx.result() == before


def rigidity_requirements(cs: CallSet, p: Program = None) -> RigidityRequirement:
    """Positions that may hold variables must be ignored by a rigid order."""
    pred = {}
    lists_with_open_elements = False
    for a in cs.atoms:
        idx = {i for i, v in enumerate(a.args, 1) if v in (F, ANY)}
        if idx:
            pred[a.pred] = idx
        if NLA in a.args:
            lists_with_open_elements = True
    fun = {CONS: {1}} if lists_with_open_elements else {}
    return RigidityRequirement(PositionFamily.of(pred), PositionFamily.of(fun))


# ------------------------------------------------------------ concretization


def describes(a: AbstractTerm, t) -> bool:
    if a == ANY:
        return True
    if a == F:
        return isinstance(t, Var)
    if a == G:
        return not any(True for _ in _vars(t))
    # nil-terminated lists
    while isinstance(t, Compound) and t.sym == CONS:
        if a == NLG and any(True for _ in _vars(t.args[0])):
            return False
        t = t.args[1]
    return isinstance(t, Compound) and t.sym == NIL


def describes_atom(aa: AbstractAtom, atom: Atom) -> bool:
    return aa.pred == atom.pred and all(describes(a, t) for a, t in zip(aa.args, atom.args))


def call_set_covers(cs: CallSet, atom: Atom) -> bool:
    aa = cs.get(atom.pred)
    return aa is not None and describes_atom(aa, atom)


def pattern_atom(aa: AbstractAtom) -> Atom:
    """Representative atom: variables wherever the description allows them."""
    args = []
    for i, a in enumerate(aa.args, 1):
        if a in (F, ANY):
            args.append(Var(f"V{i}"))
        elif a == NLA:
            args.append(mklist([Var(f"E{i}a"), Var(f"E{i}b")]))
        elif a == NLG:
            args.append(mklist([const("g"), const("g")]))
        else:
            args.append(const("g"))
    return Atom(aa.pred, tuple(args))
