"""Depth-bounded LD-resolution with descendant tracking, and bottom-up evaluation.

Both serve as oracles: exploration checks that proved programs really
terminate on concrete queries, and bottom-up consequences check that an
interargument relation holds for every atom the program derives.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Optional, Union

from .callset import F, G, NLA, NLG, AbstractAtom
from .orders import enumerate_terms
from .syntax import (
    NIL,
    Atom,
    Compound,
    Program,
    Symbol,
    Var,
    apply_atom,
    apply_subst,
    is_ground,
    match,
    mklist,
    unify_terms,
    variant_eq,
    vars_of,
)


@dataclass(frozen=True)
class Goal:
    atoms: tuple = ()

    @property
    def selected(self) -> Optional[Atom]:
        return self.atoms[0] if self.atoms else None

    def __str__(self):
        return ", ".join(map(str, self.atoms)) if self.atoms else "□"


@dataclass(frozen=True)
class DerivationNode:
    """One goal of a derivation.

    clause_id and mgu describe the step that produced this goal from its
    parent.  origins[k] is the id of the node whose selected atom atom k of
    this goal directly descends from (-1 for atoms of the query).
    """

    node_id: int
    goal: Goal
    depth: int
    parent: int = -1
    clause_id: int = -1
    mgu: tuple = ()
    origins: tuple = ()

    @property
    def selected(self) -> Optional[Atom]:
        return self.goal.selected

    @property
    def selected_origin(self) -> int:
        return self.origins[0] if self.origins else -1

    def dump(self) -> str:
        binds = ", ".join(f"{v}={t}" for v, t in self.mgu)
        sel = self.selected if self.selected is not None else "□"
        return f"{self.depth}\t{sel}\t{self.clause_id}\t{{{binds}}}"


@dataclass(frozen=True)
class FiniteTree:
    answer_count: int
    node_count: int
    max_depth: int


@dataclass(frozen=True)
class DepthLimitHit:
    witness: tuple


@dataclass(frozen=True)
class LoopEvidence:
    """Heuristic: a directed sequence whose first and last atoms are variants."""

    sequence: tuple
    witness: tuple = ()


ExplorationOutcome = Union[FiniteTree, DepthLimitHit, LoopEvidence]


def _as_goal(q) -> Goal:
    if isinstance(q, Goal):
        return q
    if isinstance(q, Atom):
        return Goal((q,))
    return Goal(tuple(q))


class _Ref:
    """Mutable logic variable of the search engine."""

    __slots__ = ("val", "name")

    def __init__(self, name):
        self.val = None
        self.name = name


def _deref(t):
    while type(t) is _Ref:
        if t.val is None:
            return t
        t = t.val
    return t


def _internal(t, env):
    if isinstance(t, Var):
        if t not in env:
            env[t] = _Ref(t.name)
        return env[t]
    return (t.sym,) + tuple(_internal(a, env) for a in t.args)


def _external(t) -> object:
    t = _deref(t)
    if type(t) is _Ref:
        return Var(t.name)
    return Compound(t[0], tuple(_external(a) for a in t[1:]))


def _atom_out(t) -> Atom:
    t = _deref(t)
    return Atom(t[0], tuple(_external(a) for a in t[1:]))


def _compile(t, slots):
    """Clause template: variable slots are ints, ground parts are ("g", term)."""
    if isinstance(t, Var):
        if t not in slots:
            slots[t] = len(slots)
        return slots[t]
    if is_ground(t):
        return ("g", _internal(t, {}))
    return ("c", t.sym) + tuple(_compile(a, slots) for a in t.args)


def _inst(tm, regs, names, k):
    if type(tm) is int:
        r = regs[tm]
        if r is None:
            r = regs[tm] = _Ref(f"{names[tm]}#{k}")
        return r
    if tm[0] == "g":
        return tm[1]
    return (tm[1],) + tuple(_inst(a, regs, names, k) for a in tm[2:])


def _occurs(v, t) -> bool:
    t = _deref(t)
    if t is v:
        return True
    if type(t) is tuple:
        for a in t[1:]:
            if _occurs(v, a):
                return True
    return False


def _bind(v, t, trail) -> bool:
    if _occurs(v, t):
        return False
    v.val = t
    trail.append(v)
    return True


def _unify(a, b, trail) -> bool:
    a, b = _deref(a), _deref(b)
    if a is b:
        return True
    if type(a) is _Ref:
        return _bind(a, b, trail)
    if type(b) is _Ref:
        return _bind(b, a, trail)
    if a[0] != b[0]:
        return False
    for x, y in zip(a[1:], b[1:]):
        if not _unify(x, y, trail):
            return False
    return True


def _unify_head(tm, t, regs, names, k, trail) -> bool:
    if type(tm) is int:
        if regs[tm] is None:
            regs[tm] = t
            return True
        return _unify(regs[tm], t, trail)
    if tm[0] == "g":
        return _unify(tm[1], t, trail)
    t = _deref(t)
    if type(t) is _Ref:
        return _bind(t, _inst(tm, regs, names, k), trail)
    if t[0] != tm[1]:
        return False
    for a, x in zip(tm[2:], t[1:]):
        if not _unify_head(a, x, regs, names, k, trail):
            return False
    return True


class _Engine:
    def __init__(self, p: Program):
        self.by_pred = {}
        for i, c in enumerate(p.clauses):
            slots = {}
            head = _compile(c.head.as_term(), slots)
            body = tuple(_compile(b.as_term(), slots) for b in c.body)
            names = [v.name for v in sorted(slots, key=slots.get)]
            self.by_pred.setdefault(c.head.pred, []).append((i, head, body, names))


def _goal_out(goal) -> Goal:
    atoms = []
    while goal is not None:
        atoms.append(_atom_out(goal[0]))
        goal = goal[2]
    return Goal(tuple(atoms))


def _goal_origins(goal) -> tuple:
    out = []
    while goal is not None:
        out.append(goal[1])
        goal = goal[2]
    return tuple(out)


def _goal_key(goal) -> tuple:
    """Hashable form of a goal, equal exactly for variants."""
    names = {}
    out = []

    def go(t):
        t = _deref(t)
        if type(t) is _Ref:
            if t not in names:
                names[t] = len(names)
            out.append(names[t])
        else:
            out.append(t[0])
            for x in t[1:]:
                go(x)

    while goal is not None:
        go(goal[0])
        out.append(None)
        goal = goal[2]
    return tuple(out)


_NONE = -1  # relative depth marker: no node of that kind in the subtree


def ld_explore(p: Program, q, max_depth: int, trace: Optional[list] = None, share: bool = True) -> ExplorationOutcome:
    """Exhaustive depth-first LD-tree construction, bounded in resolution steps.

    The LD-subtree below a goal depends only on the goal up to renaming, so
    with share=True the statistics of an already explored variant are reused
    instead of walking it again; the tree and the counts are the same.
    trace, if given, receives every node in visiting order with its full goal
    (sharing is then off).
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    share = share and trace is None
    goal0 = _as_goal(q)
    eng = _Engine(p)
    env = {}
    goal = None
    for a in reversed(goal0.atoms):
        goal = (_internal(a.as_term(), env), -1, goal)
    trail = []
    counter = itertools.count()
    fresh = itertools.count()
    memo = {}

    def visit(goal, depth, parent, cid, mgu):
        nid = next(counter)
        if goal is None:
            node = DerivationNode(nid, Goal(), depth, parent, cid, mgu, ())
        elif trace is not None:
            node = DerivationNode(nid, _goal_out(goal), depth, parent, cid, mgu, _goal_origins(goal))
        else:
            node = DerivationNode(nid, Goal((_atom_out(goal[0]),)), depth, parent, cid, mgu, (goal[1],))
        if trace is not None:
            trace.append(node)
        return node

    def frame(goal, depth, node):
        # goal, depth, node, clauses, next clause, trail mark, key, stats
        return [goal, depth, node, None, 0, 0, None, [0, 1, _NONE, 0]]

    def merge(stats, sub):
        # stats: answers, nodes, deepest nonempty goal, deepest node (relative)
        stats[0] += sub[0]
        stats[1] += sub[1]
        if sub[2] != _NONE:
            stats[2] = max(stats[2], sub[2] + 1)
        stats[3] = max(stats[3], sub[3] + 1)

    root = visit(goal, 0, -1, -1, ())
    frames = [frame(goal, 0, root)]
    path = [root]
    total = None
    while frames:
        fr = frames[-1]
        goal, depth, node = fr[0], fr[1], fr[2]
        if fr[3] is None:
            if goal is None:
                frames.pop()
                path.pop()
                sub = (1, 1, _NONE, 0)
                if frames:
                    merge(frames[-1][7], sub)
                else:
                    total = sub
                continue
            if depth >= max_depth:
                witness = tuple(path)
                loop = _loop(witness)
                if loop is not None:
                    return LoopEvidence(loop, witness)
                return DepthLimitHit(witness)
            fr[7][2] = 0
            if share:
                fr[6] = _goal_key(goal)
            fr[3] = eng.by_pred.get(_deref(goal[0])[0], ())
            fr[5] = len(trail)
        clauses = fr[3]
        while len(trail) > fr[5]:
            trail.pop().val = None
        pushed = False
        sel = goal[0]
        while fr[4] < len(clauses):
            cid, head, body, names = clauses[fr[4]]
            fr[4] += 1
            regs = [None] * len(names)
            k = next(fresh)
            if _unify_head(head, sel, regs, names, k, trail):
                rest = goal[2]
                for b in reversed(body):
                    rest = (_inst(b, regs, names, k), node.node_id, rest)
                if share and rest is not None:
                    sub = memo.get(_goal_key(rest))
                    if sub is not None and depth + 1 + sub[2] < max_depth:
                        merge(fr[7], sub)
                        while len(trail) > fr[5]:
                            trail.pop().val = None
                        continue
                mgu = ()
                if trace is not None:
                    mgu = tuple(sorted(((v.name, _external(v.val)) for v in trail[fr[5]:]), key=lambda x: x[0]))
                child = visit(rest, depth + 1, node.node_id, cid, mgu)
                frames.append(frame(rest, depth + 1, child))
                path.append(child)
                pushed = True
                break
            while len(trail) > fr[5]:
                trail.pop().val = None
        if not pushed:
            frames.pop()
            path.pop()
            sub = tuple(fr[7])
            if fr[6] is not None:
                memo[fr[6]] = sub
            if frames:
                merge(frames[-1][7], sub)
            else:
                total = sub
    return FiniteTree(total[0], total[1], total[3])


def directed_subsequences(trace) -> list:
    """Maximal chains of nodes, each selected atom a direct descendant of the previous one."""
    trace = [n for n in trace if n.selected is not None]
    ids = {n.node_id for n in trace}
    children = {}
    for n in trace:
        o = n.selected_origin
        if o in ids:
            children.setdefault(o, []).append(n)
    out = []

    def walk(n, acc):
        acc = acc + [n]
        kids = children.get(n.node_id, [])
        if not kids:
            out.append(acc)
        for k in kids:
            walk(k, acc)

    for n in trace:
        if n.selected_origin not in ids:
            walk(n, [])
    return out


def _loop(path) -> Optional[tuple]:
    for seq in directed_subsequences(path):
        atoms = [n.selected for n in seq]
        for i in range(len(atoms)):
            for j in range(len(atoms) - 1, i, -1):
                if variant_eq(atoms[i], atoms[j]):
                    return tuple(atoms[i:j + 1])
    return None


def dump_trace(trace) -> str:
    return "\n".join(n.dump() for n in trace)


# ------------------------------------------------------------ bottom-up


def herbrand_universe(p: Program, bound: int, extra=()) -> list:
    """Ground terms of size at most bound over the program's function symbols plus one fresh constant."""
    sig = [s for s in p.functors()] + [Symbol("fresh", 0)] + list(extra)
    return enumerate_terms(sig, bound)


class _Sample:
    """A finite set of ground terms, indexed by top symbol for matching."""

    def __init__(self, terms):
        self.terms = list(terms)
        self.members = set(self.terms)
        self.by_sym = {}
        for t in self.terms:
            self.by_sym.setdefault(t.sym, []).append(t)

    def candidates(self, pattern):
        if isinstance(pattern, Var):
            return self.terms
        return self.by_sym.get(pattern.sym, ())


def _ground_instances(a: Atom, sample: _Sample, b: dict):
    """Ground instances of a under b whose arguments all lie in the sample."""

    def go(i, b):
        if i == len(a.args):
            yield apply_atom(a, b)
            return
        arg = apply_subst(a.args[i], b)
        if not vars_of(arg):
            if arg in sample.members:
                yield from go(i + 1, b)
            return
        for t in sample.candidates(arg):
            m = match(arg, t)
            if m is not None:
                yield from go(i + 1, {**b, **m})

    yield from go(0, b)


def _index(facts) -> dict:
    out = {}
    for f in facts:
        out.setdefault(f.pred, []).append(f)
    return out


def _solve_body(body, indexes, b):
    """Solutions of a body, atom k looked up in indexes[k]."""
    if not body:
        yield b
        return
    first = apply_atom(body[0], b)
    for fact in indexes[0].get(first.pred, ()):
        m = match(first.as_term(), fact.as_term())
        if m is None:
            continue
        yield from _solve_body(body[1:], indexes[1:], {**b, **m})


def _consequences(p: Program, full: dict, delta: Optional[dict], sample: _Sample) -> set:
    """Heads derivable in one step; with delta, only through at least one delta fact."""
    out = set()
    for c in p.clauses:
        n = len(c.body)
        if delta is None:
            choices = [[full] * n]
        elif n == 0:
            continue
        else:
            choices = [[full] * k + [delta] + [full] * (n - k - 1) for k in range(n)]
        for idx in choices:
            for b in _solve_body(c.body, idx, {}):
                out.update(_ground_instances(c.head, sample, b))
    return out


def least_model(p: Program, bound: int = 4, universe=None) -> set:
    """T_P fixpoint restricted to atoms whose arguments lie in the sample (semi-naive)."""
    sample = _Sample(universe if universe is not None else herbrand_universe(p, bound))
    model = _consequences(p, {}, None, sample)
    delta = set(model)
    while delta:
        new = _consequences(p, _index(model), _index(delta), sample) - model
        model |= new
        delta = new
    return model


def ground_consequences(p: Program, pred: Symbol, bound: int = 4, universe=None) -> set:
    return {a for a in least_model(p, bound, universe) if a.pred == pred}


def tp_step(p: Program, model: set, bound: int = 4, universe=None) -> set:
    """One application of T_P to a set of ground atoms, within the sample."""
    sample = _Sample(universe if universe is not None else herbrand_universe(p, bound))
    return _consequences(p, _index(model), None, sample)


# ------------------------------------------------------------- sampling


def _constants(p: Program) -> list:
    cs = [s for s in p.functors() if s.arity == 0 and s != NIL]
    return cs or [Symbol("a", 0), Symbol("b", 0)]


def concretize(aa: AbstractAtom, p: Program, rng: random.Random, max_size: int = 6, pool=None) -> Atom:
    """A random concrete call described by an abstract atom."""
    consts = [Compound(s) for s in _constants(p)]
    pool = pool if pool is not None else herbrand_universe(p, max_size)
    args = []
    for i, a in enumerate(aa.args, 1):
        if a == F:
            args.append(Var(f"Q{i}"))
        elif a == G:
            args.append(rng.choice(pool))
        elif a in (NLG, NLA):
            n = rng.randint(0, max_size)
            items = []
            for k in range(n):
                if a == NLA and rng.random() < 0.5:
                    items.append(Var(f"E{i}_{k}"))
                else:
                    items.append(rng.choice(consts))
            args.append(mklist(items))
        else:
            args.append(Var(f"Q{i}") if rng.random() < 0.5 else rng.choice(pool))
    return Atom(aa.pred, tuple(args))


def sample_queries(p: Program, patterns, n: int = 20, max_size: int = 6, seed: int = 0) -> list:
    """Concrete queries for the patterns that unify with some clause head."""
    rng = random.Random(seed)
    pool = herbrand_universe(p, max_size)
    heads = {}
    for c in p.clauses:
        heads.setdefault(c.head.pred, []).append(c.head)
    out = []
    patterns = list(patterns)
    attempts = 0
    while len(out) < n and attempts < 200 * n:
        attempts += 1
        aa = patterns[attempts % len(patterns)]
        q = concretize(aa, p, rng, max_size, pool)
        if any(unify_terms(zip(q.args, _apart(h).args)) is not None for h in heads.get(q.pred, ())):
            out.append(q)
    return out


def _apart(a: Atom) -> Atom:
    return apply_atom(a, {v: Var(v.name + "'h") for v in vars_of(a)})
