"""Decrease constraints of rigid and well-moded term-acceptability, and their reduction.

A constraint says that a clause head must be larger than one of its body
atoms, once the atoms to the left have been solved.  Reduction turns it
into demands on the order (subterm and monotonicity at given positions),
or into an obligation on an interargument relation of the atoms to the
left.  Obligations are discharged by asking that the relation be closed
under one application of the immediate-consequence operator.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Optional

from .callset import CallSet, RigidityRequirement, decompose
from .demands import (
    ConditionalDecrease,
    GroundDecrease,
    Gt,
    InterargRelation,
    MonotoneAt,
    Proof,
    Sat,
    SubtermAt,
    placeholder,
)
from .orders import PositionFamily
from .syntax import (
    WILDCARD,
    Atom,
    Clause,
    Compound,
    Program,
    Symbol,
    Var,
    apply_atom,
    dependency_graph,
    match,
    rename_apart,
    resolve,
    term_str,
    unify_terms,
    vars_of,
)

MAX_CHAIN = 8


class UnreachableClause(UserWarning):
    pass


class NotWellModed(ValueError):
    pass


@dataclass(frozen=True)
class DecreaseConstraint:
    clause_id: int
    body_index: int
    head: Atom
    body: Atom
    conditions: tuple = ()
    strict: bool = True
    layered: bool = False

    def decrease(self) -> Gt:
        return Gt(self.head, self.body)

    def __str__(self):
        rel = f"{self.head} > {self.body}"
        if self.layered:
            rel += "  [layering]"
        if not self.conditions:
            return rel
        cond = ", ".join(f"{a} sat R_{a.pred.name}" for a in self.conditions)
        return f"{cond} implies {rel}"

    def to_json(self):
        return {
            "clause": self.clause_id,
            "bodyIndex": self.body_index,
            "head": str(self.head),
            "body": str(self.body),
            "conditions": [str(a) for a in self.conditions],
            "layered": self.layered,
        }


@dataclass(frozen=True)
class InterargObligation:
    """The relation must be valid; pattern is the conjunction it ranges over, if any."""

    required: InterargRelation
    pattern: tuple = ()

    @property
    def preds(self):
        return self.required.preds

    def __str__(self):
        return f"{self.required}"


@dataclass(frozen=True)
class ReductionOutcome:
    """option is "1", "2", "order", "layering" or "unreducible"."""

    option: str
    demands: tuple = ()
    obligations: tuple = ()
    proof: Optional[Proof] = None

    @property
    def relations(self) -> tuple:
        return tuple(ob.required for ob in self.obligations)

    @property
    def reducible(self) -> bool:
        return self.option != "unreducible"


# ---------------------------------------------------------------- helpers


def wildcard(a: Atom, ignored: PositionFamily) -> Atom:
    """Replace ignored predicate argument positions by the wildcard t."""
    idx = ignored.get(a.pred)
    if not idx:
        return a
    return Atom(a.pred, tuple(WILDCARD if i in idx else x for i, x in enumerate(a.args, 1)))


def _erase(t, ignored: PositionFamily):
    if isinstance(t, Atom):
        t = t.as_term()
    if isinstance(t, Var):
        return t
    ign = ignored.get(t.sym)
    return (t.sym, tuple(_erase(a, ignored) for i, a in enumerate(t.args, 1) if i not in ign))


def _as_term(t):
    return t.as_term() if isinstance(t, Atom) else t


class Deriver:
    """Derives s > t from subterm and monotonicity at non-ignored positions,
    transitivity, and assumed decreases.  Records the demanded positions."""

    def __init__(self, ignored: PositionFamily, hyps=(), chain: int = MAX_CHAIN):
        self.ignored = ignored
        self.hyps = [(_as_term(u), _as_term(v)) for u, v in hyps]
        self.chain = chain
        self.memo = {}

    def eq(self, s, t) -> bool:
        return _erase(s, self.ignored) == _erase(t, self.ignored)

    def derive(self, s, t, depth=None) -> Optional[Proof]:
        s, t = _as_term(s), _as_term(t)
        if depth is None:
            depth = self.chain
        key = (s, t, depth)
        if key not in self.memo:
            self.memo[key] = None
            self.memo[key] = self._derive(s, t, depth)
        return self.memo[key]

    def _derive(self, s, t, depth) -> Optional[Proof]:
        goal = f"{term_str(s)} > {term_str(t)}"
        if self.eq(s, t):
            return None
        for u, v in self.hyps:
            if self.eq(s, u) and self.eq(v, t):
                return Proof("hypothesis", goal)
        if isinstance(s, Compound):
            ign = self.ignored.get(s.sym)
            kept = [i for i in range(1, len(s.args) + 1) if i not in ign]
            for i in kept:
                if self.eq(s.args[i - 1], t):
                    return Proof("subterm", goal, (SubtermAt(s.sym, i),))
            if isinstance(t, Compound) and t.sym == s.sym:
                diff = [i for i in kept if not self.eq(s.args[i - 1], t.args[i - 1])]
                subs = [self.derive(s.args[i - 1], t.args[i - 1], depth) for i in diff]
                if diff and all(subs):
                    return Proof("monotonicity", goal, tuple(MonotoneAt(s.sym, i) for i in diff), tuple(subs))
            for i in kept:
                sub = self.derive(s.args[i - 1], t, depth)
                if sub:
                    return Proof("subterm+transitivity", goal, (SubtermAt(s.sym, i),), (sub,))
        if depth > 0:
            for u, v in self.hyps:
                left = None if self.eq(s, u) else self.derive(s, u, depth - 1)
                if not (self.eq(s, u) or left):
                    continue
                right = None if self.eq(v, t) else self.derive(v, t, depth - 1)
                if not (self.eq(v, t) or right):
                    continue
                kids = tuple(x for x in (left, right) if x)
                return Proof("transitivity", goal, (), (Proof("hypothesis", f"{term_str(u)} > {term_str(v)}"),) + kids)
        return None


def hypotheses_for(atoms, relations) -> tuple:
    """Assumed decreases (and plain membership premises) for the given atoms."""
    hyps, prem = [], []
    by_key = {r.preds: r for r in relations}
    atoms = list(atoms)
    used = set()
    # relations over conjunctions match consecutive atoms
    for r in relations:
        if len(r.preds) < 2:
            continue
        n = len(r.preds)
        for k in range(len(atoms) - n + 1):
            window = atoms[k:k + n]
            if tuple(a.pred for a in window) == r.preds:
                for g in r.instantiate(window):
                    hyps.append((g.lhs, g.rhs))
                    prem.append(g)
                used.update(range(k, k + n))
    for k, a in enumerate(atoms):
        r = by_key.get((a.pred,))
        if r is not None:
            for g in r.instantiate(a):
                hyps.append((g.lhs, g.rhs))
                prem.append(g)
        elif k not in used:
            prem.append(Sat(a))
    return tuple(hyps), tuple(prem)


# ------------------------------------------------------------- generation


def _reachable(clause: Clause, cs: CallSet) -> bool:
    aa = cs.get(clause.head.pred)
    if aa is None:
        return False
    out = []
    return all(decompose(t, a, out) for t, a in zip(clause.head.args, aa.args))


def generate_constraints(p: Program, cs: CallSet, rr: RigidityRequirement) -> list:
    """One decrease per clause and mutually recursive body atom of a reachable clause."""
    dg = dependency_graph(p)
    out = []
    for ci, clause in enumerate(p.clauses):
        if not _reachable(clause, cs):
            warnings.warn(f"clause {ci} ({clause}) matches no abstract call", UnreachableClause)
            continue
        for i, b in enumerate(clause.body):
            if not dg.mutual(clause.head.pred, b.pred):
                continue
            out.append(DecreaseConstraint(
                ci, i,
                wildcard(clause.head, rr.ignored_pred),
                wildcard(b, rr.ignored_pred),
                tuple(clause.body[:i]),
            ))
    return out


def output_requirement(modes: dict) -> RigidityRequirement:
    """Output positions are ignored by an output-independent order."""
    return RigidityRequirement(
        PositionFamily.of({p: {i for i, m in enumerate(ms, 1) if m == "out"} for p, ms in modes.items()})
    )


def _mode_vars(atom: Atom, modes, which) -> set:
    ms = modes[atom.pred]
    return set(vars_of([t for t, m in zip(atom.args, ms) if m == which]))


def wellmoded_check(p: Program, modes: dict) -> bool:
    """Standard well-modedness of every clause under left-to-right dataflow."""
    missing = [q for q in p.predicates() if q not in modes]
    if missing:
        raise ValueError(f"no mode for {missing[0]}")
    for c in p.clauses:
        known = _mode_vars(c.head, modes, "in")
        for b in c.body:
            if not _mode_vars(b, modes, "in") <= known:
                return False
            known |= _mode_vars(b, modes, "out")
        if not _mode_vars(c.head, modes, "out") <= known:
            return False
    return True


def generate_wellmoded_constraints(p: Program, modes: dict) -> list:
    """A decrease for every body atom, outputs wildcarded.

    Decreases into a lower class of the dependency graph are marked as
    layered: they hold in any order that puts such classes below.
    """
    if not wellmoded_check(p, modes):
        raise NotWellModed("program is not well-moded for the given modes")
    dg = dependency_graph(p)
    rr = output_requirement(modes)
    out = []
    for ci, clause in enumerate(p.clauses):
        for i, b in enumerate(clause.body):
            out.append(DecreaseConstraint(
                ci, i,
                wildcard(clause.head, rr.ignored_pred),
                wildcard(b, rr.ignored_pred),
                tuple(clause.body[:i]),
                layered=not dg.mutual(clause.head.pred, b.pred),
            ))
    return out


# --------------------------------------------------------------- reduction


def _single_templates(atoms):
    """Candidate relations t_i > t_j for each predicate among the atoms."""
    preds = list(dict.fromkeys(a.pred for a in atoms))
    for q in preds:
        for i, j in itertools.permutations(range(1, q.arity + 1), 2):
            yield (InterargRelation.gt(q, i, j),)
    for q1, q2 in itertools.combinations(preds, 2):
        for i1, j1 in itertools.permutations(range(1, q1.arity + 1), 2):
            for i2, j2 in itertools.permutations(range(1, q2.arity + 1), 2):
                yield (InterargRelation.gt(q1, i1, j1), InterargRelation.gt(q2, i2, j2))


def _conjunction_templates(atoms):
    """Relations between arguments of different atoms of the whole conjunction."""
    preds = tuple(a.pred for a in atoms)
    offsets = list(itertools.accumulate([0] + [a.pred.arity for a in atoms]))
    for k, l in itertools.permutations(range(len(atoms)), 2):
        for i in range(1, atoms[k].pred.arity + 1):
            for j in range(1, atoms[l].pred.arity + 1):
                yield InterargRelation.gt(preds, offsets[k] + i, offsets[l] + j)


def reduction_candidates(c: DecreaseConstraint, rr: Optional[RigidityRequirement] = None, conjunctions: bool = False):
    """All reductions of a constraint, most preferred first.

    conjunctions: also try relations over the whole prefix conjunction,
    discharged through one-step unfolding (used in well-moded mode).
    """
    ignored = (rr.all_ignored() if rr else PositionFamily())
    if c.layered:
        yield ReductionOutcome("layering")
        return
    d = Deriver(ignored)
    if d.eq(c.head, c.body):
        yield ReductionOutcome("unreducible")
        return
    proof = d.derive(c.head, c.body)
    if proof:
        yield ReductionOutcome("1", tuple(proof.all_demands()), proof=proof)
        return
    conds = list(c.conditions)
    if conds:
        for rels in _single_templates(conds):
            hyps, _ = hypotheses_for(conds, rels)
            proof = Deriver(ignored, hyps).derive(c.head, c.body)
            if proof:
                obs = tuple(InterargObligation(r) for r in rels)
                yield ReductionOutcome("2", tuple(proof.all_demands()), obs, proof)
        if conjunctions and len(conds) >= 2:
            pattern = tuple(conds)
            for rel in _conjunction_templates(conds):
                hyps, _ = hypotheses_for(conds, (rel,))
                proof = Deriver(ignored, hyps).derive(c.head, c.body)
                if proof:
                    obs = (InterargObligation(rel, pattern),)
                    yield ReductionOutcome("2", tuple(proof.all_demands()), obs, proof)
    # left to a specific order
    yield ReductionOutcome("order")


def reduce_constraint(c: DecreaseConstraint, rr: Optional[RigidityRequirement] = None, conjunctions: bool = False) -> ReductionOutcome:
    """Option 1 if subterm/monotonicity demands suffice, else Option 2 on the atoms to the left."""
    return next(iter(reduction_candidates(c, rr, conjunctions)))


# --------------------------------------------------------------- discharge


@dataclass(frozen=True)
class GeneralizedClause:
    heads: tuple
    body: tuple

    def __str__(self):
        h = ", ".join(map(str, self.heads))
        if not self.body:
            return h + "."
        return f"{h} <- {', '.join(map(str, self.body))}."


def _to_placeholders(atoms_groups):
    """Rename variables to t1, t2, ... by first occurrence across the groups."""
    flat = [a for g in atoms_groups for a in g]
    mapping = {v: placeholder(i) for i, v in enumerate(vars_of(flat), 1)}
    return [tuple(apply_atom(a, mapping) for a in g) for g in atoms_groups]


def unfold_conjunction(p: Program, atoms) -> list:
    """One unfolding step on every atom of the conjunction, over all clause combinations."""
    atoms = tuple(atoms)
    per_atom = [p.clauses_for(a.pred) for a in atoms]
    out = []
    for combo in itertools.product(*per_atom):
        b = {}
        bodies = []
        ok = True
        for k, (a, (ci, cl)) in enumerate(zip(atoms, combo)):
            r = rename_apart(cl, suffix=f"u{k}")
            res = unify_terms(zip(a.args, r.head.args), b)
            if res is None:
                ok = False
                break
            b = res
            bodies.extend(r.body)
        if not ok:
            continue
        sub = resolve(b)
        heads = tuple(apply_atom(a, sub) for a in atoms)
        body = tuple(apply_atom(x, sub) for x in bodies)
        h, bd = _to_placeholders([heads, body])
        out.append(GeneralizedClause(h, bd))
    return out


def _conjunction_instance(pattern, body) -> bool:
    if len(pattern) != len(body) or any(p.pred != b.pred for p, b in zip(pattern, body)):
        return False
    return match(
        Compound(Symbol("$c", len(pattern)), tuple(a.as_term() for a in pattern)),
        Compound(Symbol("$c", len(body)), tuple(a.as_term() for a in body)),
    ) is not None


def discharge_obligation(p: Program, ob: InterargObligation, relations=()) -> list:
    """Demands making the required relation a model: T_P(M) contained in M.

    relations: other relations already assumed valid, used as premises for
    body atoms of other predicates.
    """
    rel = ob.required
    others = tuple(r for r in relations if r.preds != rel.preds)
    demands = []
    if len(rel.preds) == 1:
        q = rel.preds[0]
        for _, cl in p.clauses_for(q):
            body, (head,) = _to_placeholders([cl.body, (cl.head,)])
            demands.extend(_implications(rel, others, body, (head,), None))
        return _dedupe(demands)
    for gc in unfold_conjunction(p, ob.pattern):
        demands.extend(_implications(rel, others, gc.body, gc.heads, ob.pattern))
    return _dedupe(demands)


def _implications(rel, others, body, heads, pattern) -> list:
    prem = []
    if pattern is not None and _conjunction_instance(pattern, body):
        prem.extend(rel.instantiate(body))
    else:
        _, pr = hypotheses_for(body, (rel,) + others if pattern is None else others)
        prem.extend(pr)
    out = []
    for g in rel.conclusions(heads):
        if prem:
            out.append(ConditionalDecrease(tuple(prem), g))
        else:
            out.append(GroundDecrease(g.lhs, g.rhs))
    return out


def _dedupe(xs):
    return list(dict.fromkeys(xs))
