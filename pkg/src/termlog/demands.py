"""Order demands, interargument relations and derivation trees.

These are the values passed between constraint reduction and the solver,
and the pieces a proof certificate is made of.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .syntax import Atom, Compound, Symbol, Var, apply_subst, parse_atom, parse_term, term_str


def _t(x):
    return x.as_term() if isinstance(x, Atom) else x


_PLACEHOLDER = re.compile(r"^t[0-9]+$")


def _placeholders_back(t):
    if isinstance(t, Var):
        return t
    if not t.args and _PLACEHOLDER.match(t.sym.name):
        return Var(t.sym.name)
    return Compound(t.sym, tuple(_placeholders_back(a) for a in t.args))


def parse_over_placeholders(text: str):
    """Parse a printed term in which t1, t2, ... denote placeholders."""
    return _placeholders_back(parse_term(text))


@dataclass(frozen=True)
class Gt:
    """lhs > rhs."""

    lhs: object
    rhs: object

    def __str__(self):
        return f"{term_str(_t(self.lhs))} > {term_str(_t(self.rhs))}"

    def to_json(self):
        return {"gt": [term_str(_t(self.lhs)), term_str(_t(self.rhs))]}


@dataclass(frozen=True)
class Sat:
    """The atom satisfies the (otherwise unconstrained) interargument relation of its predicate."""

    atom: Atom

    def __str__(self):
        return f"{self.atom} sat R_{self.atom.pred.name}"

    def to_json(self):
        return {"sat": str(self.atom)}


@dataclass(frozen=True)
class SubtermAt:
    sym: Symbol
    pos: int

    def __str__(self):
        return f"subterm {self.sym}@{self.pos}"

    def to_json(self):
        return {"subterm": [str(self.sym), self.pos]}


@dataclass(frozen=True)
class MonotoneAt:
    sym: Symbol
    pos: int

    def __str__(self):
        return f"monotone {self.sym}@{self.pos}"

    def to_json(self):
        return {"monotone": [str(self.sym), self.pos]}


@dataclass(frozen=True)
class GroundDecrease:
    """Unconditional decrease between terms over placeholders."""

    lhs: object
    rhs: object

    @property
    def conclusion(self):
        return Gt(self.lhs, self.rhs)

    premises = ()

    def __str__(self):
        return str(self.conclusion)

    def to_json(self):
        return {"decrease": self.conclusion.to_json()["gt"]}


@dataclass(frozen=True)
class ConditionalDecrease:
    premises: tuple
    conclusion: Gt

    def __str__(self):
        if not self.premises:
            return str(self.conclusion)
        return " & ".join(map(str, self.premises)) + " implies " + str(self.conclusion)

    def to_json(self):
        return {"implies": [[p.to_json() for p in self.premises], self.conclusion.to_json()]}


@dataclass(frozen=True)
class Equality:
    lhs: object
    rhs: object

    def __str__(self):
        return f"{term_str(_t(self.lhs))} =_> {term_str(_t(self.rhs))}"

    def to_json(self):
        return {"equal": [term_str(_t(self.lhs)), term_str(_t(self.rhs))]}


Demand = Union[SubtermAt, MonotoneAt, GroundDecrease, ConditionalDecrease, Equality]
PropertyDemand = Union[SubtermAt, MonotoneAt]


def premise_from_json(d):
    if "gt" in d:
        a, b = d["gt"]
        return Gt(parse_over_placeholders(a), parse_over_placeholders(b))
    return Sat(parse_atom(d["sat"]))


def demand_from_json(d) -> Demand:
    if "subterm" in d:
        s, i = d["subterm"]
        return SubtermAt(Symbol.parse(s), i)
    if "monotone" in d:
        s, i = d["monotone"]
        return MonotoneAt(Symbol.parse(s), i)
    if "decrease" in d:
        a, b = d["decrease"]
        return GroundDecrease(parse_over_placeholders(a), parse_over_placeholders(b))
    if "implies" in d:
        prem, concl = d["implies"]
        a, b = concl["gt"]
        return ConditionalDecrease(tuple(premise_from_json(x) for x in prem), Gt(parse_over_placeholders(a), parse_over_placeholders(b)))
    if "equal" in d:
        a, b = d["equal"]
        return Equality(parse_over_placeholders(a), parse_over_placeholders(b))
    raise ValueError(f"unknown demand {d}")


# --------------------------------------------------- interargument relations


def placeholder(i: int) -> Var:
    return Var(f"t{i}")


@dataclass(frozen=True)
class InterargRelation:
    """DNF over argument placeholders t1..tn.

    preds is a tuple of predicate symbols: one for an ordinary relation, several
    for a relation over a conjunction, whose placeholders run over the
    concatenated arguments.  Each conjunct is (op, lhs, rhs) with op one of
    ">", "=", "||".
    """

    preds: tuple
    formula: tuple

    @staticmethod
    def gt(preds, i: int, j: int) -> "InterargRelation":
        if isinstance(preds, Symbol):
            preds = (preds,)
        return InterargRelation(tuple(preds), (((">", placeholder(i), placeholder(j)),),))

    @property
    def key(self) -> str:
        return "&".join(str(p) for p in self.preds)

    @property
    def arity(self) -> int:
        return sum(p.arity for p in self.preds)

    def is_single_conjunct(self) -> bool:
        return len(self.formula) == 1

    def instantiate(self, atoms) -> list:
        """Conjuncts of a single-disjunct relation applied to concrete atoms."""
        if isinstance(atoms, Atom):
            atoms = (atoms,)
        args = [a for at in atoms for a in at.args]
        sub = {placeholder(i): t for i, t in enumerate(args, 1)}
        if len(self.formula) != 1:
            return []
        out = []
        for op, lhs, rhs in self.formula[0]:
            l, r = apply_subst(lhs, sub), apply_subst(rhs, sub)
            if op == ">":
                out.append(Gt(l, r))
        return out

    def conclusions(self, atoms) -> list:
        return self.instantiate(atoms)

    def __str__(self):
        def conj(c):
            return " & ".join(f"{term_str(l)} {op} {term_str(r)}" for op, l, r in c)

        body = " | ".join(conj(c) for c in self.formula)
        return f"R[{self.key}] = {{ {body} }}"

    def to_json(self):
        return {
            "preds": [str(p) for p in self.preds],
            "formula": [[[op, term_str(l), term_str(r)] for op, l, r in c] for c in self.formula],
        }

    @staticmethod
    def from_json(d) -> "InterargRelation":
        return InterargRelation(
            tuple(Symbol.parse(p) for p in d["preds"]),
            tuple(tuple((op, parse_over_placeholders(l), parse_over_placeholders(r)) for op, l, r in c) for c in d["formula"]),
        )


# ------------------------------------------------------------ derivations


@dataclass(frozen=True)
class Proof:
    """Why one strict decrease holds: a lemma applied to sub-derivations."""

    rule: str
    goal: str
    demands: tuple = ()
    children: tuple = ()

    def all_demands(self) -> list:
        out = list(self.demands)
        for c in self.children:
            out.extend(c.all_demands())
        seen = {}
        for d in out:
            seen.setdefault(d, None)
        return list(seen)

    def to_json(self):
        d = {"rule": self.rule, "goal": self.goal}
        if self.demands:
            d["demands"] = [x.to_json() for x in self.demands]
        if self.children:
            d["children"] = [c.to_json() for c in self.children]
        return d

    @staticmethod
    def from_json(d) -> "Proof":
        return Proof(
            d["rule"],
            d["goal"],
            tuple(demand_from_json(x) for x in d.get("demands", [])),
            tuple(Proof.from_json(c) for c in d.get("children", [])),
        )
