"""Term orders: characteristic functions, RPO, norm-based orders, VREL and rigidity.

Atoms are ordered as terms rooted at their predicate symbol.  Concrete
orders carry an argument filter: an ignored position is erased before
comparison, so two terms that differ only at ignored positions are equal
under the order.
"""

from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .syntax import (
    Atom,
    Compound,
    Symbol,
    Term,
    Var,
    apply_subst,
    replace_at,
    symbols_of,
    var_occurrences,
    vars_of,
)


class InvalidPath(IndexError):
    pass


class Comparison(enum.Enum):
    GREATER = "Greater"
    EQUAL = "EqualUnderOrder"
    LESS = "Less"
    INCOMPARABLE = "Incomparable"

    def __str__(self):
        return self.value


# ------------------------------------------------------------ position sets


@dataclass(frozen=True)
class PositionFamily:
    """Map from symbol to a set of argument positions; absent symbols map to the empty set."""

    entries: tuple = ()

    @staticmethod
    def of(mapping) -> "PositionFamily":
        items = []
        for sym, idx in mapping.items():
            idx = frozenset(idx)
            bad = [i for i in idx if not 1 <= i <= sym.arity]
            if bad:
                raise ValueError(f"position {bad[0]} out of range for {sym}")
            if idx:
                items.append((sym, idx))
        return PositionFamily(tuple(sorted(items, key=lambda kv: (kv[0].name, kv[0].arity))))

    def get(self, sym: Symbol) -> frozenset:
        for s, idx in self.entries:
            if s == sym:
                return idx
        return frozenset()

    def __contains__(self, key) -> bool:
        sym, i = key
        return i in self.get(sym)

    def as_dict(self) -> dict:
        return dict(self.entries)

    def symbols(self):
        return [s for s, _ in self.entries]

    def union(self, other: "PositionFamily") -> "PositionFamily":
        d = {s: set(i) for s, i in self.entries}
        for s, i in other.entries:
            d.setdefault(s, set()).update(i)
        return PositionFamily.of(d)

    def add(self, sym: Symbol, i: int) -> "PositionFamily":
        return self.union(PositionFamily.of({sym: {i}}))

    def remove(self, sym: Symbol, i: int) -> "PositionFamily":
        d = {s: set(x) for s, x in self.entries}
        d.get(sym, set()).discard(i)
        return PositionFamily.of(d)

    def complement(self, signature: Iterable[Symbol]) -> "PositionFamily":
        return PositionFamily.of({s: set(range(1, s.arity + 1)) - self.get(s) for s in signature})

    def to_json(self) -> dict:
        return {str(s): sorted(i) for s, i in self.entries}

    @staticmethod
    def from_json(d: dict) -> "PositionFamily":
        return PositionFamily.of({Symbol.parse(k): set(v) for k, v in d.items()})

    def __str__(self):
        return "{" + ", ".join(f"{s}:{sorted(i)}" for s, i in self.entries) + "}"


def full_family(signature: Iterable[Symbol]) -> PositionFamily:
    return PositionFamily.of({s: range(1, s.arity + 1) for s in signature})


def _as_term(t) -> Term:
    return t.as_term() if isinstance(t, Atom) else t


def char_fn(s, path, fam) -> int:
    """Characteristic function of the path in s with respect to a position family.

    1 for the empty path and at variables or constants; otherwise the product
    of membership of each step's index in the family of the symbol passed.
    """
    s = _as_term(s)
    get = fam.get if isinstance(fam, PositionFamily) else (lambda sym: frozenset(fam.get(sym, ())))
    path = tuple(path)
    if not path:
        return 1
    if isinstance(s, Var) or not s.args:
        raise InvalidPath(f"path {path} leaves the term at {s}")
    i = path[0]
    if not 1 <= i <= len(s.args):
        raise InvalidPath(f"index {i} out of range for {s.sym}")
    # evaluate the rest first so that invalid paths are always reported
    rest = char_fn(s.args[i - 1], path[1:], fam)
    return (1 if i in get(s.sym) else 0) * rest


# ---------------------------------------------------------------- norms


@dataclass(frozen=True)
class LinExpr:
    """const + sum(coeff * |var|)."""

    const: int = 0
    coeffs: tuple = ()

    @staticmethod
    def make(const, coeffs: dict) -> "LinExpr":
        return LinExpr(const, tuple(sorted(((v, c) for v, c in coeffs.items() if c), key=lambda vc: vc[0].name)))

    def coeff_map(self) -> dict:
        return dict(self.coeffs)

    def __add__(self, other):
        d = self.coeff_map()
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return LinExpr.make(self.const + other.const, d)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, k: int):
        return LinExpr.make(self.const * k, {v: c * k for v, c in self.coeffs})

    def is_constant(self) -> bool:
        return not self.coeffs

    def __str__(self):
        parts = [f"{c}*|{v}|" if c != 1 else f"|{v}|" for v, c in self.coeffs]
        if self.const or not parts:
            parts.insert(0, str(self.const))
        return " + ".join(parts)


@dataclass(frozen=True)
class NormDef:
    """Per-symbol linear rule: |f(t1..tn)| = offset + sum of |ti| over counted i.

    Symbols without a rule have norm 0.
    """

    rules: tuple = ()
    name: str = "norm"

    @staticmethod
    def of(rules: dict, name="norm") -> "NormDef":
        items = []
        for sym, (off, pos) in rules.items():
            pos = frozenset(pos)
            if off < 0:
                raise ValueError("norm offsets must be non-negative")
            if any(not 1 <= i <= sym.arity for i in pos):
                raise ValueError(f"counted position out of range for {sym}")
            items.append((sym, off, pos))
        return NormDef(tuple(sorted(items, key=lambda r: (r[0].name, r[0].arity))), name)

    def rule(self, sym: Symbol):
        for s, off, pos in self.rules:
            if s == sym:
                return off, pos
        return 0, frozenset()

    def counted(self) -> PositionFamily:
        return PositionFamily.of({s: pos for s, _, pos in self.rules})

    def subterm_positions(self) -> PositionFamily:
        return PositionFamily.of({s: pos for s, off, pos in self.rules if off >= 1})


def norm_value(norm: NormDef, t) -> LinExpr:
    """Symbolic norm; a plain integer constant for ground terms."""
    t = _as_term(t)
    return _norm(norm, t)


def _norm(norm, t):
    if isinstance(t, Var):
        return LinExpr.make(0, {t: 1})
    off, pos = norm.rule(t.sym)
    out = LinExpr(off)
    for i in sorted(pos):
        out = out + _norm(norm, t.args[i - 1])
    return out


def list_length_norm(predicates=(), ignored: Optional[PositionFamily] = None) -> NormDef:
    """|[H|T]| = 1 + |T|, every other functor 0; atoms sum their non-ignored arguments."""
    ignored = ignored or PositionFamily()
    rules = {Symbol(".", 2): (1, {2})}
    for p in predicates:
        rules[p] = (0, set(range(1, p.arity + 1)) - ignored.get(p))
    return NormDef.of(rules, "listlen")


list_size_norm = list_length_norm


def term_size_norm(functors, predicates=(), ignored: Optional[PositionFamily] = None) -> NormDef:
    """|f(t1..tn)| = 1 + sum |ti| over non-ignored positions."""
    ignored = ignored or PositionFamily()
    rules = {}
    for f in functors:
        rules[f] = (1, set(range(1, f.arity + 1)) - ignored.get(f))
    for p in predicates:
        rules[p] = (0, set(range(1, p.arity + 1)) - ignored.get(p))
    return NormDef.of(rules, "termsize")


# ---------------------------------------------------------------- order specs


@dataclass(frozen=True)
class PropertyAbstract:
    """An order known only through its ignored, monotone and subterm positions."""

    ignored_pred: PositionFamily = PositionFamily()
    ignored_fun: PositionFamily = PositionFamily()
    monotone: PositionFamily = PositionFamily()
    subterm: PositionFamily = PositionFamily()

    def __post_init__(self):
        ignored = self.ignored_pred.union(self.ignored_fun)
        for fam in (self.monotone, self.subterm):
            for sym, idx in fam.entries:
                clash = idx & ignored.get(sym)
                if clash:
                    raise ValueError(f"{sym} position {min(clash)} is both ignored and demanded")


@dataclass(frozen=True)
class Rpo:
    """Recursive path order over a precedence, applied after erasing ignored positions.

    precedence: pairs (f, g) meaning f above g; the transitive closure is used.
    multiset: symbols with multiset status; every other symbol is lexicographic.
    """

    precedence: tuple = ()
    multiset: frozenset = frozenset()
    ignored: PositionFamily = PositionFamily()

    def __post_init__(self):
        closure = _closure(self.precedence)
        if any((f, f) in closure for f, _ in self.precedence):
            raise ValueError("precedence is cyclic")

    def above(self, f: Symbol, g: Symbol) -> bool:
        return (f, g) in _closure(self.precedence)

    def status(self, f: Symbol) -> str:
        return "mul" if f in self.multiset else "lex"


@dataclass(frozen=True)
class NormBased:
    norm: NormDef


OrderSpec = Union[PropertyAbstract, Rpo, NormBased]


@functools.lru_cache(maxsize=512)
def _closure(pairs: tuple) -> frozenset:
    succ = {}
    for f, g in pairs:
        succ.setdefault(f, set()).add(g)
    out = set()
    for f in list(succ):
        stack, seen = list(succ[f]), set()
        while stack:
            g = stack.pop()
            if g in seen:
                continue
            seen.add(g)
            stack.extend(succ.get(g, ()))
        out.update((f, g) for g in seen)
    return frozenset(out)


def precedence_chain(symbols) -> tuple:
    """Pairs of a total precedence listing symbols from highest to lowest."""
    symbols = list(symbols)
    return tuple(zip(symbols, symbols[1:]))


def families(spec: OrderSpec, signature: Iterable[Symbol] = ()) -> tuple:
    """(monotone, subterm) position families of an order over a signature."""
    if isinstance(spec, PropertyAbstract):
        return spec.monotone, spec.subterm
    if isinstance(spec, Rpo):
        kept = spec.ignored.complement(signature)
        return kept, kept
    if isinstance(spec, NormBased):
        return spec.norm.counted(), spec.norm.subterm_positions()
    raise TypeError(spec)


# -------------------------------------------------------------- filtering


def _filter(spec: Rpo, t):
    """Erase ignored positions; compound terms become (symbol, args) tuples."""
    if isinstance(t, Var):
        return t
    ign = spec.ignored.get(t.sym)
    return (t.sym, tuple(_filter(spec, a) for i, a in enumerate(t.args, 1) if i not in ign))


def _f_occurs(v, t) -> bool:
    if isinstance(t, Var):
        return t == v
    return any(_f_occurs(v, a) for a in t[1])


class _RpoCheck:
    """RPO comparison of filtered terms, optionally under assumed strict decreases.

    Every rule used is a closure property of the RPO on ground instances, so a
    derivation is valid for every instance satisfying the assumptions.
    """

    def __init__(self, spec: Rpo, hyps=(), chain: int = 8):
        self.spec = spec
        self.hyps = [(_filter(spec, _as_term(u)), _filter(spec, _as_term(v))) for u, v in hyps]
        self.hypset = set(self.hyps)
        self.chain = chain
        self.memo = {}

    def ge(self, s, t, depth) -> bool:
        return s == t or self.gt(s, t, depth)

    def gt(self, s, t, depth=None) -> bool:
        if depth is None:
            depth = self.chain
        key = (s, t, depth)
        if key in self.memo:
            return self.memo[key]
        self.memo[key] = False  # guards against cycles through hypotheses
        res = self._gt(s, t, depth)
        self.memo[key] = res
        return res

    def _gt(self, s, t, depth) -> bool:
        if s == t:
            return False
        if (s, t) in self.hypset:
            return True
        if isinstance(s, tuple):
            if isinstance(t, Var):
                if _f_occurs(t, s):
                    return True
            else:
                if self._rpo_step(s, t, depth):
                    return True
        if depth > 0:
            for u, v in self.hyps:
                if self.ge(s, u, depth - 1) and self.ge(v, t, depth - 1):
                    return True
        return False

    def _rpo_step(self, s, t, depth) -> bool:
        f, ss = s
        g, ts = t
        if any(si == t or self.gt(si, t, depth) for si in ss):
            return True
        if self.spec.above(f, g):
            return all(self.gt(s, tj, depth) for tj in ts)
        if f == g:
            if self.spec.status(f) == "mul":
                return self._mul(list(ss), list(ts), depth)
            for i, (si, ti) in enumerate(zip(ss, ts)):
                if si != ti:
                    return self.gt(si, ti, depth) and all(self.gt(s, tj, depth) for tj in ts[i + 1:])
        return False

    def _mul(self, ss, ts, depth) -> bool:
        ss, ts = list(ss), list(ts)
        for x in list(ss):
            if x in ts:
                ss.remove(x)
                ts.remove(x)
        if not ss:
            return False
        return all(any(self.gt(x, y, depth) for x in ss) for y in ts)


def _norm_greater(norm: NormDef, hyps, s, t) -> bool:
    diff = norm_value(norm, s) - norm_value(norm, t)
    hdiffs = [norm_value(norm, u) - norm_value(norm, v) for u, v in hyps]
    # search small non-negative multipliers of the assumptions (Farkas-style)
    for lams in itertools.product(range(3), repeat=len(hdiffs)):
        rest = diff
        for lam, h in zip(lams, hdiffs):
            if lam:
                rest = rest - h.scale(lam)
        if all(c >= 0 for _, c in rest.coeffs) and rest.const + sum(lams) >= 1:
            return True
    return False


def compare(spec: OrderSpec, t1, t2) -> Comparison:
    """Compare two terms (or atoms) under a concrete order."""
    t1, t2 = _as_term(t1), _as_term(t2)
    if isinstance(spec, Rpo):
        f1, f2 = _filter(spec, t1), _filter(spec, t2)
        if f1 == f2:
            return Comparison.EQUAL
        chk = _RpoCheck(spec)
        if chk.gt(f1, f2):
            return Comparison.GREATER
        if chk.gt(f2, f1):
            return Comparison.LESS
        return Comparison.INCOMPARABLE
    if isinstance(spec, NormBased):
        d = norm_value(spec.norm, t1) - norm_value(spec.norm, t2)
        if d.is_constant() and d.const == 0:
            return Comparison.EQUAL
        cs = [c for _, c in d.coeffs]
        if d.const >= 1 and all(c >= 0 for c in cs):
            return Comparison.GREATER
        if d.const <= -1 and all(c <= 0 for c in cs):
            return Comparison.LESS
        return Comparison.INCOMPARABLE
    raise TypeError("compare needs a concrete order (Rpo or NormBased)")


def greater_under(spec: OrderSpec, hyps, s, t) -> bool:
    """s > t for every instance in which each assumed pair (u, v) has u > v."""
    s, t = _as_term(s), _as_term(t)
    hyps = [(_as_term(u), _as_term(v)) for u, v in hyps]
    if isinstance(spec, Rpo):
        return _RpoCheck(spec, hyps).gt(_filter(spec, s), _filter(spec, t))
    if isinstance(spec, NormBased):
        return _norm_greater(spec.norm, hyps, s, t)
    raise TypeError("greater_under needs a concrete order")


def equal_under(spec: OrderSpec, s, t) -> bool:
    return compare(spec, s, t) == Comparison.EQUAL


# ---------------------------------------------------------- VREL, rigidity


@dataclass(frozen=True)
class VrelResult:
    paths: frozenset
    approximate: bool = False

    def __contains__(self, p):
        return tuple(p) in self.paths

    def __iter__(self):
        return iter(sorted(self.paths))

    def __len__(self):
        return len(self.paths)


def enumerate_terms(signature, max_size: int, variables=()) -> list:
    """All terms with at most max_size symbols, smallest first, deterministic order."""
    signature = sorted(set(signature), key=lambda s: (s.arity, s.name))
    leaves = [Compound(s) for s in signature if s.arity == 0] + list(variables)
    by_size = {1: leaves}
    for n in range(2, max_size + 1):
        out = []
        for f in signature:
            if f.arity == 0:
                continue
            for split in _compositions(n - 1, f.arity):
                pools = [by_size.get(k, []) for k in split]
                for args in itertools.product(*pools):
                    out.append(Compound(f, tuple(args)))
        by_size[n] = out
    return [t for n in range(1, max_size + 1) for t in by_size[n]]


def _compositions(total, parts):
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def brute_force_vrel(same_class, s, pool) -> frozenset:
    """Occurrences whose replacement by some pool term changes the class of s."""
    s = _as_term(s)
    out = set()
    for path, v in var_occurrences(s):
        for t in pool:
            if t == v:
                continue
            if not same_class(s, replace_at(s, path, t)):
                out.add(path)
                break
    return frozenset(out)


def brute_force_rigid(same_class, s, pool, limit: int = 4000) -> bool:
    """s is in the same class as each of its instances built from pool terms."""
    s = _as_term(s)
    vs = vars_of(s)
    for k, combo in enumerate(itertools.product(pool, repeat=len(vs))):
        if k >= limit:
            break
        if not same_class(s, apply_subst(s, dict(zip(vs, combo)))):
            return False
    return True


def replacement_pool(s, size: int = 3) -> list:
    sig = set(symbols_of(_as_term(s))) | {Symbol("c'", 0)}
    return enumerate_terms(sig, size, (Var("Z'"),))


def vrel(spec: OrderSpec, s) -> VrelResult:
    """Relevant variable occurrences of s (paths into s)."""
    s = _as_term(s)
    occ = var_occurrences(s)
    if isinstance(spec, PropertyAbstract):
        return VrelResult(frozenset(
            p for p, _ in occ if char_fn(s, p, spec.monotone) == 1 or char_fn(s, p, spec.subterm) == 1
        ))
    if isinstance(spec, NormBased):
        counted = spec.norm.counted()
        return VrelResult(frozenset(p for p, _ in occ if char_fn(s, p, counted) == 1))
    if isinstance(spec, Rpo):
        paths = brute_force_vrel(lambda a, b: equal_under(spec, a, b), s, replacement_pool(s))
        return VrelResult(paths, approximate=True)
    raise TypeError(spec)


def _family_vars(s, fam) -> set:
    occ = var_occurrences(s)
    out = set()
    for v in {x for _, x in occ}:
        if all(char_fn(s, p, fam) == 1 for p, x in occ if x == v):
            out.add(v)
    return out


def m_set(spec: OrderSpec, s, signature=()) -> set:
    s = _as_term(s)
    mono, _ = families(spec, signature or symbols_of(s))
    return _family_vars(s, mono)


def s_set(spec: OrderSpec, s, signature=()) -> set:
    s = _as_term(s)
    _, sub = families(spec, signature or symbols_of(s))
    return _family_vars(s, sub)


def _passes_ignored(s, path, ignored: PositionFamily) -> bool:
    t = s
    for i in path:
        if i in ignored.get(t.sym):
            return True
        t = t.args[i - 1]
    return False


def is_rigid(spec: OrderSpec, a) -> bool:
    """Sufficient (pseudo-rigidity) test: no variable occurrence can influence the order."""
    s = _as_term(a)
    occ = var_occurrences(s)
    if isinstance(spec, PropertyAbstract):
        return all(char_fn(s, p, spec.monotone) == 0 and char_fn(s, p, spec.subterm) == 0 for p, _ in occ)
    if isinstance(spec, NormBased):
        return norm_value(spec.norm, s).is_constant()
    if isinstance(spec, Rpo):
        return all(_passes_ignored(s, p, spec.ignored) for p, _ in occ)
    raise TypeError(spec)


# ---------------------------------------------------------- serialization


def order_to_json(spec: OrderSpec, signature=()) -> dict:
    signature = sorted(set(signature), key=lambda s: (s.name, s.arity))
    if isinstance(spec, Rpo):
        mono, sub = families(spec, signature)
        return {
            "kind": "rpo",
            "precedence": [[str(f), str(g)] for f, g in spec.precedence],
            "multiset": sorted(str(s) for s in spec.multiset),
            "signature": [str(s) for s in signature],
            "monotone": mono.to_json(),
            "subterm": sub.to_json(),
        }
    if isinstance(spec, NormBased):
        mono, sub = families(spec, signature)
        return {
            "kind": "norm",
            "name": spec.norm.name,
            "rules": {str(s): [off, sorted(pos)] for s, off, pos in spec.norm.rules},
            "monotone": mono.to_json(),
            "subterm": sub.to_json(),
        }
    if isinstance(spec, PropertyAbstract):
        return {
            "kind": "abstract",
            "ignoredPred": spec.ignored_pred.to_json(),
            "ignoredFun": spec.ignored_fun.to_json(),
            "monotone": spec.monotone.to_json(),
            "subterm": spec.subterm.to_json(),
        }
    raise TypeError(spec)


def order_from_json(d: dict) -> OrderSpec:
    kind = d["kind"]
    if kind == "rpo":
        signature = [Symbol.parse(s) for s in d.get("signature", [])]
        sub = PositionFamily.from_json(d.get("subterm", {}))
        # the argument filter keeps exactly the declared subterm positions
        ignored = sub.complement(signature)
        prec = tuple((Symbol.parse(f), Symbol.parse(g)) for f, g in d["precedence"])
        return Rpo(prec, frozenset(Symbol.parse(s) for s in d.get("multiset", [])), ignored)
    if kind == "norm":
        rules = {Symbol.parse(k): (v[0], set(v[1])) for k, v in d["rules"].items()}
        return NormBased(NormDef.of(rules, d.get("name", "norm")))
    if kind == "abstract":
        return PropertyAbstract(
            PositionFamily.from_json(d["ignoredPred"]),
            PositionFamily.from_json(d["ignoredFun"]),
            PositionFamily.from_json(d["monotone"]),
            PositionFamily.from_json(d["subterm"]),
        )
    raise ValueError(f"unknown order kind {kind!r}")
