"""Terms, atoms and clauses of pure definite programs.

Parsing, printing, substitution, unification with occurs-check, variant
checks, renaming apart and the predicate dependency graph.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Union


@dataclass(frozen=True, order=True)
class Symbol:
    name: str
    arity: int

    def __str__(self):
        return f"{self.name}/{self.arity}"

    @staticmethod
    def parse(text: str) -> "Symbol":
        name, _, arity = text.rpartition("/")
        return Symbol(name, int(arity))


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Compound:
    sym: Symbol
    args: tuple = ()

    def __post_init__(self):
        if len(self.args) != self.sym.arity:
            raise ValueError(f"{self.sym} applied to {len(self.args)} arguments")

    def __str__(self):
        return term_str(self)


Term = Union[Var, Compound]

NIL = Symbol("[]", 0)
CONS = Symbol(".", 2)
PLUS = Symbol("+", 2)
TIMES = Symbol("*", 2)
# placeholder for argument positions the order ignores; printed as ``t``
WILDCARD = Compound(Symbol("$t", 0))


def const(name: str) -> Compound:
    return Compound(Symbol(name, 0))


def fn(name: str, *args: Term) -> Compound:
    return Compound(Symbol(name, len(args)), tuple(args))


def mklist(items: Iterable[Term], tail: Term = Compound(NIL)) -> Term:
    out = tail
    for x in reversed(list(items)):
        out = Compound(CONS, (x, out))
    return out


@dataclass(frozen=True)
class Atom:
    pred: Symbol
    args: tuple = ()

    def __post_init__(self):
        if len(self.args) != self.pred.arity:
            raise ValueError(f"{self.pred} applied to {len(self.args)} arguments")

    def as_term(self) -> Compound:
        return Compound(self.pred, self.args)

    @staticmethod
    def from_term(t: Term) -> "Atom":
        if not isinstance(t, Compound):
            raise TypeError(f"not an atom: {t}")
        return Atom(t.sym, t.args)

    def __str__(self):
        return term_str(self.as_term())


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: tuple = ()

    def __str__(self):
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class QueryPattern:
    """A ``%% query:`` directive: one abstract mode word per argument."""

    pred: Symbol
    modes: tuple

    def __str__(self):
        return f"{self.pred.name}({','.join(self.modes)})"


@dataclass(frozen=True)
class ModeDecl:
    """A ``%% mode:`` directive: ``in`` or ``out`` per argument."""

    pred: Symbol
    modes: tuple

    def __str__(self):
        return f"{self.pred.name}({','.join(self.modes)})"


@dataclass(frozen=True)
class Program:
    clauses: tuple = ()
    directives: tuple = ()
    modes: tuple = ()

    def predicates(self) -> list:
        """Predicate symbols in order of first occurrence."""
        seen = {}
        for c in self.clauses:
            for a in (c.head, *c.body):
                seen.setdefault(a.pred, None)
        return list(seen)

    def defined(self) -> set:
        return {c.head.pred for c in self.clauses}

    def clauses_for(self, pred: Symbol) -> list:
        return [(i, c) for i, c in enumerate(self.clauses) if c.head.pred == pred]

    def functors(self) -> list:
        """Function symbols (including constants) in order of first occurrence."""
        seen = {}
        for c in self.clauses:
            for a in (c.head, *c.body):
                for t in a.args:
                    for s in symbols_of(t):
                        seen.setdefault(s, None)
        return list(seen)

    def mode_map(self) -> dict:
        return {m.pred: m.modes for m in self.modes}

    def __str__(self):
        lines = [f"%% query: {d}." for d in self.directives]
        lines += [f"%% mode: {m}." for m in self.modes]
        lines += [str(c) for c in self.clauses]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- traversal


def term_vars(t: Term) -> Iterator[Var]:
    """Variables in left-to-right order, with repetitions."""
    if isinstance(t, Var):
        yield t
    else:
        for a in t.args:
            yield from term_vars(a)


def vars_of(*items) -> list:
    """Distinct variables of terms, atoms or clauses in order of first occurrence."""
    seen = {}
    for it in items:
        for v in _vars_any(it):
            seen.setdefault(v, None)
    return list(seen)


def _vars_any(x) -> Iterator[Var]:
    if isinstance(x, (Var, Compound)):
        yield from term_vars(x)
    elif isinstance(x, Atom):
        for a in x.args:
            yield from term_vars(a)
    elif isinstance(x, Clause):
        yield from _vars_any(x.head)
        for b in x.body:
            yield from _vars_any(b)
    else:
        for y in x:
            yield from _vars_any(y)


def is_ground(t) -> bool:
    return next(_vars_any(t), None) is None


def symbols_of(t: Term) -> Iterator[Symbol]:
    if isinstance(t, Compound):
        yield t.sym
        for a in t.args:
            yield from symbols_of(a)


def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(term_size(a) for a in t.args)


def subterm_at(t: Term, path) -> Term:
    for i in path:
        if not isinstance(t, Compound) or not 1 <= i <= len(t.args):
            raise IndexError(f"no subterm at {tuple(path)}")
        t = t.args[i - 1]
    return t


def replace_at(t: Term, path, new: Term) -> Term:
    if not path:
        return new
    i = path[0]
    if not isinstance(t, Compound) or not 1 <= i <= len(t.args):
        raise IndexError(f"no subterm at {tuple(path)}")
    args = list(t.args)
    args[i - 1] = replace_at(args[i - 1], path[1:], new)
    return Compound(t.sym, tuple(args))


def positions(t: Term, prefix=()) -> Iterator[tuple]:
    """All (path, subterm) pairs, pre-order."""
    yield prefix, t
    if isinstance(t, Compound):
        for i, a in enumerate(t.args, 1):
            yield from positions(a, prefix + (i,))


def var_occurrences(t: Term) -> list:
    return [(p, s) for p, s in positions(t) if isinstance(s, Var)]


# ------------------------------------------------------------- substitution


class Substitution:
    """Finite map from variables to terms.  Treated as immutable."""

    __slots__ = ("bindings",)

    def __init__(self, bindings: Optional[Mapping] = None):
        self.bindings = dict(bindings or {})

    def __getitem__(self, v):
        return self.bindings[v]

    def __contains__(self, v):
        return v in self.bindings

    def __len__(self):
        return len(self.bindings)

    def __iter__(self):
        return iter(self.bindings)

    def items(self):
        return self.bindings.items()

    def __eq__(self, other):
        return isinstance(other, Substitution) and self.bindings == other.bindings

    def __hash__(self):
        return hash(frozenset(self.bindings.items()))

    def __repr__(self):
        return "{" + ", ".join(f"{k}↦{v}" for k, v in self.sorted_items()) + "}"

    def sorted_items(self):
        return sorted(self.bindings.items(), key=lambda kv: kv[0].name)

    def is_idempotent(self) -> bool:
        dom = set(self.bindings)
        return not any(v in dom for t in self.bindings.values() for v in term_vars(t))

    def compose(self, other: "Substitution") -> "Substitution":
        """self then other: x(self∘other) = (x self) other."""
        out = {v: apply_subst(t, other) for v, t in self.bindings.items()}
        for v, t in other.bindings.items():
            out.setdefault(v, t)
        return Substitution({v: t for v, t in out.items() if t != v})


def apply_subst(t, s) -> Term:
    """Simultaneous replacement of bound variables.  Accepts a Substitution or dict."""
    b = s.bindings if isinstance(s, Substitution) else s
    if not b:
        return t
    return _apply(t, b)


def _apply(t, b):
    if isinstance(t, Var):
        return b.get(t, t)
    if not t.args:
        return t
    return Compound(t.sym, tuple(_apply(a, b) for a in t.args))


def apply_atom(a: Atom, s) -> Atom:
    b = s.bindings if isinstance(s, Substitution) else s
    if not b:
        return a
    return Atom(a.pred, tuple(_apply(x, b) for x in a.args))


def apply_clause(c: Clause, s) -> Clause:
    return Clause(apply_atom(c.head, s), tuple(apply_atom(x, s) for x in c.body))


# --------------------------------------------------------------- unification


def _walk(t, b):
    while isinstance(t, Var) and t in b:
        t = b[t]
    return t


def _occurs(v, t, b) -> bool:
    t = _walk(t, b)
    if t == v:
        return True
    if isinstance(t, Compound):
        return any(_occurs(v, a, b) for a in t.args)
    return False


def unify_terms(pairs, b=None) -> Optional[dict]:
    """Solve equations with occurs-check.  Returns triangular bindings or None."""
    b = dict(b or {})
    stack = list(pairs)
    while stack:
        x, y = stack.pop()
        x, y = _walk(x, b), _walk(y, b)
        if x == y:
            continue
        if isinstance(x, Var):
            if _occurs(x, y, b):
                return None
            b[x] = y
        elif isinstance(y, Var):
            if _occurs(y, x, b):
                return None
            b[y] = x
        else:
            if x.sym != y.sym:
                return None
            stack.extend(zip(x.args, y.args))
    return b


def resolve(b: dict) -> dict:
    """Turn triangular bindings into an idempotent map."""
    out = {}

    def full(t):
        t = _walk(t, b)
        if isinstance(t, Var):
            return t
        if not t.args:
            return t
        return Compound(t.sym, tuple(full(a) for a in t.args))

    for v in b:
        out[v] = full(v)
    return {v: t for v, t in out.items() if t != v}


def mgu_terms(s: Term, t: Term) -> Optional[Substitution]:
    b = unify_terms([(s, t)])
    return None if b is None else Substitution(resolve(b))


def mgu(a: Atom, b: Atom) -> Optional[Substitution]:
    """Most general unifier of two atoms, idempotent, or None."""
    if a.pred != b.pred:
        return None
    res = unify_terms(zip(a.args, b.args))
    return None if res is None else Substitution(resolve(res))


def match(pattern: Term, t: Term, b: Optional[dict] = None) -> Optional[dict]:
    """One-way matching: find b with pattern b == t (t's variables are constants)."""
    b = dict(b or {})
    stack = [(pattern, t)]
    while stack:
        p, s = stack.pop()
        if isinstance(p, Var):
            if p in b:
                if b[p] != s:
                    return None
            else:
                b[p] = s
        elif isinstance(s, Var) or p.sym != s.sym:
            return None
        else:
            stack.extend(zip(p.args, s.args))
    return b


# ------------------------------------------------------------------ variants


def _canon(items) -> list:
    mapping = {}
    out = []

    def go(t):
        if isinstance(t, Var):
            if t not in mapping:
                mapping[t] = len(mapping)
            return ("v", mapping[t])
        return (t.sym, tuple(go(a) for a in t.args))

    for t in items:
        out.append(go(t))
    return out


def variant_eq(a, b) -> bool:
    """True iff a and b are equal up to a bijective variable renaming.

    Works for terms, atoms, clauses and sequences of those.
    """
    return _canon(_flatten(a)) == _canon(_flatten(b))


def _flatten(x) -> list:
    if isinstance(x, (Var, Compound)):
        return [x]
    if isinstance(x, Atom):
        return [x.as_term()]
    if isinstance(x, Clause):
        return [Compound(Symbol(":-", 2), (x.head.as_term(), fn("body", *[y.as_term() for y in x.body])))]
    out = []
    for y in x:
        out.extend(_flatten(y))
    return out


_fresh_counter = itertools.count(1)


def rename_apart(c: Clause, avoid=frozenset(), suffix: Optional[str] = None) -> Clause:
    """Variant of c sharing no variable with avoid."""
    avoid = set(avoid)
    mapping = {}
    for v in vars_of(c):
        if suffix is not None:
            cand = Var(f"{v.name}_{suffix}")
        else:
            cand = v
            k = 0
            while cand in avoid or cand in mapping.values():
                k += 1
                cand = Var(f"{v.name}{k}")
        mapping[v] = cand
    return apply_clause(c, mapping)


def rename_atoms(atoms, prefix: str = "t") -> tuple:
    """Rename variables of an atom sequence to prefix1, prefix2, ... by first occurrence."""
    mapping = {v: Var(f"{prefix}{i}") for i, v in enumerate(vars_of(atoms), 1)}
    return tuple(apply_atom(a, mapping) for a in atoms), mapping


# ---------------------------------------------------------- dependency graph


@dataclass(frozen=True)
class DepGraph:
    preds: tuple
    refers: frozenset
    depends: frozenset

    def depends_on(self, p, q) -> bool:
        return (p, q) in self.depends

    def mutual(self, p, q) -> bool:
        return (p, q) in self.depends and (q, p) in self.depends

    def above(self, p, q) -> bool:
        """p strictly above q: p depends on q but not conversely."""
        return (p, q) in self.depends and (q, p) not in self.depends

    def classes(self) -> list:
        out, seen = [], set()
        for p in self.preds:
            if p in seen:
                continue
            cls = tuple(q for q in self.preds if self.mutual(p, q))
            seen.update(cls)
            out.append(cls)
        return out

    def level(self, p) -> int:
        """Height of p's class in the quotient DAG (leaves are 0)."""
        below = [q for q in self.preds if self.above(p, q)]
        return 1 + max(self.level(q) for q in below) if below else 0


def dependency_graph(p: Program) -> DepGraph:
    preds = p.predicates()
    refers = {(c.head.pred, b.pred) for c in p.clauses for b in c.body}
    succ = {x: set() for x in preds}
    for x, y in refers:
        succ[x].add(y)
    depends = set()
    for x in preds:
        # reflexive-transitive closure by DFS
        seen, stack = {x}, [x]
        while stack:
            y = stack.pop()
            for z in succ[y]:
                if z not in seen:
                    seen.add(z)
                    stack.append(z)
        depends.update((x, y) for y in seen)
    return DepGraph(tuple(preds), frozenset(refers), frozenset(depends))


# ------------------------------------------------------------------ printing

_PLAIN = re.compile(r"^([a-z][A-Za-z0-9_]*|[0-9]+|\[\])$")
_OPS = {"+": 500, "*": 400}


def _name_str(name: str) -> str:
    if name == "$t":
        return "t"
    if _PLAIN.match(name):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def term_str(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if t.sym == CONS:
        items, tail = [], t
        while isinstance(tail, Compound) and tail.sym == CONS:
            items.append(term_str(tail.args[0]))
            tail = tail.args[1]
        if isinstance(tail, Compound) and tail.sym == NIL:
            return "[" + ",".join(items) + "]"
        return "[" + ",".join(items) + "|" + term_str(tail) + "]"
    if t.sym.arity == 2 and t.sym.name in _OPS:
        prec = _OPS[t.sym.name]
        left, right = t.args

        def wrap(x, limit):
            s = term_str(x)
            if isinstance(x, Compound) and x.sym.arity == 2 and x.sym.name in _OPS and _OPS[x.sym.name] > limit:
                return "(" + s + ")"
            return s

        return f"{wrap(left, prec)}{t.sym.name}{wrap(right, prec - 1)}"
    if not t.args:
        return _name_str(t.sym.name)
    return _name_str(t.sym.name) + "(" + ",".join(term_str(a) for a in t.args) + ")"


# ------------------------------------------------------------------- parsing


class ParseError(SyntaxError):
    """Malformed program text, with 1-based line and column."""

    def __init__(self, msg, line, col):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.lineno = line
        self.offset = col
        self.reason = msg


class ArityClashError(ValueError):
    pass


class UnknownPredicate(ValueError):
    pass


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<neck>:-)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<num>[0-9]+)
  | (?P<quoted>'(?:[^'\\]|\\.)*')
  | (?P<nil>\[\s*\])
  | (?P<punct>[()\[\],|+*])
  | (?P<end>\.(?=\s|%|$))
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line0: int = 1, col0: int = 1) -> list:
    toks = []
    pos, line, col = 0, line0, col0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0
        self.varmap = {}
        self.anon = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind, text=None):
        t = self.next()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            got = t.text or t.kind
            raise ParseError(f"expected {want!r}, found {got!r}", t.line, t.col)
        return t

    def at(self, kind, text=None):
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def clause(self) -> Clause:
        self.varmap, self.anon = {}, 0
        head = self.atom()
        body = []
        if self.at("neck"):
            self.next()
            body.append(self.atom())
            while self.at("punct", ","):
                self.next()
                body.append(self.atom())
        self.expect("end")
        return Clause(head, tuple(body))

    def atom(self) -> Atom:
        t = self.peek()
        term = self.term()
        if not isinstance(term, Compound) or term.sym.name.isdigit():
            raise ParseError("expected an atom", t.line, t.col)
        return Atom(term.sym, term.args)

    def term(self):
        left = self.product()
        while self.at("punct", "+"):
            self.next()
            left = Compound(PLUS, (left, self.product()))
        return left

    def product(self):
        left = self.primary()
        while self.at("punct", "*"):
            self.next()
            left = Compound(TIMES, (left, self.primary()))
        return left

    def primary(self):
        t = self.next()
        if t.kind == "var":
            if t.text == "_":
                self.anon += 1
                return Var(f"_{self.anon}")
            return self.varmap.setdefault(t.text, Var(t.text))
        if t.kind == "num":
            return const(t.text)
        if t.kind == "nil":
            return Compound(NIL)
        if t.kind in ("name", "quoted"):
            name = t.text if t.kind == "name" else _unquote(t.text)
            if self.at("punct", "(") and self.peek().col == t.col + len(t.text) and self.peek().line == t.line:
                self.next()
                args = [self.term()]
                while self.at("punct", ","):
                    self.next()
                    args.append(self.term())
                self.expect("punct", ")")
                return Compound(Symbol(name, len(args)), tuple(args))
            return const(name)
        if t.kind == "punct" and t.text == "(":
            inner = self.term()
            self.expect("punct", ")")
            return inner
        if t.kind == "punct" and t.text == "[":
            items = [self.term()]
            while self.at("punct", ","):
                self.next()
                items.append(self.term())
            tail = Compound(NIL)
            if self.at("punct", "|"):
                self.next()
                tail = self.term()
            self.expect("punct", "]")
            return mklist(items, tail)
        raise ParseError(f"unexpected {t.text or t.kind!r}", t.line, t.col)


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


_DIRECTIVE = re.compile(r"^(\s*)%%\s*(query|mode)\s*:(.*)$")
_QUERY_MODES = {"ground", "free", "nillist", "nillist_ground", "any"}


def parse_term(text: str) -> Term:
    p = _Parser(_tokenize(text))
    t = p.term()
    if p.at("end"):
        p.next()
    if not p.at("eof"):
        tok = p.peek()
        raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.col)
    return t


def parse_atom(text: str) -> Atom:
    t = parse_term(text)
    if not isinstance(t, Compound):
        raise ParseError("expected an atom", 1, 1)
    return Atom(t.sym, t.args)


def parse_goal(text: str) -> tuple:
    """Comma-separated atoms with an optional final full stop."""
    p = _Parser(_tokenize(text))
    atoms = [p.atom()]
    while p.at("punct", ","):
        p.next()
        atoms.append(p.atom())
    if p.at("end"):
        p.next()
    if not p.at("eof"):
        tok = p.peek()
        raise ParseError(f"unexpected {tok.text or tok.kind!r}", tok.line, tok.col)
    return tuple(atoms)


def parse_program(text: str) -> Program:
    """Parse program text with ``%% query:`` and ``%% mode:`` directives."""
    queries, modes = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        m = _DIRECTIVE.match(line)
        if not m:
            continue
        kind, body = m.group(2), m.group(3)
        col = len(line) - len(body) + 1
        p = _Parser(_tokenize(body, lineno, col))
        a = p.atom()
        if p.at("end"):
            p.next()
        if not p.at("eof"):
            tok = p.peek()
            raise ParseError(f"unexpected {tok.text!r} in directive", tok.line, tok.col)
        words = []
        for arg in a.args:
            if not (isinstance(arg, Compound) and not arg.args):
                raise ParseError(f"bad {kind} directive argument {arg}", lineno, col)
            words.append(arg.sym.name)
        allowed = _QUERY_MODES if kind == "query" else {"in", "out"}
        bad = [w for w in words if w not in allowed]
        if bad:
            raise ParseError(f"unknown {kind} word {bad[0]!r}", lineno, col)
        (queries if kind == "query" else modes).append(
            (QueryPattern if kind == "query" else ModeDecl)(a.pred, tuple(words))
        )
    parser = _Parser(_tokenize(text))
    clauses = []
    while not parser.at("eof"):
        clauses.append(parser.clause())
    prog = Program(tuple(clauses), tuple(queries), tuple(modes))
    _check_arities(prog)
    return prog


def _check_arities(p: Program) -> None:
    arity = {}
    for pred in p.predicates():
        if pred.name in arity and arity[pred.name] != pred.arity:
            raise ArityClashError(f"predicate {pred.name} used with arities {arity[pred.name]} and {pred.arity}")
        arity[pred.name] = pred.arity
    for d in (*p.directives, *p.modes):
        if d.pred.name in arity and arity[d.pred.name] != d.pred.arity:
            raise ArityClashError(f"directive {d} does not match {d.pred.name}/{arity[d.pred.name]}")
