import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from termlog.syntax import (
    ArityClashError,
    Atom,
    Clause,
    Compound,
    ParseError,
    Substitution,
    Symbol,
    Var,
    apply_subst,
    const,
    dependency_graph,
    fn,
    mgu,
    mklist,
    parse_atom,
    parse_program,
    parse_term,
    rename_apart,
    term_str,
    variant_eq,
    vars_of,
)

from conftest import load

X, Y, U, V, T = Var("X"), Var("Y"), Var("U"), Var("V"), Var("T")
a, b = const("a"), const("b")
P1 = Symbol("p", 1)


def test_single_fact():
    p = parse_program("p(a).")
    assert len(p.clauses) == 1
    assert p.clauses[0] == Clause(Atom(P1, (a,)), ())


def test_derivative_program_predicates():
    p = load("derivative.pl")
    assert len([c for c in p.clauses if c.head.pred.name == "d"]) == 5
    assert set(p.predicates()) == {Symbol("d", 2), Symbol("number", 1)}


def test_malformed_input_reports_position():
    with pytest.raises(SyntaxError) as e:
        parse_program("p(X :-")
    assert e.value.lineno == 1


def test_arity_clash():
    with pytest.raises(ArityClashError):
        parse_program("p(a).\np(a, b).")


def test_list_sugar_desugars_to_cons():
    t = parse_term("[a, b|T]")
    assert t == mklist([a, b], T)
    assert parse_term("[]") == mklist([])


def test_operators_and_numbers():
    t = parse_term("X*Y+Y*X")
    assert t.sym == Symbol("+", 2)
    assert t.args[0].sym == Symbol("*", 2)
    assert parse_term("1").sym == Symbol("1", 0)


def test_anonymous_variables_are_distinct():
    c = parse_program("p(_, _).").clauses[0]
    assert len(vars_of(c)) == 2


def test_directives():
    p = load("permute_kr.pl")
    assert [str(d) for d in p.directives] == ["perm(nillist_ground,free)"]
    assert p.mode_map()[Symbol("ap2", 3)] == ("out", "out", "in")
    with pytest.raises(ParseError):
        parse_program("%% query: p(sometimes).\np(a).")


def test_apply_subst_examples():
    assert apply_subst(fn("f", X, Y), {X: a}) == fn("f", a, Y)
    assert apply_subst(X, {}) == X
    one, two = const("1"), const("2")
    assert apply_subst(mklist([X], T), {X: one, T: mklist([two])}) == mklist([one, two])


def test_mgu_examples():
    assert mgu(parse_atom("p(X)"), parse_atom("p(a)")) == Substitution({X: a})
    assert mgu(parse_atom("p(X)"), parse_atom("q(X)")) is None
    assert mgu(parse_atom("p(X, f(X))"), parse_atom("p(Y, Y)")) is None


def test_variant_examples():
    assert variant_eq(parse_atom("p(X,Y)"), parse_atom("p(U,V)"))
    assert not variant_eq(parse_atom("p(X,X)"), parse_atom("p(U,V)"))
    assert variant_eq(parse_atom("p(f(X))"), parse_atom("p(f(Y))"))


def test_rename_apart_examples():
    c = parse_program("p(X) :- q(X).").clauses[0]
    r = rename_apart(c, {X})
    assert str(r) == "p(X1) :- q(X1)."
    f = parse_program("p(a, Y).").clauses[0]
    assert variant_eq(rename_apart(f), f)
    assert rename_apart(c, {Y}) == c


def test_dependency_graph_permute():
    g = dependency_graph(load("permute.pl"))
    perm, dele = Symbol("permute", 2), Symbol("delete", 3)
    assert (perm, dele) in g.refers and (perm, perm) in g.refers
    assert g.above(perm, dele)
    assert g.mutual(dele, dele) and not g.mutual(perm, dele)


def test_dependency_graph_fact():
    g = dependency_graph(parse_program("p(a)."))
    assert g.refers == frozenset()
    assert g.mutual(P1, P1)


def test_dependency_graph_discon():
    g = dependency_graph(load("discon.pl"))
    conf, d2, d = Symbol("conf", 1), Symbol("delete2", 2), Symbol("delete", 3)
    assert g.above(conf, d2) and g.above(d2, d) and g.above(conf, d)


def _closure_oracle(preds, refers):
    rel = {(p, p) for p in preds} | set(refers)
    while True:
        new = {(x, z) for x, y in rel for y2, z in rel if y == y2} - rel
        if not new:
            return rel
        rel |= new


@pytest.mark.parametrize("name", ["permute.pl", "discon.pl", "derivative.pl", "quicksort.pl", "odd_even.pl", "combine.pl"])
def test_depends_is_least_reflexive_transitive_closure(name):
    p = load(name)
    g = dependency_graph(p)
    assert set(g.depends) == _closure_oracle(p.predicates(), g.refers)


# -------------------------------------------------------- properties

SIG = [Symbol("a", 0), Symbol("b", 0), Symbol("f", 1), Symbol("g", 2)]
VARS = [Var("X"), Var("Y"), Var("Z")]


def terms(depth=3):
    leaves = st.sampled_from([Compound(s) for s in SIG if s.arity == 0] + VARS)
    return st.recursive(
        leaves,
        lambda kids: st.one_of(
            st.builds(lambda x: Compound(SIG[2], (x,)), kids),
            st.builds(lambda x, y: Compound(SIG[3], (x, y)), kids, kids),
        ),
        max_leaves=6,
    )


def _ground_instances(t, pool):
    vs = vars_of(t)
    for combo in itertools.product(pool, repeat=len(vs)):
        yield dict(zip(vs, combo))


@settings(max_examples=300, deadline=None)
@given(terms(), terms())
def test_mgu_unifies_and_is_most_general(s, t):
    A = Symbol("q", 1)
    th = mgu(Atom(A, (s,)), Atom(A, (t,)))
    small = [const("a"), const("b"), fn("f", const("a"))]
    if th is None:
        # no ground instance makes them equal
        vs = vars_of([s, t])
        for combo in itertools.islice(itertools.product(small, repeat=len(vs)), 200):
            sub = dict(zip(vs, combo))
            assert apply_subst(s, sub) != apply_subst(t, sub)
        return
    assert th.is_idempotent()
    assert apply_subst(s, th) == apply_subst(t, th)
    # any ground unifier factors through th
    vs = vars_of([s, t])
    for combo in itertools.islice(itertools.product(small, repeat=len(vs)), 200):
        g = dict(zip(vs, combo))
        if apply_subst(s, g) == apply_subst(t, g):
            for v in vs:
                assert apply_subst(apply_subst(v, th), g) == apply_subst(v, g)


@settings(max_examples=200, deadline=None)
@given(terms(), terms(), terms())
def test_variant_is_an_equivalence(s, t, u):
    ren = {Var("X"): Var("U1"), Var("Y"): Var("U2"), Var("Z"): Var("U3")}
    assert variant_eq(s, s)
    assert variant_eq(s, apply_subst(s, ren))
    assert variant_eq(s, t) == variant_eq(t, s)
    if variant_eq(s, t) and variant_eq(t, u):
        assert variant_eq(s, u)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(terms(), terms()), min_size=1, max_size=4))
def test_parse_print_roundtrip(pairs):
    text = "\n".join(f"p({term_str(s)}) :- q({term_str(t)})." for s, t in pairs)
    p = parse_program(text)
    again = parse_program(str(p))
    assert all(variant_eq(c1, c2) for c1, c2 in zip(p.clauses, again.clauses))
    assert len(p.clauses) == len(again.clauses)


@pytest.mark.parametrize("path", sorted(p.name for p in (load.__globals__["CORPUS"]).glob("*.pl")))
def test_corpus_roundtrip(path):
    p = load(path)
    q = parse_program(str(p))
    assert all(variant_eq(c1, c2) for c1, c2 in zip(p.clauses, q.clauses))
    assert p.directives == q.directives and p.modes == q.modes
