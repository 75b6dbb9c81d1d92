import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CORPUS, load
from termlog.callset import (
    AbstractAtom,
    AbstractTerm,
    call_set_covers,
    infer_call_set,
    is_stable,
    join,
    leq,
    query_patterns,
    rigidity_requirements,
)
from termlog.interpreter import FiniteTree, ld_explore, sample_queries
from termlog.orders import PositionFamily
from termlog.syntax import Symbol, UnknownPredicate, parse_program

G, F, NLG, NLA, ANY = (
    AbstractTerm.GROUND,
    AbstractTerm.FREE,
    AbstractTerm.NILLIST_GROUND,
    AbstractTerm.NILLIST_ANY,
    AbstractTerm.ANY,
)
ALL = list(AbstractTerm)
CORPUS_FILES = sorted(p.name for p in CORPUS.glob("*.pl"))
PERMUTE, DELETE, CONS = Symbol("permute", 2), Symbol("delete", 3), Symbol(".", 2)


def _show(cs):
    return {str(a) for a in cs}


def test_permute_call_set():
    cs = infer_call_set(load("permute.pl"))
    assert _show(cs) == {"permute(NilListGround, Free)", "delete(Free, NilListGround, Free)"}


def test_permute_with_open_lists_ignores_list_elements():
    p = parse_program(load("permute.pl").__str__().replace("nillist_ground", "nillist"))
    cs = infer_call_set(p)
    assert _show(cs) == {"permute(NilListAny, Free)", "delete(Free, NilListAny, Free)"}
    rr = rigidity_requirements(cs, p)
    assert rr.ignored_pred == PositionFamily.of({PERMUTE: {2}, DELETE: {1, 3}})
    assert rr.ignored_fun == PositionFamily.of({CONS: {1}})


def test_ground_permute_lists_need_no_functor_filter():
    rr = rigidity_requirements(infer_call_set(load("permute.pl")))
    assert rr.ignored_pred == PositionFamily.of({PERMUTE: {2}, DELETE: {1, 3}})
    assert rr.ignored_fun == PositionFamily()


def test_derivative_call_set_and_rigidity():
    p = load("derivative.pl")
    cs = infer_call_set(p)
    d = cs.get(Symbol("d", 2))
    assert str(d) == "d(Ground, Free)"
    rr = rigidity_requirements(cs, p)
    assert rr.ignored_pred == PositionFamily.of({Symbol("d", 2): {2}})
    assert rr.ignored_fun == PositionFamily()


def test_fact_only_program():
    p = parse_program("%% query: p(ground).\np(a).\np(b).")
    cs = infer_call_set(p)
    assert _show(cs) == {"p(Ground)"}
    rr = rigidity_requirements(cs, p)
    assert rr.ignored_pred == PositionFamily() and rr.ignored_fun == PositionFamily()


def test_missing_patterns_and_unknown_predicates():
    with pytest.raises(ValueError):
        infer_call_set(parse_program("p(a)."))
    with pytest.raises(UnknownPredicate):
        infer_call_set(parse_program("%% query: q(ground).\np(a)."))


# ------------------------------------------------------------ lattice


def test_lattice_order_examples():
    assert leq(NLG, NLA) and leq(NLA, ANY) and leq(G, ANY) and leq(F, ANY) and leq(NLG, G)
    assert not leq(F, G) and not leq(NLA, G)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(ALL), st.sampled_from(ALL), st.sampled_from(ALL))
def test_join_is_least_upper_bound(a, b, c):
    j = join(a, b)
    assert leq(a, j) and leq(b, j)
    assert join(a, b) == join(b, a)
    if leq(a, c) and leq(b, c):
        assert leq(j, c)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(ALL), st.sampled_from(ALL), st.sampled_from(ALL))
def test_leq_is_a_partial_order(a, b, c):
    assert leq(a, a)
    if leq(a, b) and leq(b, a):
        assert a == b
    if leq(a, b) and leq(b, c):
        assert leq(a, c)


# ------------------------------------------------------------ properties over the corpus


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_fixpoint_is_stable(name):
    assert is_stable(load(name))


def _pointwise_leq(small, big):
    for a in small:
        b = big.get(a.pred)
        if b is None or not all(leq(x, y) for x, y in zip(a.args, b.args)):
            return False
    return True


def _enlargements(pattern):
    ups = [[b for b in ALL if leq(a, b)] for a in pattern.args]
    for combo in itertools.product(*ups):
        yield AbstractAtom(pattern.pred, combo)


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_enlarging_patterns_never_shrinks(name):
    p = load(name)
    pats = query_patterns(p)
    base = infer_call_set(p, pats)
    for bigger in itertools.islice(_enlargements(pats[0]), 30):
        assert _pointwise_leq(base, infer_call_set(p, [bigger] + pats[1:]))
        assert _pointwise_leq(base, infer_call_set(p, pats + [bigger]))


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_call_set_covers_every_selected_atom(name):
    """Soundness against concrete LD-derivations from sampled queries."""
    p = load(name)
    cs = infer_call_set(p)
    queries = sample_queries(p, query_patterns(p), 20, 4, seed=1)
    assert queries
    for q in queries:
        trace = []
        res = ld_explore(p, q, 200, trace)
        assert isinstance(res, FiniteTree)
        for node in trace:
            if node.selected is not None:
                assert call_set_covers(cs, node.selected), (q, node.selected)
