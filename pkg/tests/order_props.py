"""Property suites for term orders, shared by the order tests and the acceptance suite.

Each check returns a list of violations; an empty list means the property held
on every sampled case.
"""

import random
from graphlib import CycleError, TopologicalSorter

from termlog.orders import (
    Comparison,
    NormBased,
    PositionFamily,
    PropertyAbstract,
    Rpo,
    brute_force_rigid,
    brute_force_vrel,
    char_fn,
    compare,
    enumerate_terms,
    equal_under,
    families,
    full_family,
    is_rigid,
    list_length_norm,
    m_set,
    precedence_chain,
    s_set,
    term_size_norm,
)
from termlog.syntax import (
    Compound,
    Symbol,
    Var,
    is_ground,
    positions,
    replace_at,
    subterm_at,
    var_occurrences,
)

A, NIL, F, CONS = Symbol("a", 0), Symbol("[]", 0), Symbol("f", 1), Symbol(".", 2)
SIG = (A, NIL, F, CONS)
VARS = (Var("X"), Var("Y"), Var("Z"))
GT = Comparison.GREATER


def term_pool(max_size=5):
    return enumerate_terms(SIG, max_size, VARS)


def ground_pool(max_size):
    return enumerate_terms(SIG, max_size)


def shipped_orders():
    """Every kind of concrete order the solver can emit, instantiated on the test signature."""
    return {
        "rpo-lex": Rpo(precedence_chain([CONS, F, A, NIL])),
        "rpo-mul": Rpo(precedence_chain([F, CONS, NIL, A]), frozenset({CONS})),
        "rpo-filtered": Rpo(precedence_chain([CONS, F, A, NIL]), ignored=PositionFamily.of({CONS: {1}})),
        "listlen": NormBased(list_length_norm()),
        "termsize": NormBased(term_size_norm(SIG)),
    }


def _gt(spec, s, t):
    return compare(spec, s, t) == GT


# ------------------------------------------------------------ order axioms


def strict_order_violations(spec, pool, triples=4000, seed=0):
    out = []
    for s in pool:
        if _gt(spec, s, s):
            out.append(("irreflexive", s))
    rng = random.Random(seed)
    for _ in range(triples):
        s, t, u = rng.choice(pool), rng.choice(pool), rng.choice(pool)
        st, ts = _gt(spec, s, t), _gt(spec, t, s)
        if st and ts:
            out.append(("asymmetric", s, t))
        if st and _gt(spec, t, u) and not _gt(spec, s, u):
            out.append(("transitive", s, t, u))
    return out


def cycle_violations(spec, pool):
    """Greater restricted to the pool, as a graph, has no cycle."""
    ts = TopologicalSorter()
    for i, s in enumerate(pool):
        ts.add(i)
        for j, t in enumerate(pool):
            if i != j and _gt(spec, s, t):
                ts.add(i, j)
    try:
        ts.prepare()
    except CycleError as e:
        return [("cycle", [pool[k] for k in e.args[1]])]
    return []


# ------------------------------------------------------------ lemma suites


def prefix_zero_violations(pool, fams):
    out = []
    for s in pool:
        paths = [p for p, _ in positions(s)]
        for fam in fams:
            for v in paths:
                if char_fn(s, v, fam) != 0:
                    continue
                for w in paths:
                    if w[: len(v)] == v and char_fn(s, w, fam) != 0:
                        out.append((s, v, w))
    return out


def mon_violations(spec, pool, grounds):
    """Replacing a monotone variable occurrence by larger terms gives a larger term."""
    mono, _ = families(spec, SIG)
    pairs = [(t1, t2) for t1 in grounds for t2 in grounds if _gt(spec, t1, t2)]
    out = []
    for s in pool:
        for path, _ in var_occurrences(s):
            if char_fn(s, path, mono) != 1:
                continue
            for t1, t2 in pairs:
                if not _gt(spec, replace_at(s, path, t1), replace_at(s, path, t2)):
                    out.append((s, path, t1, t2))
    return out


def sub_violations(spec, pool):
    """A subterm reachable through subterm positions is strictly smaller."""
    _, sub = families(spec, SIG)
    out = []
    for s in pool:
        for path, _ in positions(s):
            if path and char_fn(s, path, sub) == 1 and not _gt(spec, s, subterm_at(s, path)):
                out.append((s, path))
    return out


def _induced(s, vs):
    return {p for p, v in var_occurrences(s) if v in vs}


def replacement_terms():
    return enumerate_terms(SIG, 3, (Var("W"),))


def subset_violations(spec, pool):
    """Occurrences of S-variables, and of M-variables, are relevant."""
    same = lambda x, y: equal_under(spec, x, y)
    repl = replacement_terms()
    out = []
    for s in pool:
        if is_ground(s):
            continue
        rel = brute_force_vrel(same, s, repl)
        for which, vs in (("S", s_set(spec, s, SIG)), ("M", m_set(spec, s, SIG))):
            extra = _induced(s, vs) - rel
            if extra:
                out.append((which, s, sorted(extra)))
    return out


def full_degeneration_violations(pool):
    """Under full monotone and subterm families, rigid exactly when ground."""
    full = full_family(SIG)
    abstract = PropertyAbstract(monotone=full, subterm=full)
    rpo = shipped_orders()["rpo-lex"]
    same = lambda x, y: equal_under(rpo, x, y)
    small = ground_pool(2) + [Var("W")]
    out = []
    for s in pool:
        g = is_ground(s)
        if is_rigid(abstract, s) != g:
            out.append(("abstract", s))
        if brute_force_rigid(same, s, small) != g:
            out.append(("brute force", s))
    return out


# ------------------------------------------------------------ balance norm

TREE, VOID = Symbol("tree", 3), Symbol("void", 0)


def balance_norm(t) -> int:
    if isinstance(t, Compound) and t.sym == TREE and t.args[0] == Compound(A):
        return 0 if t.args[1] == t.args[2] else 1
    return 0


def balance_fixture():
    """(rigid by brute force, relevant occurrences) for tree(a,X,X) under the balance norm."""
    X = Var("X")
    s = Compound(TREE, (Compound(A), X, X))
    same = lambda x, y: balance_norm(x) == balance_norm(y)
    pool = enumerate_terms({A, VOID, TREE}, 4, (Var("W"),))
    return brute_force_rigid(same, s, pool), brute_force_vrel(same, s, pool)


# ------------------------------------------------------------ all of it


def lemma_suite(pool=None):
    """Violation counts of every lemma property over the enumerated pool."""
    pool = pool if pool is not None else term_pool()
    grounds = ground_pool(3)
    orders = shipped_orders()
    fams = [PositionFamily.of({CONS: {2}, F: {1}}), PositionFamily.of({CONS: {1}}), full_family(SIG)]
    report = {"pool": len(pool), "prefix-zero": len(prefix_zero_violations(pool, fams))}
    for name, spec in orders.items():
        report[f"mon/{name}"] = len(mon_violations(spec, pool, grounds))
        report[f"sub/{name}"] = len(sub_violations(spec, pool))
        report[f"subset/{name}"] = len(subset_violations(spec, pool))
    report["full-degeneration"] = len(full_degeneration_violations(pool))
    rigid, rel = balance_fixture()
    report["balance"] = 0 if rigid and len(rel) == 2 else 1
    return report
