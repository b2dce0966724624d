from hypothesis import given, settings
from hypothesis import strategies as st

from gbts import zoo
from gbts.blocked import build_full_blocked_tree
from gbts.core import (
    Atom,
    AtomSet,
    Constant,
    Variable,
    apply_substitution,
    connected_components,
    has_homomorphism,
    homomorphisms,
)
from gbts.syntax import parse_atoms

from _util import brute_homomorphisms

a, b, c, d = (Constant(x) for x in "abcd")
x, y, z = (Variable(n) for n in "XYZ")


def q(text):
    return parse_atoms(text, "queries")


def test_interning_gives_identity():
    assert Variable("X") is x
    assert Constant("a") is a
    assert Variable("a") is not Constant("a")


def test_two_applications_of_the_chain_rule():
    target = q("r(a,b), r(c,d), p(d)")
    hs = list(homomorphisms(q("r(X,Y)"), target))
    assert hs == [{x: a, y: b}, {x: c, y: d}]


def test_empty_source_has_exactly_the_empty_map():
    assert list(homomorphisms(AtomSet(), q("p(a)"))) == [{}]


def test_seed_is_respected():
    target = q("r(a,b), r(c,d)")
    assert list(homomorphisms(q("r(X,Y)"), target, {x: c})) == [{x: c, y: d}]
    assert list(homomorphisms(q("r(X,Y)"), target, {x: b})) == []


def test_q1_does_not_map_into_the_blocked_tree():
    kb = zoo.kb("running_small")
    T = build_full_blocked_tree(kb)
    assert not has_homomorphism(zoo.q1(), T.atoms())


def test_apply_substitution_examples():
    assert apply_substitution({x: a}, q("p(X,X)")) == AtomSet([Atom("p", [a, a])])
    assert apply_substitution({}, q("p(a)")) == q("p(a)")
    assert apply_substitution({y: b}, q("r(X,Y), p(Y)")) == AtomSet([Atom("r", [x, b]), Atom("p", [b])])


def test_atomset_caches_match_recomputation():
    A = q("r(X,a), p(Y), r(X,a)")
    assert len(A) == 2
    assert A.vars() == {x, y}
    assert A.terms() == {x, y, a}
    assert A.constants() == {a}


def test_components():
    assert len(connected_components(q("p(X), q(Y)"))) == 2
    assert len(connected_components(q("p(X,a), q(Y,a)"))) == 2
    assert len(connected_components(q("p(X,Y), q(Y,Z)"))) == 1


# -- properties --------------------------------------------------------------

PREDS = {"p": 1, "r": 2, "s": 2}
src_terms = st.sampled_from([Variable(f"V{i}") for i in range(4)] + [a])
tgt_terms = st.sampled_from([a, b, c, Variable("_n1"), Variable("_n2")])


def atoms_over(terms, max_size):
    atom = st.sampled_from(sorted(PREDS)).flatmap(
        lambda p: st.lists(terms, min_size=PREDS[p], max_size=PREDS[p]).map(lambda args: Atom(p, args))
    )
    return st.lists(atom, min_size=0, max_size=max_size).map(AtomSet)


@settings(max_examples=150)
@given(atoms_over(src_terms, 4), atoms_over(tgt_terms, 7))
def test_homomorphisms_match_brute_force(A, B):
    got = {tuple(sorted((k.name, v.name) for k, v in h.items())) for h in homomorphisms(A, B)}
    want = {tuple(sorted((k.name, v.name) for k, v in h.items())) for h in brute_homomorphisms(A, B)}
    if not A.vars():
        want = {()} if A <= B else set()
    assert got == want


@settings(max_examples=100)
@given(atoms_over(src_terms, 3), atoms_over(tgt_terms, 4), atoms_over(tgt_terms, 6))
def test_homomorphisms_compose(A, B, C):
    for pi in homomorphisms(A, B):
        for sigma in homomorphisms(AtomSet(apply_substitution(pi, A)), C):
            comp = {v: sigma.get(t, t) for v, t in pi.items()}
            assert apply_substitution(comp, A) <= C
            assert has_homomorphism(A, C, comp)
            break
        break


@given(atoms_over(src_terms, 4), st.dictionaries(src_terms.filter(lambda t: t.is_var), st.sampled_from([a, b])))
def test_apply_substitution_idempotent_for_ground_images(A, s):
    once = apply_substitution(s, A)
    assert apply_substitution(s, once) == once


@given(atoms_over(src_terms, 5))
def test_components_partition_and_are_variable_disjoint(A):
    comps = connected_components(A)
    assert AtomSet().union(*comps) == A if comps else not A
    assert sum(len(cp) for cp in comps) == len(A)
    for i, c1 in enumerate(comps):
        for c2 in comps[i + 1:]:
            assert not (c1.vars() & c2.vars())
