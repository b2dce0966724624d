import itertools
import random

import pytest

from gbts import zoo
from gbts.blocked import build_full_blocked_tree
from gbts.chase import oracle_entails
from gbts.core import apply_substitution, has_homomorphism
from gbts.errors import BudgetExceeded, GbtsError, NotGreedy
from gbts.generate import Shape, random_kb, random_queries
from gbts.query import (
    APT,
    APTMapping,
    APTNode,
    answer,
    answer_in_tree,
    apt_count,
    entails,
    enumerate_apts,
    path_bound,
    prepare,
    validate_apt,
)
from gbts.syntax import parse_atoms


def q(text):
    return parse_atoms(text, "queries")


@pytest.fixture(scope="module")
def small_tree():
    return prepare(zoo.kb("running_small"))


# -- APT enumeration ---------------------------------------------------------


def brute_apt_count(n):
    """Set partitions by restricted growth strings, trees by checking every
    parent function on the blocks."""
    total = 0
    for rgs in itertools.product(range(n), repeat=n):
        if any(rgs[i] > max(rgs[:i], default=-1) + 1 for i in range(n)):
            continue
        k = max(rgs) + 1
        for par in itertools.product(range(-1, k), repeat=k):
            if par.count(-1) != 1 or any(par[i] == i for i in range(k)):
                continue
            ok = True
            for i in range(k):
                seen, j = set(), i
                while par[j] != -1:
                    if j in seen:
                        ok = False
                        break
                    seen.add(j)
                    j = par[j]
                if not ok:
                    break
            total += ok
    return total


def test_single_atom_apts():
    apts = list(enumerate_apts(q("p(X)")))
    assert len(apts) == 3 == apt_count(2)
    # the merged node, and the two orientations of {p(X)} / {X}
    assert sorted(len(a.nodes) for a in apts) == [1, 2, 2]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_apt_count_matches_brute_force(n):
    assert apt_count(n) == brute_apt_count(n)


@pytest.mark.parametrize("text", ["p(X)", "r(X,Y)", "r(X,Y), s(Y)", "r(X,a), s(X)"])
def test_enumerated_apts_are_distinct_partitions(text):
    Q = q(text)
    apts = list(enumerate_apts(Q))
    assert len(apts) == apt_count(len(Q) + len(Q.terms()))
    assert len({a.canonical() for a in apts}) == len(apts)
    assert all(a.is_partition_of(Q) for a in apts)


def test_apt_needs_a_root_at_zero():
    n = APTNode(frozenset(), frozenset())
    with pytest.raises(GbtsError):
        APT((n, n), (0, None))


# -- validation --------------------------------------------------------------


def all_mappings(T, apt):
    """Every Π and every π_i into the created terms of the chosen bags."""
    for Pi in itertools.product(range(len(T.bags)), repeat=len(apt.nodes)):
        choices = []
        for node, bi in zip(apt.nodes, Pi):
            terms = sorted(node.terms, key=lambda t: t.name)
            created = sorted(T.bags[bi].generated, key=lambda t: t.name)
            choices.append([dict(zip(terms, img)) for img in itertools.product(created, repeat=len(terms))])
        for pis in itertools.product(*choices):
            yield APTMapping(tuple(Pi), tuple(pis))


@pytest.mark.parametrize("text", ["r(X,Y)", "p2(X), i(X)", "r(c,Y)", "s(X,X)", "s(c,Y)"])
def test_exhaustive_validation_agrees_with_the_oracle(small_tree, text):
    T, Q = small_tree, q(text)
    proofs = 0
    for apt in enumerate_apts(Q):
        for gamma in all_mappings(T, apt):
            proof = validate_apt(T, apt, gamma)
            if proof is None:
                continue
            proofs += 1
            G, _, theta = proof.generated_tree()
            assert apply_substitution(theta, Q) <= G.atoms()
            assert all(n <= path_bound(T) for n in proof.lengths.values())
    expected = oracle_entails(T.kb, Q, 6) == "yes"
    assert (proofs > 0) == expected
    assert answer_in_tree(T, Q).entailed == expected


def test_witness_for_the_long_query(small_tree):
    Q1 = zoo.q1()
    ans = answer_in_tree(small_tree, Q1)
    (w,) = ans.witnesses
    assert w.apt.is_partition_of(Q1)
    assert validate_apt(small_tree, w.apt, w.gamma) is not None
    assert all(n >= 1 for i, n in w.proof.lengths.items() if w.apt.parent[i] is not None)
    # moving the root to a bag of another class breaks the mapping
    other = next(b.index for b in small_tree.bags if b.pattern != small_tree.bags[w.gamma.Pi[0]].pattern)
    bad = APTMapping((other,) + w.gamma.Pi[1:], w.gamma.pis)
    assert validate_apt(small_tree, w.apt, bad) is None
    d = w.to_dict()
    assert len(d["apt"]) == len(w.apt.nodes)


def test_validation_rejects_wrong_shapes(small_tree):
    (w,) = answer_in_tree(small_tree, q("r(c,Y)")).witnesses
    assert validate_apt(small_tree, w.apt, APTMapping(w.gamma.Pi[:-1], w.gamma.pis[:-1])) is None


# -- answering ---------------------------------------------------------------


def test_query_inside_the_fact():
    kb = zoo.kb("running_small")
    assert entails(kb, kb.fact)
    assert entails(kb, q("i(X), p1(X)"))


def test_foreign_constant_is_never_entailed():
    assert not entails(zoo.kb("running_small"), q("r(zz, Y)"))
    assert not answer(zoo.kb("running_small"), q("r(zz, Y)"), "rule").entailed


def test_disconnected_query_needs_every_component():
    kb = zoo.kb("running_small")
    ans = answer(kb, q("r(c,Y), s(Z,T), r(T,U)"))
    assert ans.entailed and len(ans.witnesses) == 2
    assert oracle_entails(kb, q("s(Z,T), s(T,U)"), 6) == "no_up_to_depth"
    assert not entails(kb, q("r(c,Y), s(Z,T), s(T,U)"))
    assert not entails(kb, q("r(c,Y), h(Z)"))


def test_unknown_mode():
    with pytest.raises(GbtsError):
        answer(zoo.kb("chain"), q("r(X,Y)"), mode="magic")


def test_non_greedy_rule_sets_are_refused():
    with pytest.raises(NotGreedy):
        answer(zoo.kb("non_greedy"), zoo.query("non_greedy"))


def test_modes_agree_with_each_other_and_the_oracle():
    compared = 0
    for seed in range(40):
        rng = random.Random(3000 + seed)
        kb = random_kb(rng, Shape(max_rules=3, max_facts=4))
        try:
            T = prepare(kb, cap_patterns=3_000, cap_bags=300)
        except BudgetExceeded:
            continue
        for Q in random_queries(rng, kb, 2):
            try:
                via_rule = answer(kb, Q, "rule", cap_patterns=3_000, cap_bags=300).entailed
            except BudgetExceeded:
                continue
            via_apt = answer_in_tree(T, Q).entailed
            assert via_apt == via_rule, (seed, Q)
            if oracle_entails(kb, Q, 4, cap_atoms=20_000) == "yes":
                assert via_apt, (seed, Q)
            compared += 1
    assert compared >= 30


def test_blocked_tree_atoms_are_entailed(small_tree):
    assert has_homomorphism(small_tree.atoms(), build_full_blocked_tree(small_tree.kb).atoms())
    assert entails(small_tree.kb, small_tree.atoms())
