import random

from hypothesis import given, settings
from hypothesis import strategies as st

from gbts import zoo
from gbts.classify import LABELS, affected_positions, affected_variables, classify, is_guard
from gbts.core import Atom, Variable
from gbts.generate import Shape, random_rule
from gbts.syntax import parse

X, Y, Z = (Variable(n) for n in "XYZ")


def rules(text):
    return parse("@rules\n" + text).kb().rules


def test_project_affected_positions():
    rep = classify(zoo.kb("project").rules)
    assert rep.affected == {
        ("hasManager", 1), ("hasManager", 2),
        ("projectField", 1), ("projectField", 2),
        ("isSensitiveField", 1), ("isCriticalManager", 1), ("memberOf", 1),
    }
    assert rep.labels == {"wfg", "wfr1"}


def test_project_rule_flags():
    rep = classify(zoo.kb("project").rules)
    r4 = rep.rules["R4"]
    assert r4["frontier_one"] and not r4["guarded"] and not r4["weakly_guarded"]
    r3 = rep.rules["R3"]
    assert not r3["frontier_guarded"] and r3["weakly_frontier_guarded"]
    assert {v.name for v in rep.affected_vars["R3"]} == {"Y_3"}


def test_datalog_rules_have_no_affected_positions():
    rs = rules("T: e(X,Y), e(Y,Z) -> e(X,Z).")
    rep = classify(rs)
    assert rep.affected == frozenset()
    assert rep.has("datalog") and rep.has("wg") and not rep.has("fg")


def test_empty_rule_set_has_every_label():
    assert classify([]).labels == frozenset(LABELS)


def test_empty_frontier_is_reported_and_not_frontier_one():
    rep = classify(rules("A: p(X) -> q(Y)."))
    assert rep.empty_frontier == ("A",)
    assert not rep.has("fr1") and rep.has("wfr1") and rep.has("g")


def test_is_guard():
    assert is_guard(Atom("r", [X, Y]), [X, Y])
    assert is_guard(Atom("r", [X, Y]), [])
    assert not is_guard(Atom("r", [X, X]), [X, Y])


def test_affected_variables_need_all_occurrences_affected():
    (r,) = rules("A: p(X, Y), q(Y) -> s(X).")
    assert affected_variables(r, {("p", 1), ("p", 2)}) == {r.body.sorted()[0].args[0]}


def test_not_wfg_example():
    rep = classify(zoo.kb("not_wfg").rules)
    assert not rep.has("wfg")
    assert {("r1", 1), ("r1", 2), ("r2", 1), ("r2", 2)} <= rep.affected


# -- properties --------------------------------------------------------------

# label -> labels it implies
IMPLIES = {
    "gfr1": {"g", "fr1", "wgfr1"},
    "g": {"fg", "wg"},
    "fr1": {"fg", "wfr1"},
    "fg": {"wfg"},
    "wgfr1": {"wg", "wfr1"},
    "wg": {"wfg"},
    "wfr1": {"wfg"},
    "datalog": {"wg", "wfr1"},
}

SIG = {"p": 1, "r": 2, "t": 3}


def random_rules(seed, n):
    rng = random.Random(seed)
    shape = Shape(max_body=3, max_head=2, p_existential=0.7)
    return [random_rule(rng, SIG, f"R{i}", shape) for i in range(n)]


def reference_affected(rs):
    """Fixpoint recomputed from scratch each round."""
    aff = {(a.predicate, i + 1) for r in rs for a in r.head for i, t in enumerate(a.args) if t in r.existentials}
    while True:
        nxt = set(aff)
        for r in rs:
            for x in r.frontier:
                occ = [(a.predicate, i + 1) for a in r.body for i, t in enumerate(a.args) if t is x]
                if all(p in aff for p in occ):
                    nxt |= {(a.predicate, i + 1) for a in r.head for i, t in enumerate(a.args) if t is x}
        if nxt == aff:
            return aff
        aff = nxt


@settings(max_examples=200)
@given(st.integers(0, 100_000), st.integers(1, 4))
def test_labels_respect_the_fragment_lattice(seed, n):
    labels = classify(random_rules(seed, n)).labels
    for lab, implied in IMPLIES.items():
        if lab in labels:
            assert implied <= labels, (lab, labels)


@settings(max_examples=200)
@given(st.integers(0, 100_000), st.integers(1, 4))
def test_affected_positions_match_reference_and_are_monotone(seed, n):
    rs = random_rules(seed, n)
    aff = affected_positions(rs)
    assert aff == reference_affected(rs)
    assert affected_positions(rs[:-1]) <= aff
