"""Helpers shared by the test modules: independent oracles and renaming-aware comparisons."""

from __future__ import annotations

import itertools
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from gbts.chase import KnowledgeBase, Rule
from gbts.core import Atom, AtomSet, Term, Variable


def var(rule: Rule, name: str) -> Term:
    """The variable of ``rule`` printed as ``name`` (rules may be renamed apart)."""
    for v in rule.variables():
        if v.name == name:
            return v
    raise KeyError(name)


def brute_homomorphisms(source: Iterable[Atom], target: Iterable[Atom]) -> List[Dict[Term, Term]]:
    """Every homomorphism by trying all maps vars(source) -> terms(target)."""
    source, target = AtomSet(source), AtomSet(target)
    vs = sorted(source.vars(), key=lambda t: t.name)
    ts = sorted(target.terms(), key=lambda t: t.name)
    out = []
    for img in itertools.product(ts, repeat=len(vs)):
        h = dict(zip(vs, img))
        if all(Atom(a.predicate, [h.get(t, t) for t in a.args]) in target for a in source):
            out.append(h)
    return out


def naive_matches(body: Sequence[Atom], atoms: Iterable[Atom], h: Optional[Dict[Term, Term]] = None):
    """Plain left-to-right backtracking over the body atoms (no indexing)."""
    h = {} if h is None else h
    if not body:
        yield dict(h)
        return
    first, rest = body[0], body[1:]
    for cand in atoms:
        if cand.predicate != first.predicate or cand.arity != first.arity:
            continue
        ext = dict(h)
        ok = True
        for s, t in zip(first.args, cand.args):
            if not s.is_var:
                ok = s is t
            elif ext.setdefault(s, t) is not t:
                ok = False
            if not ok:
                break
        if ok:
            yield from naive_matches(rest, atoms, ext)


def naive_chase(kb: KnowledgeBase, depth: int) -> AtomSet:
    """Textbook breadth-first (oblivious) chase: every trigger of round i is
    computed against the atoms of round i-1 and fires once per frontier image."""
    atoms = set(kb.fact)
    fired = set()
    n = 0
    for _ in range(depth):
        new = set()
        snapshot = AtomSet(atoms)
        for r in kb.rules:
            fr = sorted(r.frontier, key=lambda t: t.name)
            for h in naive_matches(sorted(r.body, key=repr), list(snapshot)):
                key = (r.id, tuple(h[x] for x in fr))
                if key in fired:
                    continue
                fired.add(key)
                sub = {x: h[x] for x in fr}
                for z in sorted(r.existentials, key=lambda t: t.name):
                    n += 1
                    sub[z] = Variable(f"_nz{n}")
                new |= {Atom(a.predicate, [sub.get(t, t) for t in a.args]) for a in r.head}
        if not new - atoms:
            break
        atoms |= new
    return AtomSet(atoms)


def _iso(a: Sequence[Atom], b: Sequence[Atom], fixed_preds: Iterable[str], m: Dict, p: Dict) -> Optional[Tuple[Dict, Dict]]:
    """Extend term map m and predicate map p so that a maps bijectively onto b.

    ``p`` sends a non-fixed predicate to (predicate, argument permutation):
    renaming a fresh predicate may also reorder its arguments.
    """
    if not a:
        return m, p
    first, rest = a[0], a[1:]
    for j, cand in enumerate(b):
        if cand.arity != first.arity:
            continue
        if first.predicate in fixed_preds:
            if cand.predicate != first.predicate:
                continue
            perms = [tuple(range(first.arity))]
        elif first.predicate in p:
            if p[first.predicate][0] != cand.predicate:
                continue
            perms = [p[first.predicate][1]]
        elif cand.predicate in fixed_preds or cand.predicate in {q for q, _ in p.values()}:
            continue
        else:
            perms = list(itertools.permutations(range(first.arity)))
        for perm in perms:
            m2 = dict(m)
            ok = True
            for k, s in enumerate(first.args):
                t = cand.args[perm[k]]
                if s.is_var != t.is_var or (not s.is_var and s is not t):
                    ok = False
                    break
                if m2.get(s, t) is not t or (s not in m2 and t in m2.values()):
                    ok = False
                    break
                m2[s] = t
            if not ok:
                continue
            p2 = dict(p)
            if first.predicate not in fixed_preds:
                p2[first.predicate] = (cand.predicate, perm)
            res = _iso(rest, b[:j] + b[j + 1:], fixed_preds, m2, p2)
            if res is not None:
                return res
    return None


def rules_equal_up_to_renaming(got: Sequence[Rule], want: Sequence[Rule], fixed_preds: Iterable[str]) -> bool:
    """True when some rule order, variable renaming per rule and one global
    renaming of the non-fixed predicates (arguments may be permuted) turn
    ``got`` into ``want``."""
    fixed = set(fixed_preds)
    if len(got) != len(want):
        return False
    for perm in itertools.permutations(range(len(got))):
        p: Dict[str, tuple] = {}
        ok = True
        for i, j in enumerate(perm):
            g, w = got[i], want[j]
            res = _iso(g.body.sorted(), w.body.sorted(), fixed, {}, p)
            if res is None:
                ok = False
                break
            m, p = res
            res = _iso(g.head.sorted(), w.head.sorted(), fixed, m, p)
            if res is None:
                ok = False
                break
            m, p = res
        if ok:
            return True
    return False


def tree_isomorphisms(parent_a: Dict[int, Optional[int]], parent_b: Dict[int, Optional[int]], label_a, label_b):
    """All bijections ids(a) -> ids(b) preserving parents and labels (brute force)."""
    ids_a, ids_b = sorted(parent_a), sorted(parent_b)
    if len(ids_a) != len(ids_b):
        return []
    out = []
    for perm in itertools.permutations(ids_b):
        phi = dict(zip(ids_a, perm))
        if all(label_a(i) == label_b(phi[i]) for i in ids_a) and all(
            (parent_a[i] is None and parent_b[phi[i]] is None)
            or (parent_a[i] is not None and parent_b[phi[i]] == phi[parent_a[i]])
            for i in ids_a
        ):
            out.append(phi)
    return out
