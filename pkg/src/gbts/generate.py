"""Seeded random corpora: wfg knowledge bases, queries, body-acyclic fg rules."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, List, Sequence

from .chase import KnowledgeBase, Rule, k_saturation
from .classify import classify
from .core import Atom, AtomSet, Constant, Term, Variable, connected_components, term_key
from .rewrite import decomposition_graph, acyclic_covering, frontier_guards, is_guarded


@dataclass(frozen=True)
class Shape:
    """Size limits for generated knowledge bases."""

    max_rules: int = 4
    max_arity: int = 3
    max_facts: int = 6
    n_predicates: int = 4
    n_constants: int = 3
    max_body: int = 3
    max_head: int = 2
    p_existential: float = 0.6
    p_null: float = 0.0


def _signature(rng: random.Random, shape: Shape) -> Dict[str, int]:
    names = [f"p{i}" for i in range(shape.n_predicates)]
    sig = {n: rng.randint(1, shape.max_arity) for n in names}
    # at least one binary predicate so that rules can build chains
    if shape.max_arity >= 2 and all(a < 2 for a in sig.values()):
        sig[names[0]] = 2
    return sig


def _atom(rng: random.Random, pred: str, arity: int, pool: Sequence[Term]) -> Atom:
    return Atom(pred, [rng.choice(pool) for _ in range(arity)])


def random_rule(
    rng: random.Random,
    sig: Dict[str, int],
    rid: str,
    shape: Shape,
    consts: Sequence[Term] = (),
    reachable: Sequence[str] = (),
) -> Rule:
    """A rule whose body is variable-connected and mostly uses ``reachable`` predicates."""
    preds = sorted(sig)
    body_vars = [Variable(f"X{i}") for i in range(1, 5)]
    body: List[Atom] = []
    for _ in range(rng.randint(1, shape.max_body)):
        pool = list(reachable) if reachable and rng.random() < 0.85 else preds
        p = rng.choice(pool)
        seen = sorted(AtomSet(body).vars(), key=term_key)
        args: List[Term] = []
        for _ in range(sig[p]):
            known = seen + [a for a in args if a not in seen]
            if known and (len(known) >= len(body_vars) or rng.random() < 0.4):
                args.append(rng.choice(known))
            else:
                args.append(next(v for v in body_vars if v not in known))
        if seen and not set(args) & set(seen):
            args[rng.randrange(len(args))] = rng.choice(seen)
        body.append(Atom(p, args))
    used = sorted(AtomSet(body).vars(), key=term_key)
    head_pool: List[Term] = list(used)
    existential = rng.random() < shape.p_existential
    if existential:
        head_pool += [Variable("Z1"), Variable("Z2")][: rng.randint(1, 2)]
    if consts and rng.random() < 0.15:
        head_pool.append(rng.choice(consts))
    head: List[Atom] = []
    body_preds = sorted({a.predicate for a in body})
    for _ in range(rng.randint(1, shape.max_head)):
        # reusing a body predicate makes recursion (and infinite chases) likely
        p = rng.choice(body_preds if rng.random() < 0.5 else preds)
        a = _atom(rng, p, sig[p], head_pool)
        if not a.vars() & set(used):
            args = list(a.args)
            args[rng.randrange(len(args))] = rng.choice(used)
            a = Atom(p, args)
        if existential and not head:
            args = list(a.args)
            args[rng.randrange(len(args))] = Variable("Z1")
            if not a.vars() & set(used) or len(args) == 1:
                # keep a frontier variable next to the null when possible
                q = rng.choice([x for x in preds if sig[x] >= 2] or [p])
                args = [rng.choice(used), Variable("Z1")] + [rng.choice(head_pool) for _ in range(sig[q] - 2)]
                p = q
            a = Atom(p, args[: sig[p]])
        head.append(a)
    return Rule(rid, body, head)


def random_fact(rng: random.Random, sig: Dict[str, int], shape: Shape) -> AtomSet:
    consts: List[Term] = [Constant(c) for c in "abcdefgh"[: shape.n_constants]]
    pool = list(consts)
    if shape.p_null > 0 and rng.random() < shape.p_null:
        pool.append(Variable("_n1"))
    preds = sorted(sig)
    atoms = {_atom(rng, p, sig[p], pool) for p in (rng.choice(preds) for _ in range(rng.randint(1, shape.max_facts)))}
    return AtomSet(atoms)


def random_kb(
    rng: random.Random,
    shape: Shape = Shape(),
    label: str = "wfg",
    attempts: int = 200,
) -> KnowledgeBase:
    """A random KB whose rule set carries ``label`` (rejection sampling)."""
    for _ in range(attempts):
        sig = _signature(rng, shape)
        fact = random_fact(rng, sig, shape)
        consts = sorted(fact.constants(), key=term_key)
        n = rng.randint(1, shape.max_rules)
        reachable = sorted({a.predicate for a in fact})
        rules = []
        for i in range(n):
            r = random_rule(rng, sig, f"R{i + 1}", shape, consts, reachable)
            rules.append(r)
            reachable = sorted(set(reachable) | {a.predicate for a in r.head})
        if classify(rules).has(label):
            return KnowledgeBase(fact, tuple(rules))
    raise RuntimeError(f"no {label} rule set found in {attempts} attempts")


def random_query(rng: random.Random, kb: KnowledgeBase, max_atoms: int = 3, depth: int = 2) -> AtomSet:
    """A Boolean CQ over the KB's vocabulary, connected through its terms.

    Atoms linked only by a constant are variable-disjoint, so the query
    may have several components.

    Half of the time it generalizes a connected piece of a chase prefix,
    so positive answers are common; otherwise it is built at random.
    """
    if rng.random() < 0.5:
        atoms = sorted(k_saturation(kb, depth, cap_atoms=5000))
        if atoms:
            seed = rng.choice(atoms)
            chosen = [seed]
            for _ in range(rng.randint(0, max_atoms - 1)):
                touching = [a for a in atoms if a not in chosen and a.terms() & AtomSet(chosen).terms()]
                if not touching:
                    break
                chosen.append(rng.choice(touching))
            ren: Dict[Term, Term] = {}
            for t in sorted(AtomSet(chosen).terms(), key=term_key):
                if t.is_var or rng.random() < 0.7:
                    ren[t] = Variable(f"Y{len(ren) + 1}")
                else:
                    ren[t] = t
            return AtomSet(Atom(a.predicate, [ren[t] for t in a.args]) for a in chosen)
    sig: Dict[str, int] = {}
    for a in kb.fact:
        sig[a.predicate] = a.arity
    for r in kb.rules:
        for a in r.body | r.head:
            sig[a.predicate] = a.arity
    preds = sorted(sig)
    pool = [Variable(f"Y{i}") for i in range(1, 4)]
    atoms = [_atom(rng, p, sig[p], pool) for p in (rng.choice(preds) for _ in range(rng.randint(1, max_atoms)))]
    comps = connected_components(atoms)
    return max(comps, key=len) if comps else AtomSet(atoms)


def random_queries(rng: random.Random, kb: KnowledgeBase, n: int = 3, max_atoms: int = 3) -> List[AtomSet]:
    return [random_query(rng, kb, max_atoms) for _ in range(n)]


# --------------------------------------------------------------------------
# body-acyclic frontier-guarded rules


def random_ba_rule(rng: random.Random, rid: str = "R", max_nodes: int = 3, attempts: int = 200) -> Rule:
    """A non-guarded, variable-connected, body-acyclic fg rule.

    The body is grown as a tree of guard atoms, each sharing some variables
    with its parent, plus smaller atoms guarded inside each node.
    """
    for _ in range(attempts):
        counter = iter(range(1, 100))
        fresh = lambda: Variable(f"X{next(counter)}")
        n = rng.randint(2, max_nodes)
        guards: List[List[Term]] = []
        body: List[Atom] = []
        for i in range(n):
            if i == 0:
                gv = [fresh() for _ in range(rng.randint(2, 3))]
            else:
                parent = guards[rng.randrange(i)]
                shared = rng.sample(parent, rng.randint(1, len(parent) - 1))
                gv = shared + [fresh() for _ in range(rng.randint(1, 2))]
            guards.append(gv)
            body.append(Atom(f"g{len(gv)}", gv))
            for _ in range(rng.randint(0, 2)):
                k = rng.randint(1, min(2, len(gv)))
                sub = rng.sample(gv, k)
                body.append(Atom(f"s{k}", sub))
        root = guards[0]
        frontier = rng.sample(root, rng.randint(1, len(root)))
        head = [Atom("h", frontier + [Variable("Z")])] if rng.random() < 0.5 else [Atom(f"t{len(frontier)}", frontier)]
        r = Rule(rid, body, head)
        if is_guarded(r) or not frontier_guards(r):
            continue
        if acyclic_covering(decomposition_graph(r.body)) is None:
            continue
        return r
    raise RuntimeError("no body-acyclic rule found")


def ba_kb(rng: random.Random, rule: Rule, n_facts: int = 8, n_constants: int = 3) -> KnowledgeBase:
    """Facts over the rule's body predicates, seeded with a homomorphic copy of the body."""
    consts = [Constant(c) for c in "abcdefgh"[:n_constants]]
    sig = {a.predicate: a.arity for a in rule.body}
    if rng.random() < 0.6:
        img = {v: rng.choice(consts) for v in sorted(rule.body.vars(), key=term_key)}
        atoms = {Atom(a.predicate, [img[t] for t in a.args]) for a in rule.body}
        # perturb so that the match sometimes breaks
        if rng.random() < 0.5 and atoms:
            atoms.discard(rng.choice(sorted(atoms)))
    else:
        atoms = set()
    preds = sorted(sig)
    while len(atoms) < n_facts:
        p = rng.choice(preds)
        atoms.add(_atom(rng, p, sig[p], consts))
    return KnowledgeBase(AtomSet(atoms), (rule,))


def ba_queries(rng: random.Random, rule: Rule, n: int = 3) -> List[AtomSet]:
    """Queries on the head vocabulary, sometimes chained with body predicates."""
    out = []
    for _ in range(n):
        h = sorted(rule.head)[0]
        vs = [Variable(f"Y{i}") for i in range(1, h.arity + 1)]
        q = [Atom(h.predicate, vs)]
        if rng.random() < 0.5:
            b = rng.choice(sorted(rule.body))
            args = [rng.choice(vs + [Variable("Y9")]) for _ in range(b.arity)]
            args[0] = vs[0]
            q.append(Atom(b.predicate, args))
        out.append(AtomSet(q))
    return out
