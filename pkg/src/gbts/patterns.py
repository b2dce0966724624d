"""Bag patterns, joins, abstract bags/patterns and pattern saturation.

An *element* of a pattern is a triple ``(rule_index, mask, pi)`` where
``mask`` selects a subset of the (sorted) body atoms of the rule and ``pi``
is a sorted tuple of ``(variable, term)`` pairs.  The empty element
``(∅, ∅)`` belongs to every pattern and is never stored.
"""

from __future__ import annotations

import heapq
from operator import itemgetter
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .chase import Bag, Derivation, DerivationTree, KnowledgeBase, Rule, derivation_tree
from .core import Atom, AtomIndex, AtomSet, Term, _match, apply_substitution, homomorphisms, term_key
from .errors import BudgetExceeded, GbtsError, NotStructurallyEquivalent

log = logging.getLogger("gbts.patterns")

DEFAULT_CAP_PATTERNS = 200_000
MAX_BODY = 16

Pairs = Tuple[Tuple[Term, Term], ...]
Element = Tuple[int, int, Pairs]
ROOT = -1


def _pairs(d: Dict[Term, Term]) -> Pairs:
    return tuple(sorted(d.items(), key=lambda kv: term_key(kv[0])))


def element_key(e: Element):
    return (e[0], e[1], tuple((term_key(v), term_key(t)) for v, t in e[2]))


class RuleTable:
    """Rules with indexed bodies: atom i of rule r is bit i of a mask."""

    def __init__(self, rules: Sequence[Rule]):
        self.rules = list(rules)
        self.bodies: List[List[Atom]] = [r.body.sorted() for r in self.rules]
        for r, b in zip(self.rules, self.bodies):
            if len(b) > MAX_BODY:
                raise GbtsError(f"rule {r.id} has {len(b)} body atoms (max {MAX_BODY})")
        self.full = [(1 << len(b)) - 1 for b in self.bodies]
        self._mv: Dict[Tuple[int, int], FrozenSet[Term]] = {}
        self._sv: Dict[Tuple[int, int, int], Tuple[Term, ...]] = {}

    def __len__(self) -> int:
        return len(self.rules)

    def mask_vars(self, ri: int, mask: int) -> FrozenSet[Term]:
        key = (ri, mask)
        v = self._mv.get(key)
        if v is None:
            body = self.bodies[ri]
            v = frozenset(t for i, a in enumerate(body) if mask >> i & 1 for t in a.args if t.is_var)
            self._mv[key] = v
        return v

    def shared_vars(self, ri: int, m1: int, m2: int) -> Tuple[Term, ...]:
        key = (ri, m1, m2)
        v = self._sv.get(key)
        if v is None:
            v = tuple(sorted(self.mask_vars(ri, m1) & self.mask_vars(ri, m2), key=term_key))
            self._sv[key] = v
        return v

    def atoms_of(self, ri: int, mask: int) -> List[Atom]:
        return [a for i, a in enumerate(self.bodies[ri]) if mask >> i & 1]

    def format_element(self, e: Element) -> str:
        ri, mask, pi = e
        atoms = ", ".join(map(repr, self.atoms_of(ri, mask)))
        m = ", ".join(f"{v.name}->{t.name}" for v, t in pi)
        return f"{self.rules[ri].id} {{{atoms}}} {{{m}}}"


def initial_elements(rt: RuleTable, atoms: Iterable[Atom]) -> FrozenSet[Element]:
    """All (G, π) with G a non-empty body subset and π a homomorphism G → atoms."""
    index = AtomIndex(atoms)
    out: Set[Element] = set()
    for ri, body in enumerate(rt.bodies):
        n = len(body)
        binding: Dict[Term, Term] = {}

        def rec(i: int, mask: int):
            if i == n:
                if mask:
                    out.add((ri, mask, _pairs(binding)))
                return
            rec(i + 1, mask)
            a = body[i]
            for cand in index.candidates(a, binding):
                added = _match(a, cand, binding)
                if added is None:
                    continue
                rec(i + 1, mask | (1 << i))
                for v in added:
                    del binding[v]

        rec(0, 0)
    return frozenset(out)


def _getter(shared: Tuple[Term, ...]) -> Callable[[Dict[Term, Term]], object]:
    if not shared:
        return lambda d: ()
    return itemgetter(*shared)


class _BaseIndex:
    """Elements of a pattern grouped by rule and mask, with lazily built
    projections on the variables shared with another mask."""

    def __init__(self, elements: Iterable[Element]):
        self.by_mask: Dict[int, Dict[int, List[Dict[Term, Term]]]] = {}
        for ri, m, pi in elements:
            self.by_mask.setdefault(ri, {}).setdefault(m, []).append(dict(pi))
        self._proj: Dict[tuple, Dict[object, List[Dict[Term, Term]]]] = {}

    def masks(self, ri: int):
        return self.by_mask.get(ri, {}).keys()

    def projection(self, ri: int, m1: int, shared: Tuple[Term, ...]) -> Dict[object, List[Dict[Term, Term]]]:
        pk = (ri, m1, shared)
        idx = self._proj.get(pk)
        if idx is None:
            idx = {}
            get = _getter(shared)
            need = set(shared)
            for p1 in self.by_mask[ri][m1]:
                if need <= p1.keys():
                    idx.setdefault(get(p1), []).append(p1)
            self._proj[pk] = idx
        return idx


def join_elements(
    rt: RuleTable,
    base: FrozenSet[Element],
    other: FrozenSet[Element],
    f: Callable[[Term], Optional[Term]],
    base_index: Optional[_BaseIndex] = None,
) -> FrozenSet[Element]:
    """Generic join: every defined elementary join of an element of ``base``
    with an element of ``other``, where ``f`` carries terms of the other
    bag to terms of the base bag (None when the term is not shared)."""
    out: Set[Element] = set(base)
    bi = base_index if base_index is not None else _BaseIndex(base)
    # restrict the other elements and group them by rule, mask and domain
    restricted: Dict[Tuple[int, int, FrozenSet[Term]], Set[Pairs]] = {}
    for ri, m2, p2 in other:
        q = []
        for x, t in p2:
            u = f(t)
            if u is not None:
                q.append((x, u))
        q = tuple(q)
        out.add((ri, m2, q))
        restricted.setdefault((ri, m2, frozenset(x for x, _ in q)), set()).add(q)
    for (ri, m2, dom), qs in restricted.items():
        partners = []
        for m1 in bi.masks(ri):
            inter = m1 & m2
            if inter == m1 or inter == m2:
                continue
            shared = rt.shared_vars(ri, m1, m2)
            if dom.issuperset(shared):
                idx = bi.projection(ri, m1, shared)
                if idx:
                    partners.append((m1 | m2, _getter(shared), idx))
        if not partners:
            continue
        for qp in qs:
            q = dict(qp)
            for m, get, idx in partners:
                for p1 in idx.get(get(q), ()):
                    merged = dict(p1)
                    merged.update(q)
                    out.add((ri, m, _pairs(merged)))
    return frozenset(out)


def elementary_join(
    rt: RuleTable, e1: Element, e2: Element, target_terms: Iterable[Term]
) -> Optional[Element]:
    """J(e1, e2) for concrete bags; ``target_terms`` are the terms of e1's bag."""
    if e1[0] != e2[0] and e1[1] and e2[1]:
        return None
    if not e2[1]:
        return e1
    ri = e2[0]
    terms = frozenset(target_terms)
    p1, p2 = dict(e1[2]), dict(e2[2])
    shared = rt.mask_vars(ri, e1[1]) & rt.mask_vars(ri, e2[1]) if e1[1] else frozenset()
    for x in shared:
        if x not in p1 or x not in p2 or p1[x] is not p2[x]:
            return None
    merged = dict(p1)
    merged.update({x: t for x, t in p2.items() if t in terms})
    return (ri, e1[1] | e2[1], _pairs(merged))


def join(rt: RuleTable, P1: FrozenSet[Element], P2: FrozenSet[Element], terms_B1: Iterable[Term]) -> FrozenSet[Element]:
    """J(P1, P2) for two neighbouring concrete bags."""
    terms = frozenset(terms_B1)
    return join_elements(rt, P1, P2, lambda t: t if t in terms else None)


def fusion_of_frontier(rule: Rule, pi: Dict[Term, Term], T0: Iterable[Term]) -> Dict[Term, Term]:
    T0 = frozenset(T0)
    fr = rule.frontier_sorted
    sigma: Dict[Term, Term] = {}
    for x in fr:
        img = pi[x]
        if img in T0:
            sigma[x] = img
        else:
            sigma[x] = next(y for y in fr if pi[y] is img)
    return sigma


# --------------------------------------------------------------------------
# concrete patterned derivation trees


def _origin(b: Bag) -> Dict[Term, Term]:
    return dict(b.origin)


def structurally_equivalent(b1: Bag, b2: Bag) -> bool:
    if b1.parent is None or b2.parent is None:
        return b1.parent is None and b2.parent is None
    return b1.rule_id == b2.rule_id and b1.fusion == b2.fusion


def natural_bijection(b1: Bag, b2: Bag, T0: Iterable[Term]) -> Dict[Term, Term]:
    """ψ from terms(b1) to terms(b2): identity on T0, head-variable origin otherwise."""
    if not structurally_equivalent(b1, b2):
        raise NotStructurallyEquivalent(f"bags {b1.index} and {b2.index}")
    psi = {t: t for t in T0}
    o2 = _origin(b2)
    for u, x in b1.origin:
        if x in psi and psi[x] is not o2[u] and x not in T0:
            raise NotStructurallyEquivalent(f"orig({x}) is not well defined")
        psi.setdefault(x, o2[u])
    return {t: psi[t] for t in b1.terms}


def map_elements(P: Iterable[Element], psi: Dict[Term, Term]) -> FrozenSet[Element]:
    return frozenset((ri, m, _pairs({x: psi[t] for x, t in pi})) for ri, m, pi in P)


def concrete_pattern_leq(P: FrozenSet[Element], b: Bag, P2: FrozenSet[Element], b2: Bag, T0) -> bool:
    if not structurally_equivalent(b, b2):
        return False
    return map_elements(P, natural_bijection(b, b2, T0)) <= P2


def propagate(
    rt: RuleTable,
    tree: DerivationTree,
    patterns: List[FrozenSet[Element]],
    created: int,
) -> List[int]:
    """Update patterns after bag ``created`` was added; bags with a larger
    index are ignored.  Returns the update order (distance order)."""
    adj: Dict[int, List[int]] = {i: [] for i in range(created + 1)}
    for b in tree.bags[1 : created + 1]:
        adj[b.index].append(b.parent)
        adj[b.parent].append(b.index)
    bags = tree.bags
    parent = bags[created].parent
    if parent is not None:
        patterns[created] = join(rt, patterns[created], patterns[parent], bags[created].terms)
    order = [created]
    seen = {created}
    frontier = [created]
    while frontier:
        nxt = []
        for u in frontier:
            for v in sorted(adj[u]):
                if v not in seen:
                    seen.add(v)
                    patterns[v] = join(rt, patterns[v], patterns[u], bags[v].terms)
                    order.append(v)
                    nxt.append(v)
        frontier = nxt
    return order


def patterned_tree(d: Derivation, rt: Optional[RuleTable] = None) -> Tuple[DerivationTree, List[FrozenSet[Element]]]:
    """Derivation tree of ``d`` with patterns maintained by join propagation."""
    rt = rt or RuleTable(d.kb.rules)
    tree = derivation_tree(d)
    patterns = [initial_elements(rt, tree.bags[0].atoms)]
    for b in tree.bags[1:]:
        patterns.append(initial_elements(rt, b.atoms))
        propagate(rt, tree, patterns, b.index)
    return tree, patterns


def pattern_violations(
    rt: RuleTable,
    tree: DerivationTree,
    patterns: Sequence[FrozenSet[Element]],
    fact: Iterable[Atom],
) -> List[str]:
    """Soundness and completeness of every bag pattern w.r.t. ``fact``."""
    index = AtomIndex(fact)
    out: List[str] = []
    for b, P in zip(tree.bags, patterns):
        for ri, mask, pi in P:
            atoms = rt.atoms_of(ri, mask)
            if next(homomorphisms(atoms, index, dict(pi)), None) is None:
                out.append(f"bag {b.index}: unsound {rt.format_element((ri, mask, pi))}")
    full = initial_elements(rt, index.atoms)
    for b, P in zip(tree.bags, patterns):
        for ri, mask, pi in full:
            e = (ri, mask, _pairs({x: t for x, t in pi if t in b.terms}))
            if e not in P:
                out.append(f"bag {b.index}: missing {rt.format_element(e)}")
    return out


# --------------------------------------------------------------------------
# abstract layer


@dataclass(frozen=True)
class AbstractBag:
    key: Tuple[int, Pairs]
    rule_index: int  # ROOT for the initial fact
    terms: FrozenSet[Term]
    atoms: AtomSet
    frontier_terms: FrozenSet[Term]
    generated: FrozenSet[Term]

    @property
    def is_root(self) -> bool:
        return self.rule_index == ROOT


@dataclass(frozen=True)
class AbstractPattern:
    id: int
    support: AbstractBag
    elements: FrozenSet[Element]

    def __len__(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class PatternRule:
    id: int
    kind: str  # "creation" | "evolution"
    lhs: int
    rhs: int
    link: Pairs  # creation rules only; non-T0 pairs child term -> parent term
    rank: int
    via: str

    def __str__(self) -> str:
        if self.kind == "evolution":
            return f"P{self.lhs} ~> P{self.rhs}"
        lam = ", ".join(f"{a.name}->{b.name}" for a, b in self.link)
        return f"P{self.lhs} ~> {{{lam}}}.P{self.rhs}"


class PatternStore:
    def __init__(self, kb: KnowledgeBase, rt: RuleTable, cap: int = DEFAULT_CAP_PATTERNS):
        self.kb = kb
        self.rt = rt
        self.T0 = kb.T0
        self.cap = cap
        self.bags: Dict[Tuple[int, Pairs], AbstractBag] = {}
        self.patterns: List[AbstractPattern] = []
        self._ids: Dict[Tuple[Tuple[int, Pairs], FrozenSet[Element]], int] = {}
        self._groups: Dict[int, _BaseIndex] = {}
        self._joins: Dict[tuple, int] = {}
        self._init_cache: Dict[Tuple[int, Pairs], FrozenSet[Element]] = {}
        self.root_bag = self._make_root()

    def _make_root(self) -> AbstractBag:
        key = (ROOT, ())
        b = AbstractBag(key, ROOT, frozenset(self.T0), self.kb.fact, frozenset(), frozenset())
        self.bags[key] = b
        return b

    def bag(self, ri: int, sigma: Dict[Term, Term]) -> AbstractBag:
        key = (ri, _pairs(sigma))
        b = self.bags.get(key)
        if b is None:
            rule = self.rt.rules[ri]
            atoms = apply_substitution(sigma, rule.head)
            fr_terms = frozenset(sigma.values())
            terms = frozenset(atoms.terms()) | self.T0
            gen = frozenset(t for t in terms if t not in fr_terms and t not in self.T0)
            b = AbstractBag(key, ri, terms, atoms, fr_terms, gen)
            self.bags[key] = b
        return b

    def initial(self, bag: AbstractBag) -> FrozenSet[Element]:
        e = self._init_cache.get(bag.key)
        if e is None:
            e = initial_elements(self.rt, bag.atoms)
            self._init_cache[bag.key] = e
        return e

    def intern(self, bag: AbstractBag, elements: FrozenSet[Element]) -> int:
        k = (bag.key, elements)
        pid = self._ids.get(k)
        if pid is None:
            pid = len(self.patterns)
            if pid >= self.cap:
                raise BudgetExceeded("pattern", self.cap)
            self.patterns.append(AbstractPattern(pid, bag, elements))
            self._ids[k] = pid
        return pid

    def groups(self, pid: int):
        g = self._groups.get(pid)
        if g is None:
            g = _BaseIndex(self.patterns[pid].elements)
            self._groups[pid] = g
        return g

    def __getitem__(self, pid: int) -> AbstractPattern:
        return self.patterns[pid]

    def leq(self, p: int, q: int) -> bool:
        """⊑ on abstract patterns (same support, element inclusion)."""
        a, b = self.patterns[p], self.patterns[q]
        return a.support.key == b.support.key and a.elements <= b.elements

    def upper_join(self, p1: int, link: Pairs, p2: int) -> int:
        memo = ("u", p1, link, p2)
        if memo in self._joins:
            return self._joins[memo]
        lam = dict(link)
        T0 = self.T0
        f = lambda t: t if t in T0 else lam.get(t)
        P1 = self.patterns[p1]
        el = join_elements(self.rt, P1.elements, self.patterns[p2].elements, f, self.groups(p1))
        out = self._joins[memo] = self.intern(P1.support, el)
        return out

    def lower_join(self, p1: int, link: Pairs, p2: int) -> int:
        memo = ("l", p1, link, p2)
        if memo in self._joins:
            return self._joins[memo]
        inv = {b: a for a, b in link}
        T0 = self.T0
        f = lambda t: t if t in T0 else inv.get(t)
        P2 = self.patterns[p2]
        el = join_elements(self.rt, P2.elements, self.patterns[p1].elements, f, self.groups(p2))
        out = self._joins[memo] = self.intern(P2.support, el)
        return out

    def creations_from(self, pid: int) -> List[Tuple[Pairs, AbstractBag]]:
        """Creation seeds for a pattern: (link, child abstract bag)."""
        P = self.patterns[pid]
        sup = P.support
        T0 = self.T0
        out: List[Tuple[Pairs, AbstractBag]] = []
        seen = set()
        for ri, mask, pi in sorted(P.elements, key=element_key):
            if mask != self.rt.full[ri]:
                continue
            rule = self.rt.rules[ri]
            pim = dict(pi)
            if any(x not in pim for x in rule.frontier):
                continue
            img = {pim[x] for x in rule.frontier}
            if sup.is_root:
                if not img <= T0:
                    continue
            elif not (img & sup.generated):
                continue
            sigma = fusion_of_frontier(rule, pim, T0)
            link = _pairs({y: pim[y] for y in set(sigma.values()) if y not in T0})
            key = (ri, _pairs(sigma), link)
            if key in seen:
                continue
            seen.add(key)
            out.append((link, self.bag(ri, sigma)))
        return out

    def format_pattern(self, pid: int) -> List[str]:
        return [self.rt.format_element(e) for e in sorted(self.patterns[pid].elements, key=element_key)]


@dataclass
class RuleBase:
    """Saturated set of creation/evolution rules."""

    kb: KnowledgeBase
    store: PatternStore
    rules: List[PatternRule]
    initial_pattern: int
    most_informative: bool = False

    @property
    def rt(self) -> RuleTable:
        return self.store.rt

    def creations(self, lhs: Optional[int] = None) -> List[PatternRule]:
        return [r for r in self.rules if r.kind == "creation" and (lhs is None or r.lhs == lhs)]

    def evolutions(self, lhs: Optional[int] = None) -> List[PatternRule]:
        return [r for r in self.rules if r.kind == "evolution" and (lhs is None or r.lhs == lhs)]

    def patterns_used(self) -> List[int]:
        ids = {self.initial_pattern}
        for r in self.rules:
            ids.add(r.lhs)
            ids.add(r.rhs)
        return sorted(ids)

    def root_pattern(self) -> int:
        evs = self.evolutions(self.initial_pattern)
        if not evs:
            return self.initial_pattern
        return _best(self.store, [r.rhs for r in evs])

    def pattern_bound_log2(self) -> float:
        """log2 of the abstract-pattern bound |R|·2^aB·b^tB (exponent form)."""
        rt = self.rt
        aB = max((len(b) for b in rt.bodies), default=0)
        tB = max((len(AtomSet(b).terms()) for b in rt.bodies), default=0)
        bmax = max(len(b.terms) for b in self.store.bags.values())
        # +1 accounts for unmapped body terms
        return max(1, len(rt)) * (2 ** aB) * ((bmax + 1) ** tB)

    def within_bound(self) -> bool:
        n = len(self.store.patterns)
        return n <= 1 or math.log2(n) <= self.pattern_bound_log2()


def _best(store: PatternStore, pids: Sequence[int]) -> int:
    return max(pids, key=lambda p: (len(store[p].elements), -p))


class _Saturator:
    def __init__(self, kb: KnowledgeBase, cap_patterns: int, cap_rules: int):
        self.kb = kb
        self.rt = RuleTable(kb.rules)
        self.store = PatternStore(kb, self.rt, cap_patterns)
        self.cap_rules = cap_rules
        self.heap: List[tuple] = []
        self.seq = 0
        self.known: Dict[tuple, PatternRule] = {}
        self.rules: List[PatternRule] = []
        self.cr_lhs: Dict[int, List[PatternRule]] = {}
        self.cr_rhs: Dict[int, List[PatternRule]] = {}
        self.ev_lhs: Dict[int, List[PatternRule]] = {}
        self.ev_rhs: Dict[int, List[PatternRule]] = {}
        self.registered: Set[int] = set()

    def push(self, kind: str, lhs: int, link: Pairs, rhs: int, rank: int, via: str):
        if kind == "evolution" and lhs == rhs:
            return
        key = (kind, lhs, link, rhs)
        if key in self.known:
            return
        self.seq += 1
        heapq.heappush(self.heap, (rank, self.seq, key, via))

    def register(self, pid: int):
        if pid in self.registered:
            return
        self.registered.add(pid)
        for link, child in self.store.creations_from(pid):
            rhs = self.store.intern(child, self.store.initial(child))
            self.push("creation", pid, link, rhs, 1, "creation")

    def run(self) -> RuleBase:
        st = self.store
        p0 = st.intern(st.root_bag, st.initial(st.root_bag))
        self.register(p0)
        while self.heap:
            rank, _, key, via = heapq.heappop(self.heap)
            if key in self.known:
                continue
            kind, lhs, link, rhs = key
            rule = PatternRule(len(self.rules), kind, lhs, rhs, link, rank, via)
            self.known[key] = rule
            self.rules.append(rule)
            if len(self.rules) > self.cap_rules:
                raise BudgetExceeded("pattern rule", self.cap_rules)
            self.register(lhs)
            self.register(rhs)
            if kind == "creation":
                self._on_creation(rule)
            else:
                self._on_evolution(rule)
        log.info("saturation: %d patterns, %d rules", len(st.patterns), len(self.rules))
        return RuleBase(self.kb, st, self.rules, p0)

    def _on_creation(self, c: PatternRule):
        st = self.store
        self.cr_lhs.setdefault(c.lhs, []).append(c)
        self.cr_rhs.setdefault(c.rhs, []).append(c)
        low = st.lower_join(c.lhs, c.link, c.rhs)
        self.push("creation", c.lhs, c.link, low, c.rank + 1, "lower-join")
        up = st.upper_join(c.lhs, c.link, c.rhs)
        self.push("evolution", c.lhs, (), up, c.rank + 1, "upper-join")
        for e in list(self.ev_lhs.get(c.lhs, ())):
            self.push("creation", e.rhs, c.link, c.rhs, c.rank + e.rank + 1, "evolution-creation")
        for e in list(self.ev_lhs.get(c.rhs, ())):
            self.push("creation", c.lhs, c.link, e.rhs, c.rank + e.rank + 1, "creation-evolution")

    def _on_evolution(self, e: PatternRule):
        self.ev_lhs.setdefault(e.lhs, []).append(e)
        self.ev_rhs.setdefault(e.rhs, []).append(e)
        for e2 in list(self.ev_lhs.get(e.rhs, ())):
            self.push("evolution", e.lhs, (), e2.rhs, e.rank + e2.rank + 1, "transitivity")
        for e0 in list(self.ev_rhs.get(e.lhs, ())):
            self.push("evolution", e0.lhs, (), e.rhs, e.rank + e0.rank + 1, "transitivity")
        for c in list(self.cr_lhs.get(e.lhs, ())):
            self.push("creation", e.rhs, c.link, c.rhs, c.rank + e.rank + 1, "evolution-creation")
        for c in list(self.cr_rhs.get(e.lhs, ())):
            self.push("creation", c.lhs, c.link, e.rhs, c.rank + e.rank + 1, "creation-evolution")


class _MaximalSaturator:
    """Maximal-first strategy: every pattern is evolved to its maximum before
    it is used, by Kleene iteration over the (finite) set of reachable
    patterns.  Each step is an instance of one deduction rule, so every
    recorded rule belongs to the saturation; the most informative rules
    reachable from the initial pattern are all recorded."""

    def __init__(self, kb: KnowledgeBase, cap_patterns: int, cap_rules: int):
        self.kb = kb
        self.rt = RuleTable(kb.rules)
        self.store = PatternStore(kb, self.rt, cap_patterns)
        self.cap_rules = cap_rules
        self.rules: Dict[tuple, PatternRule] = {}
        self.best: Dict[int, int] = {}
        self.visiting: Set[int] = set()
        self.done: Set[int] = set()
        self.changed = False
        self.rounds = 0

    def add(self, kind: str, lhs: int, link: Pairs, rhs: int, rank: int, via: str) -> int:
        if kind == "evolution" and lhs == rhs:
            return 0
        key = (kind, lhs, link, rhs)
        old = self.rules.get(key)
        if old is not None:
            if old.rank <= rank:
                return old.rank
            self.rules[key] = PatternRule(old.id, kind, lhs, rhs, link, rank, via)
            return rank
        if len(self.rules) >= self.cap_rules:
            raise BudgetExceeded("pattern rule", self.cap_rules)
        self.rules[key] = PatternRule(len(self.rules), kind, lhs, rhs, link, rank, via)
        return rank

    def solve(self, pid: int) -> int:
        if pid in self.visiting or pid in self.done:
            return self.best.get(pid, pid)
        self.visiting.add(pid)
        st = self.store
        cur = self.best.get(pid, pid)
        r_pid = self.rules[("evolution", pid, (), cur)].rank if cur != pid else 0
        while True:
            new, r_new = cur, 0  # r_new: rank of cur ~> new
            for link, bag in st.creations_from(cur):
                child, r_c = self.final_child(cur, link, bag)
                if new != cur:
                    r_c = self.add("creation", new, link, child, r_c + r_new + 1, "evolution-creation")
                up = st.upper_join(new, link, child)
                r_up = self.add("evolution", new, (), up, r_c + 1, "upper-join")
                if up != new:
                    if new != cur:
                        r_up = self.add("evolution", cur, (), up, r_new + r_up + 1, "transitivity")
                    r_new = r_up
                new = up
            if new == cur:
                break
            if cur != pid:
                r_pid = self.add("evolution", pid, (), new, r_pid + r_new + 1, "transitivity")
            else:
                r_pid = r_new
            cur = new
        self.visiting.discard(pid)
        self.done.add(pid)
        if self.best.get(pid, pid) != cur:
            self.changed = True
        self.best[pid] = cur
        return cur

    def final_child(self, parent: int, link: Pairs, bag: AbstractBag) -> Tuple[int, int]:
        st = self.store
        x = st.intern(bag, st.initial(bag))
        r = self.add("creation", parent, link, x, 1, "creation")
        while True:
            low = st.lower_join(parent, link, x)
            r = self.add("creation", parent, link, low, r + 1, "lower-join")
            ev = self.solve(low)
            if ev != low:
                r_ev = self.rules[("evolution", low, (), ev)].rank
                r = self.add("creation", parent, link, ev, r + r_ev + 1, "creation-evolution")
            if ev == x:
                return x, r
            x = ev

    def run(self) -> RuleBase:
        st = self.store
        p0 = st.intern(st.root_bag, st.initial(st.root_bag))
        while True:
            self.rounds += 1
            self.done = set()
            self.changed = False
            self.solve(p0)
            if not self.changed:
                break
        rules = sorted(self.rules.values(), key=lambda r: r.id)
        log.info("saturation: %d patterns, %d rules, %d rounds", len(st.patterns), len(rules), self.rounds)
        return RuleBase(self.kb, st, rules, p0)


def saturate(
    kb: KnowledgeBase,
    cap_patterns: int = DEFAULT_CAP_PATTERNS,
    cap_rules: int = 10 * DEFAULT_CAP_PATTERNS,
    strategy: str = "maximal",
) -> RuleBase:
    """Pattern saturation from the initial abstract pattern of the fact.

    ``maximal`` (default) records the rules produced by the maximal-first
    fixpoint; ``exhaustive`` applies the six deduction rules blindly in rank
    order and is only practical on very small inputs.
    """
    if strategy == "maximal":
        return _MaximalSaturator(kb, cap_patterns, cap_rules).run()
    if strategy == "exhaustive":
        return _Saturator(kb, cap_patterns, cap_rules).run()
    raise GbtsError(f"unknown saturation strategy {strategy!r}")


def most_informative(rb: RuleBase) -> RuleBase:
    """Keep ⊑-maximal right-hand sides: per lhs for evolutions, per
    (lhs, link, child support) for creations."""
    st = rb.store
    groups: Dict[tuple, List[PatternRule]] = {}
    for r in rb.rules:
        if r.kind == "evolution":
            k = ("evolution", r.lhs)
        else:
            k = ("creation", r.lhs, r.link, st[r.rhs].support.key)
        groups.setdefault(k, []).append(r)
    keep: List[PatternRule] = []
    for k in sorted(groups, key=repr):
        rs = groups[k]
        maxi = [r for r in rs if not any(o.rhs != r.rhs and st.leq(r.rhs, o.rhs) for o in rs)]
        seen = set()
        for r in sorted(maxi, key=lambda r: r.id):
            if r.rhs not in seen:
                seen.add(r.rhs)
                keep.append(r)
        if len(seen) > 1:
            log.warning("%s has %d incomparable maximal rules", k, len(seen))
    keep.sort(key=lambda r: r.id)
    return RuleBase(rb.kb, st, keep, rb.initial_pattern, most_informative=True)


def monotonicity_violations(rb: RuleBase) -> List[str]:
    """Lemma-style check: when P1 ⊑ P2 are both left-hand sides and P2 has
    no strict evolution, every rule from P1 is dominated by P2 (itself, for
    evolutions) or by a rule from P2."""
    st = rb.store
    by_lhs: Dict[int, List[PatternRule]] = {}
    for r in rb.rules:
        by_lhs.setdefault(r.lhs, []).append(r)
    closed = [p for p in sorted(by_lhs) if not any(r.kind == "evolution" for r in by_lhs[p])]
    out = []
    for p1 in sorted(by_lhs):
        for p2 in closed:
            if p1 == p2 or not st.leq(p1, p2):
                continue
            for r in by_lhs[p1]:
                if r.kind == "evolution" and st.leq(r.rhs, p2):
                    continue
                ok = any(
                    o.kind == r.kind and o.link == r.link and st.leq(r.rhs, o.rhs)
                    for o in by_lhs[p2]
                )
                if not ok:
                    out.append(f"{r} not dominated from P{p2}")
    return out
