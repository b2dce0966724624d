"""Rule-set translations.

* ``wfg_translate``: any rule set into a weakly frontier-guarded one, adding the
  ``initial`` and ``samebag`` bookkeeping predicates.  Equivalent on gbts input.
* ``normalize_fg`` / ``integrate_disconnected``: split frontier-guarded rules into
  variable-connected rules and disconnected ones, then fold the latter into the fact.
* ``decomposition_graph`` / ``acyclic_covering`` / ``ba_to_guarded``: rewrite a
  body-acyclic frontier-guarded rule as a set of guarded rules.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from .chase import FreshVars, KnowledgeBase, Rule
from .core import Atom, AtomSet, Term, Variable, apply_substitution, term_key
from .errors import ArityOverflow, BodyCyclic, GbtsError, NotFrontierGuarded

log = logging.getLogger("gbts.rewrite")

DEFAULT_CAP_ARITY = 32


def _predicates(rules: Iterable[Rule], fact: Iterable[Atom] = ()) -> set:
    out = {a.predicate for a in fact}
    for r in rules:
        out |= {a.predicate for a in r.body | r.head}
    return out


def _fresh_name(base: str, taken: set) -> str:
    name = base
    while name in taken:
        name += "_"
    taken.add(name)
    return name


class _Names:
    """Readable fresh variables ``X1, X2, ...`` avoiding a given set."""

    def __init__(self, avoid: Iterable[Term]):
        self.avoid = set(avoid)
        self.n: Dict[str, int] = {}

    def __call__(self, stem: str) -> Variable:
        while True:
            self.n[stem] = self.n.get(stem, 0) + 1
            v = Variable(f"{stem}{self.n[stem]}")
            if v not in self.avoid:
                self.avoid.add(v)
                return v


def _sorted_vars(vs: Iterable[Term]) -> List[Term]:
    return sorted(vs, key=term_key)


# --------------------------------------------------------------------------
# gbts -> wfg


@dataclass(frozen=True)
class WfgTranslation:
    kb: KnowledgeBase
    arity: int
    initial: str
    samebag: str
    same_rules: Tuple[Rule, ...]
    trans_rules: Tuple[Rule, ...]


def samebag_arity(kb: KnowledgeBase) -> int:
    """``max |terms(head)| + |T0|``, at least 1."""
    mh = max((len(r.head.terms()) for r in kb.rules), default=0)
    return max(1, mh + len(kb.T0))


def wfg_translation(kb: KnowledgeBase, cap_arity: int = DEFAULT_CAP_ARITY) -> WfgTranslation:
    q = samebag_arity(kb)
    if q > cap_arity:
        raise ArityOverflow(f"samebag arity {q} exceeds cap {cap_arity}")
    taken = _predicates(kb.rules, kb.fact)
    initial = _fresh_name("initial", taken)
    samebag = _fresh_name("samebag", taken)

    used = set(kb.fact.vars())
    for r in kb.rules:
        used |= r.variables()
    fresh = _Names(used)
    xs = [fresh("X") for _ in range(q)]
    x = fresh("X")

    same: List[Rule] = [
        Rule("same_1", [Atom(initial, [x])], [Atom(samebag, [x] * q)]),
        Rule("same_2", [Atom(samebag, xs), Atom(initial, [x])], [Atom(samebag, [x] + xs[1:])]),
    ]
    # the transposition with position 1 is the identity, so it is left out
    for i in range(1, q):
        swapped = list(xs)
        swapped[0], swapped[i] = swapped[i], swapped[0]
        same.append(Rule(f"same_3_{i + 1}", [Atom(samebag, xs)], [Atom(samebag, swapped)]))
    if q > 1:
        same.append(Rule("same_4", [Atom(samebag, xs)], [Atom(samebag, xs[:-1] + [xs[0]])]))

    trans: List[Rule] = []
    for r in kb.rules:
        y = list(r.frontier_sorted)
        z = _sorted_vars(r.existentials)
        v = [fresh("V") for _ in range(q - len(y))]
        w = v[: q - len(y) - len(z)]
        body = list(r.body) + [Atom(samebag, y + v)]
        head = list(r.head) + [Atom(samebag, y + z + w)]
        head += [Atom(initial, [c]) for c in _sorted_vars(r.head_constants)]
        trans.append(Rule(r.id, body, head))

    fact = list(kb.fact) + [Atom(initial, [t]) for t in _sorted_vars(kb.fact.terms())]
    out = KnowledgeBase(AtomSet(fact), tuple(same + trans))
    return WfgTranslation(out, q, initial, samebag, tuple(same), tuple(trans))


def wfg_translate(kb: KnowledgeBase, cap_arity: int = DEFAULT_CAP_ARITY) -> KnowledgeBase:
    """The translated knowledge base ``(τ(F), τ(R))``."""
    return wfg_translation(kb, cap_arity).kb


# --------------------------------------------------------------------------
# frontier-guarded normalization


def frontier_guards(rule: Rule) -> List[Atom]:
    return [a for a in rule.body.sorted() if rule.frontier <= a.vars()]


def is_guarded(rule: Rule) -> bool:
    vs = rule.body.vars()
    return any(vs <= a.vars() for a in rule.body)


def variable_components(atoms: Iterable[Atom]) -> List[AtomSet]:
    """Components of the body hypergraph once constant nodes are split.

    Atoms without variables end up alone in their own component.
    """
    atoms = sorted(set(atoms))
    g = nx.Graph()
    g.add_nodes_from(range(len(atoms)))
    holder: Dict[Term, int] = {}
    for i, a in enumerate(atoms):
        for v in _sorted_vars(a.vars()):
            if v in holder:
                g.add_edge(holder[v], i)
            else:
                holder[v] = i
    comps = [AtomSet(atoms[i] for i in c) for c in nx.connected_components(g)]
    return sorted(comps, key=lambda c: c.sorted()[0])


def normalize_fg(rules: Sequence[Rule]) -> Tuple[List[Rule], List[Rule]]:
    """Return ``(disconnected, connected)``.

    A rule whose body falls apart into several components is split into
    ``rest -> p0`` (disconnected) and ``C_f & p0 -> head``.
    """
    taken = _predicates(rules)
    disconnected: List[Rule] = []
    connected: List[Rule] = []
    for r in rules:
        if not r.frontier:
            disconnected.append(r)
            continue
        guards = frontier_guards(r)
        if not guards:
            raise NotFrontierGuarded(f"rule {r.id} has no frontier guard")
        comps = variable_components(r.body)
        cf = next(c for c in comps if guards[0] in c)
        rest = AtomSet(a for a in r.body if a not in cf)
        if not rest:
            connected.append(r)
            continue
        p0 = Atom(_fresh_name(f"p0_{r.id}", taken), ())
        disconnected.append(Rule(f"{r.id}_0", rest, [p0]))
        connected.append(Rule(f"{r.id}_f", cf | {p0}, r.head))
    return disconnected, connected


EntailmentCallback = Callable[[AtomSet, Sequence[Rule], AtomSet], bool]


def integrate_disconnected(
    F: Iterable[Atom],
    disconnected: Sequence[Rule],
    connected: Sequence[Rule],
    entails: EntailmentCallback,
) -> AtomSet:
    """Fold disconnected rules into the fact.

    ``entails(F, connected, body)`` decides ``F, connected |= body``.  A rule
    whose body is entailed contributes its head (with fresh variables) and is
    dropped; this repeats until no further rule fires.
    """
    fact = AtomSet(F)
    pending = list(disconnected)
    used = set(fact.vars())
    for r in list(disconnected) + list(connected):
        used |= r.variables()
    fresh = FreshVars("d", avoid=used)
    changed = True
    while changed and pending:
        changed = False
        for r in list(pending):
            if entails(fact, connected, r.body):
                ren = {v: fresh() for v in _sorted_vars(r.head.vars())}
                fact = fact | apply_substitution(ren, r.head)
                pending.remove(r)
                changed = True
                log.debug("disconnected rule %s fired", r.id)
    return fact


# --------------------------------------------------------------------------
# decomposition graphs and acyclic coverings


Edge = Tuple[int, int]


@dataclass(frozen=True)
class DecompositionGraph:
    """Nodes are guarded groups of atoms; edges carry the shared variables."""

    nodes: Tuple[AtomSet, ...]
    guards: Tuple[Atom, ...]
    edges: Dict[Edge, FrozenSet[Term]] = field(hash=False)

    def vars(self, i: int) -> FrozenSet[Term]:
        return self.guards[i].vars()

    def label(self, i: int, j: int) -> FrozenSet[Term]:
        return self.edges[(min(i, j), max(i, j))]

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(len(self.nodes)))
        for (i, j), lab in self.edges.items():
            g.add_edge(i, j, weight=len(lab))
        return g


def _graph_from_groups(groups: Sequence[Tuple[Atom, Sequence[Atom]]]) -> DecompositionGraph:
    nodes = tuple(AtomSet(members) for _, members in groups)
    guards = tuple(g for g, _ in groups)
    edges: Dict[Edge, FrozenSet[Term]] = {}
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            shared = nodes[i].vars() & nodes[j].vars()
            if shared:
                edges[(i, j)] = frozenset(shared)
    return DecompositionGraph(nodes, guards, edges)


def decomposition_graph(atoms: Iterable[Atom]) -> DecompositionGraph:
    """Decomposition graph with the minimum number of nodes.

    An atom can only be guarded by an atom with a superset of its variables,
    so each distinct inclusion-maximal variable set needs its own node and
    these nodes already cover everything: the partition below is minimum.
    Each remaining atom joins the first node whose guard covers it.
    """
    atoms = sorted(set(atoms), key=lambda a: (-len(a.vars()), a))
    guards: List[Atom] = []
    for a in atoms:
        if not any(a.vars() <= g.vars() for g in guards):
            guards.append(a)
    groups: List[Tuple[Atom, List[Atom]]] = [(g, [g]) for g in guards]
    for a in atoms:
        if a in guards:
            continue
        k = next(k for k, g in enumerate(guards) if a.vars() <= g.vars())
        groups[k][1].append(a)
    return _graph_from_groups(groups)


def graph_from_partition(parts: Sequence[Iterable[Atom]]) -> DecompositionGraph:
    """Decomposition graph over a caller-supplied partition (not necessarily minimum)."""
    groups = []
    for p in parts:
        p = sorted(set(p))
        g = max(p, key=lambda a: len(a.vars()))
        if not all(a.vars() <= g.vars() for a in p):
            raise GbtsError(f"part {p} has no internal guard")
        groups.append((g, p))
    return _graph_from_groups(groups)


@dataclass(frozen=True)
class AcyclicCovering:
    graph: DecompositionGraph
    kept: Tuple[Edge, ...]
    removed: Tuple[Edge, ...]

    def forest(self) -> nx.Graph:
        f = nx.Graph()
        f.add_nodes_from(range(len(self.graph.nodes)))
        f.add_edges_from(self.kept)
        return f


def covering_violations(cov: AcyclicCovering) -> List[Edge]:
    """Removed edges lacking an alternative path whose labels all contain theirs."""
    f = cov.forest()
    if not nx.is_forest(f):
        return list(cov.kept)
    bad = []
    for (i, j) in cov.removed:
        lab = cov.graph.label(i, j)
        try:
            path = nx.shortest_path(f, i, j)
        except nx.NetworkXNoPath:
            bad.append((i, j))
            continue
        if not all(lab <= cov.graph.label(a, b) for a, b in zip(path, path[1:])):
            bad.append((i, j))
    return bad


def acyclic_covering(G: DecompositionGraph) -> Optional[AcyclicCovering]:
    """A covering forest, or None when the graph has none.

    A maximum-weight spanning forest (weight = label size) satisfies the
    covering condition whenever any spanning forest does.
    """
    g = G.graph()
    mst = nx.maximum_spanning_tree(g, algorithm="kruskal")
    kept = tuple(sorted((min(e), max(e)) for e in mst.edges()))
    removed = tuple(sorted(e for e in G.edges if e not in set(kept)))
    cov = AcyclicCovering(G, kept, removed)
    return None if covering_violations(cov) else cov


def is_body_acyclic(rule: Rule) -> bool:
    return acyclic_covering(decomposition_graph(rule.body)) is not None


def ba_to_guarded(
    rule: Rule,
    covering: Optional[AcyclicCovering] = None,
    taken: Optional[set] = None,
) -> List[Rule]:
    """Rewrite a variable-connected body-acyclic fg rule into guarded rules.

    Each non-root node of the covering becomes ``atoms & child summaries -> q_i(shared vars)``;
    the root node, which holds a frontier guard, keeps the original head.
    """
    if is_guarded(rule):
        return [rule]
    if not frontier_guards(rule):
        raise NotFrontierGuarded(f"rule {rule.id} has no frontier guard")
    if covering is None:
        covering = acyclic_covering(decomposition_graph(rule.body))
        if covering is None:
            raise BodyCyclic(f"rule {rule.id} has a cyclic body")
    G = covering.graph
    forest = covering.forest()
    if nx.number_connected_components(forest) != 1:
        raise GbtsError(f"rule {rule.id} is not variable-connected; normalize it first")
    root = next(
        (i for i, n in enumerate(G.nodes) if any(rule.frontier <= a.vars() for a in n)),
        None,
    )
    if root is None:
        raise NotFrontierGuarded(f"no node of the covering holds a frontier guard of {rule.id}")

    taken = set(taken) if taken is not None else _predicates([rule])
    parent: Dict[int, int] = {}
    order = [root]
    seen = {root}
    dq = deque([root])
    while dq:
        u = dq.popleft()
        for v in sorted(forest.neighbors(u)):
            if v not in seen:
                seen.add(v)
                parent[v] = u
                order.append(v)
                dq.append(v)

    summary: Dict[int, Atom] = {}
    for k, v in enumerate(order[1:], start=1):
        name = _fresh_name(f"q_{rule.id}_{k}", taken)
        summary[v] = Atom(name, _sorted_vars(G.label(v, parent[v])))

    def body_of(v: int) -> List[Atom]:
        kids = [summary[c] for c in order if parent.get(c) == v]
        return list(G.nodes[v]) + kids

    out = [Rule(f"{rule.id}_{k}", body_of(v), [summary[v]]) for k, v in enumerate(order[1:], start=1)]
    out.append(Rule(rule.id, body_of(root), rule.head))
    return out


def guarded_rule_set(rules: Sequence[Rule]) -> List[Rule]:
    """Apply ``ba_to_guarded`` to every rule, keeping fresh names disjoint."""
    taken = _predicates(rules)
    out: List[Rule] = []
    for r in rules:
        res = ba_to_guarded(r, taken=taken)
        for x in res:
            taken |= {a.predicate for a in x.head}
        out.extend(res)
    return out
