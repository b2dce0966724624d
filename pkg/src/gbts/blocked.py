"""Full blocked trees, bag copies and trees generated from a blocked tree.

Every bag, in the blocked tree or in a generated tree, is an instance of an
abstract bag: its concrete terms are ``sigma(a)`` for the abstract terms
``a``.  Two bags built from the same abstract bag are related by the
natural bijection ``sigma_2 ∘ sigma_1⁻¹``, which is how copies are made.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .chase import FreshVars, KnowledgeBase
from .core import AtomSet, Term, Variable, apply_substitution, term_key
from .errors import BudgetExceeded, GbtsError
from .patterns import AbstractBag, Pairs, RuleBase, most_informative, saturate
from .syntax import format_atom

log = logging.getLogger("gbts.blocked")

DEFAULT_CAP_BAGS = 100_000


def _sorted_terms(ts: Iterable[Term]) -> List[Term]:
    return sorted(ts, key=term_key)


def instantiate(
    abag: AbstractBag,
    link: Pairs,
    parent_sigma: Dict[Term, Term],
    T0: frozenset,
    fresh: FreshVars,
) -> Dict[Term, Term]:
    """Concrete names for the terms of ``abag`` placed under a bag whose
    abstract-to-concrete map is ``parent_sigma``."""
    lam = dict(link)
    sigma: Dict[Term, Term] = {}
    for a in _sorted_terms(abag.terms):
        if a in T0:
            sigma[a] = a
        elif a in lam:
            sigma[a] = parent_sigma[lam[a]]
        else:
            sigma[a] = fresh()
    return sigma


@dataclass
class BlockedBag:
    index: int
    parent: Optional[int]
    pattern: int
    abstract: AbstractBag
    link: Pairs
    sigma: Dict[Term, Term]
    blocked: bool
    rule_id: Optional[str] = None
    creation_rule: Optional[int] = None
    children: List[int] = field(default_factory=list)

    @property
    def terms(self) -> frozenset:
        return frozenset(self.sigma.values())

    @property
    def atoms(self) -> AtomSet:
        return apply_substitution(self.sigma, self.abstract.atoms)

    @property
    def generated(self) -> frozenset:
        """Terms created in this bag (T0 at the root)."""
        if self.parent is None:
            return frozenset(self.sigma.values())
        return frozenset(self.sigma[a] for a in self.abstract.generated)


@dataclass
class BlockedTree:
    kb: KnowledgeBase
    rulebase: RuleBase
    bags: List[BlockedBag]
    representative: Dict[int, int]  # pattern id -> non-blocked bag

    @property
    def T0(self) -> frozenset:
        return self.kb.T0

    @property
    def root(self) -> BlockedBag:
        return self.bags[0]

    def rep(self, i: int) -> int:
        """Representative of the ∼-class of bag ``i``."""
        return self.representative[self.bags[i].pattern]

    def classes(self) -> List[List[int]]:
        by: Dict[int, List[int]] = {}
        for b in self.bags:
            by.setdefault(b.pattern, []).append(b.index)
        return sorted(by.values())

    def blocked_bags(self) -> List[int]:
        return [b.index for b in self.bags if b.blocked]

    def atoms(self) -> AtomSet:
        return AtomSet(a for b in self.bags for a in b.atoms)

    def depth(self, i: int) -> int:
        d = 0
        while self.bags[i].parent is not None:
            i = self.bags[i].parent
            d += 1
        return d

    def pattern_elements(self, i: int) -> List[str]:
        return self.rulebase.store.format_pattern(self.bags[i].pattern)

    # -- export -----------------------------------------------------------

    def to_dict(self) -> dict:
        bags = []
        for b in self.bags:
            bags.append({
                "id": b.index,
                "parent": b.parent,
                "rule": b.rule_id,
                "pattern": b.pattern,
                "blocked": b.blocked,
                "representative": self.rep(b.index),
                "terms": [t.name for t in _sorted_terms(b.terms)],
                "atoms": [format_atom(a, "facts") for a in b.atoms.sorted()],
                "link": {b.sigma[c].name: self.bags[b.parent].sigma[p].name for c, p in b.link}
                if b.parent is not None else {},
            })
        return {"bags": bags, "patterns": len(self.rulebase.store.patterns)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_dot(self) -> str:
        lines = ["digraph blocked {", "  node [shape=box];"]
        for b in self.bags:
            label = f"B{b.index} P{b.pattern}\\n" + ", ".join(format_atom(a, "facts") for a in b.atoms.sorted())
            style = ", style=dashed" if b.blocked else ""
            lines.append(f'  b{b.index} [label="{label}"{style}];')
        for b in self.bags:
            if b.parent is not None:
                lines.append(f"  b{b.parent} -> b{b.index};")
        for b in self.bags:
            if b.blocked:
                lines.append(f"  b{b.index} -> b{self.rep(b.index)} [style=dotted, constraint=false];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_full_blocked_tree(
    kb: KnowledgeBase,
    mi: Optional[RuleBase] = None,
    cap_bags: int = DEFAULT_CAP_BAGS,
    cap_patterns: Optional[int] = None,
) -> BlockedTree:
    """Breadth-first construction from the most informative rules.

    A new bag is blocked iff its abstract pattern was already assigned to
    an earlier bag; the earliest bag of each class is its representative.
    """
    if mi is None:
        kw = {} if cap_patterns is None else {"cap_patterns": cap_patterns}
        mi = most_informative(saturate(kb, **kw))
    elif not mi.most_informative:
        mi = most_informative(mi)
    st = mi.store
    T0 = kb.T0
    fresh = FreshVars("b", avoid=T0)
    creations: Dict[int, list] = {}
    for r in mi.creations():
        creations.setdefault(r.lhs, []).append(r)

    root_pid = mi.root_pattern()
    root = BlockedBag(0, None, root_pid, st.root_bag, (), {t: t for t in T0}, False)
    bags = [root]
    rep = {root_pid: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for bi in frontier:
            parent = bags[bi]
            for cr in creations.get(parent.pattern, ()):
                if len(bags) >= cap_bags:
                    raise BudgetExceeded("bag", cap_bags)
                abag = st[cr.rhs].support
                sigma = instantiate(abag, cr.link, parent.sigma, T0, fresh)
                child = BlockedBag(
                    len(bags), bi, cr.rhs, abag, cr.link, sigma,
                    blocked=cr.rhs in rep,
                    rule_id=mi.rt.rules[abag.rule_index].id,
                    creation_rule=cr.id,
                )
                bags.append(child)
                parent.children.append(child.index)
                if not child.blocked:
                    rep[cr.rhs] = child.index
                    nxt.append(child.index)
        frontier = nxt
    log.info("blocked tree: %d bags, %d blocked", len(bags), sum(b.blocked for b in bags))
    return BlockedTree(kb, mi, bags, rep)


# --------------------------------------------------------------------------
# generated trees


@dataclass
class GenBag:
    index: int
    parent: Optional[int]
    source: int  # f: bag of the blocked tree this one copies
    sigma: Dict[Term, Term]
    children: Dict[int, int] = field(default_factory=dict)  # source child -> own child

    @property
    def terms(self) -> frozenset:
        return frozenset(self.sigma.values())


class GeneratedTree:
    """A tree generated by a blocked tree via ``f`` (``bags[i].source``).

    Starts from the root pair; ``copy`` is the only growth step.  Bags whose
    whole branch reproduces the blocked tree keep the blocked tree's names.
    """

    def __init__(self, T: BlockedTree, prefix: str = "g"):
        self.T = T
        self.fresh = FreshVars(prefix, avoid=set(T.T0) | T.atoms().terms())
        self.bags: List[GenBag] = [GenBag(0, None, 0, dict(T.root.sigma))]
        self.steps: List[Tuple[int, int]] = []

    def f(self, i: int) -> int:
        return self.bags[i].source

    def atoms_of(self, i: int) -> AtomSet:
        b = self.bags[i]
        return apply_substitution(b.sigma, self.T.bags[b.source].abstract.atoms)

    def atoms(self) -> AtomSet:
        return AtomSet(a for i in range(len(self.bags)) for a in self.atoms_of(i))

    def created(self, i: int) -> frozenset:
        b = self.bags[i]
        if b.parent is None:
            return frozenset(b.sigma.values())
        return frozenset(b.sigma[a] for a in self.T.bags[b.source].abstract.generated)

    def copyable(self, i: int) -> List[int]:
        """Children of rep(f(B)) in the blocked tree."""
        return list(self.T.bags[self.T.rep(self.f(i))].children)

    def psi(self, i: int) -> Dict[Term, Term]:
        """Natural bijection from f(B) to B."""
        src = self.T.bags[self.f(i)]
        return {src.sigma[a]: c for a, c in self.bags[i].sigma.items()}

    def copy(self, i: int, source_child: int) -> int:
        """Copy ``source_child`` (a child of rep(f(B_i))) under bag ``i``.

        Returns the existing copy when there is one, as the definition
        allows a single child per source child.
        """
        b = self.bags[i]
        T = self.T
        r = T.rep(b.source)
        sc = T.bags[source_child]
        if sc.parent != r:
            raise GbtsError(f"B{source_child} is not a child of B{r}, the representative of B{b.source}")
        if source_child in b.children:
            return b.children[source_child]
        # the parent of sc is rep r, equivalent to f(B_i): same abstract bag
        if self._reproduces(i, r):
            sigma = dict(sc.sigma)
        else:
            sigma = instantiate(sc.abstract, sc.link, b.sigma, T.T0, self.fresh)
        g = GenBag(len(self.bags), i, source_child, sigma)
        self.bags.append(g)
        b.children[source_child] = g.index
        self.steps.append((i, source_child))
        return g.index

    def _reproduces(self, i: int, r: int) -> bool:
        # bag i carries the blocked tree's own names for r
        b = self.bags[i]
        return b.source == r and b.sigma == self.T.bags[r].sigma

    def realize(self, target: int) -> int:
        """Generated bag reproducing blocked-tree bag ``target`` with its own
        names, built along the blocked-tree branch."""
        path = []
        j = target
        while self.T.bags[j].parent is not None:
            path.append(j)
            j = self.T.bags[j].parent
        cur = 0
        for j in reversed(path):
            cur = self.copy(cur, j)
        return cur

    def ancestors(self, i: int) -> List[int]:
        out = []
        while self.bags[i].parent is not None:
            i = self.bags[i].parent
            out.append(i)
        return out

    def is_descendant(self, i: int, j: int) -> bool:
        """True when i is a strict descendant of j."""
        return j in self.ancestors(i)

    def script(self) -> List[Tuple[int, int]]:
        return list(self.steps)

    def to_dict(self) -> dict:
        return {
            "bags": [
                {
                    "id": b.index,
                    "parent": b.parent,
                    "f": b.source,
                    "atoms": [format_atom(a, "facts") for a in self.atoms_of(b.index).sorted()],
                }
                for b in self.bags
            ],
            "copy_steps": [{"under": u, "source": s} for u, s in self.steps],
        }


def bag_copy(G: GeneratedTree, source_child: int, target: int) -> int:
    """Copy blocked-tree bag ``source_child`` under generated bag ``target``."""
    return G.copy(target, source_child)


def generate(
    T: BlockedTree,
    script: Optional[Sequence[Tuple[int, int]]] = None,
    budget: Optional[int] = None,
) -> GeneratedTree:
    """Root pair plus copy steps.

    ``script`` lists ``(generated bag, source child)`` pairs.  Without a
    script, copies are made breadth-first (every possible copy of each bag,
    in order) until ``budget`` copies were made; ``budget=None`` with no
    script would not terminate on recursive rule sets and is rejected.
    """
    G = GeneratedTree(T)
    if script is not None:
        for n, (under, src) in enumerate(script):
            if budget is not None and n >= budget:
                break
            G.copy(under, src)
        return G
    if budget is None:
        raise GbtsError("generate needs a script or a budget")
    queue = deque([0])
    made = 0
    while queue and made < budget:
        i = queue.popleft()
        for c in G.copyable(i):
            if made >= budget:
                break
            queue.append(G.copy(i, c))
            made += 1
    return G


# --------------------------------------------------------------------------
# canonical unfolding


@dataclass(eq=False)
class UNode:
    """A bag of the (infinite) unfolding of a blocked tree.

    ``path`` lists the blocked-tree bags copied from the root; generated
    terms are named after the path, so equal paths give equal bags.
    """

    path: Tuple[int, ...]
    source: int
    sigma: Dict[Term, Term]
    parent: Optional["UNode"]
    kids: Optional[List["UNode"]] = None

    def __post_init__(self):
        self.inv = {c: a for a, c in self.sigma.items()}
        self.terms = frozenset(self.sigma.values())


class Unfolding:
    """Lazily built tree containing every tree generated by ``T`` (each bag
    gets one copy of every child of its class representative)."""

    def __init__(self, T: BlockedTree):
        self.T = T
        self.T0 = T.T0
        self.root = UNode((), 0, dict(T.root.sigma), None)
        self.created = 0

    def pattern(self, v: UNode) -> int:
        return self.T.bags[v.source].pattern

    def children(self, v: UNode) -> List[UNode]:
        if v.kids is None:
            T = self.T
            out = []
            for c in T.bags[T.rep(v.source)].children:
                sc = T.bags[c]
                lam = dict(sc.link)
                path = v.path + (c,)
                tag = "_".join(map(str, path))
                sigma = {}
                for a in _sorted_terms(sc.abstract.terms):
                    if a in self.T0:
                        sigma[a] = a
                    elif a in lam:
                        sigma[a] = v.sigma[lam[a]]
                    else:
                        sigma[a] = _path_var(tag, a)
                out.append(UNode(path, c, sigma, v))
                self.created += 1
            v.kids = out
        return v.kids

    def child(self, v: UNode, c: int) -> UNode:
        for k in self.children(v):
            if k.source == c:
                return k
        raise GbtsError(f"B{c} cannot be copied under a copy of B{v.source}")

    def at(self, path: Sequence[int]) -> UNode:
        v = self.root
        for c in path:
            v = self.child(v, c)
        return v

    def realize(self, b: int) -> UNode:
        """The unfolding bag that reproduces blocked-tree bag ``b``."""
        path = []
        while self.T.bags[b].parent is not None:
            path.append(b)
            b = self.T.bags[b].parent
        return self.at(reversed(path))

    def atoms(self, v: UNode) -> AtomSet:
        return apply_substitution(v.sigma, self.T.bags[v.source].abstract.atoms)

    def created_terms(self, v: UNode) -> frozenset:
        if v.parent is None:
            return frozenset(self.T0)
        return frozenset(v.sigma[a] for a in self.T.bags[v.source].abstract.generated)

    def key(self, v: UNode, terms: Sequence[Term]) -> tuple:
        """Class of ``v`` and the positions of ``terms`` in it."""
        return (self.pattern(v), tuple(v.inv.get(t) for t in terms))

    def materialize(self, paths: Iterable[Sequence[int]]) -> Tuple[GeneratedTree, Dict[Tuple[int, ...], int]]:
        """Generated tree containing the given paths, with a path → bag map."""
        G = GeneratedTree(self.T)
        where: Dict[Tuple[int, ...], int] = {(): 0}
        for p in sorted(set(tuple(p) for p in paths), key=lambda p: (len(p), p)):
            cur = 0
            for k in range(len(p)):
                sub = tuple(p[: k + 1])
                if sub not in where:
                    where[sub] = G.copy(cur, p[k])
                cur = where[sub]
        return G, where

    def translate(self, G: GeneratedTree, where: Dict[Tuple[int, ...], int], v: UNode, t: Term) -> Term:
        """Name in ``G`` of term ``t`` of unfolding bag ``v``."""
        if t in self.T0:
            return t
        return G.bags[where[v.path]].sigma[v.inv[t]]


def _path_var(tag: str, a: Term) -> Term:
    return Variable(f"_u{tag}_{a.name}")
