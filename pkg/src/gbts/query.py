"""Boolean conjunctive queries against a full blocked tree.

Two decision procedures are offered:

* ``apt``: a guided search for an atom-term partition tree (APT) of the
  query together with an APT-mapping into the blocked tree, certified by
  :func:`validate_apt`;
* ``query_as_rule``: each connected component ``Q_i`` becomes a rule
  ``Q_i -> match_i`` and the answer is read off the patterns of the
  blocked tree built for the extended rule set.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .blocked import BlockedTree, GeneratedTree, UNode, Unfolding, build_full_blocked_tree
from .chase import KnowledgeBase, Rule, derive, greedy_witnesses
from .classify import classify
from .core import Atom, AtomSet, Term, apply_atom, atom_key, connected_components, term_key
from .errors import GbtsError, NotGreedy
from .patterns import most_informative, saturate

log = logging.getLogger("gbts.query")

Item = Tuple[str, object]  # ("atom", Atom) | ("term", Term)


# --------------------------------------------------------------------------
# APTs


@dataclass(frozen=True)
class APTNode:
    atoms: FrozenSet[Atom]
    terms: FrozenSet[Term]

    def __str__(self) -> str:
        parts = [t.name for t in sorted(self.terms, key=term_key)]
        parts += [str(a) for a in sorted(self.atoms, key=atom_key)]
        return "{" + ", ".join(parts) + "}"


@dataclass(frozen=True)
class APT:
    """Tree over a partition of atoms(Q) ∪ terms(Q); node 0 is the root."""

    nodes: Tuple[APTNode, ...]
    parent: Tuple[Optional[int], ...]

    def __post_init__(self):
        roots = [i for i, p in enumerate(self.parent) if p is None]
        if len(self.nodes) != len(self.parent) or roots != [0]:
            raise GbtsError("an APT needs exactly one root, at index 0")

    def children(self, i: int) -> List[int]:
        return [j for j, p in enumerate(self.parent) if p == i]

    def order(self) -> List[int]:
        """Parents before children (breadth-first)."""
        out, queue = [], deque([0])
        while queue:
            i = queue.popleft()
            out.append(i)
            queue.extend(self.children(i))
        return out

    def branch(self, i: int) -> List[int]:
        out = [i]
        while self.parent[i] is not None:
            i = self.parent[i]
            out.append(i)
        return out

    def subtree(self, i: int) -> List[int]:
        out, stack = [], [i]
        while stack:
            j = stack.pop()
            out.append(j)
            stack.extend(self.children(j))
        return out

    def node_of_term(self) -> Dict[Term, int]:
        return {t: i for i, n in enumerate(self.nodes) for t in n.terms}

    def is_partition_of(self, Q: Iterable[Atom]) -> bool:
        Q = AtomSet(Q)
        atoms = [a for n in self.nodes for a in n.atoms]
        terms = [t for n in self.nodes for t in n.terms]
        return (
            all(n.atoms or n.terms for n in self.nodes)
            and len(atoms) == len(set(atoms)) and set(atoms) == set(Q)
            and len(terms) == len(set(terms)) and set(terms) == set(Q.terms())
        )

    def prefix(self, keep: Sequence[int]) -> Tuple["APT", List[int]]:
        """Sub-APT on a parent-closed set of nodes (root kept at index 0)."""
        keep = [i for i in self.order() if i in set(keep)]
        idx = {old: new for new, old in enumerate(keep)}
        nodes = tuple(self.nodes[i] for i in keep)
        parent = tuple(None if self.parent[i] is None else idx[self.parent[i]] for i in keep)
        return APT(nodes, parent), keep

    def canonical(self):
        def key(n: APTNode):
            return (tuple(sorted(map(atom_key, n.atoms))), tuple(sorted(map(term_key, n.terms))))

        return frozenset((key(self.nodes[i]), None if p is None else key(self.nodes[p])) for i, p in enumerate(self.parent))


@dataclass
class APTMapping:
    """Π (node → blocked-tree bag) and the per-node term maps πᵢ."""

    Pi: Tuple[int, ...]
    pis: Tuple[Dict[Term, Term], ...]

    def pi_gamma(self) -> Dict[Term, Term]:
        out: Dict[Term, Term] = {}
        for p in self.pis:
            out.update(p)
        return out


def _set_partitions(items: List) -> Iterator[List[List]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _rooted_trees(k: int) -> Iterator[Tuple[Optional[int], ...]]:
    """All k^(k-1) rooted labelled trees on 0..k-1, as parent tuples."""
    if k == 1:
        yield (None,)
        return
    if k == 2:
        edge_sets = [[(0, 1)]]
    else:
        edge_sets = (nx.from_prufer_sequence(list(seq)).edges() for seq in product(range(k), repeat=k - 2))
    for edges in edge_sets:
        adj: Dict[int, List[int]] = {i: [] for i in range(k)}
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        for root in range(k):
            parent: List[Optional[int]] = [None] * k
            seen, stack = {root}, [root]
            while stack:
                u = stack.pop()
                for v in adj[u]:
                    if v not in seen:
                        seen.add(v)
                        parent[v] = u
                        stack.append(v)
            yield tuple(parent)


def enumerate_apts(Q: Iterable[Atom]) -> Iterator[APT]:
    """Every APT of Q: set partitions of atoms ∪ terms × rooted trees."""
    Q = AtomSet(Q)
    items: List[Item] = [("atom", a) for a in Q.sorted()] + [("term", t) for t in sorted(Q.terms(), key=term_key)]
    for part in _set_partitions(items):
        nodes = [
            APTNode(frozenset(x for k, x in blk if k == "atom"), frozenset(x for k, x in blk if k == "term"))
            for blk in part
        ]
        k = len(nodes)
        for parent in _rooted_trees(k):
            root = parent.index(None)
            perm = [root] + [i for i in range(k) if i != root]
            pos = {old: new for new, old in enumerate(perm)}
            yield APT(
                tuple(nodes[i] for i in perm),
                tuple(None if parent[i] is None else pos[parent[i]] for i in perm),
            )


def apt_count(n: int) -> int:
    """Σ_k S(n,k)·k^(k-1), by the Stirling recurrence."""
    S = [[0] * (n + 1) for _ in range(n + 1)]
    S[0][0] = 1
    for i in range(1, n + 1):
        for k in range(1, i + 1):
            S[i][k] = k * S[i - 1][k] + S[i - 1][k - 1]
    return sum(S[n][k] * k ** (k - 1) for k in range(1, n + 1))


# --------------------------------------------------------------------------
# validation


@dataclass
class Proof:
    """((𝔗, f), Ξ) as unfolding paths, with the term images and the
    length of each joins copy sequence."""

    xi: Dict[int, Tuple[int, ...]]
    theta: Dict[Term, Term]
    lengths: Dict[int, int] = field(default_factory=dict)
    unfolding: Optional[Unfolding] = field(default=None, repr=False)

    def generated_tree(self) -> Tuple[GeneratedTree, Dict[int, int], Dict[Term, Term]]:
        """Materialize: the generated tree, Ξ as bag indices, π in its names."""
        U = self.unfolding
        G, where = U.materialize(self.xi.values())
        xi = {n: where[p] for n, p in self.xi.items()}
        theta = {}
        for t, c in self.theta.items():
            if c in U.T0:
                theta[t] = c
                continue
            # any node of the proof holding c names it consistently
            for p in self.xi.values():
                v = U.at(p)
                if c in v.terms:
                    theta[t] = U.translate(G, where, v, c)
                    break
        return G, xi, theta


def path_bound(T: BlockedTree) -> int:
    """p × f^f: p abstract patterns, f the largest frontier."""
    p = len(T.rulebase.store.patterns)
    f = max((len(r.frontier) for r in T.kb.rules), default=1) or 1
    return p * f ** f


def _shared_terms(apt: APT, c: int) -> List[Term]:
    """Terms of strict ancestors of c used by atoms in c's subtree."""
    anc = set()
    for j in apt.branch(c)[1:]:
        anc |= apt.nodes[j].terms
    used = set()
    for j in apt.subtree(c):
        for a in apt.nodes[j].atoms:
            used |= set(a.args)
    return sorted(anc & used, key=term_key)


def joins(
    U: Unfolding,
    start: UNode,
    target: int,
    pi_c: Dict[Term, Term],
    atoms: Iterable[Atom],
    theta: Dict[Term, Term],
    shared: Sequence[Term],
    bound: Optional[int] = None,
) -> Optional[Tuple[UNode, Dict[Term, Term], int]]:
    """Breadth-first search of a copy sequence from ``start`` to a bag
    equivalent to blocked bag ``target`` where the node's atoms hold.

    ``theta`` maps the query terms already placed; ``shared`` holds their
    images that must survive along the sequence.  Returns the bag, the
    extended term map and the sequence length.
    """
    T = U.T
    tb = T.bags[target]
    keep = [theta[t] for t in shared if theta[t] not in U.T0]
    atoms = list(atoms)
    seen = set()
    queue = deque((k, 1) for k in U.children(start))
    while queue:
        v, n = queue.popleft()
        if not all(t in v.terms for t in keep):
            continue
        key = U.key(v, keep)
        if key in seen:
            continue
        seen.add(key)
        if T.bags[v.source].pattern == tb.pattern:
            psi = {tb.sigma[a]: c for a, c in v.sigma.items()}
            th = dict(theta)
            ok = True
            for t, img in pi_c.items():
                if img not in psi:
                    ok = False
                    break
                th[t] = psi[img]
            if ok:
                bag_atoms = U.atoms(v)
                if all(all(x in th for x in a.args) and apply_atom(th, a) in bag_atoms for a in atoms):
                    if bound is not None and n > bound:
                        raise GbtsError(f"copy sequence of length {n} exceeds the bound {bound}")
                    return v, th, n
        queue.extend((k, n + 1) for k in U.children(v))
    return None


def validate_apt(T: BlockedTree, apt: APT, gamma: APTMapping, U: Optional[Unfolding] = None) -> Optional[Proof]:
    """A proof of Γ, or None when Γ is not valid (ValidateAPT).

    Nodes are explored root first; each child is attached by ``joins``
    without backtracking.
    """
    U = U or Unfolding(T)
    k = len(apt.nodes)
    if len(gamma.Pi) != k or len(gamma.pis) != k:
        return None
    for i, n in enumerate(apt.nodes):
        b = T.bags[gamma.Pi[i]]
        if set(gamma.pis[i]) != set(n.terms):
            return None
        created = b.generated
        if any(t not in created for t in gamma.pis[i].values()):
            return None
        if any(not t.is_var and gamma.pis[i][t] is not t for t in n.terms):
            return None
    bound = path_bound(T)
    xi: Dict[int, UNode] = {}
    theta: Dict[Term, Term] = {}
    lengths: Dict[int, int] = {}
    for i in apt.order():
        n = apt.nodes[i]
        visible = set()
        for j in apt.branch(i):
            visible |= apt.nodes[j].terms
        if any(not set(a.args) <= visible for a in n.atoms):
            return None
        if apt.parent[i] is None:
            v = U.realize(gamma.Pi[i])
            # π_i speaks about the blocked bag's terms; move them to v's names
            tb = T.bags[gamma.Pi[i]]
            psi = {tb.sigma[a]: c for a, c in v.sigma.items()}
            th = dict(theta)
            th.update({t: psi.get(img, img) for t, img in gamma.pis[i].items()})
            bag_atoms = U.atoms(v)
            if any(apply_atom(th, a) not in bag_atoms for a in n.atoms):
                return None
            xi[i], theta, lengths[i] = v, th, 0
            continue
        found = joins(U, xi[apt.parent[i]], gamma.Pi[i], gamma.pis[i], n.atoms, theta, _shared_terms(apt, i), bound)
        if found is None:
            return None
        xi[i], theta, lengths[i] = found
    return Proof({i: v.path for i, v in xi.items()}, theta, lengths, U)


# --------------------------------------------------------------------------
# guided search


_ANCHOR = object()


@dataclass
class Witness:
    apt: APT
    gamma: APTMapping
    proof: Proof

    def to_dict(self) -> dict:
        G, xi, theta = self.proof.generated_tree()
        return {
            "apt": [
                {"node": i, "parent": p, "terms": [t.name for t in sorted(n.terms, key=term_key)],
                 "atoms": [str(a) for a in sorted(n.atoms, key=atom_key)]}
                for i, (n, p) in enumerate(zip(self.apt.nodes, self.apt.parent))
            ],
            "Pi": list(self.gamma.Pi),
            "pi": [{t.name: c.name for t, c in sorted(p.items(), key=lambda kv: term_key(kv[0]))} for p in self.gamma.pis],
            "xi": {str(k): v for k, v in sorted(xi.items())},
            "pi_gamma": {t.name: c.name for t, c in sorted(theta.items(), key=lambda kv: term_key(kv[0]))},
            "generated_tree": G.to_dict(),
        }


class _Search:
    """Top-down search for a homomorphism of a connected query into the
    unfolding; the topmost bag of each part is located by copy sequences
    whose repetitions (same class, same positions of the terms shared with
    what is already placed) are cut."""

    def __init__(self, T: BlockedTree, U: Optional[Unfolding] = None):
        self.T = T
        self.U = U or Unfolding(T)
        self.T0 = T.T0
        self.fail: Set[tuple] = set()
        self.exists_memo: Dict[tuple, Optional[Tuple[int, ...]]] = {}
        self.ground = AtomSet(a for a in T.atoms() if a.terms() <= self.T0)
        self.ground_home = {}
        for b in T.bags:
            for a in b.atoms:
                if a in self.ground and a not in self.ground_home:
                    self.ground_home[a] = b.index
        # T0 values (and whether a generated term) seen at each position
        self.pos_vals: Dict[Tuple[str, int], Set[object]] = {}
        for a in T.atoms():
            for i, t in enumerate(a.args):
                self.pos_vals.setdefault((a.predicate, i), set()).add(t if t in self.T0 else _ANCHOR)

    # -- helpers ------------------------------------------------------------

    def options(self, Q: AtomSet, v: Term) -> List[object]:
        sets = [self.pos_vals.get((a.predicate, i), set()) for a in Q for i, t in enumerate(a.args) if t is v]
        common = set.intersection(*sets) if sets else set()
        out = sorted((x for x in common if x is not _ANCHOR), key=term_key)
        if _ANCHOR in common:
            out.append(_ANCHOR)
        return out

    def atom_home(self, alpha: Atom, start: UNode) -> Optional[UNode]:
        """A bag at or below ``start`` containing ``alpha`` (terms kept)."""
        U = self.U
        keep = sorted((t for t in set(alpha.args) if t not in self.T0), key=term_key)
        abstract = (U.pattern(start), alpha.predicate, tuple(start.inv.get(t, t) for t in alpha.args))
        if abstract in self.exists_memo:
            rel = self.exists_memo[abstract]
            if rel is None:
                return None
            v = start
            for c in rel:
                v = U.child(v, c)
            return v
        seen = set()
        queue = deque([start])
        found = None
        while queue:
            v = queue.popleft()
            if not all(t in v.terms for t in keep):
                continue
            key = U.key(v, keep)
            if key in seen:
                continue
            seen.add(key)
            if alpha in U.atoms(v):
                found = v
                break
            queue.extend(U.children(v))
        rel = None if found is None else found.path[len(start.path):]
        self.exists_memo[abstract] = rel
        return found

    # -- search -------------------------------------------------------------

    def component(self, C: Sequence[Atom]) -> Optional[Tuple[Dict[Term, Term], List[Tuple[Item, UNode]]]]:
        """C has only constants and anchored variables."""
        for b in self.T.bags:
            if b.blocked or b.parent is None or not b.abstract.generated:
                continue
            res = self.expand(self.U.realize(b.index), list(C), {})
            if res is not None:
                return res
        return None

    def below(self, C: List[Atom], P: UNode, theta: Dict[Term, Term]):
        U = self.U
        mapped = sorted({t for a in C for t in a.args if t in theta}, key=term_key)
        keep = [theta[t] for t in mapped]
        memo = (frozenset(C), U.pattern(P), tuple((t, P.inv.get(theta[t])) for t in mapped))
        if memo in self.fail:
            return None
        seen = set()
        queue = deque(U.children(P))
        while queue:
            v = queue.popleft()
            if not all(t in v.terms for t in keep):
                continue
            key = U.key(v, keep)
            if key in seen:
                continue
            seen.add(key)
            res = self.expand(v, C, theta)
            if res is not None:
                return res
            queue.extend(U.children(v))
        self.fail.add(memo)
        return None

    def expand(self, N: UNode, C: List[Atom], theta: Dict[Term, Term]):
        """Place at N the variables of C created there (at least one)."""
        U = self.U
        gen = sorted(U.created_terms(N), key=term_key) if N.parent is not None else []
        if not gen:
            return None
        free = sorted({t for a in C for t in a.args if t.is_var and t not in theta}, key=term_key)
        choice: Dict[Term, object] = {}
        atoms_of: Dict[Term, List[Atom]] = {}
        for a in C:
            for t in a.args:
                atoms_of.setdefault(t, []).append(a)

        def decided(a: Atom) -> bool:
            return all(t in theta or (t in choice and choice[t] is not None) or not t.is_var for t in a.args)

        def rec(k: int):
            if k == len(free):
                here = {t: c for t, c in choice.items() if c is not None}
                if not here:
                    return None
                th = dict(theta)
                th.update(here)
                placed: List[Tuple[Item, UNode]] = [(("term", t), N) for t in here]
                rest = []
                for a in C:
                    if all(t in th or not t.is_var for t in a.args):
                        home = self.atom_home(apply_atom(th, a), N)
                        if home is None:
                            return None
                        placed.append((("atom", a), home))
                    else:
                        rest.append(a)
                for part in _split(rest, th):
                    sub = self.below(part, N, th)
                    if sub is None:
                        return None
                    th.update(sub[0])
                    placed += sub[1]
                return th, placed
            v = free[k]
            for c in gen + [None]:
                choice[v] = c
                ok = True
                if c is not None:
                    for a in atoms_of.get(v, ()):
                        if decided(a):
                            th = dict(theta)
                            th.update({t: x for t, x in choice.items() if x is not None})
                            if self.atom_home(apply_atom(th, a), N) is None:
                                ok = False
                                break
                if ok:
                    res = rec(k + 1)
                    if res is not None:
                        return res
                del choice[v]
            return None

        return rec(0)


def _split(atoms: List[Atom], mapped: Dict[Term, Term]) -> List[List[Atom]]:
    """Group atoms connected through variables not yet mapped."""
    parent = list(range(len(atoms)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: Dict[Term, int] = {}
    for i, a in enumerate(atoms):
        for t in a.args:
            if t.is_var and t not in mapped:
                if t in owner:
                    parent[find(i)] = find(owner[t])
                else:
                    owner[t] = i
    groups: Dict[int, List[Atom]] = {}
    for i, a in enumerate(atoms):
        groups.setdefault(find(i), []).append(a)
    return [groups[k] for k in sorted(groups)]


def find_witness(T: BlockedTree, Q: Iterable[Atom], search: Optional[_Search] = None) -> Optional[Witness]:
    """APT, APT-mapping and proof for a connected query, or None."""
    Q = AtomSet(Q)
    if any(not t.is_var and t not in T.T0 for t in Q.terms()):
        return None
    S = search or _Search(T)
    qvars = sorted(Q.vars(), key=term_key)
    opts = {v: S.options(Q, v) for v in qvars}
    assign: Dict[Term, object] = {}
    comp_memo: Dict[frozenset, object] = {}

    def ground_ok() -> bool:
        for a in Q:
            if all(not t.is_var or (t in assign and assign[t] is not _ANCHOR) for t in a.args):
                if apply_atom(_sub(assign), a) not in S.ground:
                    return False
        return True

    def rec(k: int):
        if k == len(qvars):
            sub = _sub(assign)
            Qs = [apply_atom(sub, a) for a in Q.sorted()]
            anchored = [a for a in Qs if any(t.is_var for t in a.args)]
            theta: Dict[Term, Term] = {}
            placed: List[Tuple[Item, UNode]] = []
            for part in _split(anchored, {}):
                key = frozenset(part)
                if key not in comp_memo:
                    comp_memo[key] = S.component(part)
                res = comp_memo[key]
                if res is None:
                    return None
                theta.update(res[0])
                placed += res[1]
            return sub, Qs, theta, placed
        v = qvars[k]
        for o in opts[v]:
            assign[v] = o
            if ground_ok():
                res = rec(k + 1)
                if res is not None:
                    return res
            del assign[v]
        return None

    found = rec(0)
    if found is None:
        return None
    sub, Qs, theta, placed = found
    return _assemble(T, S.U, Q, sub, theta, placed)


def _sub(assign: Dict[Term, object]) -> Dict[Term, Term]:
    return {v: o for v, o in assign.items() if o is not _ANCHOR}


def _assemble(T, U: Unfolding, Q: AtomSet, sub, theta, placed) -> Witness:
    """Turn a found homomorphism into (APT, Γ) and certify it."""
    full = dict(sub)
    full.update(theta)
    nodes: Dict[Tuple[int, ...], Dict[str, set]] = {}
    where: Dict[Tuple[int, ...], UNode] = {}

    def put(path, kind, x):
        nodes.setdefault(path, {"atom": set(), "term": set()})[kind].add(x)

    # the substituted atoms were placed; map them back to the query atoms
    back: Dict[Atom, List[Atom]] = {}
    for a in Q:
        back.setdefault(apply_atom(sub, a), []).append(a)
    for (kind, x), v in placed:
        where[v.path] = v
        if kind == "atom":
            for a in back.pop(x, ()):
                put(v.path, "atom", a)
        else:
            put(v.path, "term", x)
    for b, qs in back.items():  # ground atoms
        v = U.realize(_home_of(T, b))
        where[v.path] = v
        for a in qs:
            put(v.path, "atom", a)
    for t in Q.terms():
        if t in full and full[t] not in T.T0:
            continue
        put((), "term", t)
        where[()] = U.root
    paths = sorted(nodes, key=lambda p: (len(p), p))
    # close the set of paths under "longest common prefix" so the tree is rooted
    top = paths[0]
    if any(p[: len(top)] != top for p in paths):
        raise GbtsError("internal: witness bags do not share a topmost bag")
    idx = {p: i for i, p in enumerate(paths)}
    parent: List[Optional[int]] = []
    for p in paths:
        anc = [q for q in paths if len(q) < len(p) and p[: len(q)] == q]
        parent.append(idx[max(anc, key=len)] if anc else None)
    apt = APT(
        tuple(APTNode(frozenset(nodes[p]["atom"]), frozenset(nodes[p]["term"])) for p in paths),
        tuple(parent),
    )
    Pi = []
    pis = []
    for p in paths:
        v = where[p]
        src = T.bags[v.source]
        Pi.append(v.source)
        pis.append({t: (full.get(t, t) if full.get(t, t) in T.T0 else src.sigma[v.inv[full[t]]]) for t in nodes[p]["term"]})
    gamma = APTMapping(tuple(Pi), tuple(pis))
    proof = validate_apt(T, apt, gamma, U)
    if proof is None:
        raise GbtsError("internal: the found APT-mapping does not validate")
    return Witness(apt, gamma, proof)


def _home_of(T: BlockedTree, a: Atom) -> int:
    for b in T.bags:
        if a in b.atoms:
            return b.index
    raise GbtsError(f"internal: {a} not in the blocked tree")


# --------------------------------------------------------------------------
# entailment


def greedy_guard(kb: KnowledgeBase, rounds: int = 4, cap_atoms: int = 20_000) -> None:
    """Accept wfg rule sets; otherwise replay a few breadth-first steps
    and raise NotGreedy at the first step without a greedy witness."""
    if classify(kb.rules).has("wfg"):
        return
    from .chase import breadth_first_rounds

    d = derive(kb, budget=0)
    for n, rs in enumerate(breadth_first_rounds(kb, cap_atoms=cap_atoms), start=1):
        d.steps.extend(rs)
        if n >= rounds:
            break
    for i, w in enumerate(greedy_witnesses(d), start=1):
        if w is None:
            raise NotGreedy(i, f"step {i} ({d.steps[i - 1].rule.id}) has no greedy witness")
    log.warning("rule set is not wfg; no non-greedy step in %d breadth-first rounds", rounds)


@dataclass
class Answer:
    entailed: bool
    mode: str
    witnesses: List[Witness] = field(default_factory=list)
    blocked_tree: Optional[BlockedTree] = None


def _components(Q: AtomSet) -> List[AtomSet]:
    return sorted(connected_components(Q), key=lambda c: [atom_key(a) for a in c.sorted()])


def answer_in_tree(T: BlockedTree, Q: Iterable[Atom]) -> Answer:
    """APT mode against a prepared blocked tree."""
    Q = AtomSet(Q)
    S = _Search(T)
    ws = []
    for comp in _components(Q):
        w = find_witness(T, comp, S)
        if w is None:
            return Answer(False, "apt", [], T)
        ws.append(w)
    return Answer(True, "apt", ws, T)


MATCH = "match__"


def query_rules(kb: KnowledgeBase, Q: AtomSet) -> List[Rule]:
    return [
        Rule(f"{MATCH}{i}", comp, AtomSet([Atom(f"{MATCH}{i}", [])]))
        for i, comp in enumerate(_components(Q))
    ]


def answer_as_rule(kb: KnowledgeBase, Q: Iterable[Atom], cap_patterns: Optional[int] = None, cap_bags: Optional[int] = None) -> Answer:
    Q = AtomSet(Q)
    qr = query_rules(kb, Q)
    kb2 = kb.with_rules(list(kb.rules) + qr)
    kw = {} if cap_patterns is None else {"cap_patterns": cap_patterns}
    mi = most_informative(saturate(kb2, **kw))
    T = build_full_blocked_tree(kb2, mi, **({} if cap_bags is None else {"cap_bags": cap_bags}))
    rt = mi.rt
    n = len(kb.rules)
    hit = set()
    for b in T.bags:
        for ri, mask, _ in T.rulebase.store[b.pattern].elements:
            if ri >= n and mask == rt.full[ri]:
                hit.add(ri)
    return Answer(len(hit) == len(qr), "query_as_rule", [], T)


def prepare(
    kb: KnowledgeBase,
    cap_patterns: Optional[int] = None,
    cap_bags: Optional[int] = None,
    guard_rounds: int = 4,
) -> BlockedTree:
    """Guard, saturate and build the full blocked tree once; reusable for many queries."""
    greedy_guard(kb, guard_rounds)
    kw = {} if cap_patterns is None else {"cap_patterns": cap_patterns}
    mi = most_informative(saturate(kb, **kw))
    return build_full_blocked_tree(kb, mi, **({} if cap_bags is None else {"cap_bags": cap_bags}))


MODES = ("apt", "rule", "query_as_rule")


def answer(
    kb: KnowledgeBase,
    Q: Iterable[Atom],
    mode: str = "apt",
    cap_patterns: Optional[int] = None,
    cap_bags: Optional[int] = None,
    guard_rounds: int = 4,
) -> Answer:
    """Decide ``kb |= Q``.

    ``apt`` searches an APT-mapping into the blocked tree of the KB;
    ``rule``/``query_as_rule`` saturates the KB extended with one nullary
    rule per query component.
    """
    if mode not in MODES:
        raise GbtsError(f"unknown mode {mode!r}")
    Q = AtomSet(Q)
    if any(not t.is_var and t not in kb.T0 for t in Q.terms()):
        return Answer(False, mode)
    if mode == "apt":
        return answer_in_tree(prepare(kb, cap_patterns, cap_bags, guard_rounds), Q)
    greedy_guard(kb, guard_rounds)
    return answer_as_rule(kb, Q, cap_patterns, cap_bags)


def entails(kb: KnowledgeBase, Q: Iterable[Atom], mode: str = "apt", **kw) -> bool:
    return answer(kb, Q, mode, **kw).entailed
