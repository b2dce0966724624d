"""Terms, atoms, atom sets, substitutions and the homomorphism engine.

Terms and atoms are interned, immutable and cheap to hash.  A substitution
is a plain ``dict`` from :class:`Term` to :class:`Term`; constants are never
keys (they always map to themselves).
"""

from __future__ import annotations

from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

__all__ = [
    "Term",
    "Variable",
    "Constant",
    "Atom",
    "AtomSet",
    "Substitution",
    "AtomIndex",
    "homomorphisms",
    "has_homomorphism",
    "apply_substitution",
    "apply_atom",
    "connected_components",
    "vars_of",
    "terms_of",
    "term_key",
    "atom_key",
    "sorted_atoms",
]


class Term:
    """A variable or a constant.  Instances are interned per (kind, name)."""

    __slots__ = ("name", "__weakref__")
    is_var: bool = False
    _table: Dict[Tuple[bool, str], "Term"] = {}

    def __new__(cls, name: str):
        key = (cls.is_var, name)
        t = Term._table.get(key)
        if t is None:
            t = object.__new__(cls)
            object.__setattr__(t, "name", name)
            Term._table[key] = t
        return t

    def __setattr__(self, k, v):  # pragma: no cover - immutability guard
        raise AttributeError("terms are immutable")

    # equality and hashing are inherited from object: identity is correct
    # because of interning

    def __lt__(self, other: "Term") -> bool:
        return term_key(self) < term_key(other)

    def __reduce__(self):
        return (type(self), (self.name,))

    def __repr__(self) -> str:
        return self.name


class Variable(Term):
    __slots__ = ()
    is_var = True


class Constant(Term):
    __slots__ = ()
    is_var = False


def term_key(t: Term) -> Tuple[int, str]:
    """Total order: constants before variables, then by name."""
    return (1 if t.is_var else 0, t.name)


Substitution = Dict[Term, Term]


class Atom:
    __slots__ = ("predicate", "args", "_hash")

    def __init__(self, predicate: str, args: Sequence[Term] = ()):
        object.__setattr__(self, "predicate", predicate)
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "_hash", hash((predicate, self.args)))

    def __setattr__(self, k, v):  # pragma: no cover
        raise AttributeError("atoms are immutable")

    @property
    def arity(self) -> int:
        return len(self.args)

    def terms(self) -> frozenset:
        return frozenset(self.args)

    def vars(self) -> frozenset:
        return frozenset(t for t in self.args if t.is_var)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Atom)
            and self._hash == other._hash
            and self.predicate == other.predicate
            and self.args == other.args
        )

    def __lt__(self, other: "Atom") -> bool:
        return atom_key(self) < atom_key(other)

    def __reduce__(self):
        return (Atom, (self.predicate, self.args))

    def __repr__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(t.name for t in self.args)})"


def atom_key(a: Atom):
    return (a.predicate, tuple(term_key(t) for t in a.args))


def sorted_atoms(atoms: Iterable[Atom]) -> List[Atom]:
    return sorted(atoms, key=atom_key)


def vars_of(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(t for a in atoms for t in a.args if t.is_var)


def terms_of(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(t for a in atoms for t in a.args)


class AtomSet(frozenset):
    """Set of atoms with cached ``vars()`` / ``terms()``."""

    __slots__ = ("_vars", "_terms")

    def __new__(cls, atoms: Iterable[Atom] = ()):
        s = super().__new__(cls, atoms)
        s._vars = None
        s._terms = None
        return s

    def vars(self) -> frozenset:
        if self._vars is None:
            self._vars = vars_of(self)
        return self._vars

    def terms(self) -> frozenset:
        if self._terms is None:
            self._terms = terms_of(self)
        return self._terms

    def constants(self) -> frozenset:
        return frozenset(t for t in self.terms() if not t.is_var)

    def union(self, *others) -> "AtomSet":
        return AtomSet(frozenset.union(self, *others))

    def __or__(self, other) -> "AtomSet":
        return AtomSet(frozenset.__or__(self, other))

    def __sub__(self, other) -> "AtomSet":
        return AtomSet(frozenset.__sub__(self, other))

    def sorted(self) -> List[Atom]:
        return sorted_atoms(self)

    def __repr__(self) -> str:
        return "{" + ", ".join(map(repr, self.sorted())) + "}"


def apply_atom(s: Mapping[Term, Term], a: Atom) -> Atom:
    return Atom(a.predicate, tuple(s.get(t, t) for t in a.args))


def apply_substitution(s: Mapping[Term, Term], atoms: Iterable[Atom]) -> AtomSet:
    """Pointwise image; variables outside ``dom(s)`` pass through."""
    return AtomSet(apply_atom(s, a) for a in atoms)


class AtomIndex:
    """Lookup structure over a target atom set, reusable across searches."""

    __slots__ = ("atoms", "by_pred", "by_pos")

    def __init__(self, atoms: Iterable[Atom]):
        self.atoms = frozenset(atoms)
        by_pred: Dict[str, List[Atom]] = {}
        for a in sorted_atoms(self.atoms):
            by_pred.setdefault(a.predicate, []).append(a)
        by_pos: Dict[tuple, List[Atom]] = {}
        for pred, lst in by_pred.items():
            for a in lst:
                for i, t in enumerate(a.args):
                    by_pos.setdefault((pred, i, t), []).append(a)
        self.by_pred = by_pred
        self.by_pos = by_pos

    def candidates(self, a: Atom, binding: Mapping[Term, Term]) -> List[Atom]:
        best = self.by_pred.get(a.predicate)
        if not best:
            return []
        for i, t in enumerate(a.args):
            img = binding.get(t) if t.is_var else t
            if img is not None:
                lst = self.by_pos.get((a.predicate, i, img))
                if not lst:
                    return []
                if len(lst) < len(best):
                    best = lst
        return best


def _match(a: Atom, target: Atom, binding: Substitution) -> Optional[List[Term]]:
    """Extend ``binding`` in place so that a maps to target; returns the
    newly bound variables, or None (binding left untouched) on failure."""
    if len(a.args) != len(target.args):
        return None
    added: List[Term] = []
    for s, t in zip(a.args, target.args):
        if s.is_var:
            cur = binding.get(s)
            if cur is None:
                binding[s] = t
                added.append(s)
            elif cur is not t:
                for v in added:
                    del binding[v]
                return None
        elif s is not t:
            for v in added:
                del binding[v]
            return None
    return added


def homomorphisms(
    source: Iterable[Atom],
    target,
    seed: Optional[Mapping[Term, Term]] = None,
) -> Iterator[Substitution]:
    """Yield every extension of ``seed`` mapping ``source`` into ``target``.

    ``target`` may be an iterable of atoms or a prebuilt :class:`AtomIndex`.
    Atoms are consumed most-constrained first (ties broken by the static
    predicate/argument order) and candidates are tried in lexicographic
    order, so the stream is deterministic.
    """
    index = target if isinstance(target, AtomIndex) else AtomIndex(target)
    binding: Substitution = dict(seed) if seed else {}
    todo = sorted_atoms(set(source))

    def bound_count(a: Atom) -> int:
        return sum(1 for t in a.args if not t.is_var or t in binding)

    def rec(remaining: List[Atom]) -> Iterator[Substitution]:
        if not remaining:
            yield dict(binding)
            return
        # most-constrained atom first; static order breaks ties
        best_i = 0
        best_score = -1
        for i, a in enumerate(remaining):
            sc = bound_count(a)
            if sc > best_score:
                best_i, best_score = i, sc
        a = remaining[best_i]
        rest = remaining[:best_i] + remaining[best_i + 1:]
        for cand in index.candidates(a, binding):
            added = _match(a, cand, binding)
            if added is None:
                continue
            yield from rec(rest)
            for v in added:
                del binding[v]

    return rec(todo)


def has_homomorphism(source, target, seed=None) -> bool:
    for _ in homomorphisms(source, target, seed):
        return True
    return False


def connected_components(atoms: Iterable[Atom]) -> List[AtomSet]:
    """Split atoms into components linked by shared variables.

    Constants never connect atoms.  Variable-free atoms are singletons.
    Components are returned in order of their smallest atom.
    """
    atoms = sorted_atoms(set(atoms))
    parent = list(range(len(atoms)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    first_seen: Dict[Term, int] = {}
    for i, a in enumerate(atoms):
        for t in a.args:
            if t.is_var:
                j = first_seen.setdefault(t, i)
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: Dict[int, List[Atom]] = {}
    for i, a in enumerate(atoms):
        groups.setdefault(find(i), []).append(a)
    return [AtomSet(groups[k]) for k in sorted(groups)]
