"""Rules, knowledge bases, derivations, derivation trees and the chase oracle."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .core import (
    Atom,
    AtomIndex,
    AtomSet,
    Substitution,
    Term,
    Variable,
    _match,
    apply_substitution,
    has_homomorphism,
    homomorphisms,
    term_key,
)
from .errors import BudgetExceeded, GbtsError, InvalidScriptStep, NotGreedy, TriggerNotHomomorphism

log = logging.getLogger("gbts.chase")

DEFAULT_CAP_ATOMS = 10**6


@dataclass(frozen=True)
class Rule:
    """Existential rule ``body -> head``; head-only variables are existential."""

    id: str
    body: AtomSet
    head: AtomSet
    frontier: frozenset = field(init=False, compare=False, repr=False)
    existentials: frozenset = field(init=False, compare=False, repr=False)
    head_constants: frozenset = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        body = self.body if isinstance(self.body, AtomSet) else AtomSet(self.body)
        head = self.head if isinstance(self.head, AtomSet) else AtomSet(self.head)
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "frontier", body.vars() & head.vars())
        object.__setattr__(self, "existentials", head.vars() - body.vars())
        object.__setattr__(self, "head_constants", head.constants())

    @property
    def frontier_sorted(self) -> Tuple[Variable, ...]:
        return tuple(sorted(self.frontier, key=term_key))

    def variables(self) -> frozenset:
        return self.body.vars() | self.head.vars()

    def constants(self) -> frozenset:
        return self.body.constants() | self.head.constants()

    def __str__(self) -> str:
        b = " & ".join(map(repr, self.body.sorted()))
        h = " & ".join(map(repr, self.head.sorted()))
        return f"{self.id}: {b} -> {h}"


def rename_apart(rules: Sequence[Rule], avoid: Iterable[Term] = ()) -> List[Rule]:
    """Rename rule variables so that no two rules (nor ``avoid``) share one."""
    used = set(avoid)
    out: List[Rule] = []
    for k, r in enumerate(rules):
        vs = r.variables()
        if not (vs & used):
            used |= vs
            out.append(r)
            continue
        ren: Dict[Term, Term] = {}
        for v in sorted(vs, key=term_key):
            suffix = f"_{k}"
            name = v.name + suffix
            while Variable(name) in used or Variable(name) in vs:
                suffix += "_"
                name = v.name + suffix
            ren[v] = Variable(name)
            used.add(ren[v])
        out.append(Rule(r.id, apply_substitution(ren, r.body), apply_substitution(ren, r.head)))
    return out


def check_arities(atom_groups: Iterable[Iterable[Atom]]) -> Dict[str, int]:
    arity: Dict[str, int] = {}
    for group in atom_groups:
        for a in group:
            k = arity.setdefault(a.predicate, len(a.args))
            if k != len(a.args):
                raise GbtsError(f"predicate {a.predicate} used with arities {k} and {len(a.args)}")
    return arity


@dataclass(frozen=True)
class KnowledgeBase:
    """A fact and a rule set.  Rules are renamed apart on construction."""

    fact: AtomSet
    rules: Tuple[Rule, ...] = ()
    T0: frozenset = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        fact = self.fact if isinstance(self.fact, AtomSet) else AtomSet(self.fact)
        rules = tuple(rename_apart(list(self.rules), avoid=fact.vars()))
        ids = [r.id for r in rules]
        if len(set(ids)) != len(ids):
            raise GbtsError(f"duplicate rule ids in {ids}")
        check_arities([fact] + [r.body | r.head for r in rules])
        consts = set(fact.terms())
        for r in rules:
            consts |= r.constants()
        object.__setattr__(self, "fact", fact)
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "T0", frozenset(consts))

    def rule(self, rid: str) -> Rule:
        for r in self.rules:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def constants(self) -> frozenset:
        return frozenset(t for t in self.T0 if not t.is_var)

    def with_rules(self, rules: Sequence[Rule]) -> "KnowledgeBase":
        return KnowledgeBase(self.fact, tuple(rules))


class FreshVars:
    """Deterministic supply of fresh variables ``_{prefix}z{n}``."""

    def __init__(self, prefix: str = "", avoid: Iterable[Term] = ()):
        self.prefix = prefix
        self.n = 0
        self.avoid = set(avoid)

    def __call__(self) -> Variable:
        while True:
            self.n += 1
            v = Variable(f"_{self.prefix}z{self.n}")
            if v not in self.avoid:
                return v


def safe_head(rule: Rule, pi: Substitution, fresh: FreshVars) -> Tuple[AtomSet, Dict[Term, Term]]:
    """Image of the head under pi^safe: frontier via pi, existentials fresh."""
    ext = {z: fresh() for z in sorted(rule.existentials, key=term_key)}
    full = {x: pi[x] for x in rule.frontier}
    full.update(ext)
    return apply_substitution(full, rule.head), ext


def apply_rule(
    F: Iterable[Atom],
    R: Rule,
    pi: Substitution,
    fresh: Optional[FreshVars] = None,
    check: bool = True,
) -> Tuple[AtomSet, AtomSet]:
    """Return ``(F ∪ π^safe(head), π^safe(head))``."""
    F = F if isinstance(F, AtomSet) else AtomSet(F)
    if check:
        if not has_homomorphism(R.body, F, {k: v for k, v in pi.items() if k in R.body.vars()}):
            raise TriggerNotHomomorphism(f"{R.id}: {pi} does not extend to a homomorphism")
    missing = [x for x in R.frontier if x not in pi]
    if missing:
        # complete the frontier with the first extension
        for h in homomorphisms(R.body, F, pi):
            pi = h
            break
    if fresh is None:
        fresh = FreshVars(avoid=F.terms())
    produced, _ = safe_head(R, pi, fresh)
    return F | produced, produced


# --------------------------------------------------------------------------
# derivations


@dataclass
class Step:
    rule: Rule
    trigger: Dict[Term, Term]  # restricted to the frontier
    homomorphism: Dict[Term, Term]
    produced: AtomSet
    fresh: Dict[Term, Term]


@dataclass
class Derivation:
    kb: KnowledgeBase
    steps: List[Step] = field(default_factory=list)

    def fact(self, i: Optional[int] = None) -> AtomSet:
        """F_i (F_k when i is None)."""
        if i is None:
            i = len(self.steps)
        atoms = set(self.kb.fact)
        for s in self.steps[:i]:
            atoms |= s.produced
        return AtomSet(atoms)

    def __len__(self) -> int:
        return len(self.steps)


def frontier_key(rule_idx: int, rule: Rule, pi: Substitution) -> tuple:
    return (rule_idx, tuple(term_key(pi[x]) for x in rule.frontier_sorted))


def _new_triggers(
    rules: Sequence[Rule],
    index: AtomIndex,
    delta: Sequence[Atom],
    applied: set,
) -> List[Tuple[int, Substitution]]:
    """Triggers that use at least one atom of ``delta`` and whose frontier
    image was never applied before, sorted deterministically."""
    found: Dict[tuple, Substitution] = {}
    by_pred: Dict[str, List[Atom]] = {}
    for d in delta:
        by_pred.setdefault(d.predicate, []).append(d)
    for ri, r in enumerate(rules):
        body = r.body.sorted()
        if not body:
            key = frontier_key(ri, r, {})
            if key not in applied and key not in found:
                found[key] = {}
            continue
        for k, b in enumerate(body):
            for d in by_pred.get(b.predicate, ()):
                seed: Substitution = {}
                if _match(b, d, seed) is None:
                    continue
                rest = body[:k] + body[k + 1:]
                for h in homomorphisms(rest, index, seed):
                    key = frontier_key(ri, r, h)
                    if key not in applied and key not in found:
                        found[key] = h
    return [(key[0], found[key]) for key in sorted(found)]


def breadth_first_rounds(
    kb: KnowledgeBase,
    fresh: Optional[FreshVars] = None,
    cap_atoms: int = DEFAULT_CAP_ATOMS,
) -> Iterator[List[Step]]:
    """Yield the steps of each breadth-first round (α_1, α_2, ...).

    At round i every new trigger is computed against F_{i-1} and then
    applied.  A trigger is identified by its rule and frontier image.
    Stops when a round has no new trigger.
    """
    if fresh is None:
        fresh = FreshVars(avoid=kb.T0)
    rules = list(kb.rules)
    current = set(kb.fact)
    delta: List[Atom] = sorted(current, key=lambda a: (a.predicate, tuple(map(term_key, a.args))))
    applied: set = set()
    first = True
    while True:
        index = AtomIndex(current)
        if first:
            triggers = _new_triggers(rules, index, delta, applied)
            first = False
        else:
            triggers = _new_triggers([r for r in rules if r.body], index, delta, applied)
        if not triggers:
            return
        steps: List[Step] = []
        added: List[Atom] = []
        for ri, h in triggers:
            r = rules[ri]
            applied.add(frontier_key(ri, r, h))
            trig = {x: h[x] for x in r.frontier}
            produced, ext = safe_head(r, trig, fresh)
            steps.append(Step(r, trig, dict(h), produced, ext))
            for a in produced:
                if a not in current:
                    current.add(a)
                    added.append(a)
            if len(current) > cap_atoms:
                raise BudgetExceeded("atom", cap_atoms)
        delta = added
        yield steps
        if not added:
            return


def closure_rounds(
    kb: KnowledgeBase,
    fresh: Optional[FreshVars] = None,
    cap_atoms: int = DEFAULT_CAP_ATOMS,
) -> Iterator[AtomSet]:
    """Chase variant that runs datalog rules to a fixpoint between rounds.

    Yields the fact after the initial closure and then after every
    breadth-first round of existential rules (each followed by its closure).
    Still a fair chase, hence sound and complete for entailment; depth counts
    existential rounds only.
    """
    if fresh is None:
        fresh = FreshVars(avoid=kb.T0)
    datalog = [r for r in kb.rules if not r.existentials]
    exist = [r for r in kb.rules if r.existentials]
    current = set(kb.fact)
    applied_d: set = set()
    applied_e: set = set()

    def fire(rules, triggers, applied, added):
        for ri, h in triggers:
            r = rules[ri]
            applied.add(frontier_key(ri, r, h))
            produced, _ = safe_head(r, {x: h[x] for x in r.frontier}, fresh)
            for a in produced:
                if a not in current:
                    current.add(a)
                    added.append(a)
            if len(current) > cap_atoms:
                raise BudgetExceeded("atom", cap_atoms)

    def close(delta, first):
        out = list(delta)
        while True:
            rules = datalog if first else [r for r in datalog if r.body]
            trig = _new_triggers(rules, AtomIndex(current), delta, applied_d)
            # indices refer to the filtered list; map back
            trig = [(datalog.index(rules[i]), h) for i, h in trig]
            first = False
            if not trig:
                return out
            delta = []
            fire(datalog, trig, applied_d, delta)
            out += delta

    pending = close(sorted(current), True)
    yield AtomSet(current)
    first = True
    while True:
        rules = exist if first else [r for r in exist if r.body]
        trig = _new_triggers(rules, AtomIndex(current), pending, applied_e)
        trig = [(exist.index(rules[i]), h) for i, h in trig]
        first = False
        if not trig:
            return
        added: List[Atom] = []
        fire(exist, trig, applied_e, added)
        pending = close(added, False)
        yield AtomSet(current)
        if not pending:
            return


def k_saturation(kb: KnowledgeBase, k: int, cap_atoms: int = DEFAULT_CAP_ATOMS) -> AtomSet:
    """α_k(F, R)."""
    atoms = set(kb.fact)
    if k <= 0:
        return AtomSet(atoms)
    for i, steps in enumerate(breadth_first_rounds(kb, cap_atoms=cap_atoms), start=1):
        for s in steps:
            atoms |= s.produced
        if i >= k:
            break
    return AtomSet(atoms)


ScriptStep = Union[Tuple[str, Substitution], Callable[["Derivation"], Tuple[str, Substitution]]]


def derive(
    kb: KnowledgeBase,
    strategy: str = "breadth_first",
    budget: Optional[int] = None,
    script: Optional[Sequence[ScriptStep]] = None,
    cap_atoms: int = DEFAULT_CAP_ATOMS,
    prefix: str = "",
) -> Derivation:
    """Build a derivation.

    ``breadth_first`` applies up to ``budget`` rule applications in
    k-saturation order (``budget=None`` runs to fixpoint, guarded by the
    atom cap).  ``script`` applies the given ``(rule_id, substitution)``
    steps; a step may also be a callable receiving the derivation built so
    far.  Partial substitutions are completed by the first extension.
    """
    fresh = FreshVars(prefix, avoid=kb.T0)
    d = Derivation(kb)
    if strategy == "breadth_first":
        if budget == 0:
            return d
        for steps in breadth_first_rounds(kb, fresh, cap_atoms):
            for s in steps:
                d.steps.append(s)
                if budget is not None and len(d.steps) >= budget:
                    return d
        return d
    if strategy != "script":
        raise GbtsError(f"unknown strategy {strategy!r}")
    F = set(kb.fact)
    for i, st in enumerate(script or (), start=1):
        if budget is not None and i > budget:
            break
        rid, pi = st(d) if callable(st) else st
        try:
            rule = kb.rule(rid)
        except KeyError:
            raise InvalidScriptStep(i, f"unknown rule {rid!r}") from None
        seed = {k: v for k, v in pi.items() if k in rule.body.vars()}
        h = next(iter(homomorphisms(rule.body, F, seed)), None)
        if h is None:
            raise InvalidScriptStep(i, f"{pi} does not extend to a homomorphism of {rid}")
        trig = {x: h[x] for x in rule.frontier}
        produced, ext = safe_head(rule, trig, fresh)
        d.steps.append(Step(rule, trig, h, produced, ext))
        F |= produced
        if len(F) > cap_atoms:
            raise BudgetExceeded("atom", cap_atoms)
    return d


def greedy_witnesses(d: Derivation) -> List[Union[str, int, None]]:
    """Per step: ``"root"``, the 1-based index j of the witnessing step, or
    None when the step is not greedy."""
    T0 = d.kb.T0
    out: List[Union[str, int, None]] = []
    produced_vars: List[frozenset] = []
    for i, s in enumerate(d.steps):
        img = frozenset(s.trigger.values())
        if img <= T0:
            out.append("root")
        else:
            rest = img - T0
            w = None
            for j in range(i):
                if rest <= produced_vars[j]:
                    w = j + 1
                    break
            out.append(w)
        produced_vars.append(s.produced.vars())
    return out


def is_greedy(d: Derivation) -> bool:
    return all(w is not None for w in greedy_witnesses(d))


# --------------------------------------------------------------------------
# derivation trees


@dataclass(frozen=True)
class Bag:
    index: int
    terms: frozenset
    atoms: AtomSet
    parent: Optional[int]
    rule_id: Optional[str] = None
    fusion: Tuple[Tuple[Term, Term], ...] = ()
    # rule head variable -> concrete term (pi on the frontier, fresh otherwise)
    origin: Tuple[Tuple[Term, Term], ...] = ()


@dataclass
class DerivationTree:
    bags: List[Bag]
    T0: frozenset

    def children(self, i: int) -> List[int]:
        return [b.index for b in self.bags if b.parent == i]

    def atoms(self) -> AtomSet:
        return AtomSet(a for b in self.bags for a in b.atoms)

    def width(self) -> int:
        return max(len(b.terms) for b in self.bags) - 1

    def shape(self) -> Dict[int, Optional[int]]:
        return {b.index: b.parent for b in self.bags}


def compute_fusion(rule: Rule, pi: Dict[Term, Term], T0: frozenset) -> Tuple[Tuple[Term, Term], ...]:
    """σ_π as a sorted tuple of pairs over the frontier."""
    out = []
    fr = rule.frontier_sorted
    for x in fr:
        img = pi[x]
        if img in T0:
            out.append((x, img))
        else:
            y = next(y for y in fr if pi[y] is img)
            out.append((x, y))
    return tuple(out)


def derivation_tree(d: Derivation, fg_variant: bool = False) -> DerivationTree:
    """Tree of bags for a greedy derivation (smallest-j parent rule).

    With ``fg_variant`` non-root bags hold only the instantiated head terms;
    this is a valid decomposition only for frontier-guarded rule sets.
    """
    T0 = d.kb.T0
    bags = [Bag(0, T0, d.kb.fact, None)]
    for i, s in enumerate(d.steps, start=1):
        img = frozenset(s.trigger.values())
        parent = None
        if img <= T0:
            parent = 0
        else:
            for b in bags[1:]:
                if img <= b.terms:
                    parent = b.index
                    break
        if parent is None:
            raise NotGreedy(i, f"frontier image {sorted(img, key=term_key)} of {s.rule.id}")
        terms = s.produced.terms() if fg_variant else (s.produced.vars() | T0)
        origin = dict(s.trigger)
        origin.update(s.fresh)
        bags.append(
            Bag(
                i,
                frozenset(terms),
                s.produced,
                parent,
                s.rule.id,
                compute_fusion(s.rule, s.trigger, T0),
                tuple(sorted(origin.items(), key=lambda kv: term_key(kv[0]))),
            )
        )
    return DerivationTree(bags, T0)


def decomposition_violations(tree: DerivationTree, fact: Iterable[Atom]) -> List[str]:
    """Check the four tree-decomposition conditions against ``fact``.

    Condition 1 is checked against terms(fact) ∪ T0 since the root holds
    every constant of the KB, including rule constants absent from the fact.
    """
    fact = AtomSet(fact)
    out: List[str] = []
    all_terms = frozenset().union(*(b.terms for b in tree.bags))
    if all_terms != fact.terms() | tree.T0:
        out.append("terms of bags differ from terms of the fact")
    if AtomSet(a for b in tree.bags for a in b.atoms) != fact:
        out.append("atoms of bags differ from the fact")
    for b in tree.bags:
        if not b.atoms.terms() <= b.terms:
            out.append(f"bag {b.index} has atoms with terms outside the bag")
    adj: Dict[int, List[int]] = {b.index: [] for b in tree.bags}
    for b in tree.bags:
        if b.parent is not None:
            adj[b.index].append(b.parent)
            adj[b.parent].append(b.index)
    for t in all_terms:
        holders = {b.index for b in tree.bags if t in b.terms}
        start = next(iter(holders))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v in holders and v not in seen:
                    seen.add(v)
                    stack.append(v)
        if seen != holders:
            out.append(f"running intersection fails for {t}")
    return out


def width_bound(kb: KnowledgeBase) -> int:
    consts = kb.constants()
    mh = max((len(r.head.vars()) for r in kb.rules), default=0)
    return len(kb.fact.vars()) + len(consts) + mh


# --------------------------------------------------------------------------
# oracle


def oracle_entails(
    kb: KnowledgeBase,
    Q: Iterable[Atom],
    depth: int,
    cap_atoms: int = DEFAULT_CAP_ATOMS,
    datalog_closure: bool = False,
) -> str:
    """``"yes"`` when Q maps into α_depth(F, R), else ``"no_up_to_depth"``.

    With ``datalog_closure`` the depth counts existential rounds of
    ``closure_rounds`` instead of plain breadth-first rounds.
    """
    Q = AtomSet(Q)
    if datalog_closure:
        for i, atoms in enumerate(closure_rounds(kb, cap_atoms=cap_atoms)):
            if has_homomorphism(Q, atoms):
                return "yes"
            if i >= depth:
                break
        return "no_up_to_depth"
    atoms = set(kb.fact)
    if has_homomorphism(Q, atoms):
        return "yes"
    if depth <= 0:
        return "no_up_to_depth"
    for i, steps in enumerate(breadth_first_rounds(kb, cap_atoms=cap_atoms), start=1):
        for s in steps:
            atoms |= s.produced
        if has_homomorphism(Q, atoms):
            return "yes"
        if i >= depth:
            break
    return "no_up_to_depth"


def chase_fixpoint_reached(kb: KnowledgeBase, depth: int, cap_atoms: int = DEFAULT_CAP_ATOMS) -> bool:
    """True when the breadth-first chase stops adding triggers within depth."""
    n = 0
    for n, _ in enumerate(breadth_first_rounds(kb, cap_atoms=cap_atoms), start=1):
        if n > depth:
            return False
    return n <= depth
