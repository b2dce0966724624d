"""Affected positions and the syntactic fragment taxonomy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Sequence, Set, Tuple

from .chase import Rule
from .core import Atom, Variable

PredicatePosition = Tuple[str, int]  # (predicate, 1-based index)

RULE_FLAGS = (
    "atomic_body",
    "guarded",
    "frontier_one",
    "frontier_guarded",
    "weakly_guarded",
    "weakly_frontier_one",
    "weakly_frontier_guarded",
    "datalog",
)

LABELS = ("datalog", "gfr1", "g", "fr1", "fg", "wgfr1", "wg", "wfr1", "wfg")

# set-level label -> per-rule flags that must all hold
_LABEL_FLAGS = {
    "datalog": ("datalog",),
    "gfr1": ("guarded", "frontier_one"),
    "g": ("guarded",),
    "fr1": ("frontier_one",),
    "fg": ("frontier_guarded",),
    "wgfr1": ("weakly_guarded", "weakly_frontier_one"),
    "wg": ("weakly_guarded",),
    "wfr1": ("weakly_frontier_one",),
    "wfg": ("weakly_frontier_guarded",),
}


def is_guard(a: Atom, variables: Iterable[Variable]) -> bool:
    return frozenset(variables) <= a.vars()


def _positions(atom: Atom, v) -> List[PredicatePosition]:
    return [(atom.predicate, i + 1) for i, t in enumerate(atom.args) if t is v]


def affected_positions(rules: Sequence[Rule]) -> FrozenSet[PredicatePosition]:
    """Least set containing existential head positions and closed under
    propagation of body variables that occur only in affected positions."""
    aff: Set[PredicatePosition] = set()
    for r in rules:
        for a in r.head:
            for z in r.existentials:
                aff.update(_positions(a, z))
    changed = True
    while changed:
        changed = False
        for r in rules:
            for x in affected_variables(r, aff):
                if x not in r.frontier:
                    continue
                for a in r.head:
                    for p in _positions(a, x):
                        if p not in aff:
                            aff.add(p)
                            changed = True
    return frozenset(aff)


def affected_variables(rule: Rule, aff: Iterable[PredicatePosition]) -> FrozenSet[Variable]:
    """Body variables all of whose body occurrences are in affected positions."""
    aff = aff if isinstance(aff, (set, frozenset)) else set(aff)
    out = set()
    for v in rule.body.vars():
        if all(p in aff for a in rule.body for p in _positions(a, v)):
            out.add(v)
    return frozenset(out)


def _covered(rule: Rule, vs: FrozenSet[Variable]) -> bool:
    if not vs:
        return True
    return any(is_guard(a, vs) for a in rule.body)


def rule_flags(rule: Rule, aff: FrozenSet[PredicatePosition]) -> Dict[str, bool]:
    av = affected_variables(rule, aff)
    body_vars = rule.body.vars()
    fr = rule.frontier
    return {
        "atomic_body": len(rule.body) == 1,
        "guarded": _covered(rule, body_vars),
        # literal reading: an empty frontier is not of size one
        "frontier_one": len(fr) == 1,
        "frontier_guarded": _covered(rule, fr),
        "weakly_guarded": _covered(rule, body_vars & av),
        "weakly_frontier_one": len(fr & av) <= 1,
        "weakly_frontier_guarded": _covered(rule, fr & av),
        "datalog": not rule.existentials,
    }


@dataclass
class FragmentReport:
    rules: Dict[str, Dict[str, bool]]
    labels: FrozenSet[str]
    affected: FrozenSet[PredicatePosition]
    affected_vars: Dict[str, FrozenSet[Variable]]
    empty_frontier: Tuple[str, ...] = ()

    def has(self, label: str) -> bool:
        return label in self.labels

    def to_dict(self) -> dict:
        return {
            "labels": {lab: lab in self.labels for lab in LABELS},
            "affected_positions": [f"{p}[{i}]" for p, i in sorted(self.affected)],
            "rules": {
                rid: {
                    "flags": dict(flags),
                    "affected_variables": sorted(v.name for v in self.affected_vars[rid]),
                }
                for rid, flags in self.rules.items()
            },
            "empty_frontier_rules": list(self.empty_frontier),
        }


def classify(rules: Sequence[Rule]) -> FragmentReport:
    aff = affected_positions(rules)
    per_rule = {r.id: rule_flags(r, aff) for r in rules}
    labels = frozenset(
        lab for lab, flags in _LABEL_FLAGS.items()
        if all(all(f[k] for k in flags) for f in per_rule.values())
    )
    return FragmentReport(
        rules=per_rule,
        labels=labels,
        affected=aff,
        affected_vars={r.id: affected_variables(r, aff) for r in rules},
        empty_frontier=tuple(r.id for r in rules if not r.frontier),
    )
