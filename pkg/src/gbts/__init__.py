"""Boolean conjunctive query entailment under greedy bounded-treewidth-set rules."""

from .chase import KnowledgeBase, Rule, oracle_entails
from .classify import classify
from .core import Atom, AtomSet, Constant, Term, Variable
from .errors import (
    ArityOverflow,
    BodyCyclic,
    BudgetExceeded,
    GbtsError,
    NotFrontierGuarded,
    NotGreedy,
    ParseError,
)
from .query import answer, entails, prepare
from .syntax import parse, parse_atoms

__version__ = "0.1.0"

__all__ = [
    "Atom", "AtomSet", "Constant", "Term", "Variable", "KnowledgeBase", "Rule",
    "classify", "oracle_entails", "answer", "entails", "prepare", "parse", "parse_atoms",
    "GbtsError", "BudgetExceeded", "NotGreedy", "ArityOverflow", "BodyCyclic",
    "NotFrontierGuarded", "ParseError", "__version__",
]
