"""Worked knowledge bases from the literature on gbts rules, in text form."""

from __future__ import annotations

from .chase import KnowledgeBase
from .core import AtomSet
from .syntax import KBDocument, parse, parse_atoms

PROJECT = """
@facts
project(p1, d1, f1).
@rules
R0: project(X, D, Z) -> projectDpt(X, D), projectField(X, Z).
R1: projectField(X, Z) -> hasManager(X, Y).
R2: hasManager(X, Y) -> projectField(X, Z).
R3: hasManager(X, Y), projectDpt(X, D) -> memberOf(Y, D).
R4: hasManager(X, Y), projectField(X, Z), isSensitiveField(Z) -> isCriticalManager(Y).
R5: isCriticalManager(Y) -> hasManager(X, Y), projectField(X, Z), isSensitiveField(Z).
"""

CHAIN = """
@facts
r(a, b). r(c, d). p(d).
@rules
R: r(X, Y) -> r(Y, Z).
"""

NON_GREEDY = """
@facts
r1(a, b). r1(b, c).
@rules
R0: r1(X, Y) -> r2(Y, Z).
R1: r1(X, Y), r2(X, Z), r2(Y, T) -> r2(Z, T).
@queries
? r2(Z, T), r2(T, U).
"""

NOT_WFG = """
@facts
r1(a, b). r2(b, c).
@rules
R: r1(X, Y), r2(Y, Z) -> r(X, X1), r(Y, Y1), r(Z, Z1), r1(X1, Y1), r2(Y1, Z1).
@queries
? r1(X, Y).
"""

RUNNING = """
@facts
q1(a, b, c). q1(d, c, e). q1(f, g, g). i(c). i(g).
@rules
R1: q1(X1, Y1, Z1) -> s(Y1, T1), r(Z1, T1), q2(T1, U1, V1).
R2: q2(X2, Y2, Z2) -> s(Y2, T2), r(Z2, T2), q3(T2, U2, V2).
R3: q3(T3, U3, V3) -> h(T3).
R4: q2(X4, Y4, Z4), s(Y4, T4), r(Z4, T4), h(T4) -> h(X4), p1(Y4), p2(Z4).
R5: q1(X5, Y5, Z5), s(Y5, T5), r(Z5, T5), h(T5) -> p1(Y5), p2(Z5).
R6: p1(XP), i(XP) -> r(XP, YP), p2(YP), i(YP).
R7: p2(XQ), i(XQ) -> s(XQ, YQ), p1(YQ), i(YQ).
@queries
? h(W).
"""

RUNNING_SMALL = """
@facts
i(c). p1(c). p2(c).
@rules
R1: p1(XP), i(XP) -> r(XP, YP), p2(YP), i(YP).
R2: p2(XQ), i(XQ) -> s(XQ, YQ), p1(YQ), i(YQ).
@queries
? p1(X), s(X, Y), r(Y, Z), s(Z, T), r(T, U), r(X, V).
"""

# a frontier-guarded rule whose body is acyclic but not guarded
BA_RULE = """
@facts
p1(a). p2(a, b). p2(c, d). p3(c, d, b). p2(b, e). p3(b, e, a).
@rules
R: p1(X), p2(X, U), p2(Y, Z), p3(Y, Z, U), p2(U, V), p3(U, V, X) -> h(U, V).
@queries
? h(X, Y).
"""

SOURCES = {
    "project": PROJECT,
    "chain": CHAIN,
    "non_greedy": NON_GREEDY,
    "not_wfg": NOT_WFG,
    "running": RUNNING,
    "running_small": RUNNING_SMALL,
    "ba_rule": BA_RULE,
}


def document(name: str) -> KBDocument:
    return parse(SOURCES[name])


def kb(name: str) -> KnowledgeBase:
    return document(name).kb()


def query(name: str, index: int = 0) -> AtomSet:
    return document(name).queries[index]


Q1 = "p1(X), s(X, Y), r(Y, Z), s(Z, T), r(T, U), r(X, V)"


def q1() -> AtomSet:
    return parse_atoms(Q1)
