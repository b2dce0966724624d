"""Command-line driver.

Exit status: 0 success (or entailed), 1 not entailed / check failed, 2 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

from . import __version__
from .blocked import build_full_blocked_tree
from .chase import (
    DEFAULT_CAP_ATOMS,
    breadth_first_rounds,
    derive,
    derivation_tree,
    greedy_witnesses,
    k_saturation,
    oracle_entails,
)
from .classify import LABELS, classify
from .core import AtomSet
from .errors import GbtsError, NotGreedy
from .patterns import most_informative, saturate
from .query import answer, answer_in_tree, prepare
from .rewrite import guarded_rule_set, integrate_disconnected, normalize_fg, wfg_translate
from .syntax import format_atom, format_conj, parse, print_document

TRACE = 5
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG, "trace": TRACE}

EXIT_OK, EXIT_NO, EXIT_ERROR = 0, 1, 2


def _setup_logging() -> None:
    logging.addLevelName(TRACE, "TRACE")
    name = os.environ.get("GBTS_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(name, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def _load(path: str):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse(text)
    except GbtsError as e:
        raise GbtsError(f"{path}:{e}") from e


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _caps(args) -> dict:
    kw = {}
    if args.cap_patterns is not None:
        kw["cap_patterns"] = args.cap_patterns
    if args.cap_bags is not None:
        kw["cap_bags"] = args.cap_bags
    return kw


# --------------------------------------------------------------------------
# subcommands


def cmd_classify(args) -> int:
    doc = _load(args.file)
    rep = classify(doc.kb().rules)
    if args.json:
        sys.stdout.write(_dump(rep.to_dict()))
        return EXIT_OK
    print("wfg" if rep.has("wfg") else "not wfg")
    print("labels: " + " ".join(lab for lab in LABELS if rep.has(lab)))
    print("affected: " + " ".join(f"{p}[{i}]" for p, i in sorted(rep.affected)))
    for rid, flags in rep.rules.items():
        on = [k for k, v in flags.items() if v]
        print(f"{rid}: {' '.join(on) if on else '-'}")
    return EXIT_OK


def cmd_chase(args) -> int:
    kb = _load(args.file).kb()
    atoms = k_saturation(kb, args.depth, cap_atoms=args.cap_atoms)
    for a in atoms.sorted():
        print(format_atom(a, "facts") + ".")
    if not args.greedy_check:
        return EXIT_OK
    d = derive(kb, budget=0)
    for n, steps in enumerate(breadth_first_rounds(kb, cap_atoms=args.cap_atoms), start=1):
        d.steps.extend(steps)
        if n >= args.depth:
            break
    ws = greedy_witnesses(d)
    print(f"% steps: {len(ws)}")
    for i, (s, w) in enumerate(zip(d.steps, ws), start=1):
        print(f"% {i} {s.rule.id} witness={'none' if w is None else w}")
    bad = [i for i, w in enumerate(ws, start=1) if w is None]
    if bad:
        print(f"% not greedy at step {bad[0]}")
        return EXIT_NO
    tree = derivation_tree(d)
    print(f"% greedy; derivation tree with {len(tree.bags)} bags, width {tree.width()}")
    return EXIT_OK


def cmd_saturate(args) -> int:
    kb = _load(args.file).kb()
    kw = {"cap_patterns": args.cap_patterns} if args.cap_patterns is not None else {}
    rb = saturate(kb, **kw)
    mi = most_informative(rb)
    T = build_full_blocked_tree(kb, mi, **({"cap_bags": args.cap_bags} if args.cap_bags is not None else {}))
    st = rb.store
    print(f"patterns: {len(st.patterns)}")
    print(f"rules: {len(rb.rules)}")
    print(f"most informative rules: {len(mi.rules)}")
    print(f"bags: {len(T.bags)}")
    print(f"blocked: {len(T.blocked_bags())}")
    if args.rules_out:
        out = {
            "patterns": {str(p): st.format_pattern(p) for p in mi.patterns_used()},
            "rules": [
                {"id": r.id, "kind": r.kind, "lhs": r.lhs, "rhs": r.rhs, "rank": r.rank, "via": r.via,
                 "link": {a.name: b.name for a, b in r.link}}
                for r in mi.rules
            ],
            "root_pattern": mi.root_pattern(),
        }
        _write(args.rules_out, _dump(out))
    if args.tree_out:
        _write(args.tree_out, T.to_json() + ("" if T.to_json().endswith("\n") else "\n"))
    if args.dot:
        _write(args.dot, T.to_dot())
    return EXIT_OK


def cmd_answer(args) -> int:
    doc = _load(args.file)
    kb = doc.kb()
    queries = list(doc.queries)
    if args.query:
        queries = [AtomSet(parse("@queries\n? " + args.query.rstrip(".") + ".").queries[0])]
    if not queries:
        raise GbtsError("no query to answer")
    if args.witness and args.mode != "apt":
        raise GbtsError("--witness needs --mode apt")
    results = []
    T = None
    for Q in queries:
        if args.mode == "apt":
            if any(not t.is_var and t not in kb.T0 for t in Q.terms()):
                ans = answer(kb, Q, "apt")
            else:
                T = T or prepare(kb, **_caps(args))
                ans = answer_in_tree(T, Q)
        else:
            ans = answer(kb, Q, "rule", **_caps(args))
        results.append(ans)
        print(f"{'yes' if ans.entailed else 'no'}\t? {format_conj(Q, 'queries')}.")
    if args.witness:
        _write(args.witness, _dump([
            {"query": format_conj(Q, "queries"), "entailed": a.entailed,
             "witnesses": [w.to_dict() for w in a.witnesses]}
            for Q, a in zip(queries, results)
        ]))
    return EXIT_OK if all(a.entailed for a in results) else EXIT_NO


def _translate_guarded(doc, args):
    kb = doc.kb()
    disconnected, connected = normalize_fg(list(kb.rules))

    def check(F, rules, body) -> bool:
        from .chase import KnowledgeBase

        return answer(KnowledgeBase(F, tuple(rules)), body, "apt", **_caps(args)).entailed

    fact = integrate_disconnected(kb.fact, disconnected, connected, check)
    return fact, guarded_rule_set(connected)


def cmd_translate(args) -> int:
    doc = _load(args.file)
    if args.target == "wfg":
        out = wfg_translate(doc.kb())
        text = print_document(out.fact, out.rules, doc.queries)
    else:
        fact, rules = _translate_guarded(doc, args)
        text = print_document(fact, rules, doc.queries)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    doc = _load(args.file)
    kb = doc.kb()
    if not doc.queries:
        raise GbtsError("no query in file")
    ok = True
    for Q in doc.queries:
        res = oracle_entails(kb, Q, args.depth, cap_atoms=args.cap_atoms)
        ok &= res == "yes"
        print(f"{res}\t? {format_conj(Q, 'queries')}.")
    return EXIT_OK if ok else EXIT_NO


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cap-atoms", type=int, default=DEFAULT_CAP_ATOMS, help="atom budget of chase runs")
    common.add_argument("--cap-bags", type=int, default=None, help="bag budget of blocked trees")
    common.add_argument("--cap-patterns", type=int, default=None, help="pattern budget of saturation")

    p = argparse.ArgumentParser(prog="gbts", description="Query entailment under gbts existential rules.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("classify", parents=[common], help="syntactic fragments of the rule set")
    s.add_argument("file")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("chase", parents=[common], help="breadth-first chase prefix")
    s.add_argument("file")
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--greedy-check", action="store_true")
    s.set_defaults(func=cmd_chase)

    s = sub.add_parser("saturate", parents=[common], help="pattern saturation and full blocked tree")
    s.add_argument("file")
    s.add_argument("--rules-out")
    s.add_argument("--tree-out")
    s.add_argument("--dot")
    s.set_defaults(func=cmd_saturate)

    s = sub.add_parser("answer", parents=[common], help="decide the queries of the file")
    s.add_argument("file")
    s.add_argument("--mode", choices=["apt", "rule"], default="apt")
    s.add_argument("--witness")
    s.add_argument("--query", help="answer this conjunction instead of the file's queries")
    s.set_defaults(func=cmd_answer)

    s = sub.add_parser("translate", parents=[common], help="rewrite the rule set")
    s.add_argument("file")
    s.add_argument("--target", choices=["wfg", "guarded"], required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_translate)

    s = sub.add_parser("oracle", parents=[common], help="bounded-depth chase oracle")
    s.add_argument("file")
    s.add_argument("--depth", type=int, required=True)
    s.set_defaults(func=cmd_oracle)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse exits 2 on usage errors, 0 on --help
        return int(e.code or 0)
    try:
        return args.func(args)
    except NotGreedy as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (GbtsError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(argv))
