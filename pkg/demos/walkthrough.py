"""Build the full blocked tree of a small recursive KB and answer a query
that has no homomorphism into the tree itself.

    python3 demos/walkthrough.py
"""

from gbts import zoo
from gbts.core import apply_substitution, has_homomorphism
from gbts.query import answer_in_tree, prepare
from gbts.syntax import format_atom, format_conj

kb = zoo.kb("running_small")
Q = zoo.q1()

T = prepare(kb)
print(f"blocked tree: {len(T.bags)} bags, {len(T.rulebase.store.patterns)} abstract patterns")
for b in T.bags:
    indent = "  " * T.depth(b.index)
    mark = f"  (blocked, see B{T.rep(b.index)})" if b.blocked else ""
    atoms = ", ".join(format_atom(a, "facts") for a in b.atoms.sorted())
    print(f"{indent}B{b.index}: {atoms}{mark}")

print()
print(f"query: {format_conj(Q, 'queries')}")
print(f"maps into the tree as is: {has_homomorphism(Q, T.atoms())}")

ans = answer_in_tree(T, Q)
print(f"entailed: {ans.entailed}")
(w,) = ans.witnesses
G, xi, theta = w.proof.generated_tree()
print(f"witness: APT with {len(w.apt.nodes)} nodes, generated tree with {len(G.bags)} bags")
for under, src in G.script():
    print(f"  copy B{src} under generated bag {under}")
image = apply_substitution(theta, Q)
print("image of the query:", ", ".join(format_atom(a, "facts") for a in image.sorted()))
assert image <= G.atoms()
