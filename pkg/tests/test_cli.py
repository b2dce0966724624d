"""Command-line driver: exit codes, outputs and frozen export schemas.

Set GBTS_UPDATE_GOLDEN=1 to rewrite the files under tests/golden.
"""

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from gbts import zoo
from gbts.cli import run
from gbts.syntax import parse

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def kbfile(tmp_path):
    def make(name):
        p = tmp_path / f"{name}.kb"
        p.write_text(zoo.SOURCES[name], encoding="utf-8")
        return str(p)

    return make


def golden(name, text):
    path = GOLDEN / name
    if os.environ.get("GBTS_UPDATE_GOLDEN"):
        path.parent.mkdir(exist_ok=True)
        path.write_text(text, encoding="utf-8")
    assert text == path.read_text(encoding="utf-8"), name


def test_classify(kbfile, capsys):
    assert run(["classify", kbfile("not_wfg")]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "not wfg"
    assert run(["classify", kbfile("project"), "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["labels"]["wfg"] and not rep["labels"]["fg"]
    assert "memberOf[1]" in rep["affected_positions"]


def test_chase_and_greedy_check(kbfile, capsys):
    assert run(["chase", kbfile("chain"), "--depth", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 5 and "r(b, _z1)." in out
    assert run(["chase", kbfile("running_small"), "--depth", "2", "--greedy-check"]) == 0
    assert "% greedy" in capsys.readouterr().out
    assert run(["chase", kbfile("non_greedy"), "--depth", "2", "--greedy-check"]) == 1
    assert "% not greedy at step 3" in capsys.readouterr().out


def test_answer_exit_codes(kbfile, capsys):
    f = kbfile("running_small")
    assert run(["answer", f]) == 0
    assert capsys.readouterr().out.startswith("yes")
    assert run(["answer", f, "--mode", "rule"]) == 0
    assert capsys.readouterr().out.startswith("yes")
    assert run(["answer", f, "--query", "r(zz, Y)"]) == 1
    assert capsys.readouterr().out.startswith("no")
    assert run(["answer", kbfile("non_greedy")]) == 2
    assert run(["answer", f, "--mode", "rule", "--witness", "w.json"]) == 2


def test_usage_and_io_errors(tmp_path, capsys):
    assert run([]) == 2
    assert run(["answer", str(tmp_path / "missing.kb")]) == 2
    bad = tmp_path / "bad.kb"
    bad.write_text("@facts\np(a,.\n")
    assert run(["classify", str(bad)]) == 2
    assert "2:5" in capsys.readouterr().err


def test_oracle(kbfile, capsys):
    assert run(["oracle", kbfile("running"), "--depth", "3"]) == 0
    assert capsys.readouterr().out.startswith("yes")
    assert run(["oracle", kbfile("running"), "--depth", "1"]) == 1


def test_translate_targets(kbfile, tmp_path, capsys):
    out = tmp_path / "wfg.kb"
    assert run(["translate", kbfile("chain"), "--target", "wfg", "--out", str(out)]) == 0
    doc = parse(out.read_text())
    assert any(r.id == "same_1" for r in doc.rules)
    assert run(["translate", kbfile("ba_rule"), "--target", "guarded"]) == 0
    text = capsys.readouterr().out
    assert len(parse(text).rules) == 2
    golden("ba_rule.guarded.kb", text)


def test_saturate_exports(kbfile, tmp_path, capsys):
    rules, tree, dot = (tmp_path / n for n in ("rules.json", "tree.json", "tree.dot"))
    args = ["saturate", kbfile("running_small"), "--rules-out", str(rules), "--tree-out", str(tree), "--dot", str(dot)]
    assert run(args) == 0
    summary = capsys.readouterr().out
    assert "bags: 7" in summary and "blocked: 2" in summary
    golden("running_small.rules.json", rules.read_text())
    golden("running_small.tree.json", tree.read_text())
    golden("running_small.tree.dot", dot.read_text())


def test_witness_export(kbfile, tmp_path):
    w = tmp_path / "w.json"
    assert run(["answer", kbfile("running_small"), "--witness", str(w)]) == 0
    data = json.loads(w.read_text())
    (entry,) = data
    assert entry["entailed"] and set(entry["witnesses"][0]) == {"apt", "Pi", "pi", "xi", "pi_gamma", "generated_tree"}
    golden("running_small.witness.json", w.read_text())


def test_output_is_deterministic_across_processes(kbfile, tmp_path):
    f = kbfile("running")
    outs = []
    for seed in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=seed)
        res = subprocess.run(
            [sys.executable, "-m", "gbts", "saturate", f, "--tree-out", str(tmp_path / f"t{seed}.json")],
            capture_output=True, text=True, env=env, check=True,
        )
        outs.append(res.stdout + (tmp_path / f"t{seed}.json").read_text())
    assert outs[0] == outs[1]
