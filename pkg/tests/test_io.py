import json
import math
import os
import shutil

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cocyclebounds import io
from cocyclebounds.covering import Region
from cocyclebounds.errors import InputError
from cocyclebounds.sft import TransitionSystem


@given(st.floats(allow_nan=False))
def test_fmt17_round_trips(x):
    assert float(io.fmt17(x)) == x


def test_fmt12():
    assert io.fmt12(math.log(2)) == "0.693147180560"
    assert io.fmt12(-math.inf) == "-inf"


def test_sft_round_trip(golden):
    ts = io.parse_sft(io.sft_text(golden))
    assert np.array_equal(ts.matrix, golden.matrix)
    assert io.parse_sft("# comment\n2\n1 1\n1 0\n").matrix.tolist() == [[1, 1], [1, 0]]


def test_words_round_trip():
    ws = [(1, 2, 1), (2,), (1, 1, 1, 1)]
    text = io.words_text(ws, {"n": 3})
    assert text.startswith("# n=3")
    back = [io.parse_word(ln) for ln in text.splitlines() if not ln.startswith("#")]
    assert back == ws


def test_cocycle_round_trip(identity_stack, g0, full2):
    for A in (g0, identity_stack["A2"]):
        B = io.parse_cocycle(io.cocycle_text(A), A.base)
        a, b = A, B
        while a is not None:
            assert b is not None and a.k == b.k and a.group == b.group
            assert a.table.keys() == b.table.keys()
            for w in a.table:
                assert np.array_equal(a.table[w], b.table[w])
            a, b = a.fallback, b.fallback
        assert b is None
    with pytest.raises(InputError):
        io.parse_cocycle("", full2)
    with pytest.raises(InputError):
        io.parse_cocycle("2 0 SL\n1 1 0 0\n", full2)


def test_certificate_round_trips(identity_stack):
    cov = identity_stack["covering"]
    c2 = io.covering_from_dict(json.loads(io.dump_json_text(io.covering_to_dict(cov))))
    assert c2.labels == cov.labels and c2.status == cov.status
    assert np.array_equal(c2.family, cov.family) and np.array_equal(c2.points, cov.points)
    assert c2.min_margin == cov.min_margin
    mc = identity_stack["multi"]
    m2 = io.multi_from_dict(json.loads(io.dump_json_text(io.multi_to_dict(mc))))
    assert m2.m == mc.m and m2.layers == mc.layers and m2.detours == mc.detours
    for key in mc.products:
        assert np.array_equal(m2.products[key], mc.products[key])
    tree = identity_stack["tree"]
    t2 = io.tree_from_dict(json.loads(io.dump_json_text(io.tree_to_dict(tree))))
    assert [nd.word for nd in t2.nodes()] == [nd.word for nd in tree.nodes()]
    assert [nd.margin for nd in t2.nodes()] == [nd.margin for nd in tree.nodes()]
    assert io.tree_dump_text(t2) == io.tree_dump_text(tree)


def test_region_round_trip():
    R = Region.ball(0.2).with_slack(0.01)
    R2 = io.region_from_dict(json.loads(json.dumps(io.region_to_dict(R))))
    assert R2.slack == R.slack and len(R2.atoms) == 1 and R2.atoms[0][1] == 0.2


def test_forbidden_round_trip(g0):
    from cocyclebounds.rigidity import forbidden_cylinder_upper
    fc = forbidden_cylinder_upper(g0, 4, 8)
    assert io.forbidden_from_dict(json.loads(io.dump_json_text(io.forbidden_to_dict(fc)))) == fc
    C = forbidden_cylinder_upper(g0.__class__.constant(TransitionSystem.full_shift(1),
                                                       np.diag([2.0, 0.5]), group="SL"), 10, 8,
                                 level="point")
    back = io.forbidden_from_dict(json.loads(io.dump_json_text(io.forbidden_to_dict(C))))
    assert back.bound == -math.inf


def test_pipeline_files(identity_pipeline):
    rep, out = identity_pipeline
    assert rep.ok
    for name in io.PIPELINE_FILES.values():
        assert os.path.isfile(os.path.join(out, name)), name
    res = io.reverify_pipeline(out)
    assert all(res.values()), res


def test_pipeline_tampered(identity_pipeline, tmp_path):
    _, out = identity_pipeline
    bad = tmp_path / "bad"
    shutil.copytree(out, bad)
    d = io.load_json(bad / "tree.json")
    leaf = max(d["nodes"], key=lambda e: e["i"])
    leaf["segment"] = [3 - s for s in leaf["segment"]]
    io.dump_json(d, bad / "tree.json")
    assert not io.reverify_pipeline(str(bad))["tree"]
    bad2 = tmp_path / "bad2"
    shutil.copytree(out, bad2)
    d = io.load_json(bad2 / "covering.json")
    d["labels"] = d["labels"][:1]                # one map cannot cover U
    io.dump_json(d, bad2 / "covering.json")
    assert not io.reverify_pipeline(str(bad2))["covering"]


def test_pipeline_tampered_cocycle(identity_pipeline, tmp_path):
    from cocyclebounds.branching import most_used_window, scale_entry
    rep, out = identity_pipeline
    bad = tmp_path / "bad"
    shutil.copytree(out, bad)
    A3, tree = rep.objects["A_final"], rep.objects["tree"]
    io.write_cocycle(scale_entry(A3, most_used_window(A3, tree), 10.0), bad / "final.txt")
    res = io.reverify_pipeline(str(bad))
    assert not res["tree"] and not res["sandwich"]
