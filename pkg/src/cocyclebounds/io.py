"""Text and JSON formats for systems, cocycles, certificates and trees.

Floats are written with 17 significant digits so that every file
round-trips bit for bit; entropies are printed with 12.
"""
from __future__ import annotations

import json
import math
import os

import numpy as np

from .errors import InputError
from .sft import TransitionSystem, amalgamate, as_word


def fmt17(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def fmt12(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:#.12g}"


def _f(x):
    # json value for a float that may be infinite
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _unf(x):
    return float(x)


def word_str(w) -> str:
    return ",".join(str(s) for s in w)


def parse_word(s: str):
    s = s.strip()
    return as_word(int(t) for t in s.split(",")) if s else ()


# ---------------------------------------------------------------- systems

def sft_text(ts: TransitionSystem) -> str:
    H = ts.matrix
    lines = [str(H.shape[0])] + [" ".join(str(int(v)) for v in row) for row in H]
    return "\n".join(lines) + "\n"


def parse_sft(text: str) -> TransitionSystem:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise InputError("empty system file")
    try:
        q = int(rows[0][0])
        H = np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int64)
    except ValueError as e:
        raise InputError(f"malformed system file: {e}") from None
    if H.shape != (q, q):
        raise InputError(f"expected {q} rows of {q} entries, got shape {H.shape}")
    return TransitionSystem(H)


def read_sft(path) -> TransitionSystem:
    with open(path) as fh:
        return parse_sft(fh.read())


def write_sft(ts: TransitionSystem, path) -> None:
    with open(path, "w") as fh:
        fh.write(sft_text(ts))


def words_text(words, header: dict | None = None) -> str:
    out = []
    if header:
        out.append("# " + " ".join(f"{k}={v}" for k, v in header.items()))
    out += [word_str(w) for w in words]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- cocycles

def cocycle_text(A) -> str:
    """One section per level of the fallback chain, outermost first:
    a header 'd k group' then one line per window with d*d row-major entries."""
    out = []
    cur = A
    first = True
    while cur is not None:
        if not first:
            out.append("fallback")
        first = False
        out.append(f"{cur.dim} {cur.k} {cur.group}")
        for w in sorted(cur.table):
            v = cur.table[w]
            out.append(word_str(w) + " " + " ".join(fmt17(x) for x in v.ravel()))
        cur = cur.fallback
    return "\n".join(out) + "\n"


def parse_cocycle(text: str, base: TransitionSystem):
    from .cocycle import LocallyConstantCocycle
    sections, cur = [], None
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if ln == "fallback":
            cur = None
            continue
        if cur is None:
            parts = ln.split()
            if len(parts) != 3:
                raise InputError(f"bad cocycle header {ln!r}")
            cur = {"d": int(parts[0]), "k": int(parts[1]), "group": parts[2], "table": {}}
            sections.append(cur)
            continue
        parts = ln.split()
        d = cur["d"]
        if len(parts) != 1 + d * d:
            raise InputError(f"expected a window and {d * d} entries: {ln[:60]!r}")
        cur["table"][parse_word(parts[0])] = np.array([float(x) for x in parts[1:]]).reshape(d, d)
    if not sections:
        raise InputError("empty cocycle file")
    A = None
    for sec in reversed(sections):
        A = LocallyConstantCocycle(base, sec["k"], sec["table"], sec["group"], A)
    return A


def read_cocycle(path, base: TransitionSystem):
    with open(path) as fh:
        return parse_cocycle(fh.read(), base)


def write_cocycle(A, path) -> None:
    with open(path, "w") as fh:
        fh.write(cocycle_text(A))


# ---------------------------------------------------------------- certificates

def region_to_dict(R) -> dict:
    return {"atoms": [{"center": c.tolist(), "radius": float(r)} for c, r in R.atoms],
            "slack": float(R.slack), "group": R.group}


def region_from_dict(d):
    from .covering import Region
    return Region(tuple((np.array(a["center"]), a["radius"]) for a in d["atoms"]),
                  d.get("slack", 0.0), d.get("group", "SL"))


def _label(x):
    if isinstance(x, tuple) and all(isinstance(s, (int, np.integer)) for s in x):
        return {"word": list(int(s) for s in x)}
    return {"label": repr(x)}


def _unlabel(d):
    return as_word(d["word"]) if "word" in d else d["label"]


def covering_to_dict(cert, points: bool = True) -> dict:
    d = {"kind": "covering", "status": cert.status, "labels": [_label(x) for x in cert.labels],
         "family": np.asarray(cert.family).tolist(), "region": region_to_dict(cert.region),
         "target": region_to_dict(cert.target), "h": float(cert.h),
         "net_spacing": float(cert.net_spacing), "safety": float(cert.safety),
         "min_margin": _f(cert.min_margin), "message": cert.message}
    if points:
        d.update(points=np.asarray(cert.points).tolist(), choice=np.asarray(cert.choice).tolist(),
                 witness=np.asarray(cert.witness).tolist(), raw=np.asarray(cert.raw).tolist(),
                 lip=np.asarray(cert.lip).tolist())
    return d


def covering_from_dict(d):
    from .covering import CoveringCertificate
    dim = len(d["family"][0]) if d["family"] else 2
    pts = np.array(d.get("points", []), dtype=float).reshape(-1, dim, dim)
    return CoveringCertificate(d["status"], [_unlabel(x) for x in d["labels"]],
                               np.array(d["family"], dtype=float).reshape(-1, dim, dim),
                               region_from_dict(d["region"]), region_from_dict(d["target"]),
                               d["h"], d["net_spacing"], pts,
                               np.array(d.get("choice", []), dtype=int),
                               np.array(d.get("witness", []), dtype=int),
                               np.array(d.get("raw", []), dtype=float),
                               np.array(d.get("lip", []), dtype=float), d.get("safety", 1e-6),
                               d.get("message", ""))


def multi_to_dict(mc) -> dict:
    layers = []
    for (a, i, j), ws in sorted(mc.layers.items(), key=lambda t: (t[0][0], t[0][1], t[0][2])):
        c = mc.certificates.get((a, i, j))
        layers.append({"letter": list(a), "atom": i, "layer": j, "words": [list(w) for w in ws],
                       "products": np.asarray(mc.products[(a, i, j)]).tolist(),
                       "certificate": covering_to_dict(c) if c is not None else None})
    return {"kind": "multi-cover", "k": mc.k, "letters": [list(a) for a in mc.letters],
            "union": region_to_dict(mc.union), "m": mc.m, "h": float(mc.h), "layers": layers,
            "detours": [{"letter": list(b), "words": [list(w) for w in v]}
                        for b, v in sorted(mc.detours.items())],
            "base": [{"letter": list(a), "certificate": covering_to_dict(c, points=False)}
                     for a, c in sorted(mc.base.items())],
            "constants": {k: (_f(v) if isinstance(v, float) else v) for k, v in mc.constants.items()}}


def multi_from_dict(d):
    from .covering import MultiCoverCertificate
    layers, prods, certs = {}, {}, {}
    for e in d["layers"]:
        key = (as_word(e["letter"]), int(e["atom"]), int(e["layer"]))
        layers[key] = [as_word(w) for w in e["words"]]
        prods[key] = np.array(e["products"], dtype=float)
        if e.get("certificate") is not None:
            certs[key] = covering_from_dict(e["certificate"])
    detours = {as_word(e["letter"]): tuple(as_word(w) for w in e["words"]) for e in d["detours"]}
    base = {as_word(e["letter"]): covering_from_dict(e["certificate"]) for e in d.get("base", [])}
    return MultiCoverCertificate(d["k"], [as_word(a) for a in d["letters"]], region_from_dict(d["union"]),
                                 d["m"], layers, prods, certs, detours, base, d["h"],
                                 d.get("constants", {}))


# ---------------------------------------------------------------- trees

def tree_to_dict(tree) -> dict:
    nodes = []
    for lev in tree.levels:
        for nd in lev:
            nodes.append({"i": nd.i, "j": nd.j, "n": nd.n, "region": nd.region, "margin": _f(nd.margin),
                          "layer": nd.layer, "segment": list(nd.segment),
                          "letter": list(nd.letter), "product": nd.product.tolist()})
    return {"kind": "tree", "m": tree.m, "L": tree.L, "depth": tree.depth, "k": tree.k,
            "V": region_to_dict(tree.V), "root": list(tree.levels[0][0].word), "nodes": nodes}


def tree_from_dict(d):
    """Rebuild a tree; cumulative words are re-amalgamated from the segments."""
    from .branching import BranchNode, BranchTree
    width = 2 * d["k"] + 1
    levels = [[] for _ in range(d["depth"] + 1)]
    for e in sorted(d["nodes"], key=lambda e: (e["i"], e["j"])):
        i, j = e["i"], e["j"]
        seg = as_word(e["segment"])
        if i == 0:
            word = as_word(d["root"])
        else:
            word = amalgamate(levels[i - 1][j // d["m"]].word, seg, width)
        levels[i].append(BranchNode(i, j, word, e["n"], as_word(e["letter"]), e["region"],
                                    np.array(e["product"], dtype=float), _unf(e["margin"]), seg,
                                    e["layer"]))
    return BranchTree(d["m"], d["L"], d["depth"], d["k"], region_from_dict(d["V"]), levels)


def tree_dump_text(tree) -> str:
    lines = [f"# tree m={tree.m} depth={tree.depth} L={tree.L} leaves={len(tree.leaves())}"]
    for nd in tree.leaves():
        lines.append(f"{nd.j} n={nd.n} atom={nd.region} margin={fmt17(nd.margin)} "
                     f"word={word_str(nd.word)}")
    return "\n".join(lines) + "\n"


def bound_text(rep) -> str:
    out = []
    for k, v in rep.as_dict().items():
        if isinstance(v, float):
            v = fmt17(v)
        out.append(f"{k}={v}")
    return "\n".join(out) + "\n"


def forbidden_to_dict(fc) -> dict:
    return {"kind": "forbidden", "word": list(fc.word), "N": fc.N, "start": fc.start,
            "kappa": float(fc.kappa), "threshold": float(fc.threshold), "level": fc.level,
            "bound": _f(fc.bound), "base_entropy": float(fc.base_entropy), "empty": fc.empty,
            "searched": fc.searched}


def forbidden_from_dict(d):
    from .rigidity import ForbiddenCylinder
    return ForbiddenCylinder(as_word(d["word"]), d["N"], d["start"], d["kappa"], d["threshold"],
                             d["level"], _unf(d["bound"]), d["base_entropy"], d["empty"],
                             d.get("searched", 0))


def dump_json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dump_json_text(obj))


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------- pipeline files

PIPELINE_FILES = {
    "sft": "sft.txt", "cocycle": "cocycle.txt", "perturbed": "perturbed.txt",
    "final": "final.txt", "covering": "covering.json", "multi": "multicover.json",
    "tree": "tree.json", "bound": "bound.txt", "forbidden": "forbidden.json",
    "report": "report.txt", "report_json": "report.json",
}


def write_pipeline(report, out) -> dict:
    os.makedirs(out, exist_ok=True)
    o = report.objects
    files = {}

    def path(key):
        p = os.path.join(out, PIPELINE_FILES[key])
        files[key] = PIPELINE_FILES[key]
        return p

    write_sft(o["A"].base, path("sft"))
    write_cocycle(o["A"], path("cocycle"))
    if "A2" in o:
        write_cocycle(o["A2"], path("perturbed"))
    if "A_final" in o:
        write_cocycle(o["A_final"], path("final"))
    if "covering" in o:
        dump_json(covering_to_dict(o["covering"]), path("covering"))
    if "multi" in o:
        dump_json(multi_to_dict(o["multi"]), path("multi"))
    if "tree" in o:
        dump_json(tree_to_dict(o["tree"]), path("tree"))
    if "bound" in o:
        with open(path("bound"), "w") as fh:
            fh.write(bound_text(o["bound"]))
    if "forbidden" in o:
        dump_json(forbidden_to_dict(o["forbidden"]), path("forbidden"))
    report.files = dict(files)
    report.files["report"] = PIPELINE_FILES["report"]
    report.files["report_json"] = PIPELINE_FILES["report_json"]
    with open(os.path.join(out, PIPELINE_FILES["report"]), "w") as fh:
        fh.write(report.text())
    dump_json({"ok": report.ok, "failed_stage": report.failed_stage,
               "stages": [list(s) for s in report.stages],
               "constants": {k: (_f(v) if isinstance(v, float) else v)
                             for k, v in report.constants.items()},
               "files": report.files}, os.path.join(out, PIPELINE_FILES["report_json"]))
    return report.files


def reverify_pipeline(out) -> dict:
    """Re-run every check from the files in ``out`` alone.  A file that no
    longer parses into a consistent object fails its check (and the checks
    that depend on it)."""
    from .branching import kappa_bound, verify_tree
    from .cocycle import product_over_transition
    from .covering import verify_covering, verify_multi_cover
    from .errors import CocycleError
    from .perturb import c0_distance
    from .rigidity import verify_forbidden

    p = lambda key: os.path.join(out, PIPELINE_FILES[key])
    res = dict.fromkeys(("covering", "multi-cover", "tree", "kappa", "forbidden", "sandwich",
                         "distance"), False)
    ts = read_sft(p("sft"))
    A = read_cocycle(p("cocycle"), ts)
    A2 = read_cocycle(p("perturbed"), ts)
    A3 = read_cocycle(p("final"), ts)
    rep = load_json(p("report_json"))
    eps = float(rep["constants"]["eps"])
    kappa = float(rep["constants"]["kappa"])
    res["distance"] = c0_distance(A, A3) < eps and c0_distance(A, A2) < eps
    try:
        cov = covering_from_dict(load_json(p("covering")))
        fam = [(w, product_over_transition(A3, w)) for w in cov.labels]
        res["covering"] = verify_covering(fam, cov.region, cov.h).certified
    except CocycleError:
        pass
    try:
        mc = multi_from_dict(load_json(p("multi")))
        res["multi-cover"] = bool(verify_multi_cover(A3, mc, full=True))
    except CocycleError:
        pass
    try:
        tree = tree_from_dict(load_json(p("tree")))
        res["tree"] = bool(verify_tree(A3, tree))
    except CocycleError:
        return res
    if not res["tree"]:
        return res
    kb = kappa_bound(A3, tree.V, tree.L, m=tree.m, tree=tree)
    res["kappa"] = kb.kappa_sharp <= kappa * (1 + 1e-12)
    try:
        fc = forbidden_from_dict(load_json(p("forbidden")))
        res["forbidden"] = verify_forbidden(A3, fc) and fc.kappa >= kb.kappa_sharp * (1 - 1e-12)
    except CocycleError:
        return res
    res["sandwich"] = 0 < kb.gamma <= fc.bound < fc.base_entropy
    return res
