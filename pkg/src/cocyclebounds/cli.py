"""Command-line front end.

Every command prints its report; with --out it also writes report.txt,
report.json, CSV tables and any certificates to that directory.  Exit codes:
0 certified, 2 inconclusive, 1 refuted or failed, 64 usage.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

EXIT_OK, EXIT_REFUTED, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 64

COMMANDS = ("entropy", "words", "lind-gap", "avoid", "cover-verify", "multi-cover", "tree-build",
            "tree-verify", "bounded-scan", "rigidity", "perturb", "pipeline")

FILE_FLAGS = ("sft", "cocycle", "words", "family", "cert", "tree", "forbidden")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    files: dict
    params: dict
    seed: int = 0
    threads: int = 1
    out: str | None = None


@dataclass
class Result:
    code: int
    status: str
    lines: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    csv: dict = field(default_factory=dict)            # name -> text
    artifacts: dict = field(default_factory=dict)      # name -> text


def _u64(s):
    v = int(s, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _pos_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _range(s):
    try:
        a, b = s.split(":")
        return range(int(a), int(b) + 1)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a range like 6:12") from None


def _floats(s):
    try:
        return [float(t) for t in s.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--sft", help="transition matrix file")
    common.add_argument("--cocycle", help="cocycle table file")
    common.add_argument("--kappa", type=_floats, help="fiber bound (comma list for bounded-scan)")
    common.add_argument("--eps", type=float, default=0.25)
    common.add_argument("--depth", type=_pos_int, default=8)
    common.add_argument("--horizon", type=_pos_int, default=12)
    common.add_argument("--net-spacing", type=float, default=None, help="net spacing h")
    common.add_argument("--threads", type=_pos_int, default=os.cpu_count() or 1)
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--out", help="output directory")
    common.add_argument("--n", type=_pos_int, help="word length")
    common.add_argument("--word", help="a word, comma separated")
    common.add_argument("--words", help="file of words, one per line")
    common.add_argument("--symbol", type=_pos_int, default=1)
    common.add_argument("--n-range", type=_range, default=range(6, 13))
    common.add_argument("--family", help="matrix family or covering certificate (JSON)")
    common.add_argument("--cert", help="multi-cover certificate (JSON)")
    common.add_argument("--tree", help="tree (JSON)")
    common.add_argument("--forbidden", help="forbidden-cylinder certificate (JSON)")
    common.add_argument("--radius", type=float, default=0.2, help="radius of U")
    common.add_argument("--letter", help="window word of the multi-cover")
    common.add_argument("--mode", default="all-intervals", choices=("all-intervals", "forward-prefix"))
    common.add_argument("--level", default="interval", choices=("interval", "point"))
    common.add_argument("--max-period", type=_pos_int, default=12)
    common.add_argument("--band-tol", type=float, default=8.0)
    common.add_argument("--reverify", help="pipeline output directory to re-verify")
    p = _Parser(prog="cocyclebounds", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for c in COMMANDS:
        sub.add_parser(c, parents=[common])
    return p


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if ns.command is None:
        raise UsageError("no command given; choose one of " + ", ".join(COMMANDS))
    d = vars(ns)
    files = {k: d.pop(k) for k in FILE_FLAGS if d.get(k) is not None}
    for k in FILE_FLAGS:
        d.pop(k, None)
    if d.get("reverify") is not None and not os.path.isdir(d["reverify"]):
        raise UsageError(f"no such directory: {d['reverify']}")
    for k, v in files.items():
        if not os.path.isfile(v):
            raise UsageError(f"--{k}: no such file: {v}")
    cmd = d.pop("command")
    seed, threads, out = d.pop("seed"), d.pop("threads"), d.pop("out")
    return RunConfig(cmd, files, d, seed, threads, out)


# ---------------------------------------------------------------- helpers

def _need(cfg, *keys):
    for k in keys:
        if k not in cfg.files and cfg.params.get(k) is None:
            raise UsageError(f"{cfg.command} needs --{k.replace('_', '-')}")


def _system(cfg):
    from .io import read_sft
    return read_sft(cfg.files["sft"])


def _cocycle(cfg, ts):
    from .io import read_cocycle
    return read_cocycle(cfg.files["cocycle"], ts)


def _read_words(path):
    from .io import parse_word
    with open(path) as fh:
        return [parse_word(ln) for ln in fh if ln.strip() and not ln.startswith("#")]


def _json(path):
    from .io import load_json
    return load_json(path)


def _num(v):
    if isinstance(v, float):
        from .io import fmt17
        return fmt17(v)
    return v


def _h(cfg, default=0.05):
    h = cfg.params.get("net_spacing")
    return default if h is None else h


def _code(status):
    return {"certified": EXIT_OK, "inconclusive": EXIT_INCONCLUSIVE}.get(status, EXIT_REFUTED)


# ---------------------------------------------------------------- commands

def cmd_entropy(cfg):
    from .io import fmt12
    from .sft import entropy_info
    _need(cfg, "sft")
    info = entropy_info(_system(cfg))
    return Result(EXIT_OK, "certified", [f"entropy = {fmt12(info.value)}"],
                  {"entropy": info.value, "rho": info.rho, "irreducible": info.irreducible})


def cmd_words(cfg):
    from .io import word_str
    from .sft import admissible_words, word_count
    _need(cfg, "sft", "n")
    ts, n = _system(cfg), cfg.params["n"]
    ws = admissible_words(ts, n)
    c = word_count(ts, n)
    ok = c == len(ws)
    csv = "index,word\n" + "".join(f"{i},{word_str(w)}\n" for i, w in enumerate(ws))
    return Result(EXIT_OK if ok else EXIT_REFUTED, "certified" if ok else "refuted",
                  [f"{len(ws)} admissible words of length {n}; transfer-matrix count {c}"],
                  {"n": n, "count": len(ws), "transfer_count": c}, {"words.csv": csv})


def cmd_lind_gap(cfg):
    from .rigidity import lind_scaling_report, runs
    _need(cfg, "sft")
    ts = _system(cfg)
    if "words" in cfg.files:
        words = _read_words(cfg.files["words"])
    else:
        words = runs(cfg.params["symbol"], cfg.params["n_range"])
    rep = lind_scaling_report(ts, words, tol=cfg.params["band_tol"])
    ok = rep.ok and rep.decreasing
    lines = [f"rho = {rep.rho:.12g}, band ratio = {rep.band_ratio:.6g} (tol {rep.tol:g}), "
             f"decreasing = {rep.decreasing}, positive = {rep.positive}"]
    lines += [f"  n={r.n} gap={r.gap:.6e} normalized={r.normalized:.6g}" for r in rep.rows]
    return Result(EXIT_OK if ok else EXIT_INCONCLUSIVE, "certified" if ok else "inconclusive", lines,
                  {"rho": rep.rho, "band_ratio": rep.band_ratio, "decreasing": rep.decreasing,
                   "positive": rep.positive,
                   "rows": [{"n": r.n, "word": list(r.word), "gap": r.gap, "normalized": r.normalized}
                            for r in rep.rows]}, {"gaps.csv": rep.csv()})


def cmd_avoid(cfg):
    from .io import fmt12, parse_word
    from .sft import avoid_word_system, topological_entropy
    _need(cfg, "sft", "word")
    ts, w = _system(cfg), parse_word(cfg.params["word"])
    h0 = topological_entropy(ts)
    h1 = avoid_word_system(ts, w).entropy()
    return Result(EXIT_OK, "certified", [f"entropy avoiding {w} = {fmt12(h1)} (full {fmt12(h0)})"],
                  {"word": list(w), "entropy": h1, "base_entropy": h0, "gap": h0 - h1})


def cmd_cover_verify(cfg):
    import numpy as np
    from .cocycle import product_over_transition
    from .covering import Region, verify_covering
    from .io import covering_to_dict, dump_json_text, region_from_dict
    if "family" in cfg.files:
        d = _json(cfg.files["family"])
        fam = np.array(d["family"], dtype=float)
        labels = d.get("labels") or [{"label": repr(i)} for i in range(len(fam))]
        from .io import _unlabel
        family = [(_unlabel(lb) if isinstance(lb, dict) else lb, g) for lb, g in zip(labels, fam)]
        if "region" in d:
            U = region_from_dict(d["region"])
        else:
            U = Region.ball(d.get("radius", cfg.params["radius"]), fam.shape[1], d.get("group", "SL"))
        h = _h(cfg, d.get("h", 0.05))
    else:
        _need(cfg, "sft", "cocycle", "words")
        ts = _system(cfg)
        A = _cocycle(cfg, ts)
        family = [(w, product_over_transition(A, w)) for w in _read_words(cfg.files["words"])]
        U = Region.ball(cfg.params["radius"], A.dim, "SL" if A.group == "SL" else "GL")
        h = _h(cfg)
    cert = verify_covering(family, U, h)
    lines = [f"covering: {cert.status} ({cert.message})"]
    if cert.certified:
        lines.append(f"min margin {cert.min_margin:.6g} over {len(cert.points)} net points, "
                     f"{len(cert.used())} of {len(family)} maps used")
    return Result(_code(cert.status), cert.status, lines,
                  {"min_margin": cert.min_margin, "net_points": len(cert.points), "h": h,
                   "maps": len(family)},
                  artifacts={"covering.json": dump_json_text(covering_to_dict(cert))})


def cmd_multi_cover(cfg):
    from .covering import Region, cocycle_multi_cover, verify_multi_cover
    from .io import dump_json_text, multi_from_dict, multi_to_dict, parse_word
    _need(cfg, "sft", "cocycle")
    ts = _system(cfg)
    A = _cocycle(cfg, ts)
    if "cert" in cfg.files:
        mc = multi_from_dict(_json(cfg.files["cert"]))
        chk = verify_multi_cover(A, mc, full=True)
        st = "certified" if chk else "refuted"
        lines = [f"multi-cover re-verification: {st}"] + [f"  {f}" for f in chk.failures[:5]]
        return Result(_code(st), st, lines, {"m": mc.m, "failures": len(chk.failures)})
    _need(cfg, "words")
    words = _read_words(cfg.files["words"])
    width = 2 * A.k + 1
    letter = parse_word(cfg.params["letter"]) if cfg.params.get("letter") else words[0][:width]
    U = Region.ball(cfg.params["radius"], A.dim, "SL" if A.group == "SL" else "GL")
    mc = cocycle_multi_cover(A, [letter], U, _h(cfg), candidates={letter: words})
    chk = verify_multi_cover(A, mc, full=True)
    st = "certified" if chk else "refuted"
    lines = [f"multi-cover: {st}, m = {mc.m}, {len(mc.layers)} layers, "
             f"max iterates {mc.max_iterates()}"]
    return Result(_code(st), st, lines, {"m": mc.m, "layers": len(mc.layers),
                                         "max_iterates": mc.max_iterates()},
                  artifacts={"multicover.json": dump_json_text(multi_to_dict(mc))})


def _tree_lines(tree, tc, rep):
    return [f"tree: depth {tree.depth}, {len(tree.leaves())} leaves, L = {tree.L}, "
            f"min margin {tc.min_margin:.6g}",
            f"kappa = {rep.kappa_sharp:.12g} (formula {rep.kappa:.6g}), gamma = {rep.gamma:.12g}"]


def _leaves_csv(tree):
    from .io import word_str
    rows = ["leaf,n,atom,margin,word"]
    rows += [f"{nd.j},{nd.n},{nd.region},{nd.margin:.17g},{word_str(nd.word)}" for nd in tree.leaves()]
    return "\n".join(rows) + "\n"


def cmd_tree_build(cfg):
    from .branching import build_tree, kappa_bound, verify_tree
    from .io import bound_text, dump_json_text, multi_from_dict, tree_to_dict
    _need(cfg, "sft", "cocycle", "cert")
    ts = _system(cfg)
    A = _cocycle(cfg, ts)
    mc = multi_from_dict(_json(cfg.files["cert"]))
    tree = build_tree(A, mc, cfg.params["depth"])
    tc = verify_tree(A, tree)
    rep = kappa_bound(A, tree.V, tree.L, m=tree.m, tree=tree)
    st = "certified" if tc else "refuted"
    return Result(_code(st), st, _tree_lines(tree, tc, rep),
                  {"leaves": len(tree.leaves()), "L": tree.L, "m": tree.m, "kappa": rep.kappa_sharp,
                   "kappa_formula": rep.kappa, "gamma": rep.gamma, "min_margin": tc.min_margin},
                  {"leaves.csv": _leaves_csv(tree)},
                  {"tree.json": dump_json_text(tree_to_dict(tree)), "bound.txt": bound_text(rep)})


def cmd_tree_verify(cfg):
    from .branching import kappa_bound, verify_tree
    from .io import tree_from_dict
    _need(cfg, "sft", "cocycle", "tree")
    ts = _system(cfg)
    A = _cocycle(cfg, ts)
    tree = tree_from_dict(_json(cfg.files["tree"]))
    tc = verify_tree(A, tree)
    st = "certified" if tc else "refuted"
    lines = [f"tree verification: {st}"] + [f"  {f}" for f in tc.failures[:5]]
    data = {"leaves": len(tree.leaves()), "failures": len(tc.failures)}
    if tc:
        rep = kappa_bound(A, tree.V, tree.L, m=tree.m, tree=tree)
        lines += _tree_lines(tree, tc, rep)
        data.update(kappa=rep.kappa_sharp, gamma=rep.gamma)
    return Result(_code(st), st, lines, data)


def _scan_job(args):
    from .cocycle import bounded_count
    A, n, kappa, mode = args
    return bounded_count(A, n, kappa, mode)


def cmd_bounded_scan(cfg):
    from concurrent.futures import ThreadPoolExecutor
    _need(cfg, "sft", "cocycle", "kappa", "n")
    ts = _system(cfg)
    A = _cocycle(cfg, ts)
    mode, N = cfg.params["mode"], cfg.params["n"]
    jobs = [(A, n, k, mode) for k in cfg.params["kappa"] for n in range(2 * A.k + 2, N + 1)]
    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        counts = list(ex.map(_scan_job, jobs))
    rows, csv = [], ["kappa,n,count,entropy_upper"]
    for (_, n, k, _), c in zip(jobs, counts):
        e = math.log(c) / n if c else -math.inf
        rows.append({"kappa": k, "n": n, "count": c, "entropy_upper": e})
        csv.append(f"{k:.17g},{n},{c},{e:.17g}")
    lines = [f"kappa={r['kappa']:g} n={r['n']} count={r['count']} upper={r['entropy_upper']:.12g}"
             for r in rows if r["n"] == N]
    return Result(EXIT_OK, "certified", lines, {"mode": mode, "rows": rows},
                  {"scan.csv": "\n".join(csv) + "\n"})


def cmd_rigidity(cfg):
    from .io import dump_json_text, forbidden_from_dict, forbidden_to_dict
    from .rigidity import forbidden_cylinder_upper, isometric_necessary, verify_forbidden
    _need(cfg, "sft", "cocycle")
    ts = _system(cfg)
    A = _cocycle(cfg, ts)
    if "forbidden" in cfg.files:
        fc = forbidden_from_dict(_json(cfg.files["forbidden"]))
        ok = verify_forbidden(A, fc)
        st = "certified" if ok else "refuted"
        return Result(_code(st), st, [f"forbidden cylinder re-verification: {st}"],
                      {"bound": fc.bound, "word": list(fc.word), "N": fc.N})
    _need(cfg, "kappa")
    kappa = cfg.params["kappa"][0]
    iso = isometric_necessary(A, cfg.params["max_period"])
    lines = [f"isometric test: {iso.summary()}"]
    data = {"isometric_passed": iso.passed, "isometric_period": iso.period}
    arts = {}
    fc = forbidden_cylinder_upper(A, kappa, cfg.params["horizon"], level=cfg.params["level"])
    if fc is None:
        st = "inconclusive"
        lines.append(f"no forbidden cylinder up to horizon {cfg.params['horizon']}")
    else:
        st = "certified"
        lines.append(f"forbidden cylinder w = {fc.word}, N = {fc.N}: entropy of B(A, {kappa:g}) "
                     f"<= {fc.bound:.12g} < {fc.base_entropy:.12g}")
        data.update(bound=fc.bound, base_entropy=fc.base_entropy, word=list(fc.word), N=fc.N)
        arts["forbidden.json"] = dump_json_text(forbidden_to_dict(fc))
    return Result(_code(st), st, lines, data, artifacts=arts)


def cmd_perturb(cfg):
    from .cocycle import product_over_transition
    from .covering import verify_covering
    from .io import cocycle_text, covering_to_dict, dump_json_text, words_text
    from .perturb import covering_perturbation, default_targets, find_identity_return
    _need(cfg, "sft", "cocycle")
    ts = _system(cfg)
    A = _cocycle(cfg, ts)
    h = _h(cfg)
    p = find_identity_return(A, cfg.params["max_period"])
    if p is None:
        return Result(EXIT_REFUTED, "failed", [f"no identity return up to period "
                                               f"{cfg.params['max_period']}"])
    U, targets, gcert, _ = default_targets(A, cfg.params["radius"], h)
    if not gcert.certified:
        return Result(_code(gcert.status), gcert.status, [f"targets: {gcert.message}"])
    A2, plan = covering_perturbation(A, p, targets, cfg.params["eps"])
    cert = verify_covering([(W, product_over_transition(A2, W)) for W in plan.words], U, h)
    lines = [f"identity return p = {p}", f"plan: N = {plan.N}, l = {plan.ell}, window radius {plan.k}, "
             f"{len(targets)} targets, d_C0 = {plan.distance:.6g} (eps {cfg.params['eps']:g})",
             f"max product error {max(plan.product_errors):.3g}",
             f"covering: {cert.status} ({cert.message})"]
    data = {"p": list(p), "N": plan.N, "ell": plan.ell, "k": plan.k, "distance": plan.distance,
            "max_product_error": max(plan.product_errors), "spurious": len(plan.spurious),
            "letter": list(plan.letter)}
    arts = {"perturbed.txt": cocycle_text(A2), "covering_words.txt": words_text(plan.words),
            "covering.json": dump_json_text(covering_to_dict(cert))}
    return Result(_code(cert.status), cert.status, lines, data, artifacts=arts)


def cmd_pipeline(cfg):
    from .io import reverify_pipeline
    from .perturb import theorem_a_pipeline
    if cfg.params.get("reverify"):
        res = reverify_pipeline(cfg.params["reverify"])
        ok = all(res.values())
        st = "certified" if ok else "refuted"
        return Result(_code(st), st, [f"re-verification from files: {st}"] +
                      [f"  {k}: {v}" for k, v in res.items()], {"checks": res})
    _need(cfg, "sft", "cocycle")
    ts = _system(cfg)
    A = _cocycle(cfg, ts)
    kw = {}
    if cfg.params.get("net_spacing") is not None:
        kw["h"] = cfg.params["net_spacing"]
    rep = theorem_a_pipeline(A, cfg.params["eps"], depth=cfg.params["depth"],
                             horizon=cfg.params["horizon"], max_period=cfg.params["max_period"],
                             U_radius=cfg.params["radius"], seed=cfg.seed, **kw)
    if rep.ok:
        st = "certified"
    elif rep.failed_stage in ("forbidden-cylinder", "targets"):
        st = "inconclusive"
    else:
        st = "failed"
    res = Result(_code(st), st, rep.text().splitlines(), {"constants": rep.constants})
    res.data["pipeline"] = rep
    return res


HANDLERS = {"entropy": cmd_entropy, "words": cmd_words, "lind-gap": cmd_lind_gap, "avoid": cmd_avoid,
            "cover-verify": cmd_cover_verify, "multi-cover": cmd_multi_cover,
            "tree-build": cmd_tree_build, "tree-verify": cmd_tree_verify,
            "bounded-scan": cmd_bounded_scan, "rigidity": cmd_rigidity, "perturb": cmd_perturb,
            "pipeline": cmd_pipeline}


# ---------------------------------------------------------------- reports

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def report_text(cfg, res) -> str:
    out = [f"command: {cfg.command}", f"status: {res.status}", f"exit code: {res.code}", "config:"]
    for k, v in sorted(cfg.files.items()):
        out.append(f"  {k} = {v}")
    for k, v in sorted(cfg.params.items()):
        if v is None:
            continue
        if isinstance(v, range):
            v = f"{v.start}:{v.stop - 1}"
        out.append(f"  {k} = {_num(v)}")
    out.append(f"  seed = {cfg.seed}")
    out.append("result:")
    out += ["  " + ln for ln in res.lines]
    return "\n".join(out) + "\n"


def report_json(cfg, res) -> dict:
    params = {k: (f"{v.start}:{v.stop - 1}" if isinstance(v, range) else v) for k, v in cfg.params.items()}
    data = {k: v for k, v in res.data.items() if k != "pipeline"}
    return _jsonable({"command": cfg.command, "status": res.status, "exit_code": res.code,
                      "config": {"files": cfg.files, "params": params, "seed": cfg.seed},
                      "result": data})


def emit(cfg, res) -> None:
    from .io import dump_json_text
    text = report_text(cfg, res)
    sys.stdout.write(text)
    if cfg.out is None:
        return
    os.makedirs(cfg.out, exist_ok=True)
    if "pipeline" in res.data:
        from .io import write_pipeline
        write_pipeline(res.data["pipeline"], cfg.out)
    else:
        with open(os.path.join(cfg.out, "report.txt"), "w") as fh:
            fh.write(text)
        with open(os.path.join(cfg.out, "report.json"), "w") as fh:
            fh.write(dump_json_text(report_json(cfg, res)))
    for name, body in {**res.csv, **res.artifacts}.items():
        with open(os.path.join(cfg.out, name), "w") as fh:
            fh.write(body)


def run(cfg: RunConfig) -> int:
    from .errors import BudgetExceeded, CocycleError, InputError
    try:
        res = HANDLERS[cfg.command](cfg)
    except UsageError:
        raise
    except BudgetExceeded as e:
        res = Result(EXIT_INCONCLUSIVE, "inconclusive", [f"budget exceeded: {e}"])
    except InputError as e:
        raise UsageError(str(e)) from None
    except (KeyError, ValueError) as e:
        raise UsageError(f"malformed input: {type(e).__name__}: {e}") from None
    except CocycleError as e:
        res = Result(EXIT_REFUTED, "failed", [f"{type(e).__name__}: {e}"])
    emit(cfg, res)
    return res.code


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        if "numpy" not in sys.modules:
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
                os.environ[var] = str(cfg.threads)
        return run(cfg)
    except UsageError as e:
        sys.stderr.write(f"usage error: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
