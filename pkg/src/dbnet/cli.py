"""Command-line front end: generators, solvers, oracles, verification."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .errors import DbnetError, FormatError, InvariantError
from .gst_round import (GstParams, Rounder, build_scaled, rep_rng, run_gst,
                        union_degree_ratios)
from .instances import (DirectedInstance, GroupTreeInstance, normalize,
                        parse_dst, parse_gst, preprocess_gst, serialize_dst,
                        serialize_gst)
from .lpcore import (INFEASIBLE, build_dst_lp, build_gst_lp, dump_lp,
                     modify_gst_solution, solve_lp)
from .dst_round import DstParams, run_dst
from .oracle import exact_dst, exact_gst
from .states import build_super_tree
from .treekit import height_budget

EPS_OBJ = 1e-7


def gen_dst(n: int, m: int, k: int, d_max: int = 3,
            cost_range: tuple[int, int] = (1, 20),
            seed: int = 0) -> DirectedInstance:
    """Random reachable instance: embed an arborescence, then add extra arcs.

    Degree bounds are lifted to the embedded fan-outs, so the instance is
    always feasible.
    """
    if n < 2 or k < 1 or k > n - 1 or m < n - 1 or d_max < 1:
        raise FormatError("inconsistent generator parameters")
    if m > (n - 1) * (n - 1):
        raise FormatError("too many edges requested")
    rng = np.random.default_rng(seed)
    lo, hi = cost_range
    fanout = [0] * n
    edges = {}
    for v in range(1, n):
        ok = [u for u in range(v) if fanout[u] < d_max]
        u = int(ok[rng.integers(len(ok))])
        fanout[u] += 1
        edges[(u, v)] = int(rng.integers(lo, hi + 1))
    while len(edges) < m:
        u = int(rng.integers(n))
        v = int(rng.integers(1, n))
        if u != v and (u, v) not in edges:
            edges[(u, v)] = int(rng.integers(lo, hi + 1))
    terminals = sorted(int(t) for t in
                       rng.choice(np.arange(1, n), size=k, replace=False))
    bounds = {v: max(int(rng.integers(1, d_max + 1)), fanout[v])
              for v in range(n)}
    triples = [(u, v, c) for (u, v), c in sorted(edges.items())]
    return DirectedInstance(n, triples, 0, frozenset(terminals), bounds)


def gen_gst(n: int, k: int, depth: int = 4, d_max: int = 3,
            cost_range: tuple[int, int] = (1, 20),
            seed: int = 0) -> GroupTreeInstance:
    """Random rooted tree with disjoint leaf groups; degree bounds are lifted
    to cover one designated leaf per group, so the instance is feasible."""
    if n < 2 or k < 1 or depth < 1 or d_max < 1:
        raise FormatError("inconsistent generator parameters")
    rng = np.random.default_rng(seed)
    lo, hi = cost_range
    parent = [-1] * n
    level = [0] * n
    fanout = [0] * n
    for v in range(1, n):
        ok = [u for u in range(v)
              if level[u] < depth and fanout[u] < d_max]
        if not ok:
            raise FormatError("depth/d_max too tight for n vertices")
        u = int(ok[rng.integers(len(ok))])
        parent[v] = u
        level[v] = level[u] + 1
        fanout[u] += 1
    children = [[] for _ in range(n)]
    for v in range(1, n):
        children[parent[v]].append(v)
    leaves = [v for v in range(n) if not children[v] and v != 0]
    if len(leaves) < k:
        raise FormatError(f"only {len(leaves)} leaves for {k} groups")
    order = [leaves[i] for i in rng.permutation(len(leaves))]
    groups = [{order[t]} for t in range(k)]
    for o in order[k:]:
        t = int(rng.integers(k + 1))
        if t < k:
            groups[t].add(o)
    cost = [int(rng.integers(lo, hi + 1)) for _ in range(n)]
    cost[0] = 0
    # children used by the union of the designated root-to-leaf paths
    on_path = set()
    for t in range(k):
        v = order[t]
        while v != -1 and v not in on_path:
            on_path.add(v)
            v = parent[v]
    need = [0] * n
    for v in on_path:
        if parent[v] != -1:
            need[parent[v]] += 1
    bounds = [max(int(rng.integers(1, d_max + 1)), need[v], 1)
              for v in range(n)]
    return GroupTreeInstance(n, parent, cost,
                             [frozenset(g) for g in groups], bounds)


def _first_on_path(parent, designated, v):
    return False


def _read(path: str) -> str:
    try:
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}")


def _emit(text: str, out: str | None):
    if out:
        try:
            with open(out, "w") as f:
                f.write(text)
        except OSError as e:
            raise FormatError(f"cannot write {out}: {e}")
    else:
        sys.stdout.write(text)


def _emit_json(doc: dict, out: str | None):
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", out)


def _load_dst(path: str) -> DirectedInstance:
    return parse_dst(_read(path))


def _load_gst(path: str) -> GroupTreeInstance:
    inst = parse_gst(_read(path))
    inst.validate_groups()
    return inst


def _parse_gen_spec(spec: str) -> dict[str, int]:
    out = {}
    for part in spec.split(","):
        if "=" not in part:
            raise FormatError(f"bad generator spec item: {part!r}")
        key, val = part.split("=", 1)
        try:
            out[key.strip()] = int(val)
        except ValueError:
            raise FormatError(f"bad generator value: {part!r}")
    return out


def _cost_range(args) -> tuple[int, int]:
    lo, _, hi = args.cost_range.partition(":")
    try:
        return int(lo), int(hi)
    except ValueError:
        raise FormatError(f"bad cost range: {args.cost_range!r}")


def cmd_gen_dst(args) -> int:
    inst = gen_dst(args.n, args.m, args.k, args.d_max, _cost_range(args),
                   args.seed)
    _emit(serialize_dst(inst), args.out)
    return 0


def cmd_gen_gst(args) -> int:
    inst = gen_gst(args.n, args.k, args.depth, args.d_max, _cost_range(args),
                   args.seed)
    _emit(serialize_gst(inst), args.out)
    return 0


def cmd_solve_dst(args) -> int:
    inst = _load_dst(args.instance)
    norm = normalize(inst)
    params = DstParams(h=args.height, Q=args.q, seed=args.seed,
                       node_cap=args.node_cap)
    report = run_dst(norm, params, label=args.instance)
    _emit_json(report.to_dict(), args.out)
    return 0


def cmd_solve_gst(args) -> int:
    inst = preprocess_gst(_load_gst(args.instance))
    params = GstParams(M=args.m, seed=args.seed)
    report = run_gst(inst, params, label=args.instance)
    _emit_json(report.to_dict(), args.out)
    return 0


def cmd_oracle_dst(args) -> int:
    res = exact_dst(_load_dst(args.instance))
    _emit_json(res.to_dict(), args.out)
    return 0 if res.status == "OPTIMAL" else 2


def cmd_oracle_gst(args) -> int:
    res = exact_gst(preprocess_gst(_load_gst(args.instance)))
    _emit_json(res.to_dict(), args.out)
    return 0 if res.status == "OPTIMAL" else 2


def cmd_dump_supertree(args) -> int:
    inst = _load_dst(args.instance)
    norm = normalize(inst)
    h = args.height if args.height is not None else height_budget(norm.inst.n)
    st = build_super_tree(norm, h, args.node_cap)
    _emit(st.dump(), args.out)
    return 0


def cmd_dump_lp(args) -> int:
    if args.problem == "dst":
        norm = normalize(_load_dst(args.instance))
        h = (args.height if args.height is not None
             else height_budget(norm.inst.n))
        model = build_dst_lp(build_super_tree(norm, h, args.node_cap))
    else:
        model = build_gst_lp(preprocess_gst(_load_gst(args.instance)))
    _emit(dump_lp(model), args.out)
    return 0


def _stat(hits: np.ndarray) -> dict:
    trials = len(hits)
    mean = float(np.mean(hits))
    return {"mean": mean,
            "stddev": float(math.sqrt(mean * (1 - mean) / trials)),
            "trials": trials}


def cmd_run(args) -> int:
    if args.gen:
        spec = _parse_gen_spec(args.gen)
        gen_seed = spec.pop("seed", args.seed)
        if args.problem == "dst":
            inst = gen_dst(spec.pop("n", 8), spec.pop("m", 12),
                           spec.pop("k", 3), spec.pop("d", 3),
                           seed=gen_seed)
        else:
            inst = gen_gst(spec.pop("n", 20), spec.pop("k", 3),
                           spec.pop("depth", 4), spec.pop("d", 3),
                           seed=gen_seed)
        if spec:
            raise FormatError(f"unknown generator keys: {sorted(spec)}")
        label = f"gen:{args.gen}"
    elif args.instance:
        label = args.instance
        inst = (_load_dst(args.instance) if args.problem == "dst"
                else _load_gst(args.instance))
    else:
        raise FormatError("run needs --instance or --gen")

    if args.problem == "dst":
        norm = normalize(inst)
        report = run_dst(norm, DstParams(h=args.height, Q=args.q,
                                         seed=args.seed,
                                         node_cap=args.node_cap), label)
        doc = report.to_dict()
        if report.coverage < 1.0 and args.strict_coverage:
            raise InvariantError("extracted tree does not cover all terminals")
        try:
            res = exact_dst(inst)
        except DbnetError:
            res = None
        if res is not None:
            doc["oracle"] = res.to_dict()
            if (res.status == "OPTIMAL"
                    and report.lp_cost > res.cost + EPS_OBJ * (1 + res.cost)):
                raise InvariantError(
                    f"LP cost {report.lp_cost} exceeds oracle {res.cost}")
        if args.trials:
            doc["stats"] = _dst_trial_stats(norm, args)
    else:
        pre = preprocess_gst(inst)
        report = run_gst(pre, GstParams(M=args.m, seed=args.seed), label)
        doc = report.to_dict()
        try:
            res = exact_gst(pre)
        except DbnetError:
            res = None
        if res is not None:
            doc["oracle"] = res.to_dict()
            if (res.status == "OPTIMAL"
                    and report.lp_cost > res.cost + EPS_OBJ * (1 + res.cost)):
                raise InvariantError(
                    f"LP cost {report.lp_cost} exceeds oracle {res.cost}")
        if args.trials:
            doc["stats"] = _gst_trial_stats(pre, args)
    _emit_json(doc, args.out)
    return 0


def _dst_trial_stats(norm, args) -> dict:
    from .dst_round import Sampler
    h = args.height if args.height is not None else height_budget(norm.inst.n)
    st = build_super_tree(norm, h, args.node_cap)
    sol = solve_lp(build_dst_lp(st))
    if sol.status == INFEASIBLE:
        raise InvariantError("LP became infeasible during stats")
    sampler = Sampler(st, sol.x)
    terms = sorted(st.terminal_index())
    hits = {t: np.zeros(args.trials) for t in terms}
    costs = np.zeros(args.trials)
    for i in range(args.trials):
        rng = np.random.default_rng([args.seed, 1 << 32, i])
        _, bases = sampler.sample(rng)
        costs[i] = sum(st.cost[o] for o in bases)
        for o in bases:
            for v in st.involved_vertices(o):
                if v in hits:
                    hits[v][i] = 1.0
    return {"per_terminal_hit": {str(t): _stat(hits[t]) for t in terms},
            "cost": {"mean": float(np.mean(costs)),
                     "stddev": float(np.std(costs) / math.sqrt(args.trials)),
                     "trials": args.trials}}


def _gst_trial_stats(pre, args) -> dict:
    sol = solve_lp(build_gst_lp(pre))
    if sol.status == INFEASIBLE:
        raise InvariantError("LP became infeasible during stats")
    xt = modify_gst_solution(sol.x, pre.n)
    scaled = build_scaled(pre, xt)
    rounder = Rounder(pre, scaled.xp)
    k = len(pre.groups)
    hits = np.zeros((k, args.trials))
    for i in range(args.trials):
        chosen = rounder.sample(np.random.default_rng([args.seed, 1 << 32, i]))
        for t, g in enumerate(pre.groups):
            if any(o in chosen for o in g):
                hits[t, i] = 1.0
    return {"per_group_hit": {str(t): _stat(hits[t]) for t in range(k)}}


def cmd_verify(args) -> int:
    try:
        doc = json.loads(_read(args.tree))
    except json.JSONDecodeError as e:
        raise FormatError(f"bad report JSON: {e}")
    problem = doc.get("problem")
    if problem == "dst":
        bad = verify_dst_report(_load_dst(args.instance), doc)
    elif problem == "gst":
        bad = verify_gst_report(preprocess_gst(_load_gst(args.instance)), doc)
    else:
        raise FormatError(f"unknown problem kind: {problem!r}")
    if bad:
        for msg in bad:
            print(f"verify: {msg}", file=sys.stderr)
        raise InvariantError(f"{len(bad)} verification failure(s)")
    print("verify: ok")
    return 0


def verify_dst_report(inst: DirectedInstance, doc: dict) -> list[str]:
    bad = []
    edges = [tuple(e) for e in doc.get("tree_edges", [])]
    cost = inst.cost
    parent = {}
    for (u, v) in edges:
        if (u, v) not in cost:
            bad.append(f"edge ({u}, {v}) not in the instance")
        if v in parent:
            bad.append(f"vertex {v} has two parents")
        parent[v] = u
    reach = {inst.root}
    frontier = [inst.root]
    adj = {}
    for (u, v) in edges:
        adj.setdefault(u, []).append(v)
    while frontier:
        u = frontier.pop()
        for v in adj.get(u, []):
            if v not in reach:
                reach.add(v)
                frontier.append(v)
    if any(v not in reach for (_, v) in edges):
        bad.append("tree has edges unreachable from the root")
    covered = sorted(set(inst.terminals) & reach)
    if covered != doc.get("covered"):
        bad.append(f"covered set mismatch: {covered} vs {doc.get('covered')}")
    total = sum(cost.get(e, 0) for e in edges)
    if total != doc.get("tree_cost"):
        bad.append(f"tree cost mismatch: {total} vs {doc.get('tree_cost')}")
    outdeg = {}
    for (u, _) in edges:
        outdeg[u] = outdeg.get(u, 0) + 1
    want = {str(u): d / max(inst.degree_bound[u], 1)
            for u, d in outdeg.items()}
    got = doc.get("degree_violations", {})
    if {k: round(v, 9) for k, v in want.items()} != \
            {k: round(v, 9) for k, v in got.items()}:
        bad.append("degree violation ratios mismatch")
    return bad


def verify_gst_report(inst: GroupTreeInstance, doc: dict) -> list[str]:
    bad = []
    union = set(doc.get("union_vertices", []))
    for v in sorted(union):
        if not (0 <= v < inst.n):
            bad.append(f"vertex {v} out of range")
        elif inst.parent[v] != -1 and inst.parent[v] not in union:
            bad.append(f"vertex {v} in union without its parent")
    if inst.root not in union:
        bad.append("root missing from the union")
    coverage = [any(o in union for o in g) for g in inst.groups]
    if coverage != doc.get("coverage"):
        bad.append("coverage flags mismatch")
    total = sum(inst.cost[v] for v in union if 0 <= v < inst.n)
    if total != doc.get("union_cost"):
        bad.append(f"union cost mismatch: {total} vs {doc.get('union_cost')}")
    want = {str(u): r for u, r in union_degree_ratios(inst, union).items()}
    got = doc.get("degree_violations", {})
    if {k: round(v, 9) for k, v in want.items()} != \
            {k: round(v, 9) for k, v in got.items()}:
        bad.append("degree violation ratios mismatch")
    return bad


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dbnet",
                                description="degree-bounded network design "
                                            "experiment driver")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, instance=True):
        if instance:
            sp.add_argument("--instance", required=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")

    sp = sub.add_parser("gen-dst")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--d-max", type=int, default=3)
    sp.add_argument("--cost-range", default="1:20")
    common(sp, instance=False)
    sp.set_defaults(func=cmd_gen_dst)

    sp = sub.add_parser("gen-gst")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--depth", type=int, default=4)
    sp.add_argument("--d-max", type=int, default=3)
    sp.add_argument("--cost-range", default="1:20")
    common(sp, instance=False)
    sp.set_defaults(func=cmd_gen_gst)

    sp = sub.add_parser("solve-dst")
    common(sp)
    sp.add_argument("--q", type=int)
    sp.add_argument("--height", type=int)
    sp.add_argument("--node-cap", type=int, default=5_000_000)
    sp.set_defaults(func=cmd_solve_dst)

    sp = sub.add_parser("solve-gst")
    common(sp)
    sp.add_argument("--m", type=int)
    sp.set_defaults(func=cmd_solve_gst)

    sp = sub.add_parser("oracle-dst")
    common(sp)
    sp.set_defaults(func=cmd_oracle_dst)

    sp = sub.add_parser("oracle-gst")
    common(sp)
    sp.set_defaults(func=cmd_oracle_gst)

    sp = sub.add_parser("run")
    sp.add_argument("--problem", choices=["dst", "gst"], required=True)
    sp.add_argument("--instance")
    sp.add_argument("--gen")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=0)
    sp.add_argument("--q", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--height", type=int)
    sp.add_argument("--node-cap", type=int, default=5_000_000)
    sp.add_argument("--strict-coverage", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--instance", required=True)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("dump-supertree")
    common(sp)
    sp.add_argument("--height", type=int)
    sp.add_argument("--node-cap", type=int, default=5_000_000)
    sp.set_defaults(func=cmd_dump_supertree)

    sp = sub.add_parser("dump-lp")
    sp.add_argument("--problem", choices=["dst", "gst"], required=True)
    common(sp)
    sp.add_argument("--height", type=int)
    sp.add_argument("--node-cap", type=int, default=5_000_000)
    sp.set_defaults(func=cmd_dump_lp)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DbnetError as e:
        print(f"dbnet: error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
