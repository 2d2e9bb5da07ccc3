"""Group Steiner rounding on trees: hop levels, capped scaling, recursive
randomized rounding, repetition and union.

The pipeline solves the tree LP, modifies the solution to power-of-two values
(P1-P6), computes hop levels and the scaled solution x', then repeats the
top-down Bernoulli rounding M times and unions the sampled subtrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InfeasibleError, InvariantError
from .instances import GroupTreeInstance
from .lpcore import (INFEASIBLE, build_gst_lp, check_modified_solution,
                     modify_gst_solution, solve_lp)


def global_params(n: int) -> tuple[int, int]:
    """(L, gamma): L = ceil(log2(2n)), gamma = floor(log2 L) - 2, clamped at 0
    so that tiny instances fall back to unscaled rounding."""
    if n < 1:
        raise ValueError("need n >= 1")
    L = math.ceil(math.log2(2 * n))
    gamma = max(math.floor(math.log2(L)) - 2, 0) if L >= 1 else 0
    return L, gamma


def compute_hop_levels(inst: GroupTreeInstance, xt: np.ndarray) -> np.ndarray:
    """Hop level per vertex: edge (u, v) contributes 1 iff x~_v < x~_u.

    Levels are computed on the support of x~ only; vertices with x~ = 0 get
    level -1 and never participate in rounding.
    """
    if xt[inst.root] <= 0:
        raise InvariantError("root has zero value; nothing to round")
    ell = np.full(inst.n, -1, dtype=int)
    ell[inst.root] = 0
    stack = [inst.root]
    while stack:
        u = stack.pop()
        for v in inst.children[u]:
            if xt[v] <= 0:
                continue
            if xt[v] > xt[u]:
                raise InvariantError(f"x~ increases on edge ({u}, {v})")
            ell[v] = ell[u] + (1 if xt[v] < xt[u] else 0)
            stack.append(v)
    return ell


def scale_solution(xt: np.ndarray, ell: np.ndarray, gamma: int) -> np.ndarray:
    """x'_u = 2^min(ell_u, gamma) * x~_u on the support, capped at 1."""
    xp = np.zeros_like(xt, dtype=float)
    on = ell >= 0
    xp[on] = np.ldexp(xt[on], np.minimum(ell[on], gamma))
    if np.any(xp > 1 + 1e-12):
        raise InvariantError("scaled value above 1")
    return xp


@dataclass
class ScaledSolution:
    xt: np.ndarray
    ell: np.ndarray
    L: int
    gamma: int
    xp: np.ndarray


def build_scaled(inst: GroupTreeInstance, xt: np.ndarray) -> ScaledSolution:
    L, gamma = global_params(inst.n)
    ell = compute_hop_levels(inst, xt)
    if np.any(ell > L):
        raise InvariantError("hop level exceeds L")
    xp = scale_solution(xt, ell, gamma)
    bad = check_nonincreasing(inst, xp)
    if bad:
        raise InvariantError("; ".join(bad))
    return ScaledSolution(xt, ell, L, gamma, xp)


def check_nonincreasing(inst: GroupTreeInstance, xp: np.ndarray,
                 tol: float = 1e-12) -> list[str]:
    """x' must be non-increasing on every edge of the support."""
    bad = []
    for u in range(inst.n):
        if xp[u] <= 0:
            continue
        for v in inst.children[u]:
            if xp[v] > xp[u] + tol:
                bad.append(f"x' increases on edge ({u}, {v}): "
                           f"{xp[v]} > {xp[u]}")
    return bad


def check_branching_mass(inst: GroupTreeInstance, xp: np.ndarray,
                         tol: float = 1e-9) -> list[str]:
    """Conditional branching mass sum_v x'_v / x'_u must stay below 4 d_u."""
    bad = []
    for u in range(inst.n):
        if xp[u] <= 0 or not inst.children[u]:
            continue
        mass = sum(xp[v] for v in inst.children[u]) / xp[u]
        if mass > 4 * inst.degree_bound[u] + tol:
            bad.append(f"branching mass {mass} > 4 d at u={u}")
    return bad


class Rounder:
    """Per-vertex child ratio tables prepared once, sampled many times."""

    def __init__(self, inst: GroupTreeInstance, xp: np.ndarray):
        self.inst = inst
        self.root = inst.root
        self.tables: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        if xp[inst.root] <= 0:
            raise InvariantError("root not in the support")
        for u in range(inst.n):
            if xp[u] <= 0:
                continue
            kids = np.array([v for v in inst.children[u] if xp[v] > 0],
                            dtype=int)
            if len(kids) == 0:
                continue
            ratio = xp[kids] / xp[u]
            if np.any(ratio > 1 + 1e-9):
                raise InvariantError(f"child ratio above 1 below u={u}")
            self.tables[u] = (kids, np.minimum(ratio, 1.0))

    def sample(self, rng) -> set[int]:
        chosen = {self.root}
        stack = [self.root]
        while stack:
            u = stack.pop()
            entry = self.tables.get(u)
            if entry is None:
                continue
            kids, ratio = entry
            take = kids[rng.random(len(kids)) < ratio]
            for v in take:
                chosen.add(int(v))
                stack.append(int(v))
        return chosen


def recursive_round(inst: GroupTreeInstance, xp: np.ndarray, rng) -> set[int]:
    """One top-down rounding pass; each child of a chosen vertex joins
    independently with probability x'_v / x'_u."""
    return Rounder(inst, xp).sample(rng)


def alpha_sequence(L: int, gamma: int) -> list[float]:
    """alpha_ell for ell = 0..gamma: alpha_gamma = 1/(2L), then
    alpha_ell = 2 alpha_{ell+1} - 4 alpha_{ell+1}^2 going down."""
    if L < 1 or gamma < 0:
        raise ValueError("need L >= 1 and gamma >= 0")
    a = Fraction(1, 2 * L)
    seq = [a]
    for _ in range(gamma):
        a = 2 * a - 4 * a * a
        seq.append(a)
    seq.reverse()
    return [float(v) for v in seq]


def default_m(alpha0: float, k: int) -> int:
    """Smallest M with (1 - alpha0/2)^M <= 1/(10k)."""
    return math.ceil(math.log(10 * k) / -math.log1p(-alpha0 / 2))


def group_mass(inst: GroupTreeInstance, x: np.ndarray) -> list[float]:
    """z_r per group: total solution mass on the group's members."""
    return [float(sum(x[o] for o in sorted(g))) for g in inst.groups]


def rep_rng(seed: int, i: int):
    return np.random.default_rng([seed, i])


@dataclass
class GstParams:
    M: int | None = None
    seed: int = 0
    validate: bool = True


@dataclass
class GstRunReport:
    instance: str
    seed: int
    L: int
    gamma: int
    alpha: list[float]
    M: int
    lp_cost: float
    modified_cost: float
    repetition_costs: list[int]
    union_cost: int
    union_vertices: list[int]
    coverage: list[bool]
    degree_violations: dict[int, float]
    z_root: list[float]

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "problem": "gst",
            "instance": self.instance,
            "seed": self.seed,
            "L": self.L,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "alpha0": self.alpha[0],
            "M": self.M,
            "lp_cost": self.lp_cost,
            "modified_cost": self.modified_cost,
            "repetition_costs": self.repetition_costs,
            "union_cost": self.union_cost,
            "union_vertices": self.union_vertices,
            "coverage": self.coverage,
            "degree_violations": {str(v): r for v, r in
                                  sorted(self.degree_violations.items())},
            "z_root": self.z_root,
        }


def union_degree_ratios(inst: GroupTreeInstance,
                        union: set[int]) -> dict[int, float]:
    """Distinct real (non-synthetic) children in the union per vertex,
    relative to the degree bound."""
    out = {}
    for u in sorted(union):
        kids = [v for v in inst.children[u]
                if v in union and not inst.synthetic_leaf[v]]
        if kids:
            out[u] = len(kids) / max(inst.degree_bound[u], 1)
    return out


def run_gst(inst: GroupTreeInstance, params: GstParams | None = None,
            label: str = "") -> GstRunReport:
    """Full DB-GST-T pipeline on a preprocessed instance."""
    params = params or GstParams()
    model = build_gst_lp(inst)
    sol = solve_lp(model)
    if sol.status == INFEASIBLE:
        raise InfeasibleError("GST LP is infeasible")

    xt = modify_gst_solution(sol.x, inst.n)
    if params.validate:
        bad = check_modified_solution(inst, sol.x, xt)
        if bad:
            raise InvariantError("modified solution invalid: " + "; ".join(bad))

    scaled = build_scaled(inst, xt)
    if params.validate:
        bad = check_branching_mass(inst, scaled.xp)
        if bad:
            raise InvariantError("; ".join(bad))

    alpha = alpha_sequence(scaled.L, scaled.gamma)
    k = len(inst.groups)
    M = params.M if params.M is not None else default_m(alpha[0], k)

    rounder = Rounder(inst, scaled.xp)
    costs = np.array(inst.cost)
    union: set[int] = set()
    rep_costs = []
    for i in range(M):
        chosen = rounder.sample(rep_rng(params.seed, i))
        rep_costs.append(int(sum(costs[v] for v in chosen)))
        union |= chosen

    coverage = [any(o in union for o in g) for g in inst.groups]
    union_cost = int(sum(costs[v] for v in union))
    return GstRunReport(
        instance=label, seed=params.seed, L=scaled.L, gamma=scaled.gamma,
        alpha=alpha, M=M, lp_cost=sol.objective,
        modified_cost=float(costs @ xt), repetition_costs=rep_costs,
        union_cost=union_cost, union_vertices=sorted(union),
        coverage=coverage, degree_violations=union_degree_ratios(inst, union),
        z_root=group_mass(inst, xt))
