"""Linear programs for the perfect-privacy utility and its per-letter relaxations.

Each disclosed symbol ``u`` is assigned a basic index set ``Omega_u`` and an
unnormalized vector ``eta_u >= 0`` on it, with ``P_U(u) = 1^T eta_u`` and
``P_{Y|U=u} = eta_u / P_U(u)``.  In these variables

* the mixture constraint ``sum_u P_U(u) P_{Y|U=u} = P_Y`` is linear,
* the per-letter deviation ``P_U(u) (P_{X|U=u} - P_X) = G_u eta_u`` with
  ``G_u = P_{X|Y}[:, Omega_u] - P_X 1^T`` is linear, so both l1 criteria
  become linear after splitting absolute values,
* the entropy linearized at ``t_Omega`` gives the cost ``-log(t_Omega) . eta_u``.

The linearized cost exceeds the exact ``H(Y|U)`` by ``sum_u P_U(u) KL(V_u || t)``,
so ``H(Y) - lp_value`` never exceeds the exact utility of the reconstruction.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .bounds import InvariantError
from .geometry import (
    POS_TOL,
    ErrorBound,
    GeometryContext,
    OmegaInfo,
    basic_solutions,
    build_context,
    error_bounds,
    fine_error_constant,
    right_singular_basis,
)
from .mechanisms import DomainError, Mechanism, decompose_utility
from .probcore import JointDist, LogBase, entropy_nats, from_nats, per_letter_leakage

COMBINATION_CAP = 10**6
BUDGET_MARGIN = 1e-9
_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass(frozen=True)
class EtaAssignment:
    omegas: tuple[tuple[int, ...], ...]
    eta: tuple[np.ndarray, ...]

    @property
    def p_u(self) -> np.ndarray:
        return np.array([e.sum() for e in self.eta])


@dataclass(frozen=True)
class Reconstruction:
    p_u: np.ndarray
    J: tuple[np.ndarray, ...]
    kernel_y_given_u: np.ndarray  # |Y| x |U|
    kernel_u_given_y: np.ndarray  # |U| x |Y|
    omegas: tuple[tuple[int, ...], ...]


@dataclass
class ApproxResult:
    """Outcome of one of the linear programs.

    Information quantities are in ``base`` units; ``error_bound`` is in nats
    and ``upper_bounds`` are converted to ``base``.
    """

    criterion: str
    eps: float
    base: str
    lp_value: float
    exact_h_y_given_u: float
    utility_lb: float
    approx_utility: float
    mechanism: Reconstruction
    combination: tuple[tuple[int, ...], ...]
    error_bound: ErrorBound
    eps2: float | None = None
    upper_bounds: dict[str, float] = field(default_factory=dict)
    leakage: np.ndarray | None = None
    heuristic: bool = False
    flags: dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        m = self.mechanism
        return {
            "criterion": self.criterion,
            "eps": self.eps,
            "base": self.base,
            "lp_value": self.lp_value,
            "exact_H(Y|U)": self.exact_h_y_given_u,
            "utility_lb": self.utility_lb,
            "approx_utility": self.approx_utility,
            "eps2": self.eps2,
            "regime": self.error_bound.regime,
            "error_bound_nats": None if math.isinf(self.error_bound.bound) else self.error_bound.bound,
            "upper_bounds": self.upper_bounds,
            "combination": [list(o) for o in self.combination],
            "p_u": m.p_u.tolist(),
            "J": [j.tolist() for j in m.J],
            "P_Y|U": m.kernel_y_given_u.tolist(),
            "leakage": None if self.leakage is None else self.leakage.tolist(),
            "heuristic": self.heuristic,
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# LP assembly


@dataclass(frozen=True)
class _Block:
    omega: tuple[int, ...]
    cost: np.ndarray  # per-coordinate linear cost, nats
    G: np.ndarray
    pinned: np.ndarray  # coordinates forced to zero


def _block(j: JointDist, info: OmegaInfo) -> _Block:
    zero = info.t <= POS_TOL
    cost = np.where(zero, 0.0, -np.log(np.where(zero, 1.0, info.t)))
    G = j.p_x_given_y[:, list(info.omega)] - j.px[:, None]
    return _Block(info.omega, cost, G, zero)


def _solve_blocks(j: JointDist, blocks: list[_Block], budget: float, criterion: str):
    """Solve the LP for a fixed list of blocks.

    Variables per block: ``eta`` (size ``|Omega|``) then ``s`` (size ``|X|``)
    with ``s >= |G eta|``.  Returns ``(value, etas)`` or ``None`` if infeasible.
    """
    nx, ny = j.shape
    k = len(blocks)
    sizes = [len(b.omega) for b in blocks]
    offs = np.cumsum([0] + [n + nx for n in sizes])
    nvar = int(offs[-1])
    c = np.zeros(nvar)
    bounds = []
    a_eq = np.zeros((ny, nvar))
    a_ub, b_ub = [], []
    for bi, b in enumerate(blocks):
        o, n = int(offs[bi]), sizes[bi]
        c[o : o + n] = b.cost
        bounds += [(0.0, 0.0) if p else (0.0, None) for p in b.pinned]
        bounds += [(0.0, None)] * nx
        for i, y in enumerate(b.omega):
            a_eq[y, o + i] = 1.0
        s = slice(o + n, o + n + nx)
        for r in range(nx):
            for sign in (1.0, -1.0):
                row = np.zeros(nvar)
                row[o : o + n] = sign * b.G[r]
                row[o + n + r] = -1.0
                a_ub.append(row)
                b_ub.append(0.0)
        row = np.zeros(nvar)
        row[s] = 1.0
        if criterion == "wl":
            b_ub.append(budget)
        else:
            row[o : o + n] = -budget
            b_ub.append(0.0)
        a_ub.append(row)
    res = linprog(
        c,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=a_eq,
        b_eq=j.py,
        bounds=bounds,
        method="highs",
        options=_HIGHS,
    )
    if res.status != 0:
        return None
    x = res.x
    etas = tuple(np.clip(x[int(offs[i]) : int(offs[i]) + sizes[i]], 0.0, None) for i in range(k))
    return float(res.fun), etas


def reconstruct(
    assignment: EtaAssignment, ctx_or_joint, eps: float, criterion: str
) -> Reconstruction:
    """Mechanism ``(P_U, {J_u}, P_{Y|U})`` from a solved assignment.

    Blocks with zero mass are dropped.  ``J_u`` is recovered as
    ``(P_{X|U=u} - P_X) / scale`` and set to zero when ``eps = 0``.
    """
    j = ctx_or_joint.joint if isinstance(ctx_or_joint, GeometryContext) else ctx_or_joint
    nx, ny = j.shape
    p = j.p_x_given_y
    p_u, Js, cols, omegas = [], [], [], []
    for omega, eta in zip(assignment.omegas, assignment.eta):
        mass = float(eta.sum())
        if mass <= 1e-15:
            continue
        v = np.zeros(ny)
        v[list(omega)] = eta / mass
        p_u.append(mass)
        cols.append(v)
        omegas.append(omega)
        if eps == 0:
            Js.append(np.zeros(nx))
        else:
            scale = eps / mass if criterion == "wl" else eps
            Js.append((p @ v - j.px) / scale)
    p_u = np.array(p_u)
    p_u = p_u / p_u.sum()
    v = np.array(cols).T  # |Y| x |U|
    k_uy = (p_u[:, None] * v.T) / j.py[None, :]
    k_uy = np.clip(k_uy, 0.0, None)
    k_uy = k_uy / k_uy.sum(axis=0, keepdims=True)
    # re-derive P_U and P_{Y|U} from the normalized kernel so that all
    # reported quantities refer to one consistent joint
    p_yu = k_uy.T * j.py[:, None]
    p_u = p_yu.sum(axis=0)
    v = p_yu / p_u[None, :]
    mix = v @ p_u
    if np.abs(mix - j.py).max() > 1e-9:
        raise InvariantError("reconstructed mixture does not reproduce P_Y")
    return Reconstruction(p_u, tuple(Js), v, k_uy, tuple(omegas))


def _finish(
    j: JointDist,
    rec: Reconstruction,
    lp_value_nats: float,
    criterion: str,
    eps: float,
    base: LogBase,
    combination,
    err: ErrorBound,
    eps2: float | None,
    heuristic: bool,
) -> ApproxResult:
    mech = Mechanism.from_kernel_uy(j, rec.kernel_u_given_y)
    dec = decompose_utility(mech, "nats")
    h_y = float(entropy_nats(j.py))
    exact_h = h_y - dec.i_yu
    weighted, unweighted = per_letter_leakage(mech.p_xu)
    leak = {"wl": weighted, "l": unweighted}.get(criterion, unweighted)
    if criterion in ("wl", "l") and leak.max(initial=0.0) > eps + 1e-9:
        raise InvariantError(f"reconstruction violates the {criterion} criterion: {leak.max()} > {eps}")
    if criterion == "perfect" and dec.i_xu > 1e-9:
        raise InvariantError(f"perfect-privacy reconstruction leaks I(X;U) = {dec.i_xu}")
    cv = lambda v: float(from_nats(v, base))
    return ApproxResult(
        criterion=criterion,
        eps=eps,
        base=base,
        lp_value=cv(lp_value_nats),
        exact_h_y_given_u=cv(exact_h),
        utility_lb=cv(dec.i_yu),
        approx_utility=cv(h_y - lp_value_nats),
        mechanism=rec,
        combination=tuple(combination),
        error_bound=err,
        eps2=eps2,
        leakage=leak,
        heuristic=heuristic,
    )


# ---------------------------------------------------------------------------
# perfect privacy


def zero_leakage_vertices(j: JointDist) -> tuple[list[OmegaInfo], int]:
    """Vertices of ``{V >= 0 : P_{X|Y} V = P_X}``, one per distinct support."""
    m, _, rank = right_singular_basis(j.p_x_given_y)
    seen, out = set(), []
    for omega, _, t in basic_solutions(m, j.py):
        if t.min() < -POS_TOL:
            continue
        t = np.where(t <= POS_TOL, 0.0, t)
        t = t / t.sum()
        info = OmegaInfo(omega, t, np.zeros((len(omega), j.shape[0])), 0.0)
        if info.support in seen:
            continue
        seen.add(info.support)
        out.append(info)
    return out, rank


def solve_g0(j: JointDist, base: LogBase = "nats") -> ApproxResult:
    """Exact maximum of ``I(U;Y)`` subject to ``X`` independent of ``U`` and ``X - Y - U``.

    Every feasible ``P_{Y|U=u}`` lies in the polytope
    ``{V >= 0 : P_{X|Y} V = P_X}``, and by concavity of entropy only its
    vertices are needed, so the problem is an LP over vertex weights.  When
    ``P_{X|Y}`` has full column rank the polytope is the single point ``P_Y``
    and the value is ``0`` (flagged ``invertible``).
    """
    verts, rank = zero_leakage_vertices(j)
    blocks = [_block(j, v) for v in verts]
    sol = _solve_blocks(j, blocks, 0.0, "l")
    if sol is None:
        raise InvariantError("zero-leakage LP infeasible although P_Y is feasible")
    value, etas = sol
    rec = reconstruct(EtaAssignment(tuple(b.omega for b in blocks), etas), j, 0.0, "perfect")
    res = _finish(j, rec, value, "perfect", 0.0, base, rec.omegas, ErrorBound(0.0, "exact"), None, False)
    res.flags["invertible"] = rank == j.shape[1]
    res.flags["n_vertices"] = len(verts)
    return res


# ---------------------------------------------------------------------------
# per-letter criteria


def _combinations(cands: int, blocks: int):
    return itertools.combinations_with_replacement(range(cands), blocks)


def _n_combinations(cands: int, blocks: int) -> int:
    return math.comb(cands + blocks - 1, blocks)


def _solve_combo(args):
    j, blocks, budget, criterion = args
    return _solve_blocks(j, blocks, budget, criterion)


def _enumerate(j, cand_blocks, n_blocks, budget, criterion, workers):
    combos = list(_combinations(len(cand_blocks), n_blocks))
    jobs = [(j, [cand_blocks[i] for i in combo], budget, criterion) for combo in combos]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(_solve_combo, jobs))
    else:
        results = [_solve_combo(a) for a in jobs]
    best = None
    for combo, r in zip(combos, results):  # fixed order: lexicographic tie-break
        if r is not None and (best is None or r[0] < best[1] - 1e-12):
            best = (combo, r[0], r[1])
    return best


def _greedy(j, cand_blocks, n_blocks, budget, criterion):
    """Restricted search used when full enumeration exceeds the cap.

    Start from the candidates carrying most mass in the one-block-per-candidate
    program, then apply single-block swaps while they lower the cost.
    """
    full = _solve_blocks(j, cand_blocks, budget, criterion)
    order = np.argsort([-e.sum() for e in full[1]], kind="stable") if full else np.arange(len(cand_blocks))
    combo = sorted(int(i) for i in order[:n_blocks])
    while len(combo) < n_blocks:
        combo.append(combo[-1] if combo else 0)
    combo = tuple(sorted(combo))
    r = _solve_blocks(j, [cand_blocks[i] for i in combo], budget, criterion)
    best = (combo, r[0], r[1]) if r else None
    improved = True
    while improved:
        improved = False
        for pos in range(n_blocks):
            for c in range(len(cand_blocks)):
                trial = tuple(sorted(combo[:pos] + (c,) + combo[pos + 1 :]))
                r = _solve_blocks(j, [cand_blocks[i] for i in trial], budget, criterion)
                if r is not None and (best is None or r[0] < best[1] - 1e-12):
                    best, combo, improved = (trial, r[0], r[1]), trial, True
    return best


def _solve_per_letter(
    j: JointDist,
    eps: float,
    criterion: str,
    base: LogBase,
    ctx: GeometryContext | None,
    cap: int,
    workers: int | None,
    force: bool,
) -> ApproxResult:
    if eps < 0:
        raise DomainError("eps must be non-negative")
    ctx = build_context(j) if ctx is None else ctx
    if eps >= ctx.eps2 and not force:
        raise DomainError(f"eps = {eps} is not below the validity threshold eps2 = {ctx.eps2:.6g}")
    cands = list(ctx.candidates())
    cand_blocks = [_block(j, c) for c in cands]
    n_blocks = ctx.ny
    budget = max(eps - BUDGET_MARGIN, 0.0) if eps > 0 else 0.0
    heuristic = _n_combinations(len(cands), n_blocks) > cap
    if heuristic:
        best = _greedy(j, cand_blocks, n_blocks, budget, criterion)
    else:
        best = _enumerate(j, cand_blocks, n_blocks, budget, criterion, workers)
    if best is None:
        raise InvariantError("no feasible combination although the zero-perturbation point is feasible")
    combo, value, etas = best
    omegas = tuple(cands[i].omega for i in combo)
    rec = reconstruct(EtaAssignment(omegas, etas), ctx, eps, criterion)
    err = error_bounds(ctx, eps)
    res = _finish(j, rec, value, criterion, eps, base, omegas, err, ctx.eps2, heuristic)
    res.flags["n_candidates"] = len(cands)
    res.flags["boundary_candidates"] = len(cands) - len(ctx.omega1)
    return res


def solve_g_wl(
    j: JointDist,
    eps: float,
    base: LogBase = "nats",
    ctx: GeometryContext | None = None,
    cap: int = COMBINATION_CAP,
    workers: int | None = None,
    force: bool = False,
) -> ApproxResult:
    """Lower bound under ``d(P_{X,U}(., u), P_X P_U(u)) <= eps`` for all ``u``.

    Enumerates multisets of ``|Y|`` candidate index sets, solves one LP per
    multiset and keeps the smallest linearized ``H(Y|U)``.  ``utility_lb`` is
    the exact ``I(U;Y)`` of the reconstructed kernel.
    """
    return _solve_per_letter(j, eps, "wl", base, ctx, cap, workers, force)


def solve_g_l(
    j: JointDist,
    eps: float,
    base: LogBase = "nats",
    ctx: GeometryContext | None = None,
    cap: int = COMBINATION_CAP,
    workers: int | None = None,
    force: bool = False,
) -> ApproxResult:
    """Lower bound under ``d(P_{X|U}(.|u), P_X) <= eps`` for all ``u``.

    Also reports the upper bounds ``approx + 3/4`` (``eps < eps2 / 2``) and
    ``approx + 1/(2(2 sqrt|X| - 1)^2) + 1/(4|X|)`` (``eps < eps2 / (2 sqrt|X|)``)
    where ``approx = H(Y) - lp_value``; the additive constants are in nats.
    """
    res = _solve_per_letter(j, eps, "l", base, ctx, cap, workers, force)
    nx = j.shape[0]
    cv = lambda v: float(from_nats(v, base))
    if res.eps2 is not None and eps < res.eps2 / 2:
        res.upper_bounds["U1_gl"] = res.approx_utility + cv(0.75)
    if res.eps2 is not None and eps < res.eps2 / (2 * math.sqrt(nx)):
        res.upper_bounds["U2_gl"] = res.approx_utility + cv(fine_error_constant(nx))
    return res


def solve_g_l_pooled(j: JointDist, eps: float, base: LogBase = "nats", ctx: GeometryContext | None = None) -> float:
    """Linearized optimum with one block per candidate (no cardinality limit).

    Under the unweighted criterion the feasible set of each block is a cone,
    so this single program lower-bounds every enumerated combination and
    matches the enumeration whenever there are at most ``|Y|`` candidates.
    Returns ``H(Y) - value`` in ``base`` units.
    """
    ctx = build_context(j) if ctx is None else ctx
    blocks = [_block(j, c) for c in ctx.candidates()]
    budget = max(eps - BUDGET_MARGIN, 0.0) if eps > 0 else 0.0
    value, _ = _solve_blocks(j, blocks, budget, "l")
    return float(from_nats(entropy_nats(j.py) - value, base))
