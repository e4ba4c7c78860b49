"""Exhaustive grid search over disclosure kernels on tiny alphabets.

The search space is every kernel whose columns are points of the simplex
grid with step ``resolution``.  Feasibility is checked exactly (up to
floating-point round-off) and only the objective is quantized, so the
returned value is a lower bound on the true supremum.

Columns are split into an outer set, iterated in Python, and the last two
columns, whose joint contributions are precomputed once and evaluated as
one numpy batch per outer point.  The objective is only evaluated on the
feasible part of each batch.  Relabelling ``U`` leaves every quantity
unchanged, so the first column is restricted to non-increasing entries.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .mechanisms import Mechanism, decompose_utility
from .probcore import JointDist, LogBase, entropy_nats, from_nats

FEAS_TOL = 1e-12
DEFAULT_MAX_EVALS = 2 * 10**9


class RefusedError(RuntimeError):
    """The requested search is too large to run."""


@dataclass(frozen=True)
class GridSpec:
    resolution: float = 0.02
    max_card: int = 2

    def __post_init__(self):
        if not 0 < self.resolution <= 0.5:
            raise ValueError("resolution must lie in (0, 0.5]")
        n = 1 / self.resolution
        if abs(n - round(n)) > 1e-9:
            raise ValueError("1 / resolution must be an integer")
        if self.max_card < 1:
            raise ValueError("max_card must be positive")

    @property
    def steps(self) -> int:
        return int(round(1 / self.resolution))


def simplex_grid(k: int, steps: int) -> np.ndarray:
    """All points of the ``(k-1)``-simplex with coordinates in ``{0, 1/steps, ...}``.

    Points are produced by stars and bars, in lexicographic order of the bar
    positions.
    """
    if k == 1:
        return np.ones((1, 1))
    out = []
    for bars in itertools.combinations(range(steps + k - 1), k - 1):
        edges = (-1,) + bars + (steps + k - 1,)
        out.append([edges[i + 1] - edges[i] - 1 for i in range(k)])
    return np.array(out, dtype=float) / steps


def slack(ny: int, resolution: float, base: LogBase = "nats") -> float:
    """Quantization allowance ``|Y| log|Y| * resolution``.

    Moving each column of a kernel by at most ``resolution`` per coordinate
    changes the utility by at most this amount (entropy Lipschitz constant on
    the simplex interior); returned in ``base`` units.
    """
    return float(from_nats(ny * math.log(ny) * resolution, base)) if ny > 1 else 0.0


@dataclass
class OracleResult:
    value: float
    kernel: np.ndarray | None
    criterion: str
    eps: float
    grid: GridSpec
    evaluated: int
    base: str

    @property
    def feasible(self) -> bool:
        return self.kernel is not None


def _ent(p: np.ndarray, axes) -> np.ndarray:
    return -xlogy(p, p).sum(axis=axes)


class _Search:
    """Kernel search over ``C`` columns for linear maps ``A_X`` and ``A_Y``.

    ``P_XU = A_X K^T`` and ``P_YU = A_Y K^T`` where ``K`` is ``|U| x C``.
    """

    def __init__(self, a_x, a_y, p_x, p_y, n_u, steps, criterion, eps):
        self.a_x, self.a_y = np.asarray(a_x), np.asarray(a_y)
        self.p_x, self.p_y = p_x, p_y
        self.n_u = n_u
        self.C = self.a_x.shape[1]
        self.pts = simplex_grid(n_u, steps)
        self.sorted_mask = np.all(np.diff(self.pts, axis=1) <= 0, axis=1)
        self.criterion = criterion
        self.eps = eps
        self.h_x = float(entropy_nats(p_x))
        self.h_y = float(entropy_nats(p_y))

    def cost(self) -> int:
        p = len(self.pts)
        return int(self.sorted_mask.sum()) * p ** (self.C - 1)

    def _split_rows(self, a: np.ndarray, n_outer: int):
        """Rows touching only outer columns, only inner columns, or both."""
        out_nz = np.any(a[:, :n_outer] != 0, axis=1)
        in_nz = np.any(a[:, n_outer:] != 0, axis=1)
        return ~in_nz, ~out_nz & in_nz, out_nz & in_nz

    def _feasible(self, pxu, pu, h_u, hxu_fixed):
        c, e = self.criterion, self.eps
        if c == "mi":
            h_xu = hxu_fixed + (_ent(pxu, (1, 2)) if pxu.shape[1] else 0.0)
            return self.h_x + h_u - h_xu <= e + FEAS_TOL
        dev = np.abs(pxu - self.p_x[None, :, None] * pu[:, None, :])
        if c == "perfect":
            return dev.max(axis=(1, 2)) <= FEAS_TOL
        if c == "wl":
            return dev.sum(axis=1).max(axis=1) <= e + FEAS_TOL
        if c == "l":
            with np.errstate(divide="ignore", invalid="ignore"):
                per = np.where(pu > 0, dev.sum(axis=1) / pu, 0.0)
            return per.max(axis=1) <= e + FEAS_TOL
        raise ValueError(f"unknown criterion {c!r}")

    def run(self):
        P = self.pts
        n_in = min(2, self.C)
        n_out = self.C - n_in
        idx = np.array(list(itertools.product(range(len(P)), repeat=n_in)))
        if n_out == 0:
            idx = idx[self.sorted_mask[idx[:, 0]]]
        kin = P[idx]  # (Ni, n_in, |U|)
        xin = np.einsum("xc,ncu->nxu", self.a_x[:, n_out:], kin)
        yin = np.einsum("yc,ncu->nyu", self.a_y[:, n_out:], kin)
        pu_in = xin.sum(axis=1)
        # for the mutual-information criterion, rows of P_XU fed by one side
        # only contribute a fixed entropy that is computed once
        x_out, x_in, x_mix = self._split_rows(self.a_x, n_out)
        y_out, y_in, y_mix = self._split_rows(self.a_y, n_out)
        mi = self.criterion == "mi"
        hx_in = _ent(xin[:, x_in], (1, 2)) if mi else None
        hy_in = _ent(yin[:, y_in], (1, 2))
        best_val, best_k, evaluated = -np.inf, None, 0
        first = np.flatnonzero(self.sorted_mask)
        rest = [range(len(P))] * max(n_out - 1, 0)
        outer_iter = itertools.product(first, *rest) if n_out > 0 else [()]
        for o in outer_iter:
            ko = P[list(o)] if n_out else np.zeros((0, self.n_u))
            xo = self.a_x[:, :n_out] @ ko
            yo = self.a_y[:, :n_out] @ ko
            pu = xo.sum(axis=0)[None, :] + pu_in
            h_u = _ent(pu, 1)
            if mi:
                fixed = float(_ent(xo[x_out], None)) + hx_in
                ok = self._feasible(xo[x_mix][None] + xin[:, x_mix], pu, h_u, fixed)
            else:
                ok = self._feasible(xo[None] + xin, pu, h_u, None)
            evaluated += len(pu)
            sel = np.flatnonzero(ok)
            if sel.size == 0:
                continue
            h_yu = float(_ent(yo[y_out], None)) + hy_in[sel] + _ent(yo[y_mix][None] + yin[sel][:, y_mix], (1, 2))
            obj = self.h_y + h_u[sel] - h_yu
            i = int(np.argmax(obj))
            if obj[i] > best_val + 1e-15:
                best_val = float(obj[i])
                best_k = np.concatenate([ko, kin[sel[i]]], axis=0).T
        return best_val, best_k, evaluated


def _check_cost(search: _Search, max_evals: int):
    cost = search.cost()
    if cost > max_evals:
        raise RefusedError(f"search needs about {cost:.3e} kernel evaluations (limit {max_evals:.1e})")


def brute_force_g(
    j: JointDist,
    eps: float,
    criterion: str = "perfect",
    grid: GridSpec = GridSpec(),
    base: LogBase = "nats",
    max_evals: int = DEFAULT_MAX_EVALS,
) -> OracleResult:
    """Best ``I(U;Y)`` over grid kernels ``P_{U|Y}`` meeting the criterion.

    Parameters
    ----------
    criterion : {"mi", "wl", "l", "perfect"}
        ``eps`` is in ``base`` units for ``"mi"`` and an l1 distance for the
        per-letter criteria; it is ignored for ``"perfect"``.

    Raises
    ------
    RefusedError
        When the grid has more than ``max_evals`` kernels.
    """
    n_u = min(grid.max_card, j.shape[1]) if criterion != "mi" else grid.max_card
    eps_n = float(eps) * (math.log(2) if (criterion == "mi" and base == "bits") else 1.0)
    s = _Search(j.matrix, np.diag(j.py), j.px, j.py, n_u, grid.steps, criterion, eps_n)
    _check_cost(s, max_evals)
    val, k, n = s.run()
    value = float(from_nats(val, base)) if k is not None else -math.inf
    return OracleResult(value, k, criterion, eps, grid, n, base)


def brute_force_h(
    j: JointDist,
    eps: float,
    grid: GridSpec = GridSpec(0.05, 3),
    base: LogBase = "nats",
    max_evals: int = DEFAULT_MAX_EVALS,
) -> OracleResult:
    """Best ``I(U;Y)`` over grid kernels ``P_{U|X,Y}`` with ``I(U;X) <= eps``.

    The returned kernel has shape ``(|U|, |X|, |Y|)``.
    """
    nx, ny = j.shape
    cols = [(x, y) for x in range(nx) for y in range(ny)]
    a_x = np.zeros((nx, len(cols)))
    a_y = np.zeros((ny, len(cols)))
    for c, (x, y) in enumerate(cols):
        a_x[x, c] = j.matrix[x, y]
        a_y[y, c] = j.matrix[x, y]
    eps_n = float(eps) * (math.log(2) if base == "bits" else 1.0)
    s = _Search(a_x, a_y, j.px, j.py, grid.max_card, grid.steps, "mi", eps_n)
    _check_cost(s, max_evals)
    val, k, n = s.run()
    if k is not None:
        k = k.reshape(grid.max_card, nx, ny)
    value = float(from_nats(val, base)) if k is not None else -math.inf
    return OracleResult(value, k, "mi", eps, grid, n, base)


@dataclass(frozen=True)
class AuditReport:
    h_y_given_xu: float
    i_xu: float
    i_yu: float
    h_x_given_y_zero: bool
    tight_value: float | None
    matches_tight: bool | None


def optimizer_audits(
    j: JointDist, eps: float, kernel: np.ndarray, base: LogBase = "nats", tol: float = 0.0
) -> AuditReport:
    """Structural checks on a (grid) optimizer of the ``(X, Y)``-access problem.

    Reports ``H(Y|X,U)``, which vanishes at a true optimizer, and, when
    ``H(X|Y) = 0``, whether the utility reaches ``H(Y|X) + eps`` within ``tol``.
    ``kernel`` is ``(|U|, |X|, |Y|)`` or, for ``Y``-only mechanisms, ``(|U|, |Y|)``.
    """
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim == 2:
        m = Mechanism.from_kernel_uy(j, kernel)
    else:
        m = Mechanism.from_kernel_uxy(j, kernel)
    d = decompose_utility(m, base)
    hxy = float(from_nats(entropy_nats(j.matrix) - entropy_nats(j.py), base))
    zero = hxy <= 1e-9
    tight = d.h_y_given_x + eps if zero else None
    match = (abs(d.i_yu - tight) <= tol) if zero else None
    return AuditReport(d.h_y_given_xu, d.i_xu, d.i_yu, zero, tight, match)
