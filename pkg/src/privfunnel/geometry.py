"""Null-space geometry of the leakage matrix ``P_{X|Y}``.

For a disclosed symbol ``u`` the conditional ``P_{Y|U=u}`` must satisfy
``P_{X|Y} P_{Y|U=u} = P_{X|U=u}``.  Writing ``M`` for the first ``|X|`` right
singular vectors of ``P_{X|Y}`` (so that ``Null(M) = Null(P_{X|Y})``), the
basic solutions of this system are indexed by ``|X|``-subsets ``Omega`` of the
``Y`` alphabet.  At zero perturbation the basic solution on ``Omega`` has
non-zero part ``t_Omega = M_Omega^-1 M P_Y``; a perturbation ``J`` of
``P_{X|U=u}`` moves it by ``scale * H_Omega J``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mechanisms import DomainError
from .probcore import JointDist, entropy_nats

RANK_TOL = 1e-10
POS_TOL = 1e-9


class InfeasibleError(ValueError):
    """A requested construction would leave the probability simplex."""


@dataclass(frozen=True)
class OmegaInfo:
    """Cached quantities of one basic index set.

    Attributes
    ----------
    omega : tuple of int
        Sorted ``Y`` indices.
    t : ndarray
        ``M_Omega^-1 M P_Y``; sums to one.
    H : ndarray
        ``M_Omega^-1 M(1:|X|) P_{X|Y_1}^-1``, the map from a perturbation of
        ``P_{X|U=u}`` to the induced change in ``P_{Y|U=u}`` on ``Omega``.
    sigma_max : float
        Largest singular value of ``H``.
    """

    omega: tuple[int, ...]
    t: np.ndarray
    H: np.ndarray
    sigma_max: float

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(o) for o, v in zip(self.omega, self.t) if v > POS_TOL)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.t > POS_TOL))

    def scatter(self, v: np.ndarray, ny: int) -> np.ndarray:
        out = np.zeros(ny)
        out[list(self.omega)] = v
        return out


@dataclass(frozen=True)
class GeometryContext:
    joint: JointDist
    M: np.ndarray
    omega1: tuple[OmegaInfo, ...]
    boundary: tuple[OmegaInfo, ...]
    eps2: float
    leading_block: tuple[int, ...]
    singular_values: np.ndarray = field(repr=False)

    @property
    def nx(self) -> int:
        return self.joint.shape[0]

    @property
    def ny(self) -> int:
        return self.joint.shape[1]

    @property
    def fine_boundary(self) -> float:
        return self.eps2 / (2 * math.sqrt(self.nx))

    @property
    def coarse_boundary(self) -> float:
        return self.eps2 / 2

    def find(self, omega) -> OmegaInfo:
        omega = tuple(sorted(int(o) for o in omega))
        for info in self.omega1 + self.boundary:
            if info.omega == omega:
                return info
        raise InfeasibleError(f"{omega} is not a feasible basic index set")

    def candidates(self) -> tuple[OmegaInfo, ...]:
        """Strictly positive sets followed by boundary sets, one per distinct support."""
        seen = {info.support for info in self.omega1}
        extra = []
        for info in self.boundary:
            if info.support not in seen:
                seen.add(info.support)
                extra.append(info)
        return self.omega1 + tuple(extra)

    def to_json(self) -> str:
        dump = lambda infos: [
            {"omega": list(i.omega), "t": i.t.tolist(), "sigma_max": i.sigma_max} for i in infos
        ]
        return json.dumps(
            {
                "M": self.M.tolist(),
                "omega1": dump(self.omega1),
                "boundary": dump(self.boundary),
                "eps2": self.eps2,
                "coarse_boundary": self.coarse_boundary,
                "fine_boundary": self.fine_boundary,
                "leading_block": list(self.leading_block),
            },
            indent=2,
        )


def right_singular_basis(p_x_given_y: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Row basis of the row space of ``P_{X|Y}`` and its numerical rank."""
    _, sv, vt = np.linalg.svd(p_x_given_y)
    rank = int(np.sum(sv > RANK_TOL * sv[0]))
    return vt[:rank], sv, rank


def basic_solutions(m: np.ndarray, p_y: np.ndarray) -> list[tuple[tuple[int, ...], np.ndarray, np.ndarray]]:
    """All ``(Omega, M_Omega^-1, t_Omega)`` with ``M_Omega`` invertible."""
    r, ny = m.shape
    target = m @ p_y
    out = []
    for omega in itertools.combinations(range(ny), r):
        m_om = m[:, omega]
        sv = np.linalg.svd(m_om, compute_uv=False)
        if sv[-1] <= RANK_TOL * max(sv[0], 1.0):
            continue
        inv = np.linalg.inv(m_om)
        out.append((omega, inv, inv @ target))
    return out


def build_context(j: JointDist) -> GeometryContext:
    """SVD, basic index sets and the validity threshold ``eps2``.

    Raises
    ------
    DomainError
        If ``|X| >= |Y|`` or ``P_{X|Y}`` is not of full row rank.
    """
    nx, ny = j.shape
    if nx >= ny:
        raise DomainError(f"need |X| < |Y|, got {nx} x {ny}")
    p = j.p_x_given_y
    m, sv, rank = right_singular_basis(p)
    if rank < nx:
        raise DomainError(f"leakage matrix is rank deficient; smallest singular value {sv[-1]:.3e}")
    # P_{X|Y_1}: lexicographically first invertible block of columns
    lead = None
    for cols in itertools.combinations(range(ny), nx):
        s = np.linalg.svd(p[:, cols], compute_uv=False)
        if s[-1] > RANK_TOL * s[0]:
            lead = cols
            break
    lead_map = m[:, lead] @ np.linalg.inv(p[:, lead])
    strict, boundary = [], []
    for omega, inv, t in basic_solutions(m, j.py):
        if t.min() < -POS_TOL:
            continue
        H = inv @ lead_map
        info = OmegaInfo(omega, t, H, float(np.linalg.svd(H, compute_uv=False)[0]))
        (strict if info.strictly_positive else boundary).append(info)
    if not strict:
        raise DomainError("no strictly positive basic solution; threshold undefined")
    eps2 = min(float(i.t.min()) for i in strict) / max(i.sigma_max for i in strict)
    return GeometryContext(j, m, tuple(strict), tuple(boundary), eps2, lead, sv)


def null_space_property(ctx: GeometryContext, beta) -> bool:
    """Whether ``beta`` lies in ``Null(P_{X|Y})``.

    Also confirms that this is equivalent to ``M beta = 0`` and that null
    vectors sum to zero.
    """
    beta = np.asarray(beta, dtype=float)
    scale = max(1.0, float(np.abs(beta).max(initial=0.0)))
    in_p = bool(np.allclose(ctx.joint.p_x_given_y @ beta, 0.0, atol=1e-10 * scale))
    in_m = bool(np.allclose(ctx.M @ beta, 0.0, atol=1e-10 * scale))
    if in_p != in_m:
        raise AssertionError("Null(P_{X|Y}) and Null(M) disagree")
    if in_p and abs(beta.sum()) > 1e-9 * scale:
        raise AssertionError("null vector does not sum to zero")
    return in_p


@dataclass(frozen=True)
class ExtremePoint:
    omega: tuple[int, ...]
    values: np.ndarray
    J: np.ndarray
    weight: float
    eps: float


def perturbation_scale(eps: float, weight: float, criterion: str) -> float:
    if criterion == "wl":
        return eps / weight
    if criterion == "l":
        return eps
    raise ValueError(f"unknown criterion {criterion!r}; expected 'wl' or 'l'")


def extreme_point(ctx: GeometryContext, omega, J, weight: float, eps: float, criterion: str = "wl") -> ExtremePoint:
    """Basic solution on ``omega`` for the perturbed conditional ``P_{X|U=u}``.

    The weighted criterion perturbs ``P_{X|U=u} = P_X + (eps / weight) J``,
    the unweighted one ``P_{X|U=u} = P_X + eps J``.

    Raises
    ------
    InfeasibleError
        If the resulting vector has a negative entry.
    """
    info = ctx.find(omega)
    J = np.asarray(J, dtype=float)
    if abs(J.sum()) > 1e-9 or np.abs(J).sum() > 1 + 1e-9:
        raise ValueError("J must sum to zero and have l1 norm at most one")
    if weight <= 0:
        raise ValueError("weight must be positive")
    v = info.t + perturbation_scale(eps, weight, criterion) * (info.H @ J)
    if v.min() < -1e-12:
        raise InfeasibleError(f"entry {int(v.argmin())} of the extreme point is {v.min():.3e} < 0")
    return ExtremePoint(info.omega, info.scatter(v, ctx.ny), J, weight, eps)


@dataclass(frozen=True)
class LinearizationCoeffs:
    l: np.ndarray
    b: float
    a: np.ndarray


def linearize(ctx: GeometryContext, omega) -> LinearizationCoeffs:
    """First-order expansion ``H(V) ~ -(b + scale * a J)`` around ``t_Omega``."""
    info = ctx.find(omega)
    if not info.strictly_positive:
        raise InfeasibleError(f"{info.omega} has a zero coordinate; log undefined")
    l = np.log(info.t)
    return LinearizationCoeffs(l, float(l @ info.t), l @ info.H)


def linearized_entropy(ctx: GeometryContext, omega, J, scale: float) -> float:
    c = linearize(ctx, omega)
    return -(c.b + scale * float(c.a @ np.asarray(J, dtype=float)))


def exact_entropy(v) -> float:
    return float(entropy_nats(v))


@dataclass(frozen=True)
class ErrorBound:
    bound: float
    regime: str  # "fine", "coarse" or "none"


def fine_error_constant(nx: int) -> float:
    return 1 / (2 * (2 * math.sqrt(nx) - 1) ** 2) + 1 / (4 * nx)


def error_bounds(ctx_or_eps2, eps: float, nx: int | None = None) -> ErrorBound:
    """Bound (in nats) on ``|exact H(Y|U) - linearized H(Y|U)|``.

    Parameters
    ----------
    ctx_or_eps2 : GeometryContext or float
    eps : float
    nx : int, optional
        ``|X|``; taken from the context when omitted.

    Notes
    -----
    Boundaries are strict: ``eps = eps2 / 2`` is outside the coarse regime.
    """
    if isinstance(ctx_or_eps2, GeometryContext):
        eps2 = ctx_or_eps2.eps2
        nx = ctx_or_eps2.nx if nx is None else nx
    else:
        eps2 = float(ctx_or_eps2)
    if nx is None:
        raise ValueError("nx is required when passing eps2 directly")
    if eps < eps2 / (2 * math.sqrt(nx)):
        return ErrorBound(fine_error_constant(nx), "fine")
    if eps < eps2 / 2:
        return ErrorBound(0.75, "coarse")
    return ErrorBound(math.inf, "none")
