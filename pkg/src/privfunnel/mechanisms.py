"""Functional-representation mechanisms and the utility decomposition.

A mechanism here is always materialized as a joint array ``P[x, y, u]`` so
that every reported quantity is an exact evaluation of that array.  For the
sampled constructions the array is the empirical law over the drawn race
realizations, which makes ``U`` exactly independent of ``X`` by design and
leaves only the Monte-Carlo error of the draws themselves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .probcore import (
    JointDist,
    LogBase,
    ProbVec,
    ValidationError,
    binary_entropy,
    entropy_nats,
    entropy_suite,
    from_nats,
    per_letter_leakage,
    to_nats,
)

DUMMY = "⊥"
MERGE_TOL = 1e-12


class DomainError(ValueError):
    """The requested parameters lie outside the operation's domain."""


# ---------------------------------------------------------------------------
# exact information measures of a three-way array


def _h(p, axes) -> float:
    """Entropy (nats) of the marginal of ``p`` over the kept ``axes``."""
    drop = tuple(a for a in range(p.ndim) if a not in axes)
    return float(entropy_nats(p.sum(axis=drop) if drop else p))


@dataclass(frozen=True)
class UtilityDecomposition:
    i_yu: float
    i_xu: float
    h_y_given_x: float
    h_y_given_xu: float
    i_xu_given_y: float
    base: str = "nats"

    @property
    def residual(self) -> float:
        """``I(Y;U)`` minus the right-hand side of the decomposition."""
        rhs = self.i_xu + self.h_y_given_x - self.h_y_given_xu - self.i_xu_given_y
        return self.i_yu - rhs


@dataclass(frozen=True)
class Mechanism:
    """A disclosed variable ``U`` given as the joint array ``P[x, y, u]``.

    Parameters
    ----------
    p_xyu : ndarray, shape (|X|, |Y|, |U|)
    u_labels : tuple of str
    provenance : str
        How the mechanism was built (``"kernel"``, ``"sfrl"``, ...).
    diagnostics : dict
        Construction-specific extras such as the truncation mass of a sampler.
    """

    p_xyu: np.ndarray
    u_labels: tuple[str, ...] = ()
    provenance: str = "kernel"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.array(self.p_xyu, dtype=float)
        if p.ndim != 3:
            raise ValidationError("mechanism joint must be a 3-D array over (X, Y, U)")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError("mechanism joint is not a probability array")
        p.setflags(write=False)
        object.__setattr__(self, "p_xyu", p)
        if not self.u_labels:
            object.__setattr__(self, "u_labels", tuple(f"u{i}" for i in range(p.shape[2])))

    @classmethod
    def from_kernel_uy(cls, j: JointDist, kernel_uy) -> "Mechanism":
        """Mechanism obeying ``X - Y - U`` from a column-stochastic ``P_{U|Y}``."""
        k = np.asarray(kernel_uy, dtype=float)
        if k.shape[1] != j.shape[1]:
            raise ValidationError(f"kernel has {k.shape[1]} columns, expected |Y| = {j.shape[1]}")
        return cls(j.matrix[:, :, None] * k.T[None, :, :])

    @classmethod
    def from_kernel_uxy(cls, j: JointDist, kernel) -> "Mechanism":
        """Mechanism with access to both ``X`` and ``Y``; ``kernel[u, x, y] = P(u | x, y)``."""
        k = np.asarray(kernel, dtype=float)
        return cls(j.matrix[:, :, None] * np.moveaxis(k, 0, -1))

    @property
    def joint_xy(self) -> np.ndarray:
        return self.p_xyu.sum(axis=2)

    @property
    def p_u(self) -> np.ndarray:
        return self.p_xyu.sum(axis=(0, 1))

    @property
    def p_xu(self) -> np.ndarray:
        return self.p_xyu.sum(axis=1)

    @property
    def kernel_y_given_u(self) -> np.ndarray:
        p_yu = self.p_xyu.sum(axis=0)
        pu = p_yu.sum(axis=0)
        out = np.zeros_like(p_yu)
        pos = pu > 0
        out[:, pos] = p_yu[:, pos] / pu[pos]
        return out

    def leakages(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-atom weighted and unweighted l1 leakage about ``X``."""
        return per_letter_leakage(self.p_xu)

    def summary(self, base: LogBase = "nats") -> dict:
        dec = decompose_utility(self, base)
        w, u = self.leakages()
        return {
            "I(Y;U)": dec.i_yu,
            "I(X;U)": dec.i_xu,
            "I(X;U|Y)": dec.i_xu_given_y,
            "H(Y|X,U)": dec.h_y_given_xu,
            "max_weighted_l1": float(w.max()),
            "max_unweighted_l1": float(u.max()),
            "card_U": int(np.count_nonzero(self.p_u > 0)),
            "base": base,
            **self.diagnostics,
        }


def decompose_utility(m: Mechanism, base: LogBase = "nats") -> UtilityDecomposition:
    """Evaluate every term of ``I(Y;U) = I(X;U) + H(Y|X) - H(Y|U,X) - I(X;U|Y)``."""
    p = m.p_xyu
    hx, hy, hu = _h(p, (0,)), _h(p, (1,)), _h(p, (2,))
    hxy, hxu, hyu = _h(p, (0, 1)), _h(p, (0, 2)), _h(p, (1, 2))
    hxyu = _h(p, (0, 1, 2))
    terms = dict(
        i_yu=hy + hu - hyu,
        i_xu=hx + hu - hxu,
        h_y_given_x=hxy - hx,
        h_y_given_xu=hxyu - hxu,
        i_xu_given_y=hxy + hyu - hy - hxyu,
    )
    return UtilityDecomposition(**{k: float(from_nats(v, base)) for k, v in terms.items()}, base=base)


# ---------------------------------------------------------------------------
# FRL / EFRL


@dataclass(frozen=True)
class FunctionalRep:
    """``U`` together with a map ``f`` such that ``Y = f(U, X)``.

    Attributes
    ----------
    p_u_given_x : ndarray, shape (|U|, |X|)
        Law of the disclosed atom given each private symbol.  For the plain
        construction all columns coincide (``U`` independent of ``X``).
    f : ndarray of int, shape (|U|, |X|)
        Index of the ``Y`` symbol produced by atom ``u`` under input ``x``.
    """

    source: JointDist
    p_u_given_x: np.ndarray
    f: np.ndarray
    atoms: tuple[str, ...]
    provenance: str
    eps: float = 0.0
    alpha: float = 0.0
    base: str = "nats"

    @property
    def p_u(self) -> np.ndarray:
        return self.p_u_given_x @ self.source.px

    @property
    def cardinality(self) -> int:
        return len(self.atoms)

    def joint(self) -> np.ndarray:
        """``P[x, y, u]`` induced by the representation."""
        nx, ny = self.source.shape
        p = np.zeros((nx, ny, self.cardinality))
        for x in range(nx):
            np.add.at(p[x], (self.f[:, x], np.arange(self.cardinality)), self.source.px[x] * self.p_u_given_x[:, x])
        return p

    def mechanism(self) -> Mechanism:
        return Mechanism(self.joint(), self.atoms, self.provenance)

    def to_json(self) -> str:
        return json.dumps(
            {
                "provenance": self.provenance,
                "eps": self.eps,
                "alpha": self.alpha,
                "base": self.base,
                "x_labels": list(self.source.x_labels),
                "y_labels": list(self.source.y_labels),
                "atoms": list(self.atoms),
                "p_u": self.p_u.tolist(),
                "p_u_given_x": self.p_u_given_x.tolist(),
                "f": [[self.source.y_labels[y] for y in row] for row in self.f],
            },
            ensure_ascii=False,
            indent=2,
        )


def _refinement(j: JointDist) -> tuple[np.ndarray, np.ndarray]:
    """Interval lengths and output table of the common refinement.

    Each row ``P_{Y|X}(.|x)`` cuts ``[0, 1)`` into consecutive half-open
    intervals in column order.  The union of all cut points, with points
    closer than ``MERGE_TOL`` merged, defines the atoms of ``U``.
    """
    w = j.p_y_given_x
    cuts = np.cumsum(w, axis=1)[:, :-1]
    pts = np.sort(np.concatenate([[0.0, 1.0], cuts.ravel()]))
    merged = [pts[0]]
    for p in pts[1:]:
        if p - merged[-1] > MERGE_TOL:
            merged.append(p)
    merged[-1] = 1.0
    edges = np.asarray(merged)
    lengths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    # f(u, x) is the interval of the x-partition containing the midpoint of atom u
    f = np.stack([np.searchsorted(cuts[x], mids, side="right") for x in range(w.shape[0])], axis=1)
    return lengths, f


def frl(j: JointDist) -> FunctionalRep:
    """``U`` independent of ``X`` with ``Y`` a function of ``(U, X)``.

    The atoms are the cells of the common refinement of the per-``x``
    cumulative partitions, so ``|U| <= |X|(|Y| - 1) + 1``.
    """
    lengths, f = _refinement(j)
    nx = j.shape[0]
    p = np.repeat(lengths[:, None], nx, axis=1)
    atoms = tuple(f"u{i}" for i in range(lengths.size))
    return FunctionalRep(j, p, f, atoms, "frl")


def _randomized_response(base_rep: FunctionalRep, j: JointDist, eps: float, base: LogBase, tag: str) -> FunctionalRep:
    h_x = entropy_suite(j, base).h_x
    if h_x <= 0:
        raise DomainError("H(X) = 0, so the mixing weight eps / H(X) is undefined")
    alpha = eps / h_x
    nx = j.shape[0]
    cols, f_rows, atoms = [], [], []
    w_symbols = list(range(nx)) + [None]
    for ui, name in enumerate(base_rep.atoms):
        for w in w_symbols:
            if w is None:
                col = (1.0 - alpha) * base_rep.p_u_given_x[ui]
                wl = DUMMY
            else:
                col = np.zeros(nx)
                col[w] = alpha * base_rep.p_u_given_x[ui, w]
                wl = j.x_labels[w]
            if not np.any(col > 0):
                continue
            cols.append(col)
            f_rows.append(base_rep.f[ui])
            atoms.append(f"({name},{wl})")
    return FunctionalRep(j, np.array(cols), np.array(f_rows), tuple(atoms), tag, eps, alpha, base)


def efrl(j: JointDist, eps: float, base: LogBase = "nats") -> FunctionalRep:
    """Extended representation leaking exactly ``eps`` about ``X``.

    ``U = (U_frl, W)`` where ``W = X`` with probability ``eps / H(X)`` and the
    dummy symbol otherwise; then ``I(U;X) = eps`` and ``H(Y|U,X) = 0``.

    Raises
    ------
    DomainError
        If ``eps`` is negative, ``eps >= I(X;Y)``, or ``H(X) = 0``.
    """
    s = entropy_suite(j, base)
    if eps < 0:
        raise DomainError("eps must be non-negative")
    if eps >= s.i_xy:
        raise DomainError(f"eps = {eps} must be below I(X;Y) = {s.i_xy}")
    return _randomized_response(frl(j), j, eps, base, "efrl")


@dataclass(frozen=True)
class CapCheck:
    holds: bool
    h_u: float
    cap: float
    margin: float


def entropy_cap_check(rep: FunctionalRep, eps: float | None = None) -> CapCheck:
    """Check ``H(U) <= sum_x H(Y|X=x) + eps + h(alpha)`` for an extended representation."""
    eps = rep.eps if eps is None else eps
    base = rep.base
    h_u = float(from_nats(entropy_nats(rep.p_u), base))
    each = entropy_suite(rep.source, base).h_y_given_x_each
    cap = float(each.sum() + eps + binary_entropy(rep.alpha, base))
    margin = cap - h_u
    return CapCheck(margin >= -1e-9, h_u, cap, margin)


# ---------------------------------------------------------------------------
# SFRL / ESFRL via the Poisson functional representation


def sfrl_constant(i_xy: float, base: LogBase = "nats", tight: bool = False) -> float:
    """Excess-information constant ``log(I + 1) + 4`` in the session base.

    With ``tight=True`` the sharper ``e^-1 log e + 2 + log(I + e^-1 log e + 2)``
    is returned instead.
    """
    log = lambda v: float(from_nats(np.log(v), base))
    if tight:
        c = float(from_nats(1.0, base)) / np.e + 2.0
        return c + log(i_xy + c)
    return log(i_xy + 1.0) + 4.0


@dataclass(frozen=True)
class RaceOutcome:
    """Per-draw outputs ``Y(x, z_i)`` of the Poisson race.

    Attributes
    ----------
    y : ndarray of int, shape (n_draws, |X|)
    certified : ndarray of bool, shape (n_draws, |X|)
        Whether the argmin was proven to lie within the generated prefix.
    """

    y: np.ndarray
    certified: np.ndarray
    entries_used: int


def poisson_race(j: JointDist, n_draws: int, max_index: int, rng: np.random.Generator, chunk: int = 16) -> RaceOutcome:
    """Run ``n_draws`` independent races shared across all ``x``.

    Each race draws arrival times ``T_k`` (cumulative unit exponentials) and
    candidates ``Ybar_k ~ P_Y``; for input ``x`` the selected index minimises
    ``T_k / w(Ybar_k | x)`` with ``w = P_{Y|X} / P_Y``.  Since later arrivals
    exceed ``T_N``, the argmin over the first ``N`` entries is final once it
    is at most ``T_N / max_y w(y | x)``.  Prefixes are doubled until every
    draw is certified or ``max_index`` is reached.
    """
    py = j.py
    w = j.p_y_given_x / py[None, :]
    wmax = w.max(axis=1)
    nx, ny = j.shape
    best = np.full((n_draws, nx), np.inf)
    best_y = np.zeros((n_draws, nx), dtype=np.int64)
    t_last = np.zeros(n_draws)
    certified = np.zeros((n_draws, nx), dtype=bool)
    active = np.arange(n_draws)
    used = 0
    size = min(chunk, max_index)
    while active.size and used < max_index:
        size = min(size, max_index - used)
        gaps = rng.exponential(size=(active.size, size))
        ybar = rng.choice(ny, p=py, size=(active.size, size))
        t = t_last[active, None] + np.cumsum(gaps, axis=1)
        for x in range(nx):
            wx = w[x, ybar]
            with np.errstate(divide="ignore"):
                ratio = np.where(wx > 0, t / np.where(wx > 0, wx, 1.0), np.inf)
            k = ratio.argmin(axis=1)
            r = ratio[np.arange(active.size), k]
            better = r < best[active, x]
            rows = active[better]
            best[rows, x] = r[better]
            best_y[rows, x] = ybar[better, k[better]]
        t_last[active] = t[:, -1]
        used += size
        certified[active] = best[active] <= (t_last[active, None] / wmax[None, :])
        active = active[~certified[active].all(axis=1)]
        size *= 2
    return RaceOutcome(best_y, certified, used)


def _pattern_mechanism(j: JointDist, y: np.ndarray, weights_per_x: np.ndarray | None = None):
    """Collapse draws with identical output patterns into single atoms.

    Atoms sharing the map ``x -> Y(x, z)`` induce the same conditional law of
    ``(X, Y)``, so merging them leaves every information measure unchanged.
    """
    patterns, counts = np.unique(y, axis=0, return_counts=True)
    mass = counts / y.shape[0]
    nx, ny = j.shape
    p = np.zeros((nx, ny, patterns.shape[0]))
    for x in range(nx):
        p[x, patterns[:, x], np.arange(patterns.shape[0])] = j.px[x] * mass
    labels = tuple("z[" + ",".join(j.y_labels[v] for v in row) + "]" for row in patterns)
    return p, labels, patterns, mass


def _mix_w(p: np.ndarray, labels, alpha: float, x_labels) -> tuple[np.ndarray, tuple[str, ...]]:
    """Attach ``W`` (``X`` w.p. ``alpha``, dummy otherwise) analytically."""
    if alpha == 0:
        return p, labels
    nx = p.shape[0]
    blocks = [(1 - alpha) * p]
    new_labels = [f"({l},{DUMMY})" for l in labels]
    for x in range(nx):
        blk = np.zeros_like(p)
        blk[x] = alpha * p[x]
        blocks.append(blk)
        new_labels += [f"({l},{x_labels[x]})" for l in labels]
    return np.concatenate(blocks, axis=2), tuple(new_labels)


def sfrl_sample(j: JointDist, n_draws: int = 100_000, max_index: int = 10_000, seed: int | None = None) -> Mechanism:
    """Empirical strong functional representation from ``n_draws`` races.

    The returned mechanism has ``U`` uniform over the drawn race
    realizations (merged by output pattern), so ``U`` is exactly independent
    of ``X`` and ``Y`` is a function of ``(U, X)``.  Draws whose argmin could
    not be certified within ``max_index`` entries use the best prefix value;
    their total ``P_X``-weighted share is reported as ``truncation_mass``.
    """
    if seed is None:
        raise ValueError("sampling requires an explicit seed")
    if n_draws < 1 or max_index < 1:
        raise ValueError("n_draws and max_index must be positive")
    rng = np.random.default_rng(seed)
    race = poisson_race(j, n_draws, max_index, rng)
    p, labels, _, _ = _pattern_mechanism(j, race.y)
    trunc = float(((~race.certified) * j.px[None, :]).sum() / n_draws)
    diag = {
        "n_draws": n_draws,
        "max_index": max_index,
        "seed": seed,
        "entries_used": race.entries_used,
        "truncation_mass": trunc,
        "truncation_warning": trunc > 1e-3,
    }
    return Mechanism(p, labels, "sfrl", diag)


def esfrl_sample(
    j: JointDist,
    eps: float,
    n_draws: int = 100_000,
    max_index: int = 10_000,
    seed: int | None = None,
    base: LogBase = "nats",
) -> Mechanism:
    """Empirical extended strong representation leaking ``eps`` about ``X``.

    ``U = (Z, W)`` with ``Z`` from :func:`sfrl_sample`.  The randomized
    response ``W`` is mixed in exactly rather than sampled, hence
    ``I(X;U) = alpha H(X) = eps`` holds without Monte-Carlo error.
    """
    s = entropy_suite(j, base)
    if eps < 0 or eps >= s.i_xy:
        raise DomainError(f"eps = {eps} must lie in [0, I(X;Y) = {s.i_xy})")
    if s.h_x <= 0:
        raise DomainError("H(X) = 0, so the mixing weight eps / H(X) is undefined")
    m = sfrl_sample(j, n_draws, max_index, seed)
    alpha = eps / s.h_x
    p, labels = _mix_w(m.p_xyu, m.u_labels, alpha, j.x_labels)
    diag = dict(m.diagnostics, eps=eps, alpha=alpha, base=base)
    return Mechanism(p, labels, "esfrl", diag)


def esfrl_bound(j: JointDist, eps: float, base: LogBase = "nats", tight: bool = False) -> float:
    """Right-hand side ``alpha H(X|Y) + (1 - alpha) c`` for the conditional leakage."""
    s = entropy_suite(j, base)
    alpha = eps / s.h_x
    return alpha * s.h_x_given_y + (1 - alpha) * sfrl_constant(s.i_xy, base, tight)
