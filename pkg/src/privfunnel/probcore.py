"""Validated discrete distributions and exact information measures.

All measures are computed with natural logarithms and converted to the
requested base on the way out.  ``0 log 0`` is taken as ``0`` everywhere.
The distance ``d(P, Q)`` is the plain l1 distance (range ``[0, 2]``); no
factor one half is applied anywhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

LogBase = Literal["bits", "nats"]

NORM_TOL = 1e-9

_LN = {"nats": 1.0, "bits": math.log(2.0)}


class ValidationError(ValueError):
    """Raised when an input distribution violates its invariants."""


class SupportError(ValueError):
    """KL divergence is undefined because ``q`` vanishes where ``p`` does not."""


def check_base(base: str) -> str:
    if base not in _LN:
        raise ValueError(f"unknown log base {base!r}; expected 'bits' or 'nats'")
    return base


def from_nats(value, base: LogBase):
    """Convert an information quantity (or array of them) from nats to ``base``."""
    return value / _LN[check_base(base)]


def to_nats(value, base: LogBase):
    return value * _LN[check_base(base)]


def log_base(x, base: LogBase):
    return np.log(x) / _LN[check_base(base)]


def _labels(labels: Sequence[str] | None, n: int, prefix: str) -> tuple[str, ...]:
    if labels is None:
        return tuple(f"{prefix}{i}" for i in range(n))
    labels = tuple(str(s) for s in labels)
    if len(labels) != n:
        raise ValidationError(f"expected {n} labels, got {len(labels)}")
    if len(set(labels)) != n:
        raise ValidationError(f"duplicate labels in {labels}")
    return labels


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class ProbVec:
    mass: np.ndarray
    labels: tuple[str, ...] = ()
    strictly_positive: bool = False

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        if mass.ndim != 1 or mass.size == 0:
            raise ValidationError("probability vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(mass)):
            raise ValidationError("probability vector has non-finite entries")
        bad = np.flatnonzero(mass < 0)
        if bad.size:
            raise ValidationError(f"negative mass at index {int(bad[0])}: {float(mass[bad[0]])!r}")
        total = mass.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise ValidationError(f"masses sum to {float(total)!r}, not 1 (tolerance {NORM_TOL})")
        if self.strictly_positive and np.any(mass <= 0):
            idx = int(np.flatnonzero(mass <= 0)[0])
            raise ValidationError(f"entry {idx} must be strictly positive")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "labels", _labels(self.labels or None, mass.size, "s"))

    def __len__(self) -> int:
        return self.mass.size

    @property
    def min(self) -> float:
        return float(self.mass.min())


@dataclass(frozen=True)
class Kernel:
    """Column-stochastic matrix; column ``j`` is the output law given input ``j``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValidationError("kernel must be a 2-D array")
        if np.any(m < 0):
            i, j = np.argwhere(m < 0)[0]
            raise ValidationError(f"negative kernel entry at ({i}, {j})")
        sums = m.sum(axis=0)
        bad = np.flatnonzero(np.abs(sums - 1.0) > NORM_TOL)
        if bad.size:
            raise ValidationError(f"kernel column {int(bad[0])} sums to {float(sums[bad[0]])!r}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __matmul__(self, other):
        if isinstance(other, Kernel):
            return Kernel(self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)


@dataclass(frozen=True)
class JointDist:
    """Joint law of two finite variables, rows indexed by X, columns by Y."""

    matrix: np.ndarray
    x_labels: tuple[str, ...] = ()
    y_labels: tuple[str, ...] = ()
    strict: bool = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or 0 in m.shape:
            raise ValidationError("joint distribution must be a non-empty 2-D array")
        if not np.all(np.isfinite(m)):
            raise ValidationError("joint distribution has non-finite entries")
        if np.any(m < 0):
            i, j = np.argwhere(m < 0)[0]
            raise ValidationError(f"negative probability at row {i}, column {j}")
        total = m.sum()
        if abs(total - 1.0) > NORM_TOL:
            rows = m.sum(axis=1)
            raise ValidationError(
                f"entries sum to {float(total)!r}, not 1; row sums {np.round(rows, 12).tolist()}"
            )
        if self.strict:
            px, py = m.sum(axis=1), m.sum(axis=0)
            if np.any(px <= 0):
                raise ValidationError(f"row {int(np.flatnonzero(px <= 0)[0])} has zero marginal mass")
            if np.any(py <= 0):
                raise ValidationError(f"column {int(np.flatnonzero(py <= 0)[0])} has zero marginal mass")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "x_labels", _labels(self.x_labels or None, m.shape[0], "x"))
        object.__setattr__(self, "y_labels", _labels(self.y_labels or None, m.shape[1], "y"))

    @classmethod
    def from_channel(cls, p_x, p_y_given_x, **kw) -> "JointDist":
        """Build from an input law and a row-stochastic channel ``W[x, y]``."""
        p_x = np.asarray(p_x, dtype=float)
        w = np.asarray(p_y_given_x, dtype=float)
        return cls(p_x[:, None] * w, **kw)

    @classmethod
    def from_backward(cls, p_y, p_x_given_y, **kw) -> "JointDist":
        """Build from ``P_Y`` and the column-stochastic leakage matrix ``P_{X|Y}``."""
        p_y = np.asarray(p_y, dtype=float)
        return cls(np.asarray(p_x_given_y, dtype=float) * p_y[None, :], **kw)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def px(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def p_x_given_y(self) -> np.ndarray:
        """|X| x |Y| matrix whose columns are ``P_{X|Y}(.|y)``."""
        return self.matrix / self.py[None, :]

    @property
    def p_y_given_x(self) -> np.ndarray:
        """|X| x |Y| matrix whose rows are ``P_{Y|X}(.|x)``."""
        return self.matrix / self.px[:, None]

    def marginal_x(self) -> ProbVec:
        return ProbVec(self.px, self.x_labels, strictly_positive=self.strict)

    def marginal_y(self) -> ProbVec:
        return ProbVec(self.py, self.y_labels, strictly_positive=self.strict)

    def kernel_x_given_y(self) -> Kernel:
        return Kernel(self.p_x_given_y)

    def kernel_y_given_x(self) -> Kernel:
        return Kernel(self.p_y_given_x.T)

    def transpose(self) -> "JointDist":
        return JointDist(self.matrix.T, self.y_labels, self.x_labels, self.strict)


# ---------------------------------------------------------------------------
# measures (nats internally)


def xlogx(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy_nats(p, axis=None) -> float | np.ndarray:
    """Shannon entropy in nats of a probability array (summed over ``axis``)."""
    return -xlogx(p).sum(axis=axis)


def entropy(p, base: LogBase = "nats") -> float:
    return float(from_nats(entropy_nats(p), base))


def mutual_information_nats(joint) -> float:
    """I(A;B) for a 2-D joint array; rows A, columns B."""
    joint = np.asarray(joint, dtype=float)
    return float(
        entropy_nats(joint.sum(axis=1)) + entropy_nats(joint.sum(axis=0)) - entropy_nats(joint)
    )


def binary_entropy(theta: float, base: LogBase = "nats") -> float:
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta!r}")
    return entropy([theta, 1.0 - theta], base)


@dataclass(frozen=True)
class EntropySuite:
    h_x: float
    h_y: float
    h_x_given_y: float
    h_y_given_x: float
    i_xy: float
    h_y_given_x_each: np.ndarray
    base: str = "nats"


def entropy_suite(j: JointDist, base: LogBase = "nats") -> EntropySuite:
    m = j.matrix
    h_xy = entropy_nats(m)
    h_x = entropy_nats(j.px)
    h_y = entropy_nats(j.py)
    h_y_x = h_xy - h_x
    h_x_y = h_xy - h_y
    # same summation order as the post-condition I = H(Y) - H(Y|X)
    i_xy = h_y - h_y_x
    each = entropy_nats(j.p_y_given_x, axis=1)
    # rounding can push exact zeros a hair negative
    clip = lambda v: max(v, 0.0)
    return EntropySuite(
        h_x=float(from_nats(h_x, base)),
        h_y=float(from_nats(h_y, base)),
        h_x_given_y=float(from_nats(clip(h_x_y), base)),
        h_y_given_x=float(from_nats(clip(h_y_x), base)),
        i_xy=float(from_nats(clip(i_xy), base)),
        h_y_given_x_each=from_nats(each, base),
        base=base,
    )


def l1_distance(p, q) -> float:
    return float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


def kl_divergence(p, q, base: LogBase = "nats") -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    sup = p > 0
    if np.any(q[sup] <= 0):
        idx = int(np.flatnonzero(sup & (q <= 0))[0])
        raise SupportError(f"q[{idx}] = 0 while p[{idx}] > 0")
    kl = float(np.sum(p[sup] * np.log(p[sup] / q[sup])))
    return float(from_nats(max(kl, 0.0), base))


@dataclass(frozen=True)
class Divergences:
    kl: float
    d: float


def divergences(p: ProbVec, q: ProbVec, base: LogBase = "nats") -> Divergences:
    if len(p) != len(q):
        raise ValueError("probability vectors differ in length")
    return Divergences(kl=kl_divergence(p.mass, q.mass, base), d=l1_distance(p.mass, q.mass))


@dataclass(frozen=True)
class LeakageReport:
    """Per-letter leakage of U about X.

    ``weighted[u]`` is ``d(P_{X,U}(.,u), P_X P_U(u))`` and ``unweighted[u]`` is
    ``d(P_{X|U}(.|u), P_X)``; atoms with zero mass report 0 for both.
    """

    mi: float
    weighted: np.ndarray
    unweighted: np.ndarray
    base: str = "nats"

    @property
    def max_weighted(self) -> float:
        return float(self.weighted.max(initial=0.0))

    @property
    def max_unweighted(self) -> float:
        return float(self.unweighted.max(initial=0.0))


def per_letter_leakage(p_xu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p_xu = np.asarray(p_xu, dtype=float)
    px = p_xu.sum(axis=1)
    pu = p_xu.sum(axis=0)
    weighted = np.abs(p_xu - px[:, None] * pu[None, :]).sum(axis=0)
    unweighted = np.zeros_like(pu)
    pos = pu > 0
    unweighted[pos] = np.abs(p_xu[:, pos] / pu[pos] - px[:, None]).sum(axis=0)
    return weighted, unweighted


def criterion_leakages(joint_xu: JointDist | np.ndarray, base: LogBase = "nats") -> LeakageReport:
    m = joint_xu.matrix if isinstance(joint_xu, JointDist) else np.asarray(joint_xu, dtype=float)
    weighted, unweighted = per_letter_leakage(m)
    mi = max(mutual_information_nats(m), 0.0)
    return LeakageReport(float(from_nats(mi, base)), weighted, unweighted, base)


def random_joint(rng: np.random.Generator, nx: int, ny: int, floor: float = 0.0) -> JointDist:
    """Dirichlet(1) joint with strictly positive marginals.

    ``floor`` mixes in a little uniform mass so that no marginal gets too small.
    """
    m = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    if floor > 0:
        m = (1 - floor) * m + floor / m.size
    return JointDist(m / m.sum())
