"""Closed-form lower and upper bounds on the utility-leakage trade-off.

Every function takes the leakage budget in the units of its criterion:
mutual-information budgets are in ``base`` units, per-letter budgets are
l1 distances (unitless).  Terms that come from Pinsker-type conversions
(``eps**2 / 2`` and ``eps**2 / min P_X``) are natural-log quantities and are
converted to ``base`` before being added to entropies.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .mechanisms import DomainError, sfrl_constant
from .probcore import JointDist, LogBase, ValidationError, entropy_nats, entropy_suite, from_nats


class InvariantError(RuntimeError):
    """An internal consistency check failed; indicates a bug or bad input."""


@dataclass(frozen=True)
class BoundEntry:
    value: float
    kind: str  # "lower" or "upper"
    valid: bool = True
    validity: str = ""
    source: str = ""


@dataclass
class BoundsReport:
    """Named bound values for one instance and one leakage budget."""

    eps: float
    base: str
    entries: dict[str, BoundEntry] = field(default_factory=dict)
    flags: dict[str, object] = field(default_factory=dict)

    def add(self, name: str, value: float, kind: str, valid: bool = True, validity: str = "", source: str = ""):
        self.entries[name] = BoundEntry(float(value), kind, bool(valid), validity, source)

    def __getitem__(self, name: str) -> float:
        return self.entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def best_lower(self) -> float:
        vals = [e.value for e in self.entries.values() if e.kind == "lower" and e.valid]
        return max(vals) if vals else -math.inf

    def best_upper(self) -> float:
        vals = [e.value for e in self.entries.values() if e.kind == "upper" and e.valid]
        return min(vals) if vals else math.inf

    def check_consistency(self, tol: float = 1e-9) -> None:
        lo, hi = self.best_lower(), self.best_upper()
        if lo > hi + tol:
            raise InvariantError(f"lower bound {lo} exceeds upper bound {hi}")

    def rows(self, x: float | None = None) -> list[dict]:
        """Long-format rows ``(x, series, value, valid)``."""
        x = self.eps if x is None else x
        return [
            {"x": x, "series": name, "value": e.value, "valid": e.valid}
            for name, e in self.entries.items()
        ]

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "base": self.base,
            "entries": {k: asdict(v) for k, v in self.entries.items()},
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["x", "series", "value", "valid"])
        w.writeheader()
        w.writerows(self.rows())
        return buf.getvalue()


def _nats_term(v: float, base: LogBase) -> float:
    return float(from_nats(v, base))


# ---------------------------------------------------------------------------
# mutual-information leakage


def h_bounds_mi(j: JointDist, eps: float, g0: float | None = None, base: LogBase = "nats") -> BoundsReport:
    """Bounds on the optimal utility when ``U`` may see both ``X`` and ``Y``.

    Parameters
    ----------
    j : JointDist
    eps : float
        Leakage budget ``I(U;X) <= eps`` in ``base`` units, ``0 <= eps < I(X;Y)``.
    g0 : float, optional
        Perfect-privacy utility of the instance in ``base`` units (from
        :func:`privfunnel.lpapprox.solve_g0`).  When omitted ``0`` is used,
        which is the value for invertible leakage matrices and always a valid
        lower bound.

    Returns
    -------
    BoundsReport
        ``L1``, ``L2``, ``L3`` (lower), ``upper`` and the mixing weight
        ``alpha = eps / H(X)`` in ``flags``.
    """
    s = entropy_suite(j, base)
    if eps < 0:
        raise DomainError("eps must be non-negative")
    if eps >= s.i_xy:
        raise DomainError(f"eps = {eps} >= I(X;Y) = {s.i_xy}; the optimum is H(Y) = {s.h_y}")
    if s.h_x <= 0:
        raise DomainError("H(X) = 0")
    alpha = eps / s.h_x
    c = sfrl_constant(s.i_xy, base)
    g0_used = 0.0 if g0 is None else float(g0)
    r = BoundsReport(eps, base)
    r.add("L1", s.h_y - s.h_x + eps, "lower", source="efrl")
    r.add("L2", s.h_y_given_x - alpha * s.h_x_given_y + eps - (1 - alpha) * c, "lower", source="esfrl")
    r.add(
        "L3",
        eps * s.h_y / s.i_xy + g0_used * (1 - eps / s.i_xy),
        "lower",
        validity="g0 injected" if g0 is not None else "g0 := 0 fallback",
        source="mixing full disclosure with the perfect-privacy optimizer",
    )
    r.add("upper", s.h_y_given_x + eps, "upper", source="key identity")
    r.flags.update(alpha=alpha, g0=g0_used, g0_supplied=g0 is not None, sfrl_constant=c)
    r.check_consistency()
    return r


@dataclass(frozen=True)
class Positivity:
    necessary: bool
    sufficient: bool
    sufficient_margin: float


def positivity_condition(j: JointDist, eps: float, base: LogBase = "nats") -> Positivity:
    """Conditions for the optimal utility to exceed ``eps``.

    ``necessary`` is ``H(Y|X) > 0``.  ``sufficient`` evaluates
    ``H(Y|X) - alpha H(X|Y) - (1 - alpha) min{H(X|Y), log(I+1) + 4} > 0``.
    """
    s = entropy_suite(j, base)
    if not 0 <= eps < s.i_xy:
        raise DomainError(f"eps = {eps} must lie in [0, I(X;Y) = {s.i_xy})")
    alpha = eps / s.h_x
    c = sfrl_constant(s.i_xy, base)
    margin = s.h_y_given_x - alpha * s.h_x_given_y - (1 - alpha) * min(s.h_x_given_y, c)
    return Positivity(s.h_y_given_x > 1e-12, margin > 1e-12, float(margin))


def integral_term(j: JointDist, base: LogBase = "nats") -> float:
    """``sum_y int_0^1 g_y(t) log g_y(t) dt`` with ``g_y(t) = P_X{P_{Y|X}(y|X) >= t}``.

    ``g_y`` is a non-increasing step function whose jumps sit at the values
    ``P_{Y|X}(y|x)``; on the segment between consecutive sorted thresholds it
    equals the ``P_X`` mass of the inputs whose value reaches the segment's
    right end, so the integral is an exact finite sum.
    """
    px = j.px
    w = j.p_y_given_x
    total = 0.0
    for y in range(w.shape[1]):
        col = w[:, y]
        order = np.argsort(col)[::-1]
        vals = col[order]
        mass = np.cumsum(px[order])
        # segment (vals[k+1], vals[k]] has g = mass[k]
        lower = np.append(vals[1:], 0.0)
        seg = vals - lower
        g = mass
        with np.errstate(divide="ignore", invalid="ignore"):
            glog = np.where(g > 0, g * np.log(np.where(g > 0, g, 1.0)), 0.0)
        total += float(np.sum(seg * glog))
    return float(from_nats(total, base))


def efi_lower(j: JointDist, base: LogBase = "nats") -> float:
    """Lower bound on the excess functional information: ``-integral - I(X;Y)``."""
    return -integral_term(j, base) - entropy_suite(j, base).i_xy


def h0_report(j: JointDist, base: LogBase = "nats") -> BoundsReport:
    """Bounds on the perfect-privacy utility with access to ``(X, Y)``.

    ``U01 = H(Y|X)``; ``U02 = H(Y|X) + integral + I(X;Y)``.  For binary ``Y``
    the second upper bound is the exact value, flagged as ``exact_value``.
    """
    s = entropy_suite(j, base)
    c = sfrl_constant(s.i_xy, base)
    it = integral_term(j, base)
    r = BoundsReport(0.0, base)
    r.add("L01", s.h_y - s.h_x, "lower", source="frl")
    r.add("L02", s.h_y_given_x - c, "lower", source="sfrl")
    r.add("U01", s.h_y_given_x, "upper", source="key identity")
    r.add("U02", s.h_y_given_x + it + s.i_xy, "upper", source="excess functional information")
    r.flags["integral_term"] = it
    r.flags["binary_y_exact"] = j.shape[1] == 2
    if j.shape[1] == 2:
        r.flags["exact_value"] = r["U02"]
    r.check_consistency()
    return r


# ---------------------------------------------------------------------------
# per-letter criteria


def perletter_closed_bounds(j: JointDist, eps: float, base: LogBase = "nats") -> BoundsReport:
    """Closed-form bounds under the per-letter l1 criteria.

    ``eps`` is an l1 distance.  The lower bounds on the optimal utility with
    access to ``(X, Y)`` under the weighted criterion use a mutual-information
    budget of ``eps**2 / 2`` nats and are valid for ``eps < sqrt(2 I(X;Y))``
    (``I`` in nats).  The upper bounds hold for every ``eps >= 0``.
    """
    if eps < 0:
        raise DomainError("eps must be non-negative")
    s = entropy_suite(j, base)
    s_nat = entropy_suite(j, "nats")
    nx, ny = j.shape
    minpx = float(j.px.min())
    leak = _nats_term(eps**2 / 2, base)
    r = BoundsReport(eps, base)
    in_range = eps < math.sqrt(2 * s_nat.i_xy)
    reason = "eps < sqrt(2 I(X;Y))" if in_range else "omitted: eps >= sqrt(2 I(X;Y))"
    if in_range:
        alpha = (eps**2 / 2) / s_nat.h_x
        c = sfrl_constant(s.i_xy, base)
        r.add("L1_hwl", s.h_y_given_x - s.h_x_given_y + leak, "lower", validity=reason, source="efrl")
        r.add(
            "L2_hwl",
            s.h_y_given_x - alpha * s.h_x_given_y + leak - (1 - alpha) * c,
            "lower",
            validity=reason,
            source="esfrl",
        )
        r.flags["alpha"] = alpha
    else:
        r.flags["lower_omitted"] = reason
    r.add("U_gwl", _nats_term(eps * ny * nx / minpx, base) + s.h_y_given_x, "upper", source="per-letter Lipschitz")
    r.add("U_hl", _nats_term(eps**2 / minpx, base) + s.h_y_given_x, "upper", source="reverse Pinsker")
    return r


@dataclass(frozen=True)
class EpsConversion:
    eps_bar: float
    eps_prime: float
    eps_tilde: float


def pinsker_convert(eps: float, min_px: float) -> EpsConversion:
    """Translate budgets between mutual-information and l1 criteria.

    ``eps_bar = sqrt(2 eps)`` is the weighted l1 level implied by an
    ``I(X;U) <= eps`` nat budget, ``eps_prime = eps**2 / min_px`` the nat
    leakage implied by an unweighted l1 level ``eps``, and
    ``eps_tilde = sqrt(eps min_px)`` the unweighted l1 level that guarantees
    an ``eps`` nat budget.
    """
    if eps < 0 or not 0 < min_px <= 1:
        raise DomainError("need eps >= 0 and 0 < min_px <= 1")
    return EpsConversion(math.sqrt(2 * eps), eps**2 / min_px, math.sqrt(eps * min_px))


# ---------------------------------------------------------------------------
# prioritized private data


@dataclass(frozen=True)
class PrioritizedJoint:
    """Joint law of ``(X1, X2, Y)`` as a three-axis array."""

    tensor: np.ndarray

    def __post_init__(self):
        t = np.array(self.tensor, dtype=float)
        if t.ndim != 3:
            raise ValidationError("prioritized joint must be a 3-D array over (X1, X2, Y)")
        if np.any(t < 0) or abs(t.sum() - 1) > 1e-9:
            raise ValidationError("prioritized joint is not a probability array")
        for ax, name in enumerate(("X1", "X2", "Y")):
            marg = t.sum(axis=tuple(a for a in range(3) if a != ax))
            if np.any(marg <= 0):
                raise ValidationError(f"marginal of {name} has a zero entry at {int(np.argmin(marg))}")
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    def flatten(self) -> JointDist:
        """``((X1, X2), Y)`` as an ordinary joint with rows ``x1 * |X2| + x2``."""
        a, b, c = self.tensor.shape
        return JointDist(self.tensor.reshape(a * b, c), strict=False)


def prioritized_bounds(pj: PrioritizedJoint, eps: float, base: LogBase = "nats") -> BoundsReport:
    """Bounds when ``X = (X1, X2)`` and ``X1`` must leak no more than ``X2``."""
    t = pj.tensor
    h = lambda arr: float(from_nats(entropy_nats(arr), base))
    h_x2 = h(t.sum(axis=(0, 2)))
    if h_x2 <= 0:
        raise DomainError("H(X2) = 0")
    if eps < 0:
        raise DomainError("eps must be non-negative")
    h_x = h(t.sum(axis=2))
    h_y = h(t.sum(axis=(0, 1)))
    h_xy = h(t)
    h_x2y = h(t.sum(axis=0))
    h_y_given_x = h_xy - h_x
    h_x_given_y = h_xy - h_y
    h_x2_given_y = h_x2y - h_y
    i_xy = max(h_y - h_y_given_x, 0.0)
    alpha = eps / h_x2
    c = sfrl_constant(i_xy, base)
    r = BoundsReport(eps, base)
    r.add("L1_p", eps + h_y_given_x - h_x_given_y, "lower")
    r.add("L2_p", eps + h_y_given_x - alpha * h_x2_given_y - c, "lower")
    r.add("L3_p", eps + h_y_given_x - alpha * h_x_given_y - (1 - alpha) * c, "lower")
    r.add("U1_p", eps + h_y_given_x, "upper")
    r.flags["alpha"] = alpha
    r.check_consistency()
    return r


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EqualityVerdict:
    h_x_given_y_zero: bool
    conclusion: str
    value: float | None


def equality_detector(j: JointDist, eps: float, base: LogBase = "nats") -> EqualityVerdict:
    """Detect the case ``H(X|Y) = 0`` where both optima equal ``H(Y|X) + eps``."""
    s = entropy_suite(j, base)
    if eps >= s.i_xy:
        raise DomainError(f"eps = {eps} must be below I(X;Y) = {s.i_xy}")
    if s.h_x_given_y <= 1e-9:
        v = s.h_y_given_x + eps
        return EqualityVerdict(True, "g_eps = h_eps = H(Y|X) + eps", v)
    return EqualityVerdict(False, "no claim: H(X|Y) > 0", None)
