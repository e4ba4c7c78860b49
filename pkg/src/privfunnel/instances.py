"""Named instance families and instance-file input/output.

Instance files are JSON or CSV.  A JSON file holds one of

* ``"joint"``: the ``|X| x |Y|`` joint matrix,
* ``"p_x"`` and ``"channel"``: input law and row-stochastic ``P_{Y|X}``,
* ``"p_y"`` and ``"leakage"``: output law and column-stochastic ``P_{X|Y}``,
* ``"tensor"``: a ``|X1| x |X2| x |Y|`` joint for prioritized data,

plus optional ``name``, ``base``, ``x_labels`` and ``y_labels``.  A CSV file
holds the joint matrix with a header row of ``Y`` labels and one row per
``X`` symbol whose first cell is the label.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import PrioritizedJoint
from .probcore import NORM_TOL, JointDist, ValidationError


def bsc(theta: float, p0: float = 0.5) -> JointDist:
    """Binary symmetric channel with crossover ``theta`` and ``P_X = (p0, 1 - p0)``."""
    if not 0 <= theta <= 1:
        raise ValidationError(f"theta must lie in [0, 1], got {theta}")
    w = [[1 - theta, theta], [theta, 1 - theta]]
    return JointDist.from_channel([p0, 1 - p0], w, x_labels=("0", "1"), y_labels=("0", "1"))


def erasure(theta: float, p0: float = 0.5) -> JointDist:
    """Binary erasure channel with erasure probability ``theta``."""
    if not 0 < theta < 1:
        raise ValidationError(f"theta must lie in (0, 1), got {theta}")
    w = [[1 - theta, theta, 0.0], [0.0, theta, 1 - theta]]
    return JointDist.from_channel([p0, 1 - p0], w, x_labels=("0", "1"), y_labels=("0", "e", "1"))


def matrix1() -> JointDist:
    return JointDist([[0.693, 0.027, 0.108, 0.072], [0.006, 0.085, 0.004, 0.005]])


def matrix2() -> JointDist:
    return JointDist([[0.350, 0.025, 0.085, 0.040], [0.025, 0.425, 0.035, 0.015]])


def g0_example() -> JointDist:
    """Four-symbol ``Y`` with ``P_Y = (1/2, 1/4, 1/8, 1/8)``."""
    return JointDist.from_backward(
        [0.5, 0.25, 0.125, 0.125], [[0.3, 0.8, 0.5, 0.4], [0.7, 0.2, 0.5, 0.6]]
    )


FAMILIES = {"bsc": bsc, "erasure": erasure}


@dataclass(frozen=True)
class Instance:
    joint: JointDist | None
    prioritized: PrioritizedJoint | None = None
    name: str = ""
    base: str = "bits"


def _check_stochastic(m: np.ndarray, axis: int, what: str, labels) -> None:
    sums = m.sum(axis=axis)
    for i, s in enumerate(sums):
        if abs(s - 1.0) > NORM_TOL:
            kind = "row" if axis == 1 else "column"
            name = labels[i] if labels else ("x" if axis == 1 else "y") + str(i)
            raise ValidationError(f"{what} {kind} {i} ({name}) sums to {float(s)!r}, expected 1")
    if np.any(m < 0):
        i, k = np.argwhere(m < 0)[0]
        raise ValidationError(f"{what} has a negative entry at ({i}, {k})")


def _vec(d: dict, key: str) -> np.ndarray:
    v = np.asarray(d[key], dtype=float)
    if v.ndim != 1:
        raise ValidationError(f"{key} must be a list of numbers")
    if abs(v.sum() - 1) > NORM_TOL or np.any(v < 0):
        raise ValidationError(f"{key} is not a probability vector (sum {v.sum()!r})")
    return v


def instance_from_dict(d: dict) -> Instance:
    name = str(d.get("name", ""))
    base = str(d.get("base", "bits"))
    xl = tuple(d.get("x_labels", ()))
    yl = tuple(d.get("y_labels", ()))
    try:
        if "tensor" in d:
            return Instance(None, PrioritizedJoint(np.asarray(d["tensor"], dtype=float)), name, base)
        if "joint" in d:
            m = np.asarray(d["joint"], dtype=float)
            if m.ndim != 2:
                raise ValidationError("joint must be a 2-D list")
            j = JointDist(m, xl, yl)
        elif "channel" in d:
            w = np.asarray(d["channel"], dtype=float)
            _check_stochastic(w, 1, "channel", xl)
            j = JointDist.from_channel(_vec(d, "p_x"), w, x_labels=xl, y_labels=yl)
        elif "leakage" in d:
            w = np.asarray(d["leakage"], dtype=float)
            _check_stochastic(w, 0, "leakage", yl)
            j = JointDist.from_backward(_vec(d, "p_y"), w, x_labels=xl, y_labels=yl)
        else:
            raise ValidationError("instance needs one of 'joint', 'channel', 'leakage' or 'tensor'")
    except (TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"malformed instance: {e}") from e
    return Instance(j, None, name, base)


def instance_to_dict(inst: Instance) -> dict:
    d: dict = {"name": inst.name, "base": inst.base}
    if inst.prioritized is not None:
        d["tensor"] = inst.prioritized.tensor.tolist()
    else:
        j = inst.joint
        d["x_labels"] = list(j.x_labels)
        d["y_labels"] = list(j.y_labels)
        d["joint"] = j.matrix.tolist()
    return d


def load_instance(path: str | Path) -> Instance:
    """Read a JSON or CSV instance file.

    Raises
    ------
    ValidationError
        With a row or column diagnostic when the content is not a valid law.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        rows = [r for r in csv.reader(text.splitlines()) if r]
        if len(rows) < 2:
            raise ValidationError("CSV instance needs a header and at least one row")
        y_labels = rows[0][1:]
        x_labels, data = [], []
        for i, r in enumerate(rows[1:]):
            if len(r) != len(y_labels) + 1:
                raise ValidationError(f"CSV row {i} ({r[0]}) has {len(r) - 1} values, expected {len(y_labels)}")
            x_labels.append(r[0])
            try:
                data.append([float(v) for v in r[1:]])
            except ValueError as e:
                raise ValidationError(f"CSV row {i} ({r[0]}): {e}") from e
        return Instance(JointDist(np.array(data), tuple(x_labels), tuple(y_labels)), name=path.stem)
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON ({e})") from e
    return instance_from_dict(d)


def save_instance(inst: Instance, path: str | Path) -> None:
    """Write an instance; floats use shortest round-trip repr, so reloading is exact."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        j = inst.joint
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", *j.y_labels])
            for lab, row in zip(j.x_labels, j.matrix):
                w.writerow([lab, *(repr(float(v)) for v in row)])
        return
    path.write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n")
