"""Run the brute-force oracle on the reference instances and store the values.

The resulting JSON is read by the test suite, so library results are
compared against numbers produced independently of the LP and bound code.

    python scripts/freeze_oracle_fixtures.py [--out tests/fixtures/oracle.json]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import time
from pathlib import Path

import numpy as np

from privfunnel.instances import bsc, g0_example, matrix1
from privfunnel.oracle import GridSpec, brute_force_g, brute_force_h
from privfunnel.probcore import JointDist


def tiny_2x3() -> JointDist:
    return JointDist.from_backward([0.25, 0.25, 0.5], [[0.2, 0.8, 0.5], [0.8, 0.2, 0.5]])


def skewed_2x2() -> JointDist:
    return JointDist.from_channel([0.4, 0.6], [[0.9, 0.1], [0.2, 0.8]])


CASES = [
    # name, instance factory, search, criterion, eps, resolution, max_card
    ("g0_example", g0_example, "g", "perfect", 0.0, 0.05, 3),
    ("tiny_2x3", tiny_2x3, "g", "perfect", 0.0, 0.05, 3),
    ("tiny_2x3", tiny_2x3, "g", "l", 0.05, 0.05, 3),
    ("matrix1", matrix1, "g", "wl", 0.005, 0.02, 2),
    ("matrix1", matrix1, "g", "l", 0.005, 0.02, 2),
    ("bsc_0.2", lambda: bsc(0.2), "h", "mi", 0.0, 0.05, 3),
    ("bsc_0.2", lambda: bsc(0.2), "h", "mi", 0.05, 0.05, 3),
    ("skewed_2x2", skewed_2x2, "h", "mi", 0.05, 0.05, 3),
]


def digest(j: JointDist) -> str:
    return hashlib.sha256(np.ascontiguousarray(j.matrix).tobytes()).hexdigest()[:16]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "oracle.json"))
    args = ap.parse_args()
    records = []
    for name, make, search, crit, eps, res, card in CASES:
        j = make()
        grid = GridSpec(res, card)
        t0 = time.perf_counter()
        if search == "h":
            r = brute_force_h(j, eps, grid)
        else:
            r = brute_force_g(j, eps, crit, grid)
        dt = time.perf_counter() - t0
        print(f"{name:12s} {search} {crit:8s} eps={eps:<6} grid={res} |U|<={card}: {r.value:.12f} nats ({dt:.1f}s)")
        records.append(
            {
                "name": name,
                "instance": j.matrix.tolist(),
                "hash": digest(j),
                "search": search,
                "criterion": crit,
                "eps": eps,
                "grid": {"resolution": res, "max_card": card},
                "value": r.value,
                "base": "nats",
            }
        )
    Path(args.out).write_text(json.dumps(records, indent=2) + "\n")


if __name__ == "__main__":
    main()
