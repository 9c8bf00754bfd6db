#!/usr/bin/env python3
"""Regenerates tests/data/stats_reference.json.

Each record holds one paired-difference vector plus reference p-values from
scipy (1.15): two-sided Wilcoxon signed-rank (zero_method='pratt',
correction=False, method pinned to the same exact/approx rule the library
uses) and the TOST equivalence p at margin 0.5 (max of the two one-sided
paired t-tests). Committed so the C++ side can be checked against an
independent implementation without a scipy dependency at test time.
"""
import json
import pathlib

import numpy as np
from scipy import stats

MARGIN = 0.5


def uses_exact(d):
    if len(d) > 25:
        return False
    if np.any(d == 0.0):
        return False
    return len(np.unique(np.abs(d))) == len(d)


def tost_p(d):
    p_lower = stats.ttest_1samp(d, -MARGIN, alternative="greater").pvalue
    p_upper = stats.ttest_1samp(d, MARGIN, alternative="less").pvalue
    return float(max(p_lower, p_upper))


def main():
    rng = np.random.default_rng(20260823)
    records = []

    # Continuous vectors on the exact path: n <= 25, no ties or zeros.
    exact_ns = [5, 6, 8, 10, 12, 14, 15, 16, 18, 20, 22, 24, 25]
    shifts = [0.0, 0.1, -0.2, 0.3, 0.45, -0.5, 0.8, -1.0, 1.5, 0.05]
    i = 0
    while sum(r["exact"] for r in records) < 40:
        n = exact_ns[i % len(exact_ns)]
        shift = shifts[i % len(shifts)]
        scale = 0.3 + 1.7 * rng.random()
        d = rng.normal(shift, scale, n)
        i += 1
        if not uses_exact(d):
            continue
        p_w = stats.wilcoxon(d, zero_method="pratt", correction=False,
                             alternative="two-sided", method="exact").pvalue
        records.append({"diffs": d.tolist(), "exact": True,
                        "p_wilcoxon": float(p_w), "p_tost": tost_p(d)})

    # Approximation path: zeros, tied magnitudes, or n > 25.
    approx_specs = [
        ("zeros", 12, 3), ("zeros", 20, 5), ("zeros", 25, 2), ("zeros", 16, 8),
        ("ties", 15, 0), ("ties", 22, 0), ("ties", 10, 0),
        ("large", 30, 0), ("large", 40, 0), ("large", 50, 0),
    ]
    for kind, n, n_zero in approx_specs:
        while True:
            d = rng.normal(0.2, 1.0, n)
            if kind == "zeros":
                idx = rng.choice(n, size=n_zero, replace=False)
                d[idx] = 0.0
            elif kind == "ties":
                d = np.round(d * 4) / 4  # quarter grid forces tied |d|
                if np.any(d == 0.0) or len(np.unique(np.abs(d))) == len(d):
                    continue
            if not uses_exact(d):
                break
        p_w = stats.wilcoxon(d, zero_method="pratt", correction=False,
                             alternative="two-sided", method="asymptotic").pvalue
        records.append({"diffs": d.tolist(), "exact": False,
                        "p_wilcoxon": float(p_w), "p_tost": tost_p(d)})

    out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "stats_reference.json"
    out.write_text(json.dumps({"margin": MARGIN, "vectors": records}, indent=1))
    n_exact = sum(r["exact"] for r in records)
    print(f"wrote {len(records)} vectors ({n_exact} exact, "
          f"{len(records) - n_exact} approx) to {out}")


if __name__ == "__main__":
    main()
