#!/usr/bin/env python3
"""Generate the frozen statistics fixtures (tests/fixtures/stat_fixtures.json).

Twenty fixed-seed sample pairs (n = 50 each), five per decision-tree
branch, with scipy's results recorded as the independent reference.  The
sample families are constructed so every gate of the tree is decided with
a wide margin (normality p >= 0.15 or <= 0.02, Levene p >= 0.15 or
<= 1e-3, shape-gate KS p >= 0.15 or <= 1e-3), which keeps the expected
method letters stable across correct implementations.

Run from the repo root:  python3 tools/gen_stat_fixtures.py
Regeneration is deterministic; the JSON is checked in and the test suite
never imports scipy's test functions directly.
"""

import json
import math
import pathlib

import numpy as np
from scipy import stats as ss

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" \
    / "stat_fixtures.json"

N = 50


def ks_centered(a, b):
    """The tree's shape gate: KS on median-centered samples."""
    return ss.ks_2samp(a - np.median(a), b - np.median(b),
                       method="asymp").pvalue


def classify(a, b):
    """The decision tree, evaluated with scipy (reference side)."""
    normal = (ss.shapiro(a).pvalue >= 0.05 and ss.shapiro(b).pvalue >= 0.05)
    if normal:
        if ss.levene(a, b, center="mean").pvalue >= 0.05:
            return "a"
        return "b"
    if ks_centered(a, b) >= 0.05:
        return "c"
    return "d"


def margins_ok(a, b, want):
    sw_a, sw_b = ss.shapiro(a).pvalue, ss.shapiro(b).pvalue
    lev = ss.levene(a, b, center="mean").pvalue
    ks = ks_centered(a, b)
    if want in ("a", "b"):
        if min(sw_a, sw_b) < 0.15:
            return False
        return lev >= 0.15 if want == "a" else lev <= 1e-3
    # rank branch: at least one side decisively non-normal
    if min(sw_a, sw_b) > 0.02:
        return False
    return ks >= 0.15 if want == "c" else ks <= 1e-3


def family(rng, letter):
    """One candidate pair from the letter's sample family."""
    if letter == "a":
        return (rng.normal(100.0, 8.0, N), rng.normal(104.0, 8.0, N))
    if letter == "b":
        return (rng.normal(100.0, 2.0, N), rng.normal(102.0, 14.0, N))
    if letter == "c":  # same right-skewed shape, shifted location
        base = rng.lognormal(2.0, 0.6, N)
        return (base, rng.lognormal(2.0, 0.6, N) + 4.0)
    # "d": opposite skews -> clearly different shapes
    return (rng.exponential(5.0, N) + 50.0, 80.0 - rng.exponential(5.0, N))


def oracle(a, b):
    sw_a = ss.shapiro(a)
    sw_b = ss.shapiro(b)
    lev = ss.levene(a, b, center="mean")
    stu = ss.ttest_ind(a, b)
    wel = ss.ttest_ind(a, b, equal_var=False)
    wmw = ss.mannwhitneyu(a, b, method="asymptotic")
    mood = ss.median_test(a, b, ties="below")
    return {
        "shapiro_a": [float(sw_a.statistic), float(sw_a.pvalue)],
        "shapiro_b": [float(sw_b.statistic), float(sw_b.pvalue)],
        "levene_p": float(lev.pvalue),
        "student_p": float(stu.pvalue),
        "welch_p": float(wel.pvalue),
        "wmw_p": float(wmw.pvalue),
        "mood_p": float(mood[1]),
    }


def main():
    pairs = []
    for letter in "abcd":
        made = 0
        seed = 0
        while made < 5:
            seed += 1
            rng = np.random.default_rng(ord(letter) * 100_000 + seed)
            a, b = family(rng, letter)
            if not margins_ok(a, b, letter):
                continue
            if classify(a, b) != letter:
                continue
            pairs.append({
                "name": f"{letter}{made + 1}",
                "expected_method": letter,
                "a": [float(v) for v in a],
                "b": [float(v) for v in b],
                "oracle": oracle(a, b),
            })
            made += 1
    assert len(pairs) == 20
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"n": N, "pairs": pairs}, indent=1))
    print(f"wrote {OUT} ({len(pairs)} pairs)")


if __name__ == "__main__":
    main()
