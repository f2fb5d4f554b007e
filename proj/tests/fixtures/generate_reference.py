#!/usr/bin/env python3
"""Generate reference fixtures for the statistical test suite.

Run offline with scipy/statsmodels; the frozen JSON output is checked in and
consumed by the C++ unit and acceptance tests. Regenerate only if the fixture
schema changes:

    python3 tests/fixtures/generate_reference.py > tests/fixtures/reference_stats.json
"""
import json
import sys

import numpy as np
from scipy import stats
from statsmodels.stats.oneway import anova_oneway


def dunn_pairwise(groups):
    """Dunn's z-test on rank sums, Bonferroni-adjusted two-sided p-values."""
    pooled = np.concatenate(groups)
    n_total = len(pooled)
    ranks = stats.rankdata(pooled)
    # tie correction: sum over tie groups of (t^3 - t)
    _, counts = np.unique(pooled, return_counts=True)
    tie_sum = float(np.sum(counts.astype(float) ** 3 - counts))
    tie_term = tie_sum / (12.0 * (n_total - 1))
    mean_ranks = []
    start = 0
    for g in groups:
        mean_ranks.append(float(np.mean(ranks[start:start + len(g)])))
        start += len(g)
    k = len(groups)
    m = k * (k - 1) // 2
    out = []
    for i in range(k):
        for j in range(i + 1, k):
            var = (n_total * (n_total + 1) / 12.0 - tie_term) * (
                1.0 / len(groups[i]) + 1.0 / len(groups[j]))
            z = (mean_ranks[i] - mean_ranks[j]) / np.sqrt(var)
            p = 2.0 * stats.norm.sf(abs(z))
            out.append({"i": i, "j": j, "z": float(z),
                        "p": float(min(1.0, p * m))})
    return out


def analyze(groups):
    groups = [np.asarray(g, dtype=float) for g in groups]
    res = {}
    res["shapiro"] = []
    for g in groups:
        w, p = stats.shapiro(g)
        res["shapiro"].append({"w": float(w), "p": float(p)})
    w, p = stats.levene(*groups, center="mean")
    res["levene"] = {"stat": float(w), "p": float(p)}
    f, p = stats.f_oneway(*groups)
    res["anova"] = {"stat": float(f), "p": float(p)}
    welch = anova_oneway(groups, use_var="unequal", welch_correction=True)
    res["welch"] = {"stat": float(welch.statistic), "p": float(welch.pvalue),
                    "df_num": float(welch.df_num), "df_denom": float(welch.df_denom)}
    h, p = stats.kruskal(*groups)
    res["kruskal"] = {"stat": float(h), "p": float(p)}
    tuk = stats.tukey_hsd(*groups)
    k = len(groups)
    pairs = []
    for i in range(k):
        for j in range(i + 1, k):
            pairs.append({"i": i, "j": j,
                          "stat": float(tuk.statistic[i][j]),
                          "p": float(tuk.pvalue[i][j])})
    res["tukey"] = pairs
    res["dunn"] = dunn_pairwise(groups)
    return res


def rnd(x, nd=6):
    return [float(round(v, nd)) for v in x]


def main():
    rng = np.random.default_rng(20250810)

    sample_sets = []
    # 1: three similar normal groups, n=20
    sample_sets.append([rnd(rng.normal(0.8, 0.05, 20)) for _ in range(3)])
    # 2: well separated normals
    sample_sets.append([rnd(rng.normal(m, 0.01, 20)) for m in (0.5, 0.7, 0.9)])
    # 3: unequal variances (1 vs 100)
    sample_sets.append([rnd(rng.normal(0.0, 1.0, 20)), rnd(rng.normal(0.0, 10.0, 20))])
    # 4: two groups, strong shift (n=15), N(0) vs N(+5 sigma)
    sample_sets.append([rnd(rng.normal(0.0, 1.0, 15)), rnd(rng.normal(5.0, 1.0, 15))])
    # 5: uniform (non-normal) groups
    sample_sets.append([rnd(rng.uniform(0, 1, 25)) for _ in range(3)])
    # 6: lognormal skewed groups, unequal n
    sample_sets.append([rnd(rng.lognormal(0.0, 0.5, 12)),
                        rnd(rng.lognormal(0.3, 0.5, 18)),
                        rnd(rng.lognormal(0.1, 0.8, 24))])
    # 7: heavy ties (integer-valued)
    sample_sets.append([[float(v) for v in rng.integers(0, 4, 20)],
                        [float(v) for v in rng.integers(1, 5, 20)],
                        [float(v) for v in rng.integers(0, 5, 20)]])
    # 8: small samples n=5
    sample_sets.append([rnd(rng.normal(10.0, 2.0, 5)) for _ in range(3)])
    # 9: four groups, mild separation, mixed n
    sample_sets.append([rnd(rng.normal(1.0 + 0.2 * i, 0.3, 10 + 3 * i)) for i in range(4)])
    # 10: dice-like bounded values with one degraded flavor
    sample_sets.append([rnd(np.clip(rng.normal(0.92, 0.03, 20), 0, 1)),
                        rnd(np.clip(rng.normal(0.90, 0.08, 20), 0, 1)),
                        rnd(np.clip(rng.normal(0.60, 0.15, 20), 0, 1))])

    fixtures = {"sample_sets": []}
    for idx, groups in enumerate(sample_sets):
        fixtures["sample_sets"].append({
            "id": idx,
            "groups": groups,
            "expected": analyze(groups),
        })

    # single-sample Shapiro-Wilk references across a size sweep
    sw_samples = [
        rnd(np.arange(1.0, 11.0)),                      # 1..10 linear
        rnd(rng.normal(0, 1, 12)),
        rnd(rng.normal(0, 1, 30)),
        rnd(rng.exponential(1.0, 25)),
        rnd(rng.uniform(0, 1, 8)),
        rnd(rng.normal(5, 3, 50)),
        rnd(rng.standard_t(3, 40)),
        rnd(np.concatenate([rng.normal(0, 1, 18), [6.0, 7.0]])),  # outliers
        rnd(rng.normal(0, 1, 4)),
        rnd(rng.normal(0, 1, 5)),
    ]
    fixtures["shapiro_only"] = []
    for s in sw_samples:
        w, p = stats.shapiro(s)
        fixtures["shapiro_only"].append({"sample": s, "w": float(w), "p": float(p)})

    # studentized range quantiles and CDF spot checks
    sr_cases = []
    for k, df in [(2, 10), (3, 12), (3, 20), (4, 20), (5, 30), (3, 60), (6, 15), (10, 20)]:
        q95 = float(stats.studentized_range.ppf(0.95, k, df))
        sr_cases.append({"k": k, "df": df, "q95": q95,
                         "cdf_at_3": float(stats.studentized_range.cdf(3.0, k, df)),
                         "sf_at_4": float(stats.studentized_range.sf(4.0, k, df))})
    fixtures["studentized_range"] = sr_cases

    # flavor-ranking end-to-end scenarios (dice in [0,1], hd95 in mm)
    def scenario(dice_by_flavor, hd95_by_flavor):
        return {"dice": {f: rnd(v) for f, v in dice_by_flavor.items()},
                "hd95": {f: rnd(v) for f, v in hd95_by_flavor.items()}}

    shared_dice = rnd(np.clip(rng.normal(0.85, 0.02, 20), 0, 1))
    shared_hd = rnd(np.abs(rng.normal(3.0, 0.3, 20)))
    scenarios = {
        "full_tie": scenario({f: shared_dice for f in ("GT", "Pseudo", "Shape")},
                             {f: shared_hd for f in ("GT", "Pseudo", "Shape")}),
        "separated_dice": scenario(
            {"GT": np.clip(rng.normal(0.50, 0.01, 20), 0, 1),
             "Pseudo": np.clip(rng.normal(0.90, 0.01, 20), 0, 1),
             "Shape": np.clip(rng.normal(0.70, 0.01, 20), 0, 1)},
            {"GT": np.abs(rng.normal(8.0, 0.5, 20)),
             "Pseudo": np.abs(rng.normal(2.0, 0.5, 20)),
             "Shape": np.abs(rng.normal(4.0, 0.5, 20))}),
        "hd95_decides": scenario(
            {f: shared_dice for f in ("GT", "Pseudo", "Shape")},
            {"GT": np.abs(rng.normal(5.0, 0.1, 20)),
             "Pseudo": np.abs(rng.normal(5.05, 0.1, 20)),
             "Shape": np.abs(rng.normal(2.0, 0.1, 20))}),
    }
    # attach reference analysis of the dice groups (GT, Pseudo, Shape order)
    for name, sc in scenarios.items():
        dice_groups = [sc["dice"]["GT"], sc["dice"]["Pseudo"], sc["dice"]["Shape"]]
        if name == "full_tie":
            sc["dice_analysis"] = None  # degenerate: identical groups
        else:
            sc["dice_analysis"] = analyze(dice_groups)
    fixtures["ranking_scenarios"] = scenarios

    json.dump(fixtures, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
