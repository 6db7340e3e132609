"""How much the working variance matters for efficiency.

Overdispersed pairwise counts are generated with a log-linear mean, then
fitted with three working variances: the matched overdispersed form, a
variance-equals-mean assumption, and a flat constant.  All three give
consistent estimates; their reported variances tell the efficiency story.
The likelihood fit that treats pairs as independent is the benchmark.

A desk-scale run (M=100) finishes in a few seconds; raise --m for a
tighter table (the published-style studies use M=1000).
"""

import argparse

from pairgee import McConfig, run_monte_carlo

parser = argparse.ArgumentParser()
parser.add_argument("--n", type=int, default=100)
parser.add_argument("--m", type=int, default=100)
parser.add_argument("--seed", type=int, default=404)
args = parser.parse_args()

config = McConfig(
    scenario="nb", n=args.n, replicates=args.m, seed=args.seed,
    methods=("mle:nb", "ugee:nb", "ugee:poisson", "ugee:const"),
    params={"tau": 10.0, "beta0": 3.0, "beta1": 3.0, "a": 0.0, "b": 1.0})

report = run_monte_carlo(config)
print(report.summary())

rows = {(r.method, r.param): r for r in report.rows}
base = rows[("ugee:nb", "beta1")].asy
print("\nrelative efficiency for the slope (variance ratio vs matched form):")
for method in ("ugee:nb", "ugee:poisson", "ugee:const"):
    r = rows[(method, "beta1")]
    print(f"  {method:14s} {r.asy / base:6.2f}x")
print("\nthe matched working variance attains the likelihood benchmark;")
print("cruder variances stay consistent but pay in precision.")
