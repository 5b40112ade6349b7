"""Compare the four exploration templates on the three experiments.

Smaller than the acceptance runs so it finishes in a few seconds; pass a run
count to get closer to them.

    python3 demos/template_patterns.py [runs]
"""

import sys

from qpbelief import alpha_sweep, generate_schema, reco_impact, si_profiles

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 5
schema = generate_schema("ssb-like", seed=42)

table = alpha_sweep(schema, runs=runs, seed=42)
print(f"distance between shared and user belief by alpha ({runs} runs)")
print(table.pretty())

prof = si_profiles(schema, per_template_sessions=20, alpha=0.9, seed=42)
print("\ntemplate          mean SI   final unique parts")
for name in prof.si:
    print(f"{name:<16} {prof.mean_si(name):8.3f}   {prof.final_cumulative(name):8.2f}")

for scenario in ("identical", "independent"):
    t = reco_impact(schema, scenario, runs=max(1, runs // 2), seed=42)
    print(f"\nrecommendation impact, {scenario} logs (rows: recommender template)")
    print(t.pretty())
