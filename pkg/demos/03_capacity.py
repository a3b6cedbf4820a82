"""
How far does one core go?
=========================

Time the primitive operations, then turn them into a projected rating
throughput. The operation counts per rating are the ones a logged session
actually performs; the workload numbers below are placeholders.
"""

from repsim.bench import RATING_OPS, bench_he, extrapolate
from repsim.he import HeParams

table = bench_he(HeParams(slot_count=8, depth_budget=3, epsilon=1e-6), iterations=100)
print(f"backend: {table.label}")
for row in table.rows:
    print(f"  {row.name:<10} mean {row.mean:9.1f} us   p50 {row.p50:9.1f}   p95 {row.p95:9.1f}")

print("\nper-rating operations:", RATING_OPS)
for n_businesses, per_day in [(0, 10), (5_000, 20), (10**6, 100)]:
    cap = extrapolate(table, n_businesses, per_day)
    print(f"{n_businesses:>9} firms x {per_day:>3}/day: demand {cap.demand_ratings_per_second:9.2f}/s, "
          f"capacity {cap.ratings_per_second:8.1f}/s, feasible={cap.feasible}, bottleneck={cap.bottleneck}"
          + (" (trivial)" if cap.trivial else ""))

print("\nformula:", cap.assumptions["formula"])
