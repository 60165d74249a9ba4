"""
Poincare constants under refinement
===================================

Sweep an L-shaped domain through three refinement levels and watch the
constants settle.  The same table is what ``formdeck sweep`` writes to CSV.
"""

####
# Each level builds the complex once and reuses it for every form degree.

from formdeck.poincare import sweep

records, summary = sweep("lshape", (1, 2, 3), ks=(0, 1), rs=(0, 1), samples=5, seed=7,
                         workers=1)

####
# One row per level, degree and polynomial order.

print(f"{'level':>5} {'k':>2} {'r':>2} {'h':>7} {'spectral':>9} {'lifting':>8}")
for rec in records:
    print(f"{rec.level:>5} {rec.k:>2} {rec.r:>2} {rec.h:7.4f} "
          f"{rec.poincare_const:9.4f} {rec.lifting_const:8.4f}")

####
# The ratio of largest to smallest value across levels is the quantity of
# interest.  A growth flag would mean the constants still increase.

for key, row in summary.items():
    print(key, round(row["poincare_ratio"], 3), round(row["lifting_ratio"], 3),
          "growing" if row["growth_flag"] else "flat")
