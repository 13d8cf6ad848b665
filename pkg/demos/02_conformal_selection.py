"""Walkthrough: conformal selection with a recall guarantee.

The generator intentionally over-produces; some candidates are wrong or even
unparseable. The selector calibrates a score threshold on held-out questions
whose correct answer is known, then keeps only candidates scoring at or
below it. By the conformal quantile construction, the correct candidate
survives with probability >= 1 - alpha on exchangeable questions. Run with:

    python demos/02_conformal_selection.py
"""

import math
import random

from ambisql.selector import conformal_threshold

rng = random.Random(11)

# Nonconformity scores of known-correct candidates on calibration questions:
# mostly low, with a noisy tail.
calibration = sorted(round(rng.betavariate(2, 8), 3) for _ in range(40))
print(f"calibration scores (n={len(calibration)}):")
print(" ", calibration[:10], "...", calibration[-3:])

for alpha in (0.5, 0.2, 0.1, 0.05, 0.02):
    threshold = conformal_threshold(calibration, alpha)
    n = len(calibration)
    k = math.ceil((n + 1) * (1 - alpha))
    shown = "inf (keep everything)" if math.isinf(threshold) else f"{threshold:.3f}"
    print(f"alpha={alpha:<5} -> k = ceil({n + 1} * {1 - alpha:.2f}) = {k:<3} "
          f"threshold = {shown}")

print("\nSmaller alpha demands more recall, so the threshold climbs; when the")
print("quantile index exceeds n the threshold is infinite and nothing is pruned.")

# Empirical check of the guarantee on fresh draws from the same distribution.
alpha = 0.1
threshold = conformal_threshold(calibration, alpha)
fresh = [rng.betavariate(2, 8) for _ in range(5000)]
kept = sum(1 for s in fresh if s <= threshold) / len(fresh)
print(f"\nempirical retention at alpha={alpha}: {kept:.3f} (promise: >= {1 - alpha})")
