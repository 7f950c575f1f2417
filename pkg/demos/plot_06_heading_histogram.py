"""
Which way did the unicycle go?
==============================

A unicycle starts at rest with heading 45 degrees and only noise on its
acceleration.  The final position reveals the heading line but not its
direction, so the angles pile up at 45 and 225 degrees.
"""

from obsgram import heading_experiment

h = heading_experiment(q=0.1, samples=1000, t1=10.0, seed=40)
centres, counts = h.top_bins(2)
print("dominant bins:", centres, "with", counts, "runs")
print("excluded (ended at origin):", h.n_excluded)
for lo, n in zip(h.edges[:-1], h.counts):
    if n:
        print(f"[{lo:5.0f}, {lo + 10:5.0f}) {'#' * (n // 20)} {n}")
