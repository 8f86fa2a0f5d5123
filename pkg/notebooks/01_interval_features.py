"""
Interval features of a flux window
==================================

Sliding windows at three scales, their mean/std/slope, and the pooled
summaries over neighbouring intervals.
"""

import numpy as np

from sepmap.features import ExtractionConfig, build_descriptors, extract_values, generate_intervals

# a 6 hour window at 1 minute cadence: flat background, then a rise
n = 360
t = np.arange(n)
flux = np.log10(1.0 + 5.0 * np.exp(-0.01 * (n - t)))

cfg = ExtractionConfig()
print("scales (width, stride):", cfg.resolve_scales(n))
intervals = generate_intervals(n, cfg)
print("intervals:", len(intervals))

values = extract_values(flux[None, :], cfg)
descs = build_descriptors(n, ("P3",), cfg)
print("features:", len(descs))

# the slope features climb towards the end of the window
for d, v in zip(descs, values):
    if d.statistic == "slope" and d.pooling == "none" and d.scale_id == "w90s45":
        print(f"{d.name:22s} {d.midpoint_samples_before_end:6.1f} min before end  slope={v:.5f}")
