"""Regenerates clicks_synthetic.csv: 1000 device keys, impression-level rows.

Columns follow the public click-through logs (id, click, hour, app_id,
device_ip); per-key click totals are zero-inflated and right-skewed.
"""
import csv
import numpy as np

rng = np.random.default_rng(20240611)
KEYS = 1000

ips = [f"{rng.integers(0, 2**32):08x}" for _ in range(KEYS)]
assert len(set(ips)) == KEYS
impressions = 1 + rng.negative_binomial(0.35, 0.08, size=KEYS)
ctr = rng.beta(0.4, 2.0, size=KEYS)

rows = []
for ip, n, p in zip(ips, impressions, ctr):
    for _ in range(n):
        rows.append((ip, int(rng.random() < p)))
order = rng.permutation(len(rows))

with open("clicks_synthetic.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["id", "click", "hour", "app_id", "device_ip"])
    for k, i in enumerate(order):
        ip, click = rows[i]
        hour = 14102100 + int(rng.integers(0, 10)) * 100 + int(rng.integers(0, 24))
        app = f"{int(rng.integers(0, 40)):06x}"
        w.writerow([10_000_000 + k, click, hour, app, ip])
