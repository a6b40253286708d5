"""RMSE against the bounds over transmit power, a handful of trials per point.

Run: python3 demos/power_sweep.py [trials]   (default 5; the estimator takes ~3 s per trial)
"""
import sys

import numpy as np

from ris_locate import RisPose, SystemConfig
from ris_locate.montecarlo import sweep_power

n = int(sys.argv[1]) if len(sys.argv) > 1 else 5
cfg = SystemConfig()
pose = RisPose((0.0, 0.0), np.pi / 6)

print(f"{'P_t dBm':>8} {'RMSE p':>9} {'PEB':>9} {'RMSE a':>9} {'OEB':>9} {'fail':>5}")
for row in sweep_power(cfg, pose, [0.0, 10.0, 20.0, 30.0], n, seed=1):
    st = row.stats
    print(f"{row.axis_value:8.0f} {st.rmse_pos:9.4f} {st.peb:9.4f} {st.rmse_alpha:9.4f} {st.oeb:9.4f} {st.failures:5d}")

# Around 10 dBm a share of trials lock onto a distant pose whose fit is as good as
# the truth's, so the RMSE sits well above the bound; by 30 dBm it tracks the bound.
