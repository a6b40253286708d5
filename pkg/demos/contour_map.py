"""PEB over RIS positions for a fixed orientation, printed as a coarse text map.

Run: python3 demos/contour_map.py
"""
import numpy as np

from ris_locate import SystemConfig
from ris_locate.montecarlo import contour_grid

cfg = SystemConfig()
g = contour_grid(cfg, 0.0, (-6, 6), (-6, 6), 25, 0, symmetric_profile=True, exclude_radius=0.25)

levels = " .:-=+*#%@"
finite = g.peb_db[np.isfinite(g.peb_db)]
# clip the shading to the bulk of the field; a few cells are nearly blind
lo, hi = np.percentile(finite, [2, 90])
print(f"PEB shaded from {lo:.1f} dB ('@') to {hi:.1f} dB (' ' and above); 'T'/'R' mark the anchors, '!' a singular FIM")
for iy in range(len(g.y_axis) - 1, -1, -1):
    line = ""
    for ix, x in enumerate(g.x_axis):
        v, y = g.peb_db[iy, ix], g.y_axis[iy]
        if np.isnan(v):
            line += "T" if abs(x - cfg.p_tx[0]) < abs(x - cfg.p_rx[0]) else "R"
        elif np.isinf(v):
            line += "!"
        else:
            k = int(np.clip((v - lo) / (hi - lo) * len(levels), 0, len(levels) - 1))
            line += levels[::-1][k]
    print(line)
print("The map is symmetric about x = 1 and darkest next to the anchors. The row through the anchors")
print("is singular, and the column x = 1 is nearly blind: with a mirror-symmetric profile at alpha = 0")
print("a sideways shift there changes the received signal only at second order.")
