"""Bounds at the reference scenario and how they move with a few knobs.

Run: python3 demos/bounds_reference.py
"""
import numpy as np

from ris_locate import RisPose, SystemConfig, compute_crb, random_profiles
from ris_locate.geometry import fraunhofer_distance

cfg = SystemConfig()
pose = RisPose((0.0, 0.0), np.pi / 6)
prof = random_profiles(cfg.M, cfg.T, 0)

print(f"Fraunhofer distance {fraunhofer_distance(cfg.M, cfg.delta, cfg.wavelength):.2f} m;"
      f" anchors sit at {np.linalg.norm(cfg.tx):.2f} and {np.linalg.norm(cfg.rx):.2f} m, so the RIS is near field")

rep = compute_crb(cfg, pose, prof)
print(f"TEB {rep.teb:.3e} s   PEB {rep.peb:.4f} m   OEB {rep.oeb:.4f} rad   cond {rep.condition:.2e}")

# every bound falls by sqrt(2) per 3 dB of transmit power
for p_dbm in (0, 10, 20, 30):
    r = compute_crb(cfg.with_(P_t=1e-3 * 10 ** (p_dbm / 10)), pose, prof)
    print(f"P_t {p_dbm:3d} dBm  PEB {r.peb:.4f} m  OEB {r.oeb:.4f} rad")

# a different random phase profile changes the bounds a little
spread = [compute_crb(cfg, pose, random_profiles(cfg.M, cfg.T, s)).peb for s in range(10)]
print(f"PEB over 10 profile draws: {min(spread):.4f} .. {max(spread):.4f} m")
