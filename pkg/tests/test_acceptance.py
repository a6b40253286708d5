"""Acceptance criteria, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line; the lines are
printed as the test runs (visible with ``-s``) and repeated in the pytest
terminal summary.
"""
import filecmp
import json
import time

import numpy as np
import pytest

from ris_locate import cli
from ris_locate import montecarlo as mc
from ris_locate.crb import EtaParams, compute_crb, mu_derivatives
from ris_locate.estimator import estimate_pipeline
from ris_locate.geometry import RisPose, wrap_angle
from ris_locate.signal import SystemConfig, random_profiles, synthesize_observation

import _oracles as orc
import _report

CFG = SystemConfig()
POSE = RisPose((0.0, 0.0), np.pi / 6)


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    _report.LINES.append(line)
    print("\n" + line)
    assert ok, line


def test_criterion_1_derivative_oracle():
    t0 = time.perf_counter()
    cfg = SystemConfig(M=8, N_c=16, T=4)
    worst = 0.0
    for seed, phi in ((0, 0.0), (1, 0.7), (2, 4.0)):
        prof = random_profiles(cfg.M, cfg.T, seed)
        eta = EtaParams.from_geometry(cfg, POSE, phi)
        D = mu_derivatives(cfg, eta, prof)
        F = orc.fd_jacobian(lambda x: orc.mu_eta(cfg, x, prof.gamma), eta.as_array(),
                            orc.eta_steps(eta.rho, cfg.N_c, cfg.delta_f))
        err = np.abs(D - F).max(axis=1) / np.abs(F).max(axis=1)
        worst = max(worst, float(err.max()))
    dt = time.perf_counter() - t0
    verdict(1, worst < 1e-6 and dt < 10, f"max relative error {worst:.2e} (< 1e-6), {dt:.2f} s (< 10 s)")


def test_criterion_2_power_scaling():
    prof = random_profiles(CFG.M, CFG.T, 0)
    a = compute_crb(CFG, POSE, prof)
    b = compute_crb(CFG.with_(P_t=CFG.P_t * 100), POSE, prof)
    ratios = np.array([a.teb / b.teb, a.peb / b.peb, a.oeb / b.oeb])
    dev = float(np.max(np.abs(ratios / 10 - 1)))
    verdict(2, dev < 1e-9, f"ratios TEB/PEB/OEB {ratios.round(12).tolist()}, max deviation {dev:.1e} (< 1e-9)")


def _random_geometries(count, cfg, seed=7):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = np.array([rng.uniform(-2, 4), rng.uniform(-3, 1)])
        a = rng.uniform(-np.pi / 3, np.pi / 3)
        dt, dr = np.linalg.norm(p - cfg.tx), np.linalg.norm(p - cfg.rx)
        if not (1.5 < dt < 6 and 1.5 < dr < 6):
            continue
        # both anchors clearly in front of the surface, so neither is collinear with it
        normal = np.array([-np.sin(a), np.cos(a)])
        if min((cfg.tx - p) @ normal / dt, (cfg.rx - p) @ normal / dr) < 0.3:
            continue
        out.append(RisPose(p, a))
    return out


def test_criterion_3_noiseless_exactness():
    t0 = time.perf_counter()
    poses = [POSE] + _random_geometries(20, CFG)
    worst = np.zeros(3)
    for i, pose in enumerate(poses):
        obs = synthesize_observation(CFG, pose, random_profiles(CFG.M, CFG.T, i), 0.7)
        r = estimate_pipeline(obs, CFG)
        err = [np.linalg.norm(r.refined_pose.center - pose.center),
               abs(wrap_angle(r.refined_pose.alpha - pose.alpha)),
               abs(r.toa.tau_hat - obs.truth["tau"])]
        worst = np.maximum(worst, err)
    dt = time.perf_counter() - t0
    ok = worst[0] < 1e-6 and worst[1] < 1e-6 and worst[2] < 1e-11 and dt < 120
    verdict(3, ok, f"reference scene + 20 random scenes, worst errors {worst[0]:.1e} m / {worst[1]:.1e} rad / "
                   f"{worst[2]:.1e} s (< 1e-6 / 1e-6 / 1e-11), {dt:.0f} s (< 120 s)")


@pytest.mark.slow
def test_criterion_4_rmse_attains_crb():
    t0 = time.perf_counter()
    st = mc.run_trials(CFG, POSE, 100, 2024)
    dt = time.perf_counter() - t0
    ratios = np.array([st.rmse_pos / st.peb, st.rmse_alpha / st.oeb, st.rmse_tau / st.teb])
    inside = (ratios >= 0.8) & (ratios <= 1.5)
    ok = bool(inside.all()) and st.failures == 0 and dt < 600
    verdict(4, ok, f"RMSE/bound pos {ratios[0]:.2f}, alpha {ratios[1]:.2f}, tau {ratios[2]:.2f} (each in [0.8, 1.5]); "
                   f"PEB {st.peb:.3f} m, OEB {st.oeb:.3f} rad, TEB {st.teb:.3e} s; failures {st.failures}; {dt:.0f} s")


def test_criterion_5_bandwidth_trend():
    t0 = time.perf_counter()
    cfg = CFG.with_(P_t=0.01)
    rows = mc.sweep_bandwidth(cfg, POSE, [125, 250, 500, 1000], 20, 0, bounds_only=True)
    cols = {k: [getattr(r.stats, k) for r in rows] for k in ("teb", "peb", "oeb")}
    mono = all(all(b <= a for a, b in zip(v, v[1:])) for v in cols.values())
    dt = time.perf_counter() - t0
    detail = "; ".join(f"{k.upper()} " + ", ".join(f"{x:.3g}" for x in v) for k, v in cols.items())
    verdict(5, mono and dt < 60, f"N_c 125/250/500/1000: {detail}; {dt:.1f} s (< 60 s)")


def test_criterion_6_ris_size():
    rows = mc.sweep_ris_size(CFG.with_(P_t=0.01), POSE, [16, 32, 64, 128], 20, 0, bounds_only=True)
    peb = [r.stats.peb for r in rows]
    oeb = [r.stats.oeb for r in rows]
    dec = all(b < a for a, b in zip(peb, peb[1:])) and all(b < a for a, b in zip(oeb, oeb[1:]))
    ok = peb[-1] < 0.01 and dec
    verdict(6, ok, f"PEB(M=128) = {peb[-1]:.4f} m (< 0.01 m); PEB over M 16/32/64/128: "
                   f"{', '.join(f'{v:.3g}' for v in peb)}; OEB: {', '.join(f'{v:.3g}' for v in oeb)}; "
                   f"decreasing {dec}")


def test_criterion_7_contour_structure():
    t0 = time.perf_counter()
    prof = mc.symmetric_profiles(CFG.M, CFG.T, 0)
    step = 12.0 / 40
    g = mc.contour_grid(CFG, 0.0, (-6.0, 6.0), (-6.0, 6.0), 41, 0, profiles=prof, exclude_radius=step / 2)
    peb = 10 ** (g.peb_db / 10)
    # the bisector is x = 1, which is off-grid: evaluate each mirror point directly
    worst = 0.0
    for iy, y in enumerate(g.y_axis):
        for ix, x in enumerate(g.x_axis):
            v = peb[iy, ix]
            if not np.isfinite(v):
                continue
            m = mc.point_bounds(CFG, (2.0 - x, y), 0.0, prof, step / 2)[0]
            worst = max(worst, abs(m - v) / v)
    iy, ix = np.unravel_index(np.nanargmin(np.where(np.isfinite(peb), peb, np.nan)), peb.shape)
    best = np.array([g.x_axis[ix], g.y_axis[iy]])
    near = min(np.linalg.norm(best - CFG.tx), np.linalg.norm(best - CFG.rx))
    dt = time.perf_counter() - t0
    ok = worst < 1e-6 and near <= 1.0 and dt < 300
    verdict(7, ok, f"mirror asymmetry {worst:.1e} (< 1e-6); min-PEB cell at ({best[0]:.2f}, {best[1]:.2f}), "
                   f"{near:.2f} m from an anchor (<= 1 m); {dt:.0f} s (< 300 s)")


COMMANDS = [
    ["bounds", "--seed", "4"],
    ["estimate", "--seed", "4"],
    ["trials", "--n", "2", "--seed", "4", "--threads", "2"],
    ["sweep-power", "--from", "0", "--to", "10", "--step", "5", "--n", "1"],
    ["sweep-bw", "--values", "250,500", "--n", "1"],
    ["sweep-size", "--values", "32,64", "--n", "1"],
    ["contour", "--resolution", "7", "--alpha", "0.3"],
]


def test_criterion_8_determinism(tmp_path):
    same = []
    for argv in COMMANDS:
        first = tmp_path / f"{argv[0]}.csv"
        assert cli.main(argv + ["--out", str(first)]) == 0
        manifest = tmp_path / f"{argv[0]}.manifest.json"
        assert json.loads(manifest.read_text())["command"] == argv[0]
        second = tmp_path / f"{argv[0]}-rerun.csv"
        assert cli.main(["rerun", str(manifest), "--out", str(second)]) == 0
        same.append(filecmp.cmp(first, second, shallow=False))
    names = [a[0] for a in COMMANDS]
    verdict(8, all(same), "byte-identical rerun: " + ", ".join(f"{n} {s}" for n, s in zip(names, same)))
