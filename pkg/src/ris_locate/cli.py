"""``ris-locate`` command-line tool.

Every command writes a CSV (header always present, floats with 17
significant digits) and a JSON manifest next to it. The manifest embeds the
full parsed configuration and every command argument, so
``ris-locate rerun <manifest>`` regenerates a byte-identical CSV.

CSV schemas
-----------
bounds       teb_s, peb_m, oeb_rad, fim_condition
estimate     quantity, estimate, truth, abs_error
trials       n_trials, failures, rmse_pos_m, rmse_alpha_rad, rmse_tau_s, peb_m, oeb_rad, teb_s
sweep-power  p_t_dbm + the trials columns
sweep-bw     n_c, bandwidth_hz, noise_variance_w + the trials columns
sweep-size   m + the trials columns
contour      x_m, y_m, peb_db, oeb_db  (long format; inf = singular FIM, nan = excluded cell)
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import geometry as geo
from . import montecarlo as mc
from .config import ConfigError, apply_overrides, config_from_dict, default_config_path, parse_config, serialize
from .crb import compute_crb
from .estimator import EstimationError, estimate_pipeline, wrap_omega
from .signal import random_profiles, synthesize_observation

log = logging.getLogger("ris_locate")

STATS_COLUMNS = ["n_trials", "failures", "rmse_pos_m", "rmse_alpha_rad", "rmse_tau_s", "peb_m", "oeb_rad", "teb_s"]


def fmt(v) -> str:
    """17 significant digits for floats; integers and strings unchanged."""
    if isinstance(v, (bool, str)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def write_csv(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def _stats_row(st: mc.TrialStats) -> list:
    return [st.n_trials, st.failures, st.rmse_pos, st.rmse_alpha, st.rmse_tau, st.peb, st.oeb, st.teb]


def _float_axis(lo: float, hi: float, step: float) -> list:
    if not step > 0:
        raise ValueError("--step must be > 0")
    if hi < lo:
        raise ValueError("--to must be >= --from")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(count)]


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValueError(f"expected comma-separated integers, got {text!r}") from exc


def _trial_kw(args) -> dict:
    return dict(fix_profile=args["fix_profile"], noiseless=args["noiseless"],
                bounds_only=args["bounds_only"], threads=args["threads"])


# each command: (cfg, pose, settings, args) -> (header, rows)

def cmd_bounds(cfg, pose, s, args):
    rep = compute_crb(cfg, pose, random_profiles(cfg.M, cfg.T, args["seed"]), args["phi"])
    return ["teb_s", "peb_m", "oeb_rad", "fim_condition"], [[rep.teb, rep.peb, rep.oeb, rep.condition]]


def cmd_estimate(cfg, pose, s, args):
    seeds = mc.trial_seeds(args["seed"], 0)
    profiles = random_profiles(cfg.M, cfg.T, seeds[0])
    obs = synthesize_observation(cfg, pose, profiles, args["phi"], None if args["noiseless"] else seeds[1])
    est = estimate_pipeline(obs, cfg, s)
    tau = obs.truth["tau"]
    ellipse = geo.ellipse_from_toa(cfg.tx, cfg.rx, tau, cfg.c)
    p, p0 = est.refined_pose, est.initial_pose
    gain = obs.truth["gain"]
    g_true = gain.rho * np.exp(1j * gain.phi)
    rows = [
        ("tau_s", est.toa.tau_hat, tau),
        ("omega", est.omega_hat, wrap_omega(geo.pose_omega(cfg.tx, cfg.rx, pose), cfg)),
        ("nu_rad", est.nu_hat, geo.ellipse_nu(ellipse, pose.center) % (2 * np.pi)),
        ("init_p_x_m", p0.center[0], pose.center[0]),
        ("init_p_y_m", p0.center[1], pose.center[1]),
        ("init_alpha_rad", p0.alpha, pose.alpha),
        ("p_x_m", p.center[0], pose.center[0]),
        ("p_y_m", p.center[1], pose.center[1]),
        ("alpha_rad", p.alpha, pose.alpha),
        ("gain_abs", abs(est.g_r_hat), abs(g_true)),
        ("gain_phase_rad", float(np.angle(est.g_r_hat)), float(np.angle(g_true))),
    ]
    out = []
    for name, e, t in rows:
        err = abs(geo.wrap_angle(e - t)) if name.endswith("_rad") else abs(e - t)
        out.append([name, e, t, err])
    out.append(["residual", est.cost_trace[-1][1], 0.0, est.cost_trace[-1][1]])
    return ["quantity", "estimate", "truth", "abs_error"], out


def cmd_trials(cfg, pose, s, args):
    st = mc.run_trials(cfg, pose, args["n"], args["seed"], s, **_trial_kw(args))
    return STATS_COLUMNS, [_stats_row(st)]


def cmd_sweep_power(cfg, pose, s, args):
    axis = _float_axis(args["from"], args["to"], args["step"])
    rows = mc.sweep_power(cfg, pose, axis, args["n"], args["seed"], s, **_trial_kw(args))
    return ["p_t_dbm"] + STATS_COLUMNS, [[r.axis_value] + _stats_row(r.stats) for r in rows]


def cmd_sweep_bw(cfg, pose, s, args):
    axis = _int_list(args["values"])
    rows = mc.sweep_bandwidth(cfg, pose, axis, args["n"], args["seed"], s, **_trial_kw(args))
    out = []
    for r in rows:
        n = int(r.axis_value)
        out.append([n, n * cfg.delta_f, cfg.derived_noise_variance(n)] + _stats_row(r.stats))
    return ["n_c", "bandwidth_hz", "noise_variance_w"] + STATS_COLUMNS, out


def cmd_sweep_size(cfg, pose, s, args):
    axis = _int_list(args["values"])
    rows = mc.sweep_ris_size(cfg, pose, axis, args["n"], args["seed"], s, **_trial_kw(args))
    return ["m"] + STATS_COLUMNS, [[int(r.axis_value)] + _stats_row(r.stats) for r in rows]


def cmd_contour(cfg, pose, s, args):
    g = mc.contour_grid(cfg, args["alpha"], (args["x_min"], args["x_max"]), (args["y_min"], args["y_max"]),
                        args["resolution"], args["seed"], symmetric_profile=args["symmetric_profile"],
                        exclude_radius=args["exclude_radius"])
    rows = []
    for iy, y in enumerate(g.y_axis):
        for ix, x in enumerate(g.x_axis):
            rows.append([x, y, g.peb_db[iy, ix], g.oeb_db[iy, ix]])
    return ["x_m", "y_m", "peb_db", "oeb_db"], rows


COMMANDS = {
    "bounds": cmd_bounds,
    "estimate": cmd_estimate,
    "trials": cmd_trials,
    "sweep-power": cmd_sweep_power,
    "sweep-bw": cmd_sweep_bw,
    "sweep-size": cmd_sweep_size,
    "contour": cmd_contour,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ris-locate", description="RIS localization bounds and estimator studies.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config (default: shipped reference scenario)")
        sp.add_argument("--out", help="CSV output path (default: <command>.csv)")
        sp.add_argument("--seed", type=int, default=0, help="master seed (non-negative)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (fallback: RIS_LOCATE_THREADS, else 1)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a search setting, repeatable")
        sp.add_argument("-v", "--verbose", action="store_true")

    def trials_opts(sp, n_default=100):
        sp.add_argument("--n", type=int, default=n_default, help="trials per point")
        sp.add_argument("--noiseless", action="store_true")
        sp.add_argument("--fix-profile", action="store_true", help="one phase profile for every trial")
        sp.add_argument("--bounds-only", action="store_true", help="skip the estimator")

    sp = sub.add_parser("bounds", help="CRBs at the configured pose")
    common(sp)
    sp.add_argument("--phi", type=float, default=0.0, help="channel phase [rad]")
    sp = sub.add_parser("estimate", help="one synthesized trial with stage diagnostics")
    common(sp)
    sp.add_argument("--phi", type=float, default=0.0, help="channel phase [rad]")
    sp.add_argument("--noiseless", action="store_true")
    sp = sub.add_parser("trials", help="Monte-Carlo RMSE against bounds")
    common(sp)
    trials_opts(sp)
    sp = sub.add_parser("sweep-power", help="sweep transmit power [dBm]")
    common(sp)
    trials_opts(sp)
    sp.add_argument("--from", dest="from_", type=float, default=-20.0)
    sp.add_argument("--to", type=float, default=20.0)
    sp.add_argument("--step", type=float, default=5.0)
    sp = sub.add_parser("sweep-bw", help="sweep subcarrier count at fixed spacing")
    common(sp)
    trials_opts(sp)
    sp.add_argument("--values", default="125,250,500,1000", help="comma-separated N_c values")
    sp = sub.add_parser("sweep-size", help="sweep the number of RIS elements")
    common(sp)
    trials_opts(sp)
    sp.add_argument("--values", default="16,32,64,128", help="comma-separated M values")
    sp = sub.add_parser("contour", help="PEB/OEB over a grid of RIS positions")
    common(sp)
    sp.add_argument("--alpha", type=float, default=0.0, help="RIS orientation [rad]")
    sp.add_argument("--x-min", type=float, default=-6.0)
    sp.add_argument("--x-max", type=float, default=6.0)
    sp.add_argument("--y-min", type=float, default=-6.0)
    sp.add_argument("--y-max", type=float, default=6.0)
    sp.add_argument("--resolution", type=int, default=41)
    sp.add_argument("--exclude-radius", type=float, default=0.0, help="blank cells this close to an anchor [m]")
    sp.add_argument("--symmetric-profile", action="store_true",
                    help="mirror-symmetric phase profile (exact bisector symmetry at alpha=0)")
    sp = sub.add_parser("rerun", help="regenerate an output from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", help="CSV path (default: the manifest's output path)")
    sp.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_threads(flag) -> int:
    if flag is not None:
        n = flag
    else:
        env = os.environ.get("RIS_LOCATE_THREADS", "").strip()
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ValueError(f"RIS_LOCATE_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ValueError("thread count must be >= 1")
    return n


def _parse_sets(items) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def manifest_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".manifest.json")


def dispatch(command: str, manifest: dict) -> Path:
    """Run ``command`` from a manifest-shaped dict and write its CSV; returns the CSV path."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    cfg, pose, s = config_from_dict(manifest["config"], source=manifest.get("config_path") or "<manifest>")
    s = apply_overrides(s, manifest.get("settings_overrides", {}))
    args = dict(manifest["args"])
    args["seed"] = manifest["seed"]
    args["threads"] = manifest.get("threads", 1)
    header, rows = COMMANDS[command](cfg, pose, s, args)
    out = Path(manifest["output_path"])
    write_csv(out, header, rows)
    return out


def _command_args(ns) -> dict:
    skip = {"command", "config", "out", "seed", "threads", "set", "verbose"}
    args = {("from" if k == "from_" else k): v for k, v in vars(ns).items() if k not in skip}
    if ns.command in ("bounds", "estimate"):
        args.setdefault("noiseless", False)
    return args


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if ns.command == "rerun":
            manifest = json.loads(Path(ns.manifest).read_text())
            if ns.out:
                manifest["output_path"] = ns.out
            out = dispatch(manifest["command"], manifest)
            print(out)
            return 0
        if ns.seed < 0:
            raise ValueError("--seed must be non-negative")
        config_path = Path(ns.config) if ns.config else default_config_path()
        cfg, pose, s = parse_config(config_path)
        overrides = _parse_sets(ns.set)
        apply_overrides(s, overrides)  # fail before any work
        out = Path(ns.out) if ns.out else Path(f"{ns.command}.csv")
        manifest = {
            "command": ns.command,
            "config_path": str(config_path),
            "config": serialize(cfg, pose, s),
            "output_path": str(out),
            "seed": ns.seed,
            "threads": resolve_threads(ns.threads),
            "args": _command_args(ns),
            "settings_overrides": overrides,
            "tool_version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }
        out = dispatch(ns.command, manifest)
        mpath = manifest_path(out)
        mpath.write_text(json.dumps(manifest, indent=2) + "\n")
        print(out)
        return 0
    except (ConfigError, ValueError, EstimationError, geo.GeometryError, OSError, KeyError) as exc:
        print(f"ris-locate: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
