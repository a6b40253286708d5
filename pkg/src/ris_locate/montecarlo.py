"""Seeded Monte-Carlo campaigns: RMSE of (p_ris, alpha, tau) against the CRBs.

Every trial derives its own seeds from ``(master_seed, trial_index)`` so a
trial's outcome does not depend on how many trials run or in which order.
Aggregation is a pairwise sum over the per-trial squared errors in index
order, which keeps results identical for any thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .crb import compute_crb
from .estimator import EstimationError, SearchSettings, estimate_pipeline
from .geometry import GeometryError, RisPose, wrap_angle
from .signal import PhaseProfiles, SystemConfig, dbm_to_watts, random_profiles, synthesize_observation


@dataclass(frozen=True)
class TrialStats:
    """RMSEs over successful trials and RMS-averaged bounds.

    RMSE fields are NaN when no trial succeeded or when only bounds were
    requested (``n_trials`` then counts the profile draws).
    """

    n_trials: int
    rmse_pos: float
    rmse_alpha: float
    rmse_tau: float
    peb: float
    oeb: float
    teb: float
    failures: int = 0


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    stats: TrialStats


@dataclass(eq=False)
class ContourGrid:
    """``10 log10`` bound fields indexed ``[iy, ix]``; +inf marks blind cells, NaN excluded ones."""

    x_axis: np.ndarray
    y_axis: np.ndarray
    peb_db: np.ndarray
    oeb_db: np.ndarray
    alpha: float


def trial_seeds(master_seed: int, index: int) -> tuple[np.random.SeedSequence, ...]:
    """``(profile_seed, noise_seed, phi_seed)`` for trial ``index``."""
    root = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return tuple(root.spawn(3))


def symmetric_profiles(M: int, T: int, seed) -> PhaseProfiles:
    """Random profiles with ``gamma[m] == gamma[M-1-m]``.

    With such a profile the bounds at ``alpha = 0`` are exactly symmetric
    about the perpendicular bisector of the anchors, since mirroring the
    array only reverses its element order.
    """
    half = random_profiles((M + 1) // 2, T, seed).gamma
    gamma = np.concatenate([half, half[: M // 2][::-1]], axis=0)
    return PhaseProfiles(gamma, None)


def _check_n(n_trials):
    if int(n_trials) < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")


def _trial(cfg, pose, s, master_seed, i, fixed_profiles, noiseless, bounds_only):
    prof_seed, noise_seed, phi_seed = trial_seeds(master_seed, i)
    profiles = fixed_profiles if fixed_profiles is not None else random_profiles(cfg.M, cfg.T, prof_seed)
    phi = float(np.random.default_rng(phi_seed).uniform(0.0, 2 * np.pi))
    rep = compute_crb(cfg, pose, profiles, phi)
    bnd = (rep.peb ** 2, rep.oeb ** 2, rep.teb ** 2)
    if bounds_only:
        return None, bnd
    obs = synthesize_observation(cfg, pose, profiles, phi, None if noiseless else noise_seed)
    try:
        est = estimate_pipeline(obs, cfg, s)
    except (EstimationError, GeometryError, np.linalg.LinAlgError):
        return None, bnd
    p = est.refined_pose
    err = (
        float(np.sum((p.center - pose.center) ** 2)),
        wrap_angle(p.alpha - pose.alpha) ** 2,
        (est.toa.tau_hat - obs.truth["tau"]) ** 2,
    )
    return err, bnd


def _rms(col: np.ndarray) -> float:
    if col.size == 0:
        return float("nan")
    # np.sum on a contiguous float array is a pairwise reduction
    return float(np.sqrt(np.sum(col) / col.size))


def run_trials(cfg: SystemConfig, pose: RisPose, n_trials: int, master_seed: int,
               s: SearchSettings = SearchSettings(), *, fix_profile: bool = False,
               noiseless: bool = False, bounds_only: bool = False, threads: int = 1) -> TrialStats:
    """Run ``n_trials`` seeded trials of the full estimator at one pose.

    ``fix_profile`` reuses the first trial's phase profiles for every trial,
    so the bounds are computed for a single ``Gamma``. ``bounds_only`` skips
    the estimator. Bounds are averaged as ``sqrt(mean(bound^2))``.
    """
    _check_n(n_trials)
    n = int(n_trials)
    fixed = random_profiles(cfg.M, cfg.T, trial_seeds(master_seed, 0)[0]) if fix_profile else None
    job = lambda i: _trial(cfg, pose, s, master_seed, i, fixed, noiseless, bounds_only)
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            results = list(ex.map(job, range(n)))
    else:
        results = [job(i) for i in range(n)]
    errs = np.array([e for e, _ in results if e is not None], dtype=float).reshape(-1, 3)
    bnds = np.array([b for _, b in results], dtype=float)
    failures = 0 if bounds_only else n - len(errs)
    return TrialStats(
        n_trials=n,
        rmse_pos=_rms(errs[:, 0]),
        rmse_alpha=_rms(errs[:, 1]),
        rmse_tau=_rms(errs[:, 2]),
        peb=_rms(bnds[:, 0]),
        oeb=_rms(bnds[:, 1]),
        teb=_rms(bnds[:, 2]),
        failures=failures,
    )


def _check_axis(values: Sequence[float], name: str) -> list:
    vals = list(values)
    if not vals:
        raise ValueError(f"{name} axis is empty")
    if any(not b > a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} axis must be strictly increasing")
    return vals


def _sweep(cfgs, axis, pose, n_trials, seed, s, kw) -> list[SweepRow]:
    _check_n(n_trials)
    # the same master seed on every row gives common random numbers across the axis
    return [SweepRow(v, run_trials(c, pose, n_trials, seed, s, **kw)) for v, c in zip(axis, cfgs)]


def sweep_power(cfg: SystemConfig, pose: RisPose, p_t_values_dbm: Sequence[float], n_trials: int,
                seed: int, s: SearchSettings = SearchSettings(), **kw) -> list[SweepRow]:
    axis = _check_axis(p_t_values_dbm, "power")
    cfgs = [cfg.with_(P_t=float(dbm_to_watts(v))) for v in axis]
    return _sweep(cfgs, axis, pose, n_trials, seed, s, kw)


def sweep_bandwidth(cfg: SystemConfig, pose: RisPose, n_c_values: Sequence[int], n_trials: int,
                    seed: int, s: SearchSettings = SearchSettings(), **kw) -> list[SweepRow]:
    """Sweep the subcarrier count at fixed spacing; the noise variance follows ``n_f N_0 N_c delta_f``."""
    axis = _check_axis(n_c_values, "subcarrier")
    bad = [n for n in axis if n > cfg.N_F or n < 1]
    if bad:
        raise ValueError(f"subcarrier counts {bad} outside [1, N_F={cfg.N_F}]")
    cfgs = [cfg.with_(N_c=int(n), noise_variance=cfg.derived_noise_variance(int(n))) for n in axis]
    return _sweep(cfgs, axis, pose, n_trials, seed, s, kw)


def sweep_ris_size(cfg: SystemConfig, pose: RisPose, m_values: Sequence[int], n_trials: int,
                   seed: int, s: SearchSettings = SearchSettings(), **kw) -> list[SweepRow]:
    axis = _check_axis(m_values, "RIS size")
    if any(int(m) < 1 for m in axis):
        raise ValueError("RIS sizes must be >= 1")
    cfgs = [cfg.with_(M=int(m)) for m in axis]
    return _sweep(cfgs, axis, pose, n_trials, seed, s, kw)


def grid_axis(lo: float, hi: float, resolution: int) -> np.ndarray:
    if int(resolution) < 2 or not hi > lo:
        raise ValueError("grid needs resolution >= 2 and hi > lo")
    return np.linspace(lo, hi, int(resolution))


def contour_grid(cfg: SystemConfig, alpha: float, x_range, y_range, resolution: int, profile_seed,
                 *, symmetric_profile: bool = False, exclude_radius: float = 0.0,
                 profiles: Optional[PhaseProfiles] = None) -> ContourGrid:
    """PEB/OEB in dB over a grid of RIS positions with one fixed phase profile.

    Cells within ``exclude_radius`` of an anchor (or on it) are NaN; cells
    whose FIM is numerically singular are +inf.
    """
    xs = grid_axis(x_range[0], x_range[1], resolution)
    ys = grid_axis(y_range[0], y_range[1], resolution)
    if profiles is None:
        draw = symmetric_profiles if symmetric_profile else random_profiles
        profiles = draw(cfg.M, cfg.T, profile_seed)
    peb = np.empty((len(ys), len(xs)))
    oeb = np.empty_like(peb)
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            peb[iy, ix], oeb[iy, ix] = point_bounds(cfg, (x, y), alpha, profiles, exclude_radius)
    with np.errstate(divide="ignore"):
        return ContourGrid(xs, ys, 10 * np.log10(peb), 10 * np.log10(oeb), float(alpha))


def point_bounds(cfg: SystemConfig, p, alpha: float, profiles: PhaseProfiles,
                 exclude_radius: float = 0.0) -> tuple[float, float]:
    """``(PEB, OEB)`` at one position; NaN for excluded cells, inf for singular ones."""
    p = np.asarray(p, dtype=float)
    if min(np.linalg.norm(p - cfg.tx), np.linalg.norm(p - cfg.rx)) <= exclude_radius:
        return math.nan, math.nan
    try:
        rep = compute_crb(cfg, RisPose(p, alpha), profiles)
    except GeometryError:
        return math.nan, math.nan
    return rep.peb, rep.oeb
