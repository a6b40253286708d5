"""Received-signal model for the TX -> RIS -> RX path.

The noiseless observation is the rank-one matrix

    mu = rho * exp(j*phi) * sqrt(P_t) * d(tau) b^T Gamma      (N_c x T)

with ``d`` the subcarrier delay steering vector, ``b`` the near-field RIS
response and ``Gamma`` the RIS phase profiles over time.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geometry import GeometryError, RisPose, _check_distinct, _vec, element_positions, local_offsets, path_delay


def dbm_to_watts(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0) / 1000.0


def watts_to_dbm(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float) * 1000.0)


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Fixed system parameters. All values in SI units (m, Hz, W, s).

    Defaults reproduce the simulation table of the reference scenario with
    ``P_t = 10 dBm``.
    """

    wavelength: float = 0.01
    delta: float = 0.005
    M: int = 64
    N_c: int = 500
    T: int = 50
    delta_f: float = 120e3
    P_t: float = 0.01
    G_t: float = 2.0
    G_r: float = 2.0
    noise_variance: float = float(dbm_to_watts(-88.0))
    N_F: int = 4096
    p_tx: tuple = (0.0, 2.0)
    p_rx: tuple = (2.0, 2.0)
    c: float = 3e8
    # only used when the noise variance is re-derived for a new bandwidth
    noise_psd: float = float(dbm_to_watts(-174.0))
    noise_figure: float = float(db_to_linear(8.0))

    def __post_init__(self):
        object.__setattr__(self, "p_tx", tuple(float(v) for v in self.p_tx))
        object.__setattr__(self, "p_rx", tuple(float(v) for v in self.p_rx))
        problems = self.violations()
        if problems:
            raise ValueError("invalid SystemConfig: " + "; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        for name in ("M", "N_c", "T", "N_F"):
            if int(getattr(self, name)) < 1:
                out.append(f"{name} must be >= 1")
        if self.N_F < self.N_c:
            out.append(f"N_F ({self.N_F}) must be >= N_c ({self.N_c})")
        if self.N_F >= 1 and self.N_F & (self.N_F - 1):
            out.append(f"N_F ({self.N_F}) must be a power of two")
        for name in ("wavelength", "delta", "delta_f", "P_t", "noise_variance", "c", "noise_psd", "noise_figure"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0")
        for name in ("G_t", "G_r"):
            if not getattr(self, name) >= 0:
                out.append(f"{name} must be >= 0")
        return out

    @property
    def tx(self) -> np.ndarray:
        return np.asarray(self.p_tx)

    @property
    def rx(self) -> np.ndarray:
        return np.asarray(self.p_rx)

    def derived_noise_variance(self, N_c: Optional[int] = None) -> float:
        """``n_f * N_0 * N_c * delta_f`` for the given (or current) subcarrier count."""
        n = self.N_c if N_c is None else N_c
        return self.noise_figure * self.noise_psd * n * self.delta_f

    def with_(self, **kw) -> "SystemConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class ChannelGain:
    rho: float
    phi: float

    @property
    def complex(self) -> complex:
        return self.rho * np.exp(1j * self.phi)


@dataclass(eq=False)
class PhaseProfiles:
    """Unit-modulus RIS phase profiles, ``gamma`` has shape ``(M, T)``."""

    gamma: np.ndarray
    seed: Optional[int] = None


@dataclass(eq=False)
class Observation:
    Y: np.ndarray
    profiles: PhaseProfiles
    truth: Optional[dict] = None


def channel_amplitude(cfg: SystemConfig, p_ris) -> float:
    p_ris = _vec(p_ris)
    _check_distinct(p_ris, cfg.tx, cfg.rx)
    area = cfg.delta ** 2 / 4
    rho0 = np.sqrt(cfg.G_t * cfg.G_r * area * cfg.wavelength ** 2 / (64 * np.pi ** 3))
    return float(rho0 / (np.linalg.norm(cfg.tx - p_ris) * np.linalg.norm(cfg.rx - p_ris)))


def delay_steering(tau, N_c: int, delta_f: float) -> np.ndarray:
    """``exp(-j 2 pi tau n delta_f)`` for ``n = 0..N_c-1``.

    A 1-D array of delays gives shape ``(N_c, len(tau))``.
    """
    n = np.arange(N_c)
    tau = np.asarray(tau, dtype=float)
    if tau.ndim == 0:
        return np.exp(-2j * np.pi * tau * delta_f * n)
    return np.exp(-2j * np.pi * delta_f * np.outer(n, tau))


def _ranges(pose: RisPose, cfg: SystemConfig):
    pm = element_positions(pose, cfg.delta, cfg.M)
    _check_distinct(pose.center, cfg.tx, cfg.rx)
    rt = np.linalg.norm(pm - cfg.tx, axis=1)
    rr = np.linalg.norm(pm - cfg.rx, axis=1)
    if np.any(rt == 0) or np.any(rr == 0):
        raise GeometryError("an RIS element coincides with an anchor")
    rt0 = np.linalg.norm(pose.center - cfg.tx)
    rr0 = np.linalg.norm(pose.center - cfg.rx)
    return pm, rt, rr, rt0, rr0


def nearfield_response(pose: RisPose, cfg: SystemConfig) -> np.ndarray:
    """Near-field RIS response ``b = a_t * a_r`` (length M)."""
    _, rt, rr, rt0, rr0 = _ranges(pose, cfg)
    k = 2 * np.pi / cfg.wavelength
    return np.exp(-1j * k * ((rt - rt0) + (rr - rr0)))


def nearfield_response_batch(centers: np.ndarray, alphas: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Near-field responses for many poses at once, shape ``(M, K)``.

    No degeneracy checks; callers keep candidates off the anchors.
    """
    centers = np.atleast_2d(centers)
    u = np.stack([np.cos(alphas), np.sin(alphas)], axis=-1)  # (K, 2)
    off = local_offsets(cfg.M, cfg.delta)
    pm = centers[None, :, :] + off[:, None, None] * u[None, :, :]  # (M, K, 2)
    rt = np.linalg.norm(pm - cfg.tx, axis=-1)
    rr = np.linalg.norm(pm - cfg.rx, axis=-1)
    rt0 = np.linalg.norm(centers - cfg.tx, axis=-1)
    rr0 = np.linalg.norm(centers - cfg.rx, axis=-1)
    k = 2 * np.pi / cfg.wavelength
    return np.exp(-1j * k * ((rt - rt0) + (rr - rr0)))


def ff_response(omega, M: int, delta: float, wavelength: float) -> np.ndarray:
    """Far-field RIS response with centered element index.

    A 1-D array of ``omega`` gives shape ``(M, len(omega))``.
    """
    off = local_offsets(M, delta)
    k = 2 * np.pi / wavelength
    omega = np.asarray(omega, dtype=float)
    if np.any(np.abs(omega) > 2.0 + 1e-12):
        raise ValueError("far-field spatial frequency must lie in [-2, 2]")
    if omega.ndim == 0:
        return np.exp(-1j * k * off * omega)
    return np.exp(-1j * k * np.outer(off, omega))


def random_profiles(M: int, T: int, seed) -> PhaseProfiles:
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, size=(M, T))
    return PhaseProfiles(np.exp(1j * theta), seed if isinstance(seed, (int, np.integer)) else None)


def mean_observation(cfg: SystemConfig, rho: float, phi: float, tau: float, pose: RisPose,
                     gamma: np.ndarray) -> np.ndarray:
    """Noiseless observation with every channel parameter given explicitly."""
    d = delay_steering(tau, cfg.N_c, cfg.delta_f)
    s = gamma.T @ nearfield_response(pose, cfg)
    return (rho * np.exp(1j * phi) * np.sqrt(cfg.P_t)) * np.outer(d, s)


def complex_noise(shape, variance: float, seed) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise with total variance ``variance``."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(shape + (2,)) if isinstance(shape, tuple) else rng.standard_normal((shape, 2))
    return np.sqrt(variance / 2) * (w[..., 0] + 1j * w[..., 1])


def synthesize_observation(cfg: SystemConfig, pose: RisPose, profiles: PhaseProfiles, phi: float,
                           noise_seed=None) -> Observation:
    """Observation for a given pose; noiseless when ``noise_seed`` is None."""
    rho = channel_amplitude(cfg, pose.center)
    tau = path_delay(cfg.tx, cfg.rx, pose.center, cfg.c)
    Y = mean_observation(cfg, rho, phi, tau, pose, profiles.gamma)
    if noise_seed is not None:
        Y = Y + complex_noise((cfg.N_c, cfg.T), cfg.noise_variance, noise_seed)
    truth = {"pose": pose, "gain": ChannelGain(rho, float(np.mod(phi, 2 * np.pi))), "tau": tau}
    return Observation(Y, profiles, truth)
