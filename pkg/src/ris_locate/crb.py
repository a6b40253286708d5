"""Fisher information and Cramer-Rao bounds for RIS position/orientation.

Channel parameters ``eta = [rho, phi, tau, p_x, p_y, alpha]`` are mapped to
geometry parameters ``zeta = [rho, phi, p_x, p_y, alpha]`` through the
Jacobian of ``tau(p_ris)``.

Every derivative of the rank-one mean ``mu = g sqrt(P_t) d(tau) s^T`` is
itself rank one, ``u_l v_l^T`` with ``u_l`` over subcarriers and ``v_l``
over transmissions, so the FIM sum over ``(t, n_c)`` factorizes into a
product of two short inner products and the ``N_c x T`` derivative planes
are never formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, RisPose, _check_distinct, _vec
from .signal import PhaseProfiles, SystemConfig, channel_amplitude, path_delay

ETA_NAMES = ("rho", "phi", "tau", "p_x", "p_y", "alpha")
ZETA_NAMES = ("rho", "phi", "p_x", "p_y", "alpha")
COND_LIMIT = 1e12


class SingularFimError(np.linalg.LinAlgError):
    def __init__(self, msg, condition):
        super().__init__(f"{msg} (condition number ~ {condition:.3g})")
        self.condition = condition


@dataclass(eq=False)
class EtaParams:
    rho: float
    phi: float
    tau: float
    p_ris: np.ndarray
    alpha: float

    def __post_init__(self):
        self.p_ris = _vec(self.p_ris)

    def as_array(self) -> np.ndarray:
        return np.array([self.rho, self.phi, self.tau, self.p_ris[0], self.p_ris[1], self.alpha])

    @classmethod
    def from_array(cls, x) -> "EtaParams":
        return cls(x[0], x[1], x[2], x[3:5], x[5])

    @classmethod
    def from_geometry(cls, cfg: SystemConfig, pose: RisPose, phi: float = 0.0) -> "EtaParams":
        """Channel parameters implied by a pose (amplitude and delay from geometry)."""
        return cls(channel_amplitude(cfg, pose.center), phi,
                   path_delay(cfg.tx, cfg.rx, pose.center, cfg.c), pose.center, pose.alpha)

    @property
    def pose(self) -> RisPose:
        return RisPose(self.p_ris, self.alpha)


@dataclass(eq=False)
class CrbReport:
    J_eta: np.ndarray
    J_zeta: np.ndarray
    teb: float
    peb: float
    oeb: float
    # equilibrated condition numbers; TEB is guarded by the first, PEB/OEB by the second
    condition_eta: float = float("nan")
    condition: float = float("nan")


# Bounds are assembled in extended precision: far from the anchors the
# zeta-FIM has condition numbers near 1e11 (a tangential move plus a rotation
# that keeps the far-field frequency is only seen through wavefront
# curvature), so double rounding in J alone costs ~1e-5 relative in the PEB.
EXT = np.longdouble


def _pi(real):
    return real(4) * np.arctan(real(1))


def response_derivatives(eta: EtaParams, cfg: SystemConfig, real=np.float64):
    """``b``, ``db/dp`` (M x 2) and ``db/dalpha`` (M,) of the near-field response."""
    pose = eta.pose
    _check_distinct(pose.center, cfg.tx, cfg.rx)
    center = pose.center.astype(real)
    tx, rx = cfg.tx.astype(real), cfg.rx.astype(real)
    al = real(pose.alpha)
    off = (np.arange(cfg.M, dtype=real) - real(cfg.M - 1) / real(2)) * real(cfg.delta)
    u = np.array([np.cos(al), np.sin(al)], dtype=real)
    pm = center[None, :] + off[:, None] * u[None, :]
    rt = np.sqrt(np.sum((pm - tx) ** 2, axis=1))
    rr = np.sqrt(np.sum((pm - rx) ** 2, axis=1))
    if np.any(rt == 0) or np.any(rr == 0):
        raise GeometryError("an RIS element coincides with an anchor")
    rt0 = np.sqrt(np.sum((center - tx) ** 2))
    rr0 = np.sqrt(np.sum((center - rx) ** 2))
    k = real(2) * _pi(real) / real(cfg.wavelength)
    j = np.array(1j, dtype=np.result_type(real, np.complex64))
    b = np.exp(-j * k * ((rt - rt0) + (rr - rr0)))
    kt_m = (pm - tx) / rt[:, None]
    kr_m = (pm - rx) / rr[:, None]
    kt_o = (center - tx) / rt0
    kr_o = (center - rx) / rr0
    E = -j * k * (kt_m + kr_m - kt_o - kr_o) * b[:, None]
    # d p_m / d alpha = R'_alpha [offset_m, 0]^T
    dpm = off[:, None] * np.array([-np.sin(al), np.cos(al)], dtype=real)[None, :]
    psi = np.sum(kt_m * dpm, axis=1) + np.sum(kr_m * dpm, axis=1)
    v = -j * k * psi * b
    return b, E, v


def _factors(cfg: SystemConfig, eta: EtaParams, gamma: np.ndarray, real=np.float64):
    """Per-parameter (subcarrier, time) factors of the mean derivatives."""
    b, E, v = response_derivatives(eta, cfg, real)
    cplx = b.dtype
    two_pi = real(2) * _pi(real)
    n = np.arange(cfg.N_c, dtype=real)
    j = np.array(1j, dtype=cplx)
    d = np.exp(-j * two_pi * real(eta.tau) * real(cfg.delta_f) * n)
    dd = -j * two_pi * real(cfg.delta_f) * n * d
    rot = np.exp(j * real(eta.phi))
    amp = np.sqrt(real(cfg.P_t))
    g = real(eta.rho) * rot * amp
    gt = gamma.T.astype(cplx)
    s = gt @ b
    U = np.stack([d, d, dd, d, d, d])
    V = np.stack([
        rot * amp * s,
        j * g * s,
        g * s,
        g * (gt @ E[:, 0]),
        g * (gt @ E[:, 1]),
        g * (gt @ v),
    ])
    return U, V


def mu_derivatives(cfg: SystemConfig, eta: EtaParams, profiles: PhaseProfiles) -> np.ndarray:
    """Derivatives of the mean w.r.t. eta, shape ``(6, T*N_c)``.

    Column ``t*N_c + n`` holds ``d mu[n, t] / d eta``, i.e. each row is the
    transposed ``N_c x T`` plane flattened row-major.
    """
    U, V = _factors(cfg, eta, profiles.gamma)
    return (V[:, :, None] * U[:, None, :]).reshape(6, -1)


def fim_from_derivatives(D: np.ndarray, noise_variance: float) -> np.ndarray:
    """Direct ``(2/sigma^2) Re{D D^H}`` for a derivative matrix with one row per parameter."""
    return (2.0 / noise_variance) * np.real(D @ D.conj().T)


def fim_eta(cfg: SystemConfig, eta: EtaParams, profiles: PhaseProfiles, real=np.float64) -> np.ndarray:
    """``(2/sigma^2) sum_{t,n} Re{dmu dmu^H}`` from the rank-one factors, in dtype ``real``."""
    U, V = _factors(cfg, eta, profiles.gamma, real)
    J = (real(2) / real(cfg.noise_variance)) * np.real((U @ U.conj().T) * (V @ V.conj().T))
    return (J + J.T) / 2


def jacobian_T(p_ris, p_tx, p_rx, c: float = 3e8, real=np.float64) -> np.ndarray:
    p_ris, p_tx, p_rx = _vec(p_ris), _vec(p_tx), _vec(p_rx)
    _check_distinct(p_ris, p_tx, p_rx)
    p_ris, p_tx, p_rx = p_ris.astype(real), p_tx.astype(real), p_rx.astype(real)
    d_tx = (p_ris - p_tx) / np.sqrt(np.sum((p_ris - p_tx) ** 2))
    d_rx = (p_ris - p_rx) / np.sqrt(np.sum((p_ris - p_rx) ** 2))
    T = np.zeros((6, 5), dtype=real)
    T[0, 0] = T[1, 1] = 1.0
    T[2, 2:4] = (d_tx + d_rx) / real(c)
    T[3, 2] = T[4, 3] = 1.0
    T[5, 4] = 1.0
    return T


def fim_zeta(J_eta: np.ndarray, T: np.ndarray) -> np.ndarray:
    J = T.T @ J_eta @ T
    return (J + J.T) / 2


def _cholesky_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse of a small SPD matrix through its Cholesky factor, in ``A``'s dtype.

    numpy.linalg has no extended-precision path, hence the hand-rolled
    factorization for these 5x5 / 6x6 systems.
    """
    n = len(A)
    L = np.zeros_like(A)
    for i in range(n):
        for k in range(i + 1):
            acc = A[i, k] - np.dot(L[i, :k], L[k, :k])
            if i == k:
                if not acc > 0:
                    raise np.linalg.LinAlgError("matrix is not positive definite")
                L[i, i] = np.sqrt(acc)
            else:
                L[i, k] = acc / L[k, k]
    Linv = np.zeros_like(A)
    for i in range(n):
        Linv[i, i] = 1 / L[i, i]
        for k in range(i):
            Linv[i, k] = -np.dot(L[i, k:i], Linv[k:i, k]) / L[i, i]
    return Linv.T @ Linv


def _scaled_inverse(J: np.ndarray):
    """Inverse of a PSD matrix after diagonal equilibration, plus its condition number."""
    dg = np.diag(J).copy()
    if np.any(~np.isfinite(J)) or np.any(dg <= 0):
        raise SingularFimError("FIM has a non-positive diagonal entry", np.inf)
    s = 1 / np.sqrt(dg)
    Js = J * s[:, None] * s[None, :]
    w = np.linalg.eigvalsh(Js.astype(np.float64))
    cond = np.inf if w[0] <= 0 else float(w[-1] / w[0])
    if not cond < COND_LIMIT:
        raise SingularFimError("FIM is numerically singular", cond)
    try:
        inv = _cholesky_inverse(Js)
    except np.linalg.LinAlgError:
        raise SingularFimError("FIM is not positive definite", cond) from None
    return inv * s[:, None] * s[None, :], cond


def _teb(J_eta: np.ndarray) -> tuple[float, float]:
    inv, cond = _scaled_inverse(J_eta)
    return float(np.sqrt(inv[2, 2])), cond


def _peb_oeb(J_zeta: np.ndarray) -> tuple[float, float, float]:
    inv, cond = _scaled_inverse(J_zeta)
    return float(np.sqrt(np.trace(inv[2:4, 2:4]))), float(np.sqrt(inv[4, 4])), cond


def bounds(J_eta: np.ndarray, J_zeta: np.ndarray) -> tuple[float, float, float]:
    """``(TEB, PEB, OEB)``; raises :class:`SingularFimError` on an ill-conditioned FIM."""
    teb, _ = _teb(J_eta)
    peb, oeb, _ = _peb_oeb(J_zeta)
    return teb, peb, oeb


def compute_crb(cfg: SystemConfig, pose: RisPose, profiles: PhaseProfiles, phi: float = 0.0) -> CrbReport:
    """Bounds at a pose; a singular FIM gives infinite bounds instead of raising.

    Far from the anchors ``J_eta`` is nearly rank deficient (the far-field
    response only sees one combination of position and orientation) while
    ``J_zeta`` stays well conditioned thanks to the delay, so each bound is
    guarded only by the matrix it is read from.
    """
    eta = EtaParams.from_geometry(cfg, pose, phi)
    J_eta = fim_eta(cfg, eta, profiles, EXT)
    J_zeta = fim_zeta(J_eta, jacobian_T(pose.center, cfg.tx, cfg.rx, cfg.c, EXT))
    try:
        teb, cond_eta = _teb(J_eta)
    except SingularFimError as exc:
        teb, cond_eta = np.inf, exc.condition
    try:
        peb, oeb, cond = _peb_oeb(J_zeta)
    except SingularFimError as exc:
        peb, oeb, cond = np.inf, np.inf, exc.condition
    return CrbReport(J_eta.astype(np.float64), J_zeta.astype(np.float64), float(teb), float(peb), float(oeb),
                     cond_eta, cond)
