"""Planar geometry for a linear RIS observed by a fixed TX/RX pair.

Vectors are numpy arrays of shape ``(2,)`` in meters; angles are radians
wrapped to ``(-pi, pi]``. The RIS local array axis is the rotated x-axis and
boresight angles are measured from +y (``atan2(y, x) - pi/2``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Degenerate geometry (RIS on an anchor, infeasible TOA, ...)."""


def wrap_angle(a):
    """Wrap angle(s) to ``(-pi, pi]``."""
    w = np.mod(-np.asarray(a, dtype=float) + np.pi, 2 * np.pi)
    w = np.pi - w
    if np.ndim(w) == 0:
        return float(w)
    return w


def _vec(p) -> np.ndarray:
    v = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"non-finite position {p!r}")
    return v


@dataclass(eq=False)
class RisPose:
    """RIS center position and orientation (the unknowns)."""

    center: np.ndarray
    alpha: float

    def __post_init__(self):
        self.center = _vec(self.center)
        self.alpha = wrap_angle(float(self.alpha))

    def as_array(self) -> np.ndarray:
        return np.array([self.center[0], self.center[1], self.alpha])

    @classmethod
    def from_array(cls, x) -> "RisPose":
        return cls(np.asarray(x[:2], dtype=float), float(x[2]))

    def __repr__(self):
        return f"RisPose(center=[{self.center[0]:.9g}, {self.center[1]:.9g}], alpha={self.alpha:.9g})"


@dataclass(frozen=True)
class EllipseParam:
    """TOA ellipse with the anchors as foci."""

    center: np.ndarray = field(repr=False)
    beta: float
    semi_major: float
    semi_minor: float


def rotation_matrix(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


def rotation_matrix_derivative(alpha: float) -> np.ndarray:
    """d/d(alpha) of :func:`rotation_matrix`."""
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[-s, -c], [c, -s]])


def local_offsets(M: int, delta: float) -> np.ndarray:
    """Signed element offsets ``(m - (M-1)/2) * delta`` along the array axis."""
    return (np.arange(M) - (M - 1) / 2.0) * delta


def element_positions(pose: RisPose, delta: float, M: int) -> np.ndarray:
    """Global element positions, shape ``(M, 2)``."""
    if M < 1 or delta <= 0:
        raise ValueError("need M >= 1 and delta > 0")
    u = rotation_matrix(pose.alpha)[:, 0]
    return pose.center[None, :] + local_offsets(M, delta)[:, None] * u[None, :]


def _check_distinct(p_ris, *anchors):
    for a in anchors:
        if np.linalg.norm(p_ris - a) == 0.0:
            raise GeometryError("RIS position coincides with an anchor")


def path_delay(p_tx, p_rx, p_ris, c: float = 3e8) -> float:
    """Bistatic TX -> RIS -> RX delay in seconds."""
    p_tx, p_rx, p_ris = _vec(p_tx), _vec(p_rx), _vec(p_ris)
    _check_distinct(p_ris, p_tx, p_rx)
    return (np.linalg.norm(p_tx - p_ris) + np.linalg.norm(p_rx - p_ris)) / c


def anchor_angles(p_tx, p_rx, p_ris) -> tuple[float, float]:
    """Boresight angles of TX and RX seen from the RIS center at zero orientation."""
    p_tx, p_rx, p_ris = _vec(p_tx), _vec(p_rx), _vec(p_ris)
    _check_distinct(p_ris, p_tx, p_rx)
    nt = p_tx - p_ris
    nr = p_rx - p_ris
    theta_tx = wrap_angle(np.arctan2(nt[1], nt[0]) - np.pi / 2)
    theta_rx = wrap_angle(np.arctan2(nr[1], nr[0]) - np.pi / 2)
    return theta_tx, theta_rx


def omega_of(theta_tx, theta_rx, alpha):
    """Far-field spatial frequency ``sin(theta_tx + alpha) + sin(theta_rx + alpha)``."""
    return np.sin(theta_tx + alpha) + np.sin(theta_rx + alpha)


def pose_omega(p_tx, p_rx, pose: RisPose) -> float:
    """Spatial frequency of the far-field response seen by a pose.

    ``omega_of`` measures orientation clockwise while element placement
    rotates counter-clockwise, hence the sign flip on ``alpha``.
    """
    th_tx, th_rx = anchor_angles(p_tx, p_rx, pose.center)
    return float(omega_of(th_tx, th_rx, -pose.alpha))


def anchors_in_front(p_tx, p_rx, centers, alphas) -> np.ndarray:
    """True where both anchors lie on the reflecting side of the surface.

    The surface normal is ``R_alpha [0, 1]^T``. Mirroring a pose across the
    TX-RX baseline or its perpendicular bisector leaves every element-anchor
    distance unchanged but moves the anchors behind the surface, so this
    test removes both exact ambiguities.
    """
    p_tx, p_rx = _vec(p_tx), _vec(p_rx)
    centers = np.atleast_2d(centers)
    alphas = np.atleast_1d(alphas)
    normal = np.stack([-np.sin(alphas), np.cos(alphas)], axis=-1)
    front_tx = np.sum((p_tx - centers) * normal, axis=-1) > 0
    front_rx = np.sum((p_rx - centers) * normal, axis=-1) > 0
    return front_tx & front_rx


def ellipse_from_toa(p_tx, p_rx, tau_hat: float, c: float = 3e8) -> EllipseParam:
    p_tx, p_rx = _vec(p_tx), _vec(p_rx)
    ce = (p_tx + p_rx) / 2
    a = c * tau_hat / 2
    focal = np.linalg.norm(p_tx - ce)
    if not a > focal:
        raise GeometryError(
            f"infeasible TOA: c*tau = {2 * a:.6g} m does not exceed anchor separation {2 * focal:.6g} m"
        )
    d = p_rx - p_tx
    beta = float(np.arctan2(d[1], d[0])) if focal > 0 else 0.0
    return EllipseParam(ce, beta, float(a), float(np.sqrt(a * a - focal * focal)))


def ellipse_point(e: EllipseParam, nu):
    """Point(s) on the ellipse at parameter ``nu``; shape ``(2,)`` or ``(len(nu), 2)``."""
    nu = np.asarray(nu, dtype=float)
    local = np.stack([e.semi_major * np.cos(nu), e.semi_minor * np.sin(nu)], axis=-1)
    return local @ rotation_matrix(e.beta).T + e.center


def ellipse_nu(e: EllipseParam, p) -> float:
    """Parameter of the ellipse point closest in angle to ``p`` (exact for points on it)."""
    q = rotation_matrix(e.beta).T @ (_vec(p) - e.center)
    return float(np.arctan2(q[1] / e.semi_minor, q[0] / e.semi_major))


ARCSIN_CLAMP = 1e-12


def alpha_from_nu_batch(nu, omega_hat, e: EllipseParam, p_tx, p_rx, branch: int = 0):
    """Vectorized orientation along the ellipse; NaN where infeasible.

    ``branch=0`` is the principal arcsin branch, ``branch=1`` the
    supplementary one (``pi - arcsin``).
    """
    p_tx, p_rx = _vec(p_tx), _vec(p_rx)
    pts = np.atleast_2d(ellipse_point(e, nu))
    nt = p_tx[None, :] - pts
    nr = p_rx[None, :] - pts
    th_tx = np.arctan2(nt[:, 1], nt[:, 0]) - np.pi / 2
    th_rx = np.arctan2(nr[:, 1], nr[:, 0]) - np.pi / 2
    plus = (th_tx + th_rx) / 2
    minus = (th_tx - th_rx) / 2
    cm = np.cos(minus)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = omega_hat / (2 * cm)
    bad = ~np.isfinite(arg) | (np.abs(arg) > 1 + ARCSIN_CLAMP) | (cm == 0)
    arg = np.clip(np.where(bad, 0.0, arg), -1.0, 1.0)
    s = np.arcsin(arg)
    if branch:
        s = np.pi - s
    alpha = wrap_angle(s - plus)
    alpha = np.where(bad, np.nan, alpha)
    return alpha.reshape(np.shape(nu))


def alpha_from_nu(nu: float, omega_hat: float, e: EllipseParam, p_tx, p_rx, branch: int = 0):
    """Orientation consistent with ``omega_hat`` at ellipse parameter ``nu``.

    Uses the clockwise convention of :func:`omega_of`; the matching
    :class:`RisPose` orientation is the negated value.

    Returns ``None`` when the arcsin argument leaves ``[-1, 1]`` beyond the
    clamp band.
    """
    a = float(alpha_from_nu_batch(np.asarray(nu, dtype=float), omega_hat, e, p_tx, p_rx, branch))
    return None if np.isnan(a) else a


def fraunhofer_distance(M: int, delta: float, wavelength: float) -> float:
    return 2.0 * (M * delta) ** 2 / wavelength
