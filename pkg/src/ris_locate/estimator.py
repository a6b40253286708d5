"""Multi-stage RIS position/orientation estimator.

Stages: IFFT peak + fractional-delay search for the TOA, a far-field line
search for the spatial frequency ``omega``, an ellipse-constrained search
for the position parameter ``nu`` (orientation follows from ``omega``), and
a quasi-Newton refinement of the concentrated ML cost over ``(p_ris, alpha)``.

The complex gain is always eliminated in closed form, so every stage
reduces to maximizing ``|s^H q|^2 / ||s||^2`` for some candidate time
signature ``s = Gamma^T b``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import geometry as geo
from .geometry import GeometryError, RisPose
from .signal import (Observation, SystemConfig, delay_steering, ff_response, nearfield_response,
                     nearfield_response_batch)

log = logging.getLogger(__name__)


class EstimationError(RuntimeError):
    """A pipeline stage could not produce an estimate."""

    def __init__(self, stage: str, msg: str):
        super().__init__(f"[{stage}] {msg}")
        self.stage = stage


@dataclass(frozen=True)
class SearchSettings:
    delta_grid: int = 64
    omega_grid: int = 1024
    nu_grid: int = 720
    # local orientation search around the far-field value at each ellipse
    # point; the far-field omega is biased when the RIS is in the near field
    alpha_window: float = 0.05
    alpha_grid: int = 9
    refine_iters_1d: int = 40
    qn_max_iters: int = 200
    qn_grad_tol: float = 1e-9
    # "lsq": trust-region Gauss-Newton on the gain-eliminated residual,
    # "bfgs": BFGS on its squared norm
    refine_method: str = "lsq"
    # Observations are invariant under mirroring across the TX-RX baseline,
    # across its bisector, and under the half-turn about the ellipse center.
    # Requiring the reflecting face toward both anchors and fixing the side
    # of the baseline (-1 right of TX->RX, +1 left, 0 either) leaves one pose.
    front_only: bool = True
    side: int = -1
    # ellipse candidates handed to the quasi-Newton stage
    n_starts: int = 8

    def __post_init__(self):
        for name in ("delta_grid", "omega_grid", "nu_grid", "alpha_grid", "refine_iters_1d", "qn_max_iters"):
            if int(getattr(self, name)) < 2:
                raise ValueError(f"SearchSettings.{name} must be >= 2")
        if not self.qn_grad_tol > 0:
            raise ValueError("SearchSettings.qn_grad_tol must be > 0")
        if not self.alpha_window >= 0:
            raise ValueError("SearchSettings.alpha_window must be >= 0")
        if self.refine_method not in ("lsq", "bfgs"):
            raise ValueError("SearchSettings.refine_method must be 'lsq' or 'bfgs'")
        if self.side not in (-1, 0, 1):
            raise ValueError("SearchSettings.side must be -1, 0 or 1")
        if int(self.n_starts) < 1:
            raise ValueError("SearchSettings.n_starts must be >= 1")


@dataclass(frozen=True)
class ToaEstimate:
    k_coarse: int
    delta_fine: float
    tau_hat: float


@dataclass(eq=False)
class RisEstimate:
    toa: ToaEstimate
    omega_hat: float
    nu_hat: float
    initial_pose: RisPose
    refined_pose: RisPose
    g_r_hat: complex
    cost_trace: list = field(default_factory=list)
    converged: bool = True


def golden_section(f, a: float, b: float, iters: int) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    invphi = (np.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _grid_then_golden(f_batch, f, lo: float, hi: float, n: int, iters: int, endpoint=True):
    """Grid minimum (lowest index on ties) followed by golden refinement."""
    x = np.linspace(lo, hi, n, endpoint=endpoint)
    vals = f_batch(x)
    i = int(np.argmin(vals))
    step = x[1] - x[0]
    left, right = x[i] - step, x[i] + step
    if endpoint:
        left, right = max(left, lo), min(right, hi)
    xr, fr = golden_section(f, left, right, iters)
    return (xr, fr) if fr <= vals[i] else (x[i], vals[i])


def _fit_metric(S: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Energy captured by the LS gain for each candidate column of ``S``."""
    num = np.abs(S.conj().T @ q) ** 2
    den = np.sum(np.abs(S) ** 2, axis=0)
    return num / den


def _compensated_sum(Y: np.ndarray, tau: float, delta_f: float) -> np.ndarray:
    """Delay-compensated sum over subcarriers, ``Y^T d(tau)^*`` (length T)."""
    return Y.T @ delay_steering(tau, Y.shape[0], delta_f).conj()


def _ifft_rows(Y: np.ndarray, N_F: int) -> np.ndarray:
    return np.fft.ifft(Y, n=N_F, axis=0)


def coarse_toa(obs: Observation, cfg: SystemConfig) -> int:
    """IFFT bin with the largest energy across transmissions."""
    Z = _ifft_rows(obs.Y, cfg.N_F)
    return int(np.argmax(np.sum(np.abs(Z) ** 2, axis=1)))


def _row_energy(Y: np.ndarray, k: int, deltas, cfg: SystemConfig) -> np.ndarray:
    """Energy of IFFT row ``k`` after applying a fractional extra delay ``delta``."""
    n = np.arange(Y.shape[0])
    deltas = np.atleast_1d(deltas)
    # row k of IFFT_{N_F}(Y * d(delta)) = (1/N_F) sum_n Y[n] e^{-j2pi n df delta} e^{j2pi n k / N_F}
    phase = np.exp(-2j * np.pi * cfg.delta_f * np.outer(deltas, n) + 2j * np.pi * k * n / cfg.N_F)
    rows = phase @ Y / cfg.N_F
    return np.sum(np.abs(rows) ** 2, axis=1)


def refine_toa(obs: Observation, k_coarse: int, cfg: SystemConfig, s: SearchSettings = SearchSettings()) -> ToaEstimate:
    """Fractional-bin delay search below a reference IFFT bin.

    The argmax bin may sit on either side of the true delay; both ``k`` and
    ``k + 1`` are tried as reference and the better fit wins, so the
    subtracted fraction stays in ``[0, 1/(N_F delta_f)]``.
    """
    Y = obs.Y
    width = 1.0 / (cfg.N_F * cfg.delta_f)
    best = None
    for k in (k_coarse, k_coarse + 1):
        # search in bin units for a well-scaled golden section
        f_batch = lambda u, k=k: -_row_energy(Y, k, u * width, cfg)
        f = lambda u, k=k: float(-_row_energy(Y, k, u * width, cfg)[0])
        u, val = _grid_then_golden(f_batch, f, 0.0, 1.0, s.delta_grid, s.refine_iters_1d)
        if best is None or val < best[2]:
            best = (k, u, val)
    k, u, _ = best
    delta = u * width
    return ToaEstimate(int(k), float(delta), float(k * width - delta))


def omega_period(cfg: SystemConfig) -> float:
    """Aliasing period of the far-field response in ``omega``."""
    return cfg.wavelength / cfg.delta


def wrap_omega(omega: float, cfg: SystemConfig) -> float:
    """Map ``omega`` to the principal alias interval used by :func:`estimate_omega`."""
    period = omega_period(cfg)
    if period < 4.0:
        omega = (omega + period / 2) % period - period / 2
    return float(np.clip(omega, -2.0, 2.0))


def estimate_omega(obs: Observation, tau_hat: float, cfg: SystemConfig,
                   s: SearchSettings = SearchSettings()) -> tuple[float, complex]:
    """Far-field spatial-frequency estimate and the matching LS gain.

    The search covers ``[-2, 2]``; the result is reported in the principal
    alias interval of width :func:`omega_period` (when narrower than 4).
    """
    q = _compensated_sum(obs.Y, tau_hat, cfg.delta_f)
    gamma = obs.profiles.gamma

    def f_batch(w):
        return -_fit_metric(gamma.T @ ff_response(w, cfg.M, cfg.delta, cfg.wavelength), q)

    def f(w):
        return float(f_batch(np.array([w]))[0])

    w, _ = _grid_then_golden(f_batch, f, -2.0, 2.0, s.omega_grid, s.refine_iters_1d)
    w = wrap_omega(w, cfg)
    return w, ff_gain(obs, tau_hat, w, cfg)


def ff_gain(obs: Observation, tau_hat: float, omega: float, cfg: SystemConfig) -> complex:
    """Least-squares channel gain under the far-field model at ``omega``."""
    q = _compensated_sum(obs.Y, tau_hat, cfg.delta_f)
    sv = obs.profiles.gamma.T @ ff_response(omega, cfg.M, cfg.delta, cfg.wavelength)
    return complex(np.vdot(sv, q) / (cfg.N_c * np.sqrt(cfg.P_t) * np.vdot(sv, sv).real))


def omega_aliases(omega_hat: float, cfg: SystemConfig) -> list[float]:
    """All values in ``[-2, 2]`` indistinguishable from ``omega_hat`` under the far-field model."""
    period = omega_period(cfg)
    ks = np.arange(-int(np.ceil(4 / period)) - 1, int(np.ceil(4 / period)) + 2)
    out = [omega_hat + k * period for k in ks]
    return sorted(w for w in out if -2.0 - 1e-12 <= w <= 2.0 + 1e-12)


def baseline_side(points, cfg: SystemConfig) -> np.ndarray:
    """Sign of each point relative to the directed TX->RX line (+1 left, -1 right)."""
    pts = np.atleast_2d(points)
    base = cfg.rx - cfg.tx
    rel = pts - cfg.tx
    return np.sign(base[0] * rel[:, 1] - base[1] * rel[:, 0])


def _admissible(centers, alphas, cfg: SystemConfig, s: SearchSettings) -> np.ndarray:
    ok = np.isfinite(alphas)
    if s.front_only:
        ok[ok] = geo.anchors_in_front(cfg.tx, cfg.rx, centers[ok], alphas[ok])
    if s.side:
        ok &= baseline_side(centers, cfg) == s.side
    return ok


def golden_section_batch(f, a, b, iters: int):
    """Elementwise golden section; ``f`` maps an array of points to an array of costs."""
    invphi = (np.sqrt(5) - 1) / 2
    a, b = np.array(a, dtype=float), np.array(b, dtype=float)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc <= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        x_new = np.where(left, b - invphi * (b - a), a + invphi * (b - a))
        f_new = f(x_new)
        c, d = np.where(left, x_new, d), np.where(left, c, x_new)
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
    left = fc <= fd
    return np.where(left, c, d), np.where(left, fc, fd)


def _local_minima(vals: np.ndarray) -> np.ndarray:
    """Indices of finite local minima of a circular array."""
    left, right = np.roll(vals, 1), np.roll(vals, -1)
    idx = np.flatnonzero(np.isfinite(vals) & (vals <= left) & (vals <= right))
    return idx


class _EllipseProfile:
    """Data-fit cost along the TOA ellipse with the orientation tuned per point."""

    def __init__(self, obs: Observation, ellipse, cfg: SystemConfig, s: SearchSettings, q: np.ndarray):
        self.ellipse, self.cfg, self.s = ellipse, cfg, s
        self.gamma_t = obs.profiles.gamma.T
        self.q = q
        self.qq = np.vdot(q, q).real or 1.0

    def cost(self, pts: np.ndarray, alphas: np.ndarray) -> np.ndarray:
        """``1 - captured/||q||^2`` per candidate; inadmissible ones get ``inf``."""
        alphas = np.asarray(alphas, dtype=float)
        out = np.full(len(alphas), np.inf)
        ok = _admissible(pts, alphas, self.cfg, self.s)
        if np.any(ok):
            B = nearfield_response_batch(pts[ok], alphas[ok], self.cfg)
            out[ok] = 1.0 - _fit_metric(self.gamma_t @ B, self.q) / self.qq
        return out

    def __call__(self, nu, omega: float, branch: int):
        """``(points, alpha, cost)`` for each ``nu``."""
        nu = np.atleast_1d(np.asarray(nu, dtype=float))
        pts = np.atleast_2d(geo.ellipse_point(self.ellipse, nu))
        alpha0 = np.atleast_1d(-geo.alpha_from_nu_batch(nu, omega, self.ellipse, self.cfg.tx, self.cfg.rx, branch))
        s = self.s
        if s.alpha_window == 0:
            return pts, alpha0, self.cost(pts, alpha0)
        offs = np.linspace(-s.alpha_window, s.alpha_window, s.alpha_grid)
        A = alpha0[:, None] + offs[None, :]
        C = self.cost(np.repeat(pts, len(offs), axis=0), A.ravel()).reshape(A.shape)
        j = np.argmin(C, axis=1)
        rows = np.arange(len(nu))
        alpha, cost = A[rows, j], C[rows, j]
        live = np.isfinite(cost)
        if np.any(live):
            step = offs[1] - offs[0]
            f = lambda a: self.cost(pts[live], a)
            a_ref, c_ref = golden_section_batch(f, alpha[live] - step, alpha[live] + step, s.refine_iters_1d)
            better = c_ref < cost[live]
            alpha[np.flatnonzero(live)[better]] = a_ref[better]
            cost[np.flatnonzero(live)[better]] = c_ref[better]
        return pts, geo.wrap_angle(alpha), cost


def nu_candidates(obs: Observation, tau_hat: float, omega_hat: float, cfg: SystemConfig,
                  s: SearchSettings = SearchSettings(), count: int = 1) -> list[tuple[float, float, RisPose]]:
    """Best ``count`` ellipse candidates as ``(cost, nu, pose)``, best first.

    Both arcsin branches and every far-field alias of ``omega_hat`` seed the
    orientation; it is then tuned within ``s.alpha_window`` by the same
    near-field data-fit cost. Each grid local minimum is refined in ``nu``
    by golden section.
    """
    if not abs(omega_hat) <= 2.0 + geo.ARCSIN_CLAMP:
        raise EstimationError("nu", f"omega_hat={omega_hat:.6g} is outside [-2, 2]; no feasible orientation")
    try:
        ellipse = geo.ellipse_from_toa(cfg.tx, cfg.rx, tau_hat, cfg.c)
    except GeometryError as exc:
        raise EstimationError("nu", str(exc)) from exc
    profile = _EllipseProfile(obs, ellipse, cfg, s, _compensated_sum(obs.Y, tau_hat, cfg.delta_f))

    nu_grid = np.linspace(0.0, 2 * np.pi, s.nu_grid, endpoint=False)
    step = nu_grid[1] - nu_grid[0]
    seeds = []
    for omega in omega_aliases(omega_hat, cfg):
        for branch in (0, 1):
            _, _, vals = profile(nu_grid, omega, branch)
            seeds.extend((vals[i], i, omega, branch) for i in _local_minima(vals))
    if not seeds:
        raise EstimationError("nu", f"no feasible ellipse point for omega_hat={omega_hat:.6g}")
    seeds.sort(key=lambda t: (t[0], t[1], t[2], t[3]))
    out = []
    for val0, i, omega, branch in seeds[: max(count, 1)]:
        f = lambda v, o=omega, br=branch: float(profile(v, o, br)[2][0])
        nu, val = golden_section(f, nu_grid[i] - step, nu_grid[i] + step, s.refine_iters_1d)
        if not val <= val0:
            nu, val = nu_grid[i], val0
        nu = float(np.mod(nu, 2 * np.pi))
        pts, alpha, _ = profile(nu, omega, branch)
        out.append((float(val), nu, RisPose(pts[0], alpha[0])))
    out.sort(key=lambda t: t[0])
    return out


def estimate_nu(obs: Observation, tau_hat: float, omega_hat: float, cfg: SystemConfig,
                s: SearchSettings = SearchSettings()) -> tuple[float, RisPose]:
    """Ellipse-constrained line search; returns ``(nu_hat, initial_pose)``."""
    _, nu, pose = nu_candidates(obs, tau_hat, omega_hat, cfg, s, count=1)[0]
    return nu, pose


def ml_cost(obs: Observation, pose: RisPose, cfg: SystemConfig) -> tuple[float, complex]:
    """Concentrated ML residual ``||Y - g sqrt(P_t) d(tau) b^T Gamma||^2`` and its LS gain."""
    Y = obs.Y
    tau = geo.path_delay(cfg.tx, cfg.rx, pose.center, cfg.c)
    d = delay_steering(tau, cfg.N_c, cfg.delta_f)
    sv = obs.profiles.gamma.T @ nearfield_response(pose, cfg)
    proj = d.conj() @ Y @ sv.conj()
    energy = cfg.N_c * np.vdot(sv, sv).real
    g = proj / (energy * np.sqrt(cfg.P_t))
    resid = np.vdot(Y, Y).real - abs(proj) ** 2 / energy
    return float(max(resid, 0.0)), complex(g)


def _residual(obs: Observation, cfg: SystemConfig):
    """Gain-eliminated residual over ``x = (p_x, p_y, alpha)``, stacked real/imag, normalized by ``||Y||``.

    The residual is formed explicitly rather than as ``||Y||^2 - |proj|^2``
    so that near-zero costs keep full relative precision.
    """
    Y = obs.Y
    ynorm = np.linalg.norm(Y) or 1.0
    gamma_t = obs.profiles.gamma.T
    n = np.arange(cfg.N_c)

    def r(x):
        center = x[:2]
        rt, rr = np.linalg.norm(center - cfg.tx), np.linalg.norm(center - cfg.rx)
        if rt == 0 or rr == 0:
            return np.concatenate([Y.real.ravel(), Y.imag.ravel()]) / ynorm
        d = np.exp(-2j * np.pi * cfg.delta_f * (rt + rr) / cfg.c * n)
        sv = gamma_t @ nearfield_response_batch(center[None, :], np.array([x[2]]), cfg)[:, 0]
        gain = (d.conj() @ Y @ sv.conj()) / (cfg.N_c * np.vdot(sv, sv).real)
        res = (Y - gain * np.outer(d, sv)).ravel() / ynorm
        return np.concatenate([res.real, res.imag])

    return r


def _relative_cost(obs: Observation, cfg: SystemConfig):
    """Normalized concentrated cost ``||Y - g d s^T||^2 / ||Y||^2`` over ``(p_x, p_y, alpha)``."""
    r = _residual(obs, cfg)
    return lambda x: _sumsq(r(x))


def _sumsq(v: np.ndarray) -> float:
    return float(np.dot(v, v))


def central_gradient(f, x: np.ndarray, rel_step: float = 1e-7) -> np.ndarray:
    """Central-difference gradient with a step scaled to each coordinate's magnitude."""
    g = np.empty_like(x)
    for i in range(len(x)):
        h = rel_step * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def refine_ml(obs: Observation, initial_pose: RisPose, cfg: SystemConfig,
              s: SearchSettings = SearchSettings()) -> tuple[RisPose, complex, float, bool]:
    """Local refinement of the concentrated ML cost over ``(p_ris, alpha)``.

    Trust-region least squares on the residual by default; BFGS on the cost with
    ``s.refine_method == "bfgs"``. Returns ``(pose, g_r, residual,
    converged)``; the initial pose is kept if the refinement does not lower
    the cost or leaves the admissible half-planes.
    """
    r = _residual(obs, cfg)
    f = lambda x: _sumsq(r(x))
    x0 = initial_pose.as_array()
    f0 = f(x0)
    # positions in wavelengths keep the problem reasonably scaled
    scale = np.array([cfg.wavelength, cfg.wavelength, 1.0])
    if s.refine_method == "lsq":
        # central-difference Jacobian: forward differences stall ~1e-7 m short
        # of the optimum along the weakly curved ellipse valley
        res = optimize.least_squares(lambda z: r(x0 + z * scale), np.zeros(3), method="trf", jac="3-point",
                                     x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=s.qn_grad_tol,
                                     max_nfev=s.qn_max_iters)
        z, fz_end, converged = res.x, 2 * res.cost, bool(res.status > 0)
    else:
        fz = lambda z: f(x0 + z * scale)
        res = optimize.minimize(fz, np.zeros(3), method="BFGS", jac=lambda z: central_gradient(fz, z),
                                options={"maxiter": s.qn_max_iters, "gtol": s.qn_grad_tol})
        z, fz_end, converged = res.x, res.fun, bool(res.success)
    x = x0 + z * scale
    if fz_end <= f0 and _admissible(x[None, :2], x[2:3], cfg, s)[0]:
        pose = RisPose.from_array(x)
    else:
        pose = initial_pose
    resid, g = ml_cost(obs, pose, cfg)
    return pose, g, resid, converged


def estimate_pipeline(obs: Observation, cfg: SystemConfig, s: SearchSettings = SearchSettings()) -> RisEstimate:
    """Run all stages; the refined pose is the best of ``s.n_starts`` refinements."""
    trace = []
    k = coarse_toa(obs, cfg)
    toa = refine_toa(obs, k, cfg, s)
    trace.append(("toa", toa.tau_hat))
    try:
        omega, _ = estimate_omega(obs, toa.tau_hat, cfg, s)
    except (GeometryError, FloatingPointError) as exc:
        raise EstimationError("omega", str(exc)) from exc
    trace.append(("omega", omega))
    starts = nu_candidates(obs, toa.tau_hat, omega, cfg, s, count=s.n_starts)
    _, nu, initial = starts[0]
    trace.append(("nu", ml_cost(obs, initial, cfg)[0]))
    best = None
    for _, _, start_pose in starts:
        refined, g, resid, converged = refine_ml(obs, start_pose, cfg, s)
        if best is None or resid < best[2]:
            best = (refined, g, resid, converged)
    refined, g, resid, converged = best
    trace.append(("refine", resid))
    if not converged:
        log.debug("quasi-Newton stopped before reaching the gradient tolerance")
    return RisEstimate(toa, omega, nu, initial, refined, g, trace, converged)
