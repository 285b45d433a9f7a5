"""Geometry of the boundary near the apparent contour Gamma = {n_3 = 0}.

Gamma is sampled uniformly in arc length ``s in [0, 2L)``, pushed along the
boundary's geodesic flow to get the chart ``(r, s) -> gamma(r, s)``, and the
transverse data (``phi``, ``beta``, ``kappa_g``, ``E``, ``K``) are read off the
chart.  Derivatives in ``s`` are spectral (the data are periodic and smooth),
derivatives in ``r`` and ``t`` are fourth-order finite differences.

Orientation: ``(dr_gamma, ds_gamma, n)`` is direct and ``n_3 > 0`` for
``r < 0``, so that ``beta = -d_r n_3`` is positive on a convex body.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import NumericalError
from .surfaces import E3, Surface

STEPS_PER_UNIT_R = 400
DEFAULT_SAMPLES = 256
DEFAULT_R_STEP = 2.5e-3
DEFAULT_T_STEP = 1e-4


class PeriodicSeries:
    """Trigonometric interpolant of uniformly sampled periodic data.

    ``samples`` has the periodic axis first; trailing axes are carried along.
    """

    def __init__(self, samples, period: float):
        self.values = np.asarray(samples, dtype=float)
        self.n = self.values.shape[0]
        self.period = float(period)
        self.coef = np.fft.fft(self.values, axis=0) / self.n
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        self.omega = 2 * math.pi * k / self.period
        self.nyquist = self.n // 2 if self.n % 2 == 0 else None

    def _shape(self, arr):
        return arr.reshape((-1,) + (1,) * (self.values.ndim - 1))

    def __call__(self, s, deriv: int = 0):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        factor = (1j * self.omega) ** deriv
        if self.nyquist is not None:
            factor[self.nyquist] = 0.0
        phase = np.exp(1j * np.outer(s, self.omega))
        out = np.tensordot(phase * factor, self.coef, axes=(1, 0)).real
        if self.nyquist is not None:
            w = abs(self.omega[self.nyquist])
            ny = np.cos(w * s + deriv * math.pi / 2) * w**deriv
            out = out + self._shape(ny) * self.coef[self.nyquist].real
        return out

    def derivative_samples(self, deriv: int = 1):
        factor = (1j * self.omega) ** deriv
        if self.nyquist is not None and deriv % 2:
            factor[self.nyquist] = 0.0
        return np.fft.ifft(self._shape(factor) * self.coef * self.n, axis=0).real

    def resample(self, m: int):
        """Values on a uniform grid of ``m`` points (zero-padding)."""
        return self(np.arange(m) * self.period / m)

    def antiderivative(self, s):
        """``int_0^s`` of the series (mean part included)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        k = self.omega.copy()
        k[0] = 1.0
        c = self.coef / self._shape(1j * k)
        c[0] = 0.0
        if self.nyquist is not None:
            c[self.nyquist] = 0.0
        phase = np.exp(1j * np.outer(s, self.omega)) - 1.0
        out = np.tensordot(phase, c, axes=(1, 0)).real
        return out + self._shape(s) * self.coef[0].real


def _fd_center(values, step, axis=0):
    """Fourth-order central first derivative at the middle of a 5-point stencil axis."""
    v = np.moveaxis(np.asarray(values), axis, 0)
    mid = v.shape[0] // 2
    if mid < 2:
        raise NumericalError("stencil underflow: need two samples on each side of r = 0")
    return (-v[mid + 2] + 8 * v[mid + 1] - 8 * v[mid - 1] + v[mid - 2]) / (12 * step)


@dataclass
class ArcLength:
    total: float
    theta: np.ndarray
    closure_gap: float


def arclength_samples(curve, num_samples: int, oversample: int = 2048) -> ArcLength:
    """Parameter values that split a closed curve into equal arc-length pieces.

    The speed is integrated spectrally on ``oversample`` points, refined until
    the length changes by less than 1e-13 relative.
    """
    m = max(oversample, 8 * num_samples)
    prev = None
    for _ in range(6):
        th = 2 * math.pi * np.arange(m) / m
        speed = np.linalg.norm(curve(th)[1], axis=-1)
        series = PeriodicSeries(speed, 2 * math.pi)
        total = 2 * math.pi * series.coef[0].real
        if prev is not None and abs(total - prev) < 1e-13 * total:
            break
        prev, m = total, 2 * m
    else:
        raise NumericalError("arc length did not converge")

    targets = total * np.arange(num_samples + 1) / num_samples
    theta = 2 * math.pi * targets / total
    for _ in range(50):
        resid = series.antiderivative(theta) - targets
        theta = theta - resid / np.linalg.norm(curve(theta)[1], axis=-1)
        if np.max(np.abs(resid)) < 1e-14 * total:
            break
    else:
        raise NumericalError("arc-length inversion did not converge")
    x_end, _ = curve(theta[-1:])
    x_start, _ = curve(theta[:1])
    gap = float(np.linalg.norm(x_end - x_start))
    return ArcLength(float(total), theta[:-1], gap)


@dataclass
class GammaFrame:
    """Per-sample geometric data along Gamma (arrays indexed by sample)."""

    s: np.ndarray
    half_length: float
    gamma: np.ndarray
    dr_gamma: np.ndarray
    ds_gamma: np.ndarray
    normal: np.ndarray
    phi: np.ndarray
    theta: np.ndarray = field(repr=False)
    closure_gap: float = 0.0
    beta: Optional[np.ndarray] = None
    beta_fd: Optional[np.ndarray] = field(default=None, repr=False)
    kappa_g: Optional[np.ndarray] = None
    kappa_g_frenet: Optional[np.ndarray] = field(default=None, repr=False)
    alpha0: Optional[float] = None
    E: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    surface: Optional[Surface] = field(default=None, repr=False)

    @property
    def num_samples(self) -> int:
        return self.s.size

    @property
    def period(self) -> float:
        return 2.0 * self.half_length

    @property
    def complete(self) -> bool:
        return self.beta is not None and self.K is not None

    def series(self, name: str) -> PeriodicSeries:
        values = getattr(self, name)
        if values is None:
            raise ValueError(f"frame has no {name!r} yet")
        return PeriodicSeries(values, self.period)

    def with_constants(self, alpha0) -> "GammaFrame":
        """Attach ``alpha0`` (float or ModelConstants) and fill ``E`` and ``K``."""
        if self.beta is None:
            raise ValueError("frame is partial; build it with gamma_frame()")
        alpha0 = float(getattr(alpha0, "alpha0", alpha0))
        energy = alpha0 * np.sin(self.phi) ** 2 + np.cos(self.phi) ** 2
        k = alpha0 ** (1 / 3) * np.abs(self.beta) ** (2 / 3) * energy ** (1 / 3)
        return replace(self, alpha0=alpha0, E=energy, K=k)

    def rows(self):
        cols = ("s", "phi", "beta", "kappa_g", "E", "K")
        data = [getattr(self, c) for c in cols]
        return cols, np.column_stack(data)


def _orientation_beta(surface: Surface, x, dr):
    return -(surface.shape_operator(x) @ dr[..., None])[..., 2, 0]


def _check_single_contour(surface: Surface, n: int = 48):
    """On a z-symmetric body, Gamma is exactly the equator iff sign(n_3) = sign(z) elsewhere."""
    th = np.linspace(0.05, math.pi / 2 - 0.05, n)
    ph = 2 * math.pi * np.arange(2 * n) / (2 * n)
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    omega = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1)
    x = surface.radial(omega)[..., None] * omega
    if np.any(surface.normal(x)[..., 2] <= 0):
        raise ValueError("Gamma is not a single closed curve (n_3 vanishes off the equator)")


def extract_gamma(surface: Surface, num_samples: int = DEFAULT_SAMPLES) -> GammaFrame:
    """Trace Gamma and sample it uniformly in arc length (positions, tangents, normal, phi)."""
    if num_samples < 16:
        raise ValueError("num_samples must be >= 16")
    curve = surface.contour_curve()
    if curve is None:
        raise ValueError("general Gamma tracing unsupported: surface is not z-symmetric")
    if surface.z_symmetric:
        _check_single_contour(surface)

    arc = arclength_samples(curve, num_samples)
    x, dx = curve(arc.theta)
    tangent = dx / np.linalg.norm(dx, axis=-1, keepdims=True)
    normal = surface.normal(x)
    if np.max(np.abs(normal[:, 2])) > 1e-8:
        raise NumericalError("traced curve does not lie on {n_3 = 0}")
    dr = np.cross(tangent, normal)
    theta = arc.theta
    if np.mean(_orientation_beta(surface, x, dr)) < 0:
        idx = (-np.arange(num_samples)) % num_samples
        x, tangent, normal, theta = x[idx], -tangent[idx], normal[idx], theta[idx]
        dr = np.cross(tangent, normal)

    s = arc.total * np.arange(num_samples) / num_samples
    phi = np.arctan2(tangent[:, 2], dr[:, 2])
    # report phi in (-pi, pi]: a signed zero in the tangent must not flip pi to -pi
    phi = np.where(phi <= -math.pi + 1e-12, math.pi, phi)
    return GammaFrame(s=s, half_length=0.5 * arc.total, gamma=x, dr_gamma=dr, ds_gamma=tangent,
                      normal=normal, phi=phi, theta=theta, closure_gap=arc.closure_gap,
                      surface=surface)


@dataclass
class GeodesicChart:
    """``gamma(r, s)`` on a symmetric r-grid times the frame's s-grid.

    Arrays are shaped ``(len(r_grid), len(s_grid), ...)``.
    """

    surface: Surface
    r_grid: np.ndarray
    s_grid: np.ndarray
    half_length: float
    gamma_rs: np.ndarray
    dr_gamma: np.ndarray
    ds_gamma: np.ndarray
    alpha: np.ndarray
    normal: np.ndarray
    b_frame: np.ndarray
    drift: float = 0.0

    @property
    def r_step(self) -> float:
        return float(self.r_grid[1] - self.r_grid[0])

    @property
    def center(self) -> int:
        return self.r_grid.size // 2

    def d_dr0(self, values):
        """d/dr at r = 0 of a chart quantity (5-point stencil)."""
        c = self.center
        return _fd_center(np.asarray(values)[c - 2:c + 3], self.r_step)

    def at_r0(self, values):
        return np.asarray(values)[self.center]

    def tube_columns(self, t: float):
        """Columns of ``dPhi`` for the tube map ``Phi(r, s, t) = gamma(r, s) - t n``."""
        dn = self.surface.shape_operator(self.gamma_rs)
        c1 = self.dr_gamma - t * np.einsum("...ij,...j->...i", dn, self.dr_gamma)
        c2 = self.ds_gamma - t * np.einsum("...ij,...j->...i", dn, self.ds_gamma)
        return np.stack([c1, c2, -self.normal], axis=-1)

    def field_density(self, t: float = 0.0):
        """``|g|^{1/2} B`` where ``B = dPhi^{-1} e_3`` and ``|g|^{1/2} = |det dPhi|``."""
        m = self.tube_columns(t)
        rhs = np.broadcast_to(E3, m.shape[:-1])
        b = np.linalg.solve(m, rhs[..., None])[..., 0]
        return np.abs(np.linalg.det(m))[..., None] * b


def _geodesic_rhs(surface: Surface, x, v):
    curv = surface.weingarten(x, v, v)
    return v, -curv[..., None] * surface.normal(x)


def _integrate_rays(surface: Surface, x, v, h: float, steps: int):
    xs, vs = [x], [v]
    for _ in range(steps):
        k1x, k1v = _geodesic_rhs(surface, x, v)
        k2x, k2v = _geodesic_rhs(surface, x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = _geodesic_rhs(surface, x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = _geodesic_rhs(surface, x + h * k3x, v + h * k3v)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        x = surface.project(x, iterations=2)
        n = surface.normal(x)
        v = v - np.sum(v * n, axis=-1, keepdims=True) * n
        xs.append(x)
        vs.append(v)
    return xs, vs


def _min_curvature_radius(surface: Surface, x) -> float:
    kappa = np.linalg.eigvalsh(0.5 * (surface.shape_operator(x) + np.swapaxes(surface.shape_operator(x), -1, -2)))
    return 1.0 / max(np.max(np.abs(kappa)), 1e-12)


def geodesic_extend(surface: Surface, frame: GammaFrame, r_max: Optional[float] = None,
                    steps: Optional[int] = None) -> GeodesicChart:
    """RK4 on ``gamma'' = -K(gamma', gamma') n`` from every contour sample, both ways in r.

    Each step is followed by a Newton projection onto the surface and removal
    of the normal velocity component.  ``steps`` is the number of steps on each
    side of r = 0.
    """
    if r_max is None:
        r_max = 0.2 * _min_curvature_radius(surface, frame.gamma)
    if steps is None:
        steps = max(2, math.ceil(STEPS_PER_UNIT_R * r_max))
    if r_max <= 0 or steps < 1:
        raise ValueError("need r_max > 0 and steps >= 1")
    h = r_max / steps
    fx, fv = _integrate_rays(surface, frame.gamma, frame.dr_gamma, h, steps)
    bx, bv = _integrate_rays(surface, frame.gamma, frame.dr_gamma, -h, steps)
    gamma_rs = np.stack(bx[::-1] + fx[1:])
    dr_gamma = np.stack(bv[::-1] + fv[1:])
    r_grid = h * np.arange(-steps, steps + 1)

    on_surface = np.abs(surface.value(gamma_rs)) / np.linalg.norm(surface.gradient(gamma_rs), axis=-1)
    normal = surface.normal(gamma_rs)
    tangency = np.abs(np.sum(dr_gamma * normal, axis=-1))
    speed_drift = np.max(np.abs(np.linalg.norm(dr_gamma, axis=-1) - 1.0))
    if on_surface.max() > 1e-10 or tangency.max() > 1e-8 or speed_drift > 1e-9 * max(1.0, r_max):
        raise NumericalError(
            f"geodesic integration drift too large (surface {on_surface.max():.2e}, "
            f"tangency {tangency.max():.2e}, speed {speed_drift:.2e}); increase steps"
        )

    series = PeriodicSeries(np.moveaxis(gamma_rs, 1, 0), frame.period)
    ds_gamma = np.moveaxis(series.derivative_samples(1), 0, 1)
    alpha = np.sum(ds_gamma**2, axis=-1)
    m = np.stack([dr_gamma, ds_gamma, -normal], axis=-1)
    b = np.linalg.solve(m, np.broadcast_to(E3, m.shape[:-1])[..., None])[..., 0]
    return GeodesicChart(surface=surface, r_grid=r_grid, s_grid=frame.s.copy(),
                         half_length=frame.half_length, gamma_rs=gamma_rs, dr_gamma=dr_gamma,
                         ds_gamma=ds_gamma, alpha=alpha, normal=normal, b_frame=b,
                         drift=float(max(on_surface.max(), tangency.max(), speed_drift)))


def gamma_frame(surface: Surface, num_samples: int = DEFAULT_SAMPLES, constants=None,
                r_step: float = DEFAULT_R_STEP) -> GammaFrame:
    """Complete contour frame: ``beta`` two ways, ``kappa_g`` from the chart metric.

    ``constants`` (a ModelConstants or a bare ``alpha0``) fills ``E`` and ``K``.
    """
    frame = extract_gamma(surface, num_samples)
    chart = geodesic_extend(surface, frame, r_max=2 * r_step, steps=2)
    beta_fd = -chart.d_dr0(chart.normal[..., 2])
    beta = _orientation_beta(surface, frame.gamma, frame.dr_gamma)
    gap = np.max(np.abs(beta_fd - beta))
    if gap > 1e-5:
        raise NumericalError(f"geometry inconsistency: beta routes differ by {gap:.2e}")
    kappa_g = -0.5 * chart.d_dr0(chart.alpha)
    d2gamma = PeriodicSeries(frame.ds_gamma, frame.period).derivative_samples(1)
    kappa_frenet = np.sum(d2gamma * frame.dr_gamma, axis=-1)
    frame = replace(frame, beta=beta, beta_fd=beta_fd, kappa_g=kappa_g, kappa_g_frenet=kappa_frenet)
    if constants is not None:
        frame = frame.with_constants(constants)
    return frame


@dataclass
class AssumptionsReport:
    linear_vanishing: bool
    K_unique_nondegenerate_min: bool
    s_min: float
    K_min: float
    beta_min: float
    K_second_derivative: float
    num_global_minima: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def verify_assumptions(frame: GammaFrame, tol: float = 1e-8) -> AssumptionsReport:
    if not frame.complete:
        raise ValueError("verify_assumptions needs a complete frame with K")
    k = frame.K
    n = k.size
    ds = frame.period / n
    prev, nxt = np.roll(k, 1), np.roll(k, -1)
    local = np.flatnonzero((k <= prev) & (k <= nxt))
    i = int(np.argmin(k))
    k_min = k[i]
    scale = max(1.0, abs(k_min))
    near = [j for j in local if k[j] - k_min <= 1e-9 * scale]
    # plateaus (e.g. constant K) count every flat sample as a minimum
    n_global = len(near)

    curv = (prev[i] - 2 * k[i] + nxt[i]) / ds**2
    denom = prev[i] - 2 * k[i] + nxt[i]
    offset = 0.5 * (prev[i] - nxt[i]) / denom if denom > 0 else 0.0
    s_min = frame.s[i] + offset * ds
    series = frame.series("K")
    if curv > tol:
        for _ in range(20):
            d1 = series(s_min, 1)[0]
            d2 = series(s_min, 2)[0]
            step = d1 / d2
            s_min -= step
            if abs(step) < 1e-14:
                break
        k_min = float(series(s_min)[0])
    s_min = float(s_min % frame.period)
    return AssumptionsReport(
        linear_vanishing=bool(np.min(frame.beta) > tol),
        K_unique_nondegenerate_min=bool(curv > tol and n_global == 1),
        s_min=s_min, K_min=float(k_min), beta_min=float(np.min(frame.beta)),
        K_second_derivative=float(curv), num_global_minima=n_global,
    )


@dataclass
class CancellationTerms:
    s: np.ndarray
    phi: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    dr_inv_alpha: np.ndarray
    residual: np.ndarray


def cancellation_terms(chart: GeodesicChart, t_step: float = DEFAULT_T_STEP) -> CancellationTerms:
    """``u_1``, ``u_2``, ``d_r(1/alpha)`` along Gamma and the combination that must vanish.

    ``u_1 = d_r [|g|^{1/2} B_2]`` and ``u_2 = (d_s [|g|^{1/2} B_2] + d_t [|g|^{1/2} B_3])``
    at ``(0, s, 0)``; the ``t``-derivative goes through the tube map.
    """
    if chart.center < 2:
        raise NumericalError("stencil underflow: chart needs two r-steps on each side of Gamma")
    c = chart.center
    q0 = chart.field_density(0.0)
    qt = [chart.field_density(k * t_step)[c] for k in (-2, -1, 1, 2)]
    d_t_q3 = (-qt[3][..., 2] + 8 * qt[2][..., 2] - 8 * qt[1][..., 2] + qt[0][..., 2]) / (12 * t_step)
    d_s_q2 = PeriodicSeries(q0[c][..., 1], 2 * chart.half_length).derivative_samples(1)
    u1 = chart.d_dr0(q0[..., 1])
    u2 = d_s_q2 + d_t_q3
    dr_inv_alpha = chart.d_dr0(1.0 / chart.alpha)
    cos_phi = chart.dr_gamma[c, :, 2]
    sin_phi = chart.ds_gamma[c, :, 2]
    resid = -2 * u2 * cos_phi + 2 * u1 * sin_phi + cos_phi**2 * dr_inv_alpha
    return CancellationTerms(chart.s_grid, np.arctan2(sin_phi, cos_phi), u1, u2, dr_inv_alpha, resid)


def cancellation_residual(chart: GeodesicChart, s: float, t_step: float = DEFAULT_T_STEP) -> float:
    """``|-2 u_2 cos(phi) + 2 u_1 sin(phi) + cos^2(phi) d_r(1/alpha)|`` at arc length ``s``."""
    terms = cancellation_terms(chart, t_step)
    value = PeriodicSeries(terms.residual, 2 * chart.half_length)(s)[0]
    return float(abs(value))


def contour_length(surface: Surface) -> float:
    curve = surface.contour_curve()
    if curve is None:
        raise ValueError("general Gamma tracing unsupported: surface is not z-symmetric")
    return arclength_samples(curve, 16).total


def _upper_flux(surface: Surface, n: int) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    th = 0.25 * math.pi * (nodes + 1.0)
    w_th = 0.25 * math.pi * weights
    m = 2 * n
    ph = 2 * math.pi * np.arange(m) / m
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    st, ct, sp, cp = np.sin(tt), np.cos(tt), np.sin(pp), np.cos(pp)
    omega = np.stack([st * cp, st * sp, ct], axis=-1)
    om_t = np.stack([ct * cp, ct * sp, -st], axis=-1)
    om_p = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=-1)
    rho = surface.radial(omega)
    x_t = surface.radial_derivative(omega, om_t, rho)[..., None] * omega + rho[..., None] * om_t
    x_p = surface.radial_derivative(omega, om_p, rho)[..., None] * omega + rho[..., None] * om_p
    n3_ds = np.cross(x_t, x_p)[..., 2]
    return float(np.sum(w_th[:, None] * n3_ds) * 2 * math.pi / m)


def mean_circulation(surface: Surface, quad_points: int = 64 * 64) -> float:
    """``(1/|Gamma|) * int_{n_3 > 0} n_3 dS`` by Gauss-Legendre x trapezoid quadrature.

    The upper half ``z > 0`` of a z-symmetric body is exactly ``{n_3 > 0}`` once
    Gamma is checked to be the equator.
    """
    if not surface.z_symmetric:
        raise ValueError("mean circulation needs a z-symmetric surface")
    n = int(round(math.sqrt(quad_points)))
    if n < 64:
        raise ValueError("quad_points must be at least 64^2")
    _check_single_contour(surface)
    prev = _upper_flux(surface, n)
    for _ in range(4):
        n *= 2
        cur = _upper_flux(surface, n)
        if abs(cur - prev) <= 1e-12 * abs(cur):
            return cur / contour_length(surface)
        prev = cur
    raise NumericalError("flux quadrature did not converge between refinements")
