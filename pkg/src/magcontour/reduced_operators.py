"""Effective band ``b(s, sigma) = K(s) mu2(g(s) sigma)`` along the contour.

``mu2`` is the Montgomery ground-state curve and
``g = alpha0^{1/3} / (E^{2/3} beta^{1/3})``.  The band is minimized, its
Hessian measured, checked against a direct solve of the one-dimensional
reduced operator in ``r``, and quantized on the periodic ``s``-grid.

The subprincipal corrections to the effective symbol are not computed, so
quantized levels carry an unknown O(eps^2) shift and only gaps and the
harmonic coefficient are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import LinAlgError, eig_banded
from scipy.optimize import minimize_scalar

from .errors import NumericalError
from .geometry import GammaFrame, PeriodicSeries
from .model_operators import (
    DEFAULT_POINTS, GroundState, ModelConstants, ModelOperatorDiscretization, SpectralCurve,
    montgomery_truncation,
)

TABLE_SPACING = 0.02
TABLE_RANGE = (-1.5, 2.5)
TABLE_TOL = 1e-9
TABLE_LIMIT = 60.0
HESSIAN_STEP = 1e-3
# the direct reduced solve uses its own grid so that it is not the table's scheme in disguise
DIRECT_POINTS = 3000
DIRECT_MARGIN = 2.0


class MontgomeryTable:
    """Cubic Hermite interpolant of ``mu2`` and its Feynman-Hellmann slope.

    Nodes sit on multiples of ``spacing``; the spacing is halved until the
    interpolant matches direct solves at interval midpoints within ``tol``.
    Queries outside the range grow the table.
    """

    def __init__(self, curve: Optional[SpectralCurve] = None, spacing: float = TABLE_SPACING,
                 xi_range=TABLE_RANGE, tol: float = TABLE_TOL):
        self.curve = curve or SpectralCurve("montgomery", DEFAULT_POINTS)
        self.spacing = spacing
        self.tol = tol
        self.probe_error = float("nan")
        self._build(*xi_range)
        self._refine()

    def _build(self, lo: float, hi: float):
        k0, k1 = math.floor(lo / self.spacing), math.ceil(hi / self.spacing)
        nodes = self.spacing * np.arange(k0, k1 + 1)
        vals = np.array([self.curve.evaluate(x) for x in nodes])
        self.lo, self.hi = float(nodes[0]), float(nodes[-1])
        self.nodes = nodes
        self._spline = CubicHermiteSpline(nodes, vals[:, 0], vals[:, 1])

    def _probe(self) -> float:
        mids = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        picks = mids[np.linspace(0, mids.size - 1, 16).round().astype(int)]
        return max(abs(self._spline(x) - self.curve(x)) for x in picks)

    def _refine(self):
        for _ in range(4):
            self.probe_error = float(self._probe())
            if self.probe_error < self.tol:
                return
            self.spacing /= 2
            self._build(self.lo, self.hi)
        raise NumericalError(f"Montgomery table error {self.probe_error:.2e} above {self.tol:g}")

    def ensure(self, lo: float, hi: float):
        if lo >= self.lo and hi <= self.hi:
            return
        if max(abs(lo), abs(hi)) > TABLE_LIMIT:
            raise NumericalError(f"Montgomery argument {max(abs(lo), abs(hi)):.3g} beyond table limit")
        self._build(min(lo, self.lo) - 0.5, max(hi, self.hi) + 0.5)

    def __call__(self, xi, deriv: int = 0):
        xi = np.asarray(xi, dtype=float)
        self.ensure(float(xi.min()), float(xi.max()))
        return self._spline(xi, nu=deriv)


_TABLES: dict[int, MontgomeryTable] = {}


def montgomery_table(num_points: int = DEFAULT_POINTS) -> MontgomeryTable:
    if num_points not in _TABLES:
        _TABLES[num_points] = MontgomeryTable(SpectralCurve("montgomery", num_points))
    return _TABLES[num_points]


class BandFunction:
    """``b(s, sigma) = K(s) * mu(g(s) * sigma)``.

    ``K`` and ``g`` are callables ``f(s, deriv)``; ``mu`` is vectorized (the
    table), ``mu_exact`` is a scalar direct evaluator used for the Hessian.
    ``period`` is None for a non-periodic ``s``-interval ``domain``.
    """

    def __init__(self, K: Callable, g: Callable, mu: Callable, *, mu_min: tuple[float, float],
                 mu_curvature: float, domain: tuple[float, float], period: Optional[float],
                 mu_exact: Optional[Callable] = None):
        self.K, self.g, self.mu = K, g, mu
        self.mu_exact = mu_exact or (lambda x: float(mu(np.array([x]))[0]))
        self.xi_star, self.mu_star = mu_min
        self.mu_curvature = mu_curvature
        self.domain = domain
        self.period = period

    @classmethod
    def from_frame(cls, frame: GammaFrame, consts: ModelConstants,
                   table: Optional[MontgomeryTable] = None) -> "BandFunction":
        if not frame.complete:
            raise ValueError("band needs a complete frame (E and K filled)")
        table = table or montgomery_table()
        g = consts.alpha0 ** (1 / 3) / (frame.E ** (2 / 3) * np.abs(frame.beta) ** (1 / 3))
        k_series, g_series = frame.series("K"), PeriodicSeries(g, frame.period)
        return cls(lambda s, d=0: k_series(s, d), lambda s, d=0: g_series(s, d), table,
                   mu_min=(consts.xi0_m2, consts.theta0_m2), mu_curvature=consts.curv_m2,
                   domain=(0.0, frame.period), period=frame.period, mu_exact=table.curve)

    def __call__(self, s, sigma):
        # K and g depend on s only: evaluate before broadcasting against sigma
        s, sigma = np.asarray(s, float), np.asarray(sigma, float)
        k = self.K(s.ravel(), 0).reshape(s.shape)
        g = self.g(s.ravel(), 0).reshape(s.shape)
        return k * self.mu(g * sigma)

    def exact(self, s: float, sigma: float) -> float:
        return float(self.K(np.array([s]), 0)[0]) * self.mu_exact(float(self.g(np.array([s]), 0)[0]) * sigma)

    def sigma_star(self, s):
        """Pointwise minimizer in ``sigma`` at fixed ``s``."""
        return self.xi_star / self.g(np.atleast_1d(s), 0)


def band_value(s: float, sigma: float, frame: GammaFrame, consts: ModelConstants) -> float:
    return float(BandFunction.from_frame(frame, consts)(s, sigma))


@dataclass
class BandAnalysis:
    s_min: float
    sigma_min: float
    b_min: float
    K_min: float
    hess: np.ndarray
    det_hess: float
    harmonic_gap_coefficient: float
    hess_chain_rule: np.ndarray = field(repr=False)
    mixed_partial: float = 0.0
    second_minimum_margin: Optional[float] = None
    K_second_derivative: float = float("nan")
    g_min: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "s_min": self.s_min, "sigma_min": self.sigma_min, "b_min": self.b_min,
            "K_min": self.K_min, "hess": self.hess.tolist(), "det_hess": self.det_hess,
            "harmonic_gap_coefficient": self.harmonic_gap_coefficient,
            "hess_chain_rule": self.hess_chain_rule.tolist(),
            "mixed_partial": self.mixed_partial,
            "second_minimum_margin": self.second_minimum_margin,
            "K_second_derivative": self.K_second_derivative,
            "note": "subprincipal symbol shifts are not computed; only gaps are asserted",
        }


def _richardson_hessian(f: Callable[[float, float], float], x: float, y: float, step: float):
    def stencil(h):
        f0 = f(x, y)
        fxx = (f(x + h, y) - 2 * f0 + f(x - h, y)) / h**2
        fyy = (f(x, y + h) - 2 * f0 + f(x, y - h)) / h**2
        fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h**2)
        return np.array([[fxx, fxy], [fxy, fyy]])

    return (4 * stencil(step) - stencil(2 * step)) / 3


def _local_minima(values: np.ndarray, periodic: bool) -> np.ndarray:
    if periodic:
        prev, nxt = np.roll(values, 1), np.roll(values, -1)
    else:
        prev = np.concatenate([[np.inf], values[:-1]])
        nxt = np.concatenate([values[1:], [np.inf]])
    return np.flatnonzero((values < prev) & (values <= nxt))


def minimize_band(band, consts: Optional[ModelConstants] = None, *, require_unique: bool = True,
                  samples: int = 1024, step: float = HESSIAN_STEP) -> BandAnalysis:
    """Nested minimization: ``s`` minimizes ``K``, then ``sigma = xi* / g(s)``.

    ``band`` is a BandFunction or a complete GammaFrame (``consts`` then
    required).  ``s`` comes from golden section around the sampled argmin of
    ``K``, polished by Newton on ``K'``.  The Hessian is a Richardson-combined
    central difference of direct (not tabulated) evaluations and is compared
    with the chain rule.
    """
    if isinstance(band, GammaFrame):
        if consts is None:
            raise ValueError("minimize_band on a frame needs ModelConstants")
        band = BandFunction.from_frame(band, consts)
    a, b = band.domain
    grid = a + (b - a) * np.arange(samples) / samples if band.period else np.linspace(a, b, samples)
    k_vals = band.K(grid, 0)
    ds = grid[1] - grid[0]
    minima = _local_minima(k_vals, band.period is not None)
    i = int(np.argmin(k_vals))
    ties = [j for j in minima if k_vals[j] - k_vals[i] <= 1e-9 * abs(k_vals[i])]
    if require_unique and len(ties) != 1:
        raise ValueError(f"K must have a unique minimum on Gamma (found {len(ties)} global minima)")

    res = minimize_scalar(lambda s: float(band.K(np.array([s]), 0)[0]),
                          bracket=(grid[i] - ds, grid[i], grid[i] + ds), method="golden",
                          options={"xtol": 1e-10})
    s_min = float(res.x)
    for _ in range(20):
        d1 = float(band.K(np.array([s_min]), 1)[0])
        d2 = float(band.K(np.array([s_min]), 2)[0])
        if not d2 > 0:
            raise NumericalError("degenerate band minimum: K'' <= 0 at its minimum")
        s_min -= d1 / d2
        if abs(d1 / d2) < 1e-15 * max(1.0, abs(s_min)):
            break
    if band.period:
        s_min %= band.period

    sv = np.array([s_min])
    k_min, k1, k2 = (float(band.K(sv, d)[0]) for d in (0, 1, 2))
    g0, g1, g2 = (float(band.g(sv, d)[0]) for d in (0, 1, 2))
    sigma_min = band.xi_star / g0
    b_min = band.exact(s_min, sigma_min)

    hess = _richardson_hessian(band.exact, s_min, sigma_min, step)
    mu0, mu2 = band.mu_star, band.mu_curvature
    gs = g1 * sigma_min
    chain = np.array([
        [k2 * mu0 + k_min * mu2 * gs**2, k_min * mu2 * gs * g0],
        [k_min * mu2 * gs * g0, k_min * mu2 * g0**2],
    ])
    eig = np.linalg.eigvalsh(hess)
    if not eig.min() > 0:
        raise NumericalError(f"degenerate band minimum (Hessian eigenvalues {eig})")
    det = float(np.linalg.det(hess))

    others = [k_vals[j] for j in minima if j not in ties]
    margin = (min(others) - k_min) * band.mu_star if others else None
    return BandAnalysis(s_min=s_min, sigma_min=float(sigma_min), b_min=float(b_min),
                        K_min=k_min, hess=hess, det_hess=det,
                        harmonic_gap_coefficient=math.sqrt(det), hess_chain_rule=chain,
                        mixed_partial=float(hess[0, 1]), second_minimum_margin=margin,
                        K_second_derivative=k2, g_min=g0)


def harmonic_levels(analysis: BandAnalysis, epsilon: float, n: int) -> float:
    """``b_min + (2n - 1)(eps/2) sqrt(det Hess)``, without subprincipal shifts."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return analysis.b_min + (2 * n - 1) * 0.5 * epsilon * analysis.harmonic_gap_coefficient


@dataclass
class ContourCoefficients:
    E: float
    beta: float
    cos_phi: float
    sin_phi: float


def contour_coefficients(frame: GammaFrame, s: float) -> ContourCoefficients:
    if not frame.complete:
        raise ValueError("frame is partial")
    pick = lambda v: float(PeriodicSeries(v, frame.period)(s)[0])
    c, sn = pick(np.cos(frame.phi)), pick(np.sin(frame.phi))
    norm = math.hypot(c, sn)
    return ContourCoefficients(pick(frame.E), pick(frame.beta), c / norm, sn / norm)


def _boundary_mass(u, weights, r, radius) -> float:
    outer = np.abs(r) > 0.9 * radius
    return float(np.sum(weights[outer] * u[outer] ** 2))


def _solve_reduced(E, alpha0, beta, sigma, radius, points, cross=0.0, phase_shift=None):
    step = 2 * radius / points
    r = -radius + step * np.arange(1, points)
    p = sigma - 0.5 * beta * r * r
    potential = (alpha0 / E**2) * p * p
    if phase_shift is None:
        gs = GroundState(potential, step, neumann_left=False)
        return E * gs.eigenvalue, _boundary_mass(gs.vector, gs.weights, r, radius)
    # E (D_r + a(r))^2 with a = cross * p: link variables exp(i (theta(r_{j+1}) - theta(r_j)))
    theta = cross * (sigma * r - beta * r**3 / 6) + phase_shift
    links = np.exp(1j * np.diff(theta))
    bands = np.zeros((2, r.size), dtype=complex)
    bands[0] = 2 / step**2 + potential
    bands[1, :-1] = -links / step**2
    try:
        w, v = eig_banded(bands, lower=True, select="i", select_range=(0, 0))
    except LinAlgError as exc:
        raise NumericalError(f"banded eigensolver failed: {exc}") from exc
    weights = np.full(r.size, step)
    return E * float(w[0]), _boundary_mass(np.abs(v[:, 0]) / math.sqrt(step), weights, r, radius)


def reduced_ground_energy_direct(s: float, sigma: float, frame: GammaFrame, consts: ModelConstants,
                                 disc: Optional[ModelOperatorDiscretization] = None, *,
                                 gauge_phase: Optional[float] = None) -> float:
    """Lowest eigenvalue of ``E D_r^2 + (alpha0/E)(sigma - beta r^2/2)^2`` on a truncated line.

    The truncation follows the natural length ``lambda = (E^2/(alpha0 beta^2))^{1/6}``
    unless ``disc`` fixes it.  With ``gauge_phase`` set, the first-order term
    ``(1 - alpha0) cos(phi) sin(phi) / E * (sigma - beta r^2/2)`` that the completed
    square removes is kept inside a magnetic-type kinetic term, the gauge phase is
    shifted by the given constant, and the Hermitian solver is used.
    """
    c = contour_coefficients(frame, s)
    a0 = consts.alpha0
    lam = (c.E**2 / (a0 * c.beta**2)) ** (1 / 6)
    if disc is None:
        points = DIRECT_POINTS
        radius = lam * (montgomery_truncation(sigma / (c.beta * lam**2)) + DIRECT_MARGIN)
    else:
        points, radius = disc.num_points, disc.truncation_radius
    cross = (1 - a0) * c.cos_phi * c.sin_phi / c.E
    coarse, _ = _solve_reduced(c.E, a0, c.beta, sigma, radius, points, cross, gauge_phase)
    fine, mass = _solve_reduced(c.E, a0, c.beta, sigma, radius, 2 * points, cross, gauge_phase)
    if mass > 1e-10:
        raise NumericalError(f"reduced operator truncation insufficient (boundary mass {mass:.2e})")
    return (4 * fine - coarse) / 3


@dataclass
class QuantizedBand:
    epsilon: float
    num_points: int
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    asymmetry: float = 0.0


def quantize_symbol(symbol: Callable, period: float, epsilon: float, num_points: int) -> QuantizedBand:
    """Midpoint quantization of ``symbol(s, sigma)`` at semiclassical parameter ``epsilon``.

    ``A[j, k] = (1/N) sum_m symbol((s_j + s_k)/2, eps w_m) exp(i w_m (s_j - s_k))``
    with ``w_m = 2 pi m / period``; the midpoint is taken across the shorter arc.
    """
    if not 0 < epsilon <= 0.3:
        raise ValueError("epsilon must lie in (0, 0.3]")
    n = int(num_points)
    if n < 128 or n & (n - 1):
        raise ValueError("num_points must be a power of two >= 128")
    ds = period / n
    half = 0.5 * ds * np.arange(2 * n)
    omega = 2 * math.pi * np.fft.fftfreq(n, 1.0 / n) / period
    table = symbol(half[:, None], epsilon * omega[None, :])
    kernel = np.fft.ifft(table, axis=1)
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    d = (j - k + n // 2) % n - n // 2
    mat = kernel[(2 * k + d) % (2 * n), d % n]
    asym = float(np.max(np.abs(mat - mat.conj().T)))
    mat = 0.5 * (mat + mat.conj().T)
    vals = np.linalg.eigvalsh(mat)
    return QuantizedBand(float(epsilon), n, mat, vals, asym)


def quantize_band(band, consts: Optional[ModelConstants] = None, epsilon: float = 0.02,
                  num_points: int = 256) -> QuantizedBand:
    if isinstance(band, GammaFrame):
        if consts is None:
            raise ValueError("quantize_band on a frame needs ModelConstants")
        band = BandFunction.from_frame(band, consts)
    if band.period is None:
        raise ValueError("quantization needs a periodic band")
    return quantize_symbol(band, band.period, epsilon, num_points)
