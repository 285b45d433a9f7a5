"""Computable terms of the low-lying eigenvalue expansion and the product eigenfunction profile.

``lambda_n(h) = Theta0 h + K_min Theta0_m2 h^{4/3} + d0 h^{3/2}
+ (d1 + (n - 1/2) sqrt(det Hess b)) h^{5/3} + o(h^{5/3})``.  The constants ``d0``
and ``d1`` are not known in closed form, so they are never filled in; gaps
between consecutive levels do not depend on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NumericalError
from .geometry import GammaFrame, verify_assumptions
from .model_operators import ModelConstants, SpectralCurve, hermite_function
from .reduced_operators import BandAnalysis, contour_coefficients

UNKNOWN_TERMS = "+ d0 h^(3/2) + d1 h^(5/3) with d0, d1 unknown"
PROFILE_NMAX = 10


@dataclass(frozen=True)
class EigenvaluePrediction:
    n: int
    h: float
    term_h: float
    term_h43: float
    term_h53: float
    gap_to_next: float
    term_h32_coeff_unknown: bool = True
    remainder_order: str = "o(h^{5/3})"

    @property
    def two_term(self) -> float:
        return self.term_h + self.term_h43

    @property
    def computable_sum(self) -> float:
        """Sum of the known terms; the true level differs by ``d0 h^{3/2} + d1 h^{5/3}``."""
        return self.term_h + self.term_h43 + self.term_h53

    def as_dict(self) -> dict:
        return {"n": self.n, "h": self.h, "term_h": self.term_h, "term_h43": self.term_h43,
                "term_h53": self.term_h53, "gap": self.gap_to_next,
                "unknown": UNKNOWN_TERMS, "remainder": self.remainder_order}


def _check_hypotheses(frame: GammaFrame, band: BandAnalysis):
    report = verify_assumptions(frame)
    if not (report.linear_vanishing and report.K_unique_nondegenerate_min):
        raise ValueError(f"expansion hypotheses violated: {report.as_dict()}")
    if not band.det_hess > 0:
        raise ValueError("expansion hypotheses violated: band minimum is degenerate")


def predict_eigenvalue(n: int, h: float, consts: ModelConstants, frame: GammaFrame,
                       band: BandAnalysis, check: bool = True) -> EigenvaluePrediction:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < h < 1:
        raise ValueError("h must lie in (0, 1)")
    if check:
        _check_hypotheses(frame, band)
    root = band.harmonic_gap_coefficient
    h53 = h ** (5 / 3)
    return EigenvaluePrediction(
        n=n, h=h,
        term_h=consts.theta0 * h,
        term_h43=band.K_min * consts.theta0_m2 * h ** (4 / 3),
        term_h53=(n - 0.5) * root * h53,
        gap_to_next=h53 * root,
    )


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.empty_like(x)
    dx = np.diff(x)
    w[0], w[-1] = 0.5 * dx[0], 0.5 * dx[-1]
    w[1:-1] = 0.5 * (dx[:-1] + dx[1:])
    return w


@dataclass
class ProfileFactor:
    grid: np.ndarray
    values: np.ndarray
    weights: np.ndarray = field(repr=False)
    grid_norm: float = 1.0

    def second_moment(self, center: float = 0.0) -> float:
        return float(np.sum(self.weights * (self.grid - center) ** 2 * self.values**2))

    def sign_changes(self, rel_floor: float = 1e-10) -> int:
        v = self.values[np.abs(self.values) > rel_floor * np.max(np.abs(self.values))]
        return int(np.count_nonzero(np.sign(v[1:]) != np.sign(v[:-1])))


@dataclass
class EigenfunctionProfile:
    """``u(h^{-1/2} t) v(h^{-1/3} r) w_n(h^{-1/6}(s - s_min))`` as three 1D factors.

    Each factor is the continuum-normalized function sampled on its grid;
    ``grid_norm`` is its trapezoidal norm before the factor is rescaled to
    unit grid norm.
    """

    n: int
    h: float
    t: ProfileFactor
    r: ProfileFactor
    s: ProfileFactor
    s_min: float
    hermite_scale: float
    hermite_scale_full: float
    v_scale: float

    @property
    def t_samples(self):
        return self.t.grid

    @property
    def r_samples(self):
        return self.r.grid

    @property
    def s_samples(self):
        return self.s.grid

    @property
    def hermite_scale_difference(self) -> float:
        return abs(self.hermite_scale_full - self.hermite_scale) / self.hermite_scale

    @cached_property
    def values(self) -> np.ndarray:
        return np.einsum("i,j,k->ijk", self.t.values, self.r.values, self.s.values)

    def factor_norms(self) -> dict:
        return {"t": self.t.grid_norm, "r": self.r.grid_norm, "s": self.s.grid_norm}


def _factor(grid, values) -> ProfileFactor:
    w = _trapezoid_weights(grid)
    norm = math.sqrt(float(np.sum(w * values**2)))
    return ProfileFactor(grid, values / norm, w, norm)


_GROUND_STATES: dict[tuple[str, float], CubicSpline] = {}


def _ground_state_spline(operator: str, xi: float) -> CubicSpline:
    key = (operator, xi)
    if key not in _GROUND_STATES:
        sample = SpectralCurve(operator).ground_state(xi)
        _GROUND_STATES[key] = CubicSpline(sample.grid, sample.ground_state)
    return _GROUND_STATES[key]


def default_grids(n: int, h: float, v_scale: float, hermite_scale: float, half_length: float,
                  points: int = 401) -> dict:
    t = np.linspace(0.0, 14.0 * math.sqrt(h), points)
    r = np.linspace(-1.0, 1.0, points) * 12.0 * h ** (1 / 3) / v_scale
    extent = min((math.sqrt(2 * n + 1) + 9.0) * h ** (1 / 6) / hermite_scale, half_length)
    s = np.linspace(-extent, extent, points)
    return {"t": t, "r": r, "s": s}


def eigenfunction_profile(n: int, h: float, consts: ModelConstants, frame: GammaFrame,
                          band: BandAnalysis, grids: Optional[dict] = None,
                          hermite: str = "diagonal") -> EigenfunctionProfile:
    """Product profile of the ``n``-th eigenfunction (modulus, in tubular coordinates).

    ``grids`` maps ``t``, ``r`` and ``s`` to 1D arrays; ``s`` is an offset from
    ``s_min``.  The Hermite factor uses ``[K''/(K mu2'')]^{1/4}``; the scale from
    the full band Hessian, ``(det / b_sigma_sigma^2)^{1/4}``, is reported alongside
    and used instead when ``hermite="hessian"``.  The latter is the width of the
    quantized band's ground state.
    """
    if hermite not in ("diagonal", "hessian"):
        raise ValueError("hermite must be 'diagonal' or 'hessian'")
    if not 1 <= n <= PROFILE_NMAX:
        raise ValueError(f"n must lie in 1..{PROFILE_NMAX}")
    if not 0 < h < 1:
        raise ValueError("h must lie in (0, 1)")
    if not band.K_second_derivative > 0:
        raise NumericalError("K'' at s_min is not positive: the Hermite profile is undefined")

    coef = contour_coefficients(frame, band.s_min)
    v_scale = consts.alpha0 ** (1 / 6) * coef.beta ** (1 / 3) / coef.E ** (1 / 3)
    hermite_scale = (band.K_second_derivative / (band.K_min * consts.curv_m2)) ** 0.25
    hermite_full = (band.det_hess / band.hess[1, 1] ** 2) ** 0.25
    if grids is None:
        grids = default_grids(n, h, v_scale, min(hermite_scale, hermite_full), frame.half_length)
    t, r, s = (np.asarray(grids[k], dtype=float) for k in ("t", "r", "s"))
    if t.min() < 0:
        raise ValueError("t grid must lie in t >= 0")

    u_dg = _ground_state_spline("de_gennes", consts.xi0)
    u_m = _ground_state_spline("montgomery", consts.xi0_m2)
    # continuum normalization: u(a x) sqrt(a) has unit L2 norm when u does
    a_t = h ** -0.5
    a_r = v_scale * h ** (-1 / 3)
    a_s = (hermite_scale if hermite == "diagonal" else hermite_full) * h ** (-1 / 6)
    t_vals = u_dg(a_t * t) * math.sqrt(a_t)
    r_vals = u_m(a_r * r) * math.sqrt(a_r)
    s_vals = hermite_function(n - 1, a_s * s) * math.sqrt(a_s)
    return EigenfunctionProfile(n=n, h=h, t=_factor(t, t_vals), r=_factor(r, r_vals),
                                s=_factor(s, s_vals), s_min=band.s_min,
                                hermite_scale=hermite_scale, hermite_scale_full=hermite_full,
                                v_scale=v_scale)
