"""One-dimensional model operators: de Gennes and Montgomery.

Both are discretized by second-order central differences and solved for the
lowest eigenpair with a symmetric tridiagonal bisection / inverse iteration
(LAPACK ``stebz`` + ``stein``).  The eigenvalue returned is the Rayleigh
quotient of the computed eigenvector evaluated through the difference form of
the energy, which is accurate to a few ulps even when the matrix norm is large.

The de Gennes operator is ``-d^2/dt^2 + (xi - t)^2`` on the half-line with a
Neumann condition at ``t = 0``; the Montgomery operator is
``-d^2/dt^2 + (xi - t^2/2)^2`` on the whole line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar

from .errors import NumericalError

HALF_LINE = "half_line"
FULL_LINE = "full_line"

DEFAULT_POINTS = 4000

DE_GENNES_BRACKET = (0.2, 1.5)
MONTGOMERY_BRACKET = (0.05, 1.0)


def de_gennes_truncation(xi: float) -> float:
    return max(20.0, abs(xi) + 10.0)


def montgomery_truncation(xi: float) -> float:
    return max(16.0, math.sqrt(2.0 * abs(xi)) + 8.0)


@dataclass(frozen=True)
class ModelOperatorDiscretization:
    """Uniform grid for a 1D Schrodinger eigenproblem.

    ``num_points`` is the number of grid intervals: the step is
    ``T / num_points`` on the half-line ``[0, T]`` and ``2T / num_points`` on
    ``[-T, T]``, so doubling ``num_points`` halves the step exactly.
    """

    domain_kind: str
    truncation_radius: float
    num_points: int = DEFAULT_POINTS
    boundary_left: str = "neumann"
    boundary_right: str = "dirichlet"

    def __post_init__(self):
        if self.domain_kind not in (HALF_LINE, FULL_LINE):
            raise ValueError(f"unknown domain kind {self.domain_kind!r}")
        if not self.truncation_radius > 0:
            raise ValueError("truncation_radius must be positive")
        if self.num_points < 3:
            raise ValueError("num_points must be >= 3")
        if self.boundary_right != "dirichlet":
            raise ValueError("right boundary must be dirichlet")
        if self.domain_kind == HALF_LINE and self.boundary_left != "neumann":
            raise ValueError("half-line realization requires a neumann condition at 0")
        if self.domain_kind == FULL_LINE and self.boundary_left != "dirichlet":
            raise ValueError("full-line truncation uses dirichlet at both ends")

    @classmethod
    def de_gennes(cls, xi: float = 0.0, num_points: int = DEFAULT_POINTS):
        return cls(HALF_LINE, de_gennes_truncation(xi), num_points, "neumann")

    @classmethod
    def montgomery(cls, xi: float = 0.0, num_points: int = DEFAULT_POINTS):
        return cls(FULL_LINE, montgomery_truncation(xi), num_points, "dirichlet")

    @property
    def step(self) -> float:
        if self.domain_kind == HALF_LINE:
            return self.truncation_radius / self.num_points
        return 2.0 * self.truncation_radius / self.num_points

    def grid(self) -> np.ndarray:
        """Unknown locations (the Dirichlet end points are excluded)."""
        h = self.step
        if self.domain_kind == HALF_LINE:
            return h * np.arange(self.num_points)
        return -self.truncation_radius + h * np.arange(1, self.num_points)

    def refined(self, factor: int = 2) -> "ModelOperatorDiscretization":
        return replace(self, num_points=self.num_points * factor)


@dataclass
class SpectralCurveSample:
    xi: float
    mu1: float
    ground_state: np.ndarray
    grid: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    slope: float = float("nan")

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights * self.ground_state**2)))


class GroundState:
    """Lowest eigenpair of ``-u'' + V u`` on a uniform grid.

    ``u`` is returned in nodal values, normalized for the trapezoidal weights
    ``w`` (which carry the half-cell at a Neumann end point).
    """

    def __init__(self, potential: np.ndarray, step: float, neumann_left: bool):
        n = potential.size
        h2 = step * step
        diag = 2.0 / h2 + potential
        off = np.full(n - 1, -1.0 / h2)
        # ghost-point reflection u_{-1} = u_1, symmetrized by scaling u_0 by sqrt(2)
        if neumann_left:
            off[0] = -math.sqrt(2.0) / h2
        try:
            _, vec = eigh_tridiagonal(
                diag, off, select="i", select_range=(0, 0), lapack_driver="stebz"
            )
        except LinAlgError as exc:
            raise NumericalError(f"tridiagonal eigensolver failed: {exc}") from exc
        u = vec[:, 0].copy()
        if neumann_left:
            u[0] *= math.sqrt(2.0)
        weights = np.full(n, step)
        if neumann_left:
            weights[0] = 0.5 * step
        u *= np.sign(u[np.argmax(np.abs(u))])
        # the exact discrete ground state is strictly positive (Perron-Frobenius);
        # negative entries can only be inverse-iteration roundoff in the far tail
        if u.min() < -1e-10 * u.max():
            raise NumericalError("ground state is not sign-definite")
        np.maximum(u, 0.0, out=u)
        mass = np.sum(weights * u * u)
        u /= math.sqrt(mass)

        # energy in difference form: Dirichlet node u_n = 0 closes the sum
        closed = np.append(u, 0.0)
        if not neumann_left:
            closed = np.insert(closed, 0, 0.0)
        kinetic = np.sum(np.diff(closed) ** 2) / step
        self.eigenvalue = float(kinetic + np.sum(weights * potential * u * u))
        self.vector = u
        self.weights = weights

    def expectation(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values * self.vector**2))


def _check_truncation(disc, required: float, xi: float):
    if disc.truncation_radius < required - 1e-12:
        raise ValueError(
            f"domain truncation unreliable: T={disc.truncation_radius:g} < {required:g} at xi={xi:g}"
        )


def mu1_de_gennes(xi: float, disc: Optional[ModelOperatorDiscretization] = None) -> SpectralCurveSample:
    """Lowest eigenpair of the Neumann de Gennes operator at frequency ``xi``."""
    if disc is None:
        disc = ModelOperatorDiscretization.de_gennes(xi)
    if disc.domain_kind != HALF_LINE:
        raise ValueError("de Gennes operator lives on the half-line")
    _check_truncation(disc, abs(xi) + 10.0, xi)
    t = disc.grid()
    gs = GroundState((xi - t) ** 2, disc.step, neumann_left=True)
    slope = gs.expectation(2.0 * (xi - t))
    return SpectralCurveSample(xi, gs.eigenvalue, gs.vector, t, gs.weights, slope)


def mu1_montgomery(xi: float, disc: Optional[ModelOperatorDiscretization] = None) -> SpectralCurveSample:
    """Lowest eigenpair of the Montgomery operator at frequency ``xi``."""
    if disc is None:
        disc = ModelOperatorDiscretization.montgomery(xi)
    if disc.domain_kind != FULL_LINE:
        raise ValueError("Montgomery operator lives on the full line")
    _check_truncation(disc, math.sqrt(2.0 * abs(xi)) + 8.0, xi)
    # The ground state is even, so solve the Neumann problem on [0, T) with the
    # same step: these are exactly the even eigenpairs of the symmetric scheme,
    # and the odd partner (nearly degenerate in the double-well regime) is excluded.
    step = disc.step
    half = step * np.arange(disc.num_points // 2)
    well = xi - 0.5 * half * half
    gs = GroundState(well**2, step, neumann_left=True)
    slope = gs.expectation(2.0 * well)
    u = np.concatenate([gs.vector[:0:-1], gs.vector]) / math.sqrt(2.0)
    t = np.concatenate([-half[:0:-1], half])
    weights = np.full(t.size, step)
    return SpectralCurveSample(xi, gs.eigenvalue, u, t, weights, slope)


_SOLVERS = {"de_gennes": mu1_de_gennes, "montgomery": mu1_montgomery}
_DEFAULT_DISC = {
    "de_gennes": ModelOperatorDiscretization.de_gennes,
    "montgomery": ModelOperatorDiscretization.montgomery,
}


class SpectralCurve:
    """``xi -> mu_1(xi)`` for one model operator.

    With ``extrapolate`` the value and the Feynman-Hellmann slope are
    Richardson-combined over ``num_points`` and ``2 * num_points``, removing the
    O(step^2) error of the scheme.  When ``truncation_radius`` is None the
    default truncation for each ``xi`` is used.
    """

    def __init__(self, operator: str, num_points: int = DEFAULT_POINTS,
                 extrapolate: bool = True, truncation_radius: Optional[float] = None):
        if operator not in _SOLVERS:
            raise ValueError(f"unknown model operator {operator!r}")
        self.operator = operator
        self.num_points = num_points
        self.extrapolate = extrapolate
        self.truncation_radius = truncation_radius
        self._cache: dict[float, tuple[float, float]] = {}

    @classmethod
    def from_discretization(cls, operator: str, disc: ModelOperatorDiscretization,
                            extrapolate: bool = True):
        return cls(operator, disc.num_points, extrapolate, disc.truncation_radius)

    def discretization(self, xi: float) -> ModelOperatorDiscretization:
        disc = _DEFAULT_DISC[self.operator](xi, self.num_points)
        if self.truncation_radius is not None:
            disc = replace(disc, truncation_radius=self.truncation_radius)
        return disc

    def evaluate(self, xi: float) -> tuple[float, float]:
        xi = float(xi)
        hit = self._cache.get(xi)
        if hit is not None:
            return hit
        solve = _SOLVERS[self.operator]
        disc = self.discretization(xi)
        coarse = solve(xi, disc)
        if self.extrapolate:
            fine = solve(xi, disc.refined())
            out = ((4.0 * fine.mu1 - coarse.mu1) / 3.0, (4.0 * fine.slope - coarse.slope) / 3.0)
        else:
            out = (coarse.mu1, coarse.slope)
        self._cache[xi] = out
        return out

    def __call__(self, xi: float) -> float:
        return self.evaluate(xi)[0]

    def slope(self, xi: float) -> float:
        return self.evaluate(xi)[1]

    def ground_state(self, xi: float) -> SpectralCurveSample:
        return _SOLVERS[self.operator](xi, self.discretization(xi).refined())


def minimize_spectral_curve(curve: Callable[[float], float], bracket: tuple[float, float],
                            tol: float = 1e-10,
                            slope: Optional[Callable[[float], float]] = None):
    """Locate the minimum of ``curve`` inside ``bracket``.

    Returns ``(xi_star, mu_star, second_derivative)``.  When a ``slope`` is
    available the stationary point is found as the root of the slope (so the
    location is as accurate as the slope, not its square root) and the second
    derivative is a central difference of the slope.  Otherwise a bounded Brent
    search on the values is used and the second derivative is a three-point
    difference of the values.
    """
    a, b = map(float, bracket)
    if not (b > a and tol > 0):
        raise ValueError("need a < b and tol > 0")
    step = max(math.sqrt(tol), 1e-4)

    if slope is not None:
        sa, sb = slope(a), slope(b)
        if not (sa < 0.0 < sb):
            raise ValueError("bracket does not isolate minimum")
        x = brentq(slope, a, b, xtol=tol, rtol=4 * np.finfo(float).eps)
        d2 = (slope(x + step) - slope(x - step)) / (2.0 * step)
    else:
        fa, fb = curve(a), curve(b)
        res = minimize_scalar(curve, bounds=(a, b), method="bounded",
                              options={"xatol": tol, "maxiter": 500})
        x = float(res.x)
        if not (res.fun < fa and res.fun < fb) or min(x - a, b - x) < 10 * tol:
            raise ValueError("bracket does not isolate minimum")
        d2 = (curve(x + step) - 2.0 * curve(x) + curve(x - step)) / step**2
    if not d2 > 0:
        raise ValueError("bracket does not isolate minimum (degenerate curvature)")
    return x, float(curve(x)), float(d2)


@dataclass(frozen=True)
class ModelConstants:
    theta0: float
    xi0: float
    alpha0: float
    theta0_m2: float
    xi0_m2: float
    curv_m2: float

    def __post_init__(self):
        if not 0 < self.theta0 < 1:
            raise NumericalError(f"Theta0={self.theta0} outside (0, 1)")
        if not (self.xi0 > 0 and self.alpha0 > 0):
            raise NumericalError("de Gennes minimum must be at xi0 > 0 with alpha0 > 0")
        if not self.curv_m2 > 0:
            raise NumericalError("Montgomery minimum is degenerate")

    def as_dict(self) -> dict:
        return {
            "theta0": self.theta0, "xi0": self.xi0, "alpha0": self.alpha0,
            "theta0_m2": self.theta0_m2, "xi0_m2": self.xi0_m2, "curv_m2": self.curv_m2,
        }


def model_constants(disc_dg: Optional[ModelOperatorDiscretization] = None,
                    disc_m: Optional[ModelOperatorDiscretization] = None,
                    tol: float = 1e-10) -> ModelConstants:
    """Minimize both spectral curves (Richardson-extrapolated) and collect the constants."""
    disc_dg = disc_dg or ModelOperatorDiscretization.de_gennes()
    disc_m = disc_m or ModelOperatorDiscretization.montgomery()
    dg = SpectralCurve.from_discretization("de_gennes", disc_dg)
    mg = SpectralCurve.from_discretization("montgomery", disc_m)
    xi0, theta0, d2 = minimize_spectral_curve(dg, DE_GENNES_BRACKET, tol, slope=dg.slope)
    xi0_m2, theta0_m2, curv_m2 = minimize_spectral_curve(mg, MONTGOMERY_BRACKET, tol, slope=mg.slope)
    return ModelConstants(theta0, xi0, 0.5 * d2, theta0_m2, xi0_m2, curv_m2)


_CONSTANTS_CACHE: dict[int, ModelConstants] = {}


def default_constants(num_points: int = DEFAULT_POINTS) -> ModelConstants:
    """Constants at the default truncations, memoized per resolution."""
    if num_points not in _CONSTANTS_CACHE:
        _CONSTANTS_CACHE[num_points] = model_constants(
            ModelOperatorDiscretization.de_gennes(num_points=num_points),
            ModelOperatorDiscretization.montgomery(num_points=num_points),
        )
    return _CONSTANTS_CACHE[num_points]


def mu1_de_gennes_shooting(xi: float, guess: float, tail: float = 8.0, rtol: float = 1e-13) -> float:
    """De Gennes ground energy by shooting, independent of the difference scheme.

    The decaying solution is started from its WKB slope at ``t = |xi| + tail``
    and integrated back to ``t = 0``; the Prufer angle ``atan2(u', u)`` at the
    origin must vanish for the Neumann condition.  The root in the energy is
    bracketed around ``guess`` and polished by Brent's secant/bisection.
    """
    t_end = max(abs(xi), 0.0) + tail

    def mismatch(lam):
        v_end = (xi - t_end) ** 2 - lam
        y0 = [1.0, -math.sqrt(max(v_end, 0.0))]
        sol = solve_ivp(lambda t, y: [y[1], ((xi - t) ** 2 - lam) * y[0]],
                        (t_end, 0.0), y0, method="DOP853", rtol=rtol, atol=1e-300)
        if not sol.success:
            raise NumericalError(f"shooting integration failed: {sol.message}")
        u, du = sol.y[0, -1], sol.y[1, -1]
        return math.atan2(du, u) if u > 0 else math.atan2(-du, -u)

    width = 1e-3
    for _ in range(30):
        lo, hi = guess - width, guess + width
        if mismatch(lo) * mismatch(hi) < 0:
            return brentq(mismatch, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        width *= 2.0
    raise NumericalError("shooting could not bracket the ground energy")


HERMITE_MAX = 50


def hermite_function(n: int, x):
    """L^2-normalized Hermite function ``H_n`` via the normalized three-term recurrence."""
    if not 0 <= n <= HERMITE_MAX or int(n) != n:
        raise ValueError(f"Hermite index must be an integer in [0, {HERMITE_MAX}]")
    x = np.asarray(x, dtype=float)
    prev = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = math.sqrt(2.0) * x * prev
    for k in range(1, n):
        prev, cur = cur, math.sqrt(2.0 / (k + 1)) * x * cur - math.sqrt(k / (k + 1)) * prev
    return cur if cur.ndim else float(cur)
