"""Evaluatable boundary surfaces ``{F = 0}`` with outward normal ``grad F / |grad F|``.

Every surface exposes the value, gradient and Hessian of ``F`` (vectorized over
leading axes), a radial function for star-shaped bodies, and, when it is known,
a periodic parametrization of the apparent contour ``{n_3 = 0}``.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

E3 = np.array([0.0, 0.0, 1.0])


class Surface:
    name = "surface"
    z_symmetric = False
    scale = 1.0

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def normal(self, x):
        g = self.gradient(x)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def shape_operator(self, x):
        """Ambient matrix of ``dn``: ``(I - n n^T) Hess F / |grad F|``."""
        g = self.gradient(x)
        norm = np.linalg.norm(g, axis=-1)
        n = g / norm[..., None]
        h = self.hessian(x)
        proj = np.eye(3) - n[..., :, None] * n[..., None, :]
        return proj @ h / norm[..., None, None]

    def weingarten(self, x, u, v):
        """Second fundamental form ``<dn(U), V>`` for tangent ``U, V``."""
        g = self.gradient(x)
        hu = np.einsum("...ij,...j->...i", self.hessian(x), u)
        return np.sum(hu * v, axis=-1) / np.linalg.norm(g, axis=-1)

    def project(self, x, iterations: int = 3):
        """Newton steps along the gradient back onto ``F = 0``."""
        for _ in range(iterations):
            g = self.gradient(x)
            x = x - (self.value(x) / np.sum(g * g, axis=-1))[..., None] * g
        return x

    def radial(self, omega):
        """Radius ``rho`` with ``F(rho * omega) = 0`` along unit directions ``omega``.

        Bisection on ``[0, 4 * scale]`` polished by Newton; assumes the body is
        star-shaped with respect to the origin.
        """
        omega = np.asarray(omega, dtype=float)
        lo = np.zeros(omega.shape[:-1])
        hi = np.full(omega.shape[:-1], 4.0 * self.scale)
        if np.any(self.value(hi[..., None] * omega) <= 0):
            raise ValueError(f"{self.name}: body not enclosed by radius {4 * self.scale}")
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            inside = self.value(mid[..., None] * omega) < 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        rho = 0.5 * (lo + hi)
        for _ in range(3):
            x = rho[..., None] * omega
            rho = rho - self.value(x) / np.sum(self.gradient(x) * omega, axis=-1)
        return rho

    def radial_derivative(self, omega, d_omega, rho=None):
        """Directional derivative of ``rho(omega)`` along the variation ``d_omega``."""
        if rho is None:
            rho = self.radial(omega)
        g = self.gradient(rho[..., None] * omega)
        return -rho * np.sum(g * d_omega, axis=-1) / np.sum(g * omega, axis=-1)

    def contour_curve(self) -> Optional[Callable]:
        """Map ``theta -> (x, dx/dtheta)`` tracing the apparent contour, if known."""
        if not self.z_symmetric:
            return None

        def equator(theta):
            theta = np.asarray(theta, dtype=float)
            omega = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=-1)
            d_omega = np.stack([-np.sin(theta), np.cos(theta), np.zeros_like(theta)], axis=-1)
            rho = self.radial(omega)
            d_rho = self.radial_derivative(omega, d_omega, rho)
            return rho[..., None] * omega, d_rho[..., None] * omega + rho[..., None] * d_omega

        return equator

    def scaled(self, factor: float) -> "Surface":
        return ScaledSurface(self, factor)

    def to_spec(self) -> dict:
        return {"kind": self.name}


def _rotation(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * k @ k


class Ellipsoid(Surface):
    """``x^T A x = 1`` with semi-axes ``a, b, c`` optionally rotated by ``angle`` about ``axis``."""

    name = "ellipsoid"

    def __init__(self, a: float, b: float, c: float, axis=None, angle: float = 0.0):
        if min(a, b, c) <= 0:
            raise ValueError("ellipsoid semi-axes must be positive")
        self.a, self.b, self.c = float(a), float(b), float(c)
        self.axis = None if axis is None else [float(v) for v in axis]
        self.angle = float(angle)
        rot = np.eye(3) if axis is None or angle == 0.0 else _rotation(axis, angle)
        self.rotation = rot
        self.matrix = rot @ np.diag([a**-2, b**-2, c**-2]) @ rot.T
        self.z_symmetric = bool(np.allclose(self.matrix[2, :2], 0.0, atol=1e-15))
        self.scale = max(a, b, c)

    def value(self, x):
        return np.einsum("...i,ij,...j->...", x, self.matrix, x) - 1.0

    def gradient(self, x):
        return 2.0 * x @ self.matrix

    def hessian(self, x):
        x = np.asarray(x)
        return np.broadcast_to(2.0 * self.matrix, x.shape[:-1] + (3, 3))

    def radial(self, omega):
        return 1.0 / np.sqrt(np.einsum("...i,ij,...j->...", omega, self.matrix, omega))

    def contour_curve(self):
        # the contour lies in the plane conjugate to e3: {x : (A x) . e3 = 0}
        m = self.matrix @ E3
        m = m / np.linalg.norm(m)
        p = np.cross(m, [1.0, 0.0, 0.0])
        if np.linalg.norm(p) < 1e-8:
            p = np.cross(m, [0.0, 1.0, 0.0])
        p /= np.linalg.norm(p)
        q = np.cross(m, p)
        basis = np.stack([p, q], axis=1)
        lam, vec = np.linalg.eigh(basis.T @ self.matrix @ basis)
        axes = basis @ vec / np.sqrt(lam)

        def ellipse(theta):
            theta = np.asarray(theta, dtype=float)
            cs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            dcs = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
            return cs @ axes.T, dcs @ axes.T

        return ellipse

    def to_spec(self):
        spec = {"kind": "ellipsoid", "a": self.a, "b": self.b, "c": self.c}
        if self.axis is not None and self.angle:
            spec.update(axis=self.axis, angle=self.angle)
        return spec


class ImplicitSurface(Surface):
    """Level set of a user function with a user gradient.

    The Hessian, when not supplied, is a fourth-order central difference of
    the gradient with step ``1e-4 * scale``.
    """

    def __init__(self, func, grad, hess=None, *, z_symmetric: bool, scale: float = 1.0,
                 name: str = "implicit", spec: Optional[dict] = None):
        self._f, self._g, self._h = func, grad, hess
        self.z_symmetric = z_symmetric
        self.scale = scale
        self.name = name
        self._spec = spec or {"kind": "implicit", "name": name}

    def value(self, x):
        return self._f(np.asarray(x, dtype=float))

    def gradient(self, x):
        return self._g(np.asarray(x, dtype=float))

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        if self._h is not None:
            return self._h(x)
        step = 1e-4 * self.scale
        cols = []
        for j in range(3):
            e = np.zeros(3)
            e[j] = step
            cols.append((-self._g(x + 2 * e) + 8 * self._g(x + e)
                         - 8 * self._g(x - e) + self._g(x - 2 * e)) / (12 * step))
        h = np.stack(cols, axis=-1)
        return 0.5 * (h + np.swapaxes(h, -1, -2))

    def to_spec(self):
        return dict(self._spec)


class ScaledSurface(Surface):
    """The body dilated by ``factor`` about the origin."""

    def __init__(self, base: Surface, factor: float):
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        self.base, self.factor = base, float(factor)
        self.z_symmetric = base.z_symmetric
        self.scale = base.scale * factor
        self.name = f"{base.name}*{factor:g}"

    def value(self, x):
        return self.base.value(np.asarray(x) / self.factor)

    def gradient(self, x):
        return self.base.gradient(np.asarray(x) / self.factor) / self.factor

    def hessian(self, x):
        return self.base.hessian(np.asarray(x) / self.factor) / self.factor**2

    def radial(self, omega):
        return self.factor * self.base.radial(omega)

    def contour_curve(self):
        base = self.base.contour_curve()
        if base is None:
            return None
        return lambda theta: tuple(self.factor * v for v in base(theta))

    def to_spec(self):
        return {**self.base.to_spec(), "scale": self.factor}


def tapered_sphere(taper: float = 0.3) -> ImplicitSurface:
    """``x^2 + y^2 + (1 + taper * x) z^2 = 1``: an egg symmetric under ``z -> -z``.

    Its contour is the unit circle, with transverse curvature
    ``beta(s) = 1 + taper * cos(s)``, so the contour function has a single
    non-degenerate minimum at ``(-1, 0, 0)``.
    """
    if not 0 < abs(taper) < 0.5:
        raise ValueError("taper must satisfy 0 < |taper| < 0.5")
    k = float(taper)

    def func(x):
        return x[..., 0] ** 2 + x[..., 1] ** 2 + (1 + k * x[..., 0]) * x[..., 2] ** 2 - 1.0

    def grad(x):
        return np.stack([2 * x[..., 0] + k * x[..., 2] ** 2,
                         2 * x[..., 1],
                         2 * (1 + k * x[..., 0]) * x[..., 2]], axis=-1)

    return ImplicitSurface(func, grad, z_symmetric=True, scale=1.5, name="egg",
                           spec={"kind": "egg", "taper": k})


PRESETS = {
    "sphere": lambda: Ellipsoid(1.0, 1.0, 1.0),
    "ellipsoid": lambda: Ellipsoid(2.0, 1.0, 1.0),
    "egg": lambda: tapered_sphere(0.3),
    "tilted": lambda: Ellipsoid(2.0, 1.5, 1.0, axis=[1.0, 2.0, 0.5], angle=0.6),
}


def surface_from_spec(spec) -> Surface:
    """Build a surface from a preset name or a JSON-like dict.

    ``{"kind": "ellipsoid", "a": 2, "b": 1, "c": 1}`` (optional ``axis`` and
    ``angle``), ``{"kind": "egg", "taper": 0.3}`` or ``{"kind": "<preset>"}``;
    an optional ``scale`` dilates the body.
    """
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ValueError(f"unknown surface preset {spec!r}; choose from {sorted(PRESETS)}")
        return PRESETS[spec]()
    spec = dict(spec)
    kind = spec.pop("kind", None)
    scale = spec.pop("scale", None)
    if kind == "ellipsoid":
        surface = Ellipsoid(spec["a"], spec["b"], spec["c"], spec.get("axis"), spec.get("angle", 0.0))
    elif kind == "egg":
        surface = tapered_sphere(spec.get("taper", 0.3))
    elif kind == "preset" or kind in PRESETS:
        surface = surface_from_spec(spec.get("name", kind))
    else:
        raise ValueError(f"unknown surface kind {kind!r}")
    return surface if scale in (None, 1, 1.0) else surface.scaled(scale)
