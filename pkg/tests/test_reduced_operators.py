import math

import numpy as np
import pytest
from scipy.special import mathieu_a, mathieu_b

from magcontour.errors import NumericalError
from magcontour.geometry import gamma_frame
from magcontour.reduced_operators import (
    BandFunction, MontgomeryTable, band_value, contour_coefficients, harmonic_levels,
    minimize_band, montgomery_table, quantize_band, quantize_symbol, reduced_ground_energy_direct,
)
from magcontour.surfaces import PRESETS, tapered_sphere


def quadratic_band():
    K = lambda s, d=0: {0: 1 + s**2, 1: 2 * s, 2: np.full_like(s, 2.0)}[d]
    g = lambda s, d=0: np.ones_like(s) if d == 0 else np.zeros_like(s)
    mu = lambda x: 1 + (np.asarray(x) - 1) ** 2
    return BandFunction(K, g, mu, mu_min=(1.0, 1.0), mu_curvature=2.0, domain=(-2.0, 2.0),
                        period=None, mu_exact=lambda x: 1 + (x - 1) ** 2)


def test_quadratic_surrogate_minimum_and_hessian():
    an = minimize_band(quadratic_band(), samples=401)
    assert abs(an.s_min) < 1e-12 and abs(an.sigma_min - 1) < 1e-12
    assert abs(an.b_min - 1) < 1e-14
    assert np.allclose(an.hess, np.diag([2.0, 2.0]), atol=1e-8)
    assert np.allclose(an.hess, an.hess_chain_rule, atol=1e-8)
    assert abs(an.det_hess - 4) < 1e-7
    assert abs(harmonic_levels(an, 0.1, 2) - 1.3) < 1e-8
    with pytest.raises(ValueError):
        quantize_band(quadratic_band(), epsilon=0.1)


def test_harmonic_levels_spacing(egg_band):
    levels = [harmonic_levels(egg_band, 0.02, n) for n in range(1, 5)]
    assert np.allclose(np.diff(levels), 0.02 * egg_band.harmonic_gap_coefficient, rtol=1e-12)
    assert abs(harmonic_levels(egg_band, 0.0, 3) - egg_band.b_min) == 0
    with pytest.raises(ValueError):
        harmonic_levels(egg_band, 0.02, 0)


@pytest.mark.parametrize("eps", [0.2, 0.1])
def test_quantization_matches_mathieu_oracle(eps):
    # eps^2 D^2 + 2 - 2 cos s is a Mathieu operator with q = -4/eps^2
    q = 4 / eps**2
    ref = sorted([mathieu_a(2 * k, q) for k in range(4)] + [mathieu_b(2 * k, q) for k in range(1, 4)])[:6]
    lam = quantize_symbol(lambda s, x: 2 - 2 * np.cos(s) + x**2, 2 * np.pi, eps, 256).eigenvalues[:6]
    assert np.allclose(lam, 2 + eps**2 * np.array(ref) / 4, atol=1e-9)
    # harmonic approximation of the same well
    assert np.allclose(lam[:3], eps * (2 * np.arange(1, 4) - 1), rtol=0.15)


def test_quantization_constant_and_hermitian():
    q = quantize_symbol(lambda s, x: np.full(np.broadcast(s, x).shape, 0.75), 5.0, 0.05, 128)
    assert np.max(np.abs(q.eigenvalues - 0.75)) < 1e-12
    # the midpoint is ambiguous only on the wrap-around diagonal |j - k| = N/2,
    # which is negligible once the symbol decays before the Nyquist frequency
    mixed = quantize_symbol(lambda s, x: (1 + 0.3 * np.cos(s)) * np.exp(-x**2), 2 * np.pi, 0.2, 128)
    assert mixed.asymmetry < 1e-12
    assert np.allclose(mixed.matrix, mixed.matrix.conj().T)


def test_quantization_rejects_bad_arguments():
    sym = lambda s, x: s * 0 + x * 0
    with pytest.raises(ValueError):
        quantize_symbol(sym, 1.0, 0.5, 128)
    with pytest.raises(ValueError):
        quantize_symbol(sym, 1.0, 0.01, 100)


def test_table_accuracy_and_extension():
    table = montgomery_table()
    assert table.probe_error < 1e-9
    for xi in (0.1234, 0.35, 1.777):
        assert abs(float(table(xi)) - table.curve(xi)) < 1e-9
        assert abs(float(table(xi, 1)) - table.curve.slope(xi)) < 1e-7
    fresh = MontgomeryTable(table.curve, spacing=table.spacing, xi_range=(0.0, 1.0))
    assert abs(float(fresh(4.3)) - table.curve(4.3)) < 1e-8 and fresh.hi >= 4.3
    with pytest.raises(NumericalError):
        fresh(100.0)


def test_band_identity_on_tilted_contour(frames, consts):
    frame = frames["tilted"]
    band = BandFunction.from_frame(frame, consts)
    for s in (0.3, 2.1, 4.4):
        for xi in (0.05, 0.41, 0.93):
            sigma = xi / float(band.g(np.array([s]))[0])
            direct = reduced_ground_energy_direct(s, sigma, frame, consts)
            assert abs(direct - band_value(s, sigma, frame, consts)) / direct < 1e-6


def test_gauge_invariance_and_cross_term(frames, consts):
    frame = frames["tilted"]
    c = contour_coefficients(frame, 1.3)
    assert abs(c.cos_phi * c.sin_phi) > 0.05
    e0 = reduced_ground_energy_direct(1.3, 0.6, frame, consts, gauge_phase=0.0)
    e1 = reduced_ground_energy_direct(1.3, 0.6, frame, consts, gauge_phase=2.5)
    plain = reduced_ground_energy_direct(1.3, 0.6, frame, consts)
    assert abs(e0 - e1) < 1e-10
    assert abs(e0 - plain) / plain < 1e-10


def test_unit_contour_band_is_constant_times_montgomery_min(frames, consts):
    band = BandFunction.from_frame(frames["sphere"], consts)
    s = np.linspace(0, frames["sphere"].period, 7, endpoint=False)
    vals = band(s, band.sigma_star(s))
    assert np.max(np.abs(vals - consts.alpha0 ** (1 / 3) * consts.theta0_m2)) < 1e-9


def test_egg_minimum(egg_band, consts, frames):
    assert abs(egg_band.s_min - math.pi) < 1e-9
    assert abs(egg_band.b_min - egg_band.K_min * consts.theta0_m2) < 1e-9
    c = contour_coefficients(frames["egg"], egg_band.s_min)
    assert abs(c.beta - 0.7) < 1e-9
    closed = c.E ** (2 / 3) * c.beta ** (1 / 3) * consts.xi0_m2 / consts.alpha0 ** (1 / 3)
    assert abs(egg_band.sigma_min - closed) < 1e-8
    assert abs(egg_band.mixed_partial) < 1e-8
    assert np.all(np.linalg.eigvalsh(egg_band.hess) > 0)
    assert np.max(np.abs(egg_band.hess - egg_band.hess_chain_rule)) < 1e-6 * np.max(np.abs(egg_band.hess))


def test_band_min_scales_under_dilation(consts, egg_band):
    lam = 1.5
    frame = gamma_frame(tapered_sphere(0.3).scaled(lam), 256, constants=consts)
    an = minimize_band(frame, consts)
    # beta -> beta/lam and E is unchanged, so K and b_min scale like lam^(-2/3)
    assert abs(an.b_min - lam ** (-2 / 3) * egg_band.b_min) < 1e-9
    assert abs(an.s_min - lam * egg_band.s_min) < 1e-8


def test_ellipsoid_minimum_not_unique(frames, consts):
    frame = frames["ellipsoid"]
    with pytest.raises(ValueError, match="unique"):
        minimize_band(frame, consts)
    an = minimize_band(frame, consts, require_unique=False)
    x = np.abs(frame.series("gamma")(an.s_min)[0])
    assert np.allclose(x, [0, 1, 0], atol=1e-7)
    assert abs(an.sigma_min - consts.xi0_m2 / consts.alpha0 ** (1 / 3)) < 1e-8


def test_quantized_gaps_follow_hessian(egg_band, frames, consts):
    eps = 0.01
    lam = quantize_band(frames["egg"], consts, eps, 256).eigenvalues[:4]
    assert np.max(np.abs(np.diff(lam) / (eps * egg_band.harmonic_gap_coefficient) - 1)) < 0.05
    assert abs(lam[0] - egg_band.b_min) < 2 * eps
