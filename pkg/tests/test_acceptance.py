"""Acceptance criteria 1-8, one PASS/FAIL line each (visible without ``-s``)."""

import math
import time

import numpy as np
import pytest
from scipy.special import ellipe

from magcontour import model_operators
from magcontour.geometry import (
    cancellation_terms, extract_gamma, gamma_frame, geodesic_extend, mean_circulation,
)
from magcontour.model_operators import DEFAULT_POINTS, default_constants
from magcontour.reduced_operators import contour_coefficients, minimize_band
from magcontour.surfaces import PRESETS, Ellipsoid, tapered_sphere
from magcontour.validation import (
    asymptotic_checks, band_identity_checks, band_minimum_checks, geometry_checks, model_checks,
)


def report(capsys, number, checks, elapsed, budget):
    """``checks`` is a list of (label, ok, detail)."""
    failed = [c for c in checks if not c[1]]
    within = budget is None or elapsed < budget
    ok = not failed and within
    limit = "" if budget is None else f" (limit {budget:.0f} s)"
    summary = "; ".join(f"{label}: {detail}" for label, _, detail in (failed or checks))
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {elapsed:.1f} s{limit}  {summary}")
    assert not failed, failed
    assert within, f"runtime {elapsed:.1f} s over {budget} s"


def from_validation(items):
    return [(c.name, c.status == "pass",
             f"{c.value:.2e} <= {c.tolerance:.0e}" if c.value is not None else c.detail or c.status)
            for c in items]


def bound(label, value, tol):
    return label, bool(value <= tol), f"{value:.2e} <= {tol:.0e}"


@pytest.fixture(scope="module")
def egg():
    consts = default_constants()
    return consts, gamma_frame(tapered_sphere(0.3), 256, constants=consts)


def test_criterion_1_model_constants(capsys):
    model_operators._CONSTANTS_CACHE.clear()
    start = time.perf_counter()
    checks = model_checks(DEFAULT_POINTS)
    c = default_constants(DEFAULT_POINTS)
    stationarity = abs(model_operators.SpectralCurve("de_gennes", DEFAULT_POINTS)(c.xi0) - c.xi0**2)
    items = from_validation([k for k in checks if "table" not in k.name])
    items.append(bound("mu_dG(xi0) - xi0^2", stationarity, 1e-6))
    report(capsys, 1, items, time.perf_counter() - start, 30)


def test_criterion_2_geometry_invariants(capsys):
    start = time.perf_counter()
    consts = default_constants()
    wanted = ("|d_r gamma| = 1", "<d_r gamma, d_s gamma> = 0", "alpha(0, s) = 1",
              "d_r alpha + 2 kappa_g (Frenet)", "field normalization at t = 0")
    items = []
    for name, surface in (("ellipsoid", Ellipsoid(2, 1, 1)), ("sphere", PRESETS["sphere"]())):
        frame = gamma_frame(surface, 256, constants=consts)
        for c in geometry_checks(surface, frame, 256):
            if c.name in wanted:
                items += [(f"{name} {c.name}",) + tuple(from_validation([c])[0][1:])]
    sphere = PRESETS["sphere"]()
    chart = geodesic_extend(sphere, extract_gamma(sphere, 64), r_max=0.4, steps=160)
    items.append(bound("sphere alpha = cos^2 r", np.max(np.abs(chart.alpha - np.cos(chart.r_grid)[:, None] ** 2)), 1e-8))
    frame = gamma_frame(Ellipsoid(2, 1, 1), 256, constants=consts)
    i = int(np.argmax(np.abs(frame.gamma[:, 0])))
    items.append(bound("|beta| = a/c^2 at (a, 0, 0)", abs(abs(frame.beta[i]) - 2.0), 1e-6))
    report(capsys, 2, items, time.perf_counter() - start, 60)


def test_criterion_3_cancellation(capsys):
    start = time.perf_counter()
    surface = Ellipsoid(2, 1, 1)
    chart = geodesic_extend(surface, extract_gamma(surface, 32), r_max=5e-3, steps=2)
    residual = np.max(np.abs(cancellation_terms(chart).residual))
    report(capsys, 3, [bound("residual at 32 samples", residual, 1e-4)], time.perf_counter() - start, 60)


def test_criterion_4_flux_constant(capsys):
    start = time.perf_counter()
    items = []
    for radius in (1.0, 2.5):
        f = mean_circulation(Ellipsoid(1, 1, 1).scaled(radius))
        items.append(bound(f"sphere R = {radius}", abs(f - radius / 2), 1e-6))
    for a, b, c in ((2, 1, 1), (1.5, 0.7, 1.3), (1, 2, 0.5)):
        big, small = max(a, b), min(a, b)
        perimeter = 4 * big * ellipe(1 - (small / big) ** 2)
        f = mean_circulation(Ellipsoid(a, b, c))
        items.append(bound(f"ellipsoid {a, b, c}", abs(f - math.pi * a * b / perimeter), 1e-6))
    report(capsys, 4, items, time.perf_counter() - start, 30)


def test_criterion_5_band_identification(capsys, egg):
    start = time.perf_counter()
    consts, frame = egg
    items = from_validation([c for c in band_identity_checks(frame, consts) if "5x5" in c.name])
    an = minimize_band(frame, consts)
    c = contour_coefficients(frame, an.s_min)
    closed = c.E ** (2 / 3) * c.beta ** (1 / 3) * consts.xi0_m2 / consts.alpha0 ** (1 / 3)
    items.append(bound("b_min = K_min Theta0_m2", abs(an.b_min - an.K_min * consts.theta0_m2), 1e-8))
    items.append(bound("sigma_min closed form", abs(an.sigma_min - closed), 1e-7))
    report(capsys, 5, items, time.perf_counter() - start, 120)


@pytest.fixture(scope="module")
def band_minimum(egg):
    start = time.perf_counter()
    consts, frame = egg
    an, checks = band_minimum_checks(frame, consts)
    return an, checks, time.perf_counter() - start


def test_criterion_6_harmonic_levels(capsys, band_minimum):
    _, checks, elapsed = band_minimum
    items = from_validation([c for c in checks if c.name.startswith(("harmonic", "gaps"))])
    report(capsys, 6, items, elapsed, 180)


@pytest.fixture(scope="module")
def asymptotics(egg, band_minimum):
    start = time.perf_counter()
    consts, frame = egg
    checks = asymptotic_checks(frame, consts, band_minimum[0])
    return checks, time.perf_counter() - start


def test_criterion_7_expansion_structure(capsys, asymptotics):
    checks, elapsed = asymptotics
    items = from_validation([c for c in checks if "slope" in c.name or "gap" in c.name])
    report(capsys, 7, items, elapsed, None)


def test_criterion_8_profiles(capsys, asymptotics):
    checks, elapsed = asymptotics
    items = from_validation([c for c in checks if c.name in (
        "profile factor norms", "Hermite node counts", "t second moment scales as h")])
    report(capsys, 8, items, elapsed, None)
