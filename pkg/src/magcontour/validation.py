"""Invariant suite across all modules, reported as a pass/fail/skip table."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .asymptotics import eigenfunction_profile, predict_eigenvalue
from .errors import NumericalError
from .geometry import (
    PeriodicSeries, cancellation_terms, gamma_frame, geodesic_extend, mean_circulation,
    verify_assumptions,
)
from .model_operators import (
    DEFAULT_POINTS, SpectralCurve, default_constants, mu1_de_gennes_shooting,
)
from .reduced_operators import (
    BandFunction, contour_coefficients, minimize_band, montgomery_table, quantize_band,
    quantize_symbol, reduced_ground_energy_direct,
)
from .surfaces import Surface

EPSILONS = (0.04, 0.02, 0.01)


@dataclass
class Check:
    module: str
    name: str
    status: str
    value: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""

    def row(self):
        fmt = lambda v: "" if v is None else f"{v:.3e}"
        return [self.module, self.name, self.status, fmt(self.value), fmt(self.tolerance), self.detail]


def _bound(module, name, value, tol, detail="") -> Check:
    value = float(value)
    ok = math.isfinite(value) and value <= tol
    return Check(module, name, "pass" if ok else "fail", value, tol, detail)


def _flag(module, name, ok, detail="") -> Check:
    return Check(module, name, "pass" if ok else "fail", detail=detail)


def shadow_area(frame) -> float:
    """Area enclosed by the projection of Gamma onto z = 0 (Green's formula, spectral)."""
    x, y = frame.gamma[:, 0], frame.gamma[:, 1]
    dx = PeriodicSeries(x, frame.period).derivative_samples()
    dy = PeriodicSeries(y, frame.period).derivative_samples()
    return float(abs(0.5 * np.mean(x * dy - y * dx) * frame.period))


def model_checks(resolution: int) -> list[Check]:
    m = "model_operators"
    c1, c2 = default_constants(resolution), default_constants(2 * resolution)
    d1, d2 = c1.as_dict(), c2.as_dict()
    keys = ("theta0", "xi0", "alpha0", "theta0_m2", "xi0_m2")
    out = [_bound(m, "constants N vs 2N", max(abs(d1[k] - d2[k]) for k in keys), 1e-7)]
    dg = SpectralCurve("de_gennes", resolution)
    worst = max(abs(mu1_de_gennes_shooting(x, dg(x)) - dg(x)) for x in (0.3, c1.xi0, 1.2))
    out.append(_bound(m, "shooting vs difference scheme", worst, 1e-7, "xi in {0.3, xi0, 1.2}"))
    out.append(_bound(m, "mu_dG(0) = 1", abs(dg(0.0) - 1.0), 2e-4))
    out.append(_bound(m, "Theta0 = xi0^2", abs(c1.theta0 - c1.xi0**2), 1e-6))
    out.append(_bound(m, "Montgomery table probe error", montgomery_table(resolution).probe_error, 1e-9))
    return out


def geometry_checks(surface: Surface, frame, samples: int) -> list[Check]:
    m = "surface_geometry"
    out = [
        _bound(m, "closure", frame.closure_gap, 1e-9),
        _bound(m, "n3 = 0 on Gamma", np.max(np.abs(frame.normal[:, 2])), 1e-8),
        _bound(m, "direct triple det = 1",
               np.max(np.abs(np.linalg.det(np.stack([frame.dr_gamma, frame.ds_gamma, frame.normal], -1)) - 1)), 1e-9),
        _bound(m, "beta two ways", np.max(np.abs(frame.beta - frame.beta_fd)), 1e-5),
        _bound(m, "kappa_g chart vs Frenet", np.max(np.abs(frame.kappa_g - frame.kappa_g_frenet)), 1e-5),
    ]
    chart = geodesic_extend(surface, frame)
    out += [
        _bound(m, "|d_r gamma| = 1", np.max(np.abs(np.linalg.norm(chart.dr_gamma, axis=-1) - 1)), 1e-9),
        _bound(m, "<d_r gamma, d_s gamma> = 0", np.max(np.abs(np.sum(chart.dr_gamma * chart.ds_gamma, -1))), 1e-8),
        _bound(m, "alpha(0, s) = 1", np.max(np.abs(chart.at_r0(chart.alpha) - 1)), 1e-9),
        _bound(m, "d_s alpha(0, s) = 0",
               np.max(np.abs(PeriodicSeries(chart.at_r0(chart.alpha), frame.period).derivative_samples())), 1e-7),
        _bound(m, "field normalization at t = 0",
               np.max(np.abs(chart.b_frame[..., 0] ** 2 + chart.alpha * chart.b_frame[..., 1] ** 2
                             + chart.b_frame[..., 2] ** 2 - 1)), 1e-8),
    ]
    short = geodesic_extend(surface, frame, r_max=5e-3, steps=2)
    terms = cancellation_terms(short)
    out.append(_bound(m, "d_r alpha + 2 kappa_g (Frenet)",
                      np.max(np.abs(short.d_dr0(short.alpha) + 2 * frame.kappa_g_frenet)), 1e-5))
    out.append(_bound(m, "cancellation residual", np.max(np.abs(terms.residual)), 1e-4))
    if surface.z_symmetric:
        flux = mean_circulation(surface)
        out.append(_bound(m, "mean circulation = shadow/|Gamma|",
                          abs(flux - shadow_area(frame) / frame.period), 1e-6, f"<f> = {flux:.10f}"))
    else:
        out.append(Check(m, "mean circulation = shadow/|Gamma|", "skip", detail="surface not z-symmetric"))
    report = verify_assumptions(frame)
    out.append(_flag(m, "beta > 0 (linear vanishing)", report.linear_vanishing, f"min beta = {report.beta_min:.6g}"))
    return out


def band_identity_checks(frame, consts) -> list[Check]:
    m = "reduced_operators"
    band = BandFunction.from_frame(frame, consts)
    worst = 0.0
    for s in frame.period * (np.arange(5) + 0.5) / 5:
        for xi in np.linspace(0.0, 1.0, 5) + 0.0037:
            sigma = xi / float(band.g(np.array([s]))[0])
            direct = reduced_ground_energy_direct(s, sigma, frame, consts)
            worst = max(worst, abs(direct - float(band(s, sigma))) / direct)
    out = [_bound(m, "direct reduced operator = band (5x5)", worst, 1e-6)]
    s0 = 0.37 * frame.period
    sig0 = 0.5 / float(band.g(np.array([s0]))[0])
    gauge = abs(reduced_ground_energy_direct(s0, sig0, frame, consts, gauge_phase=0.0)
                - reduced_ground_energy_direct(s0, sig0, frame, consts, gauge_phase=2.5))
    out.append(_bound(m, "gauge phase shift invariance", gauge, 1e-10))
    crossed = reduced_ground_energy_direct(s0, sig0, frame, consts, gauge_phase=0.0)
    plain = reduced_ground_energy_direct(s0, sig0, frame, consts)
    out.append(_bound(m, "cross term removed by gauge", abs(crossed - plain) / plain, 1e-10))
    const = quantize_symbol(lambda s, x: np.full(np.broadcast(s, x).shape, 0.75), frame.period, 0.02, 128)
    out.append(_bound(m, "constant symbol quantization", np.max(np.abs(const.eigenvalues - 0.75)), 1e-12))
    return out


def band_minimum_checks(frame, consts, num_points: int = 256):
    m = "reduced_operators"
    an = minimize_band(frame, consts)
    coef = contour_coefficients(frame, an.s_min)
    closed = coef.E ** (2 / 3) * coef.beta ** (1 / 3) * consts.xi0_m2 / consts.alpha0 ** (1 / 3)
    out = [
        _bound(m, "b_min = K_min Theta0_m2", abs(an.b_min - an.K_min * consts.theta0_m2), 1e-8),
        _bound(m, "sigma_min closed form", abs(an.sigma_min - closed), 1e-7),
        _flag(m, "Hessian positive definite", np.all(np.linalg.eigvalsh(an.hess) > 0),
              f"det = {an.det_hess:.8g}, mixed = {an.mixed_partial:.2e}"),
        _bound(m, "Hessian vs chain rule", np.max(np.abs(an.hess - an.hess_chain_rule)) / np.max(np.abs(an.hess)), 1e-6),
    ]
    root = an.harmonic_gap_coefficient
    defects = {}
    for eps in EPSILONS:
        q = quantize_band(frame, consts, eps, num_points)
        lam = q.eigenvalues[:4]
        defects[eps] = (lam[:3] - an.b_min) / eps - (2 * np.arange(1, 4) - 1) * root / 2
        if eps == EPSILONS[-1]:
            gap_err = np.max(np.abs(np.diff(lam) / (eps * root) - 1))
    ratios = [defects[a] / defects[b] for a, b in zip(EPSILONS, EPSILONS[1:])]
    ratios = np.concatenate(ratios)
    out.append(Check(m, "harmonic defect halving", "pass" if np.all((ratios >= 1.7) & (ratios <= 2.3)) else "fail",
                     detail="ratios " + ", ".join(f"{r:.3f}" for r in ratios)))
    out.append(_bound(m, "gaps = eps sqrt(det) at eps = 0.01", gap_err, 0.05))
    return an, out


def asymptotic_checks(frame, consts, an) -> list[Check]:
    m = "asymptotics"
    hs = 2.0 ** -np.arange(4, 13)
    preds = [predict_eigenvalue(2, h, consts, frame, an) for h in hs]
    logs = np.log(hs)
    out = []
    for name, expected in (("term_h", 1.0), ("term_h43", 4 / 3), ("term_h53", 5 / 3)):
        slope = np.polyfit(logs, np.log([getattr(p, name) for p in preds]), 1)[0]
        out.append(_bound(m, f"{name} slope = {expected:.4g}", abs(slope - expected), 1e-10))
    gaps = [predict_eigenvalue(n, h, consts, frame, an, check=False).gap_to_next / h ** (5 / 3)
            for n in range(1, 5) for h in hs]
    out.append(_bound(m, "gap / h^(5/3) constant", np.ptp(gaps) / an.harmonic_gap_coefficient, 1e-13))
    h = 1e-4
    norms, nodes = 0.0, True
    for n in range(1, 7):
        prof = eigenfunction_profile(n, h, consts, frame, an)
        norms = max(norms, max(abs(v - 1) for v in prof.factor_norms().values()))
        nodes &= prof.s.sign_changes() == n - 1
    out.append(_bound(m, "profile factor norms", norms, 1e-6, "n = 1..6, h = 1e-4"))
    out.append(_flag(m, "Hermite node counts", nodes, "n - 1 sign changes for n = 1..6"))
    m1 = eigenfunction_profile(1, 4e-4, consts, frame, an).t.second_moment()
    m2 = eigenfunction_profile(1, 1e-4, consts, frame, an).t.second_moment()
    out.append(_bound(m, "t second moment scales as h", abs(m1 / m2 / 4 - 1), 0.02))
    return out


def run_validation(surface: Surface, resolution: int = DEFAULT_POINTS, samples: int = 256,
                   progress: Optional[Callable[[str], None]] = None) -> list[Check]:
    say = progress or (lambda _msg: None)
    say("model operators")
    checks = model_checks(resolution)
    consts = default_constants(resolution)
    say("geometry")
    frame = gamma_frame(surface, samples, constants=consts)
    checks += geometry_checks(surface, frame, samples)
    say("band identity")
    checks += band_identity_checks(frame, consts)
    report = verify_assumptions(frame)
    if not (report.linear_vanishing and report.K_unique_nondegenerate_min):
        why = f"K has {report.num_global_minima} global minima on this surface"
        for mod, name in (("reduced_operators", "band minimum and quantized levels"),
                          ("asymptotics", "expansion terms and profiles")):
            checks.append(Check(mod, name, "skip", detail=why))
        return checks
    say("band minimum and quantization")
    try:
        an, more = band_minimum_checks(frame, consts)
    except NumericalError as exc:
        return checks + [Check("reduced_operators", "band minimum", "fail", detail=str(exc))]
    checks += more
    say("asymptotics")
    checks += asymptotic_checks(frame, consts, an)
    return checks
