import math

import numpy as np
import pytest

from magcontour.asymptotics import UNKNOWN_TERMS, eigenfunction_profile, predict_eigenvalue
from magcontour.reduced_operators import minimize_band, quantize_band


def test_terms_and_their_ratios(consts, frames, egg_band):
    h = 1e-3
    p = predict_eigenvalue(1, h, consts, frames["egg"], egg_band)
    assert abs(p.term_h - consts.theta0 * h) < 1e-18
    assert abs(p.term_h43 / p.term_h - egg_band.K_min * consts.theta0_m2 / consts.theta0 * h ** (1 / 3)) < 1e-14
    assert abs(p.term_h53 - 0.5 * egg_band.harmonic_gap_coefficient * h ** (5 / 3)) < 1e-18
    assert p.term_h32_coeff_unknown and p.remainder_order == "o(h^{5/3})"
    assert p.computable_sum == p.term_h + p.term_h43 + p.term_h53
    assert p.as_dict()["unknown"] == UNKNOWN_TERMS


@pytest.mark.parametrize("name,power", [("term_h", 1.0), ("term_h43", 4 / 3), ("term_h53", 5 / 3)])
def test_log_log_slopes(consts, frames, egg_band, name, power):
    hs = 2.0 ** -np.arange(4, 13)
    vals = [getattr(predict_eigenvalue(3, h, consts, frames["egg"], egg_band), name) for h in hs]
    assert abs(np.polyfit(np.log(hs), np.log(vals), 1)[0] - power) < 1e-10


def test_gap_independent_of_n_and_levels_increase(consts, frames, egg_band):
    h = 2e-3
    preds = [predict_eigenvalue(n, h, consts, frames["egg"], egg_band) for n in range(1, 8)]
    gaps = [b.computable_sum - a.computable_sum for a, b in zip(preds, preds[1:])]
    assert np.allclose(gaps, egg_band.harmonic_gap_coefficient * h ** (5 / 3), rtol=1e-12)
    assert all(p.gap_to_next == preds[0].gap_to_next for p in preds)


def test_hypotheses_enforced(consts, frames):
    frame = frames["ellipsoid"]
    an = minimize_band(frame, consts, require_unique=False)
    with pytest.raises(ValueError, match="hypotheses"):
        predict_eigenvalue(1, 1e-3, consts, frame, an)
    assert predict_eigenvalue(1, 1e-3, consts, frame, an, check=False).term_h > 0


def test_argument_checks(consts, frames, egg_band):
    for bad in ({"n": 0, "h": 0.1}, {"n": 1, "h": 1.0}, {"n": 1, "h": -1e-3}):
        with pytest.raises(ValueError):
            predict_eigenvalue(bad["n"], bad["h"], consts, frames["egg"], egg_band)
    with pytest.raises(ValueError):
        eigenfunction_profile(11, 1e-4, consts, frames["egg"], egg_band)
    with pytest.raises(ValueError):
        eigenfunction_profile(1, 1e-4, consts, frames["egg"], egg_band, hermite="other")
    with pytest.raises(ValueError):
        eigenfunction_profile(1, 1e-4, consts, frames["egg"], egg_band,
                              grids={"t": np.linspace(-1, 1, 5), "r": np.zeros(3), "s": np.zeros(3)})


@pytest.mark.parametrize("n", range(1, 7))
def test_profile_norms_and_nodes(consts, frames, egg_band, n):
    prof = eigenfunction_profile(n, 1e-4, consts, frames["egg"], egg_band)
    assert all(abs(v - 1) < 1e-6 for v in prof.factor_norms().values())
    assert prof.s.sign_changes() == n - 1
    assert prof.t.sign_changes() == 0 and prof.r.sign_changes() == 0


def test_boundary_factor_peaks_at_wall(consts, frames, egg_band):
    prof = eigenfunction_profile(1, 1e-4, consts, frames["egg"], egg_band)
    assert int(np.argmax(prof.t.values)) == 0
    assert np.all(prof.t.values > 0)
    assert abs(prof.r.grid[np.argmax(prof.r.values)]) < 2 * np.diff(prof.r.grid)[0]


def test_factor_widths_scale(consts, frames, egg_band):
    a = eigenfunction_profile(1, 4e-4, consts, frames["egg"], egg_band)
    b = eigenfunction_profile(1, 1e-4, consts, frames["egg"], egg_band)
    assert abs(a.t.second_moment() / b.t.second_moment() / 4 - 1) < 0.02
    assert abs(math.sqrt(a.t.second_moment() / b.t.second_moment()) / 2 - 1) < 0.01
    assert abs(a.r.second_moment() / b.r.second_moment() / 4 ** (2 / 3) - 1) < 0.02
    assert abs(a.s.second_moment() / b.s.second_moment() / 4 ** (1 / 3) - 1) < 0.02


def test_values_is_outer_product(consts, frames, egg_band):
    grids = {"t": np.linspace(0, 0.05, 4), "r": np.linspace(-0.1, 0.1, 5), "s": np.linspace(-0.3, 0.3, 6)}
    prof = eigenfunction_profile(2, 1e-3, consts, frames["egg"], egg_band, grids=grids)
    assert prof.values.shape == (4, 5, 6)
    assert abs(prof.values[1, 2, 3] - prof.t.values[1] * prof.r.values[2] * prof.s.values[3]) < 1e-14


def test_quantized_ground_state_width_matches_hessian_scale(consts, frames, egg_band):
    eps = 0.01
    q = quantize_band(frames["egg"], consts, eps, 256)
    _, vecs = np.linalg.eigh(q.matrix)
    dens = np.abs(vecs[:, 0]) ** 2
    s = frames["egg"].period * np.arange(q.num_points) / q.num_points
    mean = np.sum(s * dens)
    spread = np.sum((s - mean) ** 2 * dens) / eps
    prof = eigenfunction_profile(1, 1e-4, consts, frames["egg"], egg_band)
    full = 1 / (2 * prof.hermite_scale_full**2)
    simple = 1 / (2 * prof.hermite_scale**2)
    assert abs(spread / full - 1) < 0.015
    assert abs(spread / simple - 1) > 0.15
    assert prof.hermite_scale_difference > 0.1


def test_hessian_variant_changes_only_the_s_factor(consts, frames, egg_band):
    a = eigenfunction_profile(3, 1e-4, consts, frames["egg"], egg_band)
    b = eigenfunction_profile(3, 1e-4, consts, frames["egg"], egg_band, hermite="hessian")
    assert np.array_equal(a.t.values, b.t.values) and np.array_equal(a.r.values, b.r.values)
    ratio = a.s.second_moment() / b.s.second_moment()
    assert abs(ratio - (b.hermite_scale_full / a.hermite_scale) ** 2) < 1e-3
