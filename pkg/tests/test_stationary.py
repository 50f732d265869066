"""Stationary profiles, bulk residuals, and the gamma scan."""

import math

import numpy as np
import pytest

from cascadelab import (
    CLAIMED_STATIONARY_GAMMAS,
    ConfigurationError,
    ModelFamily,
    NumericError,
    build_s2_diag,
    build_s2_offdiag,
    build_s3_diag,
    bulk_residual,
    energy_slope,
    gamma_scan,
    spectrum_exponent,
    stationary_profile,
)


def _s2_interior_residual(p: float, g: float) -> float:
    """Signed normalized residual of V_i = p^{-5i/6} on one interior shell,
    written out from the raw brackets without the table machinery.  The
    common prefactor and the p^{(gamma+2-5/3)i} scaling cancel in the
    normalization, so any interior shell gives the same number."""
    q = p ** (-5.0 / 6.0)
    terms = [
        p**3 * (p**g - p ** (2 * g)) * q**3,
        (p**g - p**-g),
        p**-3 * (p ** (-2 * g) - p**-g) * q**-3,
    ]
    total = sum(terms)
    scale = sum(abs(t) for t in terms)
    return total / scale if scale else math.nan


def test_profile_values_and_validation():
    prof = stationary_profile(2, 6, c=3.0)
    assert prof.v[0] == 3.0
    assert prof.v[6] == pytest.approx(3.0 * 2.0 ** (-5.0), rel=1e-15)
    with pytest.raises(ConfigurationError):
        stationary_profile(2, 6, c=0.0)
    with pytest.raises(ConfigurationError):
        stationary_profile(1, 6)


def test_bulk_residual_vanishes_at_known_gammas():
    for p in (2, 3):
        for g in (-0.5, -0.25):
            res = bulk_residual(build_s2_diag(p, 16, g), stationary_profile(p, 16))
            assert res.max_abs <= 1e-12
            res = bulk_residual(build_s3_diag(p, 16, g), stationary_profile(p, 16))
            assert res.max_abs <= 1e-12
        for g in (-1.0, -1.5, -1.25):
            res = bulk_residual(build_s2_offdiag(p, 16, g), stationary_profile(p, 16))
            assert res.max_abs <= 1e-12


def test_bulk_residual_nonzero_off_root():
    res = bulk_residual(build_s2_diag(2, 16, 0.3), stationary_profile(2, 16))
    assert res.max_abs > 1e-3


def test_bulk_residual_is_c_invariant_and_shell_independent():
    table = build_s2_diag(2, 20, 0.7)
    a = bulk_residual(table, stationary_profile(2, 20, c=1.0))
    b = bulk_residual(table, stationary_profile(2, 20, c=17.0))
    assert np.allclose(a.values, b.values, rtol=1e-12, atol=0.0)
    # normalized residual is the same number on every interior shell
    assert np.max(a.values) - np.min(a.values) <= 1e-12 * np.max(np.abs(a.values))
    assert a.shells[0] == 4 and a.shells[-1] == 16


def test_bulk_residual_matches_independent_formula():
    for p in (2, 3):
        for g in (-0.8, -0.4, 0.3, 1.1):
            table = build_s2_diag(p, 16, g)
            got = bulk_residual(table, stationary_profile(p, 16)).values[0]
            want = _s2_interior_residual(p, g)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_bulk_residual_errors():
    empty = build_s2_diag(2, 12, 0.0)
    with pytest.raises(ConfigurationError):
        bulk_residual(empty, stationary_profile(2, 12))
    table = build_s2_diag(2, 12, -0.5)
    with pytest.raises(ConfigurationError):
        bulk_residual(table, stationary_profile(2, 12), interior=(10, 4))
    with pytest.raises(ConfigurationError):
        bulk_residual(table, stationary_profile(2, 12), interior=(0, 30))


def test_scan_s2_diag_finds_both_roots():
    report = gamma_scan(ModelFamily.S2_DIAG, 2, r=16, interval=(-1.0, 0.5), grid_step=1e-2)
    roots = [root["gamma"] for root in report.roots]
    assert len(roots) == 2
    assert roots[0] == pytest.approx(-0.5, abs=1e-9)
    assert roots[1] == pytest.approx(-0.25, abs=1e-9)
    assert all(root["residual"] <= 1e-9 for root in report.roots)
    assert report.matches == (True, True)
    d = report.to_json_dict()
    assert set(d) == {
        "family",
        "p",
        "interval",
        "grid_step",
        "tol",
        "roots",
        "paper_claims",
        "matches",
    }


def test_scan_s3_diag_claims_do_not_match():
    report = gamma_scan(ModelFamily.S3_DIAG, 2, r=16, interval=(-3.0, 3.0), grid_step=1e-2)
    roots = [root["gamma"] for root in report.roots]
    assert roots == pytest.approx([-0.5, -0.25], abs=1e-9)
    assert report.paper_claims == CLAIMED_STATIONARY_GAMMAS[ModelFamily.S3_DIAG]
    assert report.matches == (False, False)


def test_scan_s2_offdiag_all_claims_match():
    report = gamma_scan(ModelFamily.S2_OFFDIAG, 2, r=16, interval=(-3.0, 3.0), grid_step=1e-2)
    roots = [root["gamma"] for root in report.roots]
    assert roots == pytest.approx([-1.5, -1.25, -1.0], abs=1e-9)
    assert report.matches == (True, True, True)


def test_scan_roots_verified_by_direct_residual():
    # the scan's accepted roots must reproduce under a fresh residual evaluation
    report = gamma_scan(ModelFamily.S2_DIAG, 3, r=16, interval=(-1.0, 0.0), grid_step=5e-3)
    for root in report.roots:
        table = build_s2_diag(3, 16, root["gamma"])
        assert bulk_residual(table, stationary_profile(3, 16)).max_abs <= 1e-9


def test_scan_agrees_with_dense_independent_scan():
    # brute-force sign changes of the independent formula on a coarse grid
    p = 2
    grid = np.arange(-1.0, 0.5, 1e-2)
    vals = [_s2_interior_residual(p, g) if g != 0.0 else math.nan for g in grid]
    brackets = []
    for k in range(len(grid) - 1):
        a, b = vals[k], vals[k + 1]
        if not (math.isnan(a) or math.isnan(b)) and a * b < 0:
            brackets.append((grid[k], grid[k + 1]))
    report = gamma_scan(ModelFamily.S2_DIAG, p, r=16, interval=(-1.0, 0.5), grid_step=1e-2)
    assert len(report.roots) >= len(brackets) - 1  # gamma=0 bracket is degenerate
    for root in report.roots:
        assert any(lo - 1e-2 <= root["gamma"] <= hi + 1e-2 for lo, hi in brackets)


def test_scan_rejects_families_without_gamma():
    with pytest.raises(ConfigurationError):
        gamma_scan(ModelFamily.GOY, 2)
    with pytest.raises(ConfigurationError):
        gamma_scan(ModelFamily.GENERAL, 2)


def test_energy_slope_and_spectrum_exponent():
    prof = stationary_profile(2, 12)
    assert spectrum_exponent(prof, 2) == pytest.approx(-2.0 / 3.0, abs=1e-12)
    energies = np.array([2.0 ** (-0.5 * i) for i in range(8)])
    assert energy_slope(energies, 2) == pytest.approx(-0.5, abs=1e-12)
    with pytest.raises(ConfigurationError):
        energy_slope(np.array([1.0]), 2)
    with pytest.raises(NumericError):
        energy_slope(np.array([1.0, -0.5, 0.25]), 2)


def test_spectrum_exponent_on_shell_subset():
    prof = stationary_profile(3, 20)
    assert spectrum_exponent(prof, 3, shells=range(5, 15)) == pytest.approx(
        -2.0 / 3.0, abs=1e-12
    )
