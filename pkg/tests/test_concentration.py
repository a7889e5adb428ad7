import math

import numpy as np
import pytest

from stoplab.concentration import (MgfCheckConfig, mgf_check, s_tail_check,
                                   weighted_square_tail_check,
                                   weighted_square_tail_oracle)
from stoplab.mcstats import clopper_pearson
from stoplab.noise import NoiseKind, calibrate
from stoplab.sgdm import ScheduleVariant, Variant, a_coeff

GAUSS2 = calibrate(NoiseKind.GAUSSIAN_ISOTROPIC, 2, 1.0)
SPHERE3 = calibrate(NoiseKind.BOUNDED_SPHERE, 3, 1.0)


def test_mgf_lambda_zero_trivial():
    cfg = MgfCheckConfig([0.0], 1000, GAUSS2, np.array([1.0, 0.0]), seed=1)
    (r,) = mgf_check(cfg)
    assert r["estimate"] == pytest.approx(1.0)
    assert r["bound"] == 1.0
    assert r["pass"]


def test_mgf_zero_direction_skipped():
    cfg = MgfCheckConfig([1.0], 1000, GAUSS2, np.zeros(2))
    (r,) = mgf_check(cfg)
    assert r["skipped"] and r["pass"]


def test_mgf_gaussian_matches_analytic_oracle():
    cfg = MgfCheckConfig([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0], 200_000, GAUSS2,
                         np.array([1.0, 0.0]), seed=3)
    for r in mgf_check(cfg):
        lam = r["lambda"]
        # <theta, phi> is N(0, scale^2): MGF = exp(lam^2 scale^2 / (2 sigma^2))
        oracle = math.exp(lam * lam * GAUSS2.scale**2 / 2.0)
        assert r["estimate"] == pytest.approx(oracle, rel=0.02)
        assert r["pass"]
        # the bound itself dominates the oracle analytically
        assert oracle <= r["bound"]


def test_mgf_two_sided_in_lambda():
    cfg = MgfCheckConfig([-1.0, 1.0], 100_000, SPHERE3, np.array([0.0, 2.0, 1.0]),
                         seed=9)
    reports = mgf_check(cfg)
    assert all(r["pass"] for r in reports)


def test_mgf_explicit_c_must_dominate():
    with pytest.raises(ValueError):
        MgfCheckConfig([1.0], 1000, GAUSS2, np.array([3.0, 4.0]), c=4.0)
    cfg = MgfCheckConfig([1.0], 50_000, GAUSS2, np.array([3.0, 4.0]), c=10.0)
    assert mgf_check(cfg)[0]["pass"]


def test_mgf_config_validation():
    with pytest.raises(ValueError):
        MgfCheckConfig([1.0], 0, GAUSS2, np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        MgfCheckConfig([1.0], 10, GAUSS2, np.array([1.0, 0.0, 0.0]))


def test_tail_check_frequencies_and_monotonicity():
    sched = ScheduleVariant(Variant.THEOREM_MAIN, L=1.0)
    c = np.asarray(a_coeff(sched, np.arange(1, 101)))
    reports = weighted_square_tail_check(c, GAUSS2, [0.0, 1.0, 2.0, 3.0],
                                         30_000, seed=5)
    freqs = [r["frequency"] for r in reports]
    assert all(r["pass"] for r in reports)
    assert freqs == sorted(freqs, reverse=True)
    # Omega = 0: bound is 1, can never fail
    assert reports[0]["bound"] == 1.0


def test_tail_check_matches_exact_oracle():
    sched = ScheduleVariant(Variant.THEOREM_MAIN, L=1.0)
    c = np.asarray(a_coeff(sched, np.arange(1, 101)))
    r = weighted_square_tail_check(c, GAUSS2, [1.0], 100_000, seed=6)[0]
    thr = 2.0 * float(np.sum(c))
    exact = weighted_square_tail_oracle(c, GAUSS2.scale, 2, thr)
    assert r["ci_lo"] <= exact <= r["ci_hi"]


def test_tail_oracle_reduces_to_chi_square():
    from scipy.stats import chi2
    assert weighted_square_tail_oracle([1.0], 1.0, 2, 5.0) == \
        pytest.approx(chi2.sf(5.0, 2), rel=1e-12)
    # distinct-weight inversion agrees with the closed form on a near-equal case
    almost = weighted_square_tail_oracle([1.0, 1.0 + 1e-9], 1.0, 2, 5.0)
    assert almost == pytest.approx(chi2.sf(5.0, 4), rel=1e-5)


def test_tail_check_zero_noise_and_validation():
    zero = calibrate(NoiseKind.NONE, 2, 1.0)
    r = weighted_square_tail_check([1.0, 2.0], zero, [1.0], 1000)[0]
    assert r["frequency"] == 0.0 and r["pass"]
    # degenerate zero threshold (sigma = 0): strict comparison keeps the
    # noiseless exceedance at 0
    degenerate = calibrate(NoiseKind.NONE, 2, 0.0)
    r = weighted_square_tail_check([1.0, 2.0], degenerate, [1.0], 1000)[0]
    assert r["frequency"] == 0.0 and r["pass"]
    with pytest.raises(ValueError):
        weighted_square_tail_check([], GAUSS2, [1.0], 1000)
    with pytest.raises(ValueError):
        weighted_square_tail_check([1.0, -1.0], GAUSS2, [1.0], 1000)


def test_clopper_pearson_basics():
    lo, hi = clopper_pearson(0, 100)
    assert lo == 0.0 and 0.0 < hi < 0.1
    lo, hi = clopper_pearson(100, 100)
    assert hi == 1.0 and lo > 0.9
    lo, hi = clopper_pearson(50, 100)
    assert lo < 0.5 < hi
    with pytest.raises(ValueError):
        clopper_pearson(1, 0)


def test_s_tail_check():
    rng = np.random.default_rng(0)
    sup_S = rng.exponential(0.3, size=2000)
    reports = s_tail_check(sup_S, 1.0, 1.888, [0.05, 0.1])
    assert all(r["pass"] for r in reports)
    # thresholds grow as beta shrinks
    assert reports[0]["threshold"] > reports[1]["threshold"]
