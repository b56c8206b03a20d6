import math

import numpy as np
import pytest

from dpsubspace.budget import (
    PrivacyBudget,
    gaussian_mechanism,
    gaussian_sigma,
    laplace_mechanism,
    laplace_scale,
    split_budget,
    substream,
)


def test_split_conserves_budget_exactly():
    parent = PrivacyBudget.zcdp(2.0, 1e-5)
    children = split_budget(parent, [0.5, 0.5])
    assert [c.eps_or_rho for c in children] == [1.0, 1.0]
    assert sum(c.eps_or_rho for c in children) == parent.eps_or_rho
    assert sum(c.delta for c in children) == parent.delta
    assert children[0].delta == 5e-6


def test_split_rejects_bad_fractions():
    parent = PrivacyBudget.zcdp(2.0)
    with pytest.raises(ValueError):
        split_budget(parent, [0.3, 0.3, 0.3])
    with pytest.raises(ValueError):
        split_budget(parent, [1.5, -0.5])


def test_split_tree_conservation_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        parent = PrivacyBudget.pure_dp(rng.uniform(0.1, 4.0), rng.uniform(0, 0.5))
        parts = rng.integers(2, 6)
        raw = rng.uniform(0.05, 1.0, size=parts)
        fractions = raw / raw.sum()
        # renormalize exactly so the contract precondition holds
        fractions[-1] = 1.0 - fractions[:-1].sum()
        children = split_budget(parent, fractions)
        assert sum(c.eps_or_rho for c in children) == pytest.approx(parent.eps_or_rho, abs=0)
        assert sum(c.delta for c in children) == pytest.approx(parent.delta, abs=1e-18)


def test_budget_validation():
    with pytest.raises(ValueError):
        PrivacyBudget.zcdp(0.0)
    with pytest.raises(ValueError):
        PrivacyBudget.zcdp(1.0, 1.0)
    with pytest.raises(ValueError):
        PrivacyBudget("renyi", 1.0)
    assert PrivacyBudget.noise_off().is_noise_off


def test_noise_calibration_formulas():
    assert gaussian_sigma(2.0, 2.0) == 2.0 / math.sqrt(4.0)
    assert gaussian_sigma(0.0, 1.0) == 0.0
    assert gaussian_sigma(1.0, math.inf) == 0.0
    assert laplace_scale(2.0, 1.0) == 2.0
    assert laplace_scale(0.0, 3.0) == 0.0


def test_gaussian_zero_sensitivity_is_identity():
    v = np.array([1.0, -2.0, 3.5])
    out = gaussian_mechanism(v, 0.0, 1.0, np.random.default_rng(0))
    assert np.array_equal(out, v)


def test_gaussian_determinism():
    v = np.zeros(5)
    a = gaussian_mechanism(v, 1.0, 0.5, np.random.default_rng(123))
    b = gaussian_mechanism(v, 1.0, 0.5, np.random.default_rng(123))
    assert np.array_equal(a, b)


def test_gaussian_empirical_std():
    # sensitivity 2/n at n=1000 and rho=1: std = 2/(1000*sqrt(2))
    rng = np.random.default_rng(7)
    out = gaussian_mechanism(np.zeros(1_000_000), 2.0 / 1000, 1.0, rng)
    target = 2.0 / (1000 * math.sqrt(2.0))
    assert abs(out.std() - target) <= 0.02 * target


def test_laplace_empirical_mad():
    # mean absolute deviation of Laplace(b) equals b
    rng = np.random.default_rng(8)
    out = laplace_mechanism(np.zeros(1_000_000), 2.0, 1.0, rng)
    assert abs(np.abs(out).mean() - 2.0) <= 0.03 * 2.0


def test_mechanisms_reject_non_finite():
    with pytest.raises(ValueError):
        gaussian_mechanism(np.array([np.nan]), 1.0, 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        laplace_mechanism(np.array([np.inf]), 1.0, 1.0, np.random.default_rng(0))


def test_substream_determinism_and_independence():
    a = substream(42, 1, 2).standard_normal(4)
    b = substream(42, 1, 2).standard_normal(4)
    c = substream(42, 1, 3).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
