"""The three non-local prior families: normalization, gradients, symmetry."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from aftsel import PRIOR_FAMILIES, PriorConfig, log_nlp_density, log_nlp_grad
from aftsel.nlp_priors import log_nlp_hess_diag


def one_dim_integral(config):
    """Numerically integrate the one-dimensional density over the real line."""

    def dens(b):
        if b == 0.0:
            return 0.0
        return math.exp(log_nlp_density(np.array([b]), config))

    scale = math.sqrt(config.scale)
    total = 0.0
    for lo, hi in ((-np.inf, -scale), (-scale, 0.0), (0.0, scale), (scale, np.inf)):
        part, _ = quad(dens, lo, hi, limit=400)
        total += part
    return total


def test_vanishes_at_origin():
    for family in PRIOR_FAMILIES:
        config = PriorConfig(family, tau=0.25)
        assert log_nlp_density(np.array([0.0, 1.0]), config) == -math.inf
        assert log_nlp_density(np.array([1.0, 0.0]), config) == -math.inf


def test_pmom_closed_form_value():
    # b^2 * N(b; 0, 1) at b = 1 -> log = -(1/2) log 2pi - 1/2
    config = PriorConfig("pmom", tau=1.0, phi=1.0, order_r=1)
    value = log_nlp_density(np.array([1.0]), config)
    assert value == pytest.approx(-0.5 * math.log(2 * math.pi) - 0.5, rel=1e-14)
    assert value == pytest.approx(-1.4189385, abs=1e-7)


@pytest.mark.parametrize("family", PRIOR_FAMILIES)
def test_each_family_integrates_to_one(family):
    config = PriorConfig(family, tau=0.01, phi=1.0)
    assert one_dim_integral(config) == pytest.approx(1.0, abs=1e-6)


def test_pmom_higher_order_integrates_to_one():
    config = PriorConfig("pmom", tau=0.1, phi=1.0, order_r=3)
    assert one_dim_integral(config) == pytest.approx(1.0, abs=1e-6)


def test_pimom_other_shape_integrates_to_one():
    config = PriorConfig("pimom", tau=0.05, phi=1.0, shape_v=2.0)
    assert one_dim_integral(config) == pytest.approx(1.0, abs=1e-6)


def test_product_structure():
    rng = np.random.default_rng(5)
    beta = rng.standard_normal(4) + np.sign(rng.standard_normal(4)) * 0.1
    for family in PRIOR_FAMILIES:
        config = PriorConfig(family, tau=0.07, phi=1.3)
        joint = log_nlp_density(beta, config)
        parts = sum(log_nlp_density(beta[i : i + 1], config) for i in range(4))
        assert joint == pytest.approx(parts, abs=1e-12)


def test_evenness_under_sign_flips():
    rng = np.random.default_rng(6)
    beta = rng.standard_normal(3) + 0.2
    for family in PRIOR_FAMILIES:
        config = PriorConfig(family, tau=0.04)
        base = log_nlp_density(beta, config)
        for mask in range(8):
            signs = np.array([(-1.0) ** ((mask >> i) & 1) for i in range(3)])
            assert log_nlp_density(beta * signs, config) == base


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    for family in PRIOR_FAMILIES:
        config = PriorConfig(family, tau=0.09, phi=0.8)
        for _ in range(25):
            beta = rng.standard_normal(3)
            beta += np.sign(beta) * 0.15  # keep away from the pole at 0
            grad = log_nlp_grad(beta, config)
            h = 1e-6
            fd = np.zeros(3)
            for i in range(3):
                up, dn = beta.copy(), beta.copy()
                up[i] += h
                dn[i] -= h
                fd[i] = (
                    log_nlp_density(up, config) - log_nlp_density(dn, config)
                ) / (2 * h)
            assert np.linalg.norm(grad - fd) / max(1.0, np.linalg.norm(fd)) < 1e-6


def test_gradient_stationary_at_pmom_mode():
    config = PriorConfig("pmom", tau=1.0, phi=1.0, order_r=1)
    grad = log_nlp_grad(np.array([math.sqrt(2.0)]), config)
    assert grad[0] == pytest.approx(0.0, abs=1e-14)


def test_gradient_sign_antisymmetry():
    rng = np.random.default_rng(8)
    beta = rng.standard_normal(4) + np.sign(rng.standard_normal(4)) * 0.3
    for family in PRIOR_FAMILIES:
        config = PriorConfig(family, tau=0.02)
        assert np.allclose(
            log_nlp_grad(-beta, config), -log_nlp_grad(beta, config), atol=1e-14
        )


def test_gradient_rejects_zero_coordinate():
    for family in PRIOR_FAMILIES:
        config = PriorConfig(family, tau=0.1)
        with pytest.raises(ValueError):
            log_nlp_grad(np.array([0.0, 1.0]), config)


def test_hessian_diagonal_matches_finite_differences():
    rng = np.random.default_rng(9)
    for family in PRIOR_FAMILIES:
        config = PriorConfig(family, tau=0.06, phi=1.1)
        beta = rng.standard_normal(3)
        beta += np.sign(beta) * 0.2
        diag = log_nlp_hess_diag(beta, config)
        h = 1e-6
        for i in range(3):
            up, dn = beta.copy(), beta.copy()
            up[i] += h
            dn[i] -= h
            fd = (log_nlp_grad(up, config)[i] - log_nlp_grad(dn, config)[i]) / (2 * h)
            assert diag[i] == pytest.approx(fd, rel=1e-5)


def test_config_validation():
    with pytest.raises(ValueError):
        PriorConfig("cauchy", tau=0.1)
    with pytest.raises(ValueError):
        PriorConfig("pmom", tau=0.0)
    with pytest.raises(ValueError):
        PriorConfig("pmom", tau=0.1, phi=-1.0)
    with pytest.raises(ValueError):
        PriorConfig("pmom", tau=0.1, order_r=0)
    with pytest.raises(ValueError):
        PriorConfig("pimom", tau=0.1, shape_v=0.5)


def test_density_input_validation():
    config = PriorConfig("pemom", tau=0.1)
    with pytest.raises(ValueError):
        log_nlp_density(np.array([]), config)
    with pytest.raises(ValueError):
        log_nlp_density(np.array([np.nan]), config)
