import math

import numpy as np
import pytest

from leoho.errors import UtilityDomainError, ValidationError
from leoho.utility import UtilitySpec, utility, utility_derivative


def test_log_of_one_is_zero():
    assert utility(UtilitySpec(alpha=1.0), 1.0) == 0.0


def test_alpha_zero_is_identity():
    assert utility(UtilitySpec(alpha=0.0), 5.0) == 5.0


def test_alpha_two_example():
    # 4^(1-2)/(1-2) = (1/4)/(-1)
    assert utility(UtilitySpec(alpha=2.0), 4.0) == pytest.approx(-0.25, abs=1e-12)


def test_derivative_examples():
    assert utility_derivative(UtilitySpec(alpha=1.0), 2.0) == pytest.approx(0.5)
    assert utility_derivative(UtilitySpec(alpha=0.0), 17.3) == 1.0
    assert utility_derivative(UtilitySpec(alpha=0.5), 9.0) == pytest.approx(1.0 / 3.0)


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0, 3.5])
def test_non_decreasing(alpha):
    spec = UtilitySpec(alpha=alpha)
    rng = np.random.default_rng(42)
    for _ in range(200):
        a, b = sorted(rng.uniform(1e-3, 1e3, size=2))
        assert utility(spec, b) >= utility(spec, a)


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0, 3.5])
def test_concave_midpoint(alpha):
    spec = UtilitySpec(alpha=alpha)
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, b = rng.uniform(1e-3, 1e3, size=2)
        mid = utility(spec, (a + b) / 2.0)
        assert mid >= (utility(spec, a) + utility(spec, b)) / 2.0 - 1e-9


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0, 2.0])
def test_derivative_matches_finite_difference(alpha):
    spec = UtilitySpec(alpha=alpha)
    rng = np.random.default_rng(3)
    for _ in range(100):
        d = rng.uniform(0.5, 100.0)
        h = d * 1e-6
        fd = (utility(spec, d + h) - utility(spec, d - h)) / (2.0 * h)
        assert utility_derivative(spec, d) == pytest.approx(fd, rel=1e-6)


def test_domain_errors():
    with pytest.raises(UtilityDomainError):
        utility(UtilitySpec(alpha=1.0), 0.0)
    with pytest.raises(UtilityDomainError):
        utility(UtilitySpec(alpha=2.0), -1.0)
    with pytest.raises(UtilityDomainError):
        utility_derivative(UtilitySpec(alpha=0.5), 0.0)
    # alpha < 1 admits d = 0 with value 0
    assert utility(UtilitySpec(alpha=0.5), 0.0) == 0.0


def test_spec_validation():
    with pytest.raises(ValidationError):
        UtilitySpec(alpha=-0.1)
    with pytest.raises(ValidationError):
        UtilitySpec(kind="quadratic")


def test_log_matches_natural_log():
    spec = UtilitySpec(alpha=1.0)
    assert utility(spec, math.e) == pytest.approx(1.0, abs=1e-12)
