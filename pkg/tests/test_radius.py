import math

import numpy as np
import pytest

from streamdro.radius import (RadiusSchedule, compact_bounded_radius, compact_constants,
                              cross_validate_schedule, default_cv_grid, explicit_bounded_radius, radius_at)
from streamdro.support import ConfigurationError


def test_power_law_value():
    s = RadiusSchedule("power_law", c=0.0025, exponent=1 / 40)
    assert radius_at(s, 95, 100) == pytest.approx(0.0025 * 100 ** (-1 / 40), rel=1e-15)
    assert radius_at(s, 95, 100) == pytest.approx(0.00222813, abs=5e-9)


@pytest.mark.parametrize("kind,extra", [("power_law", {}), ("dimension_free", {}),
                                        ("light_tail", {"d": 3, "p": 1}),
                                        ("bounded_explicit", {"d": 4, "p": 1})])
def test_strictly_decreasing(kind, extra):
    s = RadiusSchedule(kind, c=0.5, **extra)
    ts = np.arange(3, 2000, 37)
    vals = [radius_at(s, int(t), int(t) + 5) for t in ts]
    assert np.all(np.diff(vals) < 0)
    assert min(vals) >= 0


def test_eta_inflation():
    base = RadiusSchedule("power_law", c=0.01, exponent=0.5)
    infl = RadiusSchedule("power_law", c=0.01, exponent=0.5, eta_inflation=0.2)
    assert radius_at(infl, 10, 15) == pytest.approx(radius_at(base, 10, 15) + 0.2)


def test_light_tail_beta_range():
    s = RadiusSchedule("light_tail", c=1.0, d=2, beta0=1.5)
    with pytest.raises(ValueError):
        radius_at(s, 0, 5)


def _explicit_oracle(N, beta, rho, d, p):
    a = 1.0 / (1.0 - 2.0 ** (p - d / 2.0))
    b = 1.0 / (1.0 - 2.0 ** (-p))
    C = math.sqrt(d) * 2.0 ** ((d - 2.0) / (2.0 * p)) * (a + b) ** (1.0 / p)
    first = C * N ** (-1.0 / d)
    second = math.sqrt(d) * (2.0 * math.log(1.0 / beta)) ** (1.0 / (2.0 * p)) * N ** (-1.0 / (2.0 * p))
    return 2.0 * rho * (first + second)


def test_explicit_radius_duplicate_formula():
    assert explicit_bounded_radius(100, 0.05, 1.0, 4, 1.0) == pytest.approx(
        _explicit_oracle(100, 0.05, 1.0, 4, 1.0), rel=1e-12)


def test_explicit_radius_limits_and_scaling():
    assert explicit_bounded_radius(10**9, 0.05, 1, 4, 1) < 0.1 * explicit_bounded_radius(10**3, 0.05, 1, 4, 1)
    assert explicit_bounded_radius(50, 0.1, 2.0, 5, 1) == pytest.approx(
        2 * explicit_bounded_radius(50, 0.1, 1.0, 5, 1))


def test_explicit_radius_errors():
    with pytest.raises(ConfigurationError):
        explicit_bounded_radius(10, 0.05, 1, 2, 1)
    with pytest.raises(ValueError):
        explicit_bounded_radius(10, 1.5, 1, 4, 1)
    with pytest.raises(ConfigurationError):
        RadiusSchedule("bounded_explicit", d=2, p=1)


def test_compact_constants():
    d, p = 4, 1.0
    C_star, c_star = compact_constants(d, p)
    assert c_star == pytest.approx(1 / (2 ** d * math.sqrt(d) ** d))
    # C_star = C^d / (2 sqrt(d)^d) with C from the explicit formula
    a = 1 / (1 - 2 ** (p - d / 2)) + 1 / (1 - 2 ** (-p))
    Cx = math.sqrt(d) * 2 ** ((d - 2) / (2 * p)) * a ** (1 / p)
    assert C_star == pytest.approx(Cx ** d / (2 * math.sqrt(d) ** d))


@pytest.mark.xfail(strict=True, reason="compact form does not reproduce the explicit radius")
def test_compact_form_matches_explicit():
    assert compact_bounded_radius(1000, 0.05, 1.0, 4, 1.0) == pytest.approx(
        explicit_bounded_radius(1000, 0.05, 1.0, 4, 1.0), rel=1e-6)


def test_cross_validation_single_and_pair():
    a = RadiusSchedule("power_law", c=0.001)
    assert cross_validate_schedule([a], lambda s: [1.0])[0] is a
    b = RadiusSchedule("power_law", c=0.01)
    best, scores = cross_validate_schedule([a, b], lambda s: [s.c * 10, s.c * 20])
    assert best is a and scores == [pytest.approx(0.015), pytest.approx(0.15)]


def test_cross_validation_tie_first():
    a, b = RadiusSchedule(c=0.1), RadiusSchedule(c=0.2)
    assert cross_validate_schedule([b, a], lambda s: 0.0)[0] is b


def test_cross_validation_toy_stream():
    # seeded toy problem: lower validation loss for the smaller radius
    rng = np.random.default_rng(0)
    val = rng.normal(size=200)

    def runner(s):
        return [float(np.mean((val - radius_at(s, t, t + 5)) ** 2)) for t in (10, 50, 100)]

    cands = [RadiusSchedule(c=1.0, exponent=0.1), RadiusSchedule(c=0.01, exponent=0.1)]
    best, _ = cross_validate_schedule(cands, runner)
    assert best is cands[1]


def test_cross_validation_failure_names_candidate():
    def boom(s):
        raise ZeroDivisionError

    with pytest.raises(RuntimeError, match="power_law"):
        cross_validate_schedule([RadiusSchedule(c=0.3)], boom)
    with pytest.raises(ValueError):
        cross_validate_schedule([], boom)


def test_default_grid_contains_reference():
    labels = [s.label() for s in default_cv_grid()]
    assert RadiusSchedule(c=0.0025, exponent=1 / 40).label() in labels


def test_deterministic():
    s = RadiusSchedule("dimension_free", c=0.3)
    assert radius_at(s, 7, 12) == radius_at(s, 7, 12)
