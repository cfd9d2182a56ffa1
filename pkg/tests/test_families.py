import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masscone.errors import ConfigError, DegenerateProbeError, DomainError, InadmissibleScalingError, ZeroMassError
from masscone.families import (
    Box,
    ExtendedMetricSpec,
    MassDistance,
    ScalingFunction,
    check_f_admissible,
    dist_bounded_mass,
    dist_bounded_space_with_zero,
    dist_product_q,
    fiber_scaling_probe,
    make_metric,
    random_probe_pairs,
    scaling_from_config,
)
from masscone.measure import DiscreteMeasure

INF = math.inf


def test_product_q_example():
    a = DiscreteMeasure.dirac([0.0, 0.0], 1.0)
    b = DiscreteMeasure.dirac([3.0, 4.0], 2.0)
    assert dist_product_q(a, b, q=2.0) == pytest.approx(math.sqrt(26.0), abs=1e-12)
    assert dist_product_q(a, b, q=1.0) == pytest.approx(6.0)
    assert dist_product_q(a, b, q=INF) == pytest.approx(5.0)
    assert dist_product_q(a, b, lam=0.1, q=INF) == pytest.approx(1.0)
    assert dist_product_q(a, b, q=3.0) == pytest.approx((1 + 125) ** (1 / 3))


def test_product_q_rejects_zero():
    with pytest.raises(ZeroMassError):
        dist_product_q(DiscreteMeasure.zero(1), DiscreteMeasure.dirac([0.0]))


def test_bounded_mass_distances():
    a = DiscreteMeasure.dirac([0.0], 1.0)
    b = DiscreteMeasure.dirac([2.0], 3.0)
    assert dist_bounded_mass(a, b) == pytest.approx(3.0)
    assert dist_bounded_mass(a, a.scaled(1 + 1e-12)) == 0.0
    assert dist_bounded_mass(a, b, mass_distance=MassDistance.truncated()) == pytest.approx(3.0)
    assert dist_bounded_mass(a, b, mass_distance=MassDistance.arctan()) == pytest.approx(math.atan(3) - math.atan(1) + 2)
    with pytest.raises(ValueError):
        dist_bounded_mass(a, b, mass_distance=MassDistance.euclidean())
    assert MassDistance.arctan().certified_bound() <= math.pi / 2


def test_bounded_space_with_zero_values():
    a = DiscreteMeasure.dirac([0.0], 1.0)
    b = DiscreteMeasure.dirac([1.0], 3.0)
    z = DiscreteMeasure.zero(1)
    # |1 - 3| + min(1/2, 3/4) * 1
    assert dist_bounded_space_with_zero(a, b) == pytest.approx(2.5)
    assert dist_bounded_space_with_zero(a, z) == 1.0
    assert dist_bounded_space_with_zero(z, b) == 3.0
    assert dist_bounded_space_with_zero(z, z) == 0.0
    with pytest.raises(DomainError):
        dist_bounded_space_with_zero(a, DiscreteMeasure.dirac([2.0]))


def test_admissibility():
    assert check_f_admissible(ScalingFunction.ratio(), 1.0).admissible
    assert check_f_admissible(ScalingFunction.linear_capped(0.5, 3.0), 2.0).admissible
    bad_lip = check_f_admissible(ScalingFunction.identity(), 2.0)
    assert not bad_lip.admissible and not bad_lip.lipschitz_ok
    bad_zero = check_f_admissible(ScalingFunction.constant(0.3), 1.0)
    assert not bad_zero.limit_ok
    bumpy = ScalingFunction(lambda m: 0.5 * m if m < 1 else max(0.5 - 0.1 * (m - 1), 0.3))
    assert not check_f_admissible(bumpy, 1.0).monotone_ok
    # ratio with diam 2 needs Lipschitz <= 1/2
    with pytest.raises(InadmissibleScalingError) as err:
        dist_bounded_space_with_zero(
            DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([2.0]), domain=Box(0.0, 2.0, 1)
        )
    assert err.value.report is not None


def test_claimed_lipschitz_overrides_sampling():
    f = ScalingFunction(lambda m: m / (1 + m), claimed_lipschitz=2.0)
    rep = check_f_admissible(f, 1.0)
    assert rep.lipschitz_source == "claimed" and not rep.lipschitz_ok


def test_scaling_from_config():
    assert scaling_from_config("ratio")(1.0) == 0.5
    assert scaling_from_config(2.0)(7.0) == 2.0
    assert scaling_from_config({"name": "power", "exponent": 2.0})(3.0) == pytest.approx(9.0)
    t = scaling_from_config({"masses": [0, 1, 2], "values": [0, 1, 1.5]})
    assert t(1.5) == pytest.approx(1.25)
    with pytest.raises(ConfigError):
        scaling_from_config("nope")


def test_spec_validation_and_serialization():
    with pytest.raises(ConfigError, match="family"):
        ExtendedMetricSpec("bogus").validate()
    with pytest.raises(ConfigError):
        ExtendedMetricSpec("product_q", q=0.5).validate()
    spec = ExtendedMetricSpec("product_q", q=INF)
    assert spec.to_dict()["q"] == "inf"


FIBER_CASES = [
    (ExtendedMetricSpec("product_q", lam=2.0, q=2.0), 3.0, 2.0),
    (ExtendedMetricSpec("product_q", lam=0.5, q=INF), 3.0, 0.5),
    (ExtendedMetricSpec("bounded_mass_distance", lam=1.5), 0.2, 1.5),
    (ExtendedMetricSpec("bounded_space_with_zero"), 3.0, 0.75),
]


@pytest.mark.parametrize("spec, m, expected", FIBER_CASES)
def test_fiber_probe(spec, m, expected):
    pairs = random_probe_pairs(np.random.default_rng(0), 5)
    probe = fiber_scaling_probe(spec, m, pairs)
    assert probe.consistent
    assert probe.estimate == pytest.approx(expected, abs=1e-12)
    assert probe.expected == pytest.approx(expected)


def test_fiber_probe_flags_inconsistent_metric():
    # adds a position-dependent term, so the ratio depends on the pair
    def d(a, b):
        return abs(a.points[0, 0] - b.points[0, 0]) + a.points[0, 0] ** 2

    pairs = [(DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([1.0])), (DiscreteMeasure.dirac([0.5]), DiscreteMeasure.dirac([1.0]))]
    assert not fiber_scaling_probe(d, 1.0, pairs).consistent


def test_fiber_probe_degenerate():
    mu = DiscreteMeasure.dirac([0.2])
    with pytest.raises(DegenerateProbeError):
        fiber_scaling_probe(ExtendedMetricSpec("product_q"), 1.0, [(mu, mu)])


masses = st.floats(0.01, 50)


@settings(max_examples=200, deadline=None)
@given(masses, masses, st.integers(0, 2**32 - 1))
def test_product_q_mass_bound(m0, m, seed):
    mu = random_probe_pairs(np.random.default_rng(seed), 1, dim=2)[0][0]
    for q in (1.0, 2.0, INF):
        assert dist_product_q(mu.scaled(m0), mu.scaled(m), q=q) == pytest.approx(abs(m0 - m), abs=1e-12)


def test_make_metric_custom():
    d = make_metric(ExtendedMetricSpec("custom", evaluator=lambda a, b: 7.0))
    assert d(DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([1.0])) == 7.0
