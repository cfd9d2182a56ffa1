import math

import numpy as np
import pytest

from masscone.errors import FiberViolationError, NotAnIsometryError
from masscone.families import ExtendedMetricSpec, MassDistance, ScalingFunction
from masscone.measure import DiscreteMeasure, Isometry
from masscone.obstruction import (
    ExtensionCandidate,
    ObstructionConfig,
    SigmaSampler,
    find_scaling_violation,
    geometric_schedule,
    isometry_invariance_probe,
    mass_continuity_collapse_test,
    oscillation_bound,
    verify_witness,
    zero_extension_diameter_test,
)
from masscone.transport import wasserstein_distance

LINEAR = ScalingFunction.identity()


def test_schedule_and_bound():
    assert geometric_schedule(1.0, 64.0) == [1, 2, 4, 8, 16, 32, 64]
    assert geometric_schedule(1.0, 21.0)[-2:] == [16, 21]
    assert oscillation_bound(1.0, 8.0) == 0.5


def test_linear_f_witness():
    cfg = ObstructionConfig(SigmaSampler(reach=64.0), m0=1.5, r=0.6, C=1.0)
    rep = find_scaling_violation(cfg, LINEAR)
    w = rep.witness
    assert w.detail["separation"] == 8.0
    assert (w.detail["m1"], w.detail["m2"]) == (2.0, 1.0)
    assert w.margin == pytest.approx(4.0)
    assert verify_witness(w, f=LINEAR)[2] == pytest.approx(w.margin, abs=1e-12)
    assert [m.mass for m in w.measures] == [2.0, 1.0, 1.0, 2.0]


def test_constant_f_and_bounded_sigma():
    cfg = ObstructionConfig(SigmaSampler(reach=1e6), m0=1.5, r=0.6, C=1.0)
    assert not find_scaling_violation(cfg, ScalingFunction.constant(3.0)).found
    short = ObstructionConfig(SigmaSampler(reach=3.0), m0=1.5, r=0.6, C=1.0)
    rep = find_scaling_violation(short, LINEAR)
    assert not rep.found and rep.max_separation == 3.0


def test_small_oscillation_never_found():
    # oscillation 0.2 * 1.2 = 0.24 < 4C / R_max = 0.4
    f = ScalingFunction(lambda m: 0.2 * m)
    cfg = ObstructionConfig(SigmaSampler(reach=10.0), m0=1.5, r=0.6, C=1.0)
    assert not find_scaling_violation(cfg, f).found


def test_candidate_fiber_checked():
    good = ExtendedMetricSpec("product_q", lam=1.0)
    cfg = ObstructionConfig(SigmaSampler(reach=64.0), m0=1.5, r=0.6, C=1.0, candidate=good)
    rep = find_scaling_violation(cfg, ScalingFunction.constant(1.0))
    assert not rep.found and len(rep.detail["fiber_probes"]) == 11
    with pytest.raises(FiberViolationError):
        find_scaling_violation(cfg, LINEAR)


def test_lattice_and_points_sigma():
    lat = SigmaSampler("lattice", reach=10.0, spacing=3.0)
    assert [s for _, _, s in lat.pairs()] == [3.0, 6.0, 9.0]
    assert lat.diameter() == 9.0
    pts = SigmaSampler("points", points=[[0.0, 0.0], [3.0, 4.0], [1.0, 0.0]])
    assert [s for _, _, s in pts.pairs()] == pytest.approx([1.0, math.sqrt(20.0), 5.0])
    assert pts.diameter() == 5.0 and pts.dim == 2


def test_zero_extension_examples():
    rep = zero_extension_diameter_test(ExtensionCandidate(1.0, 10.0), SigmaSampler(reach=21.0))
    assert rep.found and rep.witness.detail["separation"] == 21.0
    np.testing.assert_array_equal(rep.witness.measures[1].points[0], [21.0])
    assert rep.witness.margin == pytest.approx(1.0)
    assert not zero_extension_diameter_test(ExtensionCandidate(1.0, 10.0), SigmaSampler(reach=5.0)).found
    rep = zero_extension_diameter_test(ExtensionCandidate(2.0, 1.0), SigmaSampler("points", points=[[0.0], [1.01]]))
    assert rep.found
    assert verify_witness(rep.witness)[2] == pytest.approx(rep.witness.margin, abs=1e-12)


def test_zero_extension_from_metric():
    # |m1 - m2| + W on masses, d(0, mu) = mass; Lambda over [0, 64] is m0
    spec = ExtendedMetricSpec("product_q", q=1.0)
    cand = ExtensionCandidate.from_metric(spec, lambda mu: mu.mass, 1.0, SigmaSampler(reach=64.0))
    assert cand.lam0 == pytest.approx(1.0) and cand.Lambda == 1.0
    rep = zero_extension_diameter_test(cand, SigmaSampler(reach=64.0))
    assert rep.found and rep.witness.detail["fiber_distance"] == pytest.approx(rep.witness.detail["separation"])


def test_collapse_examples():
    cand = ExtensionCandidate(1.0, 0.0, zero_rule=lambda mu: mu.mass)
    d0, d5 = DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([5.0])
    rep = mass_continuity_collapse_test(cand, d0, d5, [3.0, 2.5, 2.0])
    assert rep.witness.trial == 2 and rep.witness.margin == pytest.approx(1.0)
    assert verify_witness(rep.witness, cand=cand)[2] == pytest.approx(rep.witness.margin, abs=1e-12)
    assert not mass_continuity_collapse_test(cand, d0, d0, [1e-3]).found
    stuck = ExtensionCandidate(1.0, 0.0, zero_rule=lambda mu: 10.0)
    assert not mass_continuity_collapse_test(stuck, d0, d5, 10.0 ** -np.arange(10)).found


def _pairs(rng, n, dim, mass=1.3):
    out = []
    for _ in range(n):
        a = DiscreteMeasure(rng.uniform(-1, 1, (3, dim)), [0.2, 0.3, 0.5]).scaled(mass)
        b = DiscreteMeasure(rng.uniform(-1, 1, (2, dim)), [0.5, 0.5]).scaled(mass)
        out.append((a, b))
    return out


def test_invariance_product_q():
    rng = np.random.default_rng(0)
    isos = [Isometry.random(rng, 2, 3.0, "any") for _ in range(5)]
    rep = isometry_invariance_probe(ExtendedMetricSpec("product_q"), isos, _pairs(rng, 10, 2), m0=1.5, r=0.6)
    assert rep.invariant and rep.mass_continuous
    assert rep.derived_C == pytest.approx(0.6, abs=1e-9)
    assert rep.position_spread == pytest.approx(0.0, abs=1e-12)


def test_invariance_bounded_mass_discontinuous():
    rng = np.random.default_rng(1)
    isos = [Isometry.random(rng, 2, 0.0, "rotation") for _ in range(3)]
    spec = ExtendedMetricSpec("bounded_mass_distance", mass_distance=MassDistance.discrete())
    rep = isometry_invariance_probe(spec, isos, _pairs(rng, 5, 2), m0=1.0)
    assert rep.invariant and not rep.mass_continuous and rep.derived_C is None
    assert rep.continuity_values[-1] == 1.0


def test_invariance_fails_for_position_dependent_metric():
    def d(a, b):
        x = float(np.linalg.norm(a.points[0]))
        return abs(a.mass - b.mass) * (1 + x) + wasserstein_distance(a.scaled(1 / a.mass), b.scaled(1 / b.mass))

    pairs = [(DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([0.0], 2.0))]
    rep = isometry_invariance_probe(d, [Isometry.translation([1.0])], pairs)
    assert not rep.invariant and rep.max_margin == pytest.approx(1.0)


def test_invariance_rejects_bad_isometry():
    with pytest.raises(NotAnIsometryError):
        isometry_invariance_probe(ExtendedMetricSpec("product_q"), [([[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0])], [])
