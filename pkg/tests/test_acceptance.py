"""Acceptance checks, one test per criterion.

Each test emits a single ``[PASS]`` / ``[FAIL]`` line before asserting.
Under pytest the lines are gathered into an "acceptance criteria" section of
the terminal summary; run as ``python tests/test_acceptance.py`` they go
straight to stdout.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np

from masscone.axioms import MeasureSampler, run_axiom_suite
from masscone.cli import main as cli_main
from masscone.families import ExtendedMetricSpec, MassDistance, ScalingFunction, as_metric, dist_product_q
from masscone.measure import DiscreteMeasure, Isometry
from masscone.obstruction import (
    ExtensionCandidate,
    ObstructionConfig,
    SigmaSampler,
    find_scaling_violation,
    isometry_invariance_probe,
    mass_continuity_collapse_test,
    zero_extension_diameter_test,
)
from masscone.transport import brute_force_wasserstein, wasserstein_distance
from masscone.warped import ConeGrid, WarpingFunction, default_grid, refinement_series, warped_distance_dirac_cone

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
INF = math.inf


# filled by verdict(); conftest prints it in the terminal summary
RESULTS = []


def verdict(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _profile(rng, dim, max_atoms=5):
    k = int(rng.integers(1, max_atoms + 1))
    w = rng.uniform(0.1, 1.0, k)
    return DiscreteMeasure(rng.uniform(0, 1, (k, dim)), w / w.sum())


def test_c01_transport_matches_permutation_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(200):
        k = int(rng.integers(1, 8))
        dim = int(rng.integers(1, 4))
        p = (1.0, 2.0)[i % 2]
        mu = DiscreteMeasure.uniform(rng.uniform(0, 1, (k, dim)))
        nu = DiscreteMeasure.uniform(rng.uniform(0, 1, (k, dim)))
        worst = max(worst, abs(wasserstein_distance(mu, nu, p) - brute_force_wasserstein(mu, nu, p)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 30
    verdict(1, "OT oracle equivalence", ok, f"max |diff| {worst:.2e} <= 1e-9, {elapsed:.1f}s < 30s")


def test_c02_dirac_closed_form():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(1000):
        dim = int(rng.integers(1, 4))
        x, y = rng.uniform(-10, 10, (2, dim))
        for p in (1.0, 1.5, 2.0, 3.0):
            w = wasserstein_distance(DiscreteMeasure.dirac(x), DiscreteMeasure.dirac(y), p)
            worst = max(worst, abs(w - float(np.linalg.norm(x - y))))
    verdict(2, "Dirac closed form", worst <= 1e-12, f"max |diff| {worst:.2e} <= 1e-12")


SUITES = [
    ("product q=1", ExtendedMetricSpec("product_q", q=1.0), MeasureSampler(dim=2)),
    ("product q=2", ExtendedMetricSpec("product_q", q=2.0), MeasureSampler(dim=2)),
    ("product q=inf", ExtendedMetricSpec("product_q", q=INF), MeasureSampler(dim=2)),
    (
        "bounded mass, discrete",
        ExtendedMetricSpec("bounded_mass_distance", mass_distance=MassDistance.discrete()),
        MeasureSampler(share_prob=0.4),
    ),
    (
        "with zero on [0,1], f=m/(1+m)",
        ExtendedMetricSpec("bounded_space_with_zero", f=ScalingFunction.ratio()),
        MeasureSampler(zero_prob=0.15),
    ),
]


def test_c03_axiom_suites():
    t0 = time.perf_counter()
    parts = []
    total = 0
    for label, spec, sampler in SUITES:
        rep = run_axiom_suite(spec, sampler, trials=10_000, tolerance=1e-9, seed=103)
        total += rep.failures
        parts.append(f"{label}: {rep.failures}")
    elapsed = time.perf_counter() - t0
    ok = total == 0 and elapsed < 300
    verdict(3, "metric axiom suites", ok, f"witnesses {'; '.join(parts)}; {elapsed:.0f}s < 300s")


FIBER_FAMILIES = [
    ExtendedMetricSpec("product_q", lam=1.7, q=1.0),
    ExtendedMetricSpec("product_q", lam=0.4, q=2.0),
    ExtendedMetricSpec("product_q", lam=2.5, q=INF),
    ExtendedMetricSpec("bounded_mass_distance", lam=1.3),
    ExtendedMetricSpec("bounded_space_with_zero", f=ScalingFunction.ratio()),
]


def test_c04_fiber_condition():
    rng = np.random.default_rng(104)
    worst = 0.0
    for spec in FIBER_FAMILIES:
        d = as_metric(spec)
        for _ in range(1000):
            mu1, mu2 = _profile(rng, 1), _profile(rng, 1)
            m = float(np.exp(rng.uniform(np.log(0.05), np.log(20))))
            lhs = d(mu1.scaled(m), mu2.scaled(m))
            rhs = spec.fiber_scaling(m) * wasserstein_distance(mu1, mu2, spec.p)
            worst = max(worst, abs(lhs - rhs))
    verdict(4, "fiber condition", worst <= 1e-9, f"5 families x 1000 probes, max |diff| {worst:.2e}")


def test_c05_product_mass_bound():
    rng = np.random.default_rng(105)
    worst = 0.0
    for i in range(1000):
        mu = _profile(rng, int(rng.integers(1, 4)))
        m0, m = rng.uniform(0.01, 20, 2)
        q = (1.0, 2.0, INF)[i % 3]
        worst = max(worst, abs(dist_product_q(mu.scaled(m0), mu.scaled(m), q=q) - abs(m0 - m)))
    verdict(5, "product_q mass bound", worst <= 1e-9, f"max |diff| {worst:.2e}")


def test_c06_scaling_obstruction():
    cfg = ObstructionConfig(SigmaSampler(reach=1e6), m0=1.5, r=0.6, C=1.0)
    linear = find_scaling_violation(cfg, ScalingFunction.identity())
    flat = find_scaling_violation(cfg, ScalingFunction.constant(1.0))
    w = linear.witness
    ok = w is not None and w.detail["separation"] <= 8 and w.margin >= 0.5 and not flat.found
    detail = (
        f"f=m: separation {w.detail['separation']:g}, margin {w.margin:g}; " if w else "f=m: none; "
    ) + f"f const: {'witness' if flat.found else 'none'} up to {cfg.sigma.reach:g}"
    verdict(6, "scaling obstruction", ok, detail)


def test_c07_zero_extension_flip():
    rng = np.random.default_rng(107)
    mismatches = 0
    for _ in range(20):
        lam0 = float(rng.uniform(0.2, 3.0))
        Lam = float(rng.uniform(0.5, 10.0))
        h = float(rng.uniform(0.05, 1.0))
        threshold = 2 * Lam / lam0
        K = int(math.floor(threshold / h))
        if K * h == threshold:  # a lattice point on the threshold is still no witness
            K -= 1
        cand = ExtensionCandidate(lam0, Lam)
        below = SigmaSampler("points", points=[[j * h] for j in range(K + 1)])
        above = SigmaSampler("points", points=[[j * h] for j in range(K + 2)])
        outcome_below = zero_extension_diameter_test(cand, below).found
        outcome_above = zero_extension_diameter_test(cand, above).found
        if outcome_below or not outcome_above or below.diameter() > threshold or above.diameter() <= threshold:
            mismatches += 1
    verdict(7, "zero-extension flip", mismatches == 0, f"{20 - mismatches}/20 configurations flip at 2*Lambda/lam0")


def test_c08_mass_collapse():
    cand = ExtensionCandidate(1.0, 0.0, zero_rule=lambda mu: mu.mass)
    mu1, mu2 = DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([5.0])
    masses = sorted({round(v, 10) for v in np.linspace(5.0, 0.05, 100)} | {2.5}, reverse=True)
    wrong = [m for m in masses if mass_continuity_collapse_test(cand, mu1, mu2, [m]).found != (m < 2.5)]
    sweep = mass_continuity_collapse_test(cand, mu1, mu2, masses)
    first = sweep.witness.detail["mass"] if sweep.found else None
    ok = not wrong and first is not None and first < 2.5 and masses[masses.index(first) - 1] == 2.5
    verdict(8, "mass-continuity collapse", ok, f"{len(masses) - len(wrong)}/{len(masses)} masses correct, first witness m={first}")


def test_c09_warped_fiber_recovery():
    base = ConeGrid(0.5, 3.0, 11, (-10.0,), (10.0,), 41)
    hm = (base.mass_max - base.mass_min) / (base.mass_steps - 1)
    hx = (base.box_hi[0] - base.box_lo[0]) / (base.spatial_steps - 1)
    worst = 0.0
    monotone = True
    for g in (WarpingFunction.constant(1.0), WarpingFunction("one_plus_wp_to_origin")):
        m = 1.0 + hm / 3
        x = -3.0 + hx / 3
        for sep in (2.0, 5.0, 8.0):
            vals = refinement_series((m, [x]), (m, [x + sep]), g, base, levels=3)
            excess = [(v - sep) / sep for v in vals]
            monotone &= excess[0] > excess[1] > excess[2] >= -1e-12
            worst = max(worst, excess[-1])
    ok = worst < 0.02 and monotone
    verdict(9, "warped fiber recovery", ok, f"finest excess {100 * worst:.2f}% < 2%, monotone={monotone}")


def test_c10_warped_constant_closed_form():
    rng = np.random.default_rng(110)
    worst = 0.0
    for c in (1.0, 2.0):
        g = WarpingFunction.constant(c)
        for _ in range(20):
            m1, m2 = rng.uniform(0.5, 3.0, 2)
            x1, x2 = rng.uniform(-10, 10, 2)
            exact = math.hypot(c * (m1 - m2), x1 - x2)
            approx = warped_distance_dirac_cone((m1, [x1]), (m2, [x2]), g, grid=default_grid((m1, [x1]), (m2, [x2]), g))
            worst = max(worst, abs(approx - exact) / exact)
    verdict(10, "warped constant-g closed form", worst <= 0.03, f"max rel err {100 * worst:.2f}% <= 3%")


def test_c11_isometry_invariance():
    rng = np.random.default_rng(111)
    isos = [Isometry.random(rng, 2, 5.0, "translation") for _ in range(5)]
    isos += [Isometry.random(rng, 2, 5.0, "any") for _ in range(5)]
    pairs = []
    for _ in range(100):
        m = float(rng.uniform(0.2, 5.0))
        pairs.append((_profile(rng, 2).scaled(m), _profile(rng, 2).scaled(float(rng.uniform(0.2, 5.0)))))
    worst_margin = 0.0
    worst_c = 0.0
    probes = 0
    for q in (1.0, 2.0, INF):
        rep = isometry_invariance_probe(ExtendedMetricSpec("product_q", q=q), isos, pairs, m0=1.5, r=0.6)
        probes += rep.probes
        worst_margin = max(worst_margin, rep.max_margin)
        worst_c = max(worst_c, abs(rep.derived_C - 0.6) if rep.derived_C is not None else INF)
    ok = worst_margin <= 1e-9 and worst_c <= 1e-9 and probes >= 1000
    verdict(11, "isometry invariance", ok, f"{probes} probes, margin {worst_margin:.1e}, |C - r| {worst_c:.1e}")


CLI_RUNS = [
    ["dist", "--metric", CONFIGS / "product.toml", "--a", CONFIGS / "a.json", "--b", CONFIGS / "b.json"],
    ["axioms", "--metric", CONFIGS / "product.toml", "--trials", "500", "--seed", "7"],
    ["axioms", "--metric", CONFIGS / "bounded_space.toml", "--trials", "300", "--format", "csv"],
    ["obstruct", "--config", CONFIGS / "linear_f.toml"],
    ["obstruct", "--config", CONFIGS / "collapse.toml"],
    ["warped", "--config", CONFIGS / "warped_constant.toml"],
    ["probe", "--metric", CONFIGS / "product.toml", "--seed", "3"],
]


def test_c12_cli_determinism(tmp_path):
    identical = 0
    for i, argv in enumerate(CLI_RUNS):
        outs = []
        for rep in range(2):
            target = tmp_path / f"run{i}_{rep}"
            cli_main([str(a) for a in argv] + ["--no-timestamp", "--out", str(target)])
            outs.append(target.read_bytes())
        identical += outs[0] == outs[1] and len(outs[0]) > 0
    ok = identical == len(CLI_RUNS)
    verdict(12, "CLI determinism", ok, f"{identical}/{len(CLI_RUNS)} commands byte-identical")


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as tmp:
                        fn(Path(tmp))
                else:
                    fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
