"""Randomised verification of metric axioms with replayable witnesses."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SamplerError
from .families import ExtendedMetricSpec, as_metric
from .measure import DiscreteMeasure, measure_from_dict, measures_equal
from .transport import wasserstein_distance

AXIOMS = ("non-negativity", "identity", "symmetry", "triangle")
DEFAULT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class MeasureSampler:
    """Random measures: 1-``max_atoms`` atoms uniform in a box, log-uniform mass.

    ``zero_prob`` draws the zero measure, ``share_prob`` makes a member of a
    triple reuse the mass or the profile of the first member, so equal-mass
    and equal-profile branches of a metric get exercised.
    """

    dim: int = 1
    box: tuple = (0.0, 1.0)
    min_atoms: int = 1
    max_atoms: int = 5
    mass_range: tuple = (0.1, 10.0)
    zero_prob: float = 0.0
    share_prob: float = 0.2

    def validate(self):
        if self.dim < 1:
            raise SamplerError("dim must be >= 1")
        if not (1 <= self.min_atoms <= self.max_atoms):
            raise SamplerError("need 1 <= min_atoms <= max_atoms")
        if not self.box[1] > self.box[0]:
            raise SamplerError("sampler box needs hi > lo")
        lo, hi = self.mass_range
        if not (0 < lo <= hi) or not math.isfinite(hi):
            raise SamplerError("mass_range must satisfy 0 < lo <= hi < inf")
        if not (0 <= self.zero_prob < 1) or not (0 <= self.share_prob <= 1):
            raise SamplerError("probabilities must lie in [0, 1)")
        return self

    def mass(self, rng):
        lo, hi = self.mass_range
        return float(math.exp(rng.uniform(math.log(lo), math.log(hi)))) if hi > lo else float(lo)

    def profile(self, rng):
        k = int(rng.integers(self.min_atoms, self.max_atoms + 1))
        pts = rng.uniform(self.box[0], self.box[1], (k, self.dim))
        w = rng.uniform(0.05, 1.0, k)
        return DiscreteMeasure(pts, w / w.sum(), dim=self.dim)

    def measure(self, rng):
        if self.zero_prob and rng.random() < self.zero_prob:
            return DiscreteMeasure.zero(self.dim)
        return self.profile(rng).scaled(self.mass(rng))

    def triple(self, rng):
        first = self.measure(rng)
        out = [first]
        for _ in range(2):
            if not first.is_zero and rng.random() < self.share_prob:
                if rng.random() < 0.5:
                    out.append(self.profile(rng).scaled(first.mass))
                else:
                    out.append(first.scaled(self.mass(rng) / first.mass))
            else:
                out.append(self.measure(rng))
        return out

    def to_dict(self):
        return {
            "dim": self.dim,
            "box": list(self.box),
            "min_atoms": self.min_atoms,
            "max_atoms": self.max_atoms,
            "mass_range": list(self.mass_range),
            "zero_prob": self.zero_prob,
            "share_prob": self.share_prob,
        }


@dataclass
class ViolationWitness:
    """Measures and values showing that ``lhs <= rhs`` (+ tolerance) fails.

    For the triangle axiom the measures are ``(x, y, z)`` and the inequality
    is ``d(x, z) <= d(x, y) + d(y, z)``.
    """

    axiom: str
    measures: list
    lhs: float
    rhs: float
    margin: float
    trial: Optional[int] = None
    tolerance: float = DEFAULT_TOLERANCE
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "axiom": self.axiom,
            "measures": [m.to_dict() for m in self.measures],
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "tolerance": self.tolerance,
        }
        if self.trial is not None:
            out["trial"] = self.trial
        if self.detail:
            out["detail"] = self.detail
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["axiom"],
            [measure_from_dict(m) for m in data["measures"]],
            data["lhs"],
            data["rhs"],
            data["margin"],
            data.get("trial"),
            data.get("tolerance", DEFAULT_TOLERANCE),
            data.get("detail", {}),
        )

    def replay(self, metric):
        """Recompute ``(lhs, rhs, margin)`` with ``metric``."""
        lhs, rhs = axiom_sides(as_metric(metric), self.axiom, self.measures, self.tolerance)
        return lhs, rhs, lhs - rhs


def axiom_sides(d, axiom, measures, tolerance=DEFAULT_TOLERANCE):
    """Both sides of one axiom instance, in the form ``lhs <= rhs``."""
    if axiom == "non-negativity":
        a, b = measures
        return -d(a, b), 0.0
    if axiom == "identity":
        if len(measures) == 1:
            (a,) = measures
            return d(a, a), 0.0
        # canonically distinct pair: require d > tolerance
        a, b = measures
        return 2.0 * tolerance, d(a, b)
    if axiom == "symmetry":
        a, b = measures
        return abs(d(a, b) - d(b, a)), 0.0
    if axiom == "triangle":
        x, y, z = measures
        return d(x, z), d(x, y) + d(y, z)
    raise ValueError(f"unknown axiom {axiom!r}")


@dataclass
class AxiomReport:
    metric_id: str
    axiom: str
    trials: int
    witnesses: list
    tolerance: float
    failures: int = 0

    def to_dict(self, max_witnesses=None):
        ws = self.witnesses if max_witnesses is None else self.witnesses[:max_witnesses]
        return {
            "axiom": self.axiom,
            "trials": self.trials,
            "failures": self.failures,
            "witnesses": [w.to_dict() for w in ws],
        }


@dataclass
class AxiomSuiteReport:
    metric_id: str
    seed: int
    trials: int
    tolerance: float
    reports: dict

    @property
    def witnesses(self):
        return [w for r in self.reports.values() for w in r.witnesses]

    @property
    def failures(self):
        return sum(r.failures for r in self.reports.values())

    def to_dict(self, max_witnesses=None):
        return {
            "metric": self.metric_id,
            "seed": self.seed,
            "trials": self.trials,
            "tolerance": self.tolerance,
            "failures": self.failures,
            "axioms": [self.reports[a].to_dict(max_witnesses) for a in AXIOMS],
        }


def _check_trial(d, triple, tolerance, trial):
    found = []

    def record(axiom, measures, lhs, rhs):
        if lhs - rhs > tolerance:
            found.append(ViolationWitness(axiom, list(measures), lhs, rhs, lhs - rhs, trial, tolerance))

    a, b, c = triple
    pairs = ((a, b), (a, c), (b, c))
    fwd = [d(x, y) for x, y in pairs]
    bwd = [d(y, x) for x, y in pairs]
    for (x, y), v in zip(pairs, fwd):
        record("non-negativity", (x, y), -v, 0.0)
    record("identity", (a,), d(a, a), 0.0)
    for (x, y), v in zip(pairs, fwd):
        if not measures_equal(x, y):
            record("identity", (x, y), 2.0 * tolerance, v)
    for (x, y), v, w in zip(pairs, fwd, bwd):
        record("symmetry", (x, y), abs(v - w), 0.0)
    dab, dac, dbc = fwd
    record("triangle", (a, c, b), dab, dac + bwd[2])  # d(a,b) <= d(a,c) + d(c,b)
    record("triangle", (a, b, c), dac, dab + dbc)  # d(a,c) <= d(a,b) + d(b,c)
    record("triangle", (b, a, c), dbc, bwd[0] + dac)  # d(b,c) <= d(b,a) + d(a,c)
    return found


def _threads(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("MASSCONE_THREADS", "").strip()
    return max(1, int(env)) if env.isdigit() else 1


def run_axiom_suite(metric, sampler=None, trials=10_000, tolerance=DEFAULT_TOLERANCE, seed=0, metric_id=None, threads=None):
    """Check the metric axioms on ``trials`` random triples.

    Trial ``t`` draws its triple from ``default_rng([seed, t])``, so reports
    are reproducible and independent of how trials are scheduled. ``threads``
    (default: ``MASSCONE_THREADS`` or 1) splits the trials across threads.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sampler = (sampler or MeasureSampler()).validate()
    d = as_metric(metric)
    if metric_id is None:
        metric_id = metric.family if isinstance(metric, ExtendedMetricSpec) else getattr(metric, "__name__", "custom")

    def chunk(trial_ids):
        out = []
        for t in map(int, trial_ids):
            rng = np.random.default_rng([seed, t])
            out.extend(_check_trial(d, sampler.triple(rng), tolerance, t))
        return out

    n_threads = _threads(threads)
    if n_threads == 1:
        found = chunk(range(trials))
    else:
        blocks = np.array_split(np.arange(trials), n_threads)
        with ThreadPoolExecutor(n_threads) as pool:
            found = [w for part in pool.map(chunk, blocks) for w in part]
        found.sort(key=lambda w: w.trial)

    reports = {}
    for axiom in AXIOMS:
        ws = [w for w in found if w.axiom == axiom]
        reports[axiom] = AxiomReport(metric_id, axiom, trials, ws, tolerance, len(ws))
    return AxiomSuiteReport(metric_id, seed, trials, tolerance, reports)


# ---------------------------------------------------------------------------
# triangle inequality in the reduced form used for min(f) families


@dataclass
class TriangleEquivalenceReport:
    margins: list
    witnesses: list
    tolerance: float

    @property
    def passed(self):
        return not self.witnesses

    def to_dict(self):
        return {
            "passed": self.passed,
            "checked": len(self.margins),
            "max_margin": max(self.margins) if self.margins else None,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def check_triangle_equivalence(f, triples, p=1.0, tolerance=DEFAULT_TOLERANCE):
    """Check ``f(m1) W(y1,y2) - f(m3) (W(y1,y3) + W(y2,y3)) <= 2 (m1 - m3)``.

    This is the only non-trivial case of the triangle inequality for
    ``|m1 - m2| + min(f(m1), f(m2)) W`` (masses ordered ``m3 < m1 <= m2``).
    ``triples`` holds ``((m1, y1), (m2, y2), (m3, y3))`` with probability
    profiles ``y_i``.
    """
    margins = []
    witnesses = []
    for k, ((m1, y1), (m2, y2), (m3, y3)) in enumerate(triples):
        if not (m3 < m1 <= m2):
            raise ValueError(f"triple {k}: masses must satisfy m3 < m1 <= m2")
        w12 = wasserstein_distance(y1, y2, p)
        w13 = wasserstein_distance(y1, y3, p)
        w23 = wasserstein_distance(y2, y3, p)
        lhs = f(m1) * w12 - f(m3) * (w13 + w23)
        rhs = 2.0 * (m1 - m3)
        margins.append(lhs - rhs)
        if lhs - rhs > tolerance:
            witnesses.append(
                ViolationWitness(
                    "triangle-equivalence",
                    [y1.scaled(m1), y2.scaled(m2), y3.scaled(m3)],
                    lhs,
                    rhs,
                    lhs - rhs,
                    k,
                    tolerance,
                )
            )
    return TriangleEquivalenceReport(margins, witnesses, tolerance)


def sample_ordered_triples(rng, n, sampler=None):
    """Random ``((m1, y1), (m2, y2), (m3, y3))`` with ``m3 < m1 <= m2``."""
    sampler = (sampler or MeasureSampler()).validate()
    out = []
    while len(out) < n:
        ms = sorted(sampler.mass(rng) for _ in range(3))
        if not ms[0] < ms[1]:
            continue
        m3, m1, m2 = ms
        out.append(((m1, sampler.profile(rng)), (m2, sampler.profile(rng)), (m3, sampler.profile(rng))))
    return out
