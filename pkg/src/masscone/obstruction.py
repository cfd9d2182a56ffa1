"""Searches for the inequalities that rule out mass-dependent scaling.

All searches run on Dirac measures ``m * delta_x`` with ``x`` drawn from a
base-point set ``Sigma``. Unbounded ``Sigma`` is approximated by a reach
``R_max``; reports state the largest separation examined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .axioms import ViolationWitness
from .errors import FiberViolationError
from .families import as_metric, fiber_scaling_probe, random_probe_pairs
from .measure import DiscreteMeasure, Isometry, pushforward_isometry
from .transport import wasserstein_distance

INVARIANCE_TOL = 1e-9
CONTINUITY_TOL = 1e-5
COLLAPSE_TOL = 1e-12


def oscillation_bound(C, separation):
    """Largest ``|f(m1) - f(m2)|`` compatible with the uniform mass bound ``C`` at a fiber separation."""
    if separation <= 0:
        raise ValueError("separation must be positive")
    return 4.0 * C / separation


def geometric_schedule(start, reach, factor=2.0):
    """``start, start*factor, ...`` below ``reach``, then ``reach`` itself."""
    if start <= 0 or reach <= 0:
        raise ValueError("start and reach must be positive")
    out = []
    s = float(start)
    while s < reach:
        out.append(s)
        s *= factor
    out.append(float(reach))
    return out


@dataclass(frozen=True)
class SigmaSampler:
    """Base points for Dirac pairs.

    ``kind="ray"``: ``base + t * direction`` for ``0 <= t <= reach``, probed
    at geometric separations. ``kind="lattice"``: the same ray restricted to
    multiples of ``spacing``. ``kind="points"``: an explicit finite set whose
    pairs are visited by increasing separation.
    """

    kind: str = "ray"
    dim: int = 1
    reach: float = 1e6
    start: float = 1.0
    spacing: float = 1.0
    base: Optional[tuple] = None
    direction: Optional[tuple] = None
    points: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("ray", "lattice", "points"):
            raise ValueError(f"unknown Sigma kind {self.kind!r}")
        if self.kind == "points":
            pts = np.atleast_2d(np.asarray(self.points, dtype=float))
            if pts.shape[0] < 1:
                raise ValueError("points Sigma needs at least one point")
            object.__setattr__(self, "points", tuple(map(tuple, pts)))
            object.__setattr__(self, "dim", pts.shape[1])
        elif not self.reach > 0:
            raise ValueError("reach must be positive")

    def _ray(self):
        base = np.zeros(self.dim) if self.base is None else np.asarray(self.base, dtype=float)
        direction = np.eye(self.dim)[0] if self.direction is None else np.asarray(self.direction, dtype=float)
        return base, direction / np.linalg.norm(direction)

    def diameter(self):
        if self.kind == "points":
            pts = np.asarray(self.points)
            return float(pdist(pts).max()) if len(pts) > 1 else 0.0
        if self.kind == "lattice":
            return math.floor(self.reach / self.spacing + 1e-12) * self.spacing
        return float(self.reach)

    def pairs(self):
        """Yield ``(x, y, |x - y|)`` by non-decreasing separation."""
        if self.kind == "points":
            pts = np.asarray(self.points)
            if len(pts) < 2:
                return
            D = squareform(pdist(pts))
            iu = np.triu_indices(len(pts), 1)
            order = np.argsort(D[iu], kind="stable")
            for k in order:
                i, j = iu[0][k], iu[1][k]
                yield pts[i], pts[j], float(D[i, j])
            return
        base, direction = self._ray()
        seps = geometric_schedule(self.start, self.reach)
        if self.kind == "lattice":
            seps = sorted({math.ceil(s / self.spacing - 1e-12) * self.spacing for s in seps if s <= self.diameter()})
            seps = [s for s in seps if s > 0] or [self.spacing]
        for s in seps:
            yield base, base + s * direction, float(s)

    def sample_points(self, n=64):
        """Representative points of Sigma (for sup estimates)."""
        if self.kind == "points":
            return np.asarray(self.points)
        base, direction = self._ray()
        ts = [0.0] + geometric_schedule(self.start, self.diameter() or self.reach)
        return np.array([base + t * direction for t in ts[:n]])

    def to_dict(self):
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind == "points":
            out["points"] = [list(p) for p in self.points]
        else:
            out.update(reach=self.reach, start=self.start)
            if self.kind == "lattice":
                out["spacing"] = self.spacing
        return out


@dataclass
class ObstructionConfig:
    """Inputs of the scaling-violation search around mass ``m0``."""

    sigma: SigmaSampler = field(default_factory=SigmaSampler)
    m0: float = 1.0
    r: float = 0.5
    C: float = 1.0
    candidate: object = None
    mass_samples: int = 5
    probe_seed: int = 0

    def __post_init__(self):
        if not (self.r > 0 and self.C > 0 and self.m0 > 0):
            raise ValueError("m0, r and C must be positive")

    def masses(self):
        """Interior grid ``m0 + r * j / (N + 1)``, ``|j| <= N``, of the open mass window."""
        N = self.mass_samples
        ms = self.m0 + self.r * np.arange(-N, N + 1) / (N + 1)
        return ms[ms > 0]


@dataclass
class ObstructionReport:
    """Outcome of a search: ``witness`` is None when nothing was found."""

    kind: str
    witness: Optional[ViolationWitness]
    max_separation: float
    examined: int
    detail: dict = field(default_factory=dict)

    @property
    def found(self):
        return self.witness is not None

    def to_dict(self):
        return {
            "kind": self.kind,
            "found": self.found,
            "max_separation": self.max_separation,
            "examined": self.examined,
            "witness": self.witness.to_dict() if self.witness else None,
            "detail": self.detail,
        }


def _dirac(x, m):
    return DiscreteMeasure.dirac(x, m)


def verify_fiber(candidate, f, masses, dim, seed=0, n_pairs=3):
    """Raise :class:`FiberViolationError` unless ``d(m mu1, m mu2) = f(m) W_p`` at every mass."""
    rng = np.random.default_rng(seed)
    pairs = random_probe_pairs(rng, n_pairs, dim=dim)
    probes = []
    for m in masses:
        probe = fiber_scaling_probe(candidate, m, pairs)
        fm = f(m)
        if not probe.consistent or abs(probe.estimate - fm) > 1e-8 * max(1.0, abs(fm)):
            raise FiberViolationError(
                f"candidate is not fiber-consistent with f at m={m:g} (estimate {probe.estimate:.12g}, f(m)={fm:.12g})"
            )
        probes.append(probe)
    return probes


def find_scaling_violation(cfg, f):
    """Look for Diracs in Sigma at which the mass-leg bound ``C`` cannot hold.

    For masses ``m1, m2`` in the window around ``m0`` the chain
    ``m1 dx -> m2 dx -> m2 dy -> m1 dy`` gives
    ``f(m1) |x - y| <= 4C + f(m2) |x - y|``; the search walks separations in
    increasing order and returns the first pair where this fails, using the
    mass pair of largest ``f`` oscillation.
    """
    masses = cfg.masses()
    fvals = np.array([f(m) for m in masses])
    probes = []
    if cfg.candidate is not None:
        probes = verify_fiber(cfg.candidate, f, masses, cfg.sigma.dim, seed=cfg.probe_seed)
    hi = int(np.argmax(fvals))
    lo = int(np.argmin(fvals))
    osc = float(fvals[hi] - fvals[lo])
    detail = {
        "masses": masses.tolist(),
        "oscillation": osc,
        "C": cfg.C,
        "fiber_probes": [p.to_dict() for p in probes],
    }
    if osc == 0.0:
        return ObstructionReport("scaling", None, 0.0, 0, detail)

    m1, m2 = float(masses[hi]), float(masses[lo])
    d = as_metric(cfg.candidate) if cfg.candidate is not None else None
    examined = 0
    max_sep = 0.0
    for x, y, sep in cfg.sigma.pairs():
        examined += 1
        max_sep = max(max_sep, sep)
        lhs = fvals[hi] * sep
        rhs = 4.0 * cfg.C + fvals[lo] * sep
        if lhs - rhs > 0.0:
            chain = [_dirac(x, m1), _dirac(x, m2), _dirac(y, m2), _dirac(y, m1)]
            w_detail = {
                "kind": "scaling-chain",
                "separation": sep,
                "m1": m1,
                "m2": m2,
                "f_m1": float(fvals[hi]),
                "f_m2": float(fvals[lo]),
                "C": cfg.C,
                "bound": oscillation_bound(cfg.C, sep),
            }
            if d is not None:
                w_detail["chain_distances"] = [d(chain[k], chain[k + 1]) for k in range(3)]
                w_detail["direct_distance"] = d(chain[0], chain[3])
            witness = ViolationWitness("scaling-chain", chain, float(lhs), float(rhs), float(lhs - rhs), detail=w_detail)
            return ObstructionReport("scaling", witness, max_sep, examined, detail)
    return ObstructionReport("scaling", None, max_sep, examined, detail)


@dataclass
class ExtensionCandidate:
    """A fiber scaling ``lam0`` at mass ``m0`` plus a rule for distances to the zero measure.

    ``Lambda`` is the claimed bound on ``d(0, m0 delta_x)`` over Sigma.
    """

    lam0: float
    Lambda: float
    m0: float = 1.0
    metric: Optional[Callable] = None
    zero_rule: Optional[Callable[[DiscreteMeasure], float]] = None

    def __post_init__(self):
        if not self.lam0 > 0:
            raise ValueError("lam0 must be positive")
        if not (self.Lambda >= 0 and math.isfinite(self.Lambda)):
            raise ValueError("Lambda must be finite and non-negative")

    @classmethod
    def from_metric(cls, metric, zero_rule, m0, sigma, seed=0):
        """Estimate ``lam0`` by fiber probing and ``Lambda`` over sampled Sigma points."""
        rng = np.random.default_rng(seed)
        probe = fiber_scaling_probe(metric, m0, random_probe_pairs(rng, 3, dim=sigma.dim))
        if not probe.consistent:
            raise FiberViolationError(f"metric is not fiber-consistent at m0={m0:g}")
        Lambda = max(zero_rule(_dirac(x, m0)) for x in sigma.sample_points())
        return cls(probe.estimate, float(Lambda), m0, as_metric(metric), zero_rule)

    @property
    def threshold(self):
        return 2.0 * self.Lambda / self.lam0


def zero_extension_diameter_test(cand, sigma):
    """Find Diracs in Sigma farther apart than ``2 Lambda / lam0``.

    Such a pair breaks ``lam0 |x - y| <= d(m0 dx, 0) + d(0, m0 dy)``, the
    triangle inequality through the zero measure.
    """
    threshold = cand.threshold
    examined = 0
    max_sep = 0.0
    for x, y, sep in sigma.pairs():
        examined += 1
        max_sep = max(max_sep, sep)
        lhs = cand.lam0 * sep
        rhs = 2.0 * cand.Lambda
        if lhs - rhs > 0.0:
            mx, my = _dirac(x, cand.m0), _dirac(y, cand.m0)
            w_detail = {
                "kind": "zero-extension",
                "separation": sep,
                "lam0": cand.lam0,
                "Lambda": cand.Lambda,
                "threshold": threshold,
            }
            if cand.metric is not None:
                w_detail["fiber_distance"] = cand.metric(mx, my)
            if cand.zero_rule is not None:
                w_detail["zero_distances"] = [cand.zero_rule(mx), cand.zero_rule(my)]
            witness = ViolationWitness("zero-extension", [mx, my], lhs, rhs, lhs - rhs, detail=w_detail)
            return ObstructionReport("zero-extension", witness, max_sep, examined, {"threshold": threshold})
    return ObstructionReport("zero-extension", None, max_sep, examined, {"threshold": threshold})


def mass_continuity_collapse_test(cand, mu1, mu2, masses, p=1.0, tolerance=COLLAPSE_TOL):
    """Walk ``m_k`` and test ``lam W_p(mu1, mu2) <= d(m_k mu1, 0) + d(0, m_k mu2)``.

    If distances to zero vanish as the mass does, the right side collapses
    while the left side stays fixed; the first ``k`` where the chain breaks
    is returned as the witness.
    """
    if cand.zero_rule is None:
        raise ValueError("collapse test needs a zero-distance rule")
    w = wasserstein_distance(mu1, mu2, p)
    lhs = cand.lam0 * w
    examined = 0
    for k, m in enumerate(masses):
        examined += 1
        a, b = mu1.scaled(m), mu2.scaled(m)
        rhs = cand.zero_rule(a) + cand.zero_rule(b)
        if lhs - rhs > tolerance:
            witness = ViolationWitness(
                "mass-collapse",
                [a, b],
                lhs,
                rhs,
                lhs - rhs,
                trial=k,
                tolerance=tolerance,
                detail={"kind": "mass-collapse", "index": k, "mass": float(m), "lam": cand.lam0, "W": w},
            )
            return ObstructionReport("mass-collapse", witness, 0.0, examined, {"W": w})
    return ObstructionReport("mass-collapse", None, 0.0, examined, {"W": w})


def verify_witness(witness, f=None, cand=None, p=1.0):
    """Recompute ``(lhs, rhs, margin)`` of an obstruction witness from its own data."""
    kind = witness.detail.get("kind", witness.axiom)
    if kind == "scaling-chain":
        if f is None:
            raise ValueError("scaling witnesses replay against f")
        x = witness.measures[0].points[0]
        y = witness.measures[3].points[0]
        sep = float(np.linalg.norm(x - y))
        m1 = witness.measures[0].mass
        m2 = witness.measures[1].mass
        lhs = f(m1) * sep
        rhs = 4.0 * witness.detail["C"] + f(m2) * sep
    elif kind == "zero-extension":
        x = witness.measures[0].points[0]
        y = witness.measures[1].points[0]
        lam0 = cand.lam0 if cand else witness.detail["lam0"]
        Lam = cand.Lambda if cand else witness.detail["Lambda"]
        lhs = lam0 * float(np.linalg.norm(x - y))
        rhs = 2.0 * Lam
    elif kind == "mass-collapse":
        if cand is None:
            raise ValueError("collapse witnesses replay against the candidate")
        a, b = witness.measures
        m = a.mass
        lhs = cand.lam0 * wasserstein_distance(a.scaled(1.0 / m), b.scaled(1.0 / b.mass), p)
        rhs = cand.zero_rule(a) + cand.zero_rule(b)
    else:
        raise ValueError(f"not an obstruction witness: {kind!r}")
    return lhs, rhs, lhs - rhs


# ---------------------------------------------------------------------------
# isometry invariance


@dataclass
class InvarianceReport:
    invariant: bool
    max_margin: float
    probes: int
    mass_continuous: bool
    continuity_values: list
    derived_C: Optional[float]
    m0: float
    r: float
    position_spread: Optional[float] = None

    def to_dict(self):
        return {
            "invariant": self.invariant,
            "max_margin": self.max_margin,
            "probes": self.probes,
            "mass_continuous": self.mass_continuous,
            "continuity_values": list(self.continuity_values),
            "derived_C": self.derived_C,
            "m0": self.m0,
            "r": self.r,
            "position_spread": self.position_spread,
        }


def isometry_invariance_probe(metric, isometries, pairs, m0=1.0, r=None, continuity_exponents=range(1, 7), tol=INVARIANCE_TOL):
    """Check ``d(T#mu, T#nu) = d(mu, nu)`` and derive a uniform mass bound.

    When invariance holds and ``d(m delta_0, m0 delta_0) -> 0`` as
    ``m -> m0``, translation invariance makes ``d(m delta_x, m0 delta_x)``
    independent of ``x``, so ``C = sup_{|m - m0| <= r} d(m delta_0, m0 delta_0)``
    bounds the mass legs uniformly over all of R^n. ``derived_C`` is that sup
    on a grid including ``m0 +- r``.
    """
    d = as_metric(metric)
    isos = [T if isinstance(T, Isometry) else Isometry(*T) for T in isometries]
    margin = 0.0
    n = 0
    for T in isos:
        for mu, nu in pairs:
            base = d(mu, nu)
            moved = d(pushforward_isometry(mu, T), pushforward_isometry(nu, T))
            margin = max(margin, abs(moved - base))
            n += 1
    invariant = margin <= tol

    dim = pairs[0][0].dim if pairs else (isos[0].dim if isos else 1)
    origin = np.zeros(dim)
    ref = _dirac(origin, m0)
    values = []
    for k in continuity_exponents:
        h = 10.0 ** (-k)
        values.append(max(d(_dirac(origin, m0 + h), ref), d(_dirac(origin, m0 - h), ref) if m0 - h > 0 else 0.0))
    mass_continuous = bool(values) and values[-1] <= CONTINUITY_TOL

    if r is None:
        r = 0.5 * m0
    derived = None
    spread = None
    if invariant and mass_continuous:
        ms = np.linspace(m0 - r, m0 + r, 41)
        ms = ms[ms > 0]
        derived = float(max(d(_dirac(origin, m), ref) for m in ms))
        # the bound is position independent: compare against translated copies
        rng = np.random.default_rng(0)
        xs = rng.uniform(-100, 100, (8, dim))
        spread = float(
            max(abs(d(_dirac(x, m0 + r), _dirac(x, m0)) - d(_dirac(origin, m0 + r), ref)) for x in xs)
        )
    return InvarianceReport(invariant, float(margin), n, mass_continuous, values, derived, float(m0), float(r), spread)
