"""Extended distances on measures of variable mass.

Every family splits a measure into (mass, profile) and combines a cost for the
mass change with the Wasserstein distance of the profiles:

* ``product_q``: ``(|m1 - m2|^q + lam^q W_p^q)^(1/q)``, ``q`` in ``[1, inf]``;
* ``bounded_mass_distance``: ``dmass(m1, m2) + lam W_p`` with a bounded mass
  metric ``dmass``;
* ``bounded_space_with_zero``: ``|m1 - m2| + min(f(m1), f(m2)) W_p`` on a
  bounded domain, extended to the zero measure by ``d(0, mu) = |mu|``;
* ``warped_dirac_cone``: warped-product distance, restricted to Diracs
  (see :mod:`masscone.warped`);
* ``custom``: any user-supplied callable.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigError,
    DegenerateProbeError,
    DomainError,
    InadmissibleScalingError,
    ZeroMassError,
)
from .measure import DiscreteMeasure, decompose, total_mass
from .transport import MASS_TOL, wasserstein_distance

FAMILIES = ("product_q", "bounded_mass_distance", "bounded_space_with_zero", "warped_dirac_cone", "custom")

LIPSCHITZ_SLACK = 1e-9
CLAIM_SLACK = 1e-6
LIMIT_TOL = 1e-6
FIBER_AGREEMENT = 1e-8
PROBE_MIN_W = 1e-6


# ---------------------------------------------------------------------------
# scaling functions f: (0, inf) -> (0, inf)


@dataclass(frozen=True, eq=False)
class ScalingFunction:
    """Mass-dependent multiplier of the Wasserstein term.

    ``eq=False`` keeps instances hashable by identity so admissibility
    reports can be cached per function object.
    """

    evaluator: Callable[[float], float]
    claimed_lipschitz: Optional[float] = None
    claimed_monotone: bool = False
    limit_at_zero: Optional[float] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, m):
        return float(self.evaluator(m))

    def values(self, masses):
        return np.array([self(m) for m in np.asarray(masses, dtype=float)])

    def to_dict(self):
        return {"name": self.name, **self.params}

    # built-ins --------------------------------------------------------------

    @classmethod
    def ratio(cls):
        """``m / (1 + m)``: 1-Lipschitz, increasing, vanishing at 0."""
        return cls(lambda m: m / (1.0 + m), 1.0, True, 0.0, "ratio")

    @classmethod
    def identity(cls):
        return cls(lambda m: float(m), 1.0, True, 0.0, "identity")

    @classmethod
    def constant(cls, value=1.0):
        value = float(value)
        if value <= 0:
            raise ValueError("constant scaling must be positive")
        return cls(lambda m: value, 0.0, True, value, "constant", {"value": value})

    @classmethod
    def linear_capped(cls, slope=1.0, cap=1.0):
        """``min(slope * m, cap)``."""
        slope, cap = float(slope), float(cap)
        if slope <= 0 or cap <= 0:
            raise ValueError("slope and cap must be positive")
        return cls(lambda m: min(slope * m, cap), slope, True, 0.0, "linear_capped", {"slope": slope, "cap": cap})

    @classmethod
    def power(cls, exponent=0.5):
        e = float(exponent)
        return cls(lambda m: float(m) ** e, None, True, 0.0, "power", {"exponent": e})

    @classmethod
    def tabulated(cls, masses, values):
        """Piecewise-linear interpolation of samples, constant beyond the table."""
        xs = np.asarray(masses, dtype=float)
        ys = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("tabulated scaling needs matching 1-D masses and values (>= 2 samples)")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("tabulated masses must be strictly increasing")
        slopes = np.abs(np.diff(ys) / np.diff(xs))
        limit = float(ys[0]) if xs[0] == 0 else None
        return cls(
            lambda m: float(np.interp(m, xs, ys)),
            float(slopes.max()),
            bool(np.all(np.diff(ys) >= 0)),
            limit,
            "tabulated",
            {"masses": xs.tolist(), "values": ys.tolist()},
        )


_BUILTIN_SCALINGS = {
    "ratio": ScalingFunction.ratio,
    "identity": ScalingFunction.identity,
    "constant": ScalingFunction.constant,
    "linear_capped": ScalingFunction.linear_capped,
    "power": ScalingFunction.power,
}


def scaling_from_config(obj, source=None):
    """Build a :class:`ScalingFunction` from a config value.

    Accepts a built-in name (``"ratio"``, ``"identity"``, ...), a table
    ``{"name": "tabulated", "masses": [...], "values": [...]}``, a number
    (constant) or a mapping ``{"name": ..., **params}``.
    """
    if isinstance(obj, ScalingFunction):
        return obj
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return ScalingFunction.constant(obj)
    if isinstance(obj, str):
        obj = {"name": obj}
    if not isinstance(obj, dict):
        raise ConfigError(f"cannot interpret scaling function {obj!r}", path=source, field="f")
    params = dict(obj)
    name = params.pop("name", "tabulated" if "masses" in params else None)
    try:
        if name == "tabulated":
            return ScalingFunction.tabulated(params["masses"], params["values"])
        return _BUILTIN_SCALINGS[name](**params)
    except KeyError as exc:
        raise ConfigError(f"unknown scaling function or missing parameter {exc}", path=source, field="f") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path=source, field="f") from exc


# ---------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class MassGrid:
    """Sample of masses in ``(0, m_max]``: half geometric (dense near 0), half linear."""

    m_max: float = 100.0
    n_samples: int = 4000
    m_min: float = 1e-9

    def points(self):
        if self.n_samples < 1000:
            raise ValueError("admissibility grid needs at least 1000 samples")
        half = self.n_samples // 2
        geo = np.geomspace(self.m_min, self.m_max, half)
        lin = np.linspace(self.m_max / half, self.m_max, self.n_samples - half)
        return np.unique(np.concatenate([geo, lin]))


@dataclass
class AdmissibilityReport:
    admissible: bool
    lipschitz_bound: float
    max_quotient: float
    lipschitz_source: str
    lipschitz_ok: bool
    monotone_ok: bool
    limit_estimate: float
    limit_ok: bool
    failures: list
    grid: MassGrid

    def to_dict(self):
        return {
            "admissible": self.admissible,
            "lipschitz_bound": self.lipschitz_bound,
            "max_quotient": self.max_quotient,
            "lipschitz_source": self.lipschitz_source,
            "lipschitz_ok": self.lipschitz_ok,
            "monotone_ok": self.monotone_ok,
            "limit_estimate": self.limit_estimate,
            "limit_ok": self.limit_ok,
            "failures": list(self.failures),
        }


def check_f_admissible(f, diam_bound, grid=None):
    """Sample-based check that ``f`` may be paired with a domain of diameter ``diam_bound``.

    ``f`` must be Lipschitz with constant at most ``1 / diam_bound``,
    non-decreasing and vanish at ``0+``. The Lipschitz constant is the
    largest difference quotient between consecutive grid masses, unless ``f``
    carries an analytic ``claimed_lipschitz`` (which then has to agree with
    the samples up to ``CLAIM_SLACK``).
    """
    if diam_bound <= 0:
        raise ValueError("diam_bound must be positive")
    grid = grid or MassGrid()
    ms = grid.points()
    vals = f.values(ms)
    failures = []

    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        failures.append("f is not finite and positive on the grid")

    quotients = np.abs(np.diff(vals)) / np.diff(ms)
    sampled = float(np.max(quotients))
    bound = 1.0 / diam_bound
    if f.claimed_lipschitz is not None:
        lip, source = float(f.claimed_lipschitz), "claimed"
        if sampled > lip + CLAIM_SLACK:
            failures.append(f"sampled quotient {sampled:.6g} exceeds claimed Lipschitz constant {lip:.6g}")
    else:
        lip, source = sampled, "sampled"
    lipschitz_ok = lip <= bound + LIPSCHITZ_SLACK and not (
        source == "claimed" and sampled > lip + CLAIM_SLACK
    )
    if lip > bound + LIPSCHITZ_SLACK:
        failures.append(f"Lipschitz constant {lip:.6g} exceeds 1/diam = {bound:.6g}")

    monotone_ok = bool(np.all(np.diff(vals) >= 0))
    if not monotone_ok:
        failures.append("f decreases somewhere on the grid")

    limit_estimate = float(vals[0])
    limit_ok = limit_estimate <= LIMIT_TOL
    if f.limit_at_zero is not None and f.limit_at_zero != 0:
        limit_ok = False
    if not limit_ok:
        failures.append(f"f does not vanish at 0+ (f({ms[0]:.1e}) = {limit_estimate:.6g})")

    return AdmissibilityReport(
        admissible=not failures,
        lipschitz_bound=bound,
        max_quotient=sampled,
        lipschitz_source=source,
        lipschitz_ok=lipschitz_ok,
        monotone_ok=monotone_ok,
        limit_estimate=limit_estimate,
        limit_ok=limit_ok,
        failures=failures,
        grid=grid,
    )


@functools.lru_cache(maxsize=64)
def _cached_admissibility(f, diam_bound):
    return check_f_admissible(f, diam_bound)


def require_admissible(f, diam_bound):
    report = _cached_admissibility(f, float(diam_bound))
    if not report.admissible:
        raise InadmissibleScalingError("; ".join(report.failures), report)
    return report


# ---------------------------------------------------------------------------
# mass distances for the bounded-mass family


@dataclass(frozen=True, eq=False)
class MassDistance:
    """Distance on (0, inf) together with a bound ``C_d`` on its values."""

    func: Callable[[float, float], float]
    bound: Optional[float]
    name: str = "custom"

    def __call__(self, m1, m2):
        return float(self.func(m1, m2))

    @classmethod
    def discrete(cls):
        """0 for equal masses, 1 otherwise; equality up to the ingestion tolerance."""
        return cls(
            lambda a, b: 0.0 if abs(a - b) <= MASS_TOL * max(1.0, a, b) else 1.0, 1.0, "discrete"
        )

    @classmethod
    def truncated(cls):
        return cls(lambda a, b: min(abs(a - b), 1.0), 1.0, "truncated")

    @classmethod
    def arctan(cls):
        return cls(lambda a, b: abs(math.atan(a) - math.atan(b)), math.pi / 2, "arctan")

    @classmethod
    def euclidean(cls):
        return cls(lambda a, b: abs(a - b), None, "euclidean")

    def certified_bound(self, masses=None):
        """Largest sampled value over mass pairs; must not exceed ``bound``."""
        if masses is None:
            masses = np.geomspace(1e-6, 1e6, 121)
        worst = max(self(a, b) for a in masses for b in masses)
        return float(worst)

    def to_dict(self):
        return {"name": self.name, "bound": self.bound}


_BUILTIN_MASS_DISTANCES = {
    "discrete": MassDistance.discrete,
    "truncated": MassDistance.truncated,
    "arctan": MassDistance.arctan,
    "euclidean": MassDistance.euclidean,
}


def mass_distance_from_config(obj, source=None):
    if isinstance(obj, MassDistance):
        return obj
    name = obj.get("name") if isinstance(obj, dict) else obj
    try:
        return _BUILTIN_MASS_DISTANCES[name]()
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"unknown mass distance {name!r}", path=source, field="mass_distance") from exc


# ---------------------------------------------------------------------------
# bounded domains


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo, hi]^dim``."""

    lo: float = 0.0
    hi: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("box needs hi > lo")

    @property
    def diameter(self):
        # attained by Diracs at opposite corners
        return (self.hi - self.lo) * math.sqrt(self.dim)

    def contains(self, points, tol=1e-12):
        points = np.asarray(points)
        return bool(np.all(points >= self.lo - tol) and np.all(points <= self.hi + tol))

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "dim": self.dim}


# ---------------------------------------------------------------------------
# the families


def _positive_parts(mu1, mu2):
    if total_mass(mu1) == 0 or total_mass(mu2) == 0:
        raise ZeroMassError("this family is defined on positive-mass measures only")
    return decompose(mu1), decompose(mu2)


def dist_product_q(mu1, mu2, lam=1.0, q=2.0, p=1.0):
    """Product distance ``(|m1 - m2|^q + lam^q W_p(profiles)^q)^(1/q)``; ``q = inf`` gives the max."""
    d1, d2 = _positive_parts(mu1, mu2)
    dm = abs(d1.mass - d2.mass)
    w = lam * wasserstein_distance(d1.profile, d2.profile, p)
    if math.isinf(q):
        return max(dm, w)
    if q == 1:
        return dm + w
    if q == 2:
        return math.hypot(dm, w)
    return (dm**q + w**q) ** (1.0 / q)


def dist_bounded_mass(mu1, mu2, lam=1.0, p=1.0, mass_distance=None):
    """``dmass(m1, m2) + lam W_p(profiles)`` for a bounded mass metric ``dmass``."""
    mass_distance = mass_distance or MassDistance.discrete()
    if mass_distance.bound is None:
        raise ValueError(f"mass distance {mass_distance.name!r} is not bounded")
    d1, d2 = _positive_parts(mu1, mu2)
    return mass_distance(d1.mass, d2.mass) + lam * wasserstein_distance(d1.profile, d2.profile, p)


def dist_bounded_space_with_zero(mu1, mu2, f=None, p=1.0, diam_bound=None, domain=None, check=True):
    """Distance on all measures (zero included) over a bounded domain.

    ``|m1 - m2| + min(f(m1), f(m2)) W_p(profiles)`` for positive masses,
    ``m`` against the zero measure and ``0`` between two zero measures.
    """
    f = f or ScalingFunction.ratio()
    dim = mu1.dim
    domain = domain or Box(0.0, 1.0, dim)
    if diam_bound is None:
        diam_bound = domain.diameter
    for mu in (mu1, mu2):
        if not mu.is_zero and not domain.contains(mu.points):
            raise DomainError(f"support point outside {domain}")
    if check:
        require_admissible(f, diam_bound)
    m1, m2 = total_mass(mu1), total_mass(mu2)
    if m1 == 0 or m2 == 0:
        return m1 + m2
    d1, d2 = decompose(mu1), decompose(mu2)
    return abs(m1 - m2) + min(f(m1), f(m2)) * wasserstein_distance(d1.profile, d2.profile, p)


# ---------------------------------------------------------------------------
# metric specs


@dataclass(frozen=True, eq=False)
class ExtendedMetricSpec:
    """One configured extended distance.

    Only the parameters relevant to ``family`` are used; :meth:`validate`
    checks that they are present and consistent.
    """

    family: str
    lam: float = 1.0
    q: float = 2.0
    p: float = 1.0
    f: Optional[ScalingFunction] = None
    mass_distance: Optional[MassDistance] = None
    diam_bound: Optional[float] = None
    domain: Optional[Box] = None
    warping: object = None
    grid: object = None
    evaluator: Optional[Callable] = None
    name: str = ""

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}", field="family")
        if self.p < 1:
            raise ConfigError("p must be >= 1", field="p")
        if self.family in ("product_q", "bounded_mass_distance") and not self.lam > 0:
            raise ConfigError("lambda must be positive", field="lambda")
        if self.family == "product_q" and not self.q >= 1:
            raise ConfigError("q must lie in [1, inf]", field="q")
        if self.family == "bounded_mass_distance":
            md = self.mass_distance or MassDistance.discrete()
            if md.bound is None:
                raise ConfigError(f"mass distance {md.name!r} is unbounded", field="mass_distance")
            if md.certified_bound() > md.bound + 1e-12:
                raise ConfigError(f"mass distance {md.name!r} exceeds its bound", field="mass_distance")
        if self.family == "bounded_space_with_zero":
            f = self.f or ScalingFunction.ratio()
            dim = self.domain.dim if self.domain else 1
            report = check_f_admissible(f, self.resolved_diam_bound(dim))
            if not report.admissible:
                raise InadmissibleScalingError("; ".join(report.failures), report)
        if self.family == "custom" and self.evaluator is None:
            raise ConfigError("custom family needs an evaluator", field="evaluator")
        if self.family == "warped_dirac_cone" and self.warping is None:
            raise ConfigError("warped family needs a warping function", field="g")
        return self

    def resolved_diam_bound(self, dim):
        if self.diam_bound is not None:
            return float(self.diam_bound)
        return (self.domain or Box(0.0, 1.0, dim)).diameter

    def fiber_scaling(self, m):
        """The multiplier this family applies on the fiber of mass ``m`` (None for custom)."""
        if self.family in ("product_q", "bounded_mass_distance"):
            return self.lam
        if self.family == "bounded_space_with_zero":
            return (self.f or ScalingFunction.ratio())(m)
        if self.family == "warped_dirac_cone":
            return 1.0
        return None

    def with_params(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        out = {"family": self.family, "p": self.p}
        if self.name:
            out["name"] = self.name
        if self.family in ("product_q", "bounded_mass_distance"):
            out["lambda"] = self.lam
        if self.family == "product_q":
            out["q"] = "inf" if math.isinf(self.q) else self.q
        if self.family == "bounded_mass_distance":
            out["mass_distance"] = (self.mass_distance or MassDistance.discrete()).to_dict()
        if self.family == "bounded_space_with_zero":
            out["f"] = (self.f or ScalingFunction.ratio()).to_dict()
            out["domain"] = self.domain.to_dict() if self.domain else None
            out["diam_bound"] = self.diam_bound
        if self.family == "warped_dirac_cone":
            out["g"] = self.warping.to_dict() if hasattr(self.warping, "to_dict") else str(self.warping)
            out["grid"] = self.grid.to_dict() if hasattr(self.grid, "to_dict") else self.grid
        if self.family == "custom":
            out["evaluator"] = getattr(self.evaluator, "__name__", repr(self.evaluator))
        return out


def make_metric(spec):
    """Turn a spec into a callable ``d(mu, nu) -> float``.

    Admissibility for ``bounded_space_with_zero`` is checked once here rather
    than on every evaluation.
    """
    spec.validate()
    fam = spec.family
    if fam == "product_q":
        return functools.partial(dist_product_q, lam=spec.lam, q=spec.q, p=spec.p)
    if fam == "bounded_mass_distance":
        return functools.partial(
            dist_bounded_mass, lam=spec.lam, p=spec.p, mass_distance=spec.mass_distance or MassDistance.discrete()
        )
    if fam == "bounded_space_with_zero":
        f = spec.f or ScalingFunction.ratio()

        def metric(mu1, mu2):
            domain = spec.domain or Box(0.0, 1.0, mu1.dim)
            diam = spec.resolved_diam_bound(mu1.dim)
            require_admissible(f, diam)
            return dist_bounded_space_with_zero(mu1, mu2, f, spec.p, diam, domain, check=False)

        return metric
    if fam == "warped_dirac_cone":
        from .warped import warped_metric

        return warped_metric(spec.warping, spec.grid, spec.p)
    return spec.evaluator


def as_metric(metric):
    """Accept either a spec or a plain callable."""
    if isinstance(metric, ExtendedMetricSpec):
        return make_metric(metric)
    if callable(metric):
        return metric
    raise TypeError(f"not a metric: {metric!r}")


# ---------------------------------------------------------------------------
# fiber probing


@dataclass
class FiberProbe:
    mass: float
    estimate: float
    ratios: list
    consistent: bool
    expected: Optional[float] = None

    def to_dict(self):
        return {
            "mass": self.mass,
            "estimate": self.estimate,
            "ratios": list(self.ratios),
            "consistent": self.consistent,
            "expected": self.expected,
        }


def fiber_scaling_probe(metric, m, pairs, p=None):
    """Estimate ``f(m)`` as ``d(m mu1, m mu2) / W_p(mu1, mu2)`` over probe pairs.

    The metric is flagged fiber-consistent when all ratios agree within
    ``FIBER_AGREEMENT`` (relative to ``max(1, |ratio|)``).
    """
    if not m > 0:
        raise ValueError("probe mass must be positive")
    if p is None:
        p = metric.p if isinstance(metric, ExtendedMetricSpec) else 1.0
    expected = metric.fiber_scaling(m) if isinstance(metric, ExtendedMetricSpec) else None
    d = as_metric(metric)
    ratios = []
    for mu1, mu2 in pairs:
        mu1 = decompose(mu1).profile
        mu2 = decompose(mu2).profile
        w = wasserstein_distance(mu1, mu2, p)
        if w <= PROBE_MIN_W:
            raise DegenerateProbeError(f"probe pair has W_p = {w:.3e} <= {PROBE_MIN_W}")
        ratios.append(d(mu1.scaled(m), mu2.scaled(m)) / w)
    if not ratios:
        raise DegenerateProbeError("no probe pairs given")
    ratios = np.asarray(ratios)
    ref = ratios[0]
    consistent = bool(np.all(np.abs(ratios - ref) <= FIBER_AGREEMENT * max(1.0, abs(ref))))
    return FiberProbe(float(m), float(np.median(ratios)), ratios.tolist(), consistent, expected)


def random_probe_pairs(rng, n_pairs, dim=1, box=(0.0, 1.0), max_atoms=4):
    """Pairs of random probability measures with clearly separated profiles."""
    pairs = []
    while len(pairs) < n_pairs:
        mu1 = _random_profile(rng, dim, box, max_atoms)
        mu2 = _random_profile(rng, dim, box, max_atoms)
        if wasserstein_distance(mu1, mu2) > 10 * PROBE_MIN_W:
            pairs.append((mu1, mu2))
    return pairs


def _random_profile(rng, dim, box, max_atoms):
    k = int(rng.integers(1, max_atoms + 1))
    pts = rng.uniform(box[0], box[1], (k, dim))
    w = rng.uniform(0.1, 1.0, k)
    return DiscreteMeasure(pts, w / w.sum(), dim=dim)
