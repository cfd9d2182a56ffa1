"""Finite non-negative measures on R^n.

A :class:`DiscreteMeasure` is an immutable pair of arrays (points, weights).
Construction canonicalises: zero weights are dropped and duplicate support
points are merged, so two measures compare equal when they describe the same
measure regardless of how the atoms were listed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, NotAnIsometryError, ZeroMassError

EQ_TOL = 1e-9
ISOMETRY_TOL = 1e-10


def _freeze(arr):
    arr.setflags(write=False)
    return arr


class DiscreteMeasure:
    """Non-negative measure with finitely many atoms.

    Parameters
    ----------
    points : array-like of shape (k, n)
        Support points. A 1-D array is read as ``k`` points in R^1.
    weights : array-like of shape (k,)
        Non-negative masses of the atoms.
    dim : int, optional
        Ambient dimension. Required for the zero measure if it cannot be
        inferred from ``points``.
    """

    __slots__ = ("points", "weights", "dim")

    def __init__(self, points, weights, dim=None):
        weights = np.asarray(weights, dtype=float).reshape(-1)
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, dim or 1)
        if points.size == 0:
            if dim is None:
                dim = points.shape[1] if points.ndim == 2 and points.shape[1] > 0 else 1
            points = np.empty((0, dim))
        if dim is None:
            dim = points.shape[1]
        if points.ndim != 2 or points.shape[1] != dim:
            raise ValueError(f"points must have shape (k, {dim}), got {points.shape}")
        if points.shape[0] != weights.shape[0]:
            raise ValueError("points and weights must have the same length")
        if not np.all(np.isfinite(points)):
            raise ValueError("support points must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and non-negative")

        points, weights = _canonicalize(points, weights)
        object.__setattr__(self, "points", _freeze(points))
        object.__setattr__(self, "weights", _freeze(weights))
        object.__setattr__(self, "dim", int(dim))

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteMeasure is immutable")

    # constructors -----------------------------------------------------------

    @classmethod
    def zero(cls, dim=1):
        return cls(np.empty((0, dim)), np.empty(0), dim=dim)

    @classmethod
    def dirac(cls, x, mass=1.0):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x.reshape(1, -1), [mass], dim=x.size)

    @classmethod
    def uniform(cls, points, mass=1.0):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        k = points.shape[0]
        return cls(points, np.full(k, mass / k), dim=points.shape[1])

    # basic queries ----------------------------------------------------------

    @property
    def size(self):
        return self.weights.shape[0]

    @property
    def is_zero(self):
        return self.size == 0

    @property
    def mass(self):
        return total_mass(self)

    def scaled(self, factor):
        """Return ``factor * self`` (factor >= 0)."""
        if factor < 0:
            raise ValueError("scale factor must be non-negative")
        return DiscreteMeasure(self.points, self.weights * factor, dim=self.dim)

    def to_dict(self):
        return {"dim": self.dim, "points": self.points.tolist(), "weights": self.weights.tolist()}

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return measures_equal(self, other)

    __hash__ = None

    def __repr__(self):
        if self.is_zero:
            return f"DiscreteMeasure.zero(dim={self.dim})"
        atoms = ", ".join(
            f"{w:g}*δ{tuple(float(c) for c in x) if self.dim > 1 else float(x[0])}"
            for x, w in zip(self.points, self.weights)
        )
        return f"DiscreteMeasure({atoms})"


def _canonicalize(points, weights):
    keep = weights > 0
    points = points[keep]
    weights = weights[keep]
    if points.shape[0] == 0:
        return points.copy(), weights.copy()
    # lexicographic order, then merge exact duplicates
    order = np.lexsort(points.T[::-1])
    points = points[order]
    weights = weights[order]
    if points.shape[0] > 1:
        new = np.any(np.diff(points, axis=0) != 0, axis=1)
        group = np.concatenate([[0], np.cumsum(new)])
        merged_w = np.bincount(group, weights=weights)
        first = np.concatenate([[True], new])
        points = points[first]
        weights = merged_w
    return np.ascontiguousarray(points), np.ascontiguousarray(weights)


def measures_equal(mu, nu, tol=EQ_TOL):
    """Canonical equality: same support within ``tol`` per coordinate, same weights within ``tol``."""
    if mu.dim != nu.dim or mu.size != nu.size:
        return False
    if mu.size == 0:
        return True
    return bool(
        np.all(np.abs(mu.points - nu.points) <= tol) and np.all(np.abs(mu.weights - nu.weights) <= tol)
    )


def total_mass(mu):
    if mu.size == 0:
        return 0.0
    return float(np.sum(mu.weights))


@dataclass(frozen=True)
class MassDecomposition:
    mass: float
    profile: DiscreteMeasure

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if abs(total_mass(self.profile) - 1.0) > 1e-12:
            raise ValueError("profile must be a probability measure")


def decompose(mu):
    """Split ``mu`` into its mass and its normalised profile."""
    m = total_mass(mu)
    if m == 0:
        raise ZeroMassError("cannot decompose the zero measure")
    return MassDecomposition(m, DiscreteMeasure(mu.points, mu.weights / m, dim=mu.dim))


def recompose(mass, profile):
    if mass <= 0:
        raise ZeroMassError("recomposition needs a positive mass")
    return profile.scaled(mass)


def normalize(mu):
    return decompose(mu).profile


# ---------------------------------------------------------------------------
# isometries


class Isometry:
    """Affine isometry ``x -> Q x + b`` of R^n."""

    __slots__ = ("Q", "b")

    def __init__(self, Q, b=None, tol=ISOMETRY_TOL):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise NotAnIsometryError(f"linear part must be square, got {Q.shape}")
        dev = np.max(np.abs(Q.T @ Q - np.eye(n)))
        if dev > tol:
            raise NotAnIsometryError(f"Q^T Q deviates from identity by {dev:.3e}")
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float).reshape(n)
        self.Q = _freeze(Q.copy())
        self.b = _freeze(b.copy())

    @classmethod
    def translation(cls, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(np.eye(x.size), x)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim))

    @classmethod
    def random(cls, rng, dim, shift_scale=1.0, kind="any"):
        """Random isometry: ``kind`` is "translation", "rotation" or "any"."""
        if kind == "translation":
            Q = np.eye(dim)
        else:
            # QR of a Gaussian matrix with sign fix is Haar distributed on O(n)
            A = rng.standard_normal((dim, dim))
            Q, R = np.linalg.qr(A)
            Q = Q * np.sign(np.diag(R))
        b = np.zeros(dim) if kind == "rotation" else rng.uniform(-shift_scale, shift_scale, dim)
        return cls(Q, b)

    @property
    def dim(self):
        return self.Q.shape[0]

    def apply(self, points):
        points = np.asarray(points, dtype=float)
        return points @ self.Q.T + self.b

    def to_dict(self):
        return {"Q": self.Q.tolist(), "b": self.b.tolist()}


def pushforward_isometry(mu, T):
    """Push ``mu`` forward along the isometry ``T``; weights are untouched."""
    if not isinstance(T, Isometry):
        Q, b = T
        T = Isometry(Q, b)
    if T.dim != mu.dim:
        raise ValueError(f"isometry acts on R^{T.dim}, measure lives in R^{mu.dim}")
    if mu.is_zero:
        return mu
    return DiscreteMeasure(T.apply(mu.points), mu.weights, dim=mu.dim)


# ---------------------------------------------------------------------------
# I/O


def measure_from_dict(data, source=None):
    try:
        dim = int(data["dim"])
        points = data.get("points", [])
        weights = data.get("weights", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad measure record ({exc})", path=source, field="dim") from exc
    try:
        return DiscreteMeasure(np.asarray(points, dtype=float).reshape(-1, dim), weights, dim=dim)
    except ValueError as exc:
        raise ConfigError(str(exc), path=source, field="points") from exc


def measure_from_csv(text, source=None):
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    try:
        table = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError:
        # tolerate a header row
        table = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    if table.size == 0:
        raise ConfigError("empty CSV measure; use JSON for the zero measure", path=source)
    if table.ndim != 2 or table.shape[1] < 2:
        raise ConfigError("CSV rows need n coordinates followed by one weight", path=source)
    try:
        return DiscreteMeasure(table[:, :-1], table[:, -1], dim=table.shape[1] - 1)
    except ValueError as exc:
        raise ConfigError(str(exc), path=source, field="weights") from exc


def load_measure(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read measure file ({exc.strerror})", path=path) from exc
    if path.suffix.lower() == ".csv":
        return measure_from_csv(text, source=path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg}, line {exc.lineno})", path=path) from exc
    return measure_from_dict(data, source=path)


def save_measure(mu, path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            for x, w in zip(mu.points, mu.weights):
                writer.writerow([repr(float(c)) for c in x] + [repr(float(w))])
    else:
        path.write_text(json.dumps(mu.to_dict()))
