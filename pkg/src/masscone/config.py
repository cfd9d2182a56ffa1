"""TOML / JSON configuration for metrics, samplers, obstruction searches and cone grids."""

from __future__ import annotations

import json
import math
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .axioms import MeasureSampler
from .errors import ConfigError, MassconeError
from .families import (
    Box,
    ExtendedMetricSpec,
    mass_distance_from_config,
    scaling_from_config,
)
from .measure import measure_from_dict
from .obstruction import ExtensionCandidate, ObstructionConfig, SigmaSampler
from .warped import ConeGrid, WarpingFunction

DEFAULT_SEED = 20240521


def load_config(path):
    """Read a ``.toml`` or ``.json`` file into a dict."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path)) from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"parse error: {exc}", path=str(path)) from exc
    if not isinstance(data, dict):
        raise ConfigError("top level must be a table", path=str(path))
    return data


def _float(value, source, name):
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a number, got {value!r}", path=source, field=name) from exc


def _section(data, key):
    return data[key] if isinstance(data.get(key), dict) else data


def grid_from_config(obj, source=None):
    if obj is None:
        return None
    try:
        return ConeGrid.from_dict(obj)
    except (KeyError, TypeError, ValueError, MassconeError) as exc:
        raise ConfigError(f"bad grid: {exc}", path=source, field="grid") from exc


def warping_from_config(obj, source=None):
    if obj is None:
        return None
    if isinstance(obj, (int, float)):
        return WarpingFunction.constant(float(obj))
    if isinstance(obj, str):
        obj = {"kind": obj}
    try:
        return WarpingFunction(obj["kind"], p=float(obj.get("p", 1.0)), value=float(obj.get("value", 1.0)))
    except (KeyError, TypeError, ValueError, MassconeError) as exc:
        raise ConfigError(f"bad warping function: {exc}", path=source, field="warping") from exc


def metric_from_config(data, source=None):
    """Build an :class:`ExtendedMetricSpec` from a mapping (optionally under ``[metric]``)."""
    data = _section(data, "metric")
    if "family" not in data:
        raise ConfigError("missing metric family", path=source, field="family")
    kw = {"family": data["family"], "name": data.get("name", "")}
    for key in ("lam", "q", "p", "diam_bound"):
        if key in data:
            kw[key] = _float(data[key], source, key)
    if "f" in data:
        kw["f"] = scaling_from_config(data["f"], source)
    if "mass_distance" in data:
        kw["mass_distance"] = mass_distance_from_config(data["mass_distance"], source)
    if "domain" in data:
        dom = data["domain"]
        try:
            kw["domain"] = Box(float(dom.get("lo", 0.0)), float(dom.get("hi", 1.0)), int(dom.get("dim", 1)))
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad domain: {exc}", path=source, field="domain") from exc
    if "warping" in data:
        kw["warping"] = warping_from_config(data["warping"], source)
    if "grid" in data:
        kw["grid"] = grid_from_config(data["grid"], source)
    spec = ExtendedMetricSpec(**kw)
    try:
        spec.validate()
    except ConfigError as exc:
        raise ConfigError(exc.bare_message, path=source, field=exc.field) from exc
    return spec


def sampler_from_config(data, source=None):
    obj = data.get("sampler") if isinstance(data, dict) else None
    if obj is None:
        return MeasureSampler()
    fields = MeasureSampler.__dataclass_fields__
    unknown = set(obj) - set(fields)
    if unknown:
        raise ConfigError(f"unknown sampler keys {sorted(unknown)}", path=source, field="sampler")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in obj.items()}
    sampler = MeasureSampler(**kw)
    try:
        return sampler.validate()
    except MassconeError as exc:
        raise ConfigError(str(exc), path=source, field="sampler") from exc


def sigma_from_config(obj, source=None):
    obj = dict(obj or {})
    try:
        for key in ("base", "direction", "points"):
            if key in obj:
                obj[key] = tuple(tuple(p) if isinstance(p, list) else p for p in obj[key])
        return SigmaSampler(**obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sigma sampler: {exc}", path=source, field="sigma") from exc


def _zero_rule(obj, source):
    if obj in (None, "mass"):
        return lambda mu: mu.mass
    if isinstance(obj, (int, float)):
        value = float(obj)
        return lambda mu: value
    if isinstance(obj, dict) and "constant" in obj:
        value = float(obj["constant"])
        return lambda mu: value
    raise ConfigError(f"unknown zero rule {obj!r}", path=source, field="zero_rule")


def obstruction_from_config(data, source=None):
    """Parse an obstruction run: ``test`` is ``scaling``, ``zero_extension`` or ``collapse``.

    Returns ``(test, payload)``. ``scaling`` gives ``(ObstructionConfig, f)``;
    ``zero_extension`` gives ``(ExtensionCandidate, SigmaSampler)``;
    ``collapse`` gives ``(ExtensionCandidate, mu1, mu2, masses, p)``.
    """
    data = _section(data, "obstruction")
    test = data.get("test", "scaling")
    sigma = sigma_from_config(data.get("sigma"), source)
    try:
        if test == "scaling":
            f = scaling_from_config(data.get("f", "identity"), source)
            candidate = metric_from_config(data["candidate"], source) if "candidate" in data else None
            cfg = ObstructionConfig(
                sigma=sigma,
                m0=_float(data.get("m0", 1.0), source, "m0"),
                r=_float(data.get("r", 0.5), source, "r"),
                C=_float(data.get("C", 1.0), source, "C"),
                candidate=candidate,
                mass_samples=int(data.get("mass_samples", 5)),
            )
            return test, (cfg, f)
        if test == "zero_extension":
            cand = ExtensionCandidate(
                _float(data.get("lam0", 1.0), source, "lam0"),
                _float(data["Lambda"], source, "Lambda"),
                _float(data.get("m0", 1.0), source, "m0"),
            )
            return test, (cand, sigma)
        if test == "collapse":
            cand = ExtensionCandidate(
                _float(data.get("lam", 1.0), source, "lam"),
                0.0,
                zero_rule=_zero_rule(data.get("zero_rule"), source),
            )
            mu1 = measure_from_dict(data["mu1"], source)
            mu2 = measure_from_dict(data["mu2"], source)
            masses = [_float(m, source, "masses") for m in data["masses"]]
            return test, (cand, mu1, mu2, masses, _float(data.get("p", 1.0), source, "p"))
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}", path=source, field=str(exc.args[0])) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), path=source, field=test) from exc
    raise ConfigError(f"unknown obstruction test {test!r}", path=source, field="test")


def warped_from_config(data, source=None):
    """Parse a cone run: ``src = [m, x...]``, ``dst``, ``warping``, optional ``grid``, ``levels``, ``p``."""
    data = _section(data, "warped")
    try:
        src = [float(v) for v in data["src"]]
        dst = [float(v) for v in data["dst"]]
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}", path=source, field=str(exc.args[0])) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError("src and dst must be lists of numbers", path=source, field="src") from exc
    g = warping_from_config(data.get("warping", 1.0), source)
    return {
        "src": (src[0], src[1:]),
        "dst": (dst[0], dst[1:]),
        "g": g,
        "grid": grid_from_config(data.get("grid"), source),
        "levels": int(data.get("levels", 1)),
        "p": _float(data.get("p", 1.0), source, "p"),
    }
