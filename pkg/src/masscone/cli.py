"""Command-line front end: ``masscone {dist,axioms,obstruct,warped,probe}``.

Exit status is 0 for a clean run, 1 when a witness (axiom violation,
obstruction, failed probe) was found and 2 for input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, kernels
from .axioms import run_axiom_suite
from .config import (
    DEFAULT_SEED,
    load_config,
    metric_from_config,
    obstruction_from_config,
    sampler_from_config,
    warped_from_config,
)
from .errors import MassconeError
from .families import as_metric, fiber_scaling_probe, random_probe_pairs
from .measure import Isometry, load_measure
from .obstruction import (
    find_scaling_violation,
    isometry_invariance_probe,
    mass_continuity_collapse_test,
    zero_extension_diameter_test,
)
from .warped import default_grid, refinement_series

EXIT_OK = 0
EXIT_WITNESS = 1
EXIT_INPUT = 2
MAX_REPORTED_WITNESSES = 20


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Report:
    """JSON document plus the rows of its CSV rendering."""

    def __init__(self, command, body, columns=(), rows=(), status=EXIT_OK):
        self.command = command
        self.body = body
        self.columns = list(columns)
        self.rows = [list(r) for r in rows]
        self.status = status

    def document(self, timestamp=True):
        doc = {"command": self.command, "version": __version__, "backend": kernels.backend(), **self.body}
        doc["exit_status"] = self.status
        if timestamp:
            doc["timestamp"] = datetime.now(timezone.utc).isoformat()
        return _jsonable(doc)

    def render(self, fmt="json", timestamp=True):
        if fmt == "json":
            return json.dumps(self.document(timestamp), indent=2, sort_keys=True) + "\n"
        buf = io.StringIO()
        buf.write(f"# masscone {self.command}\n")
        for key in ("metric", "seed", "trials", "tolerance"):
            if key in self.body:
                buf.write(f"# {key}: {json.dumps(_jsonable(self.body[key]), sort_keys=True)}\n")
        if timestamp:
            buf.write(f"# timestamp: {datetime.now(timezone.utc).isoformat()}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(_jsonable(self.rows))
        return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def _metric(args):
    path = args.metric or args.config
    if path is None:
        raise MassconeError("--metric is required")
    data = load_config(path)
    return metric_from_config(data, path), data


def cmd_dist(args):
    spec, _ = _metric(args)
    if args.a is None or args.b is None:
        raise MassconeError("dist needs --a and --b")
    a = load_measure(args.a)
    b = load_measure(args.b)
    value = as_metric(spec)(a, b)
    body = {"metric": spec.to_dict(), "seed": args.seed, "a": a.to_dict(), "b": b.to_dict(), "value": value}
    return Report("dist", body, ["value"], [[value]])


def cmd_axioms(args):
    spec, data = _metric(args)
    sampler = sampler_from_config(load_config(args.config) if args.config and args.metric else data, args.config or args.metric)
    suite = run_axiom_suite(spec, sampler, trials=args.trials, tolerance=args.tolerance, seed=args.seed)
    body = suite.to_dict(max_witnesses=MAX_REPORTED_WITNESSES)
    body["metric"] = spec.to_dict()
    body["sampler"] = sampler.to_dict()
    rows = [[r.axiom, r.trials, r.failures] for r in suite.reports.values()]
    status = EXIT_WITNESS if suite.failures else EXIT_OK
    return Report("axioms", body, ["axiom", "trials", "failures"], rows, status)


def cmd_obstruct(args):
    if args.config is None:
        raise MassconeError("obstruct needs --config")
    test, payload = obstruction_from_config(load_config(args.config), args.config)
    if test == "scaling":
        cfg, f = payload
        report = find_scaling_violation(cfg, f)
        setup = {
            "f": f.to_dict(),
            "m0": cfg.m0,
            "r": cfg.r,
            "C": cfg.C,
            "sigma": cfg.sigma.to_dict(),
            "candidate": cfg.candidate.to_dict() if cfg.candidate is not None else None,
        }
    elif test == "zero_extension":
        cand, sigma = payload
        report = zero_extension_diameter_test(cand, sigma)
        setup = {"lam0": cand.lam0, "Lambda": cand.Lambda, "m0": cand.m0, "sigma": sigma.to_dict()}
    else:
        cand, mu1, mu2, masses, p = payload
        report = mass_continuity_collapse_test(cand, mu1, mu2, masses, p)
        setup = {"lam": cand.lam0, "mu1": mu1.to_dict(), "mu2": mu2.to_dict(), "masses": masses, "p": p}
    body = {"test": test, "setup": setup, "seed": args.seed, **report.to_dict()}
    w = report.witness
    rows = [[w.detail.get("separation", w.detail.get("mass")), w.lhs, w.rhs, w.margin]] if w else []
    status = EXIT_WITNESS if report.found else EXIT_OK
    return Report("obstruct", body, ["position", "lhs", "rhs", "margin"], rows, status)


def cmd_warped(args):
    if args.config is None:
        raise MassconeError("warped needs --config")
    run = warped_from_config(load_config(args.config), args.config)
    grid = run["grid"] or default_grid(run["src"], run["dst"], run["g"])
    values = refinement_series(run["src"], run["dst"], run["g"], grid, run["levels"], run["p"])
    (m1, x1), (m2, x2) = run["src"], run["dst"]
    body = {
        "seed": args.seed,
        "src": [m1, *x1],
        "dst": [m2, *x2],
        "warping": run["g"].to_dict(),
        "grid": grid.to_dict(),
        "distances": values,
        "value": values[-1],
    }
    if run["g"].kind == "constant":
        c = run["g"].value
        dx = float(np.linalg.norm(np.subtract(x1, x2)))
        exact = math.hypot(c * (m1 - m2), dx)
        body["closed_form"] = exact
        body["relative_error"] = (values[-1] - exact) / exact if exact else 0.0
    rows = [[k, v] for k, v in enumerate(values)]
    return Report("warped", body, ["level", "distance"], rows)


def cmd_probe(args):
    spec, data = _metric(args)
    d = as_metric(spec)
    probe_cfg = data.get("probe", {}) if isinstance(data.get("probe"), dict) else {}
    masses = [float(m) for m in (args.masses or probe_cfg.get("masses", [0.5, 1.0, 2.0]))]
    dim = int(probe_cfg.get("dim", spec.domain.dim if spec.domain else 1))
    rng = np.random.default_rng(args.seed)
    box = (spec.domain.lo, spec.domain.hi) if spec.domain else (0.0, 1.0)
    pairs = random_probe_pairs(rng, int(probe_cfg.get("pairs", 5)), dim=dim, box=box)
    probes = [fiber_scaling_probe(d, m, pairs) for m in masses]
    body = {"metric": spec.to_dict(), "seed": args.seed, "fiber": [p.to_dict() for p in probes]}
    ok = all(p.consistent for p in probes)
    n_iso = int(probe_cfg.get("isometries", args.isometries))
    if n_iso and spec.domain is None:
        isos = [Isometry.random(rng, dim, 5.0, "any") for _ in range(n_iso)]
        test_pairs = [(a.scaled(m), b.scaled(m)) for (a, b), m in zip(pairs, masses * len(pairs))]
        inv = isometry_invariance_probe(d, isos, test_pairs, m0=masses[0])
        body["invariance"] = inv.to_dict()
        ok = ok and inv.invariant
    rows = [[p.mass, p.estimate, p.consistent] for p in probes]
    return Report("probe", body, ["mass", "estimate", "consistent"], rows, EXIT_OK if ok else EXIT_WITNESS)


COMMANDS = {"dist": cmd_dist, "axioms": cmd_axioms, "obstruct": cmd_obstruct, "warped": cmd_warped, "probe": cmd_probe}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--metric", help="metric spec (TOML or JSON)")
    common.add_argument("--config", help="run configuration (TOML or JSON)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--tolerance", type=float, default=1e-9)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-identical reruns")

    parser = argparse.ArgumentParser(prog="masscone", description="Extended Wasserstein distances and their obstructions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("dist", parents=[common], help="distance between two measures")
    p.add_argument("--a", help="first measure (JSON or CSV)")
    p.add_argument("--b", help="second measure (JSON or CSV)")
    p = sub.add_parser("axioms", parents=[common], help="randomised metric-axiom suite")
    p.add_argument("--trials", type=int, default=10_000)
    sub.add_parser("obstruct", parents=[common], help="obstruction searches")
    sub.add_parser("warped", parents=[common], help="warped Dirac-cone distance")
    p = sub.add_parser("probe", parents=[common], help="fiber scaling and isometry probes")
    p.add_argument("--masses", type=float, nargs="+")
    p.add_argument("--isometries", type=int, default=10)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = COMMANDS[args.command](args)
        text = report.render(args.format, timestamp=not args.no_timestamp)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except (MassconeError, ValueError, OSError) as exc:
        print(f"masscone {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return report.status


if __name__ == "__main__":
    sys.exit(main())
