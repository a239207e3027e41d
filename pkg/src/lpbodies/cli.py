"""Command-line front end.

Commands::

    lpbodies op {pi-tau,m-tau,polar,steiner,santalo} --body FILE ...
    lpbodies verify {petty,centroid,santalo,corollary,durch,steiner-inclusion,
                     class-reduction,multipliers,limits,all} [--body FILE] ...
    lpbodies sweep {projection,moment} --body FILE ...
    lpbodies flow --body FILE --steps N --seed S ...

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
3 an inequality verdict other than "holds" or "equality".
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass

import numpy as np
from scipy.spatial import QhullError

from . import _kernels
from .body import (ConvexBody, SampledSupport, SantaloError, build_grid, from_descriptor,
                   polar_radial, santalo_point, volume)
from .functionals import durch_identity_check
from .inequalities import (InequalityReport, centroid_product, class_reduction_check,
                           corollary_check, make_report, multiplier_reports, petty_product,
                           santalo_check, strongest_m_sweep, strongest_pi_sweep, tau_grid)
from .operators import P_MAX, limit_checks, m_tau, pi_tau
from .sphere import NotAMultiplierError
from .symmetrization import inclusion_check, steiner_step, symmetrize_flow

log = logging.getLogger("lpbodies")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VIOLATION = 0, 1, 2, 3

NUMERIC_ERRORS = (FloatingPointError, SantaloError, np.linalg.LinAlgError, QhullError,
                  NotAMultiplierError, ZeroDivisionError)

#: tolerance of identity checks (both sides computed on one grid)
IDENTITY_TOL = 1e-4


class ConfigError(Exception):
    """Invalid command-line configuration or input file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    """Validated options of one invocation."""

    command: str
    action: str | None
    bodies: tuple
    p: float
    tau: float
    tau_nodes: int
    resolution: int
    seed: int
    out: str | None
    fmt: str
    direction: tuple | None
    steps: int
    rings: int
    kmax: int


# --------------------------------------------------------------------------
# serialization


def fmt_float(x) -> str:
    """17 significant digits, locale independent."""
    return format(float(x), ".17g")


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj) -> str:
    # repr of a Python float round-trips exactly
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_output(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def load_body(path: str):
    try:
        with open(path, encoding="utf-8") as f:
            d = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read body file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"body file {path!r} is not valid JSON: {exc}") from exc
    try:
        return from_descriptor(d)
    except (KeyError, TypeError, ValueError, QhullError) as exc:
        raise ConfigError(f"invalid body descriptor in {path!r}: {exc}") from exc


def body_document(K, grid, **extra) -> dict:
    """Descriptor of ``K`` plus metadata; readable again as a body file."""
    if isinstance(K, SampledSupport):
        d = {"kind": "sampled_support", "grid": {"dimension": grid.dim,
                                                 "resolution": grid.resolution},
             "values": K.support(grid.nodes), "label": K.label}
    else:
        d = K.descriptor()
    d = dict(d)
    d.update(extra)
    return d


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=float, default=2.0, help="L_p exponent, 1 < p <= 64")
    common.add_argument("--tau", type=float, default=0.0, help="tau in [-1, 1]")
    common.add_argument("--resolution", type=int, default=64,
                        help="sphere grid resolution (at least 8)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", dest="fmt", choices=("json", "csv"), default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="lpbodies", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    op = sub.add_parser("op", parents=[common], help="apply an operator to a body")
    op.add_argument("action", choices=("pi-tau", "m-tau", "polar", "steiner", "santalo"))
    op.add_argument("--body", required=True)
    op.add_argument("--dir", default=None, help="direction, e.g. 0,0,1 (steiner)")
    op.add_argument("--rings", type=int, default=48, help="disk-grid rings (steiner)")

    ver = sub.add_parser("verify", parents=[common], help="run inequality checks")
    ver.add_argument("action", choices=("petty", "centroid", "santalo", "corollary", "durch",
                                        "steiner-inclusion", "class-reduction",
                                        "multipliers", "limits", "all"))
    ver.add_argument("--body", default=None)
    ver.add_argument("--star", default=None,
                     help="second (star) body for durch; defaults to --body")
    ver.add_argument("--dir", default=None, help="direction for steiner-inclusion")
    ver.add_argument("--kmax", type=int, default=5, help="largest degree (multipliers)")
    ver.add_argument("--rings", type=int, default=48)

    sw = sub.add_parser("sweep", parents=[common], help="tau sweep of a volume functional")
    sw.add_argument("action", choices=("projection", "moment"))
    sw.add_argument("--body", required=True)
    sw.add_argument("--tau-nodes", type=int, default=21,
                    help="number of tau nodes on [-1, 1] (odd, includes 0)")

    fl = sub.add_parser("flow", parents=[common], help="Steiner symmetrization flow")
    fl.add_argument("--body", required=True)
    fl.add_argument("--steps", type=int, default=60)
    fl.add_argument("--rings", type=int, default=48)
    fl.add_argument("--stop-distance", type=float, default=None)
    return parser


def _parse_direction(s: str | None):
    if s is None:
        return None
    try:
        u = tuple(float(x) for x in s.split(","))
    except ValueError as exc:
        raise ConfigError(f"invalid direction {s!r}") from exc
    if not any(u) or not all(np.isfinite(u)):
        raise ConfigError("direction must be finite and nonzero")
    return u


def make_config(ns) -> RunConfig:
    if not 1.0 < ns.p <= P_MAX:
        raise ConfigError(f"p must lie in (1, {P_MAX}], got {ns.p}")
    if not -1.0 <= ns.tau <= 1.0:
        raise ConfigError(f"tau must lie in [-1, 1], got {ns.tau}")
    if ns.resolution < 8:
        raise ConfigError(f"resolution must be at least 8, got {ns.resolution}")
    nodes = getattr(ns, "tau_nodes", 21)
    if nodes < 3 or nodes % 2 == 0:
        raise ConfigError("--tau-nodes must be odd and at least 3")
    steps = getattr(ns, "steps", 1)
    if steps < 1:
        raise ConfigError("--steps must be at least 1")
    rings = getattr(ns, "rings", 48)
    if rings < 2:
        raise ConfigError("--rings must be at least 2")
    kmax = getattr(ns, "kmax", 5)
    if kmax < 0:
        raise ConfigError("--kmax must be nonnegative")
    bodies = tuple(x for x in (getattr(ns, "body", None), getattr(ns, "star", None)) if x)
    return RunConfig(ns.command, getattr(ns, "action", None), bodies, float(ns.p),
                     float(ns.tau), nodes, ns.resolution, ns.seed, ns.out, ns.fmt,
                     _parse_direction(getattr(ns, "dir", None)), steps, rings, kmax)


# --------------------------------------------------------------------------
# commands


def _grid_for(K, resolution):
    n = K.dim
    if n != 3:
        raise ConfigError("only three-dimensional bodies are supported by the CLI")
    return build_grid(n, resolution)


def cmd_op(cfg: RunConfig, ns) -> int:
    K = load_body(cfg.bodies[0])
    grid = _grid_for(K, cfg.resolution)
    if not isinstance(K, ConvexBody):
        raise ConfigError("operators need a convex body descriptor")
    params = {"p": cfg.p, "tau": cfg.tau, "resolution": cfg.resolution}
    if cfg.action == "pi-tau":
        P = pi_tau(K, cfg.p, cfg.tau, grid)
        doc = body_document(P, grid, command="pi-tau", params=params,
                            volume=volume(P, grid))
    elif cfg.action == "m-tau":
        M = m_tau(K, cfg.p, cfg.tau, grid)
        doc = body_document(M, grid, command="m-tau", params=params,
                            volume=volume(M, grid))
    elif cfg.action == "polar":
        R = polar_radial(K, grid)
        doc = dict(R.descriptor(), command="polar",
                   volume=volume(R, grid, method="quadrature"))
    elif cfg.action == "steiner":
        if cfg.direction is None:
            raise ConfigError("op steiner needs --dir")
        st = steiner_step(K, cfg.direction, ns.rings)
        doc = body_document(st.output, grid, command="steiner",
                            direction=st.direction, method=st.method,
                            volume=volume(st.output, grid), input_volume=volume(K, grid),
                            convexity_defect=st.convexity_defect)
    else:
        s = santalo_point(K, grid)
        doc = {"kind": "point", "command": "santalo", "point": s,
               "resolution": cfg.resolution}
    write_output(dump_json(doc), cfg.out)
    return EXIT_OK


def _identity_report(theorem, lhs, rhs, body, params, tol=IDENTITY_TOL) -> InequalityReport:
    disc = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    v = "equality" if disc <= tol else "violated"
    return InequalityReport(theorem, float(lhs), float(rhs), "=", float(-disc), disc <= tol,
                            body, dict(params, tolerance=tol, discrepancy=disc), v)


def _verify_one(action, K, L, cfg: RunConfig, grid, rings: int) -> list:
    p, tau = cfg.p, cfg.tau
    prm = {"p": p, "tau": tau, "resolution": grid.resolution}
    if action == "petty":
        return [petty_product(K, p, tau, grid)]
    if action == "centroid":
        return [centroid_product(K, p, tau, grid)]
    if action == "santalo":
        return [santalo_check(K, grid)]
    if action == "corollary":
        return [corollary_check(K, p, tau, grid)]
    if action == "durch":
        r = durch_identity_check(K, L if L is not None else K, p, tau, grid)
        return [_identity_report("durch-identity", r.lhs, r.rhs, K.descriptor_summary(), prm)]
    if action == "steiner-inclusion":
        u = cfg.direction or (1.0, 0.0, 0.0)
        r = inclusion_check(K, p, tau, u, grid, resolution=rings)
        left = r.scale + r.max_violation
        return [make_report("steiner-inclusion", left, r.scale + r.tolerance, "<=",
                            K.descriptor_summary(),
                            dict(prm, direction=list(r.direction),
                                 max_violation=r.max_violation, min_margin=r.min_margin,
                                 steiner_method=r.steiner_method), band=0.0)]
    if action == "class-reduction":
        return class_reduction_check(K, p, tau, grid).reports
    if action == "limits":
        lr = limit_checks(K, grid)
        extra = dict(prm, diameter=lr.diameter)
        return [make_report("limit-projection", lr.projection_deviation, 0.10, "<=",
                            K.descriptor_summary(), dict(extra, p=lr.p_low), band=0.0),
                make_report("limit-moment", lr.moment_deviation, 0.05, "<=",
                            K.descriptor_summary(), dict(extra, p=lr.p_high), band=0.0)]
    if action == "multipliers":
        return multiplier_reports(p, cfg.kmax, grid, tau=1.0)
    raise ConfigError(f"unknown verify action {action!r}")


VERIFY_ALL = ("petty", "centroid", "santalo", "corollary", "durch", "steiner-inclusion",
              "class-reduction", "limits", "multipliers")


def cmd_verify(cfg: RunConfig, ns) -> int:
    K = L = None
    if cfg.action != "multipliers":
        if not cfg.bodies:
            raise ConfigError(f"verify {cfg.action} needs --body")
        K = load_body(cfg.bodies[0])
        if not isinstance(K, ConvexBody):
            raise ConfigError("verify needs a convex body descriptor")
        if len(cfg.bodies) > 1:
            L = load_body(cfg.bodies[1])
    grid = build_grid(3, cfg.resolution) if K is None else _grid_for(K, cfg.resolution)
    actions = VERIFY_ALL if cfg.action == "all" else (cfg.action,)
    reports = []
    for a in actions:
        reports.extend(_verify_one(a, K, L, cfg, grid, ns.rings))
    fmt = cfg.fmt or "json"
    if fmt == "json":
        text = dump_json([r.to_dict() for r in reports])
    else:
        text = dump_csv(["theorem", "left", "right", "relation", "slack", "equality",
                         "verdict"],
                        [(r.theorem, r.left, r.right, r.relation, r.slack, r.equality,
                          r.verdict) for r in reports])
    write_output(text, cfg.out)
    for r in reports:
        log.info("%-28s %-26s slack=%s", r.theorem, r.verdict, fmt_float(r.slack))
    return EXIT_OK if all(r.ok for r in reports) else EXIT_VIOLATION


def cmd_sweep(cfg: RunConfig, ns) -> int:
    K = load_body(cfg.bodies[0])
    grid = _grid_for(K, cfg.resolution)
    taus = tau_grid(cfg.tau_nodes)
    if cfg.action == "projection":
        if not isinstance(K, ConvexBody):
            raise ConfigError("the projection sweep needs a convex body")
        sw = strongest_pi_sweep(K, cfg.p, taus, grid)
        col = "polar_projection_volume"
    else:
        sw = strongest_m_sweep(K, cfg.p, taus, grid)
        col = "moment_volume"
    fmt = cfg.fmt or "csv"
    if fmt == "csv":
        text = dump_csv(["tau", col], zip(sw.taus.tolist(), sw.values.tolist()))
    else:
        text = dump_json({"kind": sw.kind, "p": cfg.p, "resolution": cfg.resolution,
                          "taus": sw.taus, "values": sw.values, "argmin": sw.argmin,
                          "argmax": sw.argmax, "strict": sw.strict,
                          "violations": sw.violations})
    write_output(text, cfg.out)
    sys.stderr.write(f"argmin={fmt_float(sw.argmin)} argmax={fmt_float(sw.argmax)} "
                     f"violations={len(sw.violations)}\n")
    for v in sw.violations:
        sys.stderr.write(f"violation: {v}\n")
    return EXIT_OK if sw.ok else EXIT_VIOLATION


def cmd_flow(cfg: RunConfig, ns) -> int:
    K = load_body(cfg.bodies[0])
    if not isinstance(K, ConvexBody):
        raise ConfigError("the flow needs a convex body")
    grid = _grid_for(K, cfg.resolution)
    tr = symmetrize_flow(K, cfg.steps, cfg.seed, cfg.p, cfg.tau, grid, cfg.rings,
                         stop_distance=ns.stop_distance)
    header = ["step", "u1", "u2", "u3", "volume", "petty", "ball_distance", "volume_drift",
              "method"]
    rows = [(r.step, *r.direction, r.volume, r.petty, r.ball_distance, r.volume_drift,
             r.method) for r in tr.rows]
    if (cfg.fmt or "csv") == "csv":
        text = dump_csv(header, rows)
    else:
        text = dump_json([dict(zip(header, r)) for r in rows])
    write_output(text, cfg.out)
    return EXIT_OK


COMMANDS = {"op": cmd_op, "verify": cmd_verify, "sweep": cmd_sweep, "flow": cmd_flow}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        try:
            _kernels.configure_threads()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cfg = make_config(ns)
        return COMMANDS[cfg.command](cfg, ns)
    except ConfigError as exc:
        sys.stderr.write(f"lpbodies: configuration error: {exc}\n")
        return EXIT_CONFIG
    except NUMERIC_ERRORS + (ValueError,) as exc:
        sys.stderr.write(f"lpbodies: numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
