"""Command-line experiment runner.

Every command writes one artifact (CSV for tables, JSON for structured
objects) to ``--out`` or stdout.  Outputs start with a timestamp line and
echo the fully resolved configuration; apart from the timestamp they are
byte-identical across runs.

Exit codes: 0 success, 1 tolerance failure (report still written),
2 invalid configuration, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import angles, circlemaps, cohomology, denjoy, ergodic
from .angles import IrrationalAngle

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigInvalid(ValueError):
    pass


class ExperimentFailedTolerance(RuntimeError):
    pass


class IoError(OSError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    map: Optional[dict] = None
    angle: Optional[str] = None
    k_range: Optional[list] = None
    grid: Optional[int] = None
    out: Optional[str] = None
    precision_bits: int = angles.DEFAULT_PRECISION_BITS
    tol_scale: float = 1.0
    options: dict = field(default_factory=dict)


# -- map specs ------------------------------------------------------------------

MAP_KEYS = {
    "rotation": {"family", "angle"},
    "arnold": {"family", "eps", "a", "angle", "depth"},
    "conjugated": {"family", "angle", "modes", "grid"},
    "denjoy": {"family", "angle", "M", "law", "gaps"},
}


def load_map_spec(text: str) -> dict:
    """A map spec given inline as JSON or as a path to a JSON file."""
    if os.path.exists(text):
        try:
            with open(text) as fh:
                raw = fh.read()
        except OSError as exc:
            raise IoError(str(exc)) from exc
    elif text.lstrip().startswith("{"):
        raw = text
    else:
        raise IoError(f"map file not found: {text}")
    try:
        spec = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"malformed map JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigInvalid("map spec must be a JSON object")
    # artifacts written by this tool carry a header; it is not part of the map
    spec = {k: v for k, v in spec.items() if k not in ("generated", "config")}
    if "family" not in spec and "gaps" in spec:
        spec = {"family": "denjoy", **spec}
    fam = spec.get("family")
    if fam not in MAP_KEYS:
        raise ConfigInvalid(f"unknown map family {fam!r}")
    unknown = set(spec) - MAP_KEYS[fam]
    if unknown:
        raise ConfigInvalid(f"unknown fields for {fam}: {sorted(unknown)}")
    return spec


def _angle(name, bits: int) -> IrrationalAngle:
    try:
        return IrrationalAngle.from_name(str(name), precision_bits=bits)
    except (ValueError, angles.RationalDetected) as exc:
        raise ConfigInvalid(f"bad angle {name!r}: {exc}") from exc


def build_map(spec: dict, bits: int, tune_depth: int = 18):
    """Returns ``(CircleMap, DenjoyMap or None)``."""
    fam = spec["family"]
    try:
        if fam == "rotation":
            return circlemaps.rotation(_angle(spec["angle"], bits)), None
        if fam == "arnold":
            eps = float(spec["eps"])
            if "a" in spec:
                ang = _angle(spec["angle"], bits) if "angle" in spec else None
                return circlemaps.arnold(float(spec["a"]), eps, angle=ang), None
            ang = _angle(spec["angle"], bits)
            return circlemaps.tune_parameter(eps, ang, int(spec.get("depth", tune_depth))), None
        if fam == "conjugated":
            ang = _angle(spec["angle"], bits)
            return circlemaps.conjugated_rotation(ang, [tuple(m) for m in spec["modes"]],
                                                  int(spec.get("grid", 4096))), None
        if "gaps" in spec:
            dmap = denjoy.DenjoyMap.from_json(spec)
        else:
            dmap = denjoy.build_denjoy(_angle(spec["angle"], bits), int(spec.get("M", 64)))
        return circlemaps.from_denjoy(dmap), dmap
    except KeyError as exc:
        raise ConfigInvalid(f"map spec for {fam} is missing {exc}") from exc
    except circlemaps.TuneFailed:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid(str(exc)) from exc


def parse_k_range(text: str) -> list:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigInvalid(f"bad k range {text!r}") from exc


def parse_u(text: str, f=None) -> ergodic.TestFunction:
    """``cos``, ``sin2``, ``logdf`` or sums like ``cos1:1.0,cos2:0.1``."""
    total = None
    for term in text.split(","):
        name, _, amp = term.strip().partition(":")
        amp = float(amp) if amp else 1.0
        if name == "logdf":
            if f is None:
                raise ConfigInvalid("logdf needs a map")
            tf = ergodic.log_deriv(f).scale(amp) if amp != 1.0 else ergodic.log_deriv(f)
        else:
            kind = name.rstrip("0123456789")
            digits = name[len(kind):]
            if kind not in ("cos", "sin"):
                raise ConfigInvalid(f"unknown test function {name!r}")
            tf = ergodic.fourier_mode(int(digits or 1), kind, amp)
        total = tf if total is None else total + tf
    return total


# -- output -------------------------------------------------------------------------

def _stamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _config_echo(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d.pop("out")
    if d["map"] and "gaps" in d["map"]:
        gaps = d["map"].pop("gaps")
        blob = json.dumps(gaps, sort_keys=True).encode()
        d["map"]["gaps_sha256"] = hashlib.sha256(blob).hexdigest()
    return d


def render_csv(cfg: ExperimentConfig, header: list, rows: list) -> str:
    buf = io.StringIO()
    buf.write(f"# generated: {_stamp()}\n")
    buf.write(f"# config: {json.dumps(_config_echo(cfg), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def render_json(cfg: ExperimentConfig, payload: dict) -> str:
    doc = {"generated": _stamp(), "config": _config_echo(cfg), **payload}
    lines = json.dumps(doc, indent=2).splitlines()
    return "\n".join(lines) + "\n"


def emit(cfg: ExperimentConfig, text: str):
    if cfg.out:
        try:
            with open(cfg.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoError(str(exc)) from exc
    else:
        sys.stdout.write(text)


# -- commands ---------------------------------------------------------------------------

def cmd_cf(cfg):
    rho = _angle(cfg.angle, cfg.precision_bits)
    depth = cfg.options["depth"]
    try:
        rows = angles.cf_table(rho, depth)
    except angles.DepthExceeded as exc:
        raise ConfigInvalid(str(exc)) from exc
    return render_json(cfg, {"convergents": rows}), True


def cmd_rotnum(cfg):
    f, _ = build_map(cfg.map, cfg.precision_bits)
    cert = circlemaps.rotation_interval(f, cfg.options["depth"])
    fam = f.family
    payload = {"a": getattr(fam, "a", None), "eps": getattr(fam, "eps", None), **cert.as_dict()}
    return render_json(cfg, payload), cert.certified_k >= cfg.options["depth"]


def cmd_tune(cfg):
    rho = _angle(cfg.angle, cfg.precision_bits)
    eps, depth = cfg.options["eps"], cfg.options["depth"]
    try:
        f = circlemaps.tune_parameter(eps, rho, depth)
    except circlemaps.TuneFailed as exc:
        return render_json(cfg, {"error": str(exc)}), False
    cert = f.certificate
    err = abs(cert.midpoint - float(rho))
    payload = {"a": f.family.a, "eps": eps, **cert.as_dict(), "midpoint_error": err}
    return render_json(cfg, payload), err < 1e-10 * cfg.tol_scale


def cmd_lemma(cfg):
    f, dmap = build_map(cfg.map, cfg.precision_bits)
    grid = cfg.grid or 1024
    ks = cfg.k_range or list(range(4, 11))
    x = ergodic.uniform_grid(grid)
    rows, ok = [], True
    for k in ks:
        pts = x
        if dmap is not None:
            q = f.angle.q(k)
            pts = dmap.midpoint(np.arange(-dmap.M, dmap.M - q - 1))
        res = float(np.max(cohomology.lemma_identity_residual(f, k, pts)))
        rep = cohomology.lemma_defect(f, k, pts)
        bound = rep.bound if rep.bound is not None else float("nan")
        ok &= res < 1e-9 * cfg.tol_scale
        ok &= rep.bound is None or rep.sup_defect <= rep.bound + 1e-9 * cfg.tol_scale
        rows.append([k, f.angle.q(k), res, rep.sup_defect, bound])
    return render_csv(cfg, ["k", "q", "identity_residual_max", "defect", "bound"], rows), ok


def cmd_corollary(cfg):
    f, _ = build_map(cfg.map, cfg.precision_bits)
    u = parse_u(cfg.options["u"], f)
    reps = ergodic.corollary_experiment(f, u, cfg.k_range, grid=cfg.grid or 512)
    devs = [r.sup_deviation for r in reps]
    ok = devs[-1] < 0.2 * cfg.tol_scale * max(devs)
    ok &= all(r.envelope is None or r.sup_deviation <= r.envelope for r in reps)
    rows = [[r.k, r.q, r.sup_deviation] for r in reps]
    return render_csv(cfg, ["k", "q", "sup_deviation"], rows), ok


def cmd_herman(cfg):
    f, _ = build_map(cfg.map, cfg.precision_bits)
    rows = ergodic.herman_check(f, cfg.k_range, grid=cfg.grid or 512)
    ok = rows[-1].c1_dev < rows[0].c1_dev
    if f.V is not None:
        ok &= all(r.c1_dev <= math.expm1(f.V) for r in rows)
    return render_csv(cfg, ["k", "q", "c0_dev", "c1_dev"],
                      [[r.k, r.q, r.c0_dev, r.c1_dev] for r in rows]), ok


def cmd_denjoy_build(cfg):
    rho = _angle(cfg.angle, cfg.precision_bits)
    try:
        dmap = denjoy.build_denjoy(rho, cfg.options["M"])
    except (ValueError, denjoy.OrderingUnresolvable) as exc:
        raise ConfigInvalid(str(exc)) from exc
    return render_json(cfg, dmap.to_json()), True


def _denjoy_from_cfg(cfg):
    if cfg.map is not None:
        f, dmap = build_map(cfg.map, cfg.precision_bits)
        if dmap is None:
            raise ConfigInvalid("this command needs a Denjoy map")
        return f, dmap
    rho = _angle(cfg.angle or "golden", cfg.precision_bits)
    dmap = denjoy.build_denjoy(rho, cfg.options.get("M") or 64)
    return circlemaps.from_denjoy(dmap), dmap


def cmd_denjoy_nu(cfg):
    _, dmap = _denjoy_from_cfg(cfg)
    nu = denjoy.orbit_weights(dmap)
    points = [{"n": int(n), "x": float(x), "w": float(w)}
              for n, x, w in zip(nu.labels, nu.points, nu.weights)]
    payload = {"S": nu.S, "S_chain": nu.S_chain, "tail": nu.tail_bound, "points": points}
    return render_json(cfg, payload), nu.chain_discrepancy < 1e-10 * cfg.tol_scale


def distribution_tests(dmap, kinds):
    tests = []
    if "gap" in kinds:
        tests += [ergodic.gap_bump(dmap, 0, slope=s) for s in (5.0, -3.0, 12.5)]
        tests += [ergodic.gap_bump(dmap, 0, width=0.2), ergodic.gap_bump(dmap, 2)]
    if "fourier" in kinds:
        tests += [ergodic.fourier_mode(m, kind) for m in (1, 2, 3) for kind in ("cos", "sin")]
    return tests


def cmd_distribution(cfg):
    f, dmap = _denjoy_from_cfg(cfg)
    kinds = set(cfg.options.get("tests", "gap,fourier").split(","))
    if not kinds <= {"gap", "fourier"}:
        raise ConfigInvalid(f"unknown test families {sorted(kinds - {'gap', 'fourier'})}")
    nu = denjoy.orbit_weights(dmap)
    L = cohomology.InvariantDistribution(nu)
    tests = distribution_tests(dmap, kinds)
    phis = [ergodic.constant(1.0)] + tests
    inv = cohomology.invariance_check(L, f, tests)
    auto = cohomology.automorphic_defect(f, nu, 1.0, phis)
    witness = ergodic.gap_plateau(dmap)
    nvl = cohomology.nu_vs_lambda(nu, [witness, ergodic.constant(1.0)])
    sup_d = max(t.sup_deriv for t in tests)
    sup_v = max(t.sup for t in phis)
    ok = inv <= 2 * sup_d * nu.tail_bound * cfg.tol_scale
    ok &= auto <= 2 * sup_v * nu.tail_bound * cfg.tol_scale
    ok &= nvl > 0
    payload = {"S": nu.S, "L_values": {t.name: L(t) for t in tests},
               "invariance_defect": inv, "automorphic_defect": auto, "nu_vs_lambda": nvl,
               "tail": nu.tail_bound}
    return render_json(cfg, payload), ok


def cmd_solve(cfg):
    M = cfg.options["M"]
    if cfg.map is not None:
        f, _ = build_map(cfg.map, cfg.precision_bits)
        if f.conjugacy is None:
            raise ConfigInvalid("solve --map needs a conjugated rotation")
        u = parse_u(cfg.options["u"])
        v, mu, bound = cohomology.conjugated_coboundary(f, u, M)
        c1 = cohomology.coboundary_defect_C1(f, v, u, grid=cfg.grid or 1024)
        payload = {"mu": mu, "residual_bound": bound, "c1_defect": c1}
        return render_json(cfg, payload), c1 < 1e-6 * cfg.tol_scale
    rho = _angle(cfg.angle, cfg.precision_bits)
    u = parse_u(cfg.options["u"])
    u_hat = cohomology.fourier_coefficients(u, 512, tol=1e-14)
    u_hat.pop(0, None)
    sol = cohomology.solve_rotation_coboundary(u_hat, float(rho), M)
    x = ergodic.uniform_grid(cfg.grid or 1024)
    resid = float(np.max(np.abs(sol.w(x + float(rho)) - sol.w(x) - u(x))))
    modes = [{"m": int(m), "re": c.real, "im": c.imag} for m, c in sorted(sol.w.as_dict().items())]
    payload = {"modes": modes, "residual_bound": sol.residual_bound, "residual": resid}
    return render_json(cfg, payload), resid <= sol.residual_bound + 1e-12 * cfg.tol_scale


COMMANDS = {
    "cf": cmd_cf, "rotnum": cmd_rotnum, "tune": cmd_tune, "lemma": cmd_lemma,
    "corollary": cmd_corollary, "herman": cmd_herman, "denjoy build": cmd_denjoy_build,
    "denjoy nu": cmd_denjoy_nu, "distribution": cmd_distribution, "solve": cmd_solve,
}


# -- argument parsing ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigInvalid(message)


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out")
    common.add_argument("--grid", type=int)
    common.add_argument("--precision-bits", type=int, default=angles.DEFAULT_PRECISION_BITS)
    common.add_argument("--tol-scale", type=float, default=1.0)

    p = _Parser(prog="circledist", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("cf", parents=[common])
    s.add_argument("--angle", required=True)
    s.add_argument("--depth", type=int, default=10)

    s = sub.add_parser("rotnum", parents=[common])
    s.add_argument("--map", required=True)
    s.add_argument("--depth", type=int, default=18)

    s = sub.add_parser("tune", parents=[common])
    s.add_argument("--angle", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--depth", type=int, default=18)

    s = sub.add_parser("lemma", parents=[common])
    s.add_argument("--map", required=True)
    s.add_argument("--k", default="4..10")

    s = sub.add_parser("corollary", parents=[common])
    s.add_argument("--map", required=True)
    s.add_argument("--u", default="cos")
    s.add_argument("--kmin", type=int, default=4)
    s.add_argument("--kmax", type=int, default=12)

    s = sub.add_parser("herman", parents=[common])
    s.add_argument("--map", required=True)
    s.add_argument("--kmin", type=int, default=4)
    s.add_argument("--kmax", type=int, default=12)

    dj = sub.add_parser("denjoy")
    djs = dj.add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = djs.add_parser("build", parents=[common])
    s.add_argument("--angle", default="golden")
    s.add_argument("--M", type=int, default=64)
    s = djs.add_parser("nu", parents=[common])
    s.add_argument("--map")
    s.add_argument("--angle")
    s.add_argument("--M", type=int)

    s = sub.add_parser("distribution", parents=[common])
    s.add_argument("--map")
    s.add_argument("--angle")
    s.add_argument("--M", type=int)
    s.add_argument("--tests", default="gap,fourier")

    s = sub.add_parser("solve", parents=[common])
    s.add_argument("--angle", default="golden")
    s.add_argument("--map")
    s.add_argument("--u", default="cos")
    s.add_argument("--M", type=int, default=64)
    return p


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    command = ns.command if ns.command != "denjoy" else f"denjoy {ns.action}"
    opts = {}
    for key in ("depth", "eps", "u", "M", "tests"):
        if getattr(ns, key, None) is not None:
            opts[key] = getattr(ns, key)
    k_range = None
    if getattr(ns, "k", None):
        k_range = parse_k_range(ns.k)
    elif getattr(ns, "kmin", None) is not None:
        if ns.kmax < ns.kmin:
            raise ConfigInvalid("kmax < kmin")
        k_range = list(range(ns.kmin, ns.kmax + 1))
    map_spec = load_map_spec(ns.map) if getattr(ns, "map", None) else None
    if ns.tol_scale <= 0 or (ns.grid is not None and ns.grid < 2):
        raise ConfigInvalid("tolerance scale and grid must be positive")
    return ExperimentConfig(command=command, map=map_spec, angle=getattr(ns, "angle", None),
                            k_range=k_range, grid=ns.grid, out=ns.out,
                            precision_bits=ns.precision_bits, tol_scale=ns.tol_scale, options=opts)


def run(cfg: ExperimentConfig) -> int:
    text, ok = COMMANDS[cfg.command](cfg)
    emit(cfg, text)
    if not ok:
        raise ExperimentFailedTolerance(f"{cfg.command}: tolerance check failed")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        ns = make_parser().parse_args(argv)
        return run(config_from_args(ns))
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentFailedTolerance as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_TOLERANCE
    except (IoError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except circlemaps.TuneFailed as exc:
        print(f"tuning failed: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
