"""gnsflow command line: constants, sweeps, deficits, flow and ODE runs, verification."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import (compute_constants, cross_check_constants, derive_params, params_from_m)
from .errors import DomainError, TruncationWarning
from .families import FAMILIES, FamilySpec, generate_family, reference_mix
from .functionals import (DEFICIT_KEYS, ck_bound, ck_variant_bound, gn_deficit, normalize_to_sigma_star)
from .profiles import DEFAULT_TAIL_TOL, grid_for
from .radial import build_grid, load_profile_csv

COMMANDS = ("constants", "sweep", "deficit", "ck", "flow", "ode", "verify")
CK_KEYS = ("member", "sigma", "ck_lhs", "ck_rhs", "variant_lhs", "variant_rhs")


@dataclass
class RunConfig:
    command: str
    d: int = 2
    p: float | None = None
    m: float | None = None
    mass: float | None = None
    cells: int = 2000
    R: float | None = None
    q: float = 2.0
    family: str = "two-scale-mix"
    trials: int = 200
    seed: int = 42
    t_max: float = 2.0
    save_dt: float = 0.01
    output: str | None = None
    format: str = "csv"

    def params(self):
        mass = "M*" if self.mass is None else self.mass
        if self.m is not None:
            return params_from_m(self.d, self.m, mass)
        return derive_params(self.d, 2.0 if self.p is None else self.p, mass)


def quad_tol() -> float:
    """Tail tolerance for default grid radii; GNS_QUAD_TOL overrides it."""
    raw = os.environ.get("GNS_QUAD_TOL")
    if raw is None:
        return DEFAULT_TAIL_TOL
    try:
        val = float(raw)
    except ValueError:
        raise DomainError(f"GNS_QUAD_TOL must be a number, got {raw!r}") from None
    if not 0.0 < val < 1.0:
        raise DomainError("GNS_QUAD_TOL must lie in (0, 1)")
    return val


def atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gnsflow-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(cfg: RunConfig, text: str):
    if cfg.output:
        atomic_write(cfg.output, text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _grid(cfg: RunConfig, P, sigma: float = 3.0):
    M = P.mass
    if cfg.R is not None:
        return build_grid(P.d, cfg.cells, cfg.R, cfg.q)
    return grid_for(P, M, sigma, n=cfg.cells, q=cfg.q, tol=quad_tol())


# -- commands ----------------------------------------------------------------------

def cmd_constants(cfg: RunConfig) -> int:
    P = cfg.params()
    c = compute_constants(P)
    report = cross_check_constants(P)
    if cfg.format == "json":
        emit(cfg, json.dumps({**c.export(), "consistency": report.as_dict()}, indent=2) + "\n")
    else:
        emit(cfg, c.to_csv())
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    from .constants import endpoint_scan
    d = cfg.d
    top = 4.0 if d == 2 else d / (d - 2.0)
    # log-spaced toward p = 1, linear up to the upper end
    p_grid = np.unique(np.concatenate([1.0 + np.logspace(-4, -1, 10), np.linspace(1.1, top, 12)]))
    rows = endpoint_scan(d, p_grid)
    emit(cfg, _csv(("p", "c_pd", "c_ck", "k_pd", "status"),
                   [[r["p"], r["c_pd"], r["c_ck"], r["k_pd"], r["status"]] for r in rows]))
    return 0


def _profiles(cfg: RunConfig, P, input_csv: str | None):
    grid = _grid(cfg, P)
    if input_csv:
        return [load_profile_csv(input_csv, grid)]
    return generate_family(FamilySpec(cfg.family, cfg.trials, cfg.seed), P, grid)


def cmd_deficit(cfg: RunConfig, input_csv: str | None = None) -> int:
    P = cfg.params()
    c = compute_constants(P)
    rows = []
    for u in _profiles(cfg, P, input_csv):
        f = u.map(lambda v: v ** (1.0 / (2.0 * P.p)), u.tail_exponent / (2.0 * P.p))
        fn, _ = normalize_to_sigma_star(f, P, c)
        rows.append(gn_deficit(fn, P, c))
    if cfg.format == "json":
        emit(cfg, json.dumps([r.to_dict() for r in rows], indent=2) + "\n")
    else:
        emit(cfg, _csv(DEFICIT_KEYS, [r.to_dict().values() for r in rows]))
    worst = min(r.gn_deficit - r.improvement_bound for r in rows)
    print(f"min gn_deficit - improvement_bound = {worst:.3e} over {len(rows)} profiles", file=sys.stderr)
    return 0


def cmd_ck(cfg: RunConfig, input_csv: str | None = None) -> int:
    from .functionals import best_match_sigma
    P = cfg.params()
    rows = []
    for k, u in enumerate(_profiles(cfg, P, input_csv)):
        a, b = ck_bound(u, P)
        va, vb = ck_variant_bound(u, P)
        rows.append((k, best_match_sigma(u, P, check=False).sigma, a, b, va, vb))
    if cfg.format == "json":
        emit(cfg, json.dumps([dict(zip(CK_KEYS, r)) for r in rows], indent=2) + "\n")
    else:
        emit(cfg, _csv(CK_KEYS, rows))
    return 0


def cmd_flow(cfg: RunConfig, input_csv: str | None = None) -> int:
    from .flow import run
    P = cfg.params()
    grid = _grid(cfg, P, 4.0)
    u0 = load_profile_csv(input_csv, grid) if input_csv else reference_mix(P, grid)
    trace = run(u0, P, cfg.t_max, cfg.save_dt)
    if cfg.format == "json":
        emit(cfg, json.dumps({"metadata": trace.metadata(),
                              "rows": [dict(zip(("t", "sigma", "mass", "second_moment", "entropy",
                                                 "fisher", "remainder"), s.row())) for s in trace.states]},
                             indent=2, default=float) + "\n")
    elif cfg.output:
        trace.write_csv(cfg.output)
        trace.write_metadata(cfg.output + ".meta.json")
    else:
        from .flow import TRACE_HEADER
        emit(cfg, _csv(TRACE_HEADER, [s.row() for s in trace.states]))
    return 0


def cmd_ode(cfg: RunConfig, f0: float, sigma0: float, j0: float | None, closure: str) -> int:
    from .odemodel import gronwall_report, integrate_system
    from .constants import c_md
    P = cfg.params()
    if j0 is None:
        j0 = 4.0 * f0 + c_md(P, P.mass) * sigma0 ** (-P.b) * f0 * f0
    traj = integrate_system(f0, sigma0, j0, P, cfg.t_max, closure=closure)
    if cfg.format == "json":
        payload = {"t": traj.t.tolist(), "f": traj.f.tolist(), "sigma": traj.sigma.tolist(),
                   "j": traj.j.tolist()}
        try:
            payload["gronwall"] = gronwall_report(traj).as_dict()
        except DomainError as exc:
            payload["gronwall"] = {"error": str(exc)}
        emit(cfg, json.dumps(payload, indent=2) + "\n")
    else:
        emit(cfg, traj.to_csv())
    return 0


def cmd_verify(quick: bool = False, printed_sigma_star: bool = False, only=None) -> int:
    from .acceptance import run_acceptance
    print(f"{'#':>2}  {'criterion':<28s} {'result':<6s} {'residual':>11s} {'time':>8s}")

    def echo(r):
        print(f"{r.number:>2}  {r.name:<28s} {'pass' if r.passed else 'FAIL':<6s} "
              f"{r.residual:>11.3e} {r.seconds:>7.2f}s  {r.detail}", flush=True)

    results = run_acceptance(quick=quick, only=only, printed_sigma_star=printed_sigma_star, echo=echo)
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"criterion {r.number} ({r.name}) failed", file=sys.stderr)
    return 1 if failed else 0


# -- argument parsing ----------------------------------------------------------------

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gnsflow", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, family=False, grid=True):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--p", type=float, help="exponent p (default 2)")
        g.add_argument("--m", type=float, help="diffusion exponent m = (p+1)/(2p)")
        sp.add_argument("--d", type=int, default=2)
        sp.add_argument("--mass", type=float, help="reference mass (default M*)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("-o", "--output", help="write here (atomically) instead of stdout")
        if grid:
            sp.add_argument("--cells", type=_positive_int, default=2000)
            sp.add_argument("--R", type=float, help="outer radius (default: from the tail tolerance)")
            sp.add_argument("--q", type=float, default=2.0, help="grid stretching exponent")
        if family:
            sp.add_argument("--family", choices=FAMILIES, default="two-scale-mix")
            sp.add_argument("--trials", type=_positive_int, default=200)
            sp.add_argument("--seed", type=int, default=42)
            sp.add_argument("--input", help="profile CSV (r,value) instead of a family")

    common(sub.add_parser("constants", help="closed-form constants and their cross-checks"), grid=False)
    common(sub.add_parser("sweep", help="C_pd, C_CK, K_pd across p"), grid=False)
    common(sub.add_parser("deficit", help="stability deficit per profile"), family=True)
    common(sub.add_parser("ck", help="Csiszar-Kullback checks per profile"), family=True)
    fl = sub.add_parser("flow", help="run the rescaled fast diffusion flow")
    common(fl)
    fl.add_argument("--t-max", type=float, default=2.0)
    fl.add_argument("--save-dt", type=float, default=0.01)
    fl.add_argument("--input", help="initial profile CSV (default: the reference mixture)")
    od = sub.add_parser("ode", help="integrate the reduced (f, sigma, j) system")
    common(od, grid=False)
    od.add_argument("--t-max", type=float, default=20.0)
    od.add_argument("--f0", type=float, default=1.0)
    od.add_argument("--sigma0", type=float, default=1.0)
    od.add_argument("--j0", type=float, help="default: on the improved-inequality threshold")
    od.add_argument("--closure", choices=("frozen", "literal"), default="frozen")
    vf = sub.add_parser("verify", help="run the acceptance suite")
    vf.add_argument("--quick", action="store_true", help="smaller sweeps and a shorter flow")
    vf.add_argument("--only", type=int, nargs="+", metavar="N")
    vf.add_argument("--debug-printed-sigma-star", action="store_true", help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args.quick, args.debug_printed_sigma_star, args.only)
    fields = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__ and v is not None}
    cfg = RunConfig(**fields)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            if cfg.command == "constants":
                return cmd_constants(cfg)
            if cfg.command == "sweep":
                return cmd_sweep(cfg)
            if cfg.command == "deficit":
                return cmd_deficit(cfg, args.input)
            if cfg.command == "ck":
                return cmd_ck(cfg, args.input)
            if cfg.command == "flow":
                return cmd_flow(cfg, args.input)
            return cmd_ode(cfg, args.f0, args.sigma0, args.j0, args.closure)
    except (DomainError, OSError) as exc:
        print(f"gnsflow {cfg.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
