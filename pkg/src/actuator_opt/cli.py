"""Scenario runner: ``actuator-opt run|validate <config.yaml>`` and ``actuator-opt catalog``."""
import argparse
import csv
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np
import yaml

from .discretization import assemble_fem_1d, assemble_spectral_2d, project_initial_condition
from .geometry import DegenerateLevelSetWarning, Intervals1D, disk, levelset_from_shape, reinitialize, \
    write_levelset_csv
from .optimize import OptimizeConfig, RunRecord, levelset_design, position_descent, position_scan, worst_case_design
from .riccati import ConvergenceError
from .sensitivity import Quadrature

log = logging.getLogger("actuator_opt")

EXIT_SCHEMA = 2
EXIT_SOLVER = 3

# name -> (formula, callable); 1D callables take x, 2D ones take (x, y)
INITIAL_CONDITIONS = {
    "test1": ("sin(pi x)", lambda x: np.sin(np.pi * x)),
    "test2": ("100|x-0.7|^4 + x(x-1)", lambda x: 100.0 * np.abs(x - 0.7) ** 4 + x * (x - 1.0)),
    "test3": ("max(sin(3 pi x), 0)^2", lambda x: np.maximum(np.sin(3 * np.pi * x), 0.0) ** 2),
    "test4": ("sin(3 pi x)^2 * 1_{x<2/3}", lambda x: np.sin(3 * np.pi * x) ** 2 * (x < 2.0 / 3.0)),
    "test7": (
        "max(sin(4 pi (x-1/8)), 0)^3 * sin(pi y)^3",
        lambda x, y: np.maximum(np.sin(4 * np.pi * (x - 0.125)), 0.0) ** 3 * np.sin(np.pi * y) ** 3,
    ),
}
DIFFUSION_PROFILES = {
    "test6_sigma": (
        "(1 - max(sin(9 pi x), 0)) * 1_{x<0.5} + 1e-3",
        lambda x: (1.0 - np.maximum(np.sin(9 * np.pi * x), 0.0)) * (x < 0.5) + 1e-3,
    ),
}
IC_DIMS = {"test7": 2}


def list_catalog():
    lines = ["initial conditions:"]
    for name, (formula, _) in sorted(INITIAL_CONDITIONS.items()):
        lines.append(f"  {name}: {formula}  [{IC_DIMS.get(name, 1)}D]")
    lines.append("  worst_case: leading eigenvector of (Pi, S), refreshed on every shape change")
    lines.append("diffusion profiles:")
    for name, (formula, _) in sorted(DIFFUSION_PROFILES.items()):
        lines.append(f"  {name}: {formula}")
    return "\n".join(lines) + "\n"


class SchemaError(ValueError):
    def __init__(self, path, line, message):
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")


# ---------------------------------------------------------------- schema

@dataclass
class Scenario:
    problem: str
    disc: dict
    initial_condition: str
    gamma: float
    c: float
    alpha_schedule: tuple
    optimizer: OptimizeConfig
    initial_shape: dict
    output_dir: str
    cold_start_alpha: float = None
    scan: dict = field(default_factory=dict)
    name: str = "scenario"


_TOP_KEYS = {"name", "problem", "discretization", "initial_condition", "gamma", "c", "alpha_schedule",
             "optimizer", "initial_shape", "output_dir", "cold_start_alpha", "scan"}
_OPT_KEYS = {"beta0", "beta_shrink", "eps_stop", "max_iters", "reinit_period", "T", "dt", "quadrature"}


class _Reader:
    """Typed access to the parsed mapping with source line numbers for errors."""

    def __init__(self, path, text):
        self.path = path
        try:
            self.node = yaml.compose(text)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise SchemaError(path, mark.line + 1 if mark else None, f"invalid YAML: {exc}") from None
        if not isinstance(self.data, dict):
            raise SchemaError(path, 1, "top level must be a mapping")

    def line(self, *keys):
        node, line = self.node, None
        for k in keys:
            if not isinstance(node, yaml.MappingNode):
                break
            for kn, vn in node.value:
                if kn.value == k:
                    line, node = kn.start_mark.line + 1, vn
                    break
            else:
                break
        return line

    def fail(self, keys, message):
        raise SchemaError(self.path, self.line(*keys), f"field '{'.'.join(keys)}': {message}")

    def get(self, keys, default=None, required=False):
        d = self.data
        for k in keys[:-1]:
            d = d.get(k, {}) if isinstance(d, dict) else {}
        if not isinstance(d, dict) or keys[-1] not in d:
            if required:
                raise SchemaError(self.path, self.line(*keys[:-1]) if len(keys) > 1 else None,
                                  f"field '{'.'.join(keys)}' is required")
            return default
        return d[keys[-1]]

    def number(self, keys, default=None, required=False, positive=False, integer=False):
        v = self.get(keys, default, required)
        if v is None:
            return None
        if isinstance(v, str):
            try:
                v = float(v)
            except ValueError:
                self.fail(keys, f"expected a number, got {v!r}")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(keys, f"expected a finite number, got {v!r}")
        if integer:
            if float(v) != int(v):
                self.fail(keys, f"expected an integer, got {v!r}")
            v = int(v)
        if positive and not v > 0:
            self.fail(keys, f"must be positive, got {v!r}")
        return v

    def check_keys(self, keys, allowed):
        d = self.get(keys) if keys else self.data
        if d is None:
            return
        if not isinstance(d, dict):
            self.fail(keys, "expected a mapping")
        for k in d:
            if k not in allowed:
                raise SchemaError(self.path, self.line(*keys, k), f"unknown field '{'.'.join((*keys, k))}'")


def load_scenario(path):
    with open(path) as fh:
        text = fh.read()
    r = _Reader(path, text)
    r.check_keys((), _TOP_KEYS)

    problem = r.get(("problem",), required=True)
    if problem not in ("position", "design", "worst_case", "scan"):
        r.fail(("problem",), f"must be one of position, design, worst_case, scan; got {problem!r}")

    kind = r.get(("discretization", "kind"), required=True)
    if kind == "fem1d":
        r.check_keys(("discretization",), {"kind", "n", "sigma"})
        sigma = r.get(("discretization", "sigma"), 0.01)
        if isinstance(sigma, str) and sigma in DIFFUSION_PROFILES:
            pass
        else:
            sigma = r.number(("discretization", "sigma"), positive=True)
        disc = {"kind": kind, "n": r.number(("discretization", "n"), 200, positive=True, integer=True),
                "sigma": sigma}
        if disc["n"] < 2:
            r.fail(("discretization", "n"), "need at least 2 elements")
    elif kind == "spectral2d":
        r.check_keys(("discretization",), {"kind", "n_modes", "sigma", "grid"})
        disc = {"kind": kind,
                "n_modes": r.number(("discretization", "n_modes"), 100, positive=True, integer=True),
                "sigma": r.number(("discretization", "sigma"), 0.01, positive=True),
                "grid": r.number(("discretization", "grid"), 128, positive=True, integer=True)}
    else:
        r.fail(("discretization", "kind"), f"must be fem1d or spectral2d, got {kind!r}")
    dim = 1 if kind == "fem1d" else 2

    ic = r.get(("initial_condition",), required=True)
    if ic != "worst_case" and ic not in INITIAL_CONDITIONS:
        r.fail(("initial_condition",), f"unknown catalog entry {ic!r}")
    if ic != "worst_case" and IC_DIMS.get(ic, 1) != dim:
        r.fail(("initial_condition",), f"{ic!r} is a {IC_DIMS.get(ic, 1)}D expression")
    if (ic == "worst_case") != (problem == "worst_case"):
        r.fail(("initial_condition",), "use 'worst_case' exactly for problem worst_case")

    gamma = r.number(("gamma",), 1e-3, positive=True)
    c = r.number(("c",), 0.2 if dim == 1 else 0.04, positive=True)
    if c >= 1.0:
        r.fail(("c",), "must lie in (0, 1)")

    sched = r.get(("alpha_schedule",), [0.1, 1.0, 10.0, 100.0, 1000.0])
    if not isinstance(sched, list) or not sched:
        r.fail(("alpha_schedule",), "expected a non-empty list")
    try:
        sched = tuple(float(a) for a in sched)
    except (TypeError, ValueError):
        r.fail(("alpha_schedule",), "entries must be numbers")
    if any(a < 0 for a in sched) or any(b <= a for a, b in zip(sched[:-1], sched[1:])):
        r.fail(("alpha_schedule",), "must be non-negative and strictly increasing")

    r.check_keys(("optimizer",), _OPT_KEYS)
    o = ("optimizer",)
    quad_method = r.get(o + ("quadrature",), "trapezoid")
    if quad_method not in ("trapezoid", "stepping", "exact"):
        r.fail(o + ("quadrature",), f"must be trapezoid, stepping or exact, got {quad_method!r}")
    beta_shrink = r.number(o + ("beta_shrink",), 0.5, positive=True)
    if beta_shrink >= 1:
        r.fail(o + ("beta_shrink",), "must lie in (0, 1)")
    T = r.number(o + ("T",), 1000.0, positive=True)
    dt = r.number(o + ("dt",), 0.01, positive=True)
    if dt > T:
        r.fail(o + ("dt",), "must not exceed T")
    cfg = OptimizeConfig(
        beta0=r.number(o + ("beta0",), 0.5, positive=True),
        beta_shrink=beta_shrink,
        eps_stop=r.number(o + ("eps_stop",), 1e-7, positive=True),
        max_iters=r.number(o + ("max_iters",), 1000, positive=True, integer=True),
        reinit_period=r.number(o + ("reinit_period",), 50, positive=True, integer=True),
        alpha_schedule=sched,
        quad=Quadrature(T=T, dt=dt, method=quad_method),
        gamma=gamma,
    )

    shape = r.get(("initial_shape",), None)
    if shape is None:
        shape = {"intervals": [[0.5 - c / 2, 0.5 + c / 2]]} if dim == 1 else \
            {"disk": {"center": [0.5, 0.5], "radius": math.sqrt(c / math.pi)}}
    elif dim == 1:
        r.check_keys(("initial_shape",), {"intervals"})
        ivs = shape.get("intervals")
        ok = isinstance(ivs, list) and ivs and all(
            isinstance(iv, list) and len(iv) == 2 and all(isinstance(v, (int, float)) for v in iv)
            and 0 <= iv[0] < iv[1] <= 1 for iv in ivs)
        if not ok:
            r.fail(("initial_shape", "intervals"), "expected a list of [a, b] with 0 <= a < b <= 1")
    else:
        r.check_keys(("initial_shape",), {"disk"})
        dk = shape.get("disk")
        ok = isinstance(dk, dict) and isinstance(dk.get("center"), list) and len(dk["center"]) == 2 \
            and isinstance(dk.get("radius"), (int, float)) and dk["radius"] > 0
        if not ok:
            r.fail(("initial_shape", "disk"), "expected {center: [x, y], radius: r > 0}")
    if problem in ("position", "scan") and dim != 1:
        r.fail(("problem",), f"{problem} is available for fem1d only")
    if problem == "position" and len(shape.get("intervals", [])) != 1:
        r.fail(("initial_shape", "intervals"), "positioning needs a single interval")

    cold = r.number(("cold_start_alpha",), None, positive=True)
    scan = {}
    if problem == "scan":
        r.check_keys(("scan",), {"width", "start", "stop", "step"})
        width = r.number(("scan", "width"), 0.2, positive=True)
        scan = {"width": width,
                "start": r.number(("scan", "start"), width / 2),
                "stop": r.number(("scan", "stop"), 1 - width / 2),
                "step": r.number(("scan", "step"), 0.01, positive=True)}
        if scan["start"] - width / 2 < -1e-12 or scan["stop"] + width / 2 > 1 + 1e-12 or scan["start"] > scan["stop"]:
            r.fail(("scan",), "centres must keep the interval inside (0, 1)")

    out = r.get(("output_dir",), None)
    name = str(r.get(("name",), os.path.splitext(os.path.basename(path))[0]))
    if out is None:
        out = os.path.join("out", name)
    return Scenario(problem=problem, disc=disc, initial_condition=ic, gamma=gamma, c=c, alpha_schedule=sched,
                    optimizer=cfg, initial_shape=shape, output_dir=str(out), cold_start_alpha=cold, scan=scan,
                    name=name)


# ---------------------------------------------------------------- run

def build_system(sc):
    d = sc.disc
    if d["kind"] == "fem1d":
        sigma = d["sigma"]
        if isinstance(sigma, str):
            sigma = DIFFUSION_PROFILES[sigma][1]
        return assemble_fem_1d(d["n"], sigma)
    return assemble_spectral_2d(d["n_modes"], d["sigma"], d["grid"])


def build_initial_condition(sc, sys_):
    if sc.initial_condition == "worst_case":
        return "worst_case"
    return project_initial_condition(INITIAL_CONDITIONS[sc.initial_condition][1], sys_)


def build_initial_shape(sc, sys_):
    if "intervals" in sc.initial_shape:
        return Intervals1D(tuple(tuple(iv) for iv in sc.initial_shape["intervals"]))
    dk = sc.initial_shape["disk"]
    return disk(dk["center"], dk["radius"], sys_.basis.grid_size)


def _n_levelset_points(sys_):
    b = sys_.basis
    return b.n_elements + 1 if b.kind == "fem1d" else b.grid_size


def _g6(v):
    return f"{v:.6g}"


def format_table(rows):
    """rows: (label, CostReport) -> markdown table with 6 significant digits."""
    out = ["| alpha | J | J_LQ | J_alpha (size) | iterations |", "|---|---|---|---|---|"]
    for label, rep in rows:
        out.append(f"| {label} | {_g6(rep.total)} | {_g6(rep.lq_part)} | {_g6(rep.penalty_part)} "
                   f"({_g6(rep.size)}) | {rep.iterations} |")
    return "\n".join(out) + "\n"


def _write_run(outdir, rec, table_rows):
    rec.write_json(os.path.join(outdir, "run.json"))
    rec.write_history_csv(os.path.join(outdir, "history.csv"))
    with open(os.path.join(outdir, "table.md"), "w") as fh:
        fh.write(format_table(table_rows))


def run_scenario(path):
    """Run one scenario file; returns the process exit status."""
    try:
        sc = load_scenario(path)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    outdir = os.environ.get("OUTPUT_DIR") or sc.output_dir
    os.makedirs(outdir, exist_ok=True)
    sys_ = build_system(sc)
    f = build_initial_condition(sc, sys_)
    cfg = sc.optimizer
    rec = RunRecord()
    rows = []
    try:
        if sc.problem == "scan":
            s = sc.scan
            n = int(round((s["stop"] - s["start"]) / s["step"]))
            centers = s["start"] + s["step"] * np.arange(n + 1)
            pairs, best = position_scan(f, sys_, s["width"], centers, sc.gamma)
            with open(os.path.join(outdir, "centers.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["center", "cost"])
                for x0, v in pairs:
                    w.writerow([_g6(x0), _g6(v)])
                w.writerow(["argmin", _g6(best)])
            log.info("scan argmin %.6g", best)
            return 0
        shape0 = build_initial_shape(sc, sys_)
        npts = _n_levelset_points(sys_)
        if sc.problem == "position":
            rec = position_descent(shape0, f, sys_, cfg)
            rows = [("0", rec.final_report)]
        else:
            psi0 = levelset_from_shape(shape0, npts)
            write_levelset_csv(os.path.join(outdir, "levelset_initial.csv"), psi0)
            psi = psi0
            for alpha in cfg.alpha_schedule:
                # stage by stage so a solver failure still leaves the finished rows on disk
                stage = _design(psi, f, sys_, alpha, sc.c, cfg)
                rec.iterates.extend(stage.iterates)
                rec.per_alpha.extend(stage.per_alpha)
                rec.final_shape, rec.final_report, rec.final_psi = stage.final_shape, stage.final_report, stage.final_psi
                rec.stop_reason = stage.stop_reason
                rows.append((_g6(alpha), stage.final_report))
                write_levelset_csv(os.path.join(outdir, f"levelset_alpha_{_g6(alpha)}.csv"), stage.final_psi)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", DegenerateLevelSetWarning)
                    psi = reinitialize(stage.final_psi)
            if sc.cold_start_alpha is not None:
                cold = _design(psi0, f, sys_, sc.cold_start_alpha, sc.c, cfg)
                rows.append((_g6(sc.cold_start_alpha) + "*", cold.final_report))
                write_levelset_csv(os.path.join(outdir, "levelset_cold_start.csv"), cold.final_psi)
    except (ConvergenceError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        _write_run(outdir, rec, rows)
        return EXIT_SOLVER
    _write_run(outdir, rec, rows)
    return 0


def _design(psi, f, sys_, alpha, c, cfg):
    if isinstance(f, str):
        return worst_case_design(psi, sys_, alpha, c, cfg)
    return levelset_design(psi, f, sys_, alpha, c, cfg)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="actuator-opt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="check a scenario file without running it")
    p_val.add_argument("config")
    sub.add_parser("catalog", help="list built-in initial conditions and diffusion profiles")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.cmd == "catalog":
        sys.stdout.write(list_catalog())
        return 0
    if args.cmd == "validate":
        try:
            load_scenario(args.config)
        except SchemaError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SCHEMA
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SCHEMA
        print("ok")
        return 0
    try:
        return run_scenario(args.config)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
