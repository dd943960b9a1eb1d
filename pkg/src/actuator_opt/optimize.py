"""Actuator positioning (shape gradient) and design (level set + topological derivative)."""
import csv
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DegenerateLevelSetWarning,
    LevelSetField,
    Intervals1D,
    measure,
    reinitialize,
    shape_from_levelset,
    symmetric_difference_measure,
    translate,
)
from .lqr import GAMMA, CostReport, lq_cost, solve_lq, total_cost, worst_case_cost, worst_case_initial
from .sensitivity import Quadrature, shape_gradient, topological_field

__all__ = [
    "OptimizeConfig",
    "IterateRecord",
    "RunRecord",
    "DegenerateSensitivityError",
    "position_descent",
    "levelset_design",
    "worst_case_design",
    "continuation",
    "position_scan",
]

log = logging.getLogger(__name__)


class DegenerateSensitivityError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizeConfig:
    beta0: float = 0.5
    beta_shrink: float = 0.5
    beta_min: float = 1e-12
    eps_stop: float = 1e-7
    max_iters: int = 1000
    reinit_period: int = 50
    alpha_schedule: tuple = (0.1, 1.0, 10.0, 100.0, 1000.0)
    quad: Quadrature = Quadrature()
    gamma: float = GAMMA

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if not 0 < self.beta_shrink < 1:
            raise ValueError("beta_shrink must lie in (0, 1)")
        if not self.eps_stop > 0:
            raise ValueError("eps_stop must be positive")
        sched = tuple(float(a) for a in self.alpha_schedule)
        if any(b <= a for a, b in zip(sched[:-1], sched[1:])):
            raise ValueError("alpha_schedule must be strictly increasing")
        object.__setattr__(self, "alpha_schedule", sched)


@dataclass
class IterateRecord:
    iteration: int
    beta: float
    accepted: bool
    report: CostReport


@dataclass
class RunRecord:
    iterates: list = field(default_factory=list)
    final_shape: object = None
    final_report: CostReport = None
    per_alpha: list = field(default_factory=list)  # (alpha, CostReport, iterations)
    final_psi: LevelSetField = None
    stop_reason: str = ""

    def accepted_totals(self):
        return [it.report.total for it in self.iterates if it.accepted]

    def to_json(self):
        def shape_json(s):
            if s is None:
                return None
            if s.dim == 1:
                return {"intervals": [list(iv) for iv in s.intervals]}
            return {"mask": s.mask.astype(int).tolist()}

        return {
            "iterates": [
                {"iteration": it.iteration, "beta": it.beta, "accepted": it.accepted, **it.report.as_dict()}
                for it in self.iterates
            ],
            "final_shape": shape_json(self.final_shape),
            "final_report": self.final_report.as_dict() if self.final_report else None,
            "per_alpha": [{"alpha": a, "iterations": n, **r.as_dict()} for a, r, n in self.per_alpha],
            "stop_reason": self.stop_reason,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    def write_history_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "beta", "accepted", "total", "lq", "penalty", "size"])
            for it in self.iterates:
                r = it.report
                w.writerow(
                    [it.iteration, f"{it.beta:.6g}", int(it.accepted), f"{r.total:.6g}", f"{r.lq_part:.6g}",
                     f"{r.penalty_part:.6g}", f"{r.size:.6g}"]
                )


def _center(shape):
    if shape.dim == 1:
        return np.array([0.5 * (shape.intervals[0][0] + shape.intervals[-1][1])])
    m = shape.grid_size
    idx = np.argwhere(shape.mask)
    return (idx.mean(axis=0) + 0.5) / m


def position_descent(shape0, f, sys, cfg=OptimizeConfig(), alpha=0.0, c=0.0):
    """Gradient descent on rigid translations of a fixed actuator.

    A trial move by beta*b is accepted only if the cost strictly drops;
    otherwise beta is shrunk.  Stops when |b| < eps_stop, beta < beta_min
    or after max_iters trial moves.
    """
    gamma, quad = cfg.gamma, cfg.quad
    rec = RunRecord()
    shape = shape0
    sol = solve_lq(shape, sys, gamma)
    report = total_cost(shape, f, alpha, c, sys, gamma, solution=sol)
    grad = shape_gradient(shape, f, sys, quad, gamma, solution=sol)
    beta = cfg.beta0
    n_acc = 0
    rec.stop_reason = "max_iters"
    for it in range(cfg.max_iters):
        if np.linalg.norm(grad.b) < cfg.eps_stop:
            rec.stop_reason = "gradient"
            break
        cand = translate(shape, beta * grad.b)
        cand_sol = solve_lq(cand, sys, gamma, Pi0=sol.Pi)
        cand_report = total_cost(cand, f, alpha, c, sys, gamma, solution=cand_sol)
        accepted = cand_report.total < report.total
        if accepted:
            shape, sol, report = cand, cand_sol, cand_report
            grad = shape_gradient(shape, f, sys, quad, gamma, solution=sol)
            n_acc += 1
        rec.iterates.append(IterateRecord(it, beta, accepted, cand_report))
        log.debug("position it=%d beta=%.3g accepted=%s J=%.6g center=%s", it, beta, accepted,
                  cand_report.total, _center(cand))
        if not accepted:
            beta *= cfg.beta_shrink
            if beta < cfg.beta_min:
                rec.stop_reason = "beta"
                break
    report.iterations = n_acc
    rec.final_shape = shape
    rec.final_report = report
    return rec


def _norm(g, dim):
    """Discrete L2 norm: trapezoidal weights in 1D, cell area in 2D."""
    if dim == 1:
        w = np.full(g.size, 1.0 / (g.size - 1))
        w[[0, -1]] *= 0.5
        return float(np.sqrt(np.sum(w * g * g)))
    return float(np.sqrt(np.mean(g * g)))


def _levelset_loop(psi0, sys, alpha, c, cfg, evaluate, sensitivity):
    """Shared accept/shrink loop for the fixed-f and worst-case designs.

    ``evaluate(shape, Pi0)`` returns (report, solution, state) and
    ``sensitivity(shape, solution, state)`` the field g.
    """
    rec = RunRecord()
    psi = psi0
    shape = shape_from_levelset(psi)
    report, sol, state = evaluate(shape, None)
    g = sensitivity(shape, sol, state)
    beta = cfg.beta0
    n_acc = 0
    rec.stop_reason = "max_iters"
    for it in range(cfg.max_iters):
        if it > 0 and it % cfg.reinit_period == 0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateLevelSetWarning)
                psi = reinitialize(psi)
        gnorm = _norm(g, psi.dim)
        if gnorm == 0.0:
            raise DegenerateSensitivityError("topological sensitivity vanishes identically")
        cand_psi = LevelSetField((1.0 - beta) * psi.psi + beta * g / gnorm)
        cand_shape = shape_from_levelset(cand_psi)
        cand_report, cand_sol, cand_state = evaluate(cand_shape, sol.Pi)
        accepted = cand_report.total < report.total
        rec.iterates.append(IterateRecord(it, beta, accepted, cand_report))
        if accepted:
            change = symmetric_difference_measure(cand_shape, shape)
            psi, shape, report, sol, state = cand_psi, cand_shape, cand_report, cand_sol, cand_state
            n_acc += 1
            if change < cfg.eps_stop:
                rec.stop_reason = "shape_change"
                break
            g = sensitivity(shape, sol, state)
        else:
            beta *= cfg.beta_shrink
            if beta < cfg.beta_min:
                rec.stop_reason = "beta"
                break
    log.info("alpha=%g: %d iterations (%d accepted), J=%.6g size=%.4f stop=%s",
             alpha, len(rec.iterates), n_acc, report.total, report.size, rec.stop_reason)
    report.iterations = len(rec.iterates)
    rec.final_shape = shape
    rec.final_report = report
    rec.final_psi = psi
    rec.per_alpha.append((alpha, report, report.iterations))
    return rec


def levelset_design(psi0, f, sys, alpha, c, cfg=OptimizeConfig()):
    """Level-set design driven by the topological derivative for fixed f."""
    gamma, quad = cfg.gamma, cfg.quad
    f = np.asarray(f, dtype=float)

    def evaluate(shape, Pi0):
        sol = solve_lq(shape, sys, gamma, Pi0=Pi0)
        return total_cost(shape, f, alpha, c, sys, gamma, solution=sol), sol, None

    def sensitivity(shape, sol, _):
        return topological_field(shape, f, sys, alpha, c, quad, gamma, solution=sol).g

    return _levelset_loop(psi0, sys, alpha, c, cfg, evaluate, sensitivity)


def worst_case_design(psi0, sys, alpha, c, cfg=OptimizeConfig()):
    """Level-set design for the worst normalised initial condition.

    The worst-case initial condition is refreshed whenever the shape
    changes; the tracked cost is lambda_max + penalty.
    """
    gamma, quad = cfg.gamma, cfg.quad

    def evaluate(shape, Pi0):
        sol = solve_lq(shape, sys, gamma, Pi0=Pi0)
        wc = worst_case_initial(sol.riccati, sys.S)
        return worst_case_cost(shape, alpha, c, sys, gamma, solution=sol), sol, wc

    def sensitivity(shape, sol, wc):
        return topological_field(shape, wc.representatives[0], sys, alpha, c, quad, gamma, solution=sol).g

    return _levelset_loop(psi0, sys, alpha, c, cfg, evaluate, sensitivity)


def continuation(psi0, f, sys, c, cfg=OptimizeConfig()):
    """Solve a sequence of penalised problems with increasing alpha.

    ``f="worst_case"`` runs the worst-case design.  Each stage starts from
    the previous final level set, reinitialized, with beta reset to beta0.
    """
    rec = RunRecord()
    psi = psi0
    worst = isinstance(f, str) and f == "worst_case"
    for alpha in cfg.alpha_schedule:
        if worst:
            stage = worst_case_design(psi, sys, alpha, c, cfg)
        else:
            stage = levelset_design(psi, f, sys, alpha, c, cfg)
        rec.iterates.extend(stage.iterates)
        rec.per_alpha.extend(stage.per_alpha)
        rec.final_shape, rec.final_report, rec.final_psi = stage.final_shape, stage.final_report, stage.final_psi
        rec.stop_reason = stage.stop_reason
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateLevelSetWarning)
            psi = reinitialize(stage.final_psi)
    return rec


def position_scan(f, sys, width, centers, gamma=GAMMA):
    """LQ cost of an interval of fixed width at each centre.

    Returns (list of (center, cost), argmin centre).
    """
    out = []
    for x0 in centers:
        a, b = x0 - 0.5 * width, x0 + 0.5 * width
        if a < -1e-12 or b > 1.0 + 1e-12:
            raise ValueError(f"interval centred at {x0} leaves the domain")
        shape = Intervals1D(((a, b),))
        sol = solve_lq(shape, sys, gamma)
        out.append((float(x0), lq_cost(sol.riccati, f)))
    best = min(out, key=lambda t: t[1])[0]
    return out, best
