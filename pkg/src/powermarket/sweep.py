"""Deterministic scenario grids: penetration sweeps, cap tightening, tax grids.

A sweep solves one equilibrium per axis value, verifies it, and merges the
results in axis order, so the output is byte-identical regardless of the
degree of parallelism.  Infeasible tail points (a cap of zero without
flexibility, say) are recorded as such instead of aborting the grid.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .formulate import build_lp
from .metrics import MetricsReport, build_report, penetration_of
from .model import (
    Co2Cap,
    Co2Tax,
    PolicyConfig,
    PowerSystem,
    SupportAvailable,
    SupportDispatched,
)
from .solve import solve
from .verify import verify_solution

__all__ = ["SweepPlan", "SweepPoint", "SweepResult", "run_sweep",
           "penetration_of", "write_sweep_csv", "sweep_manifest"]

AXES = ("support_share", "available_target", "co2_cap", "co2_intensity", "co2_tax")


@dataclass(frozen=True)
class SweepPlan:
    """One axis, many points, over a fixed base system.

    ``co2_cap`` values are absolute tCO2/a; ``co2_intensity`` values are
    tCO2 per MWh of demand and are converted to an absolute cap per point.
    The ``policy_set`` names the supported technologies for the support axes
    and defines the penetration reported for every axis.
    """

    system: PowerSystem
    axis: str
    values: tuple
    policy_set: tuple = ()
    base_co2: Optional[object] = None      # Co2Cap/Co2Tax held fixed on support axes
    suppress_negative_prices: bool = False
    enforce_kvl: bool = False
    verify_tol: float = 1e-6
    name: str = "sweep"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis '{self.axis}'; one of {AXES}")
        if not self.values:
            raise ValueError("sweep axis needs at least one value")
        if list(self.values) != sorted(self.values):
            raise ValueError("sweep axis values must be sorted ascending")
        if self.axis in ("support_share", "available_target") and not self.policy_set:
            raise ValueError(f"axis '{self.axis}' needs a non-empty policy_set")

    def policy_at(self, value: float) -> PolicyConfig:
        if self.axis == "support_share":
            support = SupportDispatched(tuple(self.policy_set), share=value) \
                if value > 0.0 else None
            return PolicyConfig(support=support, co2=self.base_co2)
        if self.axis == "available_target":
            support = SupportAvailable(tuple(self.policy_set), share=value) \
                if value > 0.0 else None
            return PolicyConfig(support=support, co2=self.base_co2)
        if self.axis == "co2_cap":
            return PolicyConfig(co2=Co2Cap(value))
        if self.axis == "co2_intensity":
            return PolicyConfig(co2=Co2Cap(value * self.system.total_demand()))
        return PolicyConfig(co2=Co2Tax(value))

    def config_digest(self) -> str:
        payload = json.dumps({
            "axis": self.axis, "values": list(self.values),
            "policy_set": list(self.policy_set),
            "base_co2": repr(self.base_co2),
            "suppress_negative_prices": self.suppress_negative_prices,
            "enforce_kvl": self.enforce_kvl, "name": self.name,
            "system": repr(self.system),
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class SweepPoint:
    value: float
    status: str                         # optimal | infeasible | unbounded | error
    verdict: str                        # pass | fail | skipped
    report: Optional[MetricsReport] = None
    penetration: Optional[float] = None
    failures: list = field(default_factory=list)
    message: str = ""


@dataclass
class SweepResult:
    plan_name: str
    axis: str
    points: list                        # SweepPoint, in axis order
    config_digest: str

    @property
    def all_verified(self) -> bool:
        return all(p.verdict == "pass" for p in self.points if p.status == "optimal")


def _solve_point(plan: SweepPlan, value: float) -> SweepPoint:
    try:
        policy = plan.policy_at(value)
        lp = build_lp(plan.system, policy, enforce_kvl=plan.enforce_kvl)
        sol = solve(lp)
        if sol.status != "optimal":
            return SweepPoint(value=value, status=sol.status, verdict="skipped",
                              message=sol.message)
        report = build_report(plan.system, lp, sol, policy,
                              suppress_negative=plan.suppress_negative_prices)
        checks = verify_solution(plan.system, lp, sol, policy, tol=plan.verify_tol)
        failures = [f"{c.check}:{c.entity}" for c in checks if c.verdict == "fail"]
        pen = penetration_of(plan.system, sol, plan.policy_set) \
            if plan.policy_set else None
        return SweepPoint(value=value, status="optimal",
                          verdict="pass" if not failures else "fail",
                          report=report, penetration=pen, failures=failures)
    except Exception as exc:  # per-point isolation: a bad point must not kill the grid
        return SweepPoint(value=value, status="error", verdict="skipped",
                          message=f"{type(exc).__name__}: {exc}")


def run_sweep(plan: SweepPlan, parallelism: int = 1) -> SweepResult:
    """Solve and verify every point of the plan.

    Points are independent; with ``parallelism`` > 1 they are distributed
    over worker processes and merged back in axis order.
    """
    if parallelism <= 1 or len(plan.values) == 1:
        points = [_solve_point(plan, v) for v in plan.values]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            points = list(pool.map(_solve_point, [plan] * len(plan.values),
                                   plan.values))
    return SweepResult(plan_name=plan.name, axis=plan.axis, points=points,
                       config_digest=plan.config_digest())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def sweep_csv_text(plan: SweepPlan, result: SweepResult) -> str:
    """Render the sweep table; float cells use repr so re-runs are
    byte-identical."""
    names = []
    seen = set()
    for _, spec in plan.system.technologies:
        if spec.name not in seen:
            names.append(spec.name)
            seen.add(spec.name)
    fields = [plan.axis, "status", "verdict", "penetration", "mu_gamma",
              "mu_theta", "mu_co2", "load_weighted_price", "average_price",
              "system_cost", "objective"]
    for name in names:
        fields += [f"mv_{name}", f"lcoe_{name}", f"rmv_{name}"]
        if plan.suppress_negative_prices:
            fields.append(f"mv_suppressed_{name}")

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for p in result.points:
        row = {plan.axis: _fmt(float(p.value)), "status": p.status,
               "verdict": p.verdict, "penetration": _fmt(p.penetration)}
        if p.report is not None:
            rep = p.report
            row.update({
                "mu_gamma": _fmt(rep.mu_gamma), "mu_theta": _fmt(rep.mu_theta),
                "mu_co2": _fmt(rep.mu_co2),
                "load_weighted_price": _fmt(rep.load_weighted_price),
                "average_price": _fmt(rep.average_price),
                "system_cost": _fmt(rep.average_system_cost),
                "objective": _fmt(rep.objective),
            })
            for name in names:
                tm = rep.technologies.get(name)
                if tm is not None:
                    row[f"mv_{name}"] = _fmt(tm.mv)
                    row[f"lcoe_{name}"] = _fmt(tm.lcoe)
                    row[f"rmv_{name}"] = _fmt(tm.rmv)
                if plan.suppress_negative_prices and rep.suppressed is not None:
                    row[f"mv_suppressed_{name}"] = _fmt(
                        rep.suppressed["market_values"].get(name))
        writer.writerow({k: row.get(k, "") for k in fields})
    return buf.getvalue()


def write_sweep_csv(plan: SweepPlan, result: SweepResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(sweep_csv_text(plan, result))


def sweep_manifest(plan: SweepPlan, result: SweepResult) -> dict:
    return {
        "name": plan.name,
        "axis": plan.axis,
        "values": [float(v) for v in plan.values],
        "config_sha256": result.config_digest,
        "points": [{"value": float(p.value), "status": p.status,
                    "verdict": p.verdict, "failures": p.failures,
                    "message": p.message} for p in result.points],
        "all_verified": result.all_verified,
    }
