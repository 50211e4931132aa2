"""Executable theorem checks over solved market equilibria.

Each check turns one of the equilibrium results (KKT optimality, per-entity
zero profit, cap/tax equivalence, the subsidy-to-tax price lift) into a
pass/fail/inconclusive verdict with a numerical residual.  A brute-force
enumeration oracle provides solver-independent optima and prices for tiny
instances.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .formulate import (
    LinearProgram,
    apply_equivalence_substitution,
    build_lp,
    cycle_basis,
    disp_col,
    flow_col,
    gen_col,
    line_cap_col,
    tag_id,
    tech_key,
)
from .metrics import (
    congestion_revenue,
    line_cost,
    market_value,
    nodal_prices,
    storage_arbitrage,
    storage_cost,
    tech_available_energy,
    tech_capacity,
    tech_cost,
    tech_energy,
    tech_revenue,
)
from .model import (
    SHEDDING_NAME,
    Co2Cap,
    Co2Tax,
    FixedFip,
    PolicyConfig,
    PowerSystem,
    SupportAvailable,
    SupportDispatched,
)
from .solve import Solution, solve

__all__ = [
    "CheckResult",
    "KktReport",
    "check_kkt",
    "check_zero_profit",
    "check_cap_tax_equivalence",
    "check_subsidy_tax_lift",
    "OracleError",
    "OracleResult",
    "brute_force_oracle",
    "verify_solution",
    "report_to_json",
]

DEFAULT_TOL = 1e-6


@dataclass
class CheckResult:
    check: str
    entity: str
    residual: float
    verdict: str          # pass | fail | inconclusive
    detail: dict = field(default_factory=dict)


# -- KKT residuals ---------------------------------------------------------------


@dataclass
class KktReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.stationarity, self.primal, self.dual,
                   self.complementarity) <= self.tol

    def results(self) -> list:
        verdict = "pass" if self.passed else "fail"
        return [CheckResult("kkt", kind, getattr(self, kind), verdict)
                for kind in ("stationarity", "primal", "dual", "complementarity")]


def check_kkt(lp: LinearProgram, sol: Solution, tol: float = 1e-6) -> KktReport:
    """Maximum scale-normalized residuals of stationarity, primal/dual
    feasibility and complementary slackness."""
    x = np.array([sol.primal[c.id] for c in lp.columns])
    y = np.array([sol.dual.get(r.id, 0.0) for r in lp.rows])
    c = np.array([col.objective for col in lp.columns])

    activity = np.zeros(len(lp.rows))
    # z = c - A^T y computed alongside the activities
    z = c.copy()
    row_norm = np.ones(len(lp.rows))
    for r, cix, v in lp.entries:
        activity[r] += v * x[cix]
        z[cix] -= v * y[r]
        row_norm[r] = max(row_norm[r], abs(v))

    primal = dual = comp = 0.0
    for i, row in enumerate(lp.rows):
        scale = max(row_norm[i], abs(row.rhs))
        slack = row.rhs - activity[i]
        if row.sense == "=":
            primal = max(primal, abs(slack) / scale)
        elif row.sense == "<=":
            primal = max(primal, max(0.0, -slack) / scale)
            dual = max(dual, max(0.0, y[i]))
            comp = max(comp, abs(y[i] * slack) / scale)
        else:
            primal = max(primal, max(0.0, slack) / scale)
            dual = max(dual, max(0.0, -y[i]))
            comp = max(comp, abs(y[i] * slack) / scale)

    stat = 0.0
    for j, col in enumerate(lp.columns):
        scale = max(1.0, abs(c[j]))
        primal = max(primal,
                     max(0.0, col.lower - x[j]) if col.lower > -np.inf else 0.0,
                     max(0.0, x[j] - col.upper) if col.upper < np.inf else 0.0)
        at_lower = col.lower > -np.inf and x[j] - col.lower <= tol * max(1.0, abs(col.lower))
        at_upper = col.upper < np.inf and col.upper - x[j] <= tol * max(1.0, abs(col.upper))
        if at_lower and at_upper:
            continue
        if at_lower:
            stat = max(stat, max(0.0, -z[j]) / scale)
        elif at_upper:
            stat = max(stat, max(0.0, z[j]) / scale)
        else:
            stat = max(stat, abs(z[j]) / scale)
    return KktReport(stationarity=stat, primal=primal, dual=dual,
                     complementarity=comp, tol=tol)


# -- zero-profit checks -------------------------------------------------------------


def _co2_price(lp: LinearProgram, sol: Solution, policy: PolicyConfig) -> float:
    if lp.has_row("co2-cap"):
        return -sol.dual["co2-cap"]
    if isinstance(policy.co2, Co2Tax):
        return policy.co2.rate
    return 0.0


def check_zero_profit(system: PowerSystem, lp: LinearProgram, sol: Solution,
                      policy: PolicyConfig,
                      scope: tuple = ("generators", "storage", "lines"),
                      tol: float = DEFAULT_TOL) -> list:
    """Per-entity profit report: market revenue minus cost, corrected for the
    policy terms (premium, CO2 charge, scarcity rent) that apply to each
    entity.  The residual is zero at equilibrium."""
    results = []
    prices = nodal_prices(system, sol)
    mu_co2 = _co2_price(lp, sol, policy)
    support = policy.support
    support_set = set(policy.support_set())
    mu_gamma = sol.dual["vre-dispatched"] if lp.has_row("vre-dispatched") else 0.0
    mu_theta = sol.dual["vre-available"] if lp.has_row("vre-available") else 0.0

    if "generators" in scope:
        for node, spec in system.technologies:
            key = tech_key(spec.name, node)
            T = system.snapshots
            g = np.array([sol.primal[disp_col(spec.name, node, t)] for t in range(T)])
            G = sol.primal[gen_col(spec.name, node)]
            energy = float(g.sum())
            revenue = float((prices[node] * g).sum())
            cost = spec.annual_cost(system.discount_rate) * G \
                + spec.marginal_cost * energy
            adjust = -spec.emission_factor * mu_co2 * energy
            if spec.name in support_set:
                if isinstance(support, SupportDispatched):
                    adjust += mu_gamma * energy
                elif isinstance(support, SupportAvailable):
                    avail = sum(spec.availability_at(t) for t in range(T))
                    adjust += mu_theta * G * avail
                elif isinstance(support, FixedFip):
                    adjust += support.premium * energy
            scarcity = 0.0
            pot_row = tag_id("potential", key)
            if lp.has_row(pot_row):
                scarcity = -sol.dual[pot_row] * G   # mu_s^max >= 0
            residual = revenue - cost + adjust - scarcity
            scale = max(1.0, cost)
            results.append(CheckResult(
                "zero-profit", key, abs(residual) / scale,
                "pass" if abs(residual) <= tol * scale else "fail",
                detail={"revenue": revenue, "cost": cost, "adjustment": adjust,
                        "scarcity_rent": scarcity, "capacity": G}))

    if "storage" in scope and system.storages:
        arb = storage_arbitrage(system, sol, prices)
        costs = storage_cost(system, sol)
        for key in arb:
            residual = arb[key] - costs[key]
            scale = max(1.0, costs[key])
            results.append(CheckResult(
                "zero-profit-storage", key, abs(residual) / scale,
                "pass" if abs(residual) <= tol * scale else "fail",
                detail={"arbitrage_revenue": arb[key], "cost": costs[key]}))

    if "lines" in scope and system.lines:
        cong = congestion_revenue(system, sol, prices)
        costs = line_cost(system, sol)
        kvl_terms = _kvl_profit_terms(system, lp, sol)
        for li, line in enumerate(system.lines):
            if not line.expandable:
                continue
            key = f"L{li}"
            F = sol.primal[line_cap_col(li)]
            rent = sol.reduced_cost.get(line_cap_col(li), 0.0) * F
            residual = cong[key] - costs[key] + kvl_terms.get(key, 0.0) + rent
            scale = max(1.0, costs[key])
            results.append(CheckResult(
                "zero-profit-line", key, abs(residual) / scale,
                "pass" if abs(residual) <= tol * scale else "fail",
                detail={"congestion_revenue": cong[key], "cost": costs[key],
                        "kvl_term": kvl_terms.get(key, 0.0), "capacity": F,
                        "lower_bound_rent": rent}))
    return results


def _kvl_profit_terms(system: PowerSystem, lp: LinearProgram, sol: Solution) -> dict:
    """Cycle-dual distortion term per line: sum_t,c y_c C_lc x_l f_lt."""
    out: dict = {}
    cyc_rows = lp.row_ids("kvl-cycle")
    if not cyc_rows:
        return out
    cycles = cycle_basis(system.lines)
    T = system.snapshots
    for ci, cyc in enumerate(cycles):
        for t in range(T):
            y = sol.dual[tag_id("kvl-cycle", f"c{ci}", t)]
            if y == 0.0:
                continue
            for li, sign in cyc.items():
                x_l = system.lines[li].reactance
                f = sol.primal[flow_col(li, t)]
                out[f"L{li}"] = out.get(f"L{li}", 0.0) + y * sign * x_l * f
    return out


# -- policy-equivalence checks ---------------------------------------------------------


def _balance_dual_vector(system: PowerSystem, sol: Solution) -> np.ndarray:
    return np.concatenate([nodal_prices(system, sol)[n] for n in system.nodes])


def _perturbed_prices(lp: LinearProgram, system: PowerSystem,
                      scale: float = 1e-9) -> Optional[np.ndarray]:
    """Prices after a tiny distinct objective perturbation; None if the
    perturbed LP fails to solve (used only for degeneracy detection)."""
    plp = lp.copy()
    for j, col in enumerate(plp.columns):
        col.objective += scale * (j + 1) * max(1.0, abs(col.objective))
    psol = solve(plp)
    if psol.status != "optimal":
        return None
    return _balance_dual_vector(system, psol)


def _degenerate(lp: LinearProgram, system: PowerSystem, lam: np.ndarray,
                tol: float) -> bool:
    scale = max(1.0, float(np.abs(lam).max()))
    for eps in (1e-9, 1e-7):
        plam = _perturbed_prices(lp, system, eps)
        if plam is None or np.abs(plam - lam).max() > 10 * tol * scale:
            return True
    return False


def check_cap_tax_equivalence(system: PowerSystem, policy: PolicyConfig,
                              tol: float = DEFAULT_TOL, *,
                              enforce_kvl: bool = False) -> CheckResult:
    """Solve under the emissions cap, lift the cap into the objective at its
    shadow price, re-solve, and compare the full price vectors."""
    if not isinstance(policy.co2, Co2Cap):
        raise ValueError("check_cap_tax_equivalence requires a Co2Cap policy")
    lp = build_lp(system, policy, enforce_kvl=enforce_kvl)
    sol = solve(lp)
    if sol.status != "optimal":
        return CheckResult("cap-tax-equivalence", "system", float("nan"),
                           "inconclusive", {"reason": f"cap solve {sol.status}"})
    mu = -sol.dual["co2-cap"]
    emissions = sum(
        spec.emission_factor * sol.primal[disp_col(spec.name, node, t)]
        for node, spec in system.technologies for t in range(system.snapshots))
    tax_lp = apply_equivalence_substitution(lp, "co2-cap", mu)
    tax_sol = solve(tax_lp)
    if tax_sol.status != "optimal":
        return CheckResult("cap-tax-equivalence", "system", float("nan"),
                           "inconclusive", {"reason": f"tax solve {tax_sol.status}"})
    lam = _balance_dual_vector(system, sol)
    lam_tax = _balance_dual_vector(system, tax_sol)
    scale = max(1.0, float(np.abs(lam).max()))
    dev = float(np.abs(lam - lam_tax).max()) / scale
    obj_dev = abs(tax_sol.objective - (sol.objective + mu * emissions)) \
        / max(1.0, abs(sol.objective))
    residual = max(dev, obj_dev)
    if residual <= tol:
        verdict = "pass"
    elif _degenerate(lp, system, lam, tol):
        verdict = "inconclusive"
    else:
        verdict = "fail"
    return CheckResult("cap-tax-equivalence", "system", residual, verdict,
                       {"mu_co2": mu, "price_deviation": dev,
                        "objective_deviation": obj_dev, "emissions": emissions})


def check_subsidy_tax_lift(system: PowerSystem, policy: PolicyConfig,
                           tol: float = DEFAULT_TOL) -> CheckResult:
    """Replace 'force in the supported set' by 'cap everything else' and
    check that all prices and market values lift by exactly the premium."""
    support = policy.support
    if not isinstance(support, SupportDispatched):
        raise ValueError("check_subsidy_tax_lift requires SupportDispatched")
    lp = build_lp(system, policy)
    sol = solve(lp)
    if sol.status != "optimal":
        return CheckResult("subsidy-tax-lift", "system", float("nan"),
                           "inconclusive", {"reason": f"support solve {sol.status}"})
    mu_gamma = sol.dual["vre-dispatched"]
    gamma_energy = support.energy_target(system)

    mirror = build_lp(system, PolicyConfig(support=None, co2=policy.co2))
    mirror.add_row("vre-dispatched.mirror", "<=",
                   system.total_demand() - gamma_energy)
    support_set = set(support.technologies)
    for node, spec in system.technologies:
        if spec.name not in support_set:
            for t in range(system.snapshots):
                mirror.add_entry("vre-dispatched.mirror",
                                 disp_col(spec.name, node, t), 1.0)
    if system.voll is not None:
        for n in system.nodes:
            for t in range(system.snapshots):
                mirror.add_entry("vre-dispatched.mirror",
                                 disp_col(SHEDDING_NAME, n, t), 1.0)
    mirror_sol = solve(mirror)
    if mirror_sol.status != "optimal":
        return CheckResult("subsidy-tax-lift", "system", float("nan"),
                           "inconclusive", {"reason": f"mirror solve {mirror_sol.status}"})

    lam = _balance_dual_vector(system, sol)
    lam_m = _balance_dual_vector(system, mirror_sol)
    scale = max(1.0, abs(mu_gamma))
    price_dev = float(np.abs(lam_m - lam - mu_gamma).max()) / scale

    mv_dev = 0.0
    names = sorted({spec.name for _, spec in system.technologies})
    for name in names:
        mv = market_value(system, sol, name)
        mv_m = market_value(system, mirror_sol, name)
        if mv is None or mv_m is None:
            continue
        mv_dev = max(mv_dev, abs(mv_m - mv - mu_gamma) / scale)
    residual = max(price_dev, mv_dev)
    if residual <= tol:
        verdict = "pass"
    elif _degenerate(lp, system, lam, tol):
        verdict = "inconclusive"
    else:
        verdict = "fail"
    return CheckResult("subsidy-tax-lift", "system", residual, verdict,
                       {"mu_gamma": mu_gamma, "price_deviation": price_dev,
                        "mv_deviation": mv_dev})


# -- brute-force oracle ------------------------------------------------------------------


class OracleError(ValueError):
    pass


@dataclass
class OracleResult:
    status: str                       # optimal | infeasible
    objective: float = float("nan")
    prices: Optional[np.ndarray] = None        # per snapshot
    price_unique: Optional[np.ndarray] = None  # bool per snapshot
    capacities: dict = field(default_factory=dict)


_MAX_ORACLE_TECHS = 3
_MAX_ORACLE_SNAPSHOTS = 6


def brute_force_oracle(system: PowerSystem,
                       policy: Optional[PolicyConfig] = None) -> OracleResult:
    """Solver-independent optimum for tiny single-node systems.

    Enumerates every candidate capacity vertex (intersections of zero planes
    and merit-order coverage planes), evaluates the exact merit-order
    dispatch cost at each, and takes the minimum.  Prices are one-sided
    finite differences of the optimal value in the hourly demand, which are
    exact for a piecewise-linear value function; a price is flagged unique
    when left and right derivatives coincide.
    """
    if policy is not None and (policy.support is not None or policy.co2 is not None):
        raise OracleError("oracle supports no policy")
    if len(system.nodes) != 1 or system.storages or system.lines:
        raise OracleError("instance too large: oracle needs 1 node, no storage/network")
    k = len(system.technologies)
    T = system.snapshots
    if k > _MAX_ORACLE_TECHS or T > _MAX_ORACLE_SNAPSHOTS:
        raise OracleError("instance too large")
    node = system.nodes[0]
    d0 = np.array(system.demand[node], dtype=float)
    voll = system.voll

    specs = [spec for _, spec in system.technologies]
    c = np.array([s.annual_cost(system.discount_rate) for s in specs])
    o = np.array([s.marginal_cost for s in specs])
    avail = np.array([[s.availability_at(t) for t in range(T)] for s in specs])
    order = np.argsort(o, kind="stable")

    if voll is None:
        for t in range(T):
            if d0[t] > 0 and (k == 0 or avail[:, t].max() == 0.0):
                return OracleResult(status="infeasible")
    if k == 0:
        if voll is None:
            return OracleResult(status="optimal", objective=0.0,
                                prices=np.zeros(T), price_unique=np.ones(T, bool)) \
                if d0.max() == 0 else OracleResult(status="infeasible")
        obj = float(voll * d0.sum())
        return OracleResult(status="optimal", objective=obj,
                            prices=np.full(T, float(voll)),
                            price_unique=np.ones(T, bool))

    # hyperplanes a.G = rhs: zero planes and merit-order prefix coverage planes
    planes = []           # (a_row, kind, hour)   rhs = 0 or d[hour]
    for s in range(k):
        a = np.zeros(k)
        a[s] = 1.0
        planes.append((a, "zero", -1))
    for j in range(1, k + 1):
        prefix = order[:j]
        for t in range(T):
            a = np.zeros(k)
            a[prefix] = avail[prefix, t]
            if np.abs(a).max() == 0.0:
                continue
            planes.append((a, "demand", t))

    combos = []
    mats = []
    for combo in itertools.combinations(range(len(planes)), k):
        A = np.stack([planes[i][0] for i in combo])
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        combos.append(combo)
        mats.append(A)
    inv = np.linalg.inv(np.stack(mats))          # (ncomb, k, k)
    kinds = [[planes[i][1] for i in combo] for combo in combos]
    hours = [[planes[i][2] for i in combo] for combo in combos]

    def dispatch_cost(G: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Exact merit-order dispatch cost for a batch of capacity vectors."""
        total = np.zeros(G.shape[0])
        for t in range(T):
            residual = np.full(G.shape[0], d[t])
            for s in order:
                take = np.minimum(G[:, s] * avail[s, t], residual)
                total += o[s] * take
                residual -= take
            if voll is not None:
                total += voll * residual
            else:
                total += np.where(residual > 1e-9, np.inf, 0.0)
        return total

    def value(d: np.ndarray) -> float:
        b = np.array([[d[h] if kind == "demand" else 0.0
                       for kind, h in zip(ks, hs)]
                      for ks, hs in zip(kinds, hours)])
        G = np.einsum("nij,nj->ni", inv, b)
        ok = G.min(axis=1) >= -1e-9
        if not ok.any():
            return float("inf")
        G = np.clip(G[ok], 0.0, None)
        costs = G @ c + dispatch_cost(G, d)
        return float(costs.min())

    base = value(d0)
    if not np.isfinite(base):
        return OracleResult(status="infeasible")

    eps = 1e-5 * max(1.0, float(np.abs(d0).max()))
    prices = np.zeros(T)
    unique = np.zeros(T, dtype=bool)
    for t in range(T):
        e = np.zeros(T)
        e[t] = eps
        vr1, vr2 = value(d0 + e), value(d0 + 2 * e)
        right = (vr1 - base) / eps
        right_ok = np.isfinite(vr2) and abs((vr2 - vr1) / eps - right) <= 1e-6 * max(1.0, abs(right))
        if d0[t] >= 2 * eps:
            vl1, vl2 = value(d0 - e), value(d0 - 2 * e)
            left = (base - vl1) / eps
            left_ok = abs((vl1 - vl2) / eps - left) <= 1e-6 * max(1.0, abs(left))
        else:
            left, left_ok = right, right_ok
        prices[t] = right
        unique[t] = bool(right_ok and left_ok
                         and abs(left - right) <= 1e-6 * max(1.0, abs(right)))
    return OracleResult(status="optimal", objective=base, prices=prices,
                        price_unique=unique)


# -- aggregation -----------------------------------------------------------------------


def verify_solution(system: PowerSystem, lp: LinearProgram, sol: Solution,
                    policy: PolicyConfig, tol: float = DEFAULT_TOL) -> list:
    """Run the per-solution checks (KKT, zero profit) and return all results."""
    results = check_kkt(lp, sol, tol).results()
    results.extend(check_zero_profit(system, lp, sol, policy, tol=tol))
    return results


def report_to_json(results: list) -> str:
    return json.dumps(
        [{"check": r.check, "entity": r.entity, "residual": r.residual,
          "verdict": r.verdict, "detail": r.detail} for r in results],
        indent=2, sort_keys=True)
