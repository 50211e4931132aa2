#!/usr/bin/env python3
"""Solve the three two-day scenarios and compare prices and market values.

The three bundled scenarios share one system (solar plus lignite/coal/OCGT
on a 48 h demand shape) and differ only in policy: none, a dispatched-energy
quota on solar, and a CO2 cap tuned to the same solar share.  The comparison
shows the headline effect: the quota produces negative prices in the
solar-curtailment hours, the cap produces zero prices there and lifts the
fossil-hour prices instead.
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from powermarket.formulate import build_lp
from powermarket.metrics import lcoe, market_value, nodal_prices, tech_energy
from powermarket.scenario import load_scenario
from powermarket.solve import solve

SCENARIOS = ("fig1_no_policy.json", "fig1_support.json", "fig1_co2_cap.json")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario-dir",
                        default=os.path.join(os.path.dirname(__file__), "..",
                                             "scenarios"))
    args = parser.parse_args()

    for name in SCENARIOS:
        system, policy, options = load_scenario(
            os.path.join(args.scenario_dir, name))
        lp = build_lp(system, policy)
        sol = solve(lp)
        if sol.status != "optimal":
            print(f"{name}: {sol.status}")
            continue
        lam = nodal_prices(system, sol)["DE"]
        share = tech_energy(system, sol, "solar") / system.total_demand()
        print(f"\n=== {options['name']} ===")
        print(f"  solar share          {share:8.4f}")
        print(f"  price min/mean/max   {lam.min():8.2f} {lam.mean():8.2f} "
              f"{lam.max():8.2f}  EUR/MWh")
        print(f"  negative-price hours {int((lam < -1e-6).sum()):8d}")
        print(f"  zero-price hours     {int((np.abs(lam) <= 1e-6).sum()):8d}")
        for tech in ("solar", "lignite", "coal", "ocgt"):
            mv = market_value(system, sol, tech)
            lc = lcoe(system, sol, tech)
            if mv is None:
                print(f"  {tech:<8} not built")
            else:
                print(f"  {tech:<8} MV {mv:8.2f}  LCOE {lc:8.2f}  EUR/MWh")
    return 0


if __name__ == "__main__":
    sys.exit(main())
