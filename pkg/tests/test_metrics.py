import csv
import json

import numpy as np
import pytest

from powermarket.formulate import build_lp
from powermarket.metrics import (
    build_report,
    lcoe,
    load_weighted_price,
    market_value,
    nodal_prices,
    report_csv_rows,
    report_to_json,
    rmv,
    rmv_share_decomposition,
    suppress_negative_prices,
    tech_energy,
    write_report_csv,
)
from powermarket.model import (
    Co2Cap,
    PolicyConfig,
    PowerSystem,
    SupportDispatched,
    TechnologySpec,
)
from powermarket.solve import solve

from conftest import random_desk_system, two_tech_system


def solved(system, policy=PolicyConfig.none()):
    lp = build_lp(system, policy)
    sol = solve(lp)
    assert sol.status == "optimal"
    return lp, sol


class TestHeadlineMetrics:
    def test_mv_equals_lcoe_without_policy(self, desk_system):
        lp, sol = solved(desk_system)
        for name in ("wind", "solar", "ccgt", "ocgt"):
            energy = tech_energy(desk_system, sol, name)
            if energy <= 0.0:
                continue
            mv = market_value(desk_system, sol, name)
            lc = lcoe(desk_system, sol, name)
            assert mv == pytest.approx(lc, rel=1e-6)

    def test_mv_none_for_unbuilt_tech(self):
        system = two_tech_system(wind_capex=1e9)
        lp, sol = solved(system)
        assert market_value(system, sol, "wind") is None
        assert lcoe(system, sol, "wind") is None

    def test_support_drives_wedge_between_mv_and_lcoe(self):
        system = two_tech_system()
        policy = PolicyConfig(support=SupportDispatched(("wind",), share=0.85))
        lp, sol = solved(system, policy)
        mu = sol.dual["vre-dispatched"]
        assert mu > 1e-6
        assert market_value(system, sol, "wind") == pytest.approx(
            lcoe(system, sol, "wind") - mu, rel=1e-6)

    def test_co2_cap_wedge_per_emission_factor(self, desk_system):
        lp, sol = solved(desk_system, PolicyConfig(co2=Co2Cap(900.0)))
        mu = -sol.dual["co2-cap"]
        assert mu > 0.0
        for _, spec in desk_system.technologies:
            if tech_energy(desk_system, sol, spec.name) <= 0.0:
                continue
            mv = market_value(desk_system, sol, spec.name)
            lc = lcoe(desk_system, sol, spec.name)
            assert mv == pytest.approx(lc + spec.emission_factor * mu, rel=1e-6)


class TestRmv:
    def test_single_tech_rmv_is_one(self):
        gas = TechnologySpec(name="gas", capex=50.0, lifetime=1.0,
                             variable_cost=10.0)
        system = PowerSystem(nodes=("N",), snapshots=6,
                             demand={"N": (5.0, 7.0, 9.0, 4.0, 8.0, 6.0)},
                             technologies=(("N", gas),), discount_rate=0.0)
        lp, sol = solved(system)
        assert rmv(system, sol, "gas") == 1.0

    def test_share_decomposition_matches(self, desk_system):
        lp, sol = solved(desk_system)
        for name in ("wind", "solar", "ccgt", "ocgt"):
            r = rmv(desk_system, sol, name)
            d = rmv_share_decomposition(desk_system, sol, name)
            if r is None:
                assert d is None
                continue
            assert r == pytest.approx(d, rel=1e-6)


class TestSuppression:
    def test_suppressed_mv_dominates_raw(self):
        system = two_tech_system()
        policy = PolicyConfig(support=SupportDispatched(("wind",), share=0.9))
        lp, sol = solved(system, policy)
        raw = market_value(system, sol, "wind")
        sup = suppress_negative_prices(system, sol)
        assert min(sup.prices["N"]) >= 0.0
        assert sup.market_values["wind"] >= raw
        assert sup.market_values["wind"] >= 0.0

    def test_noop_when_prices_positive(self, desk_system):
        lp, sol = solved(desk_system)
        sup = suppress_negative_prices(desk_system, sol)
        assert np.allclose(sup.prices["N"], nodal_prices(desk_system, sol)["N"])


class TestReport:
    def test_report_fields_and_json(self, desk_system):
        lp, sol = solved(desk_system)
        report = build_report(desk_system, lp, sol, PolicyConfig.none(),
                              suppress_negative=True)
        doc = json.loads(report_to_json(report))
        assert set(doc["technologies"]) >= {"wind", "solar", "ccgt", "ocgt"}
        assert doc["mu_gamma"] is None and doc["mu_co2"] is None
        assert doc["suppressed"] is not None
        assert doc["average_system_cost"] > 0.0
        assert len(doc["price_duration"]["N"]) == desk_system.snapshots
        prices = doc["price_duration"]["N"]
        assert prices == sorted(prices, reverse=True)

    def test_total_cost_identity(self, desk_system):
        # payments by consumers equal total system cost without policy
        lp, sol = solved(desk_system)
        prices = nodal_prices(desk_system, sol)["N"]
        payments = float(np.dot(prices, desk_system.demand["N"]))
        assert payments == pytest.approx(sol.objective, rel=1e-8)

    def test_csv_output_is_stable(self, tmp_path, desk_system):
        lp, sol = solved(desk_system)
        report = build_report(desk_system, lp, sol, PolicyConfig.none())
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_report_csv(report, p1, scenario="x")
        write_report_csv(report, p2, scenario="x")
        assert p1.read_bytes() == p2.read_bytes()
        rows = list(csv.DictReader(open(p1)))
        assert {r["technology"] for r in rows} >= {"wind", "solar"}

    def test_load_weighted_price_uses_demand(self, desk_system):
        lp, sol = solved(desk_system)
        prices = nodal_prices(desk_system, sol)["N"]
        d = np.array(desk_system.demand["N"])
        expected = float(np.dot(prices, d) / d.sum())
        assert load_weighted_price(desk_system, sol) == pytest.approx(expected)
