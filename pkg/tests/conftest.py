"""Shared instance builders for the test suite.

Desk-scale systems treat their snapshot horizon as the full costing period,
so capex values are small compared to utility-scale numbers.  Marginal costs
get distinct sub-micro perturbations to keep the LPs nondegenerate (unique
duals), which the equivalence checks rely on.
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from powermarket.model import (
    PowerSystem,
    StorageSpec,
    TechnologySpec,
    synth_profiles,
)

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def scenario_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, name)


def two_tech_system(snapshots: int = 168, wind_capex: float = 30000.0,
                    gas_capex: float = 11500.0) -> PowerSystem:
    """Wind plus gas on one node; the workhorse for support-policy sweeps."""
    wind = TechnologySpec(name="wind", capex=wind_capex, lifetime=25.0,
                          availability=synth_profiles(7, snapshots,
                                                      "wind-autocorrelated"))
    gas = TechnologySpec(name="gas", capex=gas_capex, lifetime=25.0,
                         fuel_cost=50.0, efficiency=0.39,
                         emission_factor=0.2 / 0.39)
    rng = np.random.default_rng(11)
    demand = tuple(100.0 + 20.0 * np.sin(np.arange(snapshots) * np.pi / 12.0)
                   + rng.normal(0.0, 3.0, snapshots))
    return PowerSystem(nodes=("N",), snapshots=snapshots,
                       demand={"N": demand},
                       technologies=(("N", wind), ("N", gas)))


def random_desk_system(seed: int, snapshots: int = 120) -> PowerSystem:
    """Seeded single-node desk system with VRE plus two thermal techs.

    Marginal costs carry distinct perturbations of order 1e-7 EUR/MWh so
    that dispatch merit order and duals are unique.
    """
    rng = np.random.default_rng(seed)
    techs = []
    wind = TechnologySpec(
        name="wind", capex=float(rng.uniform(15000.0, 40000.0)), lifetime=25.0,
        variable_cost=1e-7,
        availability=synth_profiles(seed + 1, snapshots, "wind-autocorrelated"))
    solar = TechnologySpec(
        name="solar", capex=float(rng.uniform(6000.0, 15000.0)), lifetime=25.0,
        variable_cost=2e-7,
        availability=synth_profiles(seed + 2, snapshots, "solar-diurnal"))
    ccgt = TechnologySpec(
        name="ccgt", capex=float(rng.uniform(15000.0, 25000.0)), lifetime=25.0,
        fuel_cost=float(rng.uniform(20.0, 30.0)), efficiency=0.58,
        variable_cost=3e-7, emission_factor=0.2 / 0.58)
    ocgt = TechnologySpec(
        name="ocgt", capex=float(rng.uniform(9000.0, 14000.0)), lifetime=25.0,
        fuel_cost=float(rng.uniform(45.0, 60.0)), efficiency=0.39,
        variable_cost=4e-7, emission_factor=0.2 / 0.39)
    techs = [("N", wind), ("N", solar), ("N", ccgt), ("N", ocgt)]
    demand = tuple(100.0
                   + 25.0 * np.sin(np.arange(snapshots) * np.pi / 12.0 + rng.uniform(0, 6))
                   + rng.normal(0.0, 4.0, snapshots))
    return PowerSystem(nodes=("N",), snapshots=snapshots,
                       demand={"N": demand}, technologies=tuple(techs))


def tiny_instance(seed: int) -> PowerSystem:
    """O(1)-scale instance small enough for the enumeration oracle."""
    rng = np.random.default_rng(seed)
    n_techs = int(rng.integers(1, 4))
    snapshots = int(rng.integers(2, 7))
    techs = []
    for i in range(n_techs):
        avail = None
        if rng.random() < 0.5:
            avail = tuple(np.round(rng.uniform(0.05, 1.0, snapshots), 6).tolist())
        techs.append(("N", TechnologySpec(
            name=f"t{i}", capex=float(np.round(rng.uniform(0.5, 8.0), 6)),
            lifetime=1.0, variable_cost=float(np.round(rng.uniform(0.1, 10.0), 6)),
            availability=avail)))
    demand = tuple(np.round(rng.uniform(0.5, 5.0, snapshots), 6).tolist())
    return PowerSystem(nodes=("N",), snapshots=snapshots, demand={"N": demand},
                       technologies=tuple(techs), voll=50.0, discount_rate=0.0)


def flexible_system(snapshots: int = 168) -> PowerSystem:
    """VRE + gas + battery + hydrogen storage on one node."""
    base = random_desk_system(3, snapshots)
    battery = StorageSpec(name="battery", capex_discharge=6386.3,
                          capex_energy=3202.74, lifetime=20.0,
                          eta_discharge=0.9, eta_charge=0.9)
    hydrogen = StorageSpec(name="hydrogen", capex_discharge=15342.47,
                           capex_charge=14383.56, capex_energy=9.59,
                           lifetime=25.0, eta_discharge=0.58, eta_charge=0.8)
    return PowerSystem(nodes=base.nodes, snapshots=base.snapshots,
                       demand=base.demand, technologies=base.technologies,
                       storages=(("N", battery), ("N", hydrogen)))


@pytest.fixture
def desk_system():
    return random_desk_system(0)
