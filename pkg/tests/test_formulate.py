import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from powermarket.formulate import (
    EntityTag,
    FormulationError,
    apply_equivalence_substitution,
    build_lp,
    cycle_basis,
    disp_col,
    gen_col,
    parse_mps,
    tag_id,
    write_mps,
)
from powermarket.model import (
    Co2Cap,
    Co2Tax,
    LineSpec,
    PolicyConfig,
    PowerSystem,
    SupportDispatched,
    TechnologySpec,
)

from conftest import random_desk_system


def simple_system(snapshots=4):
    gas = TechnologySpec(name="gas", capex=100.0, lifetime=1.0,
                         variable_cost=10.0, emission_factor=0.4)
    return PowerSystem(nodes=("N",), snapshots=snapshots,
                       demand={"N": tuple([50.0] * snapshots)},
                       technologies=(("N", gas),), discount_rate=0.0)


class TestEntityTag:
    def test_id_round_trip(self):
        tag = EntityTag("gen-upper", "wind@N", 17)
        assert EntityTag.parse(tag.to_id()) == tag

    def test_family_only(self):
        assert EntityTag.parse("co2-cap") == EntityTag("co2-cap", None, None)

    @given(family=st.sampled_from(["balance", "gen-upper", "store-soc"]),
           entity=st.from_regex(r"[A-Za-z0-9_@+-]+", fullmatch=True),
           snapshot=st.integers(0, 10000))
    def test_round_trip_property(self, family, entity, snapshot):
        tag = EntityTag(family, entity, snapshot)
        assert EntityTag.parse(tag.to_id()) == tag


class TestBuildLp:
    def test_row_and_column_counts(self):
        system = simple_system(4)
        lp = build_lp(system, PolicyConfig.none())
        # columns: 1 capacity + 4 dispatch + 4 shedding
        assert len(lp.columns) == 9
        # rows: 4 balance + 4 dispatch-capacity links
        assert len(lp.rows) == 8

    def test_policy_rows_present(self):
        system = random_desk_system(0)
        policy = PolicyConfig(support=SupportDispatched(("wind",), share=0.3),
                              co2=Co2Cap(100.0))
        lp = build_lp(system, policy)
        assert lp.has_row("vre-dispatched")
        assert lp.has_row("co2-cap")
        assert lp.rows[lp.row_index("vre-dispatched")].sense == ">="
        assert lp.rows[lp.row_index("co2-cap")].sense == "<="

    def test_tax_shifts_objective_not_rows(self):
        system = simple_system()
        lp_none = build_lp(system, PolicyConfig.none())
        lp_tax = build_lp(system, PolicyConfig(co2=Co2Tax(50.0)))
        assert not lp_tax.has_row("co2-cap")
        g = disp_col("gas", "N", 0)
        o_none = lp_none.column(g).objective
        o_tax = lp_tax.column(g).objective
        assert o_tax - o_none == pytest.approx(0.4 * 50.0)

    def test_invalid_system_raises_with_diagnostics(self):
        system = PowerSystem(nodes=("N",), snapshots=2, demand={},
                             technologies=())
        with pytest.raises(FormulationError, match="demand"):
            build_lp(system, PolicyConfig.none())

    def test_kvl_needs_reactance(self):
        gas = TechnologySpec(name="gas", capex=10.0, lifetime=1.0)
        lines = (LineSpec("A", "B", existing_capacity=10.0),
                 LineSpec("B", "C", existing_capacity=10.0),
                 LineSpec("A", "C", existing_capacity=10.0))
        system = PowerSystem(nodes=("A", "B", "C"), snapshots=1,
                             demand={"A": (1.0,), "B": (1.0,), "C": (1.0,)},
                             technologies=(("A", gas),), lines=lines)
        with pytest.raises(FormulationError, match="reactance"):
            build_lp(system, PolicyConfig.none(), enforce_kvl=True)


class TestCycleBasis:
    @staticmethod
    def assert_closed(lines, cycle):
        """Walking the signed edges of a cycle must return to the start."""
        nodes = sorted({l.from_node for l in lines} | {l.to_node for l in lines})
        idx = {n: i for i, n in enumerate(nodes)}
        net = np.zeros(len(nodes))
        for li, sign in cycle.items():
            net[idx[lines[li].to_node]] += sign
            net[idx[lines[li].from_node]] -= sign
        assert np.abs(net).max() == 0

    def test_triangle(self):
        lines = (LineSpec("A", "B"), LineSpec("B", "C"), LineSpec("A", "C"))
        cycles = cycle_basis(lines)
        assert len(cycles) == 1
        assert set(cycles[0]) == {0, 1, 2}
        self.assert_closed(lines, cycles[0])

    def test_two_triangles_share_an_edge(self):
        lines = (LineSpec("A", "B"), LineSpec("B", "C"), LineSpec("A", "C"),
                 LineSpec("C", "D"), LineSpec("B", "D"))
        cycles = cycle_basis(lines)
        assert len(cycles) == 2
        for cyc in cycles:
            self.assert_closed(lines, cyc)

    def test_tree_has_no_cycles(self):
        lines = (LineSpec("A", "B"), LineSpec("B", "C"), LineSpec("B", "D"))
        assert cycle_basis(lines) == []

    def test_parallel_lines_form_a_cycle(self):
        lines = (LineSpec("A", "B"), LineSpec("A", "B"))
        cycles = cycle_basis(lines)
        assert len(cycles) == 1
        self.assert_closed(lines, cycles[0])


class TestEquivalenceSubstitution:
    def test_cap_row_becomes_objective_shift(self):
        # gas with e=0.4 and o=90 under mu=50 gets an effective o of 110
        gas = TechnologySpec(name="gas", capex=100.0, lifetime=1.0,
                             variable_cost=90.0, emission_factor=0.4)
        system = PowerSystem(nodes=("N",), snapshots=2,
                             demand={"N": (10.0, 10.0)},
                             technologies=(("N", gas),), discount_rate=0.0)
        lp = build_lp(system, PolicyConfig(co2=Co2Cap(5.0)))
        sub = apply_equivalence_substitution(lp, "co2-cap", 50.0)
        assert not sub.has_row("co2-cap")
        assert sub.column(disp_col("gas", "N", 0)).objective == pytest.approx(110.0)
        # original LP untouched
        assert lp.has_row("co2-cap")
        assert lp.column(disp_col("gas", "N", 0)).objective == pytest.approx(90.0)


class TestMpsRoundTrip:
    def test_identity_round_trip(self, tmp_path, desk_system):
        policy = PolicyConfig(support=SupportDispatched(("wind",), share=0.4),
                              co2=Co2Cap(1234.5))
        lp = build_lp(desk_system, policy)
        path = tmp_path / "model.mps"
        write_mps(lp, path)
        back = parse_mps(path)
        assert [c.id for c in back.columns] == [c.id for c in lp.columns]
        assert [(r.id, r.sense, r.rhs) for r in back.rows] == \
            [(r.id, r.sense, r.rhs) for r in lp.rows]
        assert sorted(back.entries) == sorted(lp.entries)
        for a, b in zip(lp.columns, back.columns):
            assert (a.lower, a.upper, a.objective) == (b.lower, b.upper, b.objective)

    def test_free_and_bounded_columns_survive(self, tmp_path):
        gas = TechnologySpec(name="gas", capex=10.0, lifetime=1.0)
        lines = (LineSpec("A", "B", existing_capacity=5.0),)
        system = PowerSystem(nodes=("A", "B"), snapshots=2,
                             demand={"A": (1.0, 2.0), "B": (3.0, 4.0)},
                             technologies=(("A", gas),), lines=lines)
        lp = build_lp(system, PolicyConfig.none())
        path = tmp_path / "net.mps"
        write_mps(lp, path)
        back = parse_mps(path)
        fcol = back.column("f.L0.t0")
        assert fcol.lower == float("-inf") and fcol.upper == float("inf")
