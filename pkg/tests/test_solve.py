import pytest

from powermarket.formulate import LinearProgram, build_lp
from powermarket.model import PolicyConfig, PowerSystem, TechnologySpec
from powermarket.solve import (
    SolveError,
    solve,
    solve_external,
    write_solution_file,
)


def one_tech_two_hours():
    gas = TechnologySpec(name="gas", capex=0.0, lifetime=1.0, fixed_om=100.0,
                         variable_cost=10.0)
    return PowerSystem(nodes=("N",), snapshots=2, demand={"N": (100.0, 50.0)},
                       technologies=(("N", gas),), discount_rate=0.0)


class TestSolve:
    def test_trivial_bound(self):
        lp = LinearProgram()
        lp.add_column("x", lower=3.0, objective=1.0)
        sol = solve(lp)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(3.0)
        assert sol.primal["x"] == pytest.approx(3.0)

    def test_single_tech_duals(self):
        # capacity pinned by the peak hour: the peak price carries the
        # annualized capacity cost, the off-peak price the marginal cost,
        # so the price sum is c + 2 o = 120
        lp = build_lp(one_tech_two_hours(), PolicyConfig.none())
        sol = solve(lp)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(11_500.0)
        assert sol.price("N", 0) == pytest.approx(110.0)
        assert sol.price("N", 1) == pytest.approx(10.0)

    def test_reduced_cost_of_unbuilt_column(self):
        lp = LinearProgram()
        lp.add_column("x", lower=0.0, objective=1.0)
        lp.add_column("y", lower=0.0, objective=3.0)
        lp.add_row("cover", ">=", 5.0)
        lp.add_entry("cover", "x", 1.0)
        lp.add_entry("cover", "y", 1.0)
        sol = solve(lp)
        assert sol.primal["y"] == 0.0
        # y's cost exceeds the row price by 2
        assert sol.reduced_cost["y"] == pytest.approx(2.0)
        assert sol.dual["cover"] == pytest.approx(1.0)

    def test_infeasible_status(self):
        lp = LinearProgram()
        lp.add_column("x", lower=0.0, upper=1.0, objective=1.0)
        lp.add_row("need", ">=", 5.0)
        lp.add_entry("need", "x", 1.0)
        sol = solve(lp)
        assert sol.status == "infeasible"

    def test_unbounded_status(self):
        lp = LinearProgram()
        lp.add_column("x", lower=float("-inf"), objective=1.0)
        sol = solve(lp)
        assert sol.status == "unbounded"


class TestSolutionFiles:
    def test_round_trip(self, tmp_path):
        lp = build_lp(one_tech_two_hours(), PolicyConfig.none())
        sol = solve(lp)
        path = tmp_path / "model.sol"
        write_solution_file(sol, path)
        back = solve_external(lp, path)
        assert back.objective == pytest.approx(sol.objective, rel=1e-12)
        assert back.primal == sol.primal
        assert back.dual == sol.dual

    def test_unknown_column_is_rejected(self, tmp_path):
        lp = build_lp(one_tech_two_hours(), PolicyConfig.none())
        path = tmp_path / "bad.sol"
        path.write_text("status optimal\ncol g.phantom.t0 1.0\n")
        with pytest.raises(SolveError, match="unmatched tag"):
            solve_external(lp, path)

    def test_missing_duals_are_rejected(self, tmp_path):
        lp = build_lp(one_tech_two_hours(), PolicyConfig.none())
        sol = solve(lp)
        path = tmp_path / "primal_only.sol"
        with open(path, "w") as fh:
            fh.write("status optimal\n")
            for cid, v in sorted(sol.primal.items()):
                fh.write(f"col {cid} {v!r}\n")
        with pytest.raises(SolveError, match="dual"):
            solve_external(lp, path)

    def test_external_duals_feed_the_checks(self, tmp_path, desk_system):
        from powermarket.verify import check_kkt

        lp = build_lp(desk_system, PolicyConfig.none())
        sol = solve(lp)
        path = tmp_path / "ext.sol"
        write_solution_file(sol, path)
        ext = solve_external(lp, path)
        assert check_kkt(lp, ext).passed
