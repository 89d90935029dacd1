import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtrecovery.analysis import (CSV_COLUMNS, adaptive_study, dorfler_mark,
                                 error_report, estimator, fit_order,
                                 fitted_orders, recovered_error, uniform_study,
                                 write_orders, write_table_csv)
from rtrecovery.problems import get_problem, initial_mesh, smooth_square_problem
from rtrecovery.quadrature import triangle_rule
from rtrecovery.recovery import recover
from rtrecovery.solver import solve_mixed
from rtrecovery.spaces import bary_lagrange_values

# Reference convergence history of the order-1 method on the unit square,
# used to pin the fitting conventions: dof counts follow 2 E + 5 T with
# E = (3 T + 16 2^level) / 2 on the nested hierarchy T = 86 4^level.
REF_NDOF = [704, 2784, 11072, 44160, 176384]
REF_E_P = [3.176e-1, 8.000e-2, 2.006e-2, 5.022e-3, 1.256e-3]
REF_E_CLOSE = [4.297e-2, 7.852e-3, 1.397e-3, 2.461e-4, 4.336e-5]
REF_E_REC = [5.186e-1, 5.560e-2, 5.344e-3, 4.929e-4, 4.616e-5]


# -- order fitting ------------------------------------------------------------


def test_fit_order_exact_power_law():
    ndofs = [100, 400, 1600, 6400]
    errors = [10.0 * n ** -1.5 for n in ndofs]
    assert fit_order(errors, ndofs) == pytest.approx(3.0, abs=1e-12)


def test_fit_order_input_validation():
    with pytest.raises(ValueError):
        fit_order([1.0], [100])
    with pytest.raises(ValueError):
        fit_order([1.0, 0.0], [100, 400])
    with pytest.raises(ValueError):
        fit_order([1.0, 0.5], [100, -1])


def test_fit_order_on_reference_history():
    # rates of the pinned history, coarsest level dropped: the raw flux
    # converges at order two, the interpolant distance near 2.5, and the
    # recovered flux near 3.42
    assert fit_order(REF_E_P[1:], REF_NDOF[1:]) == pytest.approx(2.00, abs=0.02)
    assert fit_order(REF_E_CLOSE[1:], REF_NDOF[1:]) == pytest.approx(2.51, abs=0.02)
    assert fit_order(REF_E_REC[1:], REF_NDOF[1:]) == pytest.approx(3.42, abs=0.02)


def test_fitted_orders_skips_coarsest_when_long(square_mesh_86):
    class Rep:
        def __init__(self, ndof, e):
            self.ndof = ndof
            self.e_p = self.e_div = self.e_close = self.e_rec = self.e_u = self.eta = e

    reps = [Rep(n, e) for n, e in zip(REF_NDOF, REF_E_REC)]
    full = fitted_orders(reps, skip_coarsest=False)
    skipped = fitted_orders(reps)
    assert full["e_rec"] == pytest.approx(3.386, abs=0.01)
    assert skipped["e_rec"] == pytest.approx(3.422, abs=0.01)
    # two-point histories are never truncated
    assert fitted_orders(reps[:2])["e_p"] == fitted_orders(reps[:2], False)["e_p"]


# -- marking ------------------------------------------------------------------


def test_dorfler_marks_minimal_prefix():
    etas = np.sqrt(np.array([9.0, 4.0, 1.0]) / 14.0)
    assert dorfler_mark(etas, 0.3).tolist() == [0]
    assert dorfler_mark(etas, 0.9).tolist() == [0, 1]
    assert dorfler_mark(etas, 0.99).tolist() == [0, 1, 2]


def test_dorfler_orders_by_size_not_index():
    etas = np.array([0.1, 3.0, 0.2])
    assert dorfler_mark(etas, 0.5).tolist() == [1]


def test_dorfler_all_zero_empty():
    assert dorfler_mark(np.zeros(7), 0.4).size == 0


def test_dorfler_theta_validation():
    with pytest.raises(ValueError):
        dorfler_mark(np.ones(3), 0.0)
    with pytest.raises(ValueError):
        dorfler_mark(np.ones(3), 1.0)


@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=20),
       st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_dorfler_reaches_theta_minimally(vals, theta):
    etas = np.array(vals)
    total = float(np.sum(etas ** 2))
    marked = dorfler_mark(etas, theta)
    if total == 0.0:
        assert marked.size == 0
        return
    got = float(np.sum(etas[marked] ** 2))
    assert got >= theta * total - 1e-12 * total
    if marked.size:
        smallest = np.min(etas[marked] ** 2)
        assert got - smallest < theta * total + 1e-12 * total


# -- estimator and reports ----------------------------------------------------


@pytest.fixture(scope="module")
def small_solution():
    problem = smooth_square_problem()
    mesh = initial_mesh(1)
    sol = solve_mixed(mesh, 1, problem)
    rec = recover(sol.flux)
    etas = estimator(sol.flux, rec)
    return problem, mesh, sol, rec, etas


def test_estimator_matches_direct_quadrature(small_solution):
    problem, mesh, sol, rec, etas = small_solution
    rule = triangle_rule(12)
    diff = rec.eval_cells(rule.points) - sol.flux.eval_cells(rule.points)
    areas = mesh.geometry_tables()["area"]
    direct = np.sqrt(np.einsum("q,mqc,mqc->m", rule.weights, diff, diff) * areas)
    assert etas == pytest.approx(direct, rel=1e-10)


def test_error_report_consistency(small_solution):
    problem, mesh, sol, rec, etas = small_solution
    rep = error_report(0, sol, problem, rec, etas)
    assert rep.eta == pytest.approx(float(np.sqrt(np.sum(etas ** 2))), rel=1e-12)
    assert rep.efficiency == pytest.approx(rep.eta / rep.e_p, rel=1e-12)
    assert rep.nt == mesh.num_triangles
    assert rep.ndof == sol.ndof
    assert rep.e_rec == pytest.approx(recovered_error(rec, problem.exact_p), rel=1e-12)
    assert rep.e_rec > 0.0 and np.isfinite(rep.e_rec)


# -- studies ------------------------------------------------------------------


def test_uniform_study_shapes_and_decay():
    problem = smooth_square_problem()
    reports = uniform_study(problem, initial_mesh(1), 0, "regular", 3)
    assert [rep.level for rep in reports] == [0, 1, 2]
    assert [rep.nt for rep in reports] == [86, 344, 1376]
    assert reports[1].e_p < reports[0].e_p
    assert reports[2].e_p < 0.6 * reports[1].e_p
    assert all(rep.efficiency > 0 for rep in reports)


def test_uniform_study_bisection_refiner():
    problem = smooth_square_problem()
    reports = uniform_study(problem, initial_mesh(1), 0, "bisection", 2)
    assert [rep.nt for rep in reports] == [86, 344]
    with pytest.raises(KeyError):
        uniform_study(problem, initial_mesh(1), 0, "octasection", 2)


def test_adaptive_study_budget_and_growth():
    problem = get_problem(3)
    reports = adaptive_study(problem, initial_mesh(3), 0, theta=0.3, max_ndof=2500)
    ndofs = [rep.ndof for rep in reports]
    assert all(b > a for a, b in zip(ndofs, ndofs[1:]))
    assert ndofs[-1] >= 2500 or len(reports) == 1
    assert ndofs[-2] < 2500
    assert all(np.isfinite(rep.eta) and rep.eta > 0 for rep in reports)


def test_adaptive_study_returns_meshes():
    problem = get_problem(3)
    reports, meshes = adaptive_study(problem, initial_mesh(3), 0, theta=0.3,
                                     max_ndof=1200, return_meshes=True)
    assert len(meshes) == len(reports)
    assert all(m.num_triangles == rep.nt for m, rep in zip(meshes, reports))


# -- serialization ------------------------------------------------------------


def test_table_csv_format(tmp_path, small_solution):
    problem, mesh, sol, rec, etas = small_solution
    rep = error_report(0, sol, problem, rec, etas)
    path = tmp_path / "table.csv"
    write_table_csv(path, [rep])
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    fields = lines[1].split(",")
    assert fields[0] == "0"
    assert fields[1] == str(mesh.num_triangles)
    assert fields[2] == str(sol.ndof)
    # every float cell uses the 4 significant digit exponent format
    for cell in fields[3:]:
        assert len(cell.split("e")[0].replace("-", "").replace(".", "")) == 4
        float(cell)


def test_orders_file_format(tmp_path):
    class Rep:
        def __init__(self, ndof, e):
            self.ndof = ndof
            self.e_p = self.e_div = self.e_close = self.e_rec = self.e_u = self.eta = e

    reps = [Rep(n, e) for n, e in zip(REF_NDOF, REF_E_P)]
    path = tmp_path / "orders.txt"
    write_orders(path, reps)
    lines = path.read_text().splitlines()
    assert lines[0] == "column p"
    parsed = dict(line.split() for line in lines[1:])
    assert set(parsed) == {"e_p", "e_div", "e_close", "e_rec", "e_u", "eta"}
    assert float(parsed["e_p"]) == pytest.approx(2.00, abs=0.01)
