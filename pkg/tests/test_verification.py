import numpy as np
import pytest

from wavesim.discretization import build_grid
from wavesim.model import DataKind, example_spec
from wavesim.timestepper import Trajectory, run_simulation
from wavesim.verification import (
    error_norms,
    exact_solution,
    reproduce_table1,
    reproduce_table2,
    surface_data,
    worker_count,
)


def exact_trajectory(grid):
    X, Tt = np.meshgrid(grid.x, grid.t)
    u, v = exact_solution(X, Tt)
    K = grid.K
    U = np.concatenate((u[:, 1:], np.zeros((len(grid.t), K))), axis=1)
    V = np.concatenate((v[:, :-1], np.zeros((len(grid.t), K))), axis=1)
    return Trajectory(U, V, 0)


class TestExact:
    @pytest.mark.parametrize("t,expected", [(4.0, 1.54436330e-3), (8.0, 2.82860006e-5),
                                            (12.0, 5.18076174e-7)])
    def test_printed_values(self, t, expected):
        assert exact_solution(0.8, t)[0] == pytest.approx(expected, rel=1e-8)

    def test_boundaries(self):
        t = np.linspace(0, 5, 7)
        assert not np.any(exact_solution(0.0, t)[0])
        assert not np.any(exact_solution(1.0, t)[1])


class TestErrorNorms:
    def test_exact_trajectory_has_no_error(self):
        g = build_grid(10, 8, 2)
        rep = error_norms(exact_trajectory(g), g)
        assert rep.err_u == 0 and rep.err_v == 0

    def test_index_ranges(self):
        g = build_grid(4, 3, 1)
        traj = exact_trajectory(g)
        # errors outside the scanned ranges must be ignored
        traj.U[0, 0] += 1.0      # n = 0 excluded for u
        traj.V[-1, 0] += 1.0     # n = N excluded for v
        rep = error_norms(traj, g)
        assert rep.err_u == 0 and rep.err_v == 0
        traj.U[1, 3] += 0.5      # k = K, n = 1
        traj.V[0, 0] += 0.25     # k = 0, n = 0
        rep = error_norms(traj, g)
        assert rep.err_u == pytest.approx(0.5) and rep.err_v == pytest.approx(0.25)

    def test_convergence_ratio(self):
        reps = reproduce_table2([(50, 50), (100, 100), (200, 200)], workers=1)
        for a, b in zip(reps, reps[1:]):
            assert 0.4 <= b.err_u / a.err_u <= 0.7

    def test_boundaries_never_solved(self):
        g = build_grid(10, 10, 20)
        traj, _ = run_simulation(example_spec(), g, 2, track_residual=False)
        assert not traj.u_nodes()[:, 0].any() and not traj.v_nodes()[:, -1].any()


class TestPointValues:
    def test_rejects_off_node(self):
        with pytest.raises(ValueError):
            reproduce_table1(K=48)

    def test_rows(self):
        rows = reproduce_table1()
        assert [(r.field, r.n) for r in rows] == [("u", 10), ("u", 20), ("u", 30),
                                                 ("v", 10), ("v", 20), ("v", 30)]
        v10 = rows[3]
        assert v10.exact == pytest.approx(3.86090827e-4, rel=1e-8)
        assert v10.abs_err == pytest.approx(abs(v10.exact - v10.computed))


class TestSurfaces:
    def test_zero_run(self):
        spec = example_spec(forcing=DataKind.zero(), initial_data=DataKind.zero())
        g = build_grid(6, 5, 1)
        traj, _ = run_simulation(spec, g, 1, track_residual=False)
        surf = surface_data(traj, g)
        assert not surf.u.any() and not surf.v.any()
        assert surf.rows().shape == ((g.K + 1) * (g.N + 1), 6)

    def test_example_run_close_to_exact(self):
        g = build_grid(50, 50, 20)
        traj, _ = run_simulation(example_spec(), g, 5, track_residual=False)
        assert surface_data(traj, g).max_deviation() < 7e-3


class TestWorkers:
    def test_default(self, monkeypatch):
        monkeypatch.delenv("WAVE_SIM_THREADS", raising=False)
        assert worker_count() == 1

    @pytest.mark.parametrize("raw", ["0", "two"])
    def test_rejects(self, monkeypatch, raw):
        monkeypatch.setenv("WAVE_SIM_THREADS", raw)
        with pytest.raises(ValueError):
            worker_count()

    def test_parallel_matches_serial(self):
        sizes = [(10, 10), (20, 20)]
        a = reproduce_table2(sizes, workers=1)
        b = reproduce_table2(sizes, workers=2)
        assert [(r.err_u, r.err_v) for r in a] == [(r.err_u, r.err_v) for r in b]
