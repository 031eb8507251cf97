import math

import numpy as np
import pytest

from wavesim.discretization import (
    StateVector,
    assemble_stage,
    build_grid,
    discretize_initial,
    semi_discrete_rhs,
)
from wavesim.model import (
    DataKind,
    PotentialParams,
    example_spec,
    exact_profile,
    manufactured_forcing,
)
from wavesim.verification import exact_solution


def random_state(rng, K, scale=1.0):
    return StateVector(scale * rng.normal(size=2 * K), scale * rng.normal(size=2 * K))


def matrix_rhs(state, t, spec, grid):
    st = assemble_stage(state, t, spec, grid)
    return st.A @ state.u_block + st.F1_vec, st.B @ state.v_block + st.F2_vec


class TestGrid:
    def test_example_grid(self):
        g = build_grid(50, 50, 20)
        assert g.dx == 0.02 and g.dt == 0.4
        assert g.x[0] == 0 and g.x[-1] == 1

    def test_smallest_grid(self):
        g = build_grid(2, 1, 1)
        assert list(g.x) == [0, 0.5, 1]
        assert list(g.t) == [0, 1]

    @pytest.mark.parametrize("args", [(1, 1, 1), (4, 0, 1), (4, 4, 0.0), (4, 4, -1)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            build_grid(*args)


class TestInitial:
    def test_zero_data(self):
        spec = example_spec(initial_data=DataKind.zero())
        s = discretize_initial(spec, build_grid(8, 1, 1))
        assert not s.u_block.any() and not s.v_block.any()

    def test_boundary_slots(self):
        s = discretize_initial(example_spec(), build_grid(50, 1, 1))
        c = (math.exp(9) + 1) ** -0.25
        assert s.u_block[49] == pytest.approx(c, rel=1e-15)
        assert s.v_block[0] == pytest.approx(c, rel=1e-15)

    def test_matches_exact_solution(self):
        g = build_grid(40, 1, 1)
        s = discretize_initial(example_spec(), g)
        ue, ve = exact_solution(g.x, 0.0)
        assert np.abs(s.u_nodes() - ue).max() < 1e-12
        assert np.abs(s.v_nodes() - ve).max() < 1e-12


class TestStage:
    def test_structure(self):
        rng = np.random.default_rng(1)
        K = 6
        g = build_grid(K, 1, 1)
        st = assemble_stage(random_state(rng, K), 0.5, example_spec(), g)
        for M in (st.A, st.B):
            assert M.shape == (2 * K, 2 * K)
            assert not M[:K, :K].any()
            assert np.array_equal(M[:K, K:], np.eye(K))
            lower = M[K:, :]
            assert np.count_nonzero(lower) == 3 * K - 2 + K
        assert not st.F1_vec[:K].any() and not st.F2_vec[:K].any()

    def test_quiescent(self):
        spec = example_spec(forcing=DataKind.zero())
        K = 5
        st = assemble_stage(StateVector.zeros(K), 0.0, spec, build_grid(K, 1, 1))
        assert np.allclose(np.diag(st.A[K:, :K])[:-1], -2 * K**2)
        assert st.A[-1, K - 1] == -K**2
        assert st.B[K, 0] == -K**2
        assert not st.F1_vec.any() and not st.F2_vec.any()

    def test_hand_value_a1(self):
        s = StateVector.zeros(2)
        s.v_block[1] = 1.0  # V_1
        st = assemble_stage(s, 0.0, example_spec(forcing=DataKind.zero()), build_grid(2, 1, 1))
        assert st.A[2, 0] == -7.0

    def test_damping_diagonal(self):
        spec = example_spec(lambda1=0.5, mu1=2.0, lambda2=0.25, mu2=3.0)
        K = 4
        st = assemble_stage(StateVector.zeros(K), 0.0, spec, build_grid(K, 1, 1))
        assert list(np.diag(st.A[K:, K:])) == [-0.5, -0.5, -0.5, -0.5 - 2.0 * K]
        assert list(np.diag(st.B[K:, K:])) == [-0.25 - 3.0 * K, -0.25, -0.25, -0.25]

    def test_printed_f_vector(self):
        rng = np.random.default_rng(3)
        K = 5
        g = build_grid(K, 1, 1)
        s = random_state(rng, K)
        t = 0.7
        st = assemble_stage(s, t, example_spec(), g)
        U = s.u_block[:K]
        F1, _ = manufactured_forcing(g.x[1:], t)
        expected = 3 * U**3 + F1
        expected[-1] += K * U[-1] ** 5
        assert np.allclose(st.F1_vec[K:], expected, rtol=1e-14, atol=1e-14)

    def test_immutable(self):
        st = assemble_stage(StateVector.zeros(3), 0.0, example_spec(), build_grid(3, 1, 1))
        with pytest.raises(ValueError):
            st.A[0, 0] = 1.0


class TestRhs:
    def test_zero(self):
        spec = example_spec(forcing=DataKind.zero())
        d = semi_discrete_rhs(StateVector.zeros(4), 0.0, spec, build_grid(4, 1, 1))
        assert not d.u_block.any() and not d.v_block.any()

    @pytest.mark.parametrize("K", [2, 4, 8])
    @pytest.mark.parametrize("potential", [PotentialParams(), PotentialParams(6, 8, 0.5, 0.3)])
    def test_matrix_form_equivalence(self, K, potential):
        rng = np.random.default_rng(K)
        spec = example_spec(potential=potential, lambda1=0.7, mu2=1.8, k1=1.3, p2=4.0)
        g = build_grid(K, 1, 1)
        for _ in range(50):
            s = random_state(rng, K)
            t = rng.uniform(0, 5)
            d = semi_discrete_rhs(s, t, spec, g)
            mu, mv = matrix_rhs(s, t, spec, g)
            assert np.abs(mu - d.u_block).max() <= 1e-12
            assert np.abs(mv - d.v_block).max() <= 1e-12

    def test_mirror_symmetry(self):
        # the example forcing and data are mirror images, so the v-system is
        # the u-system read backwards
        K = 7
        g = build_grid(K, 1, 1)
        rng = np.random.default_rng(9)
        s = random_state(rng, K)
        mirrored = StateVector(np.concatenate((s.v_block[:K][::-1], s.v_block[K:][::-1])),
                               np.concatenate((s.u_block[:K][::-1], s.u_block[K:][::-1])))
        a = assemble_stage(s, 1.1, example_spec(), g)
        b = assemble_stage(mirrored, 1.1, example_spec(), g)
        rev = np.r_[np.arange(K)[::-1], K + np.arange(K)[::-1]]
        assert np.allclose(b.A, a.B[np.ix_(rev, rev)], rtol=1e-14, atol=0)
        assert np.allclose(b.F1_vec, a.F2_vec[rev], rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("K", [50, 200])
    def test_exact_solution_residual(self, K):
        # the exact fields are affine in x and satisfy the Robin conditions,
        # so the spatial discretization reproduces them up to rounding
        g = build_grid(K, 1, 1)
        spec = example_spec()
        t = 0.8
        amp = exact_profile(t)
        e = math.exp(9 + 4 * t)
        ut_amp = -e * amp**5
        utt_amp = -4 * e * amp**5 + 5 * e**2 * amp**9
        x = g.x
        s = StateVector.from_nodes(x * amp, x * ut_amp, (1 - x) * amp, (1 - x) * ut_amp)
        d = semi_discrete_rhs(s, t, spec, g)
        assert np.abs(d.u_block[K:] - x[1:] * utt_amp).max() < 1e-9 * abs(utt_amp) * K
        assert np.abs(d.v_block[K:] - (1 - x[:-1]) * utt_amp).max() < 1e-9 * abs(utt_amp) * K
