import itertools
import math

import numpy as np
import pytest

from mcbound import (
    FiniteChain,
    MatrixFunctionTable,
    center_and_norms,
    empirical_lp,
    sample_path,
    simulate_martingale,
    simulate_sums,
    solve_poisson,
    synth_symmetric_martingale,
)
from mcbound.simulate import UncenteredTableError

from conftest import random_hermitian, random_irreducible_chain


def scalar_table(values):
    return MatrixFunctionTable(
        np.asarray(values, dtype=complex).reshape(-1, 1, 1), hermitian=True
    )


@pytest.fixture
def two_state_f(two_state):
    return center_and_norms(scalar_table([1.0, -2.0]), two_state)


class TestSimulateSums:
    def test_zero_table(self, two_state):
        table = center_and_norms(scalar_table([0.0, 0.0]), two_state)
        stats = simulate_sums(two_state, table, n=20, trials=10, seed=1)
        assert np.all(stats.sup_s == 0.0)

    def test_same_seed_identical(self, two_state, two_state_f):
        a = simulate_sums(two_state, two_state_f, n=50, trials=40, seed=7,
                          collect_terminal=True)
        b = simulate_sums(two_state, two_state_f, n=50, trials=40, seed=7,
                          collect_terminal=True)
        assert np.array_equal(a.sup_s, b.sup_s)
        assert np.array_equal(a.terminal_s, b.terminal_s)

    def test_worker_count_invariance(self, two_state, two_state_f):
        one = simulate_sums(two_state, two_state_f, n=30, trials=600, seed=3,
                            collect_terminal=True, workers=1)
        four = simulate_sums(two_state, two_state_f, n=30, trials=600, seed=3,
                             collect_terminal=True, workers=4)
        assert np.array_equal(one.sup_s, four.sup_s)
        assert np.array_equal(one.terminal_s, four.terminal_s)

    def test_trials_match_single_path_op(self, two_state, two_state_f):
        """Trial i reproduces sample_path at stream = stream_base + i."""
        stats = simulate_sums(two_state, two_state_f, n=12, trials=3, seed=11,
                              collect_terminal=True)
        f = two_state_f.values[:, 0, 0].real
        for i in range(3):
            path = sample_path(two_state, "stationary", length=12, seed=11, stream=i)
            sums = np.cumsum(f[path])
            assert stats.sup_s[i] == pytest.approx(np.abs(sums).max(), abs=1e-12)
            assert stats.terminal_s[i, 0, 0].real == pytest.approx(sums[-1], abs=1e-12)

    def test_exhaustive_three_step_oracle(self, two_state, two_state_f):
        """Oracle: exact 8-path enumeration weighted by path probabilities."""
        f = two_state_f.values[:, 0, 0].real
        exact = 0.0
        for path in itertools.product((0, 1), repeat=3):
            prob = two_state.pi[path[0]]
            for a, b in zip(path, path[1:]):
                prob *= two_state.q[a, b]
            sums = np.cumsum(f[list(path)])
            exact += prob * np.abs(sums).max()
        trials = 4000
        stats = simulate_sums(two_state, two_state_f, n=3, trials=trials, seed=5)
        mean = stats.sup_s.mean()
        se = stats.sup_s.std(ddof=1) / math.sqrt(trials)
        assert abs(mean - exact) < 3 * se

    def test_uncentered_rejected(self, two_state):
        with pytest.raises(UncenteredTableError):
            simulate_sums(two_state, scalar_table([1.0, 2.0]), n=5, trials=2, seed=0)

    def test_rect_table_via_dilation(self, two_state, rng):
        """sup ||V_k|| for a rectangular table equals the dilated sup, and the
        terminal matrix is the top-right block."""
        raw = rng.standard_normal((2, 2, 3))
        mean = np.tensordot(two_state.pi, raw, axes=([0], [0]))
        rect = MatrixFunctionTable(raw - mean[None], hermitian=False)
        stats = simulate_sums(two_state, rect, n=15, trials=8, seed=2,
                              collect_terminal=True)
        r = rect.values
        for i in range(8):
            path = sample_path(two_state, "stationary", length=15, seed=2, stream=i)
            sums = np.cumsum(r[path], axis=0)
            sup = max(np.linalg.svd(s, compute_uv=False).max() for s in sums)
            assert stats.sup_s[i] == pytest.approx(sup, abs=1e-10)
            assert np.abs(stats.terminal_s[i] - sums[-1]).max() < 1e-12


class TestSimulateMartingale:
    def test_iid_reduces_to_boundary_difference(self, rng):
        """For an i.i.d. chain G = F, so S_n - M_n = F(Z_0) - F(Z_n) exactly."""
        pi = np.array([0.4, 0.6])
        chain = FiniteChain(np.tile(pi, (2, 1)))
        table = center_and_norms(
            MatrixFunctionTable(np.stack([random_hermitian(rng, 2) for _ in range(2)])),
            chain,
        )
        sol = solve_poisson(chain, table)
        stats = simulate_martingale(chain, sol, n=25, trials=20, seed=3)
        assert stats.decomposition_max_err < 1e-10

    def test_conditional_mean_replay(self, two_state, two_state_f):
        """Averaging G over the exact transition row equals QG per state."""
        sol = solve_poisson(two_state, two_state_f)
        for z in range(2):
            avg = sum(two_state.q[z, w] * sol.g[w] for w in range(2))
            assert np.abs(avg - sol.qg[z]).max() < 1e-13

    def test_qv_matches_independent_accumulation(self, two_state, two_state_f):
        """Oracle: re-accumulate sum_k H(Z_{k-1}) per replayed path."""
        sol = solve_poisson(two_state, two_state_f)
        stats = simulate_martingale(two_state, sol, n=30, trials=6, seed=9)
        for i in range(6):
            path = sample_path(two_state, "stationary", length=31, seed=9, stream=i)
            acc = np.zeros((1, 1), dtype=complex)
            for z in path[:-1]:
                acc = acc + sol.h[z]
            assert stats.qv_norm[i] == pytest.approx(abs(acc[0, 0]), abs=1e-10)

    def test_decomposition_identity_random_chains(self, rng):
        for _ in range(5):
            chain = random_irreducible_chain(rng, 5)
            table = center_and_norms(
                MatrixFunctionTable(
                    np.stack([random_hermitian(rng, 3) for _ in range(5)])
                ),
                chain,
            )
            sol = solve_poisson(chain, table)
            stats = simulate_martingale(chain, sol, n=40, trials=10, seed=21)
            assert stats.decomposition_max_err < 1e-10

    def test_martingale_mean_small(self, two_state, two_state_f):
        """Entrywise |mean of M_n| <= 4 sd / sqrt(trials) across trials."""
        sol = solve_poisson(two_state, two_state_f)
        trials = 2000
        stats = simulate_martingale(two_state, sol, n=60, trials=trials, seed=17,
                                    collect_terminal=True)
        term = stats.terminal_m[:, 0, 0].real
        assert abs(term.mean()) <= 4 * term.std(ddof=1) / math.sqrt(trials)

    def test_qv_dominated_by_envelope_per_path(self, rng):
        """<M>_n = sum_k H(Z_{k-1}) <= (64/9) n t^2 Y in the Loewner order
        whenever F^2 <= Y pointwise; replayed path by path."""
        from mcbound import loewner_leq, mixing_time

        chain = random_irreducible_chain(rng, 4)
        table = center_and_norms(
            MatrixFunctionTable(np.stack([random_hermitian(rng, 2) for _ in range(4)])),
            chain,
        )
        t = mixing_time(chain).t_mix
        ups = table.sup_norm**2 * np.eye(2)
        sol = solve_poisson(chain, table)
        n = 50
        for stream in range(10):
            path = sample_path(chain, "stationary", length=n + 1, seed=77, stream=stream)
            qv = sum(sol.h[z] for z in path[:-1])
            bound = (64 / 9) * n * t**2 * ups
            assert loewner_leq(qv, bound, tol=1e-8).holds

    def test_sup_x_matches_pair_table(self, two_state, two_state_f):
        sol = solve_poisson(two_state, two_state_f)
        stats = simulate_martingale(two_state, sol, n=20, trials=5, seed=13)
        for i in range(5):
            path = sample_path(two_state, "stationary", length=21, seed=13, stream=i)
            xs = [abs((sol.g[b] - sol.qg[a])[0, 0]) for a, b in zip(path, path[1:])]
            assert stats.sup_x[i] == pytest.approx(max(xs), abs=1e-12)


class TestEmpiricalLp:
    def test_constant_samples(self):
        m = empirical_lp(np.full(50, 3.0), p=4)
        assert m.point == pytest.approx(3.0)
        assert m.upper >= m.point

    def test_p2_is_rms(self, rng):
        x = rng.random(100)
        m = empirical_lp(x, p=2)
        assert m.point == pytest.approx(math.sqrt(np.mean(x**2)))

    def test_two_point_closed_form(self):
        x = np.array([0.0, 2.0] * 50)
        m = empirical_lp(x, p=2)
        assert m.point == pytest.approx(math.sqrt(2))
        assert m.upper >= math.sqrt(2)

    def test_deterministic_bootstrap(self, rng):
        x = rng.random(200)
        assert empirical_lp(x, 2).upper == empirical_lp(x, 2).upper

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_lp([], 2)


class TestSynthMartingale:
    def test_single_step_norm(self, rng):
        a = random_hermitian(rng, 3)
        stats = synth_symmetric_martingale([a], trials="exhaustive")
        norm = np.abs(np.linalg.eigvalsh(a)).max()
        assert stats.trials == 2
        assert np.allclose(stats.sup_m, norm, atol=1e-12)

    def test_global_sign_flip_invariance(self, rng):
        """Exhaustive check: the sup||M_k|| multiset is invariant under
        flipping every sign (pattern j <-> bitwise complement)."""
        steps = [random_hermitian(rng, 2) for _ in range(8)]
        stats = synth_symmetric_martingale(steps, trials="exhaustive")
        count = stats.trials
        flipped = (count - 1) ^ np.arange(count)
        assert np.allclose(stats.sup_m, stats.sup_m[flipped], atol=1e-10)

    def test_qv_sign_independent(self, rng):
        steps = [random_hermitian(rng, 2) for _ in range(5)]
        stats = synth_symmetric_martingale(steps, trials="exhaustive")
        expected = np.abs(np.linalg.eigvalsh(sum(s @ s for s in steps))).max()
        assert np.allclose(stats.qv_norm, expected, atol=1e-12)

    def test_exhaustive_cap(self):
        steps = [np.array([[1.0]])] * 21
        with pytest.raises(ValueError, match="cap"):
            synth_symmetric_martingale(steps, trials="exhaustive")

    def test_monte_carlo_matches_exhaustive_mean(self, rng):
        steps = [np.array([[1.0]], dtype=complex)] * 10
        exact = synth_symmetric_martingale(steps, trials="exhaustive")
        mc = synth_symmetric_martingale(steps, trials=20_000, seed=31)
        se = mc.sup_m.std(ddof=1) / math.sqrt(mc.trials)
        assert abs(mc.sup_m.mean() - exact.sup_m.mean()) < 3 * se

    def test_exhaustive_weights_sum_to_one(self, rng):
        stats = synth_symmetric_martingale([random_hermitian(rng, 2)] * 4,
                                           trials="exhaustive")
        assert stats.weights.sum() == pytest.approx(1.0)


class TestCsvExport:
    def test_one_row_per_trial(self, two_state, two_state_f, tmp_path):
        stats = simulate_sums(two_state, two_state_f, n=10, trials=7, seed=1)
        out = tmp_path / "trials.csv"
        stats.to_csv(out)
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 8
        assert lines[0].startswith("trial,sup_s")
