import numpy as np
import pytest

from helpers import fit
from mmfluid import escape, stationary_distribution
from mmfluid.simulator import (
    BLOCK_SIZE,
    _generator,
    _blocks,
    _Jumps,
    _occupation,
    _walk,
    estimate_escape,
    estimate_psi,
    estimate_stationary,
    simulate_path,
)


def within(est, exact, k=3.0):
    """Every cell within ``k`` standard errors (exact agreement where the error is 0)."""
    return np.all(np.abs(est.value - exact) <= k * est.std_error + 1e-15)


class TestDeterminism:
    def test_psi_bit_identical(self, four):
        a = estimate_psi(four, 3000, seed=5)
        b = estimate_psi(four, 3000, seed=5)
        assert np.array_equal(a.value, b.value) and np.array_equal(a.half_width, b.half_width)
        c = estimate_psi(four, 3000, seed=6)
        assert not np.array_equal(a.value, c.value)

    def test_path_bit_identical(self, pr_pair):
        a = simulate_path(pr_pair, 2e4, seed=1, levels=[0.5])
        b = simulate_path(pr_pair, 2e4, seed=1, levels=[0.5])
        assert np.array_equal(a.occupation, b.occupation)
        assert np.array_equal(a.cycle_sum, b.cycle_sum)
        assert a.n_events == b.n_events

    def test_chunk_size_is_irrelevant_to_accounting(self, pr_pair):
        p = simulate_path(pr_pair, 5e3, seed=2, chunk=1000)
        assert p.phase_time.sum() == pytest.approx(5e3, rel=1e-13)

    def test_streams_differ_per_key(self):
        draws = {key: _generator(0, *key).random() for key in [(1,), (2, 0, 0), (2, 0, 1), (2, 1, 0)]}
        assert len(set(draws.values())) == len(draws)
        assert isinstance(_generator(0, 1).bit_generator, np.random.Philox)


class TestHelpers:
    def test_occupation_cases(self):
        levels = np.array([0.0, 1.0, 2.0])
        # rising from 0.5 for 2 time units at rate 1: below 1 for 0.5, below 2 for 1.5
        up = _occupation(np.array([0.5]), np.array([1.0]), np.array([2.0]), levels)
        assert np.allclose(up, [[0.0, 0.5, 1.5]])
        # falling from 1.5 at rate -1 for 1 unit: below 1 for the last 0.5
        down = _occupation(np.array([1.5]), np.array([-1.0]), np.array([1.0]), levels)
        assert np.allclose(down, [[0.0, 0.5, 1.0]])
        flat = _occupation(np.array([1.0]), np.array([0.0]), np.array([3.0]), levels)
        assert np.allclose(flat, [[0.0, 3.0, 3.0]])

    def test_walk_frequencies(self, four):
        jumps = _Jumps(four)
        rng = _generator(3, 9)
        seq = np.concatenate([[0], _walk(jumps, 0, 200_000, rng)])
        counts = np.zeros((4, 4))
        np.add.at(counts, (seq[:-1], seq[1:]), 1)
        P = counts / counts.sum(axis=1, keepdims=True)
        Q = four.generator
        expected = Q / -np.diag(Q)[:, None]
        np.fill_diagonal(expected, 0.0)
        n = counts.sum(axis=1, keepdims=True)
        se = np.sqrt(expected * (1 - expected) / n)
        assert np.all(np.abs(P - expected) <= 4 * se + 1e-12)

    def test_blocks(self):
        assert _blocks(2 * BLOCK_SIZE + 5) == [BLOCK_SIZE, BLOCK_SIZE, 5]
        assert sum(_blocks(10**5)) == 10**5


class TestAgreement:
    def test_psi_pairs(self, pr_pair, tr_pair):
        est = estimate_psi(pr_pair, 5000, seed=11)
        assert np.array_equal(est.value, [[1.0]]) and est.capped == 0
        est = estimate_psi(tr_pair, 20000, seed=11, level_cap=50.0)
        assert within(est, fit(tr_pair).psi)
        assert est.capped > 0

    def test_psi_four(self, four):
        est = estimate_psi(four, 20000, seed=4)
        assert within(est, fit(four).psi)

    def test_escape_four(self, four):
        exact = escape(four, fit(four), 0.8, 1.2).matrix
        assert within(estimate_escape(four, 0.8, 1.2, 20000, seed=8), exact)

    def test_escape_zero_phase_null(self, zero_model):
        exact = escape(zero_model, fit(zero_model), 1.0, 0.5).matrix
        assert within(estimate_escape(zero_model, 1.0, 0.5, 20000, seed=8), exact)

    def test_stationary_four(self, four):
        levels = [0.5, 2.0]
        est = estimate_stationary(four, 2e5, seed=3, levels=levels)
        d = stationary_distribution(four, fit(four))
        exact = np.vstack([d.boundary_mass, d.cdf(np.array(levels))])
        assert est.value.shape == (3, 4)
        assert within(est, exact)

    def test_path_accounting(self, four):
        p = simulate_path(four, 1e4, seed=0, levels=[1.0])
        assert p.phase_time.sum() == pytest.approx(1e4, rel=1e-12)
        assert np.all(p.occupation[0] <= p.occupation[1] + 1e-9)
        assert np.all(p.occupation[1] <= p.phase_time + 1e-9)
        assert p.regen_phase in (0, 1)
        assert p.n_cycles > 100


class TestValidation:
    def test_bad_arguments(self, pr_pair):
        with pytest.raises(ValueError):
            estimate_psi(pr_pair, 0, seed=0)
        with pytest.raises(ValueError):
            estimate_escape(pr_pair, 0.0, 1.0, 10, seed=0)
        with pytest.raises(ValueError):
            simulate_path(pr_pair, -1.0, seed=0)
        with pytest.raises(ValueError):
            simulate_path(pr_pair, 10.0, seed=0, levels=[-1.0])

    def test_too_short_for_ratio(self, pr_pair):
        with pytest.raises(ValueError, match="regeneration"):
            simulate_path(pr_pair, 1e-3, seed=0).ratio_estimate()
