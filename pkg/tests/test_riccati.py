import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import assume, given, strategies as st

from helpers import fit, fluid_models
from mmfluid import (
    ConvergenceError,
    FluidModel,
    Regime,
    censor,
    derive_all,
    solve,
    solve_psi_functional,
    solve_psi_newton,
    wiener_hopf_residuals,
)
from mmfluid.datasets import two_phase
from mmfluid.riccati import level_blocks

rate = st.floats(0.1, 5.0)


def schur_psi(censored):
    """``Psi`` from an ordered real Schur form of ``W = C^-1 T``.

    ``[Psi; I]`` spans the invariant subspace of the ``m-`` eigenvalues of
    largest real part (the spectrum of ``-U``); only valid for non-zero drift.
    """
    p, q = censored.n_up, censored.n_down
    W = censored.T / censored.rates[: p + q, None]
    ev = np.sort(np.linalg.eigvals(W).real)
    cut = 0.5 * (ev[p - 1] + ev[p])
    T, Z, sdim = sla.schur(W, output="real", sort=lambda re, im: re > cut)
    assert sdim == q
    basis = Z[:, :q]
    return basis[:p] @ np.linalg.inv(basis[p:])


class TestClosedForm:
    @given(rate, rate, rate, rate)
    def test_two_state(self, q1, q2, c1, c2):
        assume(abs(q1 * c2 - q2 * c1) > 1e-3 * q2 * c1)
        model = two_phase(q1, q2, c1, -c2)
        expected = min(1.0, q1 * c2 / (q2 * c1))
        assert abs(fit(model).psi[0, 0] - expected) < 1e-12
        # functional iteration stops on the step size, so its error is the
        # step times r / (1 - r) for a linear rate r that nears 1 close to zero drift
        assert abs(fit(model, algorithm="functional").psi[0, 0] - expected) < 1e-8

    def test_fixtures(self, pr_pair, tr_pair, nl_pair, zero_model):
        assert fit(pr_pair).psi[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert fit(tr_pair).psi[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert fit(nl_pair).psi[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert fit(zero_model).psi[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_dual_pair(self, pr_pair, tr_pair):
        # the dual of the transient pair's first return is its own up/down swap
        assert fit(pr_pair).psi_hat[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert fit(tr_pair).psi_hat[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_companions_pr_pair(self, pr_pair):
        sol = fit(pr_pair)
        # U = -1 + 1 * 1 = 0, K = -2 + 1 * 1 = -1, Phi = 1
        assert np.allclose(sol.U, [[0.0]], atol=1e-12)
        assert np.allclose(sol.K, [[-1.0]], atol=1e-12)
        assert np.allclose(sol.phi, [[1.0]])
        assert sol.crossing_matrix(np.log(2))[0, 0] == pytest.approx(0.5, abs=1e-12)


class TestOracles:
    @given(fluid_models(drift=st.sampled_from(["negative", "positive"])))
    def test_schur_invariant_subspace(self, model):
        c = censor(model)
        sol = solve(c)
        assert np.abs(sol.psi - schur_psi(c)).max() < 1e-8

    @given(fluid_models())
    def test_dual_is_sign_flip(self, model):
        flipped = FluidModel(model.generator, -model.rates)
        assert np.abs(fit(model).psi_hat - fit(flipped).psi).max() < 1e-9

    @given(fluid_models(drift=st.sampled_from(["negative", "positive"])))
    def test_newton_matches_functional(self, model):
        a = fit(model, algorithm="newton")
        b = fit(model, algorithm="functional")
        assert np.abs(a.psi - b.psi).max() < 1e-10
        assert np.abs(a.psi_hat - b.psi_hat).max() < 1e-10


class TestLaws:
    @given(fluid_models())
    def test_residual_and_sign(self, model):
        sol = fit(model)
        assert sol.residual <= 1e-10 and sol.residual_hat <= 1e-10
        assert sol.psi.min() >= 0 and sol.psi_hat.min() >= 0
        assert np.allclose(sol.phi.sum(axis=1), 1.0, atol=1e-12)
        assert sol.phi.min() >= 0

    @given(fluid_models())
    def test_row_sums(self, model):
        sol = fit(model)
        rows, rows_hat = sol.psi.sum(axis=1), sol.psi_hat.sum(axis=1)
        if sol.regime is Regime.TRANSIENT:
            assert rows.max() < 1 - 1e-6
        else:
            assert np.abs(rows - 1).max() <= 1e-8
        if sol.regime is Regime.POSITIVE_RECURRENT:
            assert rows_hat.max() < 1 - 1e-6
        else:
            assert np.abs(rows_hat - 1).max() <= 1e-8

    @given(fluid_models())
    def test_U_is_subgenerator(self, model):
        sol = fit(model)
        for G in (sol.U, sol.U_hat):
            off = G - np.diag(np.diag(G))
            assert off.min() >= -1e-12
            assert G.sum(axis=1).max() <= 1e-8

    @given(fluid_models(drift=st.just("negative")))
    def test_K_stable_for_negative_drift(self, model):
        sol = fit(model)
        assert np.linalg.eigvals(sol.K).real.max() < 0
        N = sol.crossing_matrix(1.0)
        assert N.min() >= -1e-12

    @given(fluid_models())
    def test_wiener_hopf(self, model):
        wh = wiener_hopf_residuals(fit(model))
        assert wh.res_U <= 1e-8 and wh.res_K <= 1e-8
        assert wh.spectrum_gap <= 1e-6
        assert wh.separation_ok
        if wh.similarity_res is not None:
            assert wh.similarity_res <= 1e-8

    def test_wiener_hopf_needs_complete(self, pr_pair):
        with pytest.raises(ValueError):
            wiener_hopf_residuals(solve_psi_newton(censor(pr_pair)))


class TestIteration:
    def test_functional_monotone(self, four):
        seen = []
        solve_psi_functional(censor(four), callback=lambda n, psi: seen.append(psi.copy()))
        assert len(seen) > 5
        steps = np.diff(np.stack(seen), axis=0)
        assert steps.min() >= -1e-12

    def test_callback_abort(self, nl_pair):
        with pytest.raises(ConvergenceError):
            solve_psi_functional(censor(nl_pair), callback=lambda n, psi: n < 50)

    def test_max_iter(self, nl_pair, four):
        with pytest.raises(ConvergenceError) as err:
            solve_psi_functional(censor(nl_pair), max_iter=100)
        assert err.value.iterations == 100
        with pytest.raises(ConvergenceError):
            solve_psi_newton(censor(four), max_iter=1)

    @pytest.mark.parametrize("model", [two_phase(2.0, 1.0), two_phase(1.0, 2.0)])
    def test_newton_fast_nonzero_drift(self, model):
        assert solve_psi_newton(censor(model)).iterations <= 10

    def test_newton_zero_drift(self, nl_pair, zero_model):
        for model in (nl_pair, zero_model):
            sol = solve_psi_newton(censor(model))
            assert sol.slow_mode
            assert abs(sol.psi[0, 0] - 1) < 1e-12

    def test_drift_near_zero_is_continuous(self):
        # Psi is continuous across the critical drift
        near = [fit(two_phase(1.0, 1.0, 1.0 + e, -1.0)).psi[0, 0] for e in (-1e-6, 0.0, 1e-6)]
        assert np.ptp(near) < 1e-4

    def test_unknown_algorithm(self, pr_pair):
        with pytest.raises(ValueError):
            solve(censor(pr_pair), algorithm="bisection")

    def test_derive_all_type(self, pr_pair):
        with pytest.raises(TypeError):
            derive_all(censor(pr_pair), np.eye(1))

    def test_level_blocks(self, four):
        c = censor(four)
        blk = level_blocks(c)
        res = blk.riccati(fit(four).psi)
        assert np.abs(res).max() < 1e-10
