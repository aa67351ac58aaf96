import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad_vec

from mmfluid.exceptions import NumericalError, SingularPencilError
from mmfluid.numerics import expm, group_inverse, integral_F, solve_sylvester, stationary_of

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def random_generator(rng, n):
    Q = rng.uniform(0.1, 2.0, (n, n))
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


class TestSylvester:
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10**6))
    def test_matches_scipy(self, p, q, seed):
        rng = np.random.default_rng(seed)
        # shift spectra apart so the pencil is safely nonsingular
        A = rng.normal(size=(p, p)) - 4 * np.eye(p)
        B = rng.normal(size=(q, q)) - 4 * np.eye(q)
        C = rng.normal(size=(p, q))
        X = solve_sylvester(A, B, C)
        ref = sla.solve_sylvester(A, B, -C)
        assert np.allclose(X, ref, atol=1e-10, rtol=1e-10)

    def test_residual(self):
        A = np.array([[-2.0, 1.0], [0.0, -1.0]])
        B = np.array([[-3.0]])
        C = np.array([[1.0], [2.0]])
        X = solve_sylvester(A, B, C)
        assert np.abs(A @ X + X @ B + C).max() < 1e-14

    def test_singular_pencil(self):
        # A and -B share the eigenvalue 1
        A = np.array([[1.0]])
        B = np.array([[-1.0]])
        with pytest.raises(SingularPencilError):
            solve_sylvester(A, B, np.array([[1.0]]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            solve_sylvester(np.eye(2), np.eye(3), np.ones((3, 3)))

    def test_empty(self):
        assert solve_sylvester(np.zeros((0, 0)), np.eye(2), np.zeros((0, 2))).shape == (0, 2)


class TestExpm:
    @given(arrays(float, (4, 4), elements=finite), st.floats(0.01, 50))
    def test_matches_scipy(self, M, scale):
        M = M * scale
        ref = sla.expm(M)
        out = expm(M)
        assert np.allclose(out, ref, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(ref).max()))

    def test_diagonal(self):
        d = np.array([-3.0, 0.0, 1.5])
        assert np.allclose(expm(np.diag(d)), np.diag(np.exp(d)), rtol=1e-14)

    def test_zero(self):
        assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))

    def test_generator_is_stochastic(self):
        Q = random_generator(np.random.default_rng(3), 5)
        P = expm(Q * 7.0)
        assert np.allclose(P.sum(axis=1), 1.0, atol=1e-13)
        assert P.min() >= 0

    def test_not_square(self):
        with pytest.raises(ValueError):
            expm(np.ones((2, 3)))


class TestGroupInverse:
    @given(st.integers(2, 7), st.integers(0, 10**6))
    def test_defining_identities_generator(self, n, seed):
        Q = random_generator(np.random.default_rng(seed), n)
        gi = group_inverse(Q)
        S = gi.sharp
        assert gi.is_singular
        v, u = gi.right_null, gi.left_null
        assert np.allclose(Q @ S @ Q, Q, atol=1e-10)
        assert np.allclose(S @ Q @ S, S, atol=1e-10)
        assert np.allclose(Q @ S, S @ Q, atol=1e-10)
        assert np.allclose(S @ Q, np.eye(n) - np.outer(v, u), atol=1e-10)
        assert np.allclose(S @ v, 0, atol=1e-10)
        assert abs(u @ v - 1) < 1e-12
        assert np.abs(v).max() == pytest.approx(1.0)
        # for a generator: v is constant and u is the stationary vector
        assert np.allclose(v, v[0])
        assert np.allclose(u / u.sum(), stationary_of(Q), atol=1e-10)

    def test_two_state_closed_form(self):
        # Q^2 = -2Q, hence Q# = Q / 4
        Q = np.array([[-1.0, 1.0], [1.0, -1.0]])
        assert np.allclose(group_inverse(Q).sharp, Q / 4, atol=1e-14)

    def test_deviation_matrix_oracle(self):
        # -Q# equals int_0^inf (e^{Qt} - 1 alpha^T) dt
        Q = random_generator(np.random.default_rng(11), 4)
        alpha = stationary_of(Q)
        Pi = np.outer(np.ones(4), alpha)
        D, _ = quad_vec(lambda t: sla.expm(Q * t) - Pi, 0, 60, epsabs=1e-12)
        assert np.allclose(-group_inverse(Q).sharp, D, atol=1e-8)

    def test_nonsingular_is_inverse(self):
        K = np.array([[-2.0, 1.0], [0.5, -1.0]])
        gi = group_inverse(K)
        assert not gi.is_singular
        assert np.allclose(gi.sharp, np.linalg.inv(K))

    def test_rank_two_deficiency_rejected(self):
        with pytest.raises(NumericalError):
            group_inverse(np.zeros((3, 3)), singular=True)


class TestIntegralF:
    @pytest.mark.parametrize("singular", [False, True])
    def test_against_quadrature(self, singular):
        rng = np.random.default_rng(5)
        if singular:
            K = random_generator(rng, 3)
        else:
            K = random_generator(rng, 3) - np.diag([0.5, 0.0, 0.2])
        x = 2.3
        ref, _ = quad_vec(lambda u: sla.expm(K * u), 0, x, epsabs=1e-13)
        assert np.allclose(integral_F(K, x), ref, atol=1e-10)

    def test_zero_level(self):
        assert np.allclose(integral_F(-np.eye(2), 0.0), 0.0)

    def test_negative_level(self):
        with pytest.raises(ValueError):
            integral_F(-np.eye(2), -1.0)


class TestStationary:
    @given(st.integers(2, 12), st.integers(0, 10**6))
    def test_left_null_vector(self, n, seed):
        Q = random_generator(np.random.default_rng(seed), n)
        pi = stationary_of(Q)
        assert abs(pi.sum() - 1) < 1e-14
        assert pi.min() > 0
        assert np.abs(pi @ Q).max() < 1e-12

    def test_two_state(self):
        assert np.allclose(stationary_of([[-2.0, 2.0], [1.0, -1.0]]), [1 / 3, 2 / 3], atol=1e-15)

    def test_reducible(self):
        Q = np.array([[-1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        with pytest.raises(NumericalError):
            stationary_of(Q)
