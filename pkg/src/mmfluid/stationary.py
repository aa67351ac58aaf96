"""Stationary distribution of the regulated fluid queue.

Only defined for negative drift.  The regulated level regenerates each
time it hits 0 in a down phase; ``rho`` is the phase distribution at
those epochs, and the distribution is an average over one regeneration
cycle.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError, RegimeError
from .model import PhasePartition, Regime, censor
from .numerics import expm, stationary_of
from .riccati import RiccatiSolution
from .validation import check_level


def _stationary_of_stochastic(H):
    """Left fixed point of a row-stochastic matrix (GTH, with a least-squares fallback)."""
    n = H.shape[0]
    try:
        return stationary_of(H - np.eye(n))
    except NumericalError:
        # reducible H: recurrent class only, other entries zero
        A = np.vstack([(H - np.eye(n)).T, np.ones((1, n))])
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        rho = np.linalg.lstsq(A, rhs, rcond=None)[0]
        rho = np.clip(rho, 0.0, None)
        return rho / rho.sum()


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    """Stationary law of ``(Y, phase)`` for a positive recurrent model.

    Vectors indexed by all phases (``boundary_mass``) are in the model's
    original phase order; ``rho``, ``p_down``, ``mean_cycle`` follow the
    down phases in ascending index order, ``p_zero`` the zero phases.

    Attributes
    ----------
    rho : (m-,) ndarray
        Stationary vector of ``H = Phi Psi``.
    p_down, p_zero : ndarray
        Expected time spent at level 0 per phase during a cycle, averaged over ``rho``.
    gamma : (m+, m0) ndarray
    norm_c : float
        Normalising constant; ``1 / norm_c`` is the mean cycle length under ``rho``.
    mean_cycle : (m-,) ndarray
        Expected cycle length given the initial down phase.
    boundary_mass : (m,) ndarray
        ``G(0)``, zero on up phases.
    """

    rho: np.ndarray
    p_down: np.ndarray
    p_zero: np.ndarray
    gamma: np.ndarray
    norm_c: float
    mean_cycle: np.ndarray
    boundary_mass: np.ndarray
    K: np.ndarray
    psi: np.ndarray
    partition: PhasePartition
    _outflow: np.ndarray  # p_d Q-+ + p_0 Q0+, (m+,)
    _right: np.ndarray    # [C+^-1, Psi |C-|^-1, Gamma] in original column order, (m+, m)
    _neg_K_inv: np.ndarray

    def cdf(self, x):
        return cdf(self, x)

    def density(self, x):
        return density(self, x)


def _level_zero_time(Q, part):
    """``[I 0] (-Q_{(-,0),(-,0)})^-1``: time at level 0 per (down, zero) phase, from a down phase."""
    p = part.n_up
    rest = slice(p, Q.shape[0])
    inv = np.linalg.inv(-Q[rest, rest])
    # inverse of a nonsingular M-matrix is entrywise nonnegative; clear rounding
    return np.maximum(inv[: part.n_down], 0.0)


def _gamma(censored, psi):
    part = censored.partition
    if part.n_zero == 0:
        return np.zeros((part.n_up, 0))
    p, q = part.n_up, part.n_down
    c_up = censored.rates[:p]
    c_down = np.abs(censored.rates[p:p + q])
    left = censored.blocks("+0") / c_up[:, None] + psi @ (censored.blocks("-0") / c_down[:, None])
    return np.linalg.solve(-censored.blocks("00").T, left.T).T


def _right_factor(censored, psi, gamma):
    """``[C+^-1, Psi |C-|^-1, Gamma]`` in permuted column order."""
    p, q = censored.n_up, censored.n_down
    c_up = censored.rates[:p]
    c_down = np.abs(censored.rates[p:p + q])
    return np.hstack([np.diag(1.0 / c_up), psi / c_down[None, :], gamma])


def mean_cycle_length(censored, solution):
    """Expected regeneration-cycle length ``m`` given the initial down phase.

    Sum of the time at level 0 before leaving it and the expected time
    above 0 until the next return, ``Phi (-K)^-1 (C+^-1 1 + Psi|C-|^-1 1 + Gamma 1)``.
    """
    part = censored.partition
    level0 = _level_zero_time(censored.generator, part)
    gamma = _gamma(censored, solution.psi)
    R = _right_factor(censored, solution.psi, gamma)
    above = np.linalg.solve(-solution.K, R.sum(axis=1))
    return level0.sum(axis=1) + solution.phi @ above


def stationary_distribution(model, solution):
    """Stationary distribution of the regulated process.

    Parameters
    ----------
    model : FluidModel
    solution : RiccatiSolution
        Complete solution (from :func:`mmfluid.riccati.solve`) for ``model``.

    Raises
    ------
    RegimeError
        Unless the drift is negative.
    """
    if not isinstance(solution, RiccatiSolution) or not solution.complete:
        raise TypeError("stationary_distribution needs a complete RiccatiSolution")
    if solution.regime is not Regime.POSITIVE_RECURRENT:
        raise RegimeError(
            f"no stationary distribution: the model is {solution.regime.value} "
            f"(drift {solution.censored.drift:.6g} >= 0)"
        )
    censored = solution.censored if solution.censored.model is model else censor(model)
    part = censored.partition
    Q = censored.generator
    p, q = part.n_up, part.n_down
    psi, K = solution.psi, solution.K

    H = solution.phi @ psi
    rho = _stationary_of_stochastic(H)
    level0 = _level_zero_time(Q, part)
    pdz = rho @ level0
    p_down, p_zero = pdz[:q], pdz[q:]
    gamma = _gamma(censored, psi)
    R = _right_factor(censored, psi, gamma)
    outflow = pdz @ Q[p:, :p]
    neg_K_inv = np.linalg.inv(-K)

    norm_c = 1.0 / (pdz.sum() + outflow @ neg_K_inv @ R.sum(axis=1))
    mean_cycle = level0.sum(axis=1) + solution.phi @ (neg_K_inv @ R.sum(axis=1))

    inv = list(part.inverse)
    mass = norm_c * np.concatenate([np.zeros(p), pdz])[inv]
    return StationaryDistribution(
        rho=rho,
        p_down=p_down,
        p_zero=p_zero,
        gamma=gamma,
        norm_c=float(norm_c),
        mean_cycle=mean_cycle,
        boundary_mass=mass,
        K=K,
        psi=psi,
        partition=part,
        _outflow=outflow,
        _right=R[:, inv],
        _neg_K_inv=neg_K_inv,
    )


def cdf(dist, x):
    """Joint CDF ``G_j(x) = P[Y <= x, phase = j]`` in original phase order.

    ``x`` may be a scalar (returns an m-vector) or an array of levels
    (returns one row per level).
    """
    xs = check_level(x, "x")
    flat = np.atleast_1d(xs).ravel()
    n_up = dist.K.shape[0]
    out = np.empty((flat.size, dist.boundary_mass.size))
    base = dist.norm_c * dist._outflow @ dist._neg_K_inv
    for k, xv in enumerate(flat):
        left = base @ (np.eye(n_up) - expm(dist.K * xv))
        out[k] = dist.boundary_mass + left @ dist._right
    return out[0] if xs.ndim == 0 else out.reshape(xs.shape + (-1,))


def _density_values(dist, flat):
    out = np.empty((flat.size, dist.boundary_mass.size))
    base = dist.norm_c * dist._outflow
    for k, xv in enumerate(flat):
        out[k] = base @ expm(dist.K * xv) @ dist._right
    return out


def density(dist, x):
    """Density ``g(x) = dG/dx`` for ``x > 0``, original phase order."""
    xs = check_level(x, "x", strict=True)
    out = _density_values(dist, np.atleast_1d(xs).ravel())
    return out[0] if xs.ndim == 0 else out.reshape(xs.shape + (-1,))


def density_grid(dist, xs):
    """Density on a grid of levels ``>= 0``; at ``x = 0`` the right limit ``g(0+)`` is returned."""
    xs = np.atleast_1d(check_level(xs, "x"))
    return _density_values(dist, xs.ravel()).reshape(xs.shape + (-1,))
