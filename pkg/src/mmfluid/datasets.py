"""Model fixtures and random model generators."""

import numpy as np
from sklearn.utils import check_random_state

from .model import FluidModel
from .numerics import stationary_of

DRIFTS = ("negative", "zero", "positive")


def two_phase(q_up, q_down, c_up=1.0, c_down=-1.0):
    """Two-phase on/off model: leaves the up phase at rate ``q_up``, the down phase at ``q_down``."""
    return FluidModel([[-q_up, q_up], [q_down, -q_down]], [c_up, c_down])


def positive_recurrent_pair():
    """``Q = [[-2, 2], [1, -1]]``, ``c = (1, -1)``: drift -1/3."""
    return two_phase(2.0, 1.0)


def transient_pair():
    """``Q = [[-1, 1], [2, -2]]``, ``c = (1, -1)``: drift +1/3."""
    return two_phase(1.0, 2.0)


def null_pair():
    """``Q = [[-1, 1], [1, -1]]``, ``c = (1, -1)``: zero drift."""
    return two_phase(1.0, 1.0)


def three_phase_with_zero():
    """Symmetric three-phase model with one zero-rate phase."""
    return FluidModel(
        [[-2.0, 1.0, 1.0], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]],
        [1.0, -1.0, 0.0],
    )


def four_phase():
    """Four-phase model with rates ``(-0.8, -1.4, 2, 1)``.

    The generator is this package's own choice (drift about -0.16); it is
    only a convenient example with two down and two up phases.
    """
    Q = np.array([
        [-1.5, 0.5, 0.6, 0.4],
        [0.7, -1.6, 0.3, 0.6],
        [0.9, 1.1, -2.5, 0.5],
        [0.8, 0.6, 0.4, -1.8],
    ])
    return FluidModel(Q, [-0.8, -1.4, 2.0, 1.0], ("d1", "d2", "u1", "u2"))


def make_fluid_model(n_phases=4, drift="negative", n_zero=0, density=0.7,
                     strength=(0.2, 0.8), random_state=None):
    """Random irreducible fluid model with a prescribed drift sign.

    Parameters
    ----------
    n_phases : int
        Total number of phases ``m >= 2 + n_zero``.
    drift : {'negative', 'zero', 'positive'}
        Sign of the stationary drift.  The up rates are rescaled so that
        ``mu = -kappa * D`` (negative), ``0`` or ``+kappa * D`` where ``D``
        is the stationary outflow ``sum_i alpha_i |c_i|`` over down phases
        and ``kappa`` is drawn uniformly from ``strength``.
    n_zero : int
        Number of zero-rate phases.
    density : float
        Probability that an off-diagonal rate is positive; a directed
        cycle through all phases is always added so the generator is
        irreducible.
    random_state : int, RandomState instance or None
    """
    if drift not in DRIFTS:
        raise ValueError(f"drift must be one of {DRIFTS}, got {drift!r}")
    rng = check_random_state(random_state)
    m = int(n_phases)
    if m < 2 + n_zero:
        raise ValueError("need at least one up and one down phase besides the zero phases")
    Q = rng.uniform(0.1, 2.0, size=(m, m)) * (rng.uniform(size=(m, m)) < density)
    cycle = rng.permutation(m)
    Q[cycle, np.roll(cycle, -1)] += rng.uniform(0.1, 1.0, size=m)
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))

    n_moving = m - n_zero
    n_up = rng.randint(1, n_moving)
    signs = np.array([1.0] * n_up + [-1.0] * (n_moving - n_up) + [0.0] * n_zero)
    rng.shuffle(signs)
    c = signs * rng.uniform(0.5, 3.0, size=m)

    alpha = stationary_of(Q)
    up, down = c > 0, c < 0
    inflow = alpha[up] @ c[up]
    outflow = -(alpha[down] @ c[down])
    kappa = rng.uniform(*strength)
    target = {"negative": 1.0 - kappa, "zero": 1.0, "positive": 1.0 + kappa}[drift]
    c[up] *= target * outflow / inflow
    return FluidModel(Q, c)
