"""First-passage transforms and two-sided escape probabilities."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConvergenceError, NumericalError, RegimeError, SingularPencilError
from .model import Regime, censor, censored_matrix
from .numerics import expm, group_inverse
from .riccati import DEFAULT_TOL, LevelBlocks, RiccatiSolution, solve_blocks
from .stationary import mean_cycle_length
from .validation import check_level, check_positive

ETA_BETA_MIN = 1e-12


@dataclass(frozen=True, eq=False)
class TransformPoint:
    """Laplace-Stieltjes transforms of the regeneration cycle at ``s``.

    ``psi_s[k, j]`` is ``E[exp(-s tau); phase j at return]`` for a return
    to the starting level from up phase ``k``; ``phi_s`` is the same for
    leaving level 0 and ``H_s = phi_s @ psi_s``.  This ``psi_s`` is the
    discounted first-return matrix, unrelated to the dual matrix
    ``psi_hat`` of :class:`~mmfluid.riccati.RiccatiSolution`.
    """

    s: float
    T_s: np.ndarray
    phi_s: np.ndarray
    psi_s: np.ndarray
    H_s: np.ndarray
    iterations: int


def _transform(censored, s, algorithm="newton", tol=DEFAULT_TOL, max_iter=None):
    # no sign check on s: the finite-difference helper evaluates slightly left of 0
    part = censored.partition
    Q = censored.generator
    p, q = part.n_up, part.n_down
    T_s = censored_matrix(Q, part, s)
    blocks = LevelBlocks.from_censored(T_s, censored.rates[:p], censored.rates[p:p + q])
    # below rounding of the diagonal T(s) is T(0): keep the zero-drift treatment
    critical = abs(censored.drift) <= 1e-10 and abs(s) <= np.finfo(float).eps * np.abs(T_s).max()
    psi_s, n = solve_blocks(blocks, algorithm, tol, max_iter, critical)
    rest = slice(p, Q.shape[0])
    lhs = -(Q[rest, rest] - s * np.eye(Q.shape[0] - p))
    # M-matrix inverse times a nonnegative block: clear rounding below zero
    phi_s = np.maximum(np.linalg.solve(lhs, Q[rest, :p])[:q], 0.0)
    return TransformPoint(
        s=float(s), T_s=T_s, phi_s=phi_s, psi_s=psi_s, H_s=phi_s @ psi_s, iterations=n
    )


def transform_at(model, s, tol=DEFAULT_TOL, max_iter=None, algorithm="newton"):
    """Evaluate the cycle transforms at ``s >= 0``.

    ``model`` may be a :class:`FluidModel` or an already censored
    generator.  The discounted Riccati equation is solved with the same
    engines as the undiscounted one.
    """
    s = float(check_level(s, "s"))
    censored = model if hasattr(model, "partition") else censor(model)
    return _transform(censored, s, algorithm, tol, max_iter)


def transform_grid(model, s_values, **kwargs):
    censored = model if hasattr(model, "partition") else censor(model)
    return [transform_at(censored, s, **kwargs) for s in s_values]


def mean_first_return(model, solution):
    """Expected regeneration-cycle length given the initial down phase (negative drift only)."""
    if solution.regime is not Regime.POSITIVE_RECURRENT:
        raise RegimeError(
            f"mean cycle length is infinite or undefined for a {solution.regime.value} model"
        )
    censored = solution.censored if solution.censored.model is model else censor(model)
    return mean_cycle_length(censored, solution)


def transform_derivative_mean(model, h=1e-5, tol=DEFAULT_TOL):
    """``-d/ds H_s 1`` at ``s = 0`` by finite differences.

    Central difference when the discounted equation can be solved at
    ``s = -h``; otherwise the second-order one-sided formula on
    ``0, h, 2h``.
    """
    censored = model if hasattr(model, "partition") else censor(model)
    ones = np.ones(censored.n_down)
    up = _transform(censored, h, tol=tol).H_s @ ones
    try:
        down = _transform(censored, -h, tol=tol).H_s @ ones
    except (ConvergenceError, SingularPencilError, NumericalError):
        zero = _transform(censored, 0.0, tol=tol).H_s @ ones
        up2 = _transform(censored, 2 * h, tol=tol).H_s @ ones
        return -(-3 * zero + 4 * up - up2) / (2 * h)
    return -(up - down) / (2 * h)


@dataclass(frozen=True, eq=False)
class EscapeResult:
    """Phase at first exit of the free level from ``(-a, b)`` started at 0.

    ``B[i, k]``: exit through ``b`` in up phase ``k``; ``A[i, j]``: exit
    through ``-a`` in down phase ``j``.  Rows follow the model's original
    phase order, columns the up (resp. down) phases in ascending index
    order.  In null mode ``eta``, ``beta`` and ``w`` are given in internal
    (up, down) order and ``h`` over all phases in original order.
    """

    a: float
    b: float
    B: np.ndarray
    A: np.ndarray
    mode: str
    eta: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    system: Optional[np.ndarray] = None  # I + P, kept for diagnostics

    @property
    def matrix(self):
        """``[B A]``."""
        return np.hstack([self.B, self.A])


def escape_zero_rows(model, central):
    """Rows of ``[B A]`` for zero-rate starting phases.

    ``central`` holds the rows for up then down starting phases (internal
    order).  Returns an ``(m0, m+ + m-)`` array; empty when there is no
    zero phase.
    """
    censored = model if hasattr(model, "partition") else censor(model)
    part = censored.partition
    if part.n_zero == 0:
        return np.zeros((0, central.shape[1]))
    p, q = part.n_up, part.n_down
    Q = censored.generator
    zr = slice(p + q, Q.shape[0])
    weights = np.maximum(np.linalg.solve(-Q[zr, zr], Q[zr, : p + q]), 0.0)
    return weights @ central


def _escape_system(solution, a, b):
    psi, psi_hat = solution.psi, solution.psi_hat
    p, q = psi.shape
    eU_ab = expm(solution.U * (a + b))
    eUh_ab = expm(solution.U_hat * (a + b))
    eUh_b = expm(solution.U_hat * b)
    eU_a = expm(solution.U * a)
    P = np.zeros((p + q, p + q))
    P[:p, p:] = psi @ eU_ab
    P[p:, :p] = psi_hat @ eUh_ab
    Ucal = np.block([[eUh_b, psi @ eU_a], [psi_hat @ eUh_b, eU_a]])
    return np.eye(p + q) + P, Ucal


def escape(model, solution, a, b):
    """Escape probabilities from ``(-a, b)``.

    For non-zero drift the system ``X (I + P) = U`` is solved directly.
    For zero drift ``I + P`` is singular; the extra condition
    ``X beta = h`` built from ``h = -Q# c`` selects the right solution.

    Raises
    ------
    ValueError
        If ``a`` or ``b`` is not strictly positive.
    NumericalError
        If ``eta^T beta`` is not safely positive.
    """
    a = check_positive(a, "a")
    b = check_positive(b, "b")
    if not isinstance(solution, RiccatiSolution) or not solution.complete:
        raise TypeError("escape needs a complete RiccatiSolution")
    censored = solution.censored if solution.censored.model is model else censor(model)
    part = censored.partition
    p, q = part.n_up, part.n_down
    system, Ucal = _escape_system(solution, a, b)

    aux = {}
    if solution.regime is Regime.NULL_RECURRENT:
        mode = "null_recurrent"
        gi = group_inverse(system, singular=True)
        eta = gi.left_null.copy()
        if eta[:p].sum() < 0:
            eta = -eta
        eta /= eta[:p].max()
        h_all = censored.deviation_h
        h = h_all[: p + q]
        beta = np.concatenate([b + h[:p], -a + h[p:]])
        eb = float(eta @ beta)
        if not eb > ETA_BETA_MIN:
            raise NumericalError(f"eta^T beta = {eb:.3e} is not positive")
        base = Ucal @ gi.sharp
        w = (h - base @ beta) / eb
        central = base + np.outer(w, eta)
        aux = dict(eta=eta, beta=beta, w=w, h=h_all[list(part.inverse)])
    else:
        mode = "regular"
        central = np.linalg.solve(system.T, Ucal.T).T

    rows = np.vstack([central, escape_zero_rows(censored, central)])
    rows = rows[list(part.inverse)]
    return EscapeResult(
        a=a, b=b, B=rows[:, :p], A=rows[:, p:], mode=mode, system=system, **aux
    )
