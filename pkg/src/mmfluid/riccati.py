"""First-passage matrices of the unbounded fluid process.

The central object is the minimal nonnegative solution ``Psi`` of::

    C+^-1 T+-  +  C+^-1 T++ Psi  +  Psi |C-|^-1 T--  +  Psi |C-|^-1 T-+ Psi  =  0

Two solvers are provided: functional iteration (linear, monotone) and
Newton's method (quadratic when the drift is non-zero).  The dual matrix
``Psi_hat`` is obtained by running the same solver on the block-swapped
equation.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ConvergenceError, NumericalError, SingularPencilError
from .model import Regime, classify
from .numerics import expm, solve_sylvester

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
MAX_ITER_FUNCTIONAL = 10**6
MAX_ITER_NEWTON = 200
MONOTONE_SLACK = 1e-12


def _inf_norm(M):
    return float(np.abs(M).sum(axis=1).max(initial=0.0)) if M.size else 0.0


@dataclass(frozen=True)
class LevelBlocks:
    """Coefficients of the Riccati equation, in level (not time) units.

    ``uu = C+^-1 T++``, ``ud = C+^-1 T+-``, ``du = |C-|^-1 T-+`` and
    ``dd = |C-|^-1 T--``.
    """

    uu: np.ndarray
    ud: np.ndarray
    du: np.ndarray
    dd: np.ndarray

    @classmethod
    def from_censored(cls, T, rates_up, rates_down):
        p = rates_up.shape[0]
        up = 1.0 / rates_up[:, None]
        down = 1.0 / np.abs(rates_down)[:, None]
        return cls(
            uu=up * T[:p, :p],
            ud=up * T[:p, p:],
            du=down * T[p:, :p],
            dd=down * T[p:, p:],
        )

    def swapped(self):
        """Blocks of the dual equation (roles of up and down exchanged)."""
        return LevelBlocks(uu=self.dd, ud=self.du, du=self.ud, dd=self.uu)

    def riccati(self, psi):
        return self.ud + self.uu @ psi + psi @ self.dd + psi @ self.du @ psi

    def residual(self, psi):
        return _inf_norm(self.riccati(psi))

    def shifted(self):
        """Rank-one shift that removes the zero eigenvalue carried by ``1``.

        With ``W = [[uu, ud], [-du, -dd]]`` the shifted matrix is
        ``W + sigma 1 r^T`` with ``r^T 1 = 1``.  Any solution with
        ``Psi 1 = 1`` solves the shifted equation too, and for zero drift
        the shifted linearisation is nonsingular at the solution.
        """
        p, q = self.ud.shape
        sigma = max(np.abs(np.diag(self.uu)).max(), np.abs(np.diag(self.dd)).max(), 1.0)
        r = np.full(p + q, 1.0 / (p + q))
        r_up, r_down = r[:p], r[p:]
        one_up, one_down = np.ones(p), np.ones(q)
        return LevelBlocks(
            uu=self.uu + sigma * np.outer(one_up, r_up),
            ud=self.ud + sigma * np.outer(one_up, r_down),
            du=self.du - sigma * np.outer(one_down, r_up),
            dd=self.dd - sigma * np.outer(one_down, r_down),
        )


def level_blocks(censored):
    p = censored.n_up
    n = p + censored.n_down
    return LevelBlocks.from_censored(censored.T, censored.rates[:p], censored.rates[p:n])


def _functional(blocks, tol, max_iter, callback=None):
    p, q = blocks.ud.shape
    psi = np.zeros((p, q))
    diff = np.inf
    for n in range(1, max_iter + 1):
        U = blocks.dd + blocks.du @ psi
        new = solve_sylvester(blocks.uu, U, blocks.ud)
        step = new - psi
        if step.min(initial=0.0) < -MONOTONE_SLACK:
            raise NumericalError(
                f"functional iteration lost monotonicity at step {n} "
                f"(decrease {-step.min():.3e})"
            )
        diff = np.abs(step).max(initial=0.0)
        psi = new
        if diff <= tol:
            return psi, n
        if callback is not None and callback(n, psi) is False:
            max_iter = n
            break
    raise ConvergenceError(
        f"functional iteration did not converge in {max_iter} steps "
        f"(last step {diff:.3e}, residual {blocks.residual(psi):.3e})",
        iterations=max_iter,
        residual=blocks.residual(psi),
    )


def _newton_step(blocks, psi):
    lhs_a = blocks.uu + psi @ blocks.du
    lhs_b = blocks.dd + blocks.du @ psi
    const = blocks.ud - psi @ blocks.du @ psi
    return solve_sylvester(lhs_a, lhs_b, const)


def _newton(blocks, tol, max_iter, critical=False):
    """Newton iteration from ``Psi = 0``.

    For zero drift the plain iteration only converges linearly and stalls
    near sqrt(machine epsilon); once the step falls below ``sqrt(tol)`` the
    remaining steps are taken on the shifted equation, which has the same
    solution and a nonsingular linearisation.
    """
    p, q = blocks.ud.shape
    psi = np.zeros((p, q))
    active = blocks
    shifted_from = None
    prev = np.inf
    res_floor = tol * max(1.0, _inf_norm(blocks.ud), _inf_norm(blocks.du))
    for n in range(1, max_iter + 1):
        try:
            new = _newton_step(active, psi)
        except SingularPencilError:
            # an iterate that solves the equation to rounding can make the
            # linearisation exactly singular (double root)
            if blocks.residual(psi) <= res_floor:
                return psi, n - 1, shifted_from
            raise
        diff = np.abs(new - psi).max(initial=0.0)
        psi = new
        if diff <= tol:
            return psi, n, shifted_from
        if critical and shifted_from is None and diff <= np.sqrt(tol):
            active = blocks.shifted()
            shifted_from = n
        elif diff >= prev and blocks.residual(psi) <= res_floor:
            # rounding floor: the step no longer shrinks but the equation is satisfied
            return psi, n, shifted_from
        prev = diff
    raise ConvergenceError(
        f"Newton iteration did not converge in {max_iter} steps "
        f"(residual {blocks.residual(psi):.3e})",
        iterations=max_iter,
        residual=blocks.residual(psi),
    )


def solve_blocks(blocks, algorithm="newton", tol=DEFAULT_TOL, max_iter=None, critical=False,
                 callback=None):
    """Minimal nonnegative solution of the Riccati equation given by ``blocks``.

    Returns ``(psi, iterations)``.  ``callback(n, psi)`` is called after
    each unconverged functional-iteration step; returning ``False`` stops
    the iteration with :class:`ConvergenceError`.
    """
    if algorithm == "newton":
        psi, n, _ = _newton(blocks, tol, max_iter or MAX_ITER_NEWTON, critical)
    elif algorithm == "functional":
        psi, n = _functional(blocks, tol, max_iter or MAX_ITER_FUNCTIONAL, callback)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return psi, n


@dataclass(frozen=True)
class RiccatiSolution:
    """First-passage matrices of a fluid model and solver diagnostics.

    Shapes: ``psi`` (m+, m-), ``psi_hat`` (m-, m+), ``U`` and ``K_hat``
    (m-, m-), ``U_hat`` and ``K`` (m+, m+), ``phi`` (m-, m+).  Fields
    other than ``psi``, ``U`` and ``K`` are ``None`` until
    :func:`derive_all` has run.
    """

    psi: np.ndarray
    U: np.ndarray
    K: np.ndarray
    iterations: int
    residual: float
    algorithm: str
    regime: Regime
    slow_mode: bool
    censored: object = dataclasses.field(repr=False)
    psi_hat: Optional[np.ndarray] = None
    U_hat: Optional[np.ndarray] = None
    K_hat: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None
    iterations_hat: Optional[int] = None
    residual_hat: Optional[float] = None

    @property
    def complete(self):
        return self.psi_hat is not None

    def crossing_matrix(self, x):
        """``N(x) = exp(K x)``: expected up-crossings of level ``x`` before return."""
        return expm(self.K * x)


def _solve_psi(censored, algorithm, tol, max_iter, drift_tol, callback=None):
    regime = classify(censored, drift_tol) if drift_tol is not None else classify(censored)
    blocks = level_blocks(censored)
    critical = regime is Regime.NULL_RECURRENT
    psi, n = solve_blocks(blocks, algorithm, tol, max_iter, critical, callback)
    if critical:
        log.info("zero drift: %s iteration ran in slow mode (%d steps)", algorithm, n)
    return RiccatiSolution(
        psi=psi,
        U=blocks.dd + blocks.du @ psi,
        K=blocks.uu + psi @ blocks.du,
        iterations=n,
        residual=blocks.residual(psi),
        algorithm=algorithm,
        regime=regime,
        slow_mode=critical,
        censored=censored,
    )


def solve_psi_functional(censored, tol=DEFAULT_TOL, max_iter=MAX_ITER_FUNCTIONAL, drift_tol=None,
                         callback=None):
    """Functional iteration ``Psi_0 = 0``, ``C+^-1 T+- + C+^-1 T++ Psi_n + Psi_n U_{n-1} = 0``.

    Each iterate is the probability of returning with the stack of
    pending up-excursions never deeper than ``n``, so the sequence is
    entrywise nondecreasing; a decrease larger than ``1e-12`` raises
    :class:`NumericalError`.  ``callback(n, psi)`` may return ``False`` to
    abandon the iteration (for instance on a time budget).
    """
    return _solve_psi(censored, "functional", tol, max_iter, drift_tol, callback)


def solve_psi_newton(censored, tol=DEFAULT_TOL, max_iter=MAX_ITER_NEWTON, drift_tol=None):
    """Newton's method from ``Psi = 0``; quadratic convergence when the drift is non-zero."""
    return _solve_psi(censored, "newton", tol, max_iter, drift_tol)


def _phi(censored):
    """Phase distribution when the regulated process leaves level 0 (m- x m+)."""
    part = censored.partition
    Q = censored.generator
    p, m = part.n_up, censored.model.n_phases
    rest = slice(p, m)
    X = np.linalg.solve(-Q[rest, rest], Q[rest, :p])
    # M-matrix inverse times a nonnegative block: clear rounding below zero
    return np.maximum(X[: part.n_down], 0.0)


def derive_all(censored, psi, tol=DEFAULT_TOL, max_iter=None, callback=None):
    """Complete a solution with ``Psi_hat``, ``U_hat``, ``K_hat`` and ``Phi``.

    ``psi`` is a :class:`RiccatiSolution` from one of the ``solve_psi_*``
    functions; the dual equation is solved with the same algorithm.
    """
    if not isinstance(psi, RiccatiSolution):
        raise TypeError("derive_all expects the RiccatiSolution returned by a solver")
    sol = psi
    blocks = level_blocks(censored)
    dual = blocks.swapped()
    psi_hat, n_hat = solve_blocks(
        dual, sol.algorithm, tol, max_iter, sol.regime is Regime.NULL_RECURRENT, callback
    )
    return dataclasses.replace(
        sol,
        psi_hat=psi_hat,
        U_hat=blocks.uu + blocks.ud @ psi_hat,
        K_hat=blocks.dd + psi_hat @ blocks.ud,
        phi=_phi(censored),
        iterations_hat=n_hat,
        residual_hat=dual.residual(psi_hat),
    )


def solve(censored, algorithm="newton", tol=DEFAULT_TOL, max_iter=None, drift_tol=None,
          callback=None):
    """Solve for ``Psi`` and derive every companion matrix.

    ``callback`` is forwarded to functional iteration and ignored by Newton.
    """
    if algorithm == "newton":
        sol = solve_psi_newton(censored, tol, max_iter or MAX_ITER_NEWTON, drift_tol)
    elif algorithm == "functional":
        sol = solve_psi_functional(
            censored, tol, max_iter or MAX_ITER_FUNCTIONAL, drift_tol, callback
        )
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return derive_all(censored, sol, tol, max_iter, callback)


@dataclass(frozen=True)
class WienerHopfReport:
    res_U: float
    res_K: float
    separation_ok: bool
    similarity_res: Optional[float]
    spectrum_gap: float
    eigenvalues: np.ndarray
    critical_pair: tuple


def _deflated_eigs(W):
    """Spectrum of ``W`` given that ``W 1 = 0`` holds exactly.

    A Householder reflection maps ``1`` to the first basis vector, which
    splits off the known zero eigenvalue.  For zero drift ``W`` carries a
    defective double zero that LAPACK only resolves to about
    ``sqrt(eps ||W||)``; after deflation the second zero is simple.
    """
    n = W.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    v[0] += 1.0
    H = np.eye(n) - np.outer(v, v) * (2.0 / (v @ v))
    B = H @ W @ H
    ev = np.concatenate([[0.0], np.linalg.eigvals(B[1:, 1:])])
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def _multiset_distance(a, b):
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max(initial=0.0))


def wiener_hopf_residuals(solution, censored=None):
    """Check both Wiener-Hopf factorisations of ``C^-1 T`` and the spectral split.

    ``separation_ok`` requires the eigenvalues ``lambda_{m+}`` and
    ``lambda_{m+ + 1}`` (sorted by real part) to be real, strictly separated
    from the rest of the spectrum and to follow the sign pattern of the
    drift regime: ``lambda_{m+} < 0 = lambda_{m+ + 1}`` for negative drift,
    ``lambda_{m+} = 0 < lambda_{m+ + 1}`` for positive drift and a double
    zero (within ``1e-6 max(1, ||W||)``) for zero drift.
    """
    if censored is None:
        censored = solution.censored
    if not solution.complete:
        raise ValueError("wiener_hopf_residuals needs a solution from derive_all")
    p, q = censored.n_up, censored.n_down
    W = censored.T / censored.rates[: p + q, None]
    psi, psi_hat = solution.psi, solution.psi_hat
    Ip, Iq = np.eye(p), np.eye(q)
    left = np.block([[Ip, psi], [psi_hat, Iq]])
    right = np.block([[Ip, -psi], [-psi_hat, Iq]])
    zpq = np.zeros((p, q))
    diag_u = np.block([[solution.U_hat, zpq], [zpq.T, -solution.U]])
    diag_k = np.block([[solution.K, zpq], [zpq.T, -solution.K_hat]])
    res_U = _inf_norm(W @ left - left @ diag_u)
    res_K = _inf_norm(right @ W - diag_k @ right)

    ev = _deflated_eigs(W)
    zero_tol = 1e-6 * max(1.0, _inf_norm(W))
    lo, hi = ev[p - 1], ev[p]
    ok = abs(lo.imag) <= zero_tol and abs(hi.imag) <= zero_tol
    if p >= 2:
        ok = ok and ev[p - 2].real < min(lo.real, hi.real) - zero_tol
    if q >= 2:
        ok = ok and ev[p + 1].real > max(lo.real, hi.real) + zero_tol
    # one of the pair is the deflated exact zero; for non-zero drift the
    # other one must lie strictly on the side given by the drift sign
    if solution.regime is Regime.POSITIVE_RECURRENT:
        ok = ok and hi == 0 and lo.real < 0
    elif solution.regime is Regime.TRANSIENT:
        ok = ok and lo == 0 and hi.real > 0
    else:
        ok = ok and abs(lo.real) <= zero_tol and abs(hi.real) <= zero_tol

    split = np.concatenate([np.linalg.eigvals(solution.U_hat), np.linalg.eigvals(-solution.U)])
    gap = _multiset_distance(ev, split)

    sim = None
    if solution.regime is not Regime.NULL_RECURRENT:
        a = np.eye(p) - psi @ psi_hat
        b = np.eye(q) - psi_hat @ psi
        sim = max(
            _inf_norm(solution.K @ a - a @ solution.U_hat),
            _inf_norm(solution.K_hat @ b - b @ solution.U),
        )
    return WienerHopfReport(
        res_U=res_U,
        res_K=res_K,
        separation_ok=bool(ok),
        similarity_res=sim,
        spectrum_gap=gap,
        eigenvalues=ev,
        critical_pair=(lo, hi),
    )
