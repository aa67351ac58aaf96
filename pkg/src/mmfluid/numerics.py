"""Dense linear-algebra kernels.

Sylvester solver, matrix exponential, group inverse, the integral
``F(K, x) = int_0^x exp(K u) du`` and stationary vectors of generators.
Everything here is a pure function of its inputs.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import NumericalError, SingularPencilError

SINGULAR_RTOL = 1e-10
SYLVESTER_RTOL = 1e-10

# Degree-13 Pade coefficients and the matching scaling threshold
# (Higham, SIAM J. Matrix Anal. Appl. 26, 2005).
_PADE13 = np.array([
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
])
_THETA13 = 5.371920351148152


def solve_sylvester(A, B, C):
    """Solve ``A X + X B + C = 0`` for ``X``.

    The equation is vectorised column-major into the Kronecker system
    ``(I kron A + B^T kron I) vec(X) = -vec(C)``.  Intended for the small
    blocks met in fluid models (``p * q`` up to a few hundred).

    Raises
    ------
    SingularPencilError
        If the system is singular or the residual check
        ``||AX + XB + C||_inf <= 1e-10 (1 + ||C||_inf)`` fails.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    p, q = C.shape
    if A.shape != (p, p) or B.shape != (q, q):
        raise ValueError(
            f"incompatible shapes A{A.shape}, B{B.shape}, C{C.shape}"
        )
    if p == 0 or q == 0:
        return np.zeros((p, q))
    # S[(j,k),(i,l)] of I kron A + B^T kron I, stored as a (q, p, q, p) array
    S = np.zeros((q, p, q, p))
    S[np.arange(q), :, np.arange(q), :] = A
    S[:, np.arange(p), :, np.arange(p)] += B.T
    try:
        x = np.linalg.solve(S.reshape(p * q, p * q), -C.T.ravel())
    except np.linalg.LinAlgError as exc:
        raise SingularPencilError(f"singular Sylvester system: {exc}") from exc
    X = x.reshape(q, p).T
    R = A @ X
    R += X @ B
    R += C
    res = np.abs(R).sum(axis=1).max()
    bound = SYLVESTER_RTOL * (1.0 + np.abs(C).sum(axis=1).max())
    if not np.isfinite(res) or res > bound:
        raise SingularPencilError(
            f"Sylvester residual {res:.3e} exceeds {bound:.3e}; "
            "A and -B likely share an eigenvalue"
        )
    return X


def expm(M):
    """Matrix exponential by scaling and squaring with a [13/13] Pade approximant.

    The number of squarings is chosen from the 1-norm of ``M``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("expm expects a square matrix")
    if n == 0:
        return np.zeros((0, 0))
    norm1 = np.abs(M).sum(axis=0).max()
    if norm1 == 0:
        return np.eye(n)
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
    X = M / (2.0 ** s)
    b = _PADE13
    ident = np.eye(n)
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    odd = X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2) \
        + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * ident
    odd = X @ odd
    even = X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2) \
        + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * ident
    E = np.linalg.solve(even - odd, even + odd)
    for _ in range(s):
        E = E @ E
    return E


@dataclass(frozen=True)
class GroupInverseResult:
    """Group inverse ``K#`` together with the null vectors of ``K``.

    When ``is_singular`` is true, ``K# K = I - v u^T``, ``K# v = 0`` and
    ``u^T v = 1`` with ``v`` scaled to have largest entry 1.  Otherwise
    ``sharp`` is the ordinary inverse and the null vectors are ``None``.
    """

    sharp: np.ndarray
    left_null: Optional[np.ndarray]
    right_null: Optional[np.ndarray]
    is_singular: bool


def group_inverse(K, singular=None):
    """Group inverse of a matrix with at most a simple zero eigenvalue.

    Parameters
    ----------
    K : (n, n) array_like
    singular : bool, optional
        Force (``True``) or forbid (``False``) the rank-one deficient
        branch.  By default ``K`` is treated as singular when its smallest
        singular value is below ``1e-10 * ||K||_2``.

    Raises
    ------
    NumericalError
        If ``K`` has a null space of dimension larger than one.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    Uk, sv, Vh = np.linalg.svd(K)
    thresh = SINGULAR_RTOL * sv[0]
    if singular is None:
        singular = bool(sv[-1] <= thresh)
    if not singular:
        return GroupInverseResult(np.linalg.inv(K), None, None, False)
    if n > 1 and sv[-2] <= thresh:
        raise NumericalError(
            "matrix has a null space of dimension > 1; group inverse not supported"
        )
    v = Vh[-1].copy()
    v /= v[np.argmax(np.abs(v))]
    u = Uk[:, -1].copy()
    u /= u @ v
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = K
    bordered[:n, n] = v
    bordered[n, :n] = u
    sharp = np.linalg.inv(bordered)[:n, :n]
    return GroupInverseResult(sharp, u, v, True)


def integral_F(K, x, gi=None):
    """Return ``F(K, x) = int_0^x exp(K u) du`` for ``x >= 0``.

    ``gi`` is the :class:`GroupInverseResult` of ``K``; it is computed
    when omitted.  The singular branch uses
    ``(-K#)(I - e^{Kx}) + x v u^T``.
    """
    K = np.asarray(K, dtype=float)
    if x < 0:
        raise ValueError("integral_F requires x >= 0")
    if gi is None:
        gi = group_inverse(K)
    n = K.shape[0]
    tail = np.eye(n) - expm(K * x)
    F = -gi.sharp @ tail
    if gi.is_singular:
        F = F + x * np.outer(gi.right_null, gi.left_null)
    return F


def stationary_of(G):
    """Stationary probability vector of an irreducible generator.

    Uses the Grassmann-Taksar-Heyman state reduction, which only touches
    off-diagonal entries and so never cancels.  Only the off-diagonal part
    of ``G`` is read; the diagonal is implied by zero row sums.
    """
    P = np.array(G, dtype=float)
    n = P.shape[0]
    np.fill_diagonal(P, 0.0)
    if np.any(P < 0):
        raise NumericalError("stationary_of expects non-negative off-diagonal entries")
    for k in range(n - 1, 0, -1):
        out = P[k, :k].sum()
        if out <= 0:
            raise NumericalError("generator is reducible; stationary vector not unique")
        P[:k, k] /= out
        P[:k, :k] += np.outer(P[:k, k], P[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ P[:k, k]
    return pi / pi.sum()
