"""Input validation helpers.

These follow the scikit-learn convention of ``check_*`` functions that
either return a cleaned ``numpy`` array or raise.  All of them raise
:class:`~mmfluid.exceptions.ModelValidationError`.
"""

import numpy as np
from sklearn.utils import check_array

from .exceptions import ModelValidationError

ROW_SUM_TOL = 1e-12


def _as_float_array(value, name, ndim):
    try:
        arr = check_array(
            value,
            dtype=np.float64,
            ensure_2d=ndim == 2,
            ensure_all_finite=True,
            input_name=name,
        )
    except (TypeError, ValueError) as exc:
        raise ModelValidationError(f"{name}: {exc}") from exc
    return np.array(arr, dtype=np.float64, copy=True)


def check_generator(generator, row_sum_tol=ROW_SUM_TOL):
    """Validate an infinitesimal generator and return it as a float array.

    Checks shape (square, at least 2x2), non-negative off-diagonal
    entries, zero row sums within ``row_sum_tol`` and irreducibility.
    """
    Q = _as_float_array(generator, "generator", 2)
    m, n = Q.shape
    if m != n:
        raise ModelValidationError(f"generator must be square, got shape {Q.shape}")
    if m < 2:
        raise ModelValidationError("a fluid model needs at least two phases")
    off = Q - np.diag(np.diag(Q))
    if np.any(off < 0):
        i, j = np.argwhere(off < 0)[0]
        raise ModelValidationError(
            f"negative off-diagonal generator entry Q[{i},{j}] = {Q[i, j]}"
        )
    sums = Q.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums) > row_sum_tol)
    if bad.size:
        i = bad[0]
        raise ModelValidationError(
            f"generator row {i} sums to {sums[i]:.3e}, expected 0"
        )
    check_irreducible(Q)
    return Q


def check_irreducible(generator):
    """Raise unless the support graph of the off-diagonal entries is strongly connected."""
    Q = np.asarray(generator)
    m = Q.shape[0]
    adj = (Q > 0) & ~np.eye(m, dtype=bool)
    for graph in (adj, adj.T):
        seen = np.zeros(m, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(graph[i] & ~seen):
                seen[j] = True
                stack.append(j)
        if not seen.all():
            missing = np.flatnonzero(~seen)
            raise ModelValidationError(
                f"generator is reducible: phases {missing.tolist()} are not "
                "mutually reachable with phase 0"
            )


def check_rates(rates, n_phases=None):
    """Validate the fluid rate vector."""
    if np.ndim(rates) != 1:
        raise ModelValidationError("rates must be a one-dimensional sequence")
    c = _as_float_array(rates, "rates", 1)
    if n_phases is not None and c.shape[0] != n_phases:
        raise ModelValidationError(
            f"rates has {c.shape[0]} entries but the generator has {n_phases} phases"
        )
    return c


def check_labels(labels, n_phases):
    if labels is None:
        return tuple(f"phase_{i + 1}" for i in range(n_phases))
    labels = tuple(str(x) for x in labels)
    if len(labels) != n_phases:
        raise ModelValidationError(
            f"labels has {len(labels)} entries but the model has {n_phases} phases"
        )
    if len(set(labels)) != len(labels):
        raise ModelValidationError("phase labels must be unique")
    return labels


def check_level(x, name="x", strict=False):
    """Validate a level (scalar or array); returns a float ndarray."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if strict and np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive")
    if not strict and np.any(arr < 0):
        raise ValueError(f"{name} must be non-negative")
    return arr


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value
