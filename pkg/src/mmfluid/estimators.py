"""Estimator-style front end tying the modules together."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .model import FluidModel, censor, classify
from .passage import escape, mean_first_return, transform_at
from .riccati import DEFAULT_TOL, solve, wiener_hopf_residuals
from .stationary import stationary_distribution


class FluidQueue(BaseEstimator):
    """Markov-modulated fluid queue solved through its first-return matrix.

    Parameters
    ----------
    algorithm : {'newton', 'functional'}, default='newton'
        Riccati solver.
    tol : float, default=1e-12
        Stopping tolerance on successive iterates.
    max_iter : int or None
        Iteration cap; ``None`` uses the solver default.
    drift_tol : float, default=1e-10
        Drifts with ``|mu| <= drift_tol`` are treated as zero.

    Attributes
    ----------
    model_ : FluidModel
    censored_ : CensoredGenerator
    solution_ : RiccatiSolution
    regime_ : Regime
    drift_ : float
    n_iter_ : int

    Examples
    --------
    >>> q = FluidQueue().fit([[-2.0, 2.0], [1.0, -1.0]], [1.0, -1.0])
    >>> q.regime_.value
    'PositiveRecurrent'
    >>> q.cdf(0.0).round(6).tolist()
    [0.0, 0.333333]
    """

    def __init__(self, algorithm="newton", tol=DEFAULT_TOL, max_iter=None, drift_tol=1e-10):
        self.algorithm = algorithm
        self.tol = tol
        self.max_iter = max_iter
        self.drift_tol = drift_tol

    def fit(self, generator, rates=None, labels=None):
        """Validate the model and solve for every first-passage matrix.

        ``generator`` may also be a ready :class:`FluidModel`, in which case
        ``rates`` and ``labels`` must be omitted.
        """
        if isinstance(generator, FluidModel):
            if rates is not None or labels is not None:
                raise ValueError("pass either a FluidModel or (generator, rates), not both")
            model = generator
        else:
            if rates is None:
                raise ValueError("rates are required when fitting from a generator matrix")
            model = FluidModel(generator, rates, labels)
        censored = censor(model)
        self.model_ = model
        self.censored_ = censored
        self.drift_ = censored.drift
        self.regime_ = classify(censored, self.drift_tol)
        self.solution_ = solve(censored, self.algorithm, self.tol, self.max_iter, self.drift_tol)
        self.n_iter_ = self.solution_.iterations
        self._stationary = None
        return self

    @property
    def psi_(self):
        check_is_fitted(self, "solution_")
        return self.solution_.psi

    def wiener_hopf(self):
        check_is_fitted(self, "solution_")
        return wiener_hopf_residuals(self.solution_)

    def stationary(self):
        """:class:`StationaryDistribution` (negative drift only)."""
        check_is_fitted(self, "solution_")
        if self._stationary is None:
            self._stationary = stationary_distribution(self.model_, self.solution_)
        return self._stationary

    def cdf(self, x):
        return self.stationary().cdf(x)

    def density(self, x):
        return self.stationary().density(x)

    def transform(self, X):
        """Stationary CDF rows ``G(x)`` for each level in ``X``.

        ``X`` is a 1-d array of levels or an ``(n, 1)`` column.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("transform expects a single column of levels")
            X = X[:, 0]
        return self.stationary().cdf(np.atleast_1d(X))

    def escape(self, a, b):
        check_is_fitted(self, "solution_")
        return escape(self.model_, self.solution_, a, b)

    def laplace_transform(self, s):
        """Regeneration-cycle transforms at ``s >= 0``."""
        check_is_fitted(self, "solution_")
        return transform_at(self.censored_, s, self.tol, self.max_iter, self.algorithm)

    def mean_cycle(self):
        check_is_fitted(self, "solution_")
        return mean_first_return(self.model_, self.solution_)
