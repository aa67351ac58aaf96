"""Self-test suite: the model-level identities every solution must satisfy."""

from dataclasses import dataclass

import numpy as np

from .model import Regime, censor
from .passage import escape, transform_at, transform_derivative_mean
from .riccati import DEFAULT_TOL, solve, wiener_hopf_residuals
from .stationary import stationary_distribution

S_GRID = np.round(np.arange(0.0, 2.0001, 0.1), 10)


@dataclass(frozen=True)
class Check:
    """Outcome of one identity check.

    Advisory checks are reported but do not decide the overall verdict.
    """

    name: str
    passed: bool
    value: float
    threshold: float
    advisory: bool = False

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        note = " [advisory]" if self.advisory else ""
        return f"{status}  {self.name}: {self.value:.3e} (limit {self.threshold:.1e}){note}"


def _check(name, value, threshold, advisory=False):
    value = float(value)
    return Check(name, bool(np.isfinite(value) and value <= threshold), value, threshold, advisory)


def overall(checks):
    return all(c.passed for c in checks if not c.advisory)


def _flag(name, ok):
    return Check(name, bool(ok), 0.0 if ok else 1.0, 0.0)


def run_checks(model, algorithm="newton", tol=DEFAULT_TOL, max_iter=None, a=1.0, b=1.0):
    """Run every applicable check on ``model`` and return a list of :class:`Check`."""
    censored = censor(model)
    sol = solve(censored, algorithm, tol, max_iter)
    out = [
        _check("riccati residual (psi)", sol.residual, 1e-10),
        _check("riccati residual (psi_hat)", sol.residual_hat, 1e-10),
        _flag("psi nonnegative", sol.psi.min(initial=0.0) >= 0 and sol.psi_hat.min(initial=0.0) >= 0),
    ]

    rows, rows_hat = sol.psi.sum(axis=1), sol.psi_hat.sum(axis=1)
    if sol.regime is Regime.TRANSIENT:
        out.append(_check("psi row sums < 1", rows.max() - (1 - 1e-6), 0.0))
    else:
        out.append(_check("psi 1 = 1", np.abs(rows - 1).max(), 1e-8))
    if sol.regime is Regime.POSITIVE_RECURRENT:
        out.append(_check("psi_hat row sums < 1", rows_hat.max() - (1 - 1e-6), 0.0))
    else:
        out.append(_check("psi_hat 1 = 1", np.abs(rows_hat - 1).max(), 1e-8))

    wh = wiener_hopf_residuals(sol)
    out += [
        _check("Wiener-Hopf residual (U)", wh.res_U, 1e-8),
        _check("Wiener-Hopf residual (K)", wh.res_K, 1e-8),
        _check("spectrum split", wh.spectrum_gap, 1e-6),
        _flag("critical eigenvalue pattern", wh.separation_ok),
    ]

    p = censored.n_up
    h = censored.deviation_h
    out.append(_check("alpha^T h = 0", abs(censored.alpha @ h), 1e-9))
    if sol.regime is not Regime.TRANSIENT:
        # Advisory: h+ - Psi h- equals lim E[X(t); no return by t] from an up
        # phase, which is not zero in general (on Q=[[-1,1],[1,-1]], c=(1,-1)
        # h = (1/2, -1/2) while Psi = 1).
        h_up, h_down = h[:p], h[p:p + censored.n_down]
        out.append(_check("h+ = Psi h-", np.abs(h_up - sol.psi @ h_down).max(), 1e-8, advisory=True))

    esc = escape(model, sol, a, b)
    M = esc.matrix
    out.append(_check(f"escape rows sum to 1 (a={a:g}, b={b:g})", np.abs(M.sum(axis=1) - 1).max(), 1e-8))
    out.append(_flag("escape probabilities nonnegative", M.min() >= -1e-12))
    if esc.mode == "null_recurrent":
        out.append(_check("eta^T (I + P) = 0", np.abs(esc.eta @ esc.system).max(), 1e-9))

    points = [transform_at(censored, s, tol, max_iter) for s in S_GRID]
    out.append(_check("H_0 = Phi Psi", np.abs(points[0].H_s - sol.phi @ sol.psi).max(), 1e-9))
    steps = [np.max(points[k + 1].H_s - points[k].H_s) for k in range(len(points) - 1)]
    out.append(_check("H_s nonincreasing in s", max(max(steps), 0.0), 1e-12))

    if sol.regime is Regime.POSITIVE_RECURRENT:
        dist = stationary_distribution(model, sol)
        H = sol.phi @ sol.psi
        alpha = censored.alpha[list(censored.partition.inverse)]
        out += [
            _check("rho^T H = rho^T", np.abs(dist.rho @ H - dist.rho).max(), 1e-10),
            _check("rho^T m c = 1", abs(dist.rho @ dist.mean_cycle * dist.norm_c - 1), 1e-10),
            _check("G(inf) = alpha", np.abs(dist.cdf(1e6) - alpha).max(), 1e-8),
            _flag("boundary mass nonnegative, zero on up phases",
                  dist.boundary_mass.min() >= 0
                  and np.all(dist.boundary_mass[list(censored.partition.up)] == 0)),
        ]
        grid = np.linspace(0.0, 10.0 / max(1e-3, -np.linalg.eigvals(dist.K).real.max()), 50)
        G = dist.cdf(grid)
        out.append(_check("G nondecreasing", max(0.0, -np.diff(G, axis=0).min()), 1e-12))
        fd = transform_derivative_mean(censored)
        rel = np.abs(fd - dist.mean_cycle).max() / max(1.0, np.abs(dist.mean_cycle).max())
        out.append(_check("-dH(s)1/ds at 0 = m", rel, 1e-4))
    return out
