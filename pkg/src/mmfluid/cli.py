"""Command-line interface: ``mmfluid <command> MODEL [options]``.

Exit status: 0 success, 1 invalid input (or a failed ``verify`` check),
2 numerical failure or non-convergence, 3 the model's regime does not
support the request.
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ModelValidationError, NumericalError, RegimeError
from .model import censor, classify, load_model, partition_phases
from .numerics import stationary_of
from .passage import escape, transform_at
from .riccati import DEFAULT_TOL, solve, wiener_hopf_residuals
from .stationary import density_grid, stationary_distribution
from .verify import overall, run_checks

log = logging.getLogger("mmfluid")

COMMANDS = ("info", "psi", "stationary", "escape", "transform", "simulate", "verify")
DEFAULT_FORMAT = {
    "info": "json", "psi": "json", "simulate": "json", "verify": "json",
    "stationary": "csv", "escape": "csv", "transform": "csv",
}
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_REGIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    model_path: str
    algorithm: str = "newton"
    tol: float = DEFAULT_TOL
    max_iter: Optional[int] = None
    x_max: float = 10.0
    points: int = 101
    a: Optional[float] = None
    b: Optional[float] = None
    s_grid: tuple = tuple(np.round(np.arange(0.0, 2.0001, 0.1), 10))
    horizon: Optional[float] = None
    replications: int = 10000
    seed: int = 0
    output: Optional[str] = None
    format: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        for name in ("tol", "x_max"):
            if not getattr(self, name) > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        for name in ("a", "b", "horizon"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise UsageError(f"-{name} must be positive" if len(name) == 1 else f"--{name} must be positive")
        if self.points < 2:
            raise UsageError("--points must be at least 2")
        if self.replications < 1:
            raise UsageError("--replications must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise UsageError("--max-iter must be positive")
        if any(s < 0 for s in self.s_grid):
            raise UsageError("--s-grid values must be nonnegative")
        if self.command == "escape" and (self.a is None or self.b is None):
            raise UsageError("escape requires both -a and -b")
        if self.seed < 0:
            raise UsageError("--seed must be nonnegative")
        if self.format is None:
            self.format = DEFAULT_FORMAT[self.command]


def _parse_grid(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid s grid {text!r}") from None


def build_parser():
    p = _Parser(prog="mmfluid", description="Markov-modulated fluid queue solver")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("model_path", metavar="MODEL", help="model document (JSON)")
    p.add_argument("--algorithm", choices=("functional", "newton"), default="newton")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--x-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("-a", type=float, default=None, help="lower escape distance")
    p.add_argument("-b", type=float, default=None, help="upper escape distance")
    p.add_argument("--s-grid", type=_parse_grid, default=RunConfig.s_grid,
                   help="comma-separated transform arguments")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--replications", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    return p


def _num(x):
    return format(float(x), ".17g")


def _matrix_rows(name, M, row_labels, col_labels):
    return [[name, r, c, _num(M[i, j])]
            for i, r in enumerate(row_labels) for j, c in enumerate(col_labels)]


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _labels(model, idx):
    return [model.phase_labels[i] for i in idx]


def _info(model, cfg):
    part = partition_phases(model)
    alpha = stationary_of(model.generator)
    drift = float(alpha @ model.rates)
    doc = {
        "n_phases": model.n_phases,
        "labels": list(model.phase_labels),
        "partition": {k: _labels(model, getattr(part, k)) for k in ("up", "down", "zero")},
        "alpha": alpha,
        "drift": drift,
    }
    if part.up and part.down:
        censored = censor(model, part)
        sol = solve(censored, cfg.algorithm, cfg.tol, cfg.max_iter)
        wh = wiener_hopf_residuals(sol)
        doc["regime"] = classify(censored).value
        doc["eigenvalues"] = [complex(v) for v in wh.eigenvalues]
        doc["critical_pair"] = [complex(v) for v in wh.critical_pair]
        doc["separation_ok"] = wh.separation_ok
    else:
        doc["regime"] = "PositiveRecurrent" if drift < -1e-10 else (
            "Transient" if drift > 1e-10 else "NullRecurrent")
    rows = [["n_phases", model.n_phases], ["drift", _num(drift)], ["regime", doc["regime"]]]
    for k in ("up", "down", "zero"):
        rows.append([k, " ".join(doc["partition"][k])])
    if "separation_ok" in doc:
        rows.append(["separation_ok", doc["separation_ok"]])
    return doc, (["key", "value"], rows)


def _psi(model, cfg):
    censored = censor(model)
    sol = solve(censored, cfg.algorithm, cfg.tol, cfg.max_iter)
    part = censored.partition
    up, down = _labels(model, part.up), _labels(model, part.down)
    mats = {
        "psi": (sol.psi, up, down), "psi_hat": (sol.psi_hat, down, up),
        "U": (sol.U, down, down), "U_hat": (sol.U_hat, up, up),
        "K": (sol.K, up, up), "K_hat": (sol.K_hat, down, down),
        "phi": (sol.phi, down, up),
    }
    doc = {
        "algorithm": sol.algorithm,
        "regime": sol.regime.value,
        "drift": censored.drift,
        "iterations": sol.iterations,
        "iterations_hat": sol.iterations_hat,
        "residual": sol.residual,
        "residual_hat": sol.residual_hat,
        "up": up,
        "down": down,
    }
    doc.update({k: v[0] for k, v in mats.items()})
    rows = [["iterations", "", "", sol.iterations], ["iterations_hat", "", "", sol.iterations_hat],
            ["residual", "", "", _num(sol.residual)], ["residual_hat", "", "", _num(sol.residual_hat)]]
    for name, (M, r, c) in mats.items():
        rows += _matrix_rows(name, M, r, c)
    return doc, (["quantity", "row", "column", "value"], rows)


def _stationary(model, cfg):
    sol = solve(censor(model), cfg.algorithm, cfg.tol, cfg.max_iter)
    dist = stationary_distribution(model, sol)
    xs = np.linspace(0.0, cfg.x_max, cfg.points)
    G = dist.cdf(xs)
    g = density_grid(dist, xs)
    labels = list(model.phase_labels)
    header = ["x"] + labels + [f"density_{lab}" for lab in labels]
    rows = [[_num(x)] + [_num(v) for v in G[i]] + [_num(v) for v in g[i]] for i, x in enumerate(xs)]
    doc = {
        "x": xs, "cdf": G, "density": g, "labels": labels,
        "boundary_mass": dist.boundary_mass, "norm_c": dist.norm_c,
        "mean_cycle": dist.mean_cycle, "rho": dist.rho,
    }
    return doc, (header, rows)


def _escape(model, cfg):
    sol = solve(censor(model), cfg.algorithm, cfg.tol, cfg.max_iter)
    res = escape(model, sol, cfg.a, cfg.b)
    part = partition_phases(model)
    up, down = _labels(model, part.up), _labels(model, part.down)
    header = ["phase"] + [f"B_{u}" for u in up] + [f"A_{d}" for d in down]
    M = res.matrix
    rows = [[lab] + [_num(v) for v in M[i]] for i, lab in enumerate(model.phase_labels)]
    doc = {"a": res.a, "b": res.b, "mode": res.mode, "phases": list(model.phase_labels),
           "up": up, "down": down, "B": res.B, "A": res.A}
    if res.mode == "null_recurrent":
        doc.update(eta=res.eta, beta=res.beta, w=res.w, h=res.h)
    return doc, (header, rows)


def _transform(model, cfg):
    censored = censor(model)
    down = _labels(model, censored.partition.down)
    pts = [transform_at(censored, s, cfg.tol, cfg.max_iter, cfg.algorithm) for s in cfg.s_grid]
    header = ["s"] + [f"H_{i}_{j}" for i in down for j in down]
    rows = [[_num(pt.s)] + [_num(v) for v in pt.H_s.ravel()] for pt in pts]
    doc = {"down": down, "s": [pt.s for pt in pts], "H_s": [pt.H_s for pt in pts]}
    return doc, (header, rows)


def _simulate(model, cfg):
    from .simulator import estimate_escape, estimate_psi, estimate_stationary

    part = partition_phases(model)
    up, down = _labels(model, part.up), _labels(model, part.down)
    doc = {"seed": cfg.seed, "replications": cfg.replications}
    rows = []

    def add(name, est, r, c):
        doc[name] = {"value": est.value, "half_width": est.half_width,
                     "samples": est.samples, "capped": est.capped}
        for i, rl in enumerate(r):
            for j, cl in enumerate(c):
                rows.append([name, rl, cl, _num(est.value[i, j]), _num(est.half_width[i, j])])

    if part.up and part.down:
        add("psi", estimate_psi(model, cfg.replications, cfg.seed), up, down)
    if cfg.a is not None and cfg.b is not None:
        add("escape", estimate_escape(model, cfg.a, cfg.b, cfg.replications, cfg.seed),
            list(model.phase_labels), [f"B_{u}" for u in up] + [f"A_{d}" for d in down])
    if cfg.horizon is not None:
        xs = np.linspace(0.0, cfg.x_max, min(cfg.points, 11))[1:]
        est = estimate_stationary(model, cfg.horizon, cfg.seed, xs)
        add("stationary_cdf", est, ["0"] + [_num(x) for x in xs], list(model.phase_labels))
    return doc, (["target", "row", "column", "value", "half_width"], rows)


def _verify(model, cfg):
    a = cfg.a if cfg.a is not None else 1.0
    b = cfg.b if cfg.b is not None else 1.0
    checks = run_checks(model, cfg.algorithm, cfg.tol, cfg.max_iter, a, b)
    for ch in checks:
        log.info(ch.line())
    doc = {"passed": overall(checks),
           "checks": [{"name": c.name, "passed": c.passed, "value": c.value,
                       "threshold": c.threshold, "advisory": c.advisory} for c in checks]}
    rows = [[c.name, ("pass" if c.passed else "fail") + (" (advisory)" if c.advisory else ""),
             _num(c.value), _num(c.threshold)] for c in checks]
    return doc, (["check", "status", "value", "threshold"], rows)


HANDLERS = {
    "info": _info, "psi": _psi, "stationary": _stationary, "escape": _escape,
    "transform": _transform, "simulate": _simulate, "verify": _verify,
}


def run(cfg):
    """Execute ``cfg``; returns ``(exit_status, document_text)``.

    Exceptions are mapped to exit statuses by :func:`main`.
    """
    model = load_model(cfg.model_path)
    doc, (header, rows) = HANDLERS[cfg.command](model, cfg)
    if cfg.format == "json":
        text = json.dumps(_jsonable(doc), indent=2) + "\n"
    else:
        text = _csv_text(header, rows)
    status = EXIT_OK
    if cfg.command == "verify" and not doc["passed"]:
        status = EXIT_INVALID
    return status, text


def main(argv=None):
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        cfg = RunConfig(**vars(args))
        status, text = run(cfg)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except RegimeError as exc:
        log.error("%s", exc)
        return EXIT_REGIME
    except NumericalError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL
    except (ModelValidationError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
