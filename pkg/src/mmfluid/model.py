"""Fluid model definition, phase partition and censored generator."""

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from .exceptions import ModelValidationError, RegimeError
from .numerics import group_inverse, stationary_of
from .validation import check_generator, check_labels, check_rates

DRIFT_TOL = 1e-10


def _frozen(arr):
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


class Regime(str, Enum):
    """Recurrence class of the regulated process, decided by the sign of the drift."""

    POSITIVE_RECURRENT = "PositiveRecurrent"
    NULL_RECURRENT = "NullRecurrent"
    TRANSIENT = "Transient"


@dataclass(frozen=True, eq=False)
class FluidModel:
    """A Markov-modulated fluid model ``(Q, c)``.

    Parameters
    ----------
    generator : (m, m) array_like
        Irreducible generator of the phase process.
    rates : (m,) array_like
        Net fluid rate in each phase.
    phase_labels : sequence of str, optional
        Names used in CSV headers; defaults to ``phase_1 ... phase_m``.

    The arrays are copied and made read-only on construction.
    """

    generator: np.ndarray
    rates: np.ndarray
    phase_labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        Q = check_generator(self.generator)
        c = check_rates(self.rates, Q.shape[0])
        labels = check_labels(self.phase_labels, Q.shape[0])
        object.__setattr__(self, "generator", _frozen(Q))
        object.__setattr__(self, "rates", _frozen(c))
        object.__setattr__(self, "phase_labels", labels)

    @property
    def n_phases(self):
        return self.generator.shape[0]

    def __repr__(self):
        return f"FluidModel(n_phases={self.n_phases}, rates={self.rates.tolist()})"


@dataclass(frozen=True)
class PhasePartition:
    """Indices of up (c > 0), down (c < 0) and zero-rate phases.

    ``permutation`` lists original indices in (up, down, zero) order, so
    ``X[np.ix_(perm, perm)]`` is the permuted matrix.  ``inverse`` maps
    back: ``y_perm[inverse]`` is ``y`` in the original order.
    """

    up: Tuple[int, ...]
    down: Tuple[int, ...]
    zero: Tuple[int, ...]
    permutation: Tuple[int, ...] = field(init=False)
    inverse: Tuple[int, ...] = field(init=False)

    def __post_init__(self):
        perm = self.up + self.down + self.zero
        inv = np.empty(len(perm), dtype=int)
        inv[list(perm)] = np.arange(len(perm))
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "inverse", tuple(int(i) for i in inv))

    @property
    def n_up(self):
        return len(self.up)

    @property
    def n_down(self):
        return len(self.down)

    @property
    def n_zero(self):
        return len(self.zero)

    def slices(self):
        """Slices of the up, down and zero blocks in permuted order."""
        p, d = self.n_up, self.n_down
        return slice(0, p), slice(p, p + d), slice(p + d, p + d + self.n_zero)


def load_model(source):
    """Build a validated :class:`FluidModel` from a model document.

    ``source`` is a path, an open text file, a JSON string or an already
    parsed mapping with keys ``generator``, ``rates`` and optional ``labels``.
    """
    if isinstance(source, dict):
        doc = source
    else:
        try:
            if hasattr(source, "read"):
                doc = json.load(source)
            elif isinstance(source, (str, os.PathLike)) and os.path.exists(source):
                with open(source, encoding="utf-8") as fh:
                    doc = json.load(fh)
            elif isinstance(source, str) and source.lstrip().startswith("{"):
                doc = json.loads(source)
            elif isinstance(source, (str, os.PathLike)):
                raise ModelValidationError(f"model file not found: {source}")
            else:
                raise ModelValidationError(f"cannot read model document from {source!r}")
        except json.JSONDecodeError as exc:
            raise ModelValidationError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelValidationError("model document must be a JSON object")
    missing = {"generator", "rates"} - set(doc)
    if missing:
        raise ModelValidationError(f"model document lacks keys: {sorted(missing)}")
    unknown = set(doc) - {"generator", "rates", "labels"}
    if unknown:
        raise ModelValidationError(f"unknown keys in model document: {sorted(unknown)}")
    return FluidModel(doc["generator"], doc["rates"], doc.get("labels"))


def dump_model(model):
    """Inverse of :func:`load_model`: the model as a JSON-ready dict."""
    return {
        "generator": model.generator.tolist(),
        "rates": model.rates.tolist(),
        "labels": list(model.phase_labels),
    }


def partition_phases(model):
    c = model.rates
    return PhasePartition(
        up=tuple(int(i) for i in np.flatnonzero(c > 0)),
        down=tuple(int(i) for i in np.flatnonzero(c < 0)),
        zero=tuple(int(i) for i in np.flatnonzero(c == 0)),
    )


def censored_matrix(Q, partition, s=0.0):
    """``T(s)``: the (up, down) block of ``Q - sI`` with zero phases integrated out.

    ``Q`` must already be in permuted order.
    """
    n_moving = partition.n_up + partition.n_down
    mv = slice(0, n_moving)
    zr = slice(n_moving, Q.shape[0])
    T = Q[mv, mv] - s * np.eye(n_moving)
    if partition.n_zero:
        Q00 = Q[zr, zr] - s * np.eye(partition.n_zero)
        T = T + Q[mv, zr] @ np.linalg.solve(-Q00, Q[zr, mv])
    return T


@dataclass(frozen=True, eq=False)
class CensoredGenerator:
    """Phase generator observed only while the level moves.

    ``generator`` and ``rates`` are the model's ``Q`` and ``c`` permuted to
    (up, down, zero) order; ``alpha`` is the stationary vector of ``Q`` in
    the same order and ``drift`` is ``alpha @ c``.
    """

    T: np.ndarray
    drift: float
    alpha: np.ndarray
    model: FluidModel
    partition: PhasePartition
    generator: np.ndarray
    rates: np.ndarray

    @property
    def n_up(self):
        return self.partition.n_up

    @property
    def n_down(self):
        return self.partition.n_down

    def blocks(self, name):
        """Block of the permuted generator, e.g. ``blocks('+0')`` is ``Q_{+0}``."""
        sl = dict(zip("+-0", self.partition.slices()))
        return self.generator[sl[name[0]], sl[name[1]]]

    @cached_property
    def deviation_h(self):
        """``h = -Q# c`` in permuted order (expected ultimate level offset when mu = 0)."""
        gi = group_inverse(self.generator, singular=True)
        return -gi.sharp @ self.rates


def censor(model, partition=None):
    """Censor out the zero-rate phases and compute the stationary drift."""
    if partition is None:
        partition = partition_phases(model)
    if not partition.up or not partition.down:
        raise RegimeError("one-directional model: Psi undefined (need both up and down phases)")
    perm = list(partition.permutation)
    Q = model.generator[np.ix_(perm, perm)]
    c = model.rates[perm]
    T = censored_matrix(Q, partition)
    alpha = stationary_of(Q)
    return CensoredGenerator(
        T=_frozen(T),
        drift=float(alpha @ c),
        alpha=_frozen(alpha),
        model=model,
        partition=partition,
        generator=_frozen(Q),
        rates=_frozen(c),
    )


def classify(censored, drift_tol=DRIFT_TOL):
    """Recurrence regime of the regulated process."""
    mu = censored.drift
    if mu < -drift_tol:
        return Regime.POSITIVE_RECURRENT
    if mu > drift_tol:
        return Regime.TRANSIENT
    return Regime.NULL_RECURRENT
