"""Shared helpers for the test suite."""

import numpy as np
from hypothesis import strategies as st

from mmfluid import censor, solve
from mmfluid.datasets import make_fluid_model

# lines printed in the terminal summary by conftest
ACCEPTANCE_LINES = []


def fit(model, **kw):
    return solve(censor(model), **kw)


@st.composite
def fluid_models(draw, drift=None, max_phases=8, zero_phases=True):
    """Random irreducible models through :func:`make_fluid_model`."""
    m = draw(st.integers(2, max_phases))
    n_zero = draw(st.integers(0, min(2, m - 2))) if zero_phases else 0
    if drift is None:
        drift = st.sampled_from(["negative", "zero", "positive"])
    if isinstance(drift, st.SearchStrategy):
        drift = draw(drift)
    seed = draw(st.integers(0, 2**31 - 1))
    return make_fluid_model(m, drift, n_zero=n_zero, random_state=seed)


def alpha_original(censored):
    return censored.alpha[list(censored.partition.inverse)]


def random_models(n, seed=0, max_phases=20):
    """``n`` models with m in {2..max_phases}, drift regimes cycling negative/zero/positive."""
    rng = np.random.RandomState(seed)
    out = []
    for k in range(n):
        m = rng.randint(2, max_phases + 1)
        drift = ("negative", "zero", "positive")[k % 3]
        n_zero = min(rng.randint(0, 4), m - 2) if rng.rand() < 0.3 else 0
        out.append(make_fluid_model(m, drift, n_zero=n_zero, random_state=rng))
    return out

