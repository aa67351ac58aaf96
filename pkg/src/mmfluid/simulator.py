"""Monte Carlo oracle for fluid queues.

All randomness comes from numpy's ``Philox`` counter-based generator
(Philox4x32-10) keyed through ``SeedSequence(seed, spawn_key=(target,
start_phase, block))``.  Replications are grouped in fixed blocks of
:data:`BLOCK_SIZE`, each with its own stream, so results depend only on
the seed and the requested sizes.

Paths are simulated event by event: holding times are exponential and
the level moves linearly between events, so hitting times of 0, ``-a``,
``b`` and of grid levels are exact.
"""

import math
from dataclasses import dataclass

import numpy as np

from .model import partition_phases
from .validation import check_level, check_positive

BLOCK_SIZE = 4096
CHUNK_EVENTS = 2**16
LEVEL_CAP = 1e4
MAX_EVENTS = 10**6
Z95 = 1.959963984540054

TAG_PATH, TAG_PSI, TAG_ESCAPE = 1, 2, 3


def _generator(seed, *key):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


class _Neumaier:
    """Compensated running sum of equally shaped arrays."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)

    def add(self, x):
        t = self.total + x
        big = np.abs(self.total) >= np.abs(x)
        self.comp += np.where(big, (self.total - t) + x, (x - t) + self.total)
        self.total = t

    @property
    def value(self):
        return self.total + self.comp


@dataclass(frozen=True)
class SimulationEstimate:
    """Monte Carlo estimate with 95% normal-approximation half-widths.

    ``samples`` is the number of replications per starting phase (or the
    number of complete regeneration cycles for path estimates) and
    ``capped`` the number of replications stopped by the level cap or the
    event limit; capped replications count as not returning.
    """

    value: np.ndarray
    half_width: np.ndarray
    samples: int
    seed: int
    capped: int = 0

    @property
    def std_error(self):
        return self.half_width / Z95


class _Jumps:
    """Holding rates and cumulative jump distributions of the phase chain."""

    def __init__(self, model):
        Q = model.generator
        self.rate = -np.diag(Q).copy()
        P = Q / self.rate[:, None]
        np.fill_diagonal(P, 0.0)
        self.cum = np.cumsum(P, axis=1)
        self.cum[:, -1] = 1.0

    def next_phase(self, phase, u):
        return (self.cum[phase] <= u[:, None]).sum(axis=1)


def _proportion(counts, n):
    p = counts / n
    return p, Z95 * np.sqrt(p * (1.0 - p) / n)


def _lockstep(model, jumps, start, n, rng, lower, upper, max_events):
    """Run ``n`` free paths from level 0 in phase ``start`` until they leave ``(lower, upper)``.

    Returns ``(phase, side)`` arrays: the phase at exit and ``-1`` (below
    ``lower``), ``+1`` (above ``upper``) or ``0`` (event limit reached).
    A path leaves through ``lower`` when the level reaches it in a down
    phase, and through ``upper`` when it reaches it in an up phase.
    """
    c = model.rates
    x = np.zeros(n)
    ph = np.full(n, start, dtype=int)
    out_phase = np.full(n, -1, dtype=int)
    side = np.zeros(n, dtype=int)
    alive = np.arange(n)
    for _ in range(max_events):
        if alive.size == 0:
            break
        k = alive.size
        e = rng.standard_exponential(k)
        u = rng.random(k)
        p = ph[alive]
        x_new = x[alive] + c[p] * (e / jumps.rate[p])
        low = (c[p] < 0) & (x_new <= lower)
        high = (c[p] > 0) & (x_new >= upper)
        done = low | high
        out_phase[alive[done]] = p[done]
        side[alive[low]] = -1
        side[alive[high]] = 1
        keep = ~done
        alive = alive[keep]
        x[alive] = x_new[keep]
        ph[alive] = jumps.next_phase(p[keep], u[keep])
    return out_phase, side


def _blocks(replications):
    full, rest = divmod(int(replications), BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def estimate_psi(model, replications, seed, level_cap=LEVEL_CAP, max_events=MAX_EVENTS):
    """Empirical first-return matrix.

    For each up phase ``k``, ``replications`` free paths start at level 0
    in ``k``; entry ``(k, j)`` is the fraction returning to level 0 in
    down phase ``j``.  Paths that climb to ``level_cap`` (or exceed
    ``max_events`` events) are counted as non-returning; for a transient
    model this biases entries down by at most about ``exp(-gamma L)``
    where ``gamma`` is the decay rate of return probabilities from height ``L``.
    """
    replications = int(replications)
    if replications < 1:
        raise ValueError("replications must be >= 1")
    check_positive(level_cap, "level_cap")
    part = partition_phases(model)
    jumps = _Jumps(model)
    col = np.full(model.n_phases, -1)
    col[list(part.down)] = np.arange(part.n_down)
    counts = np.zeros((part.n_up, part.n_down))
    capped = 0
    for r, k in enumerate(part.up):
        for b, size in enumerate(_blocks(replications)):
            rng = _generator(seed, TAG_PSI, k, b)
            phase, side = _lockstep(model, jumps, k, size, rng, 0.0, level_cap, max_events)
            counts[r] += np.bincount(col[phase[side == -1]], minlength=part.n_down)
            capped += int(np.count_nonzero(side != -1))
    value, hw = _proportion(counts, replications)
    return SimulationEstimate(value, hw, replications, int(seed), capped)


def estimate_escape(model, a, b, replications, seed, max_events=MAX_EVENTS):
    """Empirical phase at first exit from ``(-a, b)`` of the free level.

    Returns an estimate of ``[B A]`` (rows: starting phase in original
    order; columns: up phases then down phases, ascending index).
    """
    a = check_positive(a, "a")
    b = check_positive(b, "b")
    replications = int(replications)
    if replications < 1:
        raise ValueError("replications must be >= 1")
    part = partition_phases(model)
    jumps = _Jumps(model)
    cols = np.full(model.n_phases, -1)
    cols[list(part.up + part.down)] = np.arange(part.n_up + part.n_down)
    m = model.n_phases
    counts = np.zeros((m, part.n_up + part.n_down))
    capped = 0
    for i in range(m):
        for blk, size in enumerate(_blocks(replications)):
            rng = _generator(seed, TAG_ESCAPE, i, blk)
            phase, side = _lockstep(model, jumps, i, size, rng, -a, b, max_events)
            ok = side != 0
            counts[i] += np.bincount(cols[phase[ok]], minlength=counts.shape[1])
            capped += int(np.count_nonzero(~ok))
    value, hw = _proportion(counts, replications)
    return SimulationEstimate(value, hw, replications, int(seed), capped)


@dataclass
class PathSummary:
    """Occupation statistics of one regulated path on ``[0, horizon]``.

    ``occupation[g, j]`` is the time spent with level ``<= levels[g]`` in
    phase ``j`` and ``phase_time[j]`` the total time in phase ``j``; both
    sum exactly over the whole horizon.  Regeneration cycles start when
    the level hits 0 from above in ``regen_phase``; the ``cycle_*`` fields
    hold sufficient statistics over the complete cycles for ratio
    estimates.
    """

    horizon: float
    levels: np.ndarray
    occupation: np.ndarray
    phase_time: np.ndarray
    n_events: int
    regen_phase: int
    n_cycles: int
    cycle_sum: np.ndarray      # per (level, phase)
    cycle_sq: np.ndarray       # sum of squares
    cycle_cross: np.ndarray    # sum of occupation * cycle length
    cycle_len_sum: float
    cycle_len_sq: float
    seed: int = 0

    def ratio_estimate(self):
        """Ratio estimates ``E[occupation per cycle] / E[cycle length]`` with 95% half-widths."""
        n = self.n_cycles
        if n < 2:
            raise ValueError("fewer than two complete regeneration cycles; increase the horizon")
        r = self.cycle_sum / self.cycle_len_sum
        ss = self.cycle_sq - 2 * r * self.cycle_cross + r**2 * self.cycle_len_sq
        var = np.maximum(ss, 0.0) / (n - 1)
        mean_len = self.cycle_len_sum / n
        hw = Z95 * np.sqrt(var / n) / mean_len
        return r, hw


def _walk(jumps, start, n, rng):
    """Phase sequence of ``n`` jumps of the embedded chain from ``start`` (excluded)."""
    m = jumps.cum.shape[0]
    pools = [np.searchsorted(jumps.cum[i], rng.random(n), side="right").tolist() for i in range(m)]
    ptr = [0] * m
    out = [0] * n
    i = start
    for k in range(n):
        j = ptr[i]
        ptr[i] = j + 1
        i = pools[i][j]
        out[k] = i
    return np.array(out, dtype=int)


def _occupation(y0, c, dt, levels):
    """Time with level ``<= x`` during linear segments, regulated at 0; shape (n, G)."""
    y0 = y0[:, None]
    c = c[:, None]
    dt = dt[:, None]
    x = levels[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.clip((x - y0) / c, 0.0, dt)
        down = np.clip(dt - (y0 - x) / -c, 0.0, dt)
    flat = np.where(y0 <= x, dt, 0.0)
    return np.where(c > 0, up, np.where(c < 0, down, flat))


def simulate_path(model, horizon, seed, levels=(), chunk=CHUNK_EVENTS):
    """Simulate the regulated process from ``Y(0) = 0`` in the first down phase.

    Parameters
    ----------
    model : FluidModel
    horizon : float
        Simulated time.
    seed : int
    levels : sequence of float
        Grid levels for the occupation accumulators; level 0 is always
        included as the first grid point.

    Returns
    -------
    PathSummary
    """
    horizon = check_positive(horizon, "horizon")
    grid = np.concatenate([[0.0], np.sort(check_level(np.atleast_1d(levels).astype(float), "levels"))])
    part = partition_phases(model)
    if not part.down:
        raise ValueError("the regulated process never returns to 0 without a down phase")
    jumps = _Jumps(model)
    c_all = model.rates
    m = model.n_phases
    G = grid.size
    rng = _generator(seed, TAG_PATH)

    occ = _Neumaier((G, m))
    ptime = _Neumaier(m)
    csum, csq, ccross = _Neumaier((G, m)), _Neumaier((G, m)), _Neumaier((G, m))
    clen, clen2 = 0.0, 0.0
    n_cycles = 0
    carry_occ = None       # open cycle, None before the first regeneration
    carry_len = 0.0
    regen = None

    t, y, phase = 0.0, 0.0, part.down[0]
    n_events = 0
    while t < horizon:
        # segment k sits in phase ph[k] and lasts dt[k]
        nxt = _walk(jumps, phase, chunk, rng)
        ph = np.concatenate([[phase], nxt[:-1]])
        dt = rng.standard_exponential(chunk) / jumps.rate[ph]
        ends = t + np.cumsum(dt)
        stop = int(np.searchsorted(ends, horizon, side="left"))
        if stop < chunk:
            ph, dt = ph[: stop + 1], dt[: stop + 1].copy()
            dt[-1] = horizon - (ends[stop - 1] if stop else t)
        c = c_all[ph]
        # regulated level at segment starts: reflected partial sums
        s = np.cumsum(c * dt)
        low = np.minimum.accumulate(np.concatenate([[0.0], s]))
        run = np.concatenate([[0.0], s])
        yk = np.maximum(y + run, run - low)
        y0, y_end = yk[:-1], yk[-1]

        seg = _occupation(y0, c, dt, grid)                     # (n, G)
        hit = (c < 0) & (y0 > 0) & (y0 + c * dt <= 0)
        if regen is None and hit.any():
            vals, cnt = np.unique(ph[hit], return_counts=True)
            regen = int(vals[np.argmax(cnt)])
        seg_by_phase = np.zeros((G, m))
        for g in range(G):
            seg_by_phase[g] = np.bincount(ph, weights=seg[:, g], minlength=m)
        occ.add(seg_by_phase)
        ptime.add(np.bincount(ph, weights=dt, minlength=m))

        if regen is not None:
            r_idx = np.flatnonzero(hit & (ph == regen))
            if r_idx.size:
                # pre-hit part of a regenerating segment belongs to the previous cycle
                t_hit = y0[r_idx] / -c[r_idx]
                pre = np.minimum(grid[None, :], y0[r_idx, None]) / -c[r_idx, None]
                starts = np.zeros(ph.size, dtype=bool)
                starts[r_idx] = True
                cid = np.cumsum(starts)                    # cycle id per segment
                n_id = r_idx.size + 1
                onehot = cid * m + ph
                cyc = np.zeros((G, n_id * m))
                for g in range(G):
                    cyc[g] = np.bincount(onehot, weights=seg[:, g], minlength=n_id * m)
                cyc = cyc.reshape(G, n_id, m)
                lens = np.bincount(cid, weights=dt, minlength=n_id)
                ids = np.arange(1, n_id)
                cyc[:, ids, ph[r_idx]] -= pre.T
                cyc[:, ids - 1, ph[r_idx]] += pre.T
                lens[1:] -= t_hit
                lens[:-1] += t_hit
                first = 0
                if carry_occ is None:
                    first = 1   # discard the burn-in before the first regeneration
                else:
                    cyc[:, 0] += carry_occ
                    lens[0] += carry_len
                done_occ = cyc[:, first:-1]          # (G, k, m)
                done_len = lens[first:-1]
                if done_len.size:
                    csum.add(done_occ.sum(axis=1))
                    csq.add((done_occ**2).sum(axis=1))
                    ccross.add((done_occ * done_len[None, :, None]).sum(axis=1))
                    clen += math.fsum(done_len)
                    clen2 += math.fsum(done_len**2)
                    n_cycles += done_len.size
                carry_occ = cyc[:, -1].copy()
                carry_len = float(lens[-1])
            elif carry_occ is not None:
                carry_occ += seg_by_phase
                carry_len += float(dt.sum())

        n_events += ph.size
        t = horizon if stop < chunk else float(ends[-1])
        y = float(y_end)
        phase = int(nxt[-1])

    return PathSummary(
        horizon=horizon,
        levels=grid,
        occupation=occ.value,
        phase_time=ptime.value,
        n_events=n_events,
        regen_phase=-1 if regen is None else regen,
        n_cycles=n_cycles,
        cycle_sum=csum.value,
        cycle_sq=csq.value,
        cycle_cross=ccross.value,
        cycle_len_sum=clen,
        cycle_len_sq=clen2,
        seed=int(seed),
    )


def estimate_stationary(model, horizon, seed, levels=()):
    """Empirical stationary CDF ``P[Y <= x, phase = j]`` by regenerative ratio estimation.

    Returns a :class:`SimulationEstimate` of shape ``(1 + len(levels), m)``;
    row 0 is the boundary mass (level 0).
    """
    path = simulate_path(model, horizon, seed, levels)
    value, hw = path.ratio_estimate()
    return SimulationEstimate(value, hw, path.n_cycles, int(seed), 0)
