"""Walk engines: streaming single-path and column-vectorized batch.

A walk of memory p repeats, at each step n >= 2 with probability p, a
uniformly chosen past realized step (sign-flipped in negative mode), and
draws fresh from the step law otherwise.  Randomness is addressed, not
consumed: step n owns counters 3(n-1)+{0,1,2} of its path's substream
(coin, copy index, fresh draw), so the streaming and batch engines
produce bit-identical paths and any replicate partition of a batch
produces bit-identical columns.

Copies replay stored realized values: a copy of a copy replicates the
realized value, truncation applies only at a step's own birth index, and
sign flips compose through the stored values themselves.
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass

from .coeffs import VALID_MODES
from .rng import derive_substream, unit_uniform, unit_uniform_array
from .steps import StepDistribution, TruncationRule, quantile, rademacher, truncate

EPS_SLOT, INDEX_SLOT, FRESH_SLOT = 0, 1, 2
SLOTS_PER_STEP = 3


@dataclass(frozen=True)
class WalkConfig:
    mode: str
    p: float
    dist: StepDistribution
    truncation: TruncationRule = TruncationRule()
    track_counts: bool = False
    track_com: bool = True

    def __post_init__(self):
        if self.mode not in VALID_MODES:
            raise ValueError(f"mode must be one of {VALID_MODES}, got {self.mode!r}")
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"memory parameter p must be in [0, 1), got {self.p}")


def erw_config(q: float, **kwargs) -> WalkConfig:
    """Elephant random walk with memory q as a reinforced Rademacher walk.

    q >= 1/2 maps to positive mode with p = 2q-1 (the elephant tends to
    repeat itself), q < 1/2 to negative mode with p = 1-2q (it tends to
    contradict itself); q = 1/2 is the memoryless point.
    """
    if not 0.0 <= q < 1.0:
        raise ValueError(f"memory q must be in [0, 1), got {q}")
    if q >= 0.5:
        return WalkConfig(mode="positive", p=2.0 * q - 1.0, dist=rademacher(), **kwargs)
    return WalkConfig(mode="negative", p=1.0 - 2.0 * q, dist=rademacher(), **kwargs)


@dataclass
class WalkState:
    """One path under construction; owned by a single thread.

    ``realized[:n]`` holds the realized step values (one byte each for
    Rademacher steps).  ``com_sum`` is sum_{k<=n} S_k, or None when the
    center of mass is not tracked.  When counts are tracked,
    ``counts[f]`` is the signed multiplicity of the f-th fresh draw,
    ``fresh_steps[f]`` its step number, and per-step ``origin_pos`` /
    ``origin_sign`` trace each step to its fresh ancestor.
    """

    n: int
    S: float
    key: int
    realized: np.ndarray
    com_sum: float | None
    counts: list | None
    fresh_steps: list | None
    origin_pos: np.ndarray | None
    origin_sign: np.ndarray | None


def init(config: WalkConfig, seed: int, replicate: int = 0) -> WalkState:
    """Fresh state at n=0 with its rng substream derived from (seed, replicate)."""
    dtype = np.int8 if config.dist.kind == "rademacher" else np.float64
    track = config.track_counts
    return WalkState(
        n=0,
        S=0.0,
        key=derive_substream(seed, replicate),
        realized=np.empty(16, dtype=dtype),
        com_sum=0.0 if config.track_com else None,
        counts=[] if track else None,
        fresh_steps=[] if track else None,
        origin_pos=np.empty(16, dtype=np.int64) if track else None,
        origin_sign=np.empty(16, dtype=np.int8) if track else None,
    )


def _grow(buf: np.ndarray, need: int) -> np.ndarray:
    if need <= buf.size:
        return buf
    out = np.empty(max(need, 2 * buf.size), dtype=buf.dtype)
    out[: buf.size] = buf
    return out


def advance(state: WalkState, config: WalkConfig) -> WalkState:
    """Append one step in place (and return the state).

    Step m evaluates its coin counter (m >= 2), then either the copy-index
    counter or the fresh-draw counter; unused counters are simply never
    evaluated, which keeps the addressing identical to the batch engine.
    """
    m = state.n + 1
    base = SLOTS_PER_STEP * (m - 1)
    is_copy = False
    j = 0
    if m >= 2:
        is_copy = unit_uniform(state.key, base + EPS_SLOT) < config.p
    if is_copy:
        u = unit_uniform(state.key, base + INDEX_SLOT)
        j = 1 + int(u * (m - 1))
        j = min(j, m - 1)
        v = state.realized[j - 1]
        if config.mode == "negative":
            v = -v
    else:
        u = unit_uniform(state.key, base + FRESH_SLOT)
        v = truncate(quantile(config.dist, u), m, config.truncation)
    state.realized = _grow(state.realized, m)
    state.realized[m - 1] = v
    state.n = m
    state.S += float(v)
    if state.com_sum is not None:
        state.com_sum += state.S
    if state.counts is not None:
        state.origin_pos = _grow(state.origin_pos, m)
        state.origin_sign = _grow(state.origin_sign, m)
        if is_copy:
            pos = state.origin_pos[j - 1]
            sgn = state.origin_sign[j - 1]
            if config.mode == "negative":
                sgn = -sgn
            state.counts[pos] += int(sgn)
        else:
            pos = len(state.counts)
            state.counts.append(1)
            state.fresh_steps.append(m)
            sgn = 1
        state.origin_pos[m - 1] = pos
        state.origin_sign[m - 1] = sgn
    return state


def run_walk(config: WalkConfig, seed: int, n: int, replicate: int = 0) -> WalkState:
    state = init(config, seed, replicate)
    for _ in range(n):
        advance(state, config)
    return state


def path_values(state: WalkState) -> np.ndarray:
    """Realized steps 1..n as float64."""
    return state.realized[: state.n].astype(np.float64)


def center_of_mass(state: WalkState) -> float:
    """(1/n) sum_{k<=n} S_k."""
    if state.n == 0:
        raise ValueError("center of mass is undefined at n = 0")
    if state.com_sum is None:
        raise ValueError("center of mass was not tracked for this walk")
    return state.com_sum / state.n


def repetition_counts(state: WalkState) -> np.ndarray:
    """Signed multiplicity of each fresh draw, in order of appearance.

    Positive mode: nonnegative counts summing to n.  Negative mode: signed
    multiplicities whose weighted sum over fresh values reconstructs S.
    """
    if state.counts is None:
        raise ValueError("repetition counts were not tracked for this walk")
    return np.asarray(state.counts, dtype=np.int64)


def reconstructed_sum(state: WalkState) -> float:
    """S rebuilt from signed counts and fresh values; exact for integer steps."""
    counts = repetition_counts(state)
    fresh = state.realized[np.asarray(state.fresh_steps, dtype=np.int64) - 1]
    return float(np.dot(counts.astype(np.float64), fresh.astype(np.float64)))


@dataclass
class BatchResult:
    """Final (and optionally per-step) state of R parallel paths.

    Columns are replicates.  ``origin_step``/``origin_sign`` trace every
    step of every path to its fresh ancestor's step number and chain sign.
    """

    n: int
    keys: np.ndarray
    s_final: np.ndarray
    com_final: np.ndarray | None
    realized: np.ndarray | None = None
    s_history: np.ndarray | None = None
    origin_step: np.ndarray | None = None
    origin_sign: np.ndarray | None = None


def batch_walk(
    config: WalkConfig,
    keys,
    n: int,
    record_s: bool = False,
    record_realized: bool = False,
    observer=None,
    slab_elements: int = 2_000_000,
) -> BatchResult:
    """Run one path per key for n steps, vectorized across paths.

    Uniform slabs are generated ``slab_elements`` at a time per counter
    slot.  ``observer(m, s, com)`` is called after every step with live
    buffers (copy before storing).  The realized history is always held in
    memory (copies may reach arbitrarily far back): one byte per
    Rademacher step, eight otherwise, so size jobs accordingly.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))
    r = keys.size
    byte_steps = config.dist.kind == "rademacher"
    realized = np.empty((n, r), dtype=np.int8 if byte_steps else np.float64)
    s = np.zeros(r)
    com = np.zeros(r) if config.track_com else None
    s_history = np.empty((n, r)) if record_s else None
    track = config.track_counts
    origin_step = np.empty((n, r), dtype=np.int32) if track else None
    origin_sign = np.empty((n, r), dtype=np.int8) if track else None
    cols = np.arange(r)
    flat = realized.reshape(-1)
    p = config.p
    neg = config.mode == "negative"
    steps_per_slab = max(1, slab_elements // r)
    m = 1
    while m <= n:
        hi = min(n, m + steps_per_slab - 1)
        ms = np.arange(m, hi + 1, dtype=np.int64)
        base = SLOTS_PER_STEP * (ms - 1)
        u_eps = unit_uniform_array(keys[None, :], (base + EPS_SLOT)[:, None])
        u_idx = unit_uniform_array(keys[None, :], (base + INDEX_SLOT)[:, None])
        u_new = unit_uniform_array(keys[None, :], (base + FRESH_SLOT)[:, None])
        for t in range(ms.size):
            mm = int(ms[t])
            fresh = truncate(quantile(config.dist, u_new[t]), mm, config.truncation)
            if byte_steps:
                fresh = fresh.astype(np.int8)
            if mm == 1:
                vals = fresh
                if track:
                    origin_step[0] = 1
                    origin_sign[0] = 1
            else:
                is_copy = u_eps[t] < p
                idx = (u_idx[t] * (mm - 1)).astype(np.int64) + 1
                np.minimum(idx, mm - 1, out=idx)
                src = (idx - 1) * r + cols
                copies = flat[src]
                if neg:
                    copies = -copies
                vals = np.where(is_copy, copies, fresh)
                if track:
                    anc = origin_step.reshape(-1)[src]
                    sgn = origin_sign.reshape(-1)[src]
                    if neg:
                        sgn = -sgn
                    origin_step[mm - 1] = np.where(is_copy, anc, mm)
                    origin_sign[mm - 1] = np.where(is_copy, sgn, np.int8(1))
            realized[mm - 1] = vals
            s += vals
            if com is not None:
                com += s
            if record_s:
                s_history[mm - 1] = s
            if observer is not None:
                observer(mm, s, com)
        m = hi + 1
    return BatchResult(
        n=n,
        keys=keys,
        s_final=s,
        com_final=com,
        realized=realized if record_realized else None,
        s_history=s_history,
        origin_step=origin_step,
        origin_sign=origin_sign,
    )


def batch_final_stats(
    config: WalkConfig,
    keys,
    n: int,
    chunk: int | None = None,
    byte_budget: int = 400_000_000,
):
    """(s_final, com_final) over many paths with bounded history memory.

    Replicates are processed in chunks; the counter RNG makes any
    partition produce bit-identical columns, so the chunk size is purely
    a memory knob (the realized history is the footprint: one byte per
    step per path for Rademacher, eight otherwise).
    """
    keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))
    if chunk is None:
        per_step = 1 if config.dist.kind == "rademacher" else 8
        chunk = max(1, byte_budget // (n * per_step))
    s_parts = []
    com_parts = []
    for lo in range(0, keys.size, chunk):
        res = batch_walk(config, keys[lo : lo + chunk], n)
        s_parts.append(res.s_final)
        com_parts.append(res.com_final)
    s_final = np.concatenate(s_parts)
    com_final = np.concatenate(com_parts) if config.track_com else None
    return s_final, com_final


def batch_signed_counts(result: BatchResult, column: int) -> np.ndarray:
    """Signed multiplicity per step number (1..n) for one path.

    Entry j is the signed count of the fresh step born at j; entries at
    copied steps are 0.
    """
    if result.origin_step is None:
        raise ValueError("batch was run without count tracking")
    w = result.origin_sign[:, column].astype(np.float64)
    binc = np.bincount(
        result.origin_step[:, column], weights=w, minlength=result.n + 1
    )
    return binc[1:].astype(np.int64)


def batch_count_maxima(result: BatchResult) -> np.ndarray:
    """max_j |signed count of fresh step j| for every path."""
    if result.origin_step is None:
        raise ValueError("batch was run without count tracking")
    r = result.keys.size
    out = np.empty(r)
    for c in range(r):
        out[c] = np.abs(batch_signed_counts(result, c)).max()
    return out
