"""Symbol time diversity: a high-order alphabet hidden in a lower-order one.

Source symbol ``a_i`` of subset ``n`` becomes ``i`` repetitions of ``b_n``.
When two consecutive source symbols share a subset the second one is sent on
the escape point (the last target symbol) so that run boundaries stay
visible.  The receiver segments the oversampled stream with a dynamic
program over (samples consumed, runs produced).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import ScalarChannel
from .constellation import Constellation
from .errors import (
    DecodeFailureError,
    DurationError,
    FrameLengthError,
    ProtocolError,
    SingularChannelError,
)

SENTINEL = 1e6


class DurationRun(NamedTuple):
    symbol: int
    duration: int


@dataclass(frozen=True)
class StdCodebook:
    source: Constellation
    target: Constellation
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if len(groups) != self.target.order - 1:
            raise ValueError("need one subset per non-escape target symbol")
        flat = [i for g in groups for i in g]
        if sorted(flat) != list(range(self.source.order)):
            raise ValueError("subsets must be disjoint and cover the source alphabet")
        if any(len(g) == 0 for g in groups):
            raise ValueError("empty subset")
        where = np.empty((self.source.order, 2), dtype=int)
        for n, g in enumerate(groups):
            for i, a in enumerate(g):
                where[a] = (n, i + 1)
        where.setflags(write=False)
        object.__setattr__(self, "_where", where)

    @property
    def k_max(self) -> int:
        return max(len(g) for g in self.groups)

    @property
    def escape(self) -> int:
        return self.target.order - 1

    def locate(self, source_index: int) -> tuple[int, int]:
        """``(subset, duration)`` of a source symbol; duration is 1-based."""
        n, i = self._where[source_index]
        return int(n), int(i)


def consecutive_codebook(source: Constellation, target: Constellation) -> StdCodebook:
    """Subset n holds source points ``n*K .. n*K+K-1`` (adjacent phases for PSK)."""
    slots = target.order - 1
    if source.order % slots:
        raise ValueError(f"{source.order} symbols do not split evenly into {slots} subsets")
    k = source.order // slots
    return StdCodebook(source, target, tuple(tuple(range(n * k, n * k + k)) for n in range(slots)))


def std_encode(s, cb: StdCodebook, indices: bool = False):
    """Runs for a frame of source symbols and the sample stream they expand to.

    ``s`` holds complex symbols, or source indices when ``indices`` is true.
    Returns ``(runs, x_prime)``.
    """
    idx = np.asarray(s, dtype=int) if indices else cb.source.index_of(s)
    runs: list[DurationRun] = []
    prev_subset, prev_escaped = None, False
    for a in idx.reshape(-1):
        n, i = cb.locate(int(a))
        if prev_subset == n and not prev_escaped:
            runs.append(DurationRun(cb.escape, i))
            prev_escaped = True
        else:
            runs.append(DurationRun(n, i))
            prev_escaped = False
        prev_subset = n
    symbols = np.repeat(np.array([r.symbol for r in runs], dtype=int), [r.duration for r in runs])
    return runs, cb.target.points[symbols]


def group_mean_symbol(window, target: Constellation) -> int:
    """Index of the target point nearest to the window mean (lowest index on ties)."""
    window = np.asarray(window, dtype=complex)
    if window.size < 1:
        raise ValueError("empty window")
    return int(target.nearest(window.mean()))


@dataclass
class DpState:
    cost: np.ndarray
    path: np.ndarray
    estimate: np.ndarray
    frame_length: int

    @property
    def samples(self) -> int:
        return self.cost.shape[0] - 1


def dp_tables(y_prime, cb: StdCodebook, frame_length: int, ch: ScalarChannel | None = None,
              single_cost: float | None = None) -> DpState:
    """Fill the cost/path tables for one frame.

    ``cost[j, l]`` is the cheapest split of the first ``j`` samples into
    ``l`` runs.  Each candidate run of length ``k`` ending at sample ``j``
    costs the mean modulus distance of its samples to the target point
    closest to their average; ``single_cost`` replaces that value for
    ``k = 1`` when given.  Ties prefer the shorter run.
    """
    y = np.asarray(y_prime, dtype=complex).reshape(-1)
    h = 1.0 if ch is None else ch.h
    if h == 0:
        raise SingularChannelError("cannot equalise a zero channel")
    y = y / h
    J, L, kmax = y.size, int(frame_length), cb.k_max
    if L < 1 or J < L or J > L * kmax:
        raise FrameLengthError(f"{J} samples cannot hold {L} runs of length 1..{kmax}")

    # local costs for every (end sample j, run length k), vectorised over j
    csum = np.concatenate([[0], np.cumsum(y)])
    local = np.full((J + 1, kmax + 1), np.inf)
    estimate = np.zeros((J + 1, kmax + 1), dtype=int)
    pts = cb.target.points
    for k in range(1, kmax + 1):
        ends = np.arange(k, J + 1)
        if ends.size == 0:
            continue
        means = (csum[ends] - csum[ends - k]) / k
        est = cb.target.nearest(means)
        win = np.stack([y[ends - 1 - i] for i in range(k)], axis=1)
        local[ends, k] = np.mean(np.abs(win - pts[est][:, None]), axis=1)
        estimate[ends, k] = est
    if single_cost is not None:
        local[1:, 1] = single_cost

    cost = np.full((J + 1, L + 1), SENTINEL)
    path = np.zeros((J + 1, L + 1), dtype=int)
    cost[0, 0] = 0.0
    for j in range(1, J + 1):
        top = min(L, j)
        best = np.full(top, np.inf)
        arg = np.zeros(top, dtype=int)
        for k in range(1, min(kmax, j) + 1):
            prev = cost[j - k, 0:top]
            cand = np.where(prev < SENTINEL, prev + local[j, k], np.inf)
            better = cand < best
            best = np.where(better, cand, best)
            arg = np.where(better, k, arg)
        ok = np.isfinite(best)
        cost[j, 1:top + 1] = np.where(ok, best, SENTINEL)
        path[j, 1:top + 1] = np.where(ok, arg, 0)
    return DpState(cost, path, estimate, L)


def dp_backtrack(state: DpState) -> list[DurationRun]:
    j, l = state.samples, state.frame_length
    runs = []
    while l > 0:
        k = int(state.path[j, l])
        if k == 0 or k > j:
            raise DecodeFailureError(f"no valid path through cell ({j}, {l})")
        runs.append(DurationRun(int(state.estimate[j, k]), k))
        j -= k
        l -= 1
    if j != 0:
        raise DecodeFailureError(f"{j} samples left after backtracking")
    return runs[::-1]


def dp_decode(y_prime, cb: StdCodebook, frame_length: int, ch: ScalarChannel | None = None,
              single_cost: float | None = None) -> list[DurationRun]:
    """Recover exactly ``frame_length`` runs whose durations sum to the sample count."""
    return dp_backtrack(dp_tables(y_prime, cb, frame_length, ch, single_cost))


def demap_runs(runs, cb: StdCodebook, strict: bool = True):
    """Source indices for a run sequence, plus a per-symbol clamp flag.

    An escape run reuses the subset of the previously demapped symbol.  A
    duration longer than its subset is clamped and flagged.  With
    ``strict=False`` a leading escape is read as subset 0 and flagged rather
    than raising, which lets noisy simulations keep going.
    """
    out = np.empty(len(runs), dtype=int)
    flags = np.zeros(len(runs), dtype=bool)
    prev = None
    for pos, (sym, dur) in enumerate(runs):
        if dur < 1 or dur > cb.k_max:
            raise DurationError(f"run duration {dur} outside 1..{cb.k_max}")
        if sym == cb.escape:
            if prev is None:
                if strict:
                    raise ProtocolError("escape run cannot open a frame")
                prev, flags[pos] = 0, True
            n = prev
        else:
            n = sym
        group = cb.groups[n]
        if dur > len(group):
            dur, flags[pos] = len(group), True
        out[pos] = group[dur - 1]
        prev = n
    return out, flags


def runs_to_text(runs) -> str:
    return "\n".join(f"{r.symbol},{r.duration}" for r in runs)


def runs_from_text(text: str) -> list[DurationRun]:
    out = []
    for line in text.strip().splitlines():
        sym, dur = line.split(",")
        out.append(DurationRun(int(sym), int(dur)))
    return out
