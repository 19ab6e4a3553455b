"""Symbol random mapping: low-order symbols disguised as a higher-order alphabet.

Each source symbol ``a_m`` owns a subset ``B_m`` of the target alphabet and is
sent as one of its members, drawn with the probability row ``p_m``.  The
receiver demodulates onto the target alphabet and keeps only the subset index.

Security is measured by the KL divergence between the emitted symbol
distribution and the uniform one; reliability by a union bound on the BER.
Minimising the first under a cap on the second has a Gibbs-form solution
``p_m[i] ~ exp(-lam * u_m[i])`` (``u`` being the per-element bit-error
weight), so the optimiser only has to bisect on the scalar ``lam``.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc

from .channel import ScalarChannel, as_generator
from .constellation import Constellation, hamming_distance
from .errors import InfeasibleError, SingularChannelError, UnsupportedPairError


def qfunc(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def _entropy_bits(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    safe = np.where(rows > 0, rows, 1.0)
    return -np.sum(rows * np.log2(safe), axis=-1)


@dataclass(frozen=True)
class SubsetPartition:
    base: Constellation
    groups: tuple[tuple[int, ...], ...]
    subset_of: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        flat = [i for g in groups for i in g]
        if sorted(flat) != list(range(self.base.order)):
            raise ValueError("subsets must be disjoint and cover the whole base alphabet")
        if len({len(g) for g in groups}) != 1:
            raise ValueError("only even partitions are supported")
        owner = np.empty(self.base.order, dtype=int)
        for m, g in enumerate(groups):
            owner[list(g)] = m
        owner.setflags(write=False)
        object.__setattr__(self, "subset_of", owner)

    @property
    def subset_count(self) -> int:
        return len(self.groups)

    @property
    def group_size(self) -> int:
        return len(self.groups[0])

    @property
    def index_table(self) -> np.ndarray:
        return np.array(self.groups, dtype=int)


def partition_rotational(source: Constellation, base: Constellation) -> SubsetPartition:
    """Split 16QAM into the four quadrants, one per QPSK symbol.

    The quadrant holding a source point's phase (counter-clockwise from its
    angle) is assigned to it, and every quadrant is listed in the order of
    ``{1+1j, 3+1j, 1+3j, 3+3j}`` rotated into place, so the last element is
    always the corner.
    """
    if source.order != 4 or base.order != 16:
        raise UnsupportedPairError(
            f"rotational partition needs 4 -> 16 points, got {source.order} -> {base.order}"
        )
    scale = base.peak_amplitude / abs(3 + 3j)
    first = np.array([1 + 1j, 3 + 1j, 1 + 3j, 3 + 3j]) * scale
    groups = []
    for a in source.points:
        angle = np.mod(np.angle(a), 2 * np.pi)
        quadrant = int(np.floor((angle + 1e-9) / (np.pi / 2))) % 4
        groups.append(tuple(base.index_of(first * 1j**quadrant)))
    return SubsetPartition(base, tuple(groups))


@dataclass(frozen=True)
class MappingProbabilities:
    rows: np.ndarray
    dual: float | None = None

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float)).copy()
        if np.any(rows < 0):
            raise ValueError("probabilities must be non-negative")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("each probability row must sum to one")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def uniform(cls, subsets: int, size: int) -> "MappingProbabilities":
        return cls(np.full((subsets, size), 1.0 / size), dual=0.0)

    @classmethod
    def repeated(cls, row, subsets: int) -> "MappingProbabilities":
        return cls(np.tile(np.asarray(row, dtype=float), (subsets, 1)))


@dataclass(frozen=True)
class SrmPlan:
    source: Constellation
    partition: SubsetPartition
    probs: MappingProbabilities

    def __post_init__(self):
        if self.partition.subset_count != self.source.order:
            raise ValueError("need exactly one subset per source symbol")
        if self.probs.rows.shape != (self.source.order, self.partition.group_size):
            raise ValueError("probability table shape does not match the partition")

    @property
    def base(self) -> Constellation:
        return self.partition.base

    def with_probs(self, probs) -> "SrmPlan":
        if not isinstance(probs, MappingProbabilities):
            probs = MappingProbabilities(probs)
        return replace(self, probs=probs)

    def bit_weights(self, sigma: float) -> np.ndarray:
        """``u[m, i] = sum_j rho * Q(delta / (sqrt(2) sigma))`` over the complement of ``B_m``.

        ``rho`` is the Hamming distance between the source labels of ``a_m``
        and of the subset owner of the competing point, so landing inside
        ``B_m`` costs nothing.
        """
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        base = self.base.points
        owner = self.partition.subset_of
        labels = self.source.labels
        rho_src = np.array([[hamming_distance(a, b) for b in labels] for a in labels])
        table = self.partition.index_table
        weights = np.zeros(table.shape)
        for m, group in enumerate(table):
            rho = rho_src[m, owner]
            for i, n in enumerate(group):
                delta = np.abs(base[n] - base)
                term = rho * qfunc(delta / (np.sqrt(2.0) * sigma))
                weights[m, i] = term[owner != m].sum()
        return weights

    def cost_table(self, sigma: float) -> np.ndarray:
        m = self.source.order
        return self.bit_weights(sigma) / (m * math.log2(m))


def srm_plan(source: Constellation, base: Constellation, probs=None) -> SrmPlan:
    part = partition_rotational(source, base)
    if probs is None:
        probs = MappingProbabilities.uniform(source.order, part.group_size)
    elif not isinstance(probs, MappingProbabilities):
        arr = np.asarray(probs, dtype=float)
        probs = MappingProbabilities.repeated(arr, source.order) if arr.ndim == 1 else MappingProbabilities(arr)
    return SrmPlan(source, part, probs)


def srm_map_indices(source_idx, plan: SrmPlan, rng) -> np.ndarray:
    """Base-alphabet indices for source indices, drawn independently per symbol."""
    source_idx = np.asarray(source_idx, dtype=int)
    cum = np.cumsum(plan.probs.rows, axis=1)
    u = as_generator(rng).random(source_idx.shape)
    pick = np.sum(u[..., None] >= cum[source_idx], axis=-1)
    pick = np.minimum(pick, plan.partition.group_size - 1)
    return plan.partition.index_table[source_idx, pick]


def srm_encode(s, plan: SrmPlan, rng) -> np.ndarray:
    idx = plan.source.index_of(s)
    return plan.base.points[srm_map_indices(idx, plan, rng)]


def srm_decode_indices(y, plan: SrmPlan, ch: ScalarChannel | None = None) -> np.ndarray:
    h = 1.0 if ch is None else ch.h
    if h == 0:
        raise SingularChannelError("cannot equalise a zero channel")
    decided = plan.base.nearest(np.asarray(y, dtype=complex) / h)
    return plan.partition.subset_of[decided]


def srm_decode(y, plan: SrmPlan, ch: ScalarChannel | None = None) -> np.ndarray:
    return plan.source.points[srm_decode_indices(y, plan, ch)]


def kl_divergence(plan_or_probs) -> float:
    """``log2 K - mean_m H(p_m)`` in bits."""
    probs = plan_or_probs.probs if isinstance(plan_or_probs, SrmPlan) else plan_or_probs
    rows = probs.rows if isinstance(probs, MappingProbabilities) else np.atleast_2d(probs)
    k = rows.shape[1]
    return float(math.log2(k) - np.mean(_entropy_bits(rows)))


def ber_union_bound(plan: SrmPlan, sigma: float, probs=None) -> float:
    rows = plan.probs.rows if probs is None else np.asarray(getattr(probs, "rows", probs))
    return float(np.sum(rows * plan.cost_table(sigma)))


def _gibbs(weights: np.ndarray, lam: float) -> np.ndarray:
    if np.isinf(lam):
        hit = weights == weights.min(axis=1, keepdims=True)
        return hit / hit.sum(axis=1, keepdims=True)
    logits = -lam * (weights - weights.min(axis=1, keepdims=True))
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def optimize_probabilities(plan: SrmPlan, eta: float, sigma: float, tol: float = 1e-10,
                           max_iter: int = 2000) -> MappingProbabilities:
    """Least-KL mapping probabilities whose BER bound does not exceed ``eta``.

    The returned object carries ``lam`` in ``dual``; it multiplies the raw
    bit-error weights, i.e. ``M log2 M`` times the cost table.  It is ``inf``
    when only the one-hot limit meets the target.
    """
    weights = plan.bit_weights(sigma)
    costs = plan.cost_table(sigma)

    def bound(lam):
        return float(np.sum(_gibbs(weights, lam) * costs))

    theta_min = float(costs.min(axis=1).sum())
    if eta < theta_min - 1e-15:
        raise InfeasibleError(
            f"BER target {eta:.6g} is below the smallest achievable bound {theta_min:.6g}",
            detail=theta_min,
        )
    if bound(0.0) <= eta:
        return MappingProbabilities(_gibbs(weights, 0.0), dual=0.0)
    if eta <= theta_min:
        return MappingProbabilities(_gibbs(weights, np.inf), dual=np.inf)

    lo, hi = 0.0, 1.0 / max(np.ptp(weights), 1e-300)
    while bound(hi) > eta:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            return MappingProbabilities(_gibbs(weights, np.inf), dual=np.inf)
    for _ in range(max_iter):
        if eta - bound(hi) <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if bound(mid) > eta:
            lo = mid
        else:
            hi = mid
    return MappingProbabilities(_gibbs(weights, hi), dual=hi)


def gibbs_residual(probs: MappingProbabilities, plan: SrmPlan, sigma: float) -> float:
    """Spread of ``log p + lam * u`` within each row; zero for an exact Gibbs form."""
    weights = plan.bit_weights(sigma)
    rows = probs.rows
    lam = probs.dual
    if lam is None:
        raise ValueError("probabilities carry no dual variable")
    if np.isinf(lam):
        on_min = weights == weights.min(axis=1, keepdims=True)
        return 0.0 if np.all(on_min[rows > 0]) else np.inf
    if lam == 0:
        return float(np.max(np.ptp(rows, axis=1)))
    if np.any(rows <= 0):
        return np.inf
    resid = np.log(rows) + lam * weights
    return float(np.max(np.ptp(resid, axis=1)))


def _project_rows_to_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, v.shape[1] + 1)
    rho = np.count_nonzero(u - css / ind > 0, axis=1)
    theta = css[np.arange(v.shape[0]), rho - 1] / rho
    return np.maximum(v - theta[:, None], 0.0)


def _project_feasible(v, costs, eta):
    p = _project_rows_to_simplex(v)
    if np.sum(p * costs) <= eta:
        return p
    lo, hi = 0.0, 1.0
    while np.sum(_project_rows_to_simplex(v - hi * costs) * costs) > eta:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(_project_rows_to_simplex(v - mid * costs) * costs) > eta:
            lo = mid
        else:
            hi = mid
    return _project_rows_to_simplex(v - hi * costs)


def projected_gradient_probabilities(costs: np.ndarray, eta: float, max_iter: int = 50000,
                                     tol: float = 1e-10) -> np.ndarray:
    """Reference solver: Armijo projected gradient on the KL objective.

    Works directly on the primal, projecting onto the product of simplices
    intersected with the BER half-space.  Slow but shares nothing with the
    Gibbs/bisection route, which is what it is for.
    """
    costs = np.asarray(costs, dtype=float)
    m, k = costs.shape

    def objective(p):
        return math.log2(k) - np.mean(_entropy_bits(p))

    def gradient(p):
        return (np.log2(np.maximum(p, 1e-300)) + 1.0 / math.log(2.0)) / m

    p = _project_feasible(np.full((m, k), 1.0 / k), costs, eta)
    f = objective(p)
    step = 1.0
    for _ in range(max_iter):
        g = gradient(p)
        while True:
            cand = _project_feasible(p - step * g, costs, eta)
            fc = objective(cand)
            if fc <= f - 1e-4 * np.sum(g * (p - cand)) or step < 1e-14:
                break
            step *= 0.5
        moved = np.max(np.abs(cand - p))
        p, f = cand, fc
        step = min(step * 2.0, 1e3)
        if moved < tol:
            break
    return p


def plan_to_text(plan: SrmPlan) -> str:
    cfg = configparser.ConfigParser()
    cfg["plan"] = {"source": plan.source.name, "base": plan.base.name}
    cfg["partition"] = {str(m): " ".join(map(str, g)) for m, g in enumerate(plan.partition.groups)}
    cfg["probabilities"] = {
        str(m): " ".join(repr(float(x)) for x in row) for m, row in enumerate(plan.probs.rows)
    }
    buf = io.StringIO()
    cfg.write(buf)
    return buf.getvalue()


def plan_from_text(text: str, source: Constellation, base: Constellation) -> SrmPlan:
    cfg = configparser.ConfigParser()
    cfg.read_string(text)
    order = sorted(cfg["partition"], key=int)
    groups = tuple(tuple(int(i) for i in cfg["partition"][m].split()) for m in order)
    rows = np.array([[float(x) for x in cfg["probabilities"][m].split()] for m in order])
    return SrmPlan(source, SubsetPartition(base, groups), MappingProbabilities(rows))
