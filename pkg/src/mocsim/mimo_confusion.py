"""Multi-antenna confusion: series-expansion and constellation-path transmitters.

Both schemes rely on a channel-inverting beamformer so that Bob receives the
plain sum of the antenna symbols.  The series scheme sends ``f(s)`` on the
first antenna and cancels the nonlinear Taylor terms on the others; the
path scheme splits each symbol into a sum of points drawn from small
per-antenna alphabets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channel import as_generator
from .constellation import Constellation
from .errors import (
    AlphabetError,
    BoundUnavailableError,
    CoverageError,
    DegenerateFunctionError,
    DivergenceError,
    SingularChannelError,
)

EXACT_TOL = 1e-12


@dataclass(frozen=True)
class FunctionSpec:
    """Nonlinear map with its Taylor coefficients ``lambda_n / n!`` around ``s0``.

    Only ``arctan`` is provided.  Its derivative ``1/(1+s^2)`` is expanded
    around ``s0`` by power-series division, which also gives the radius of
    convergence (distance from ``s0`` to the poles at ``+-j``).
    """

    function_id: str = "arctan"
    expansion_point: complex = 0.0
    max_order: int = 64
    _coef: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.function_id != "arctan":
            raise ValueError(f"unsupported function {self.function_id!r}")
        s0 = complex(self.expansion_point)
        object.__setattr__(self, "expansion_point", s0)
        a0, a1 = 1 + s0 * s0, 2 * s0
        d = np.zeros(self.max_order + 1, dtype=complex)
        d[0] = 1 / a0
        for n in range(1, self.max_order + 1):
            d[n] = -(a1 * d[n - 1] + (d[n - 2] if n >= 2 else 0)) / a0
        coef = np.zeros(self.max_order + 1, dtype=complex)
        coef[1:] = d[:-1] / np.arange(1, self.max_order + 1)
        coef[np.abs(coef) < 1e-15] = 0
        if np.all(coef.imag == 0):
            coef = coef.real
        coef.setflags(write=False)
        object.__setattr__(self, "_coef", coef)

    def __call__(self, s):
        return np.arctan(s)

    def coefficient(self, n: int):
        """``lambda_n / n!``; zero for n = 0 (the constant is ``f(s0)``)."""
        if n > self.max_order:
            raise ValueError(f"coefficients stored only up to order {self.max_order}")
        return self._coef[n]

    @property
    def linear_coefficient(self):
        return self._coef[1]

    @property
    def radius(self) -> float:
        s0 = self.expansion_point
        return float(min(abs(s0 - 1j), abs(s0 + 1j)))

    def nonlinear_orders(self):
        """Orders >= 2 with a non-zero coefficient, ascending."""
        return [n for n in range(2, self.max_order + 1) if self._coef[n] != 0]


@dataclass(frozen=True)
class TaylorPlan:
    spec: FunctionSpec
    assignment: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        assignment = tuple(tuple(int(n) for n in m) for m in self.assignment)
        object.__setattr__(self, "assignment", assignment)
        flat = [n for m in assignment for n in m]
        if len(flat) != len(set(flat)):
            raise ValueError("term sets of different antennas must be disjoint")
        if any(n < 2 or self.spec.coefficient(n) == 0 for n in flat):
            raise ValueError("only non-zero nonlinear terms can be assigned")

    @property
    def antenna_count(self) -> int:
        return len(self.assignment) + 1

    @property
    def canceled(self) -> tuple[int, ...]:
        return tuple(sorted(n for m in self.assignment for n in m))

    @property
    def truncation_order(self) -> int:
        return max(self.canceled, default=1)


def default_taylor_plan(antennas: int, spec: FunctionSpec | None = None) -> TaylorPlan:
    """Antenna ``t+1`` cancels the ``t``-th non-zero nonlinear term."""
    spec = spec or FunctionSpec()
    orders = spec.nonlinear_orders()[: antennas - 1]
    return TaylorPlan(spec, tuple((n,) for n in orders))


def taylor_encode(s, plan: TaylorPlan) -> np.ndarray:
    """Antenna symbols, shape ``(T_A,) + shape(s)``."""
    s = np.asarray(s, dtype=complex)
    spec = plan.spec
    dev = s - spec.expansion_point
    if np.any(np.abs(dev) > spec.radius + 1e-12):
        raise DivergenceError(f"|s - s0| exceeds the convergence radius {spec.radius}")
    out = [spec(s)]
    for terms in plan.assignment:
        x = np.zeros_like(s)
        for n in terms:
            x = x - spec.coefficient(n) * dev**n
        out.append(x)
    return np.stack(out)


def bob_combine(y, plan: TaylorPlan):
    """Undo the DC offset and linear gain left after cancellation."""
    spec = plan.spec
    lam1 = spec.linear_coefficient
    if lam1 == 0:
        raise DegenerateFunctionError("f has no linear term at the expansion point")
    s0 = spec.expansion_point
    return (np.asarray(y) - spec(s0) + lam1 * s0) / lam1


def truncation_residual_bound(plan: TaylorPlan, s) -> float:
    """First omitted term ``|s|^(2K+3) / (2K+3)`` of the arctan series.

    Requires ``s0 = 0`` and the odd orders ``3..2K+1`` canceled with nothing
    else.  This is the alternating-series remainder bound, which is exact
    for real ``s``.
    """
    spec = plan.spec
    canceled = plan.canceled
    k = len(canceled)
    if spec.expansion_point != 0 or canceled != tuple(range(3, 2 * k + 2, 2)):
        raise BoundUnavailableError("bound needs contiguous odd terms canceled around 0")
    nxt = 2 * k + 3
    return float(np.max(np.abs(s)) ** nxt / nxt)


def antenna_powers(x) -> np.ndarray:
    """Mean ``|x_t|^2`` per antenna over a block of shape ``(T_A, n)``.

    Neither scheme re-normalises antenna powers (that would break the exact
    sum at Bob), so this is how the imbalance is inspected.
    """
    x = np.asarray(x)
    return np.mean(np.abs(x.reshape(x.shape[0], -1)) ** 2, axis=1)


@dataclass(frozen=True)
class Beamformer:
    weights: np.ndarray

    def effective(self, h) -> np.ndarray:
        return np.asarray(h) * self.weights


def beamformer_design(h) -> Beamformer:
    h = np.asarray(h, dtype=complex).reshape(-1)
    if np.any(h == 0):
        raise SingularChannelError("channel inversion needs every |h_t| > 0")
    return Beamformer(1.0 / h)


@dataclass(frozen=True)
class CpdTable:
    target: Constellation
    component_sets: tuple[np.ndarray, ...]
    decompositions: tuple[np.ndarray, ...]

    @property
    def antenna_count(self) -> int:
        return len(self.component_sets)

    def to_text(self) -> str:
        lines = []
        for k, rows in enumerate(self.decompositions):
            for row in rows:
                parts = " ".join(_fmt(self.component_sets[t][i]) for t, i in enumerate(row))
                lines.append(f"{k} {_fmt(self.target.points[k])} : {parts}")
        return "\n".join(lines) + "\n"


def _fmt(z) -> str:
    z = complex(z)
    return f"{z.real!r}{z.imag:+.17g}j"


def cpd_build(target: Constellation, component_sets, tol: float = EXACT_TOL) -> CpdTable:
    """Exhaustively find every antenna tuple whose sum hits each target point.

    ``decompositions[k]`` is an ``(n_tuples, T_A)`` array of indices into
    the component sets.
    """
    sets = tuple(np.asarray(b, dtype=complex).reshape(-1) for b in component_sets)
    for b in sets:
        if b.size >= target.order:
            raise ValueError("every component set must be smaller than the target alphabet")
    combos = np.array(list(itertools.product(*[range(b.size) for b in sets])), dtype=int)
    sums = sum(b[combos[:, t]] for t, b in enumerate(sets))
    found, gaps = [], []
    for k, s in enumerate(target.points):
        hit = combos[np.abs(sums - s) <= tol]
        if hit.size == 0:
            gaps.append(k)
        found.append(hit)
    if gaps:
        names = ", ".join(f"{k}:{target.points[k]:.4g}" for k in gaps)
        raise CoverageError(f"{len(gaps)} target symbols have no decomposition ({names})", gaps)
    return CpdTable(target, sets, tuple(found))


def cpd_encode(s, table: CpdTable, rng, indices: bool = False) -> np.ndarray:
    """Antenna symbols ``(T_A, len(s))``; each tuple picked uniformly among valid ones."""
    if indices:
        idx = np.asarray(s, dtype=int).reshape(-1)
        if np.any((idx < 0) | (idx >= table.target.order)):
            raise CoverageError("symbol index outside the table")
    else:
        try:
            idx = table.target.index_of(np.asarray(s).reshape(-1))
        except AlphabetError as exc:
            raise CoverageError(str(exc)) from exc
    gen = as_generator(rng)
    counts = np.array([d.shape[0] for d in table.decompositions])
    pick = np.floor(gen.random(idx.size) * counts[idx]).astype(int)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    flat = np.concatenate(table.decompositions)
    rows = flat[offsets[idx] + pick]
    return np.stack([table.component_sets[t][rows[:, t]] for t in range(table.antenna_count)])


def cpd16_sets(scale: float = 1.0):
    """Component sets that build 16QAM on three antennas (4QAM plus two axis sets)."""
    b1 = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
    b2 = np.array([2, -2, 2j, -2j])
    return [b1 * scale, b2 * scale, b2.copy() * scale]


def cpd8_sets(with_zero: bool = False):
    """Two-antenna sets for 8PSK (offset pi/8).

    The four-point pair covers only the four non-``B1`` phases; adding the
    idle symbol 0 to the second antenna (order 5) covers all eight.
    """
    b1 = np.exp(1j * np.pi * np.array([3 / 8, 7 / 8, -1 / 8, -5 / 8]))
    c = np.sqrt(2 - np.sqrt(2))
    b2 = np.array([c, -c, 1j * c, -1j * c])
    if with_zero:
        b2 = np.concatenate([b2, [0]])
    return [b1, b2]
