"""Modulation alphabets: PSK, square/cross QAM and golden angle modulation.

Every builder returns an immutable :class:`Constellation` whose points are
stored in a fixed order together with their bit labels.  Labels are plain
``'0'``/``'1'`` strings so they can be compared with :func:`hamming_distance`
and written to text tables unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlphabetError, InvalidOrderError, LabelLengthError

POWER_TOL = 1e-12


def _bits_for(order: int) -> int:
    return max(1, math.ceil(math.log2(order)))


def _gray(k: int) -> int:
    return k ^ (k >> 1)


def _to_label(value: int, width: int) -> str:
    return format(value, f"0{width}b")


@dataclass(frozen=True)
class Constellation:
    name: str
    points: np.ndarray
    labels: tuple[str, ...]
    power_normalized: bool = False
    _bits: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).reshape(-1)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != pts.size:
            raise InvalidOrderError("one label per point is required")
        if len(set(self.labels)) != pts.size:
            raise LabelLengthError("labels must be pairwise distinct")
        if len({len(lab) for lab in self.labels}) > 1:
            raise LabelLengthError("labels must share one length")
        gaps = np.abs(pts[:, None] - pts[None, :]) + np.eye(pts.size)
        if pts.size > 1 and gaps.min() < 1e-12:
            raise AlphabetError("constellation points must be distinct")
        if self.power_normalized and abs(self.mean_power - 1.0) > POWER_TOL:
            raise AlphabetError(f"{self.name}: mean power {self.mean_power!r} is not 1")
        bits = np.array([[int(b) for b in lab] for lab in self.labels], dtype=np.int8)
        bits.setflags(write=False)
        object.__setattr__(self, "_bits", bits)

    @property
    def order(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return len(self.labels[0])

    @property
    def bits(self) -> np.ndarray:
        """``(order, bits_per_symbol)`` integer array of the labels."""
        return self._bits

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @property
    def peak_amplitude(self) -> float:
        return float(np.max(np.abs(self.points)))

    def nearest(self, y) -> np.ndarray:
        """Index of the closest point for every sample; ties go to the lower index."""
        y = np.asarray(y, dtype=complex)
        d = np.abs(y[..., None] - self.points)
        return np.argmin(d, axis=-1)

    def index_of(self, symbols, tol: float = 1e-9) -> np.ndarray:
        """Exact membership lookup; raises :class:`AlphabetError` for strangers."""
        symbols = np.asarray(symbols, dtype=complex)
        d = np.abs(symbols[..., None] - self.points)
        idx = np.argmin(d, axis=-1)
        if symbols.size and np.take_along_axis(d, idx[..., None], -1).max() > tol:
            raise AlphabetError(f"symbol not in {self.name} alphabet")
        return idx

    def scaled(self, factor: float, name: str | None = None) -> "Constellation":
        pts = self.points * factor
        normalized = abs(np.mean(np.abs(pts) ** 2) - 1.0) <= POWER_TOL
        return Constellation(name or self.name, pts, self.labels, normalized)

    def to_table(self) -> str:
        """One row per point: ``index real imag label``."""
        rows = [
            f"{k} {float(p.real)!r} {float(p.imag)!r} {lab}"
            for k, (p, lab) in enumerate(zip(self.points, self.labels))
        ]
        return "\n".join([f"# {self.name}", *rows]) + "\n"

    @classmethod
    def from_table(cls, text: str) -> "Constellation":
        name = "custom"
        pts, labels = [], []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                name = line[1:].strip() or name
                continue
            _, re_, im_, lab = line.split()
            pts.append(complex(float(re_), float(im_)))
            labels.append(lab)
        pts = np.array(pts)
        normalized = abs(np.mean(np.abs(pts) ** 2) - 1.0) <= POWER_TOL
        return cls(name, pts, labels, normalized)


def _normalize(points: np.ndarray) -> np.ndarray:
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def build_psk(order: int, phase_offset: float | None = None) -> Constellation:
    """M-PSK with reflected-Gray labels.

    The default offset is pi/4 for QPSK and pi/8 for 8PSK, zero otherwise.
    """
    if order < 2 or order & (order - 1):
        raise InvalidOrderError(f"PSK order must be a power of two, got {order}")
    if phase_offset is None:
        phase_offset = {4: np.pi / 4, 8: np.pi / 8}.get(order, 0.0)
    if not np.isfinite(phase_offset):
        raise InvalidOrderError("phase offset must be finite")
    k = np.arange(order)
    pts = np.exp(1j * (phase_offset + 2 * np.pi * k / order))
    width = _bits_for(order)
    labels = [_to_label(_gray(int(i)), width) for i in k]
    name = {2: "bpsk", 4: "qpsk"}.get(order, f"{order}psk")
    return Constellation(name, pts, labels, power_normalized=True)


def qam_grid(order: int) -> tuple[np.ndarray, list[str]]:
    """Unnormalised odd-integer QAM grid and its labels.

    Square orders use per-axis Gray codes (real axis in the high bits).  The
    32-point cross is the 8x4 Gray rectangle with its outer columns folded
    onto the rows Q = +-5.
    """
    if order == 32:
        return _cross32()
    side = math.isqrt(order)
    if order < 4 or side * side != order or side & (side - 1):
        raise InvalidOrderError(f"unsupported QAM order {order}")
    half = _bits_for(side)
    levels = 2 * np.arange(side) - (side - 1)
    pts, labels = [], []
    for i, re_ in enumerate(levels):
        for q, im_ in enumerate(levels):
            pts.append(complex(re_, im_))
            labels.append(_to_label(_gray(i), half) + _to_label(_gray(q), half))
    return np.array(pts), labels


def _cross32() -> tuple[np.ndarray, list[str]]:
    i_levels = 2 * np.arange(8) - 7
    q_levels = 2 * np.arange(4) - 3
    pts, labels = [], []
    for i, re_ in enumerate(i_levels):
        for q, im_ in enumerate(q_levels):
            if abs(re_) == 7:
                p = complex(np.sign(re_) * (4 - abs(im_)), np.sign(im_) * 5)
            else:
                p = complex(re_, im_)
            pts.append(p)
            labels.append(_to_label(_gray(i), 3) + _to_label(_gray(q), 2))
    return np.array(pts), labels


def build_qam(order: int) -> Constellation:
    pts, labels = qam_grid(order)
    return Constellation(f"{order}qam", _normalize(pts), labels, power_normalized=True)


@dataclass(frozen=True)
class GamSpec:
    """Golden angle modulation parameters."""

    order: int
    mean_power: float = 1.0

    def __post_init__(self):
        if self.order < 2:
            raise InvalidOrderError("GAM needs at least two points")
        if not self.mean_power > 0:
            raise ValueError("mean power must be positive")

    @property
    def golden_fraction(self) -> float:
        return 1.0 - (math.sqrt(5.0) - 1.0) / 2.0

    @property
    def disc_scale(self) -> float:
        return math.sqrt(2.0 * self.mean_power / (self.order + 1))


def build_gam(spec: GamSpec | int) -> Constellation:
    """Disc-shaped GAM: point n sits at radius ``c_disc * sqrt(n)`` and angle ``2*pi*phi*n``."""
    if not isinstance(spec, GamSpec):
        spec = GamSpec(int(spec))
    n = np.arange(1, spec.order + 1)
    pts = spec.disc_scale * np.sqrt(n) * np.exp(2j * np.pi * spec.golden_fraction * n)
    width = _bits_for(spec.order)
    labels = [_to_label(int(i), width) for i in n - 1]
    normalized = abs(np.mean(np.abs(pts) ** 2) - 1.0) <= POWER_TOL
    return Constellation(f"{spec.order}gam", pts, labels, normalized)


def hamming_distance(label_a: str, label_b: str) -> int:
    if len(label_a) != len(label_b):
        raise LabelLengthError(f"label lengths differ: {len(label_a)} vs {len(label_b)}")
    return sum(a != b for a, b in zip(label_a, label_b))


def normalize_amplitude(c: Constellation, radius: float = 1.0) -> Constellation:
    """Rescale so the largest point modulus equals ``radius``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    return c.scaled(radius / c.peak_amplitude)


def by_name(name: str) -> Constellation:
    """Look up a builder from a short name such as ``'qpsk'``, ``'16qam'`` or ``'9gam'``."""
    key = name.strip().lower()
    if key == "bpsk":
        return build_psk(2)
    if key == "qpsk":
        return build_psk(4)
    for suffix, builder in (("psk", build_psk), ("qam", build_qam), ("gam", build_gam)):
        if key.endswith(suffix) and key[: -len(suffix)].isdigit():
            return builder(int(key[: -len(suffix)]))
    raise InvalidOrderError(f"unknown constellation {name!r}")
