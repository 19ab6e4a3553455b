"""Reflection design for a passive RIS between a multi-antenna Alice and Bob.

Alice inverts the cascaded channel ``h_t + q diag(r) D[:, t]`` per antenna so
that Bob sees the plain antenna sum.  The per-antenna power budget turns into
a lower bound on the real part of the reflected term; each such bound is
linear in ``r`` and the reflection coefficients live in the unit disc, so the
design is a max-min margin problem solved here by projected subgradient
ascent.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

import numpy as np

from .channel import as_generator, draw_rayleigh
from .errors import InfeasibleError, RestrictedInfeasibleError, ShapeError, SingularChannelError
from .mimo_confusion import Beamformer

FEASIBILITY_TOL = 1e-7
PASSIVE_TOL = 1e-9


@dataclass(frozen=True)
class RisSystem:
    """Channels RIS->Bob (``q``, length V), Alice->RIS (``D``, V x T) and Alice->Bob (``h``)."""

    q: np.ndarray
    D: np.ndarray
    budgets: np.ndarray
    h: np.ndarray | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=complex).reshape(-1)
        D = np.atleast_2d(np.asarray(self.D, dtype=complex))
        budgets = np.asarray(self.budgets, dtype=float).reshape(-1)
        if D.shape[0] != q.size:
            raise ShapeError(f"D has {D.shape[0]} rows but q has {q.size} elements")
        if budgets.size == 1 and D.shape[1] > 1:
            budgets = np.full(D.shape[1], budgets[0])
        if budgets.size != D.shape[1]:
            raise ShapeError("one power budget per antenna is required")
        if np.any(budgets <= 0):
            raise ValueError("power budgets must be positive")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "budgets", budgets)
        if self.h is not None:
            h = np.asarray(self.h, dtype=complex).reshape(-1)
            if h.size != D.shape[1]:
                raise ShapeError("direct link needs one coefficient per antenna")
            object.__setattr__(self, "h", h)

    @property
    def element_count(self) -> int:
        return self.q.size

    @property
    def antenna_count(self) -> int:
        return self.D.shape[1]

    @property
    def direct_link(self) -> bool:
        return self.h is not None

    @property
    def direct(self) -> np.ndarray:
        return np.zeros(self.antenna_count, dtype=complex) if self.h is None else self.h

    def constraint_matrix(self) -> np.ndarray:
        """``A[t, v] = q_v D[v, t]`` so the reflected term of antenna t is ``A[t] @ r``."""
        return (self.q[:, None] * self.D).T

    def constraint_bounds(self) -> np.ndarray:
        """Right-hand sides ``1/sqrt(Gamma_t) - |h_t|`` (no ``h`` term without a direct link)."""
        return 1.0 / np.sqrt(self.budgets) - np.abs(self.direct)


@dataclass(frozen=True)
class Reflection:
    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=complex).reshape(-1)
        if np.any(np.abs(r) > 1 + PASSIVE_TOL):
            raise ValueError("a passive RIS cannot amplify (|r_v| <= 1)")
        object.__setattr__(self, "r", r)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.r)

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.r)


def random_system(elements: int, antennas: int, budget: float, rng, direct: bool = True) -> RisSystem:
    """Instance with i.i.d. CN(0, 1) channels."""
    gen = as_generator(rng)
    q = draw_rayleigh(1, elements, gen)[0]
    D = draw_rayleigh(elements, antennas, gen)
    h = draw_rayleigh(1, antennas, gen)[0] if direct else None
    return RisSystem(q, D, np.full(antennas, float(budget)), h)


def constraint_margins(sys: RisSystem, r) -> np.ndarray:
    """``Re{q diag(r) D[:, t]} - bound_t`` for every antenna; all >= 0 means feasible."""
    r = r.r if isinstance(r, Reflection) else np.asarray(r, dtype=complex)
    return np.real(sys.constraint_matrix() @ r) - sys.constraint_bounds()


def modulus_margins(sys: RisSystem, r) -> np.ndarray:
    """Same as :func:`constraint_margins` with the modulus in place of the real part."""
    r = r.r if isinstance(r, Reflection) else np.asarray(r, dtype=complex)
    return np.abs(sys.constraint_matrix() @ r) - sys.constraint_bounds()


def effective_channel(sys: RisSystem, r) -> np.ndarray:
    r = r.r if isinstance(r, Reflection) else np.asarray(r, dtype=complex)
    return sys.direct + sys.constraint_matrix() @ r


def power_margins(sys: RisSystem, r) -> np.ndarray:
    """``Gamma_t - |w_t|^2`` for the inverting beamformer (negative means over budget)."""
    g = np.abs(effective_channel(sys, r))
    with np.errstate(divide="ignore"):
        return sys.budgets - np.where(g > 0, 1.0 / g**2, np.inf)


def _project_disc(r: np.ndarray) -> np.ndarray:
    mag = np.abs(r)
    return np.where(mag > 1.0, r / np.maximum(mag, 1e-300), r)


def ris_design(sys: RisSystem, iterations: int = 5000, tol: float = FEASIBILITY_TOL) -> Reflection:
    """Reflection maximising the smallest constraint margin.

    Starts from the phase-aligned point ``r_v = exp(-j arg(q_v sum_t D[v, t]))``
    and takes normalised subgradient steps of size ``1/sqrt(k)`` on the
    currently worst constraint, projecting each element back into the unit
    disc.  The best iterate is returned.  Raises
    :class:`RestrictedInfeasibleError` when the real-part program fails but
    every modulus constraint could still be met on its own, and
    :class:`InfeasibleError` otherwise.
    """
    A = sys.constraint_matrix()
    b = sys.constraint_bounds()
    norms = np.linalg.norm(A, axis=1)
    r = np.exp(-1j * np.angle(sys.q * sys.D.sum(axis=1)))
    best_r, best = r.copy(), -np.inf
    for k in range(1, iterations + 1):
        margins = np.real(A @ r) - b
        t = int(np.argmin(margins))
        if margins[t] > best:
            best, best_r = float(margins[t]), r.copy()
        if norms[t] == 0:
            break
        r = _project_disc(r + np.conj(A[t]) / norms[t] / np.sqrt(k))
    margins = np.real(A @ r) - b
    if margins.min() > best:
        best, best_r = float(margins.min()), r
    if best < -tol:
        worst = int(np.argmin(np.real(A @ best_r) - b))
        detail = {"antenna": worst, "margin": best}
        if np.all(np.abs(A).sum(axis=1) >= b):
            raise RestrictedInfeasibleError(
                f"real-part constraints unmet (antenna {worst}, margin {best:.3g}); "
                "the modulus form may still be feasible",
                detail,
            )
        raise InfeasibleError(f"antenna {worst} cannot reach its bound (margin {best:.3g})", detail)
    return Reflection(best_r)


def ris_beamformer(sys: RisSystem, r) -> Beamformer:
    """``w_t = 1 / (h_t + q diag(r) D[:, t])``."""
    g = effective_channel(sys, r)
    if np.any(g == 0):
        raise SingularChannelError("effective channel vanishes for some antenna")
    return Beamformer(1.0 / g)


def _rows(arr) -> list[str]:
    arr = np.atleast_2d(arr)
    return [" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row) for row in arr]


def _parse_rows(lines: str) -> np.ndarray:
    rows = []
    for line in lines.strip().splitlines():
        vals = [float(x) for x in line.split()]
        rows.append(np.array(vals[0::2]) + 1j * np.array(vals[1::2]))
    return np.array(rows)


def system_to_text(sys: RisSystem) -> str:
    """INI-style dump; complex rows are written as ``re im re im ...``."""
    cfg = configparser.ConfigParser()
    cfg["ris"] = {
        "elements": str(sys.element_count),
        "antennas": str(sys.antenna_count),
        "direct": "yes" if sys.direct_link else "no",
        "budgets": " ".join(repr(float(g)) for g in sys.budgets),
    }
    cfg["q"] = {"rows": "\n" + "\n".join(_rows(sys.q))}
    cfg["D"] = {"rows": "\n" + "\n".join(_rows(sys.D))}
    if sys.direct_link:
        cfg["h"] = {"rows": "\n" + "\n".join(_rows(sys.h))}
    buf = io.StringIO()
    cfg.write(buf)
    return buf.getvalue()


def system_from_text(text: str) -> RisSystem:
    cfg = configparser.ConfigParser()
    cfg.optionxform = str
    cfg.read_string(text)
    head = cfg["ris"]
    q = _parse_rows(cfg["q"]["rows"])[0]
    D = _parse_rows(cfg["D"]["rows"])
    budgets = np.array([float(x) for x in head["budgets"].split()])
    h = _parse_rows(cfg["h"]["rows"])[0] if head.getboolean("direct") else None
    sys = RisSystem(q, D, budgets, h)
    if sys.element_count != head.getint("elements") or sys.antenna_count != head.getint("antennas"):
        raise ShapeError("instance header does not match the stored matrices")
    return sys


def solution_to_text(sys: RisSystem, refl: Reflection) -> str:
    """Reflection coefficients followed by one margin line per antenna."""
    lines = ["# v re im"]
    lines += [f"{v} {float(z.real)!r} {float(z.imag)!r}" for v, z in enumerate(refl.r)]
    lines.append("# t margin")
    lines += [f"{t} {m!r}" for t, m in enumerate(constraint_margins(sys, refl).tolist())]
    return "\n".join(lines) + "\n"
