"""Eavesdropper toolkit: modulation classifiers and blind source separation.

Two feature-based classifiers are provided.  The cumulant classifier compares
the noise-compensated normalised fourth-order cumulant ``C42 / C21^2`` with
the exact value of each candidate alphabet.  The Kolmogorov-Smirnov
classifier compares the empirical distribution of the sample moduli, or of
the stacked in-phase and quadrature components, with reference
distributions simulated from each candidate at the operating SNR.

``fastica_separate`` is the complex fixed-point ICA of Bingham and
Hyvarinen with symmetric decorrelation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .channel import as_generator, complex_awgn, snr_db_to_sigma2
from .constellation import Constellation
from .errors import SampleSizeError, ShapeError

MIN_SAMPLES = 64
KS_REFERENCE_SIZE = 10**6


@dataclass(frozen=True)
class CumulantFeatures:
    C20: complex
    C21: float
    C40: complex
    C42: float

    def normalized_c42(self, noise_variance: float | None = None) -> float:
        """``C42 / (C21 - sigma^2)^2``.  ``C42`` itself is blind to circular Gaussian noise."""
        power = self.C21 - (noise_variance or 0.0)
        if power <= 0:
            power = self.C21
        return float(self.C42 / power**2)


@dataclass(frozen=True)
class ClassifierVerdict:
    chosen: int
    label: str
    scores: tuple[float, ...]


@dataclass
class IcaResult:
    separated: np.ndarray
    demixing: np.ndarray
    converged: bool
    iterations: int


def _moments(samples) -> CumulantFeatures:
    s = np.asarray(samples, dtype=complex).reshape(-1)
    s2 = s * s
    a2 = np.abs(s) ** 2
    c20 = s2.mean()
    c21 = float(a2.mean())
    c40 = (s2 * s2).mean() - 3 * c20**2
    c42 = float(np.mean(a2 * a2) - abs(c20) ** 2 - 2 * c21**2)
    return CumulantFeatures(complex(c20), c21, complex(c40), c42)


VERDICT_HEADER = ("trial", "snr_db", "true_label", "chosen_label", "scores")


def verdicts_to_csv(records) -> str:
    """CSV of ``(trial, snr_db, true_label, verdict)`` records.

    Scores share one field, separated by ``;`` in candidate order.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(VERDICT_HEADER)
    for trial, snr_db, true_label, verdict in records:
        scores = ";".join(repr(float(x)) for x in verdict.scores)
        writer.writerow([int(trial), repr(float(snr_db)), true_label, verdict.label, scores])
    return buf.getvalue()


def estimate_cumulants(samples) -> CumulantFeatures:
    s = np.asarray(samples).reshape(-1)
    if s.size < MIN_SAMPLES:
        raise SampleSizeError(f"need at least {MIN_SAMPLES} samples, got {s.size}")
    return _moments(s)


def theoretical_c42(candidate: Constellation) -> float:
    """Exact normalised ``C42`` of a candidate, averaged over its points."""
    return _moments(candidate.points).normalized_c42()


def _verdict(scores, candidates) -> ClassifierVerdict:
    scores = tuple(float(x) for x in scores)
    k = int(np.argmin(scores))
    return ClassifierVerdict(k, candidates[k].name, scores)


def cumulant_classify(samples, candidates, noise_variance: float | None = None) -> ClassifierVerdict:
    """Nearest candidate in normalised ``C42``; ``noise_variance=None`` skips compensation."""
    if not candidates:
        raise ValueError("no candidates")
    value = estimate_cumulants(samples).normalized_c42(noise_variance)
    return _verdict([abs(value - theoretical_c42(c)) for c in candidates], candidates)


def derotate_fourth_power(samples) -> np.ndarray:
    """Remove a common phase using the fourth-order moment (pi/2 ambiguity left).

    QAM and QPSK alphabets in their standard orientation have a negative real
    ``E[s^4]``, so the estimated rotation is ``angle(-E[z^4]) / 4``.
    """
    z = np.asarray(samples, dtype=complex)
    m4 = np.mean(z**4)
    if abs(m4) == 0:
        return z
    return z * np.exp(-1j * np.angle(-m4) / 4)


def _ks_statistic(z: np.ndarray, mode: str, power: float | None = None) -> np.ndarray:
    # Observed streams are scaled by their empirical power; references pass
    # their exact power.  Rounding keeps noiseless atoms (e.g. constant
    # modulus) from splitting into near-duplicates after the scaling.
    if power is None:
        power = np.mean(np.abs(z) ** 2)
    z = z / np.sqrt(power)
    if mode == "magnitude":
        return np.round(np.abs(z), 12)
    if mode == "quadrature":
        z = derotate_fourth_power(z)
        return np.round(np.concatenate([z.real, z.imag]), 12)
    raise ValueError(f"unknown K-S mode {mode!r}")


@lru_cache(maxsize=64)
def _reference_sample(points: tuple, snr_db: float, mode: str, size: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(20240611)))
    pts = np.array(points)
    x = pts[gen.integers(0, pts.size, size)]
    power = float(np.mean(np.abs(pts) ** 2))
    sigma2 = snr_db_to_sigma2(snr_db, power)
    x = x + complex_awgn(size, sigma2, gen)
    return np.sort(_ks_statistic(x, mode, power + sigma2))


def reference_cdf(candidate: Constellation, snr_db: float, mode: str,
                  size: int = KS_REFERENCE_SIZE) -> np.ndarray:
    """Sorted synthetic statistic for ``candidate`` at ``snr_db`` (cached, fixed seed)."""
    return _reference_sample(tuple(candidate.points.tolist()), float(snr_db), mode, int(size))


def ks_distance(sample, reference_sorted) -> float:
    """Two-sample K-S sup-distance between ``sample`` and a sorted reference.

    Between consecutive sample points the sample ECDF is flat and the
    reference ECDF is monotone, so comparing both one-sided limits at each
    sample point is exact, ties included.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n, m = x.size, reference_sorted.size
    right = np.abs(np.searchsorted(x, x, side="right") / n
                   - np.searchsorted(reference_sorted, x, side="right") / m)
    left = np.abs(np.searchsorted(x, x, side="left") / n
                  - np.searchsorted(reference_sorted, x, side="left") / m)
    return float(max(right.max(), left.max()))


def ks_classify(samples, candidates, mode: str = "magnitude", snr_db: float = 20.0,
                reference_size: int = KS_REFERENCE_SIZE) -> ClassifierVerdict:
    if not candidates:
        raise ValueError("no candidates")
    stat = _ks_statistic(np.asarray(samples, dtype=complex).reshape(-1), mode)
    scores = [ks_distance(stat, reference_cdf(c, snr_db, mode, reference_size)) for c in candidates]
    return _verdict(scores, candidates)


def _whiten(Z: np.ndarray, k: int):
    Zc = Z - Z.mean(axis=1, keepdims=True)
    cov = Zc @ Zc.conj().T / Zc.shape[1]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:k]
    vals, vecs = vals[order], vecs[:, order]
    if np.any(vals <= 1e-12 * max(vals[0], 1e-300)):
        raise ShapeError("observations have fewer independent directions than requested sources")
    V = (vecs / np.sqrt(vals)).conj().T
    return V @ Zc, V


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(W @ W.conj().T)
    return vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T @ W


def _contrast(name: str, a: float):
    if name == "kurtosis":
        return (lambda y: y), (lambda y: np.ones_like(y))
    if name == "log":
        return (lambda y: 1.0 / (a + y)), (lambda y: -1.0 / (a + y) ** 2)
    raise ValueError(f"unknown contrast {name!r}")


def fastica_separate(Z, source_count: int, rng=None, contrast: str = "log",
                     max_iter: int = 200, tol: float = 1e-8, a: float = 0.1) -> IcaResult:
    """Complex FastICA; rows of ``separated`` are unit-power and uncorrelated.

    ``contrast`` picks ``G(y) = y^2 / 2`` ("kurtosis") or ``G(y) = log(a + y)``
    ("log"), both applied to ``y = |w^H x|^2``.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    rows, n = Z.shape
    if source_count < 1 or source_count > rows:
        raise ShapeError(f"cannot extract {source_count} sources from {rows} observations")
    if n < 50 * source_count:
        raise SampleSizeError(f"need at least {50 * source_count} samples, got {n}")
    X, V = _whiten(Z, source_count)
    g, dg = _contrast(contrast, a)
    gen = as_generator(rng)
    W = gen.standard_normal((source_count, source_count)) + 1j * gen.standard_normal((source_count, source_count))
    W = _sym_decorrelate(W)
    converged, it = False, 0
    for it in range(1, max_iter + 1):
        Y = W.conj() @ X  # row i is w_i^H x
        Y2 = np.abs(Y) ** 2
        gy, dgy = g(Y2), dg(Y2)
        new = (X @ (Y.conj() * gy).T).T / n - (gy + Y2 * dgy).mean(axis=1)[:, None] * W
        new = _sym_decorrelate(new)
        change = np.max(np.abs(1.0 - np.abs(np.sum(new.conj() * W, axis=1))))
        W = new
        if change < tol:
            converged = True
            break
    demix = W.conj() @ V
    S = demix @ (Z - Z.mean(axis=1, keepdims=True))
    return IcaResult(S, demix, converged, it)


def best_permutation_correlation(estimates, sources) -> np.ndarray:
    """Per-source ``|corr|`` under the best one-to-one assignment (exhaustive over permutations)."""
    E = np.atleast_2d(np.asarray(estimates, dtype=complex))
    S = np.atleast_2d(np.asarray(sources, dtype=complex))
    E = E - E.mean(axis=1, keepdims=True)
    S = S - S.mean(axis=1, keepdims=True)
    En = E / np.linalg.norm(E, axis=1, keepdims=True)
    Sn = S / np.linalg.norm(S, axis=1, keepdims=True)
    C = np.abs(Sn @ En.conj().T)
    k = S.shape[0]
    best, best_perm = -1.0, None
    for perm in permutations(range(E.shape[0]), k):
        total = sum(C[i, perm[i]] for i in range(k))
        if total > best:
            best, best_perm = total, perm
    return np.array([C[i, best_perm[i]] for i in range(k)])


def separated_noise_variance(result: IcaResult, noise_variance: float) -> np.ndarray:
    """Noise power left on each separated row when every sensor sees ``noise_variance``."""
    return noise_variance * np.sum(np.abs(result.demixing) ** 2, axis=1)
