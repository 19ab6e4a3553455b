"""Monte Carlo drivers behind each experiment id.

Every experiment is a ``setup`` (built once per worker) and a ``trial``
function returning ``{metric: outcome}``.  Outcomes are either
``(hits, total)`` counts, aggregated with a Wilson interval, or floats,
aggregated by their mean with a normal-approximation interval.  ``None``
marks a trial that produced nothing for that metric (an infeasible RIS
instance, for example).

Trial ``t`` always draws from ``RngStream(seed, (t,))`` whatever the SNR, so
the same symbols and unit-variance noise are reused along the SNR grid
(common random numbers): curves are smoother and BER is monotone far more
often than with independent draws.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import binomtest

from .. import adversary, srm, std_codec
from ..channel import RngStream, complex_awgn, draw_rayleigh, random_phase, snr_db_to_sigma2
from ..constellation import build_psk, build_qam, by_name, normalize_amplitude
from ..errors import ConfigError, InfeasibleError, InvalidOrderError
from ..mimo_confusion import (
    beamformer_design,
    bob_combine,
    cpd16_sets,
    cpd_build,
    cpd_encode,
    default_taylor_plan,
    taylor_encode,
)
from ..ris import constraint_margins, effective_channel, random_system, ris_beamformer, ris_design
from .config import ExperimentConfig

METRICS = ("ber", "accuracy", "kl", "margin", "residual")
BOUNDED = ("ber", "accuracy")
CLASSIFIERS = ("cumulant", "ks-magnitude", "ks-quadrature")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    snr_db: float
    metric: str
    value: float
    ci95: float
    trials: int

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric in BOUNDED and not math.isnan(self.value) and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.metric} must lie in [0, 1], got {self.value}")

    @property
    def is_error(self) -> bool:
        """Rows whose value is NaN mark an infeasible or empty point."""
        return math.isnan(self.value)


def wilson_half_width(hits: int, total: int) -> float:
    """Half the width of the 95% Wilson score interval."""
    if total == 0:
        return math.nan
    ci = binomtest(int(hits), int(total)).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.high - ci.low) / 2.0


def wilson_interval(hits: int, total: int) -> tuple[float, float]:
    ci = binomtest(int(hits), int(total)).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def _bit_errors(labels_bits: np.ndarray, sent: np.ndarray, got: np.ndarray) -> tuple[int, int]:
    diff = labels_bits[sent] != labels_bits[got]
    return int(diff.sum()), int(diff.size)


def classify(name: str, samples, candidates, noise_variance: float, snr_db: float):
    if name == "cumulant":
        return adversary.cumulant_classify(samples, candidates, noise_variance)
    if name == "ks-magnitude":
        return adversary.ks_classify(samples, candidates, "magnitude", snr_db)
    if name == "ks-quadrature":
        return adversary.ks_classify(samples, candidates, "quadrature", snr_db)
    raise ConfigError(f"unknown classifier {name!r}; choose from {', '.join(CLASSIFIERS)}")


def _srm_plan(cfg: ExperimentConfig):
    probs = str(cfg.param("probs", "uniform")).strip()
    plan = srm.srm_plan(build_psk(4), build_qam(16))
    if probs == "uniform":
        return plan
    try:
        row = [float(x) for x in probs.split(",")]
        return plan.with_probs(srm.MappingProbabilities.repeated(row, plan.source.order))
    except ValueError as exc:
        raise ConfigError(f"bad probability row {probs!r}: {exc}") from exc


# --- srm-accuracy -----------------------------------------------------------

def _setup_srm_accuracy(cfg):
    plan = _srm_plan(cfg)
    return {
        "plan": plan,
        "candidates": [plan.source, plan.base],
        "classifier": cfg.param("classifier", "cumulant"),
        "rotate": cfg.bool_param("phase_rotation", True),
    }


def _trial_srm_accuracy(ctx, cfg, snr_db, t):
    g = RngStream(cfg.seed, (t,)).generator
    plan = ctx["plan"]
    n = cfg.frame_length
    idx = g.integers(0, plan.source.order, n)
    x = plan.base.points[srm.srm_map_indices(idx, plan, g)]
    s2 = snr_db_to_sigma2(snr_db)
    y = random_phase(x + math.sqrt(s2) * complex_awgn(n, 1.0, g), g, ctx["rotate"])
    verdict = classify(ctx["classifier"], y, ctx["candidates"], s2, snr_db)
    return {"accuracy": (int(verdict.chosen == 0), 1)}


# --- srm-ber ------------------------------------------------------------------

def _setup_srm_ber(cfg):
    scheme = cfg.param("scheme", "srm")
    if scheme not in ("srm", "source", "base"):
        raise ConfigError(f"srm-ber scheme must be srm, source or base, got {scheme!r}")
    return {"plan": _srm_plan(cfg), "scheme": scheme}


def _trial_srm_ber(ctx, cfg, snr_db, t):
    g = RngStream(cfg.seed, (t,)).generator
    plan, scheme = ctx["plan"], ctx["scheme"]
    n = cfg.frame_length
    alphabet = plan.base if scheme == "base" else plan.source
    idx = g.integers(0, alphabet.order, n)
    noise = math.sqrt(snr_db_to_sigma2(snr_db)) * complex_awgn(n, 1.0, g)
    if scheme == "srm":
        sent = plan.base.points[srm.srm_map_indices(idx, plan, g)]
        got = srm.srm_decode_indices(sent + noise, plan)
    else:
        got = alphabet.nearest(alphabet.points[idx] + noise)
    return {"ber": _bit_errors(alphabet.bits, idx, got)}


# --- std-ber / std-accuracy --------------------------------------------------------

def _alphabet(name: str):
    try:
        return by_name(name)
    except InvalidOrderError as exc:
        raise ConfigError(str(exc)) from exc


def _std_codebook(cfg):
    source = _alphabet(cfg.param("source", "16psk"))
    target = _alphabet(cfg.param("target", "9gam"))
    try:
        return std_codec.consecutive_codebook(source, target)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _setup_std_ber(cfg):
    scheme = cfg.param("scheme", "std")
    if scheme not in ("std", "raw"):
        raise ConfigError(f"std-ber scheme must be std or raw, got {scheme!r}")
    return {"cb": _std_codebook(cfg), "scheme": scheme}


def _trial_std_ber(ctx, cfg, snr_db, t):
    g = RngStream(cfg.seed, (t,)).generator
    cb = ctx["cb"]
    L = cfg.frame_length
    idx = g.integers(0, cb.source.order, L)
    sigma = math.sqrt(snr_db_to_sigma2(snr_db))
    if ctx["scheme"] == "raw":
        got = cb.source.nearest(cb.source.points[idx] + sigma * complex_awgn(L, 1.0, g))
    else:
        _, x = std_codec.std_encode(idx, cb, indices=True)
        y = x + sigma * complex_awgn(x.size, 1.0, g)
        runs = std_codec.dp_decode(y, cb, L)
        got, _ = std_codec.demap_runs(runs, cb, strict=False)
    return {"ber": _bit_errors(cb.source.bits, idx, got)}


def _setup_std_accuracy(cfg):
    cb = _std_codebook(cfg)
    return {
        "cb": cb,
        "candidates": [cb.source, cb.target],
        "frames": cfg.int_param("frames", 100),
        "classifier": cfg.param("classifier", "cumulant"),
        "rotate": cfg.bool_param("phase_rotation", True),
    }


def _trial_std_accuracy(ctx, cfg, snr_db, t):
    g = RngStream(cfg.seed, (t,)).generator
    cb = ctx["cb"]
    L = cfg.frame_length
    idx = g.integers(0, cb.source.order, (ctx["frames"], L))
    x = np.concatenate([std_codec.std_encode(row, cb, indices=True)[1] for row in idx])
    s2 = snr_db_to_sigma2(snr_db)
    y = random_phase(x + math.sqrt(s2) * complex_awgn(x.size, 1.0, g), g, ctx["rotate"])
    verdict = classify(ctx["classifier"], y, ctx["candidates"], s2, snr_db)
    return {"accuracy": (int(verdict.chosen == 0), 1)}


# --- taylor-ber ------------------------------------------------------------------------

def _setup_taylor_ber(cfg):
    scheme = cfg.param("scheme", "taylor")
    if scheme not in ("taylor", "plain"):
        raise ConfigError(f"taylor-ber scheme must be taylor or plain, got {scheme!r}")
    antennas = cfg.int_param("antennas", 7)
    if antennas < 2:
        raise ConfigError("the series scheme needs at least two antennas")
    const = normalize_amplitude(_alphabet(cfg.param("constellation", "16qam")))
    return {"const": const, "plan": default_taylor_plan(antennas), "scheme": scheme}


def _trial_taylor_ber(ctx, cfg, snr_db, t):
    g = RngStream(cfg.seed, (t,)).generator
    const, plan = ctx["const"], ctx["plan"]
    n = cfg.frame_length
    idx = g.integers(0, const.order, n)
    h = draw_rayleigh(1, plan.antenna_count, g)[0]
    noise = math.sqrt(snr_db_to_sigma2(snr_db, const.mean_power)) * complex_awgn(n, 1.0, g)
    s = const.points[idx]
    if ctx["scheme"] == "plain":
        estimate = s + noise
    else:
        w = beamformer_design(h)
        X = taylor_encode(s, plan)
        y = (w.effective(h)[:, None] * X).sum(axis=0) + noise
        estimate = bob_combine(y, plan)
    return {"ber": _bit_errors(const.bits, idx, const.nearest(estimate))}


# --- cpd-accuracy ------------------------------------------------------------------------

def _cpd16_table():
    return cpd_build(build_qam(16).scaled(math.sqrt(10.0)), cpd16_sets())


def _setup_cpd_accuracy(cfg):
    eve = cfg.int_param("eve_antennas", 3)
    if eve < 3:
        raise ConfigError("FastICA needs at least as many eavesdropper antennas as streams")
    return {
        "table": _cpd16_table(),
        "candidates": [build_psk(4), build_qam(16)],
        "eve": eve,
        "classifier": cfg.param("classifier", "cumulant"),
    }


def _trial_cpd_accuracy(ctx, cfg, snr_db, t):
    g = RngStream(cfg.seed, (t,)).generator
    table = ctx["table"]
    n = cfg.frame_length
    idx = g.integers(0, table.target.order, n)
    X = cpd_encode(idx, table, g, indices=True)
    H = draw_rayleigh(ctx["eve"], table.antenna_count, g)
    clean = H @ X
    s2 = snr_db_to_sigma2(snr_db, float(np.mean(np.abs(clean) ** 2)))
    Z = clean + math.sqrt(s2) * complex_awgn(clean.shape, 1.0, g)
    ica = adversary.fastica_separate(Z, table.antenna_count, rng=g)
    residual = adversary.separated_noise_variance(ica, s2)
    hits = 0
    for row, nv in zip(ica.separated, residual):
        verdict = classify(ctx["classifier"], row, ctx["candidates"], nv, snr_db)
        hits += int(verdict.chosen == 1)
    return {"accuracy": (hits, table.antenna_count)}


# --- ris-demo -------------------------------------------------------------------------------

def _setup_ris_demo(cfg):
    antennas = cfg.int_param("antennas", 3)
    if antennas != 3:
        raise ConfigError("the demo splits 16QAM over exactly three antennas")
    return {
        "elements": cfg.int_param("elements", 64),
        "budget": cfg.float_param("budget", 10.0),
        "direct": cfg.bool_param("direct", True),
        "table": _cpd16_table(),
        "designs": {},
    }


def _ris_instance(ctx, cfg, t):
    if t not in ctx["designs"]:
        g = RngStream(cfg.seed, (t, 1)).generator
        sys = random_system(ctx["elements"], 3, ctx["budget"], g, direct=ctx["direct"])
        try:
            refl = ris_design(sys)
        except InfeasibleError:
            refl = None
        ctx["designs"][t] = (sys, refl)
    return ctx["designs"][t]


def _trial_ris_demo(ctx, cfg, snr_db, t):
    sys, refl = _ris_instance(ctx, cfg, t)
    if refl is None:
        return {"ber": None, "margin": None}
    g = RngStream(cfg.seed, (t,)).generator
    table = ctx["table"]
    n = cfg.frame_length
    idx = g.integers(0, table.target.order, n)
    X = cpd_encode(idx, table, g, indices=True)
    w = ris_beamformer(sys, refl)
    eff = effective_channel(sys, refl) * w.weights
    noise = math.sqrt(snr_db_to_sigma2(snr_db, table.target.mean_power)) * complex_awgn(n, 1.0, g)
    y = (eff[:, None] * X).sum(axis=0) + noise
    got = table.target.nearest(y)
    return {
        "ber": _bit_errors(table.target.bits, idx, got),
        "margin": float(constraint_margins(sys, refl).min()),
    }


@dataclass(frozen=True)
class Experiment:
    setup: Callable
    trial: Callable
    metrics: tuple[str, ...]


REGISTRY = {
    "srm-accuracy": Experiment(_setup_srm_accuracy, _trial_srm_accuracy, ("accuracy",)),
    "srm-ber": Experiment(_setup_srm_ber, _trial_srm_ber, ("ber",)),
    "std-ber": Experiment(_setup_std_ber, _trial_std_ber, ("ber",)),
    "std-accuracy": Experiment(_setup_std_accuracy, _trial_std_accuracy, ("accuracy",)),
    "taylor-ber": Experiment(_setup_taylor_ber, _trial_taylor_ber, ("ber",)),
    "cpd-accuracy": Experiment(_setup_cpd_accuracy, _trial_cpd_accuracy, ("accuracy",)),
    "ris-demo": Experiment(_setup_ris_demo, _trial_ris_demo, ("ber", "margin")),
}


def _aggregate(cfg, snr_db, metric, outcomes) -> ResultRow:
    kept = [o for o in outcomes if o is not None]
    if not kept:
        return ResultRow(cfg.experiment_id, snr_db, metric, math.nan, math.nan, 0)
    if isinstance(kept[0], tuple):
        hits = sum(o[0] for o in kept)
        total = sum(o[1] for o in kept)
        return ResultRow(cfg.experiment_id, snr_db, metric, hits / total,
                         wilson_half_width(hits, total), len(kept))
    vals = np.array(kept, dtype=float)
    half = 1.96 * vals.std(ddof=1) / math.sqrt(vals.size) if vals.size > 1 else 0.0
    return ResultRow(cfg.experiment_id, snr_db, metric, float(vals.mean()), float(half), len(kept))


def _run_chunk(args):
    cfg, snr_db, first, last = args
    exp = REGISTRY[cfg.experiment_id]
    ctx = exp.setup(cfg)
    return [exp.trial(ctx, cfg, snr_db, t) for t in range(first, last)]


def _chunks(trials: int, parts: int):
    edges = np.linspace(0, trials, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _optimize_p1(cfg: ExperimentConfig) -> list[ResultRow]:
    plan = srm.srm_plan(build_psk(4), build_qam(16))
    rows = []
    for snr_db in cfg.snr_points:
        sigma = math.sqrt(snr_db_to_sigma2(snr_db))
        costs = plan.cost_table(sigma)
        theta_min = float(costs.min(axis=1).sum())
        theta_uniform = srm.ber_union_bound(plan, sigma)
        if "eta" in cfg.params:
            eta = cfg.float_param("eta", 0.0)
        else:
            eta = theta_min + cfg.float_param("eta_fraction", 0.5) * (theta_uniform - theta_min)
        try:
            probs = srm.optimize_probabilities(plan, eta, sigma)
        except InfeasibleError:
            rows += [ResultRow(cfg.experiment_id, float(snr_db), m, math.nan, math.nan, 1)
                     for m in ("kl", "ber", "residual")]
            continue
        values = {
            "kl": srm.kl_divergence(probs),
            "ber": min(1.0, srm.ber_union_bound(plan, sigma, probs)),
            "residual": srm.gibbs_residual(probs, plan, sigma),
        }
        rows += [ResultRow(cfg.experiment_id, float(snr_db), m, float(v), 0.0, 1)
                 for m, v in values.items()]
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """All result rows for ``cfg`` in SNR order, then metric order.

    With ``cfg.workers > 1`` the trials of each SNR point are split into
    contiguous blocks and run in a process pool; outcomes are reduced in
    trial order, so the rows do not depend on the worker count.
    """
    if cfg.experiment_id == "optimize-p1":
        return _optimize_p1(cfg)
    exp = REGISTRY[cfg.experiment_id]
    rows: list[ResultRow] = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        ctx = exp.setup(cfg) if pool is None else None
        for snr_db in cfg.snr_points:
            snr_db = float(snr_db)
            if pool is None:
                outcomes = [exp.trial(ctx, cfg, snr_db, t) for t in range(cfg.trials)]
            else:
                jobs = [(cfg, snr_db, a, b) for a, b in _chunks(cfg.trials, cfg.workers)]
                outcomes = [o for part in pool.map(_run_chunk, jobs) for o in part]
            for metric in exp.metrics:
                rows.append(_aggregate(cfg, snr_db, metric, [o[metric] for o in outcomes]))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows
