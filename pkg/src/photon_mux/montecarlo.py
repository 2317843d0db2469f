"""Event-level Monte Carlo of the switched storage loop.

Each trial plays one output bin pulse by pulse: a pair number is drawn from
the truncated thermal law, the signal photons are thinned by the detector,
and the idler of a single-click pulse is thinned pass by pass while it sits
in the loop. Nothing here calls into :mod:`photon_mux.engine` beyond the pass
count, so the estimates are an independent check of the closed forms.

Random streams use numpy's Philox4x64 counter-based generator. Trials are
cut into fixed blocks of :data:`BLOCK_SIZE`; block ``b`` is keyed by
``SeedSequence([seed, b])``, so results do not depend on the worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .engine import SourceParams, passes
from .fock import InvalidParameterError, PhotonNumberDist

BLOCK_SIZE = 1 << 16
RNG_ALGORITHM = "Philox4x64-10"

Semantics = Literal["union", "last-herald"]


@dataclass(frozen=True)
class McConfig:
    params: SourceParams
    trials: int = 1_000_000
    seed: int = 0
    semantics: Semantics = "union"

    def __post_init__(self) -> None:
        if int(self.trials) != self.trials or self.trials < 1:
            raise InvalidParameterError(f"trials must be an integer >= 1, got {self.trials!r}")
        if self.semantics not in ("union", "last-herald"):
            raise InvalidParameterError(f"unknown semantics {self.semantics!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class McResult:
    p_success_hat: float
    p_noise_hat: float
    se_success: float
    se_noise: float
    output_dist: Optional[PhotonNumberDist]
    trials: int
    heralded_trials: int
    success_count: int = field(repr=False, default=0)
    noise_count: int = field(repr=False, default=0)


def standard_error(p_hat: float, trials: int) -> float:
    return math.sqrt(p_hat * (1.0 - p_hat) / trials)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _simulate_block(config: McConfig, block: int, size: int) -> tuple[int, int, np.ndarray]:
    params = config.params
    rng = _block_rng(config.seed, block)
    m = params.depth
    any_success = np.zeros(size, dtype=bool)
    any_noise = np.zeros(size, dtype=bool)
    # -1 marks "no herald yet"
    delivered = np.full(size, -1, dtype=np.int64)

    for t in range(1, m + 1):
        # thermal law is geometric on {0, 1, ...}; mass above n_max is sent to vacuum
        pairs = rng.geometric(1.0 / (params.nbar + 1.0), size=size) - 1
        pairs[pairs > params.n_max] = 0
        clicks = rng.binomial(pairs, params.eta_d)
        heralded = np.flatnonzero(clicks == 1)
        survivors = pairs[heralded]
        for _ in range(passes(t, m)):
            survivors = rng.binomial(survivors, params.eta_l)
        any_success[heralded] |= survivors == 1
        any_noise[heralded] |= survivors >= 2
        delivered[heralded] = survivors

    if config.semantics == "union":
        success, noise = int(any_success.sum()), int(any_noise.sum())
    else:
        success = int((delivered == 1).sum())
        noise = int((delivered >= 2).sum())
    histogram = np.bincount(delivered[delivered >= 0], minlength=params.n_max + 1)
    return success, noise, histogram


def _worker_count() -> int:
    env = os.environ.get("PHOTON_MUX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_mc(config: McConfig, workers: Optional[int] = None) -> McResult:
    """Estimate success and noise probabilities per output bin.

    Under ``"union"`` semantics a trial succeeds when any heralded pulse would
    deliver exactly one photon on its own, mirroring the product formula. Under
    ``"last-herald"`` the bin holds only the photons of the most recent
    heralded pulse, as the physical switch does. ``output_dist`` is the
    distribution of photons actually in the output (last herald) over trials
    with at least one herald, for both semantics.
    """
    n_blocks = -(-config.trials // BLOCK_SIZE)
    sizes = [BLOCK_SIZE] * (n_blocks - 1) + [config.trials - BLOCK_SIZE * (n_blocks - 1)]
    workers = _worker_count() if workers is None else max(1, workers)

    def job(block: int):
        return _simulate_block(config, block, sizes[block])

    if workers == 1 or n_blocks == 1:
        results = [job(b) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, n_blocks)) as pool:
            results = list(pool.map(job, range(n_blocks)))

    success = sum(r[0] for r in results)
    noise = sum(r[1] for r in results)
    histogram = np.sum([r[2] for r in results], axis=0)
    heralded = int(histogram.sum())
    output_dist = PhotonNumberDist(histogram / heralded) if heralded else None

    p_s = success / config.trials
    p_n = noise / config.trials
    return McResult(
        p_success_hat=p_s,
        p_noise_hat=p_n,
        se_success=standard_error(p_s, config.trials),
        se_noise=standard_error(p_n, config.trials),
        output_dist=output_dist,
        trials=config.trials,
        heralded_trials=heralded,
        success_count=success,
        noise_count=noise,
    )


def agreement_z(p_hat: float, p_ref: float, trials: int) -> float:
    """Deviation of an estimate from a reference in binomial standard errors.

    The standard error is evaluated at the reference value, which stays
    finite when no events were observed.
    """
    se = standard_error(p_ref, trials)
    if se == 0.0:
        return 0.0 if p_hat == p_ref else math.inf
    return abs(p_hat - p_ref) / se
