"""Loop-multiplexed heralded source: success, noise, SNR and derived figures of merit.

A photon heralded on pulse ``t`` of a depth-``m`` bin transits the lumped
switch/loop element ``m - t + 1`` times before it leaves the output, so its
conditional idler state goes through a loss channel of transmission
``eta_L ** (m - t + 1)``. Pulses combine by the independent-union product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Literal, NamedTuple, Optional, Sequence

import numpy as np

from .fock import (
    DEFAULT_N_MAX,
    DetectorModel,
    InvalidParameterError,
    PhotonNumberDist,
    _check_efficiency,
    _check_n_max,
    binomial_loss,
    pnr_herald,
    thermal_pair_state,
    thermal_pmf,
)

NBAR_BRACKET = (1e-6, 1.0)
SNR_REL_TOL = 1e-3
MAX_BISECTIONS = 200

ImprovementMode = Literal["fixed-nbar", "fixed-snr"]
Baseline = Literal["unswitched", "depth1"]


class NoSolutionError(RuntimeError):
    """The SNR target is not bracketed by ``[NBAR_BRACKET]``."""

    def __init__(self, target: float, snr_low_nbar: float, snr_high_nbar: float):
        self.target = target
        self.snr_low_nbar = snr_low_nbar
        self.snr_high_nbar = snr_high_nbar
        lo, hi = NBAR_BRACKET
        super().__init__(
            f"SNR target {target:g} not reachable: snr(nbar={lo:g}) = {snr_low_nbar:g}, "
            f"snr(nbar={hi:g}) = {snr_high_nbar:g}"
        )


class NonMonotoneError(RuntimeError):
    """SNR failed to decrease with mean photon number inside the bracket."""


@dataclass(frozen=True)
class SourceParams:
    """Operating point of a temporally multiplexed source.

    Parameters
    ----------
    nbar : float
        Mean number of pairs per pump pulse.
    eta_d : float
        Heralding detector efficiency (all signal-arm loss folded in).
    eta_l : float
        Lumped transmission of one pass through the switch and storage loop.
    depth : int
        Multiplexing depth ``m``, pump pulses per output time bin.
    n_max : int
        Photon-number truncation.
    """

    nbar: float = 0.0
    eta_d: float = 0.7
    eta_l: float = 0.8
    depth: int = 1
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self) -> None:
        if not self.nbar >= 0.0 or not math.isfinite(self.nbar):
            raise InvalidParameterError(f"nbar must be >= 0, got {self.nbar!r}")
        _check_efficiency(self.eta_d, "eta_d")
        _check_efficiency(self.eta_l, "eta_l")
        if int(self.depth) != self.depth or self.depth < 1:
            raise InvalidParameterError(f"depth must be an integer >= 1, got {self.depth!r}")
        _check_n_max(self.n_max)

    def with_(self, **changes) -> "SourceParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SpatialParams:
    """Binary switch tree of ``depth`` layers fed by ``2**depth`` identical sources."""

    depth: int = 0
    nbar: float = 0.0
    eta_d: float = 0.7
    eta_l: float = 0.8
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self) -> None:
        if int(self.depth) != self.depth or self.depth < 0:
            raise InvalidParameterError(f"tree depth must be an integer >= 0, got {self.depth!r}")
        # reuse the scalar checks
        SourceParams(self.nbar, self.eta_d, self.eta_l, 1, self.n_max)

    @property
    def sources(self) -> int:
        return 2**self.depth

    def with_(self, **changes) -> "SpatialParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class HeraldedState:
    pulse_index: int
    herald_prob: float
    idler_dist: Optional[PhotonNumberDist]

    @property
    def p_success(self) -> float:
        if self.idler_dist is None:
            return 0.0
        return self.herald_prob * self.idler_dist[1]

    @property
    def p_noise(self) -> float:
        if self.idler_dist is None:
            return 0.0
        return self.herald_prob * self.idler_dist.multi_photon()


class PulseContribution(NamedTuple):
    t: int
    p_success: float
    p_noise: float


@dataclass(frozen=True)
class MuxPerformance:
    p_success: float
    p_noise: float
    per_pulse: tuple[PulseContribution, ...]

    @property
    def snr(self) -> float:
        return _ratio(self.p_success, self.p_noise)


def _ratio(p_success: float, p_noise: float) -> float:
    if p_noise <= 0.0:
        return math.inf
    return p_success / p_noise


def _union(probs: Iterable[float]) -> float:
    # 1 - prod(1 - p), accurate for small p
    return 0.0 - math.expm1(sum(math.log1p(-p) if p < 1.0 else -math.inf for p in probs))


def passes(t: int, m: int) -> int:
    """Number of switch/loop transits for a photon heralded on pulse ``t`` of ``m``."""
    if int(m) != m or m < 1:
        raise InvalidParameterError(f"depth must be an integer >= 1, got {m!r}")
    if int(t) != t or not 1 <= t <= m:
        raise InvalidParameterError(f"pulse index must lie in [1, {m}], got {t!r}")
    return m - t + 1


def _herald_single(params: SourceParams | SpatialParams):
    state = thermal_pair_state(params.nbar, params.n_max)
    return pnr_herald(state, DetectorModel(params.eta_d), 1)


def _after_loss(herald, transmission: float, t: int) -> HeraldedState:
    if herald.idler_given_k is None:
        return HeraldedState(t, 0.0, None)
    return HeraldedState(t, herald.herald_prob, binomial_loss(herald.idler_given_k, transmission))


def heralded_idler_after_storage(params: SourceParams, t: int) -> HeraldedState:
    """Idler state heralded by a single click on pulse ``t``, stored until the bin closes."""
    transits = passes(t, params.depth)
    return _after_loss(_herald_single(params), params.eta_l**transits, t)


def performance(params: SourceParams) -> MuxPerformance:
    """Success, noise and per-pulse breakdown for one output time bin."""
    herald = _herald_single(params)
    pulses = []
    for t in range(1, params.depth + 1):
        state = _after_loss(herald, params.eta_l ** passes(t, params.depth), t)
        pulses.append(PulseContribution(t, state.p_success, state.p_noise))
    return MuxPerformance(
        p_success=_union(p.p_success for p in pulses),
        p_noise=_union(p.p_noise for p in pulses),
        per_pulse=tuple(pulses),
    )


def unswitched_performance(params: SourceParams) -> MuxPerformance:
    """A bare heralded source: one pulse per bin and no switch or loop in the path.

    This is the single-source reference that improvement factors and the
    large-depth limit are quoted against. ``eta_l`` and ``depth`` are ignored.
    """
    state = _after_loss(_herald_single(params), 1.0, 1)
    pulse = PulseContribution(1, state.p_success, state.p_noise)
    return MuxPerformance(pulse.p_success, pulse.p_noise, (pulse,))


def p_success_t(params: SourceParams, t: int) -> float:
    return heralded_idler_after_storage(params, t).p_success


def p_noise_t(params: SourceParams, t: int) -> float:
    """Probability that pulse ``t`` is heralded and delivers two or more photons."""
    return heralded_idler_after_storage(params, t).p_noise


def p_success(params: SourceParams) -> float:
    return performance(params).p_success


def p_noise(params: SourceParams) -> float:
    return performance(params).p_noise


def snr(params: SourceParams) -> float:
    """``p_success / p_noise``; ``math.inf`` when no multi-photon term survives."""
    return performance(params).snr


def analytic_p_success(params: SourceParams) -> float:
    """Low-``nbar`` success probability keeping only the one-pair term."""
    one_pair = thermal_pmf(params.nbar, 1)[1]
    return _union(
        one_pair * params.eta_d * params.eta_l**t for t in range(1, params.depth + 1)
    )


def truncation_delta(
    params: SourceParams, n_max_list: Sequence[int]
) -> list[tuple[int, float]]:
    """Full-calculation minus one-pair success probability, per truncation level."""
    analytic = analytic_p_success(params)
    return [(n, p_success(params.with_(n_max=n)) - analytic) for n in n_max_list]


def asymptotic_gain(eta_l: float) -> float:
    """Large-depth, low-``nbar`` ratio of multiplexed to single-source success."""
    if not 0.0 < eta_l < 1.0:
        raise InvalidParameterError(f"eta_l must lie strictly inside (0, 1), got {eta_l!r}")
    return eta_l / (1.0 - eta_l)


def _solve_log_bisection(snr_of_nbar: Callable[[float], float], target: float) -> float:
    if not target > 1.0:
        raise InvalidParameterError(f"target SNR must exceed 1, got {target!r}")
    lo, hi = math.log10(NBAR_BRACKET[0]), math.log10(NBAR_BRACKET[1])
    s_lo, s_hi = snr_of_nbar(10**lo), snr_of_nbar(10**hi)
    if not (s_lo >= target >= s_hi) or math.isinf(s_hi):
        raise NoSolutionError(target, s_lo, s_hi)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        s_mid = snr_of_nbar(10**mid)
        if not s_hi <= s_mid <= s_lo:
            raise NonMonotoneError(
                f"snr not decreasing in nbar: snr({10**lo:.3g})={s_lo:.6g}, "
                f"snr({10**mid:.3g})={s_mid:.6g}, snr({10**hi:.3g})={s_hi:.6g}"
            )
        if abs(s_mid - target) / target < SNR_REL_TOL:
            return 10**mid
        if s_mid > target:
            lo, s_lo = mid, s_mid
        else:
            hi, s_hi = mid, s_mid
    return 10**mid


def solve_nbar_for_snr(params: SourceParams, target_snr: float) -> float:
    """Mean pair number at which the multiplexed source reaches ``target_snr``.

    ``params.nbar`` is ignored. Bisection runs on ``log10(nbar)`` over
    ``NBAR_BRACKET`` until the SNR is within 0.1 % of the target.

    Raises
    ------
    NoSolutionError
        If the target is not bracketed.
    NonMonotoneError
        If SNR is found to increase with ``nbar`` inside the bracket.
    """
    return _solve_log_bisection(lambda nbar: snr(params.with_(nbar=nbar)), target_snr)


def solve_unswitched_nbar_for_snr(params: SourceParams, target_snr: float) -> float:
    return _solve_log_bisection(
        lambda nbar: unswitched_performance(params.with_(nbar=nbar)).snr, target_snr
    )


def spatial_performance(params: SpatialParams) -> MuxPerformance:
    """Union over ``2**d`` independently heralded sources behind ``d`` lossy switch layers.

    A tree of depth zero still counts one switch transit so it coincides with
    the temporal scheme at depth one.
    """
    herald = _herald_single(params)
    state = _after_loss(herald, params.eta_l ** max(params.depth, 1), 1)
    per_source = PulseContribution(1, state.p_success, state.p_noise)
    return MuxPerformance(
        p_success=_union([per_source.p_success] * params.sources),
        p_noise=_union([per_source.p_noise] * params.sources),
        per_pulse=(per_source,),
    )


def spatial_p_success(params: SpatialParams) -> float:
    return spatial_performance(params).p_success


def solve_spatial_nbar_for_snr(params: SpatialParams, target_snr: float) -> float:
    return _solve_log_bisection(
        lambda nbar: spatial_performance(params.with_(nbar=nbar)).snr, target_snr
    )


def _baseline_p_success(
    params: SourceParams, mode: ImprovementMode, target_snr: float, baseline: Baseline
) -> float:
    if baseline == "unswitched":
        if mode == "fixed-snr":
            params = params.with_(nbar=solve_unswitched_nbar_for_snr(params, target_snr))
        return unswitched_performance(params).p_success
    if baseline == "depth1":
        params = params.with_(depth=1)
        if mode == "fixed-snr":
            params = params.with_(nbar=solve_nbar_for_snr(params, target_snr))
        return p_success(params)
    raise InvalidParameterError(f"unknown baseline {baseline!r}")


def _check_mode(mode: str) -> None:
    if mode not in ("fixed-nbar", "fixed-snr"):
        raise InvalidParameterError(f"mode must be 'fixed-nbar' or 'fixed-snr', got {mode!r}")


def improvement_factor(
    params: SourceParams,
    m: int,
    mode: ImprovementMode = "fixed-snr",
    target_snr: float = 100.0,
    baseline: Baseline = "unswitched",
) -> float:
    """Success probability at depth ``m`` relative to a single heralded source.

    In ``fixed-nbar`` mode both use ``params.nbar``; in ``fixed-snr`` mode each
    is pumped at its own ``nbar`` for ``target_snr``. The reference is the bare
    unswitched source by default; ``baseline="depth1"`` compares against the
    multiplexed device run at depth one instead (one switch transit).
    """
    _check_mode(mode)
    target = params.with_(depth=m)
    if mode == "fixed-snr":
        target = target.with_(nbar=solve_nbar_for_snr(target, target_snr))
    return p_success(target) / _baseline_p_success(params, mode, target_snr, baseline)


def spatial_improvement_factor(
    params: SpatialParams,
    mode: ImprovementMode = "fixed-snr",
    target_snr: float = 100.0,
    baseline: Baseline = "unswitched",
) -> float:
    _check_mode(mode)
    target = params
    if mode == "fixed-snr":
        target = params.with_(nbar=solve_spatial_nbar_for_snr(params, target_snr))
    reference = SourceParams(params.nbar, params.eta_d, params.eta_l, 1, params.n_max)
    return spatial_p_success(target) / _baseline_p_success(reference, mode, target_snr, baseline)


def waiting_time_from_probability(
    p: float, n_photons: int, rep_rate_hz: float, depth: int = 1
) -> float:
    """Mean time for ``n_photons`` independent sources to fire in the same bin.

    Bins arrive at ``rep_rate_hz / depth``; returns ``math.inf`` for ``p == 0``.
    """
    if int(n_photons) != n_photons or n_photons < 1:
        raise InvalidParameterError(f"photon count must be an integer >= 1, got {n_photons!r}")
    if not rep_rate_hz > 0.0:
        raise InvalidParameterError(f"repetition rate must be positive, got {rep_rate_hz!r}")
    if p <= 0.0:
        return math.inf
    log_wait = math.log(depth) - math.log(rep_rate_hz) - n_photons * math.log(p)
    return math.exp(log_wait) if log_wait < 709.0 else math.inf


def waiting_time(params: SourceParams, n_photons: int, rep_rate_hz: float) -> float:
    return waiting_time_from_probability(
        p_success(params), n_photons, rep_rate_hz, params.depth
    )


def unswitched_waiting_time(params: SourceParams, n_photons: int, rep_rate_hz: float) -> float:
    return waiting_time_from_probability(
        unswitched_performance(params).p_success, n_photons, rep_rate_hz, 1
    )


def waiting_time_crossover(
    waits_a: Sequence[float], waits_b: Sequence[float]
) -> Optional[int]:
    """Smallest 1-based ``N`` from which ``waits_a[N-1] < waits_b[N-1]`` holds for every later ``N``."""
    a, b = np.asarray(waits_a), np.asarray(waits_b)
    wins = a < b
    if not wins[-1]:
        return None
    losing = np.flatnonzero(~wins)
    return int(losing[-1]) + 2 if losing.size else 1
