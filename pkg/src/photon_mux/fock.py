"""Photon-number statistics: thermal pair states, binomial loss and PNR heralding.

Every state handled here is diagonal in the Fock basis, so a density matrix is
stored as its diagonal, a :class:`PhotonNumberDist`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

MAX_N_MAX = 64
DEFAULT_N_MAX = 5

_MASS_TOL = 1e-12


class InvalidParameterError(ValueError):
    """Raised when a model parameter lies outside its physical domain."""


@lru_cache(maxsize=None)
def _binomial_table(n_max: int) -> np.ndarray:
    # table[n, k] = C(n, k), correctly rounded to float64
    table = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        for k in range(n + 1):
            table[n, k] = float(math.comb(n, k))
    table.setflags(write=False)
    return table


def binomial_table(n_max: int) -> np.ndarray:
    """Return the read-only Pascal table ``C[n, k]`` for ``0 <= k <= n <= n_max``."""
    _check_n_max(n_max)
    return _binomial_table(n_max)


def _check_n_max(n_max: int) -> None:
    if int(n_max) != n_max or n_max < 1:
        raise InvalidParameterError(f"n_max must be an integer >= 1, got {n_max!r}")
    if n_max > MAX_N_MAX:
        raise InvalidParameterError(f"n_max must be <= {MAX_N_MAX}, got {n_max}")


def _check_efficiency(eta: float, name: str = "efficiency") -> None:
    if not (0.0 <= eta <= 1.0):
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {eta!r}")


def transmission_matrix(eta: float, n_max: int) -> np.ndarray:
    """Matrix ``T[k, n] = C(n, k) eta^k (1 - eta)^(n - k)`` of a beamsplitter loss channel."""
    _check_efficiency(eta, "transmission")
    binom = binomial_table(n_max)
    n = np.arange(n_max + 1)
    k = n[:, None]
    with np.errstate(invalid="ignore"):
        # 0**0 == 1 handles eta in {0, 1}
        powers = np.power(eta, k) * np.power(1.0 - eta, np.maximum(n[None, :] - k, 0))
    return np.where(k <= n[None, :], binom.T * powers, 0.0)


@dataclass(frozen=True, eq=False)
class PhotonNumberDist:
    """Probability mass over photon number ``n = 0..n_max``.

    Truncated distributions may carry total mass below one.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size < 2:
            raise InvalidParameterError("probs must be one-dimensional with n_max >= 1")
        _check_n_max(probs.size - 1)
        if np.any(probs < -_MASS_TOL) or np.any(probs > 1.0 + _MASS_TOL):
            raise InvalidParameterError("every probability must lie in [0, 1]")
        if probs.sum() > 1.0 + _MASS_TOL:
            raise InvalidParameterError(f"total mass {probs.sum()!r} exceeds 1")
        probs = np.clip(probs, 0.0, 1.0)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhotonNumberDist):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())

    @classmethod
    def fock(cls, n: int, n_max: int) -> "PhotonNumberDist":
        """Pure Fock state ``|n><n|`` truncated at ``n_max``."""
        probs = np.zeros(n_max + 1)
        probs[n] = 1.0
        return cls(probs)

    @property
    def n_max(self) -> int:
        return self.probs.size - 1

    def __getitem__(self, n: int) -> float:
        return float(self.probs[n]) if 0 <= n <= self.n_max else 0.0

    def total(self) -> float:
        return float(self.probs.sum())

    def mean(self) -> float:
        return float(np.arange(self.n_max + 1) @ self.probs)

    def multi_photon(self) -> float:
        """Mass on ``n >= 2``."""
        return float(self.probs[2:].sum())

    def normalized(self) -> "PhotonNumberDist":
        total = self.probs.sum()
        if total <= 0.0:
            raise InvalidParameterError("cannot normalize a distribution with zero mass")
        return PhotonNumberDist(self.probs / total)


@dataclass(frozen=True)
class JointPairState:
    """Signal/idler state perfectly correlated in photon number.

    ``pair_probs[n]`` is the probability that ``n`` pairs were generated, i.e.
    that both arms hold ``n`` photons; either marginal is ``pair_probs``.
    """

    pair_probs: PhotonNumberDist

    @property
    def n_max(self) -> int:
        return self.pair_probs.n_max

    @property
    def signal(self) -> PhotonNumberDist:
        return self.pair_probs

    @property
    def idler(self) -> PhotonNumberDist:
        return self.pair_probs


@dataclass(frozen=True)
class DetectorModel:
    """Heralding detector with per-photon efficiency and no dark counts.

    Only photon-number-resolving operation is modelled.
    """

    efficiency: float
    resolving: bool = True

    def __post_init__(self) -> None:
        _check_efficiency(self.efficiency, "detector efficiency")
        if not self.resolving:
            raise InvalidParameterError("binary (non-PNR) detectors are not supported")


class HeraldOutcome(NamedTuple):
    herald_prob: float
    idler_given_k: Optional[PhotonNumberDist]


def thermal_pmf(nbar: float, n_max: int = DEFAULT_N_MAX) -> PhotonNumberDist:
    """Single-mode thermal photon-number distribution truncated at ``n_max``.

    The tail beyond ``n_max`` is dropped, not renormalized.
    """
    if not nbar >= 0.0 or not np.isfinite(nbar):
        raise InvalidParameterError(f"mean photon number must be >= 0, got {nbar!r}")
    _check_n_max(n_max)
    ratio = nbar / (nbar + 1.0)
    return PhotonNumberDist(np.power(ratio, np.arange(n_max + 1)) / (nbar + 1.0))


def thermal_pair_state(nbar: float, n_max: int = DEFAULT_N_MAX) -> JointPairState:
    return JointPairState(thermal_pmf(nbar, n_max))


def binomial_loss(dist: PhotonNumberDist, eta: float) -> PhotonNumberDist:
    """Send ``dist`` through a beamsplitter of transmission ``eta``.

    ``out[k] = sum_{n >= k} dist[n] C(n, k) eta^k (1 - eta)^(n - k)``.
    """
    _check_efficiency(eta, "transmission")
    if eta == 1.0:
        return dist
    return PhotonNumberDist(transmission_matrix(eta, dist.n_max) @ dist.probs)


def pnr_herald(state: JointPairState, detector: DetectorModel, k: int) -> HeraldOutcome:
    """Condition the idler on the signal detector registering exactly ``k`` photons.

    Returns the probability of the ``k``-click outcome and the normalized idler
    distribution given that outcome. When the outcome is impossible the
    conditional state is ``None``.
    """
    if int(k) != k or k < 0:
        raise InvalidParameterError(f"click number must be a non-negative integer, got {k!r}")
    if k > state.n_max:
        return HeraldOutcome(0.0, None)
    response = transmission_matrix(detector.efficiency, state.n_max)[k]
    weighted = state.pair_probs.probs * response
    herald_prob = float(weighted.sum())
    if herald_prob <= 0.0:
        return HeraldOutcome(0.0, None)
    return HeraldOutcome(herald_prob, PhotonNumberDist(weighted / herald_prob))
