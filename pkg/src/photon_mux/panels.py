"""Tabular data behind each reproduced figure panel and the comparison table."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np

from .engine import (
    NoSolutionError,
    NonMonotoneError,
    SourceParams,
    SpatialParams,
    performance,
    solve_nbar_for_snr,
    solve_spatial_nbar_for_snr,
    solve_unswitched_nbar_for_snr,
    spatial_improvement_factor,
    spatial_performance,
    improvement_factor,
    truncation_delta,
    unswitched_performance,
    waiting_time_from_probability,
)
from .montecarlo import McConfig, agreement_z, run_mc

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_NBAR_GRID = tuple(np.logspace(-4, 0, 50))
FIGURE2_DEPTHS = (1, 3, 5, 15)
FIGURE2_TRUNCATIONS = (1, 2, 3, 4, 5, 6)
FIGURE2D_MAX_DEPTH = 15
FIXED_NBAR = 0.01
FIGURE3_DEPTH = 15
FIGURE3_MAX_PHOTONS = 20
FUTURE_DEVICE = (0.98, 0.95)
FIGURE4_DEPTH = 10
FIGURE4C_DEPTHS = (1, 5, 10, 15)
FIGURE4_ETA_GRID = tuple(np.round(np.linspace(0.10, 0.98, 23), 10))
TABLE1_DEPTH = 8
VALIDATION_GRID = tuple(
    (nbar, m, eta_l) for nbar in (1e-3, 1e-2, 1e-1) for m in (1, 4, 8) for eta_l in (0.6, 0.8)
)
Z_THRESHOLD = 3.0


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    rows: list[tuple[Any, ...]] = field(default_factory=list)
    failures: int = 0


def worker_count() -> int:
    env = os.environ.get("PHOTON_MUX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer PHOTON_MUX_THREADS=%r", env)
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``map`` over a thread pool; results come back in input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _try_solve(solver: Callable[[], float], label: str) -> Optional[float]:
    try:
        return solver()
    except (NoSolutionError, NonMonotoneError) as exc:
        log.warning("%s: %s", label, exc)
        return None


def nbar_sweep(name: str, params: SourceParams, depths: Sequence[int], nbars: Sequence[float]) -> Table:
    table = Table(name, ("nbar", "depth", "p_success", "snr"))
    points = [(m, nbar) for m in depths for nbar in nbars]

    def row(point):
        m, nbar = point
        perf = performance(params.with_(depth=m, nbar=nbar))
        return (nbar, m, perf.p_success, perf.snr)

    table.rows = parallel_map(row, points)
    return table


def truncation_table(params: SourceParams, nbars: Sequence[float], n_max_list: Sequence[int]) -> Table:
    table = Table("figure2c", ("nbar", "n_max", "delta_p"))
    rows = parallel_map(lambda nbar: truncation_delta(params.with_(nbar=nbar), n_max_list), nbars)
    for nbar, deltas in zip(nbars, rows):
        table.rows.extend((nbar, n, d) for n, d in deltas)
    return table


def depth_comparison(params: SourceParams, max_depth: int, fixed_nbar: float, snr_target: float) -> Table:
    table = Table("figure2d", ("depth", "mode", "scheme", "p_success"))
    jobs: list[tuple[int, str, str]] = []
    for mode in ("fixed-nbar", "fixed-snr"):
        jobs.extend((m, mode, "temporal") for m in range(1, max_depth + 1))
        d = 0
        while 2**d <= max_depth:
            jobs.append((2**d, mode, "spatial"))
            d += 1

    def row(job):
        m, mode, scheme = job
        if scheme == "temporal":
            point = params.with_(depth=m, nbar=fixed_nbar)
            if mode == "fixed-snr":
                nbar = _try_solve(lambda: solve_nbar_for_snr(point, snr_target), f"temporal depth {m}")
                if nbar is None:
                    return (m, mode, scheme, None)
                point = point.with_(nbar=nbar)
            return (m, mode, scheme, performance(point).p_success)
        sp = SpatialParams(int(math.log2(m)), fixed_nbar, params.eta_d, params.eta_l, params.n_max)
        if mode == "fixed-snr":
            nbar = _try_solve(lambda: solve_spatial_nbar_for_snr(sp, snr_target), f"spatial {m} sources")
            if nbar is None:
                return (m, mode, scheme, None)
            sp = sp.with_(nbar=nbar)
        return (m, mode, scheme, spatial_performance(sp).p_success)

    table.rows = parallel_map(row, jobs)
    table.failures = sum(r[-1] is None for r in table.rows)
    return table


def figure2(
    params: SourceParams,
    panels: Sequence[str] = ("a", "b", "c", "d"),
    depths: Sequence[int] = FIGURE2_DEPTHS,
    nbars: Sequence[float] = DEFAULT_NBAR_GRID,
    n_max_list: Sequence[int] = FIGURE2_TRUNCATIONS,
    fixed_nbar: float = FIXED_NBAR,
    snr_target: float = 100.0,
    max_depth: int = FIGURE2D_MAX_DEPTH,
) -> list[Table]:
    tables = []
    for panel in panels:
        if panel in ("a", "b"):
            tables.append(nbar_sweep(f"figure2{panel}", params, depths, nbars))
        elif panel == "c":
            tables.append(truncation_table(params, nbars, n_max_list))
        elif panel == "d":
            tables.append(depth_comparison(params, max_depth, fixed_nbar, snr_target))
        else:
            raise ValueError(f"figure2 has no panel {panel!r}")
    return tables


def figure3(
    params: SourceParams,
    snr_target: float = 100.0,
    rep_rate_hz: float = 80e6,
    max_photons: int = FIGURE3_MAX_PHOTONS,
    depth: int = FIGURE3_DEPTH,
    future: tuple[float, float] = FUTURE_DEVICE,
) -> Table:
    """Waiting time for ``N`` sources to fire together, each at the SNR target."""
    table = Table("figure3", ("N", "scheme", "wait_seconds"))
    devices = {
        "unswitched": (params, True),
        "multiplexed": (params.with_(depth=depth), False),
        "future": (params.with_(eta_d=future[0], eta_l=future[1], depth=depth), False),
    }
    for scheme, (device, bare) in devices.items():
        if bare:
            nbar = _try_solve(lambda: solve_unswitched_nbar_for_snr(device, snr_target), scheme)
        else:
            nbar = _try_solve(lambda: solve_nbar_for_snr(device, snr_target), scheme)
        if nbar is None:
            table.failures += 1
            table.rows.extend((n, scheme, None) for n in range(1, max_photons + 1))
            continue
        device = device.with_(nbar=nbar)
        p = unswitched_performance(device).p_success if bare else performance(device).p_success
        m = 1 if bare else device.depth
        table.rows.extend(
            (n, scheme, waiting_time_from_probability(p, n, rep_rate_hz, m))
            for n in range(1, max_photons + 1)
        )
    return table


def _fixed_snr_p_success(point: SourceParams, snr_target: float, label: str) -> Optional[float]:
    nbar = _try_solve(lambda: solve_nbar_for_snr(point, snr_target), label)
    return None if nbar is None else performance(point.with_(nbar=nbar)).p_success


def figure4(
    params: SourceParams,
    panels: Sequence[str] = ("a", "b", "c", "d"),
    snr_target: float = 100.0,
    etas: Sequence[float] = FIGURE4_ETA_GRID,
    nbars: Sequence[float] = DEFAULT_NBAR_GRID,
    future: tuple[float, float] = FUTURE_DEVICE,
) -> list[Table]:
    """Efficiency dependence at a fixed SNR; ``params.depth`` sets the depth of a, b and d."""
    tables = []
    for panel in panels:
        if panel == "a":
            table = Table("figure4a", ("eta", "p_success"))
            table.rows = parallel_map(
                lambda eta: (eta, _fixed_snr_p_success(params.with_(eta_d=eta), snr_target, f"eta_d={eta:g}")),
                etas,
            )
        elif panel == "b":
            table = Table("figure4b", ("eta", "p_success"))
            table.rows = parallel_map(
                lambda eta: (eta, _fixed_snr_p_success(params.with_(eta_l=eta), snr_target, f"eta_L={eta:g}")),
                etas,
            )
        elif panel == "c":
            device = params.with_(eta_d=future[0], eta_l=future[1])
            table = nbar_sweep("figure4c", device, FIGURE4C_DEPTHS, nbars)
        elif panel == "d":
            table = Table("figure4d", ("eta_d", "eta_L", "p_success"))
            grid = [(ed, el) for ed in etas for el in etas]
            table.rows = parallel_map(
                lambda g: (
                    g[0],
                    g[1],
                    _fixed_snr_p_success(
                        params.with_(eta_d=g[0], eta_l=g[1]), snr_target, f"eta_d={g[0]:g} eta_L={g[1]:g}"
                    ),
                ),
                grid,
            )
        else:
            raise ValueError(f"figure4 has no panel {panel!r}")
        table.failures = sum(r[-1] is None for r in table.rows)
        tables.append(table)
    return tables


def table1(
    params: SourceParams,
    depth: int = TABLE1_DEPTH,
    fixed_nbar: float = FIXED_NBAR,
    snr_target: float = 100.0,
    rep_rate_hz: float = 80e6,
) -> Table:
    """Temporal versus spatial multiplexing at equal depth, relative to one bare source.

    Raises ``NoSolutionError`` when an SNR operating point does not exist.
    """
    tree_depth = math.log2(depth)
    if tree_depth != int(tree_depth):
        raise ValueError(f"table1 depth must be a power of two for the spatial tree, got {depth}")
    tree = SpatialParams(int(tree_depth), fixed_nbar, params.eta_d, params.eta_l, params.n_max)
    base = params.with_(nbar=fixed_nbar)
    table = Table(
        "table1", ("scheme", "sources", "detectors", "switches", "rep_rate", "constraint", "improvement")
    )
    for constraint, mode in ((f"snr={snr_target:g}", "fixed-snr"), (f"nbar={fixed_nbar:g}", "fixed-nbar")):
        table.rows.append(
            ("temporal", 1, 1, 1, rep_rate_hz / depth, constraint,
             improvement_factor(base, depth, mode, snr_target))
        )
        table.rows.append(
            ("spatial", depth, depth, depth - 1, rep_rate_hz, constraint,
             spatial_improvement_factor(tree, mode, snr_target))
        )
    return table


def sweep(axes: dict[str, Sequence[float]], params: SourceParams) -> Table:
    """Full performance on the Cartesian product of the given axes."""
    names = ("nbar", "eta_d", "eta_l", "depth", "n_max")
    table = Table("sweep", ("nbar", "eta_d", "eta_L", "depth", "n_max", "p_success", "p_noise", "snr"))
    values = [axes.get(n, [getattr(params, n)]) for n in names]
    points = [()]
    for vals in values:
        points = [p + (v,) for p in points for v in vals]

    def row(point):
        nbar, eta_d, eta_l, depth, n_max = point
        perf = performance(SourceParams(nbar, eta_d, eta_l, int(depth), int(n_max)))
        return (nbar, eta_d, eta_l, int(depth), int(n_max), perf.p_success, perf.p_noise, perf.snr)

    table.rows = parallel_map(row, points)
    return table


def mc_validate(
    params: SourceParams,
    trials: int = 1_000_000,
    seed: int = 42,
    grid: Sequence[tuple[float, int, float]] = VALIDATION_GRID,
    threshold: float = Z_THRESHOLD,
) -> Table:
    """Union-semantics Monte Carlo against the closed forms on a parameter grid."""
    table = Table(
        "mc_validate",
        ("nbar", "depth", "eta_L", "p_success_engine", "p_success_mc", "se_success", "z_success",
         "p_noise_engine", "p_noise_mc", "se_noise", "z_noise", "pass"),
    )
    seeds = np.random.SeedSequence(seed).generate_state(len(grid), dtype=np.uint64)
    for (nbar, m, eta_l), point_seed in zip(grid, seeds):
        point = params.with_(nbar=nbar, depth=m, eta_l=eta_l)
        perf = performance(point)
        mc = run_mc(McConfig(point, trials, int(point_seed), "union"), workers=worker_count())
        z_s = agreement_z(mc.p_success_hat, perf.p_success, trials)
        z_n = agreement_z(mc.p_noise_hat, perf.p_noise, trials)
        ok = z_s <= threshold and z_n <= threshold
        table.failures += not ok
        table.rows.append(
            (nbar, m, eta_l, perf.p_success, mc.p_success_hat, mc.se_success, z_s,
             perf.p_noise, mc.p_noise_hat, mc.se_noise, z_n, "pass" if ok else "fail")
        )
    return table
