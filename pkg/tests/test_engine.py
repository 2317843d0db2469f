import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photon_mux.engine import (
    NoSolutionError,
    SourceParams,
    SpatialParams,
    analytic_p_success,
    asymptotic_gain,
    heralded_idler_after_storage,
    improvement_factor,
    passes,
    p_noise,
    p_noise_t,
    p_success,
    p_success_t,
    performance,
    snr,
    solve_nbar_for_snr,
    spatial_improvement_factor,
    spatial_p_success,
    truncation_delta,
    unswitched_performance,
    waiting_time,
    waiting_time_crossover,
    waiting_time_from_probability,
)
from photon_mux.fock import InvalidParameterError, PhotonNumberDist, binomial_loss, thermal_pmf

NOMINAL = SourceParams(nbar=0.1, eta_d=0.7, eta_l=0.8)

# reference values from a loop-based re-implementation using math.comb
REF_8_PULSES = (0.18640009005717084, 0.005858117641573846)
REF_1_PULSE = (0.04730327261889378, 0.0021399238522862296)
REF_NBAR_SNR100_DEPTH8 = 0.031938259871716654


# -- passes --------------------------------------------------------------------

@pytest.mark.parametrize("t,m,expected", [(5, 5, 1), (1, 1, 1), (1, 8, 8), (3, 5, 3)])
def test_passes(t, m, expected):
    assert passes(t, m) == expected


@pytest.mark.parametrize("t,m", [(0, 3), (4, 3), (1, 0)])
def test_passes_rejects(t, m):
    with pytest.raises(InvalidParameterError):
        passes(t, m)


# -- heralded state ------------------------------------------------------------

def test_heralded_state_perfect_detector_single_pass():
    state = heralded_idler_after_storage(SourceParams(0.1, 1.0, 0.8, 1, n_max=1), 1)
    assert state.herald_prob == pytest.approx(0.0826446, rel=1e-5)
    np.testing.assert_allclose(state.idler_dist.probs, [0.2, 0.8], atol=1e-12)


def test_heralded_state_lossless_loop():
    params = SourceParams(0.3, 0.6, 1.0, 4)
    ref = heralded_idler_after_storage(params, 4).idler_dist
    for t in range(1, 5):
        np.testing.assert_array_equal(heralded_idler_after_storage(params, t).idler_dist.probs, ref.probs)


def test_heralded_state_two_passes():
    state = heralded_idler_after_storage(NOMINAL.with_(depth=2, n_max=2), 1)
    expected = binomial_loss(PhotonNumberDist([0, 0.948276, 0.051724]), 0.64)
    np.testing.assert_allclose(state.idler_dist.probs, expected.probs, atol=1e-6)


# -- success and noise ------------------------------------------------------------

def test_single_pair_success_term():
    params = SourceParams(1e-9, 0.7, 0.8, 1, n_max=1)
    assert p_success_t(params, 1) == pytest.approx(thermal_pmf(1e-9, 1)[1] * 0.56, rel=1e-12)


@pytest.mark.parametrize("params", [NOMINAL.with_(eta_d=0.0), NOMINAL.with_(nbar=0.0)])
def test_no_herald_no_success(params):
    assert p_success_t(params, 1) == 0.0
    assert p_success(params.with_(depth=5)) == 0.0


def test_depth_one_is_single_term():
    assert p_success(NOMINAL) == p_success_t(NOMINAL, 1)


def test_two_pulses_one_pair():
    by_hand = 1 - (1 - 0.046281) * (1 - 0.037025)
    assert by_hand == pytest.approx(0.0815924, abs=1e-7)
    assert p_success(NOMINAL.with_(depth=2, n_max=1)) == pytest.approx(by_hand, abs=1e-6)


def test_against_reference_implementation():
    perf = performance(NOMINAL.with_(depth=8))
    assert (perf.p_success, perf.p_noise) == pytest.approx(REF_8_PULSES, rel=1e-12)
    perf = performance(NOMINAL)
    assert (perf.p_success, perf.p_noise) == pytest.approx(REF_1_PULSE, rel=1e-12)


def test_no_noise_with_one_pair():
    assert p_noise(NOMINAL.with_(depth=6, n_max=1)) == 0.0
    assert snr(NOMINAL.with_(n_max=1)) == math.inf


def test_total_loss_leaves_vacuum():
    params = NOMINAL.with_(eta_l=0.0, depth=5)
    assert p_noise(params) == 0.0
    assert p_success(params) == 0.0


def test_noise_term_carries_herald_probability():
    state = heralded_idler_after_storage(NOMINAL, 1)
    assert p_noise_t(NOMINAL, 1) == pytest.approx(state.herald_prob * state.idler_dist.probs[2:].sum())


def test_snr_ratio():
    assert snr(NOMINAL) == pytest.approx(REF_1_PULSE[0] / REF_1_PULSE[1], rel=1e-12)


def test_snr_falls_with_nbar():
    low, high = snr(NOMINAL.with_(nbar=1e-3)), snr(NOMINAL.with_(nbar=1e-1))
    assert low == pytest.approx(2084.604176310895, rel=1e-9)
    assert high == pytest.approx(22.105119566921225, rel=1e-9)
    assert low > high


def test_per_pulse_breakdown():
    perf = performance(NOMINAL.with_(depth=4))
    assert [p.t for p in perf.per_pulse] == [1, 2, 3, 4]
    assert perf.per_pulse[2].p_success == p_success_t(NOMINAL.with_(depth=4), 3)


# -- analytic low-nbar form ----------------------------------------------------

@pytest.mark.parametrize(
    "params,expected",
    [
        (NOMINAL, 0.046281),
        (NOMINAL.with_(depth=2), 0.0815922),
        (SourceParams(0.1, 1.0, 1.0, 2), 0.158459),
    ],
)
def test_analytic(params, expected):
    assert analytic_p_success(params) == pytest.approx(expected, abs=1e-6)


def test_analytic_pass_orientation_invariant():
    c, eta, m = 0.05, 0.77, 9
    forward = np.prod([1 - c * eta**t for t in range(1, m + 1)])
    backward = np.prod([1 - c * eta ** (m - t + 1) for t in range(1, m + 1)])
    assert forward == pytest.approx(backward, rel=1e-15)


def test_one_pair_truncation_matches_analytic():
    rng = random.Random(7)
    for _ in range(100):
        params = SourceParams(
            rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1), rng.randint(1, 20), n_max=1
        )
        assert abs(p_success(params) - analytic_p_success(params)) < 1e-12


# -- truncation ------------------------------------------------------------------

def test_truncation_one_pair_exact():
    (_, delta), = truncation_delta(NOMINAL.with_(depth=5), [1])
    assert abs(delta) < 1e-15


def test_truncation_low_nbar_small():
    (_, delta), = truncation_delta(NOMINAL.with_(nbar=1e-3), [5])
    assert abs(delta) < 1e-4


def test_truncation_converges():
    d = dict(truncation_delta(NOMINAL, [2, 3, 4, 5]))
    assert abs(d[5] - d[4]) < abs(d[3] - d[2])


# -- asymptotic gain ---------------------------------------------------------------

def test_asymptotic_gain_values():
    assert asymptotic_gain(0.8) == pytest.approx(4.0)
    assert asymptotic_gain(0.5) == pytest.approx(1.0)


@pytest.mark.parametrize("eta", [0.0, 1.0, -0.2])
def test_asymptotic_gain_rejects(eta):
    with pytest.raises(InvalidParameterError):
        asymptotic_gain(eta)


def test_asymptotic_convergence():
    params = NOMINAL.with_(nbar=1e-3)
    ratio = p_success(params.with_(depth=200)) / unswitched_performance(params).p_success
    assert ratio == pytest.approx(4.0, rel=0.02)


def test_asymptotic_bound_all_depths():
    params = NOMINAL.with_(nbar=1e-3)
    base = unswitched_performance(params).p_success
    bound = asymptotic_gain(0.8) * (1 + 1e-6)
    assert all(p_success(params.with_(depth=m)) / base <= bound for m in range(1, 201))


def test_depth_one_baseline_limit_is_inverse_loss():
    # against the depth-one device (one transit) the limit is 1 / (1 - eta_L)
    params = NOMINAL.with_(nbar=1e-3)
    ratio = p_success(params.with_(depth=200)) / p_success(params)
    assert ratio == pytest.approx(1 / (1 - 0.8), rel=0.02)


# -- monotonicity grid ------------------------------------------------------------

GRID_NBAR = (1e-4, 1e-3, 1e-2, 1e-1)
GRID_ETA = (0.3, 0.5, 0.7, 0.9, 0.98)
GRID_M = (1, 2, 5, 10, 15)


def _grid_value(nbar, eta_d, eta_l, depth):
    return p_success(SourceParams(nbar, eta_d, eta_l, depth))


@pytest.mark.parametrize("axis", ["nbar", "eta_d", "eta_l", "depth"])
def test_monotone_grid(axis):
    axes = {"nbar": GRID_NBAR, "eta_d": GRID_ETA, "eta_l": GRID_ETA, "depth": GRID_M}
    others = [a for a in axes if a != axis]
    for fixed in itertools.product(*(axes[a] for a in others)):
        base = dict(zip(others, fixed))
        values = [_grid_value(**{**base, axis: v}) for v in axes[axis]]
        assert all(b >= a - 1e-15 for a, b in zip(values, values[1:])), (axis, base, values)


@given(st.floats(1e-5, 0.1), st.floats(0.01, 1), st.floats(0.01, 1), st.integers(1, 20))
def test_later_pulses_succeed_more(nbar, eta_d, eta_l, m):
    params = SourceParams(nbar, eta_d, eta_l, m)
    values = [p.p_success for p in performance(params).per_pulse]
    assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))


def test_extra_loss_can_help_multi_photon_heralds():
    # bright pump, poor detector: one more transit turns |2> into |1> more often than |1> into |0>
    values = [p.p_success for p in performance(SourceParams(1.0, 0.25, 0.75, 2)).per_pulse]
    assert values[0] > values[1]


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.integers(1, 20), st.integers(1, 8))
def test_probabilities_bounded(nbar, eta_d, eta_l, m, n_max):
    perf = performance(SourceParams(nbar, eta_d, eta_l, m, n_max))
    assert 0.0 <= perf.p_success <= 1.0
    assert 0.0 <= perf.p_noise <= 1.0


# -- SNR solver ------------------------------------------------------------------

def test_solver_round_trip():
    params = NOMINAL.with_(depth=8)
    nbar = solve_nbar_for_snr(params, 100.0)
    assert snr(params.with_(nbar=nbar)) == pytest.approx(100.0, rel=1e-3)


def test_solver_regression_value():
    nbar = solve_nbar_for_snr(NOMINAL.with_(depth=8), 100.0)
    assert nbar == pytest.approx(REF_NBAR_SNR100_DEPTH8, rel=2e-3)


def test_solver_unreachable_low_target():
    params = NOMINAL.with_(depth=8)
    floor = snr(params.with_(nbar=1.0))
    with pytest.raises(NoSolutionError) as info:
        solve_nbar_for_snr(params, floor * 0.5 if floor * 0.5 > 1 else 1.0001)
    assert info.value.snr_high_nbar == pytest.approx(floor)


def test_solver_unreachable_without_noise():
    with pytest.raises(NoSolutionError):
        solve_nbar_for_snr(NOMINAL.with_(n_max=1), 100.0)


def test_solver_rejects_target_below_one():
    with pytest.raises(InvalidParameterError):
        solve_nbar_for_snr(NOMINAL, 0.5)


def test_solver_random_round_trips():
    rng = random.Random(2024)
    solved = 0
    while solved < 20:
        params = SourceParams(0.0, rng.uniform(0.2, 0.99), rng.uniform(0.2, 0.99), rng.randint(1, 20))
        target = 10 ** rng.uniform(0.5, 4)
        try:
            nbar = solve_nbar_for_snr(params, target)
        except NoSolutionError:
            continue
        assert snr(params.with_(nbar=nbar)) == pytest.approx(target, rel=1e-3)
        solved += 1


# -- improvement factors -----------------------------------------------------------

def test_improvement_identity_depth():
    base = NOMINAL.with_(nbar=0.01)
    assert improvement_factor(base, 1, "fixed-nbar", baseline="depth1") == pytest.approx(1.0)
    assert improvement_factor(base, 1, "fixed-snr", baseline="depth1") == pytest.approx(1.0)


def test_improvement_unswitched_depth_one():
    base = NOMINAL.with_(nbar=0.01)
    # a depth-one device only adds one lossy transit
    assert improvement_factor(base, 1, "fixed-nbar") == pytest.approx(0.8, rel=1e-2)
    assert improvement_factor(base, 1, "fixed-snr") == pytest.approx(1.0, rel=1e-2)


def test_fixed_snr_beats_fixed_nbar():
    base = NOMINAL.with_(nbar=0.01)
    assert improvement_factor(base, 8, "fixed-snr") > improvement_factor(base, 8, "fixed-nbar")


def test_improvement_rejects_mode():
    with pytest.raises(InvalidParameterError):
        improvement_factor(NOMINAL, 4, "fixed-power")


# -- spatial comparison ------------------------------------------------------------

def test_spatial_depth_zero_matches_temporal():
    for nbar in (1e-3, 0.05, 0.3):
        assert spatial_p_success(SpatialParams(0, nbar, 0.7, 0.8)) == pytest.approx(
            p_success(NOMINAL.with_(nbar=nbar)), rel=1e-14
        )


def test_spatial_union_of_sources():
    sp = SpatialParams(2, 0.05, 0.7, 0.8)
    single = heralded_idler_after_storage(NOMINAL.with_(nbar=0.05, eta_l=0.8**2), 1).p_success
    assert spatial_p_success(sp) == pytest.approx(1 - (1 - single) ** 4, rel=1e-12)


def test_spatial_rejects_negative_depth():
    with pytest.raises(InvalidParameterError):
        SpatialParams(-1)


# -- waiting time ------------------------------------------------------------------

def test_waiting_time_single_photon():
    p1 = p_success(NOMINAL)
    assert waiting_time(NOMINAL, 1, 80e6) == pytest.approx(1 / (80e6 * p1))


def test_waiting_time_depth_and_power():
    params = NOMINAL.with_(depth=5)
    p = p_success(params)
    assert waiting_time(params, 3, 80e6) == pytest.approx(5 / (80e6 * p**3))


def test_waiting_time_infinite_without_success():
    assert waiting_time(NOMINAL.with_(nbar=0.0), 2, 80e6) == math.inf


def test_waiting_time_rejects():
    with pytest.raises(InvalidParameterError):
        waiting_time_from_probability(0.1, 0, 80e6)
    with pytest.raises(InvalidParameterError):
        waiting_time_from_probability(0.1, 1, 0.0)


def test_crossover_helper():
    assert waiting_time_crossover([5, 4, 1, 1], [3, 3, 3, 3]) == 3
    assert waiting_time_crossover([1, 1], [3, 3]) == 1
    assert waiting_time_crossover([1, 9], [3, 3]) is None


def test_params_validation():
    for bad in (dict(nbar=-1), dict(eta_d=1.5), dict(eta_l=-0.1), dict(depth=0), dict(n_max=0)):
        with pytest.raises(InvalidParameterError):
            SourceParams(**bad)
