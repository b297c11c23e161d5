import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnbeirp.errors import DomainError, EmptySubsetError
from gnbeirp.nulling import (
    NullingRequest,
    hpbw_select,
    select,
    subset_median_at,
    threshold_select,
)
from gnbeirp.radiation import AngularGrid, RadiationPattern
from gnbeirp.statistics import lower_median

TARGET = (6.0, 5.0)


def request(eps=None, algorithm="threshold", logic="and-exclude", target=TARGET):
    return NullingRequest(*target, epsilon_db=eps, algorithm=algorithm, hpbw_logic=logic)


def test_request_validation():
    with pytest.raises(DomainError):
        NullingRequest(6, 5)  # threshold without epsilon
    with pytest.raises(DomainError):
        NullingRequest(6, 5, -5, algorithm="magic")
    with pytest.raises(DomainError):
        NullingRequest(6, 5, algorithm="hpbw", hpbw_logic="xor")
    with pytest.raises(DomainError):
        NullingRequest(95, 5, -5)


def test_threshold_extremes(codebook44, stack_peak, caplog):
    full = threshold_select(codebook44, stack_peak, request(10.0))
    assert full.retained_fraction == 1.0
    with caplog.at_level(logging.WARNING, logger="gnbeirp"):
        empty = threshold_select(codebook44, stack_peak, request(-200.0))
    assert empty.empty and len(empty) == 0
    assert "retained no codewords" in caplog.text


@settings(max_examples=25, deadline=None)
@given(st.floats(-60.0, 0.0), st.floats(0.0, 20.0))
def test_threshold_sound_and_monotone(codebook44, stack_peak, eps, delta):
    values = stack_peak.values_at(*TARGET)
    lo = threshold_select(codebook44, stack_peak, request(eps))
    hi = threshold_select(codebook44, stack_peak, request(eps + delta))
    assert np.all(values[lo.retained] < eps)
    assert set(lo.retained) <= set(hi.retained)
    assert lo.indices == tuple(codebook44[i].indices for i in lo.retained)


def test_threshold_subset_median_not_above_full(codebook44, stack_peak):
    full = lower_median(stack_peak.values_at(*TARGET))
    for eps in (-5.0, -15.0, -17.0):
        sub = threshold_select(codebook44, stack_peak, request(eps))
        assert subset_median_at(stack_peak, sub, *TARGET) <= full


def test_hpbw_far_target_keeps_everything(codebook44, stack_peak):
    sub = hpbw_select(codebook44, stack_peak, request(algorithm="hpbw", target=(-80.0, 170.0)))
    assert sub.retained_fraction == 1.0


def _brute_force_box(db, theta_axis, phi_axis, target):
    """Loop-based peak, -3 dB widths and box test for one pattern."""
    top = db.max()
    best = None
    for i, j in np.argwhere(db >= top - 1e-9):
        key = (abs(theta_axis[i]), abs(phi_axis[j]), theta_axis[i], phi_axis[j])
        if best is None or key < best[0]:
            best = (key, i, j)
    _, i, j = best

    def width(cut, axis, p):
        thr = cut[p] - 3.0
        a = p
        while a > 0 and cut[a] >= thr:
            a -= 1
        b = p
        while b < len(cut) - 1 and cut[b] >= thr:
            b += 1
        if cut[a] >= thr or cut[b] >= thr:
            return None
        left = axis[a] + (thr - cut[a]) * (axis[a + 1] - axis[a]) / (cut[a + 1] - cut[a])
        right = axis[b - 1] + (thr - cut[b - 1]) * (axis[b] - axis[b - 1]) / (cut[b] - cut[b - 1])
        return right - left

    wt = width(db[:, j], theta_axis, i)
    wp = width(db[i, :], phi_axis, j)
    if wt is None or wp is None:
        return None
    d_phi = (target[1] - phi_axis[j] + 180.0) % 360.0 - 180.0
    return abs(target[0] - theta_axis[i]) <= wt / 2, abs(d_phi) <= wp / 2


@pytest.mark.slow
def test_hpbw_predicate_matches_brute_force(codebook44, stack_peak):
    and_sub = hpbw_select(codebook44, stack_peak, request(algorithm="hpbw"))
    or_sub = hpbw_select(codebook44, stack_peak, request(algorithm="hpbw", logic="or-exclude"))
    grid = stack_peak.grid
    keep_and, keep_or = [], []
    for c in range(len(codebook44)):
        box = _brute_force_box(stack_peak.db(c), grid.theta, grid.phi, TARGET)
        if box is None:
            keep_and.append(True)
            keep_or.append(True)
            continue
        in_t, in_p = box
        keep_and.append(not in_t and not in_p)
        keep_or.append(not (in_t and in_p))
    np.testing.assert_array_equal(and_sub.retained, np.flatnonzero(keep_and))
    np.testing.assert_array_equal(or_sub.retained, np.flatnonzero(keep_or))


def test_and_exclude_is_stricter(codebook44, stack_peak):
    a = select(codebook44, stack_peak, request(algorithm="hpbw"))
    o = select(codebook44, stack_peak, request(algorithm="hpbw", logic="or-exclude"))
    assert set(a.retained) <= set(o.retained)


def test_undefined_width_kept_and_flagged(codebook44):
    grid = AngularGrid.uniform((-10, 10), (-10, 10), 1.0)
    th, ph = grid.mesh()
    beam = RadiationPattern(grid, -0.5 * (th ** 2 + ph ** 2), "per-pattern-peak")
    flat = RadiationPattern(grid, np.zeros(grid.shape), "per-pattern-peak")
    cb = codebook44[:2]
    sub = hpbw_select(cb, [beam, flat], request(algorithm="hpbw", target=(0.0, 0.0)))
    np.testing.assert_array_equal(sub.retained, [1])
    assert sub.flagged == (1,)


def test_pattern_count_mismatch(codebook44, stack_peak):
    with pytest.raises(DomainError):
        threshold_select(codebook44[:10], stack_peak, request(-5.0))


def test_subset_median_singleton_and_empty(codebook44, stack_peak):
    values = stack_peak.values_at(*TARGET)
    assert subset_median_at(stack_peak, [17], *TARGET) == values[17]
    with pytest.raises(EmptySubsetError):
        subset_median_at(stack_peak, [], *TARGET)
