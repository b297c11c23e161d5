"""
Codebook subset selection that limits radiation toward a protected direction.

Two selections are provided: a threshold on the EIRP at the protected
direction, and exclusion of codewords whose half-power box around their
peak covers that direction. Both leave the codebook itself untouched, so
the retained precoders remain standard-compliant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptySubsetError, UndefinedWidthError
from .radiation import PatternStack, find_peak, hpbw_of
from .statistics import codeword_values_at, lower_median

logger = logging.getLogger(__name__)

ALGORITHMS = ("threshold", "hpbw")
HPBW_LOGICS = ("and-exclude", "or-exclude")


@dataclass(frozen=True)
class NullingRequest:
    theta_i: float
    phi_i: float
    epsilon_db: float | None = None
    algorithm: str = "threshold"
    hpbw_logic: str = "and-exclude"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise DomainError(f"unknown algorithm {self.algorithm!r}")
        if self.hpbw_logic not in HPBW_LOGICS:
            raise DomainError(f"unknown hpbw_logic {self.hpbw_logic!r}")
        if self.algorithm == "threshold" and self.epsilon_db is None:
            raise DomainError("threshold selection needs epsilon_db")
        if abs(self.theta_i) > 90 or abs(self.phi_i) > 180:
            raise DomainError("protected direction outside the angular domain")


@dataclass(frozen=True, eq=False)
class PmSubset:
    """Codebook positions kept by a selection, in codebook order.

    ``flagged`` lists codewords kept because their half-power width was
    undefined (HPBW selection only).
    """

    retained: np.ndarray
    indices: tuple
    n_total: int
    request: NullingRequest
    flagged: tuple = ()

    @property
    def retained_fraction(self) -> float:
        return len(self.retained) / self.n_total if self.n_total else 0.0

    @property
    def empty(self) -> bool:
        return len(self.retained) == 0

    def __len__(self):
        return len(self.retained)


def _check_inputs(codebook, patterns, request):
    if isinstance(patterns, PatternStack):
        grid = patterns.grid
    else:
        patterns = list(patterns)
        grid = patterns[0].grid
    if len(patterns) != len(codebook):
        raise DomainError(f"{len(patterns)} patterns for {len(codebook)} codewords")
    if not grid.contains(request.theta_i, request.phi_i):
        raise DomainError("protected direction outside the pattern grid")
    return patterns


def _subset(codebook, keep, request, flagged=()):
    retained = np.flatnonzero(keep)
    subset = PmSubset(retained, tuple(codebook[i].indices for i in retained),
                      len(codebook), request, tuple(flagged))
    if subset.empty:
        logger.warning("nulling toward (%g, %g) retained no codewords",
                       request.theta_i, request.phi_i)
    return subset


def threshold_select(codebook, patterns, request: NullingRequest) -> PmSubset:
    """Keep codewords whose EIRP at the protected direction is below epsilon."""
    patterns = _check_inputs(codebook, patterns, request)
    values = codeword_values_at(patterns, request.theta_i, request.phi_i)
    return _subset(codebook, values < request.epsilon_db, request)


def _wrap(deg):
    return (np.asarray(deg) + 180.0) % 360.0 - 180.0


def hpbw_boxes(patterns):
    """Peaks and half-power widths, ``(peaks[n, 2], widths[n, 2])``; NaN widths if undefined."""
    if isinstance(patterns, PatternStack):
        return patterns.peaks_and_widths()
    peaks, widths = [], []
    for p in patterns:
        pk = find_peak(p)
        peaks.append(pk)
        try:
            widths.append(hpbw_of(p, pk))
        except UndefinedWidthError:
            widths.append((np.nan, np.nan))
    return np.array(peaks), np.array(widths)


def hpbw_select(codebook, patterns, request: NullingRequest) -> PmSubset:
    """Drop codewords whose half-power box around the peak covers the target.

    With ``and-exclude`` a codeword is kept only if the target lies outside
    the box's elevation span and outside its azimuth span. ``or-exclude``
    keeps it when the target is outside the box in at least one axis.
    """
    patterns = _check_inputs(codebook, patterns, request)
    peaks, widths = hpbw_boxes(patterns)
    undefined = np.isnan(widths).any(axis=1)
    in_theta = np.abs(request.theta_i - peaks[:, 0]) <= widths[:, 0] / 2
    in_phi = np.abs(_wrap(request.phi_i - peaks[:, 1])) <= widths[:, 1] / 2
    if request.hpbw_logic == "and-exclude":
        keep = ~in_theta & ~in_phi
    else:
        keep = ~(in_theta & in_phi)
    keep |= undefined
    return _subset(codebook, keep, request, np.flatnonzero(undefined))


def select(codebook, patterns, request: NullingRequest) -> PmSubset:
    if request.algorithm == "threshold":
        return threshold_select(codebook, patterns, request)
    return hpbw_select(codebook, patterns, request)


def subset_median_at(patterns, subset, theta_i: float, phi_i: float) -> float:
    """Lower median of the retained codewords' EIRP at (theta_i, phi_i)."""
    sel = np.asarray(getattr(subset, "retained", subset), dtype=int)
    if sel.size == 0:
        raise EmptySubsetError("median over an empty subset")
    values = codeword_values_at(patterns, theta_i, phi_i)
    return lower_median(values[sel])
