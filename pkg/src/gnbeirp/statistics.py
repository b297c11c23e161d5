"""Empirical CDFs and medians of codeword EIRP at a direction or along a cut."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySubsetError
from .radiation import PatternStack, eirp_at


def lower_median(values) -> float:
    """Median taking the lower central order statistic for even counts."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise EmptySubsetError("median of an empty set")
    return float(v[(v.size - 1) // 2])


def codeword_values_at(patterns, theta: float, phi: float) -> np.ndarray:
    """EIRP of every pattern at (theta, phi); accepts a PatternStack or a list."""
    if isinstance(patterns, PatternStack):
        return patterns.values_at(theta, phi)
    return np.array([eirp_at(p, theta, phi) for p in patterns])


def subset_positions(subset, n: int) -> np.ndarray:
    """Codebook positions selected by ``subset`` (PmSubset, index list, or None for all)."""
    if subset is None:
        return np.arange(n)
    return np.asarray(getattr(subset, "retained", subset), dtype=int)


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Right-continuous step CDF; ``probabilities[k]`` = P(X <= sorted_values[k])."""

    sorted_values: np.ndarray
    probabilities: np.ndarray

    @classmethod
    def from_samples(cls, values) -> "EmpiricalCdf":
        v = np.sort(np.asarray(values, dtype=float))
        if v.size == 0:
            raise EmptySubsetError("CDF of an empty set")
        uniq = np.unique(v)
        prob = np.searchsorted(v, uniq, side="right") / v.size
        return cls(uniq, prob)

    def __call__(self, x):
        k = np.searchsorted(self.sorted_values, x, side="right")
        return np.where(k == 0, 0.0, self.probabilities[np.maximum(k - 1, 0)])

    def percentile(self, p: float) -> float:
        """Smallest sample value v with F(v) >= p."""
        if not 0.0 < p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        k = int(np.searchsorted(self.probabilities, p - 1e-12, side="left"))
        return float(self.sorted_values[k])


def cdf_at_direction(patterns, subset, theta_i: float, phi_i: float) -> EmpiricalCdf:
    values = codeword_values_at(patterns, theta_i, phi_i)
    sel = subset_positions(subset, len(values))
    if sel.size == 0:
        raise EmptySubsetError("CDF over an empty subset")
    return EmpiricalCdf.from_samples(values[sel])


def median_cut(patterns, subset, *, phi=None, theta=None):
    """Per-angle lower median over the subset along a principal cut.

    ``phi=`` fixes the azimuth and walks elevation; ``theta=`` the reverse.
    Returns ``(angles, medians)``.
    """
    if isinstance(patterns, PatternStack):
        angles, values = patterns.cut(theta=theta, phi=phi)
    else:
        patterns = list(patterns)
        grid = patterns[0].grid
        if (theta is None) == (phi is None):
            raise ValueError("give exactly one of theta= or phi=")
        if phi is not None:
            j = grid.phi_index(phi)
            angles, values = grid.theta, np.array([p.eirp_db[:, j] for p in patterns])
        else:
            i = grid.theta_index(theta)
            angles, values = grid.phi, np.array([p.eirp_db[i, :] for p in patterns])
    sel = subset_positions(subset, len(values))
    if sel.size == 0:
        raise EmptySubsetError("median cut over an empty subset")
    v = np.sort(values[sel], axis=0)
    return np.asarray(angles), v[(sel.size - 1) // 2]
