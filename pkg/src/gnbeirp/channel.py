"""
TDL-C MIMO fading and its frequency response on an OFDM subcarrier grid.

Taps are static within a drop (0 Hz Doppler). Antenna pairs fade
independently unless Kronecker correlation matrices are supplied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# TR 38.901 Table 7.7.2-3 (TDL-C): normalized delay, power in dB
_TDL_C = (
    (0.0, -4.4), (0.2099, -1.2), (0.2219, -3.5), (0.2329, -5.2),
    (0.2176, -2.5), (0.6366, 0.0), (0.6448, -2.2), (0.6560, -3.9),
    (0.6584, -7.4), (0.7935, -7.1), (0.8213, -10.7), (0.9336, -11.1),
    (1.2285, -5.1), (1.3083, -6.8), (2.1704, -8.7), (2.7105, -13.2),
    (4.2589, -13.9), (4.6003, -13.9), (5.4902, -15.8), (5.6077, -17.1),
    (6.3065, -16.0), (6.6374, -15.7), (7.0427, -21.6), (8.6523, -22.8),
)


@dataclass(frozen=True, eq=False)
class TdlProfile:
    normalized_delays: np.ndarray
    tap_powers_db: np.ndarray
    delay_spread_s: float

    @property
    def delays_s(self) -> np.ndarray:
        return self.normalized_delays * self.delay_spread_s

    @property
    def powers(self) -> np.ndarray:
        """Linear tap powers, normalised to unit sum."""
        p = 10.0 ** (self.tap_powers_db / 10.0)
        return p / p.sum()


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Tap matrices ``taps[n_taps, n_rx, n_tx]`` at ``delays_s``."""

    taps: np.ndarray
    delays_s: np.ndarray


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    """``h[n_subcarriers, n_rx, n_tx]`` sampled at ``frequencies_hz`` (band-centre relative)."""

    h: np.ndarray
    subcarrier_spacing_hz: float
    n_subcarriers: int

    @property
    def frequencies_hz(self) -> np.ndarray:
        return subcarrier_frequencies(self.n_subcarriers, self.subcarrier_spacing_hz)


def tdl_c_profile(delay_spread_s: float = 300e-9) -> TdlProfile:
    """TDL-C profile scaled to ``delay_spread_s``, taps sorted by delay."""
    if not delay_spread_s > 0:
        raise DomainError("delay spread must be positive")
    table = np.array(sorted(_TDL_C, key=lambda t: t[0]))
    p = 10.0 ** (table[:, 1] / 10.0)
    powers_db = 10.0 * np.log10(p / p.sum())
    return TdlProfile(table[:, 0], powers_db, float(delay_spread_s))


def flat_profile() -> TdlProfile:
    """Single unit-power tap at zero delay."""
    return TdlProfile(np.zeros(1), np.zeros(1), 1.0)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def crandn(rng, shape):
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def realize(profile: TdlProfile, n_rx: int, n_tx: int, rng_seed=None,
            rx_corr=None, tx_corr=None) -> ChannelRealization:
    """Draw one static channel realization.

    ``rng_seed`` is an int, SeedSequence or Generator. Optional
    ``rx_corr``/``tx_corr`` apply Kronecker spatial correlation
    R_rx^(1/2) G R_tx^(1/2) to every tap.
    """
    if n_rx < 1 or n_tx < 1:
        raise DomainError("antenna counts must be positive")
    rng = _rng(rng_seed)
    g = crandn(rng, (len(profile.powers), n_rx, n_tx))
    if rx_corr is not None:
        g = np.linalg.cholesky(np.asarray(rx_corr)) @ g
    if tx_corr is not None:
        g = g @ np.linalg.cholesky(np.asarray(tx_corr)).conj().T
    taps = np.sqrt(profile.powers)[:, None, None] * g
    return ChannelRealization(taps, profile.delays_s.copy())


def subcarrier_frequencies(n_subcarriers: int, subcarrier_spacing_hz: float) -> np.ndarray:
    return (np.arange(n_subcarriers) - (n_subcarriers - 1) / 2.0) * subcarrier_spacing_hz


def freq_response(realization: ChannelRealization, n_subcarriers: int,
                  subcarrier_spacing_hz: float) -> FrequencyResponse:
    """H(f_k) = sum_taps A_tap exp(-j 2 pi f_k tau_tap)."""
    if n_subcarriers < 1 or not subcarrier_spacing_hz > 0:
        raise DomainError("need a positive subcarrier count and spacing")
    f = subcarrier_frequencies(n_subcarriers, subcarrier_spacing_hz)
    phase = np.exp(-2j * np.pi * np.outer(f, realization.delays_s))
    n_taps, n_rx, n_tx = realization.taps.shape
    h = (phase @ realization.taps.reshape(n_taps, -1)).reshape(n_subcarriers, n_rx, n_tx)
    return FrequencyResponse(h, float(subcarrier_spacing_hz), int(n_subcarriers))
