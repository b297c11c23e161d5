"""
Monte-Carlo single-user MIMO downlink, y = H W s + n per subcarrier.

Each drop draws one static channel, obtains CSI (perfect, or least squares
from one pilot occasion per transmit port), picks a wideband precoder,
sends uncoded Gray-mapped QAM on every subcarrier, applies MMSE
equalization and counts hard-decision bit errors. Per-drop random streams
are derived from ``(seed, drop, ...)`` so results do not depend on the
order or parallelism in which drops run, and every policy simulated in
one call sees the same channels, bits and noise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .codebook import as_array
from .errors import ConfigError, DomainError, RankDeficientError

MODULATIONS = {"16QAM": 16, "64QAM": 64, "256QAM": 256}
POLICIES = ("svd", "pmi-full", "pmi-subset")
CSI_MODES = ("perfect", "estimated")


# -- modulation ------------------------------------------------------------

def _bits_per_symbol(order: int) -> int:
    q = int(round(np.log2(order)))
    if order < 4 or 2 ** q != order or q % 2:
        raise DomainError(f"unsupported QAM order {order}")
    return q


def _axis_amplitude(axis_bits: np.ndarray) -> np.ndarray:
    """Gray PAM amplitude from one axis' bits (b0, b2, ... or b1, b3, ...)."""
    s = 1 - 2 * axis_bits.astype(int)
    k = s.shape[-1]
    r = np.ones(s.shape[:-1], dtype=int)
    for j in range(k - 1, 0, -1):
        r = 2 ** (k - j) - s[..., j] * r
    return s[..., 0] * r


def _qam_scale(order: int) -> float:
    return np.sqrt(2.0 * (order - 1) / 3.0)


def qam_map(bits, order: int) -> np.ndarray:
    """Gray-mapped square QAM with unit average symbol energy."""
    q = _bits_per_symbol(order)
    bits = np.asarray(bits)
    if bits.size % q:
        raise DomainError(f"bit count {bits.size} not divisible by {q}")
    b = bits.reshape(-1, q)
    i = _axis_amplitude(b[:, 0::2])
    qd = _axis_amplitude(b[:, 1::2])
    return (i + 1j * qd) / _qam_scale(order)


def _axis_table(k: int):
    patterns = (np.arange(2 ** k)[:, None] >> np.arange(k - 1, -1, -1)) & 1
    amp = _axis_amplitude(patterns)
    table = np.empty((2 ** k, k), dtype=np.uint8)
    table[(amp + 2 ** k - 1) // 2] = patterns
    return table


def qam_demap(symbols, order: int, noise_var=None) -> np.ndarray:
    """Hard-decision inverse of :func:`qam_map`; ``noise_var`` is unused."""
    q = _bits_per_symbol(order)
    k = q // 2
    levels = 2 ** k
    table = _axis_table(k)
    x = np.ravel(symbols) * _qam_scale(order)

    def nearest(v):
        return np.clip(np.round((v + levels - 1) / 2.0), 0, levels - 1).astype(int)

    out = np.empty((x.size, q), dtype=np.uint8)
    out[:, 0::2] = table[nearest(x.real)]
    out[:, 1::2] = table[nearest(x.imag)]
    return out.ravel()


# -- precoding and detection ----------------------------------------------

def svd_precoder(h_wideband, n_layers: int) -> np.ndarray:
    """Equal-power wideband eigen-precoder with unit Frobenius norm.

    Uses the dominant eigenvectors of the subcarrier-averaged Gram matrix
    mean_k H_k^H H_k. ``h_wideband`` is (rx, tx) or (subcarriers, rx, tx).
    """
    h = np.asarray(h_wideband)
    if h.ndim == 2:
        h = h[None]
    gram = np.einsum("kri,krj->ij", h.conj(), h) / h.shape[0]
    vals, vecs = np.linalg.eigh(gram)
    if n_layers > len(vals) or vals[-n_layers] <= 1e-10 * max(vals[-1], 1e-300):
        raise RankDeficientError(f"channel rank below {n_layers}")
    v = vecs[:, ::-1][:, :n_layers]
    return v / np.sqrt(n_layers)


def _sum_rate_from_gram(gram, noise_var):
    """sum_l log2(1 + post-MMSE SINR_l) = -sum_l log2 [(I + G/s2)^-1]_ll."""
    n = gram.shape[-1]
    m = np.eye(n) + gram / noise_var
    if n == 1:
        return np.log2(m[..., 0, 0].real)
    if n == 2:
        a, d = m[..., 0, 0].real, m[..., 1, 1].real
        det = a * d - np.abs(m[..., 0, 1]) ** 2
        return 2 * np.log2(det) - np.log2(a) - np.log2(d)
    inv = np.linalg.inv(m)
    return -np.log2(np.einsum("...ll->...l", inv).real).sum(axis=-1)


def _effective_gram(h, w_stack):
    """(subcarriers, codewords, L, L) Gram matrices of H W for every codeword."""
    k, r, t = h.shape
    c, _, l = w_stack.shape
    heff = (h.reshape(k * r, t) @ w_stack.transpose(1, 0, 2).reshape(t, c * l))
    heff = heff.reshape(k, r, c, l)
    return np.einsum("krci,krcj->kcij", heff.conj(), heff)


def pmi_metric(h, candidates, noise_var: float) -> np.ndarray:
    """Subcarrier-averaged post-MMSE sum rate of every candidate precoder."""
    if not noise_var > 0:
        raise DomainError("noise variance must be positive")
    h = np.asarray(h)
    if h.ndim == 2:
        h = h[None]
    w = candidates if isinstance(candidates, np.ndarray) else as_array(candidates)
    return _sum_rate_from_gram(_effective_gram(h, w), noise_var).mean(axis=0)


def pmi_select(h_estimate, candidates, noise_var: float):
    """Candidate maximising :func:`pmi_metric`; ties go to the earliest."""
    candidates = list(candidates)
    if not candidates:
        raise DomainError("empty candidate set")
    return candidates[int(np.argmax(pmi_metric(h_estimate, candidates, noise_var)))]


def mmse_equalize(y, h_effective, noise_var: float, unbiased: bool = False):
    """Linear MMSE estimate (H^H H + s2 I)^-1 H^H y.

    ``h_effective`` is (..., rx, L) and ``y`` is (..., rx) or (..., rx, S).
    With ``unbiased`` each layer is divided by its MMSE gain so the
    constellation is not shrunk before hard decisions.
    """
    h = np.asarray(h_effective)
    y = np.asarray(y)
    vector = y.ndim == h.ndim - 1
    if vector:
        y = y[..., None]
    hh = np.conj(np.swapaxes(h, -1, -2))
    g = hh @ h + noise_var * np.eye(h.shape[-1])
    a = np.linalg.solve(g, hh)
    s = a @ y
    if unbiased:
        gain = np.einsum("...ll->...l", a @ h).real
        s = s / gain[..., None]
    return s[..., 0] if vector else s


# -- channel estimation ----------------------------------------------------

def pilot_positions(n_subcarriers: int, spacing: int) -> np.ndarray:
    if spacing < 1 or spacing > n_subcarriers:
        raise DomainError(f"pilot spacing {spacing} outside [1, {n_subcarriers}]")
    return np.arange(0, n_subcarriers, spacing)


def _interp_weights(positions, n_subcarriers):
    k = np.arange(n_subcarriers)
    if len(positions) == 1:
        z = np.zeros(n_subcarriers, dtype=int)
        return z, z, np.zeros(n_subcarriers)
    i = np.clip(np.searchsorted(positions, k, side="right") - 1, 0, len(positions) - 2)
    w = (k - positions[i]) / (positions[i + 1] - positions[i])
    return i, i + 1, np.clip(w, 0.0, 1.0)


def ls_estimate(y_pilots, pilot_symbols, pilot_positions, n_subcarriers: int) -> np.ndarray:
    """Least-squares channel estimate interpolated onto every subcarrier.

    ``y_pilots[n_pilots, rx, tx]`` holds, in column ``t``, what was received
    during transmit port ``t``'s pilot occasion; ``pilot_symbols[n_pilots,
    tx]`` are the known pilots. Between pilots the estimate is linearly
    interpolated, beyond the outermost pilots it is held constant.
    """
    pos = np.asarray(pilot_positions)
    if pos.size == 0 or pos.min() < 0 or pos.max() >= n_subcarriers or np.any(np.diff(pos) <= 0):
        raise DomainError("pilot positions must be increasing and inside the grid")
    x = np.asarray(pilot_symbols)
    est = np.asarray(y_pilots) * (x.conj() / np.abs(x) ** 2)[:, None, :]
    lo, hi, w = _interp_weights(pos, n_subcarriers)
    return (1 - w)[:, None, None] * est[lo] + w[:, None, None] * est[hi]


# -- simulation ------------------------------------------------------------

@dataclass(frozen=True)
class ChannelConfig:
    model: str = "tdl-c"
    delay_spread_ns: float = 300.0
    doppler_hz: float = 0.0
    correlation: str = "none"

    def __post_init__(self):
        if self.model not in ("tdl-c", "awgn"):
            raise ConfigError(f"unknown channel model {self.model!r}")
        if self.doppler_hz != 0:
            raise ConfigError("only static channels (doppler_hz = 0) are supported")
        if self.correlation != "none":
            raise ConfigError("only correlation = 'none' is supported")
        if not self.delay_spread_ns > 0:
            raise ConfigError("delay_spread_ns must be positive")


@dataclass(frozen=True)
class LinkConfig:
    modulation: str = "16QAM"
    n_layers: int = 2
    n_tx: int = 32
    n_rx: int = 4
    snr_db_grid: tuple = (-10.0, -8.0, -6.0, -4.0, -2.0, 0.0)
    n_drops: int = 1000
    precoder_policy: str = "pmi-full"
    csi: str = "perfect"
    pilot_spacing: int = 4
    seed: int = 0
    n_subcarriers: int = 624
    subcarrier_spacing_hz: float = 30e3
    symbols_per_drop: int = 14
    pmi_subcarrier_step: int = 12

    def __post_init__(self):
        if self.modulation not in MODULATIONS:
            raise ConfigError(f"unknown modulation {self.modulation!r}")
        if self.precoder_policy not in POLICIES:
            raise ConfigError(f"unknown precoder policy {self.precoder_policy!r}")
        if self.csi not in CSI_MODES:
            raise ConfigError(f"unknown csi mode {self.csi!r}")
        if not 1 <= self.n_layers <= min(self.n_tx, self.n_rx):
            raise ConfigError("n_layers must lie in [1, min(n_tx, n_rx)]")
        if self.n_drops < 1:
            raise ConfigError("n_drops must be positive")
        if not 1 <= self.pilot_spacing <= self.n_subcarriers:
            raise ConfigError("pilot_spacing must lie in [1, n_subcarriers]")
        if self.symbols_per_drop < 1 or self.pmi_subcarrier_step < 1:
            raise ConfigError("symbols_per_drop and pmi_subcarrier_step must be positive")
        object.__setattr__(self, "snr_db_grid", tuple(float(s) for s in self.snr_db_grid))

    @property
    def order(self) -> int:
        return MODULATIONS[self.modulation]


@dataclass(frozen=True, eq=False)
class BerPoint:
    """Bit-error statistics at one SNR.

    ``std_err`` is the standard error of ``ber`` from the spread of per-drop
    error rates; ``drop_errors`` keeps those per-drop counts.
    """

    snr_db: float
    bit_errors: int
    bits_total: int
    drop_errors: np.ndarray = field(repr=False)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total

    @property
    def std_err(self) -> float:
        n = len(self.drop_errors)
        per_drop = self.drop_errors / (self.bits_total / n)
        if n < 2:
            return float("nan")
        return float(np.std(per_drop, ddof=1) / np.sqrt(n))


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _channel_response(link, channel_cfg, rng):
    if channel_cfg.model == "awgn":
        if link.n_rx != link.n_tx:
            raise ConfigError("awgn channel needs n_rx == n_tx")
        return np.broadcast_to(np.eye(link.n_rx, dtype=complex),
                               (link.n_subcarriers, link.n_rx, link.n_tx))
    profile = ch.tdl_c_profile(channel_cfg.delay_spread_ns * 1e-9)
    real = ch.realize(profile, link.n_rx, link.n_tx, rng)
    return ch.freq_response(real, link.n_subcarriers, link.subcarrier_spacing_hz).h


def _estimate(link, h, noise_var, rng):
    pos = pilot_positions(link.n_subcarriers, link.pilot_spacing)
    x = np.exp(2j * np.pi * rng.integers(0, 4, (len(pos), link.n_tx)) / 4)
    noise = np.sqrt(noise_var) * ch.crandn(rng, (len(pos), link.n_rx, link.n_tx))
    y = h[pos] * x[:, None, :] + noise
    return ls_estimate(y, x, pos, link.n_subcarriers)


class _Chooser:
    """Wideband precoder choice for one CSI snapshot, shared across policies."""

    def __init__(self, link, h_csi, w_full, subset_idx):
        self.link = link
        self.h = h_csi
        self.w_full = w_full
        self.subset_idx = subset_idx
        self._gram = None

    def gram(self):
        if self._gram is None:
            self._gram = _effective_gram(self.h[::self.link.pmi_subcarrier_step], self.w_full)
        return self._gram

    def choose(self, policy, noise_var):
        if policy == "svd":
            return svd_precoder(self.h, self.link.n_layers)
        rate = _sum_rate_from_gram(self.gram(), noise_var).mean(axis=0)
        if policy == "pmi-full":
            return self.w_full[int(np.argmax(rate))]
        return self.w_full[self.subset_idx[int(np.argmax(rate[self.subset_idx]))]]


def _drop(link, channel_cfg, policies, w_full, subset_idx, d):
    q = _bits_per_symbol(link.order)
    h = _channel_response(link, channel_cfg, _stream(link.seed, d, 0))
    errors = np.zeros((len(link.snr_db_grid), len(policies)), dtype=np.int64)
    perfect = _Chooser(link, h, w_full, subset_idx) if link.csi == "perfect" else None
    for s, snr in enumerate(link.snr_db_grid):
        noise_var = 10.0 ** (-snr / 10.0)
        rng = _stream(link.seed, d, 1, s)
        n_bits = link.n_subcarriers * link.n_layers * link.symbols_per_drop * q
        bits = rng.integers(0, 2, n_bits, dtype=np.uint8)
        sym = qam_map(bits, link.order).reshape(link.n_subcarriers, link.n_layers,
                                                link.symbols_per_drop)
        noise = np.sqrt(noise_var) * ch.crandn(
            rng, (link.n_subcarriers, link.n_rx, link.symbols_per_drop))
        if perfect is not None:
            chooser, h_csi = perfect, h
        else:
            h_csi = _estimate(link, h, noise_var, rng)
            chooser = _Chooser(link, h_csi, w_full, subset_idx)
        for p, policy in enumerate(policies):
            w = chooser.choose(policy, noise_var)
            y = (h @ w) @ sym + noise
            est = mmse_equalize(y, h_csi @ w, noise_var, unbiased=True)
            rx_bits = qam_demap(est, link.order)
            errors[s, p] = np.count_nonzero(rx_bits != bits)
    return errors


def simulate(link: LinkConfig, channel_cfg: ChannelConfig, codebook=None, subset=None,
             policies=None, workers: int = 1) -> dict:
    """Run several precoder policies over identical drops.

    Returns ``{policy: [BerPoint, ...]}``. ``subset`` (a PmSubset or index
    list into ``codebook``) is required for ``pmi-subset``.
    """
    policies = tuple(policies or (link.precoder_policy,))
    for p in policies:
        if p not in POLICIES:
            raise ConfigError(f"unknown precoder policy {p!r}")
    w_full = subset_idx = None
    if any(p.startswith("pmi") for p in policies):
        if codebook is None:
            raise ConfigError("PMI policies need a codebook")
        w_full = as_array(codebook)
        if w_full.shape[1] != link.n_tx or w_full.shape[2] != link.n_layers:
            raise ConfigError(f"codebook shape {w_full.shape[1:]} does not match "
                              f"n_tx={link.n_tx}, n_layers={link.n_layers}")
    if "pmi-subset" in policies:
        if subset is None:
            raise ConfigError("pmi-subset policy needs a codeword subset")
        subset_idx = np.asarray(getattr(subset, "retained", subset), dtype=int)
        if subset_idx.size == 0:
            raise ConfigError("pmi-subset policy given an empty subset")

    def work(d):
        return _drop(link, channel_cfg, policies, w_full, subset_idx, d)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            per_drop = list(ex.map(work, range(link.n_drops)))
    else:
        per_drop = [work(d) for d in range(link.n_drops)]
    per_drop = np.stack(per_drop)  # (drops, snr, policy)

    q = _bits_per_symbol(link.order)
    bits_per_drop = link.n_subcarriers * link.n_layers * link.symbols_per_drop * q
    out = {}
    for p, policy in enumerate(policies):
        out[policy] = [BerPoint(snr, int(per_drop[:, s, p].sum()), bits_per_drop * link.n_drops,
                                per_drop[:, s, p].copy())
                       for s, snr in enumerate(link.snr_db_grid)]
    return out


def run_ber(link_config: LinkConfig, channel_config: ChannelConfig, codebook=None,
            subset=None, workers: int = 1) -> list:
    """BER curve of ``link_config.precoder_policy``."""
    return simulate(link_config, channel_config, codebook, subset, workers=workers)[
        link_config.precoder_policy]
