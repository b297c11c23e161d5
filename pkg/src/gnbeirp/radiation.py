"""
EIRP pattern synthesis on a regular (elevation, azimuth) grid.

Radiated power adds over polarizations and over layers, so the co-phasing
term of a codeword never changes its pattern. :class:`PatternStack` uses
this to hold a whole codebook as a small set of per-column beam patterns.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridMismatchError, UndefinedWidthError
from .geometry import ElementLayout, ElementPattern, to_panel_frame

FLOOR_DB = -100.0
REFERENCES = ("global-max", "per-pattern-peak", "absolute-dbm")
_TIE_DB = 1e-9
_DIR_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class AngularGrid:
    """Uniform sampling of elevation ``theta`` and azimuth ``phi`` in degrees."""

    theta: np.ndarray
    phi: np.ndarray
    resolution: float

    @classmethod
    def uniform(cls, theta_range=(-90.0, 90.0), phi_range=(-180.0, 180.0), resolution=1.0):
        def axis(lo, hi):
            if hi < lo:
                raise DomainError("grid range upper bound below lower bound")
            n = (hi - lo) / resolution
            if abs(n - round(n)) > 1e-6:
                raise DomainError(f"range [{lo}, {hi}] is not a multiple of {resolution}")
            return np.round(np.linspace(lo, hi, int(round(n)) + 1), 10) + 0.0

        if not resolution > 0:
            raise DomainError("grid resolution must be positive")
        if theta_range[0] < -90 or theta_range[1] > 90:
            raise DomainError("elevation range must lie within [-90, 90]")
        if phi_range[0] < -180 or phi_range[1] > 180:
            raise DomainError("azimuth range must lie within [-180, 180]")
        return cls(axis(*theta_range), axis(*phi_range), float(resolution))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.theta), len(self.phi)

    @property
    def size(self) -> int:
        return len(self.theta) * len(self.phi)

    def mesh(self):
        """(theta, phi) arrays of shape ``self.shape``."""
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    def same_as(self, other: "AngularGrid") -> bool:
        return (self is other) or (
            self.shape == other.shape
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.phi, other.phi))

    def contains(self, theta, phi) -> bool:
        return (self.theta[0] <= theta <= self.theta[-1]
                and self.phi[0] <= phi <= self.phi[-1])

    def theta_index(self, theta) -> int:
        return _on_axis(self.theta, theta, "elevation")

    def phi_index(self, phi) -> int:
        return _on_axis(self.phi, phi, "azimuth")


def _on_axis(axis, value, name):
    i = int(np.argmin(np.abs(axis - value)))
    if abs(axis[i] - value) > 1e-9:
        raise DomainError(f"{name} {value} is not a grid sample")
    return i


@dataclass(frozen=True, eq=False)
class RadiationPattern:
    """EIRP in dB on ``grid``; ``eirp_db`` has shape ``grid.shape``."""

    grid: AngularGrid
    eirp_db: np.ndarray
    reference: str = "per-pattern-peak"

    def linear(self) -> np.ndarray:
        return 10.0 ** (self.eirp_db / 10.0)


@dataclass(frozen=True)
class SsbBeam:
    """SSB beam steered to (theta, phi) from the given panel columns."""

    steer_theta_deg: float
    steer_phi_deg: float
    columns: tuple[int, ...] = (0,)

    def __post_init__(self):
        if abs(self.steer_theta_deg) > 90 or abs(self.steer_phi_deg) > 180:
            raise DomainError("SSB steering angles outside the angular domain")


SSB_PRESETS = {
    "ssb-332": (
        (6.0, -60.0), (6.0, 0.5), (6.0, 60.5),
        (0.0, -60.0), (0.0, 0.5), (0.0, 60.5),
        (-3.0, -45.0), (-3.0, 45.0),
    ),
}


def ssb_preset(name_or_angles) -> list[SsbBeam]:
    """Named preset (``"ssb-332"``) or an explicit list of (theta, phi) pairs."""
    if isinstance(name_or_angles, str):
        try:
            angles = SSB_PRESETS[name_or_angles]
        except KeyError:
            raise DomainError(f"unknown SSB preset {name_or_angles!r}") from None
    else:
        angles = name_or_angles
    return [SsbBeam(float(t), float(p)) for t, p in angles]


# -- field synthesis -------------------------------------------------------

def _element_amplitude(element: ElementPattern, theta_l, phi_l):
    return 10.0 ** (element.gain_db(theta_l, phi_l) / 20.0)


def _element_fields(layout, element, theta, phi):
    """amplitude * exp(-j k r.u) for every (direction, element)."""
    u, theta_l, phi_l = to_panel_frame(theta, phi, layout.config.downtilt_deg)
    k = 2.0 * np.pi / layout.config.wavelength
    amp = _element_amplitude(element, theta_l, phi_l)
    return amp[:, None] * np.exp(-1j * k * (u @ layout.positions.T))


def _port_map(layout: ElementLayout) -> np.ndarray:
    """(elements, ports) matrix with uniform in-phase subarray weights."""
    counts = np.bincount(layout.port)
    s = np.zeros((len(layout), layout.n_ports))
    s[np.arange(len(layout)), layout.port] = 1.0 / np.sqrt(counts[layout.port])
    return s


def _port_polarization(layout: ElementLayout) -> np.ndarray:
    pol = np.zeros(layout.n_ports, dtype=int)
    pol[layout.port] = layout.polarization_index
    return pol


def port_response(layout: ElementLayout, theta, phi, element: ElementPattern | None = None):
    """Far-field response of each antenna port, shape (directions, ports).

    ``theta``/``phi`` are flat arrays of equal length (degrees).
    """
    element = element or layout.config.element
    fields = _element_fields(layout, element, np.ravel(theta), np.ravel(phi))
    return fields @ _port_map(layout)


def _power(resp, w, port_pol):
    """sum over polarizations and layers of |resp_pol @ w_pol|^2."""
    total = np.zeros(resp.shape[0])
    for p in np.unique(port_pol):
        sel = port_pol == p
        f = resp[:, sel] @ w[sel]
        total += np.sum(f.real ** 2 + f.imag ** 2, axis=-1)
    return total


def _to_db(raw, offset_db):
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(raw) - offset_db
    return np.maximum(db, FLOOR_DB)


def _normalize(raw, reference, tx_power_dbm):
    if reference == "absolute-dbm":
        return _to_db(raw, -tx_power_dbm)
    if reference in ("per-pattern-peak", "global-max"):
        return _to_db(raw, 10.0 * np.log10(raw.max()))
    raise DomainError(f"unknown reference {reference!r}; expected one of {REFERENCES}")


def _as_matrix(w):
    w = getattr(w, "w", w)
    w = np.asarray(w, dtype=complex)
    return w[:, None] if w.ndim == 1 else w


def pattern_for_pm(layout: ElementLayout, element_pattern: ElementPattern | None, w,
                   grid: AngularGrid, reference: str = "per-pattern-peak",
                   tx_power_dbm: float = 0.0) -> RadiationPattern:
    """EIRP pattern of precoder ``w`` (ports x layers or a PrecodingMatrix).

    With a single pattern ``global-max`` and ``per-pattern-peak`` coincide;
    ``absolute-dbm`` reports dBi for unit transmit power plus ``tx_power_dbm``.
    """
    w = _as_matrix(w)
    if w.shape[0] != layout.n_ports:
        raise DomainError(f"precoder has {w.shape[0]} ports, layout has {layout.n_ports}")
    th, ph = grid.mesh()
    th, ph = th.ravel(), ph.ravel()
    pol = _port_polarization(layout)
    raw = np.empty(grid.size)
    for s in range(0, grid.size, _DIR_CHUNK):
        resp = port_response(layout, th[s:s + _DIR_CHUNK], ph[s:s + _DIR_CHUNK], element_pattern)
        raw[s:s + _DIR_CHUNK] = _power(resp, w, pol)
    raw = raw.reshape(grid.shape)
    return RadiationPattern(grid, _normalize(raw, reference, tx_power_dbm), reference)


def ssb_pattern(layout: ElementLayout, element_pattern: ElementPattern | None, beam: SsbBeam,
                grid: AngularGrid, reference: str = "per-pattern-peak",
                tx_power_dbm: float = 0.0) -> RadiationPattern:
    """Pattern of an SSB beam formed by the elements of ``beam.columns``.

    Active elements get unit-power element-level steering weights toward
    the beam direction; both polarizations radiate.
    """
    element = element_pattern or layout.config.element
    active = np.isin(layout.subarray[:, 1], beam.columns)
    if not active.any():
        raise DomainError(f"no panel column among {beam.columns}")
    u, _, _ = to_panel_frame(beam.steer_theta_deg, beam.steer_phi_deg, layout.config.downtilt_deg)
    k = 2.0 * np.pi / layout.config.wavelength
    weights = np.where(active, np.exp(1j * k * (layout.positions @ u)), 0.0)
    weights /= np.sqrt(active.sum())
    pol = layout.polarization_index

    th, ph = grid.mesh()
    th, ph = th.ravel(), ph.ravel()
    raw = np.empty(grid.size)
    for s in range(0, grid.size, _DIR_CHUNK):
        f = _element_fields(layout, element, th[s:s + _DIR_CHUNK], ph[s:s + _DIR_CHUNK])
        raw[s:s + _DIR_CHUNK] = _power(f, weights[:, None], pol)
    raw = raw.reshape(grid.shape)
    return RadiationPattern(grid, _normalize(raw, reference, tx_power_dbm), reference)


# -- pattern queries -------------------------------------------------------

def _peak_index(db: np.ndarray, grid: AngularGrid) -> tuple[int, int]:
    top = db.max()
    cand = np.argwhere(db >= top - _TIE_DB)
    if len(cand) == 1:
        return int(cand[0, 0]), int(cand[0, 1])
    th = grid.theta[cand[:, 0]]
    ph = grid.phi[cand[:, 1]]
    best = np.lexsort((ph, th, np.abs(ph), np.abs(th)))[0]
    return int(cand[best, 0]), int(cand[best, 1])


def find_peak(pattern: RadiationPattern) -> tuple[float, float]:
    """Grid argmax (theta, phi); near-ties go to the sample closest to boresight."""
    i, j = _peak_index(pattern.eirp_db, pattern.grid)
    return float(pattern.grid.theta[i]), float(pattern.grid.phi[j])


def _half_power_width(axis, cut, ip):
    thr = cut[ip] - 3.0
    below = np.flatnonzero(cut < thr)
    left = below[below < ip]
    right = below[below > ip]
    if len(left) == 0 or len(right) == 0:
        raise UndefinedWidthError("no -3 dB crossing on one side of the peak")
    i, j = left[-1], right[0]
    x_left = axis[i] + (thr - cut[i]) / (cut[i + 1] - cut[i]) * (axis[i + 1] - axis[i])
    x_right = axis[j - 1] + (thr - cut[j - 1]) / (cut[j] - cut[j - 1]) * (axis[j] - axis[j - 1])
    return float(x_right - x_left)


def _hpbw_from_db(db, grid, i, j):
    return (_half_power_width(grid.theta, db[:, j], i),
            _half_power_width(grid.phi, db[i, :], j))


def hpbw_of(pattern: RadiationPattern, peak=None) -> tuple[float, float]:
    """(elevation, azimuth) -3 dB widths along the principal cuts through ``peak``.

    Crossings are linearly interpolated in dB between grid samples.

    Raises
    ------
    UndefinedWidthError
        If a cut does not drop 3 dB below the peak on both sides.
    """
    grid = pattern.grid
    if peak is None:
        i, j = _peak_index(pattern.eirp_db, grid)
    else:
        i, j = grid.theta_index(peak[0]), grid.phi_index(peak[1])
    return _hpbw_from_db(pattern.eirp_db, grid, i, j)


def _bilinear(grid: AngularGrid, theta: float, phi: float):
    if not grid.contains(theta, phi):
        raise DomainError(f"direction ({theta}, {phi}) outside the pattern grid")

    def locate(axis, x):
        if len(axis) == 1:
            return 0, 0, 0.0
        i = int(np.clip(np.searchsorted(axis, x, side="right") - 1, 0, len(axis) - 2))
        return i, i + 1, (x - axis[i]) / (axis[i + 1] - axis[i])

    i0, i1, wt = locate(grid.theta, theta)
    j0, j1, wp = locate(grid.phi, phi)
    nodes = ((i0, j0), (i0, j1), (i1, j0), (i1, j1))
    weights = ((1 - wt) * (1 - wp), (1 - wt) * wp, wt * (1 - wp), wt * wp)
    return nodes, weights


def _combine(values, weights):
    v00, v01, v10, v11 = values
    w00, w01, w10, w11 = weights
    return w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11


def eirp_at(pattern: RadiationPattern, theta_i: float, phi_i: float) -> float:
    """Bilinear interpolation of the dB pattern at (theta_i, phi_i)."""
    nodes, weights = _bilinear(pattern.grid, theta_i, phi_i)
    return float(_combine([pattern.eirp_db[n] for n in nodes], weights))


def average_pattern(patterns) -> RadiationPattern:
    """Pointwise mean in linear power, converted back to dB."""
    patterns = list(patterns)
    if not patterns:
        raise ValueError("no patterns to average")
    first = patterns[0]
    for p in patterns[1:]:
        if not p.grid.same_as(first.grid):
            raise GridMismatchError("patterns sampled on different grids")
        if p.reference != first.reference:
            raise GridMismatchError("patterns use different normalization references")
    acc = np.zeros(first.grid.shape)
    for p in patterns:
        acc += p.linear()
    return RadiationPattern(first.grid, _to_db(acc / len(patterns), 0.0), first.reference)


def ssb_mask(ssb_patterns) -> RadiationPattern:
    """Normalised SSB power mask: linear mean of peak-normalised SSB patterns."""
    pats = [RadiationPattern(p.grid, p.eirp_db - p.eirp_db.max(), "per-pattern-peak")
            for p in ssb_patterns]
    return average_pattern(pats)


def ssb_pm_composite(ssb: RadiationPattern, pm_patterns, target=None):
    """Mask PM patterns by the peak-normalised SSB pattern.

    Returns ``(scenario, values)``: the linear average of the masked
    patterns and, if ``target=(theta, phi)`` is given, each masked
    pattern's EIRP there (else ``None``).
    """
    if isinstance(pm_patterns, PatternStack):
        masked = pm_patterns.masked(ssb)
        values = None if target is None else masked.values_at(*target)
        return masked.average(), values

    mask_db = ssb.eirp_db - ssb.eirp_db.max()
    composites = []
    for p in pm_patterns:
        if not p.grid.same_as(ssb.grid):
            raise GridMismatchError("SSB and PM patterns sampled on different grids")
        composites.append(RadiationPattern(p.grid, np.maximum(p.eirp_db + mask_db, FLOOR_DB),
                                           p.reference))
    values = None
    if target is not None:
        values = np.array([eirp_at(c, *target) for c in composites])
    return average_pattern(composites), values


# -- codebook-wide pattern stack ------------------------------------------

def _column_key(col, port_pol):
    parts = []
    for p in np.unique(port_pol):
        block = col[port_pol == p]
        nz = np.flatnonzero(np.abs(block) > 1e-12)
        if len(nz):
            block = block * np.exp(-1j * np.angle(block[nz[0]]))
        parts.append(np.round(block, 10) + 0.0)
    return np.concatenate(parts).tobytes()


@dataclass(eq=False)
class PatternStack:
    """EIRP patterns of every codeword of a codebook on a shared grid.

    ``beam_power[k]`` is the raw (linear, unit transmit power) pattern of
    the k-th distinct precoder column; codeword ``c`` radiates
    ``sum_l beam_power[column_index[c, l]]``, optionally multiplied by a
    linear ``mask``.
    """

    grid: AngularGrid
    codebook: list
    beam_power: np.ndarray
    column_index: np.ndarray
    reference: str
    offset_db: np.ndarray
    mask: np.ndarray | None = None
    _peaks: tuple | None = field(default=None, repr=False)

    @classmethod
    def build(cls, layout: ElementLayout, codebook, grid: AngularGrid,
              element_pattern: ElementPattern | None = None, reference: str = "global-max",
              tx_power_dbm: float = 0.0, workers: int = 1) -> "PatternStack":
        if reference not in REFERENCES:
            raise DomainError(f"unknown reference {reference!r}; expected one of {REFERENCES}")
        codebook = list(codebook)
        pol = _port_polarization(layout)
        keys, columns = {}, []
        index = np.empty((len(codebook), codebook[0].rank), dtype=int)
        for c, pm in enumerate(codebook):
            if pm.w.shape[0] != layout.n_ports:
                raise DomainError(f"codeword has {pm.w.shape[0]} ports, layout has {layout.n_ports}")
            for l in range(pm.rank):
                key = _column_key(pm.w[:, l], pol)
                if key not in keys:
                    keys[key] = len(columns)
                    columns.append(pm.w[:, l])
                index[c, l] = keys[key]
        cols = np.stack(columns, axis=1)

        th, ph = grid.mesh()
        th, ph = th.ravel(), ph.ravel()
        beam = np.empty((cols.shape[1], grid.size))
        starts = range(0, grid.size, _DIR_CHUNK)

        def work(s):
            resp = port_response(layout, th[s:s + _DIR_CHUNK], ph[s:s + _DIR_CHUNK], element_pattern)
            for p in np.unique(pol):
                sel = pol == p
                f = resp[:, sel] @ cols[sel]
                beam[:, s:s + _DIR_CHUNK] += (f.real ** 2 + f.imag ** 2).T

        beam[:] = 0.0
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                list(ex.map(work, starts))
        else:
            for s in starts:
                work(s)
        beam = beam.reshape((cols.shape[1],) + grid.shape)

        stack = cls(grid, codebook, beam, index, reference, np.zeros(len(codebook)))
        if reference == "absolute-dbm":
            stack.offset_db = np.full(len(codebook), -float(tx_power_dbm))
        else:
            peak_db = 10.0 * np.log10(np.concatenate(
                [stack._raw_block(sl).reshape(sl.stop - sl.start, -1).max(axis=1)
                 for sl in stack._slices()]))
            if reference == "global-max":
                stack.offset_db = np.full(len(codebook), peak_db.max())
            else:
                stack.offset_db = peak_db
        return stack

    def __len__(self):
        return len(self.codebook)

    def _slices(self, chunk=64):
        for s in range(0, len(self), chunk):
            yield slice(s, min(s + chunk, len(self)))

    def _raw_block(self, sl) -> np.ndarray:
        """Raw linear patterns of codewords ``sl`` (before masking)."""
        idx = self.column_index[sl]
        raw = self.beam_power[idx[:, 0]].copy()
        for l in range(1, idx.shape[1]):
            raw += self.beam_power[idx[:, l]]
        return raw

    def _db_block(self, sl) -> np.ndarray:
        raw = self._raw_block(sl)
        if self.mask is not None:
            raw = raw * self.mask
        return _to_db(raw, self.offset_db[sl][:, None, None])

    def db(self, i: int) -> np.ndarray:
        return self._db_block(slice(i, i + 1))[0]

    def pattern(self, i: int) -> RadiationPattern:
        return RadiationPattern(self.grid, self.db(i), self.reference)

    def patterns(self):
        for i in range(len(self)):
            yield self.pattern(i)

    def masked(self, ssb: RadiationPattern) -> "PatternStack":
        """Same codebook with every pattern multiplied by the normalised SSB power."""
        if not ssb.grid.same_as(self.grid):
            raise GridMismatchError("SSB pattern sampled on a different grid")
        mask = 10.0 ** ((ssb.eirp_db - ssb.eirp_db.max()) / 10.0)
        if self.mask is not None:
            mask = mask * self.mask
        return PatternStack(self.grid, self.codebook, self.beam_power, self.column_index,
                            self.reference, self.offset_db, mask)

    def values_at(self, theta: float, phi: float) -> np.ndarray:
        """EIRP (dB) of every codeword at one direction, bilinear on the dB grids."""
        nodes, weights = _bilinear(self.grid, theta, phi)
        vals = []
        for n in nodes:
            raw = self.beam_power[(self.column_index[:, 0],) + n].copy()
            for l in range(1, self.column_index.shape[1]):
                raw += self.beam_power[(self.column_index[:, l],) + n]
            if self.mask is not None:
                raw = raw * self.mask[n]
            vals.append(_to_db(raw, self.offset_db))
        return _combine(vals, weights)

    def cut(self, *, theta=None, phi=None):
        """Principal cut of every codeword: ``(angles, values[n_codewords, n_angles])``.

        ``phi=`` fixes azimuth (values along elevation); ``theta=`` fixes elevation.
        """
        if (theta is None) == (phi is None):
            raise ValueError("give exactly one of theta= or phi=")
        out = []
        for sl in self._slices():
            block = self._db_block(sl)
            out.append(block[:, :, self.grid.phi_index(phi)] if phi is not None
                       else block[:, self.grid.theta_index(theta), :])
        angles = self.grid.theta if phi is not None else self.grid.phi
        return angles, np.concatenate(out)

    def average(self) -> RadiationPattern:
        """Linear-power mean over the codebook."""
        acc = np.zeros(self.grid.shape)
        for sl in self._slices():
            acc += (10.0 ** (self._db_block(sl) / 10.0)).sum(axis=0)
        return RadiationPattern(self.grid, _to_db(acc / len(self), 0.0), self.reference)

    def peaks_and_widths(self):
        """Per-codeword peak and half-power widths.

        Returns ``(peaks[n, 2], widths[n, 2])`` in degrees as
        (theta, phi); widths are NaN where a -3 dB crossing is missing.
        """
        if self._peaks is None:
            peaks = np.empty((len(self), 2))
            widths = np.full((len(self), 2), np.nan)
            for sl in self._slices():
                block = self._db_block(sl)
                for k, c in enumerate(range(sl.start, sl.stop)):
                    i, j = _peak_index(block[k], self.grid)
                    peaks[c] = self.grid.theta[i], self.grid.phi[j]
                    try:
                        widths[c] = _hpbw_from_db(block[k], self.grid, i, j)
                    except UndefinedWidthError:
                        pass
            self._peaks = (peaks, widths)
        return self._peaks
