"""
Antenna element, subarray and panel geometry of the gNB active antenna array.

The panel lies in the y-z plane with broadside along +x. Elevation ``theta``
is measured from the x-y plane (positive up) and azimuth ``phi`` from +x
towards +y (positive to the left of boresight), both in degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ElementPattern:
    """Parabolic-in-dB directional element (3GPP TR 38.901 style).

    Attributes
    ----------
    max_gain_dbi : float
        Boresight gain.
    hpbw_az_deg, hpbw_el_deg : float
        Half-power beamwidths in the horizontal and vertical cuts.
    front_to_back_db : float
        Overall attenuation floor.
    sla_db : float
        Vertical side-lobe attenuation floor.
    """

    max_gain_dbi: float = 5.3
    hpbw_az_deg: float = 90.0
    hpbw_el_deg: float = 60.0
    front_to_back_db: float = 30.0
    sla_db: float = 30.0

    def __post_init__(self):
        if self.hpbw_az_deg <= 0 or self.hpbw_el_deg <= 0:
            raise ConfigError("element half-power beamwidths must be positive")
        if self.front_to_back_db < 0 or self.sla_db < 0:
            raise ConfigError("element attenuation floors must be non-negative")

    def gain_db(self, theta, phi):
        """Vectorised gain in dBi; no domain checking."""
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        a_h = -np.minimum(12.0 * (phi / self.hpbw_az_deg) ** 2, self.front_to_back_db)
        a_v = -np.minimum(12.0 * (theta / self.hpbw_el_deg) ** 2, self.sla_db)
        return self.max_gain_dbi - np.minimum(-(a_v + a_h), self.front_to_back_db)


def _check_angles(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(np.abs(theta) > 90.0):
        raise DomainError("elevation must lie in [-90, 90] degrees")
    if np.any(~np.isfinite(phi)) or np.any(np.abs(phi) > 180.0):
        raise DomainError("azimuth must lie in [-180, 180] degrees")
    return theta, phi


def element_gain(pattern: ElementPattern, theta, phi):
    """Element gain in dBi at elevation ``theta`` and azimuth ``phi`` (degrees).

    Raises
    ------
    DomainError
        If an angle is outside theta in [-90, 90] or phi in [-180, 180].
    """
    theta, phi = _check_angles(theta, phi)
    g = pattern.gain_db(theta, phi)
    return float(g) if g.ndim == 0 else g


@dataclass(frozen=True)
class PanelConfig:
    """Physical description of a single-panel active antenna system.

    ``m1 x m2`` elements (rows x columns) form a subarray; the panel holds
    ``n1`` columns and ``n2`` rows of subarrays. When the subarray pitches
    ``d_su_v``/``d_su_h`` are left as ``None`` the elements form one
    contiguous grid, i.e. the subarray pitch is ``m1*d_el_v`` by
    ``m2*d_el_h``.
    """

    m1: int = 2
    m2: int = 3
    n1: int = 4
    n2: int = 4
    polarizations: int = 2
    d_el_v: float = 0.058
    d_el_h: float = 0.044
    d_su_v: float | None = None
    d_su_h: float | None = None
    carrier_hz: float = 3.75e9
    downtilt_deg: float = 0.0
    element: ElementPattern = field(default_factory=ElementPattern)

    def __post_init__(self):
        for name in ("m1", "m2", "n1", "n2"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.polarizations not in (1, 2):
            raise ConfigError("polarizations must be 1 or 2")
        for name in ("d_el_v", "d_el_h", "carrier_hz"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("d_su_v", "d_su_h"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be positive when given")
        if not -90.0 < self.downtilt_deg < 90.0:
            raise ConfigError("downtilt_deg must lie in (-90, 90)")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def n_elements(self) -> int:
        """Total number of polarized elements."""
        return self.polarizations * self.m1 * self.m2 * self.n1 * self.n2

    @property
    def n_ports(self) -> int:
        return self.polarizations * self.n1 * self.n2

    @property
    def subarray_pitch(self) -> tuple[float, float]:
        """(vertical, horizontal) distance between subarray origins."""
        v = self.d_su_v if self.d_su_v is not None else self.m1 * self.d_el_v
        h = self.d_su_h if self.d_su_h is not None else self.m2 * self.d_el_h
        return v, h


@dataclass(frozen=True, eq=False)
class ElementLayout:
    """Flattened element table of a panel.

    All arrays share the leading dimension (one entry per polarized
    element). ``positions`` are in metres in the panel frame,
    ``polarization`` holds the slant angle in degrees (+45 or -45),
    ``subarray`` the (row, column) of the owning subarray and ``port`` the
    antenna port index.
    """

    positions: np.ndarray
    polarization: np.ndarray
    subarray: np.ndarray
    port: np.ndarray
    config: PanelConfig

    def __len__(self):
        return len(self.port)

    @property
    def n_ports(self) -> int:
        return int(self.port.max()) + 1

    @property
    def polarization_index(self) -> np.ndarray:
        """0 for +45 degree elements, 1 for -45 degree elements."""
        return (self.polarization < 0).astype(int)

    def entries(self):
        """Iterate ``(position, polarization, (row, col), port)`` tuples."""
        for k in range(len(self)):
            yield (self.positions[k], float(self.polarization[k]),
                   tuple(int(x) for x in self.subarray[k]), int(self.port[k]))


def port_index(pol: int, col: int, row: int, n1: int, n2: int) -> int:
    """Antenna port of subarray (row, col), assigned column-wise top to bottom."""
    return pol * n1 * n2 + col * n2 + row


def build_layout(config: PanelConfig) -> ElementLayout:
    """Place every polarized element of ``config`` on the y-z plane.

    Subarray row 0 is the top row and column 0 the most negative y. The
    array is centred on the origin. Cross-polarized elements share a
    position.

    Raises
    ------
    ConfigError
        If two co-polarized elements end up at the same position.
    """
    c = config
    pitch_v, pitch_h = c.subarray_pitch
    pols = (45.0, -45.0)[: c.polarizations]

    positions, polar, sub, ports = [], [], [], []
    for p, slant in enumerate(pols):
        for col in range(c.n1):
            for row in range(c.n2):
                port = port_index(p, col, row, c.n1, c.n2)
                for i in range(c.m1):
                    for j in range(c.m2):
                        z = -(row * pitch_v + i * c.d_el_v)
                        y = col * pitch_h + j * c.d_el_h
                        positions.append((0.0, y, z))
                        polar.append(slant)
                        sub.append((row, col))
                        ports.append(port)

    positions = np.array(positions, dtype=float)
    positions -= positions.mean(axis=0)
    # snap round-off from centring so symmetric layouts stay symmetric
    positions = np.round(positions, 12) + 0.0
    polar = np.array(polar)

    for slant in pols:
        pts = positions[polar == slant]
        if len(np.unique(np.round(pts, 9), axis=0)) != len(pts):
            raise ConfigError("subarray pitch too small: element positions overlap")

    return ElementLayout(
        positions=positions,
        polarization=polar,
        subarray=np.array(sub, dtype=int),
        port=np.array(ports, dtype=int),
        config=config,
    )


def direction_vectors(theta, phi):
    """Unit vectors for elevation/azimuth angles in degrees, shape (..., 3)."""
    t = np.deg2rad(np.asarray(theta, dtype=float))
    p = np.deg2rad(np.asarray(phi, dtype=float))
    t, p = np.broadcast_arrays(t, p)
    return np.stack([np.cos(t) * np.cos(p), np.cos(t) * np.sin(p), np.sin(t)], axis=-1)


def to_panel_frame(theta, phi, downtilt_deg: float = 0.0):
    """Express global directions in the (mechanically down-tilted) panel frame.

    Returns ``(u_local, theta_local, phi_local)``.
    """
    u = direction_vectors(theta, phi)
    if downtilt_deg:
        t = np.deg2rad(downtilt_deg)
        # inverse of the rotation taking +x to (cos t, 0, -sin t)
        rot = np.array([[np.cos(t), 0.0, -np.sin(t)],
                        [0.0, 1.0, 0.0],
                        [np.sin(t), 0.0, np.cos(t)]])
        u = u @ rot.T
        theta_l = np.rad2deg(np.arcsin(np.clip(u[..., 2], -1.0, 1.0)))
        phi_l = np.rad2deg(np.arctan2(u[..., 1], u[..., 0]))
        return u, theta_l, phi_l
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    return u, theta, phi


def steering_phases(layout: ElementLayout, theta, phi, wavelength: float):
    """Unit-modulus weights exp(+j 2 pi / lambda * r_k . u(theta, phi)).

    ``theta``/``phi`` may be arrays; the element axis is appended last.
    """
    if not wavelength > 0:
        raise DomainError("wavelength must be positive")
    theta, phi = _check_angles(theta, phi)
    u, _, _ = to_panel_frame(theta, phi, layout.config.downtilt_deg)
    k = 2.0 * np.pi / wavelength
    return np.exp(1j * k * (u @ layout.positions.T))
