"""
Type I single-panel precoding codebook (codebook mode 1, ranks 1 and 2).

Codewords are enumerated lexicographically in ``(i11, i12, i13, i2)`` and
use the port ordering of the layout: the first ``n1*n2`` ports carry the
+45 degree polarization, port ``col*n2 + row`` within each half.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class CodebookConfig:
    n1: int = 4
    n2: int = 4
    o1: int = 4
    o2: int = 4
    rank: int = 2
    codebook_mode: int = 1

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1 or self.n1 * self.n2 < 2:
            raise ConfigError("need n1*n2 >= 2 (at least 4 CSI-RS ports)")
        if self.ports > 32:
            raise ConfigError(f"{self.ports} ports exceed the 32-port limit")
        if self.o1 < 1 or self.o2 < 1:
            raise ConfigError("oversampling factors must be >= 1")
        if self.rank not in (1, 2):
            raise ConfigError(f"unsupported rank {self.rank}; only 1 and 2 are implemented")
        if self.codebook_mode != 1:
            raise ConfigError("only codebook mode 1 is implemented")

    @property
    def ports(self) -> int:
        return 2 * self.n1 * self.n2


@dataclass(frozen=True, eq=False)
class PrecodingMatrix:
    """One codeword: PMI indices ``(i11, i12, i13, i2)`` and the ports x rank matrix."""

    indices: tuple[int, int, int, int]
    w: np.ndarray

    @property
    def rank(self) -> int:
        return self.w.shape[1]

    def __repr__(self):
        return f"PrecodingMatrix(indices={self.indices}, shape={self.w.shape})"


def dft_beam(n1: int, n2: int, o1: int, o2: int, l: int, m: int) -> np.ndarray:
    """Oversampled 2-D DFT beam v_{l,m}, length ``n1*n2``.

    Entry ``a*n2 + b`` equals exp(j 2 pi (l a / (o1 n1) + m b / (o2 n2))).
    """
    if not 0 <= l < n1 * o1 or not 0 <= m < n2 * o2:
        raise DomainError(f"beam index (l={l}, m={m}) outside [0,{n1 * o1}) x [0,{n2 * o2})")
    a = np.arange(n1)
    b = np.arange(n2)
    u_l = np.exp(2j * np.pi * l * a / (o1 * n1))
    u_m = np.exp(2j * np.pi * m * b / (o2 * n2))
    return np.kron(u_l, u_m)


def i13_offsets(config: CodebookConfig) -> list[tuple[int, int]]:
    """Rank-2 beam-pair offsets (k1, k2) indexed by i13."""
    n1, n2, o1, o2 = config.n1, config.n2, config.o1, config.o2
    if n1 == n2:
        return [(0, 0), (o1, 0), (0, o2), (o1, o2)]
    if n1 > n2 > 1:
        return [(0, 0), (o1, 0), (0, o2), (2 * o1, 0)]
    if n2 == 1 and n1 == 2:
        return [(0, 0), (o1, 0)]
    if n2 == 1 and n1 > 2:
        return [(0, 0), (o1, 0), (2 * o1, 0), (3 * o1, 0)]
    raise ConfigError(f"unsupported shape (n1={n1}, n2={n2}) for rank 2")


def codebook_size(config: CodebookConfig) -> int:
    beams = config.n1 * config.o1 * config.n2 * config.o2
    if config.rank == 1:
        return beams * 4
    return beams * len(i13_offsets(config)) * 2


def generate_codebook(config: CodebookConfig) -> list[PrecodingMatrix]:
    """Enumerate every codeword of the configured codebook."""
    n1, n2, o1, o2 = config.n1, config.n2, config.o1, config.o2
    b1, b2 = n1 * o1, n2 * o2
    p = config.ports
    out = []
    if config.rank == 1:
        scale = 1.0 / np.sqrt(p)
        for i11, i12, i2 in itertools.product(range(b1), range(b2), range(4)):
            v = dft_beam(n1, n2, o1, o2, i11, i12)
            phi = np.exp(1j * np.pi * i2 / 2)
            w = scale * np.concatenate([v, phi * v])[:, None]
            out.append(PrecodingMatrix((i11, i12, 0, i2), w))
        return out

    offsets = i13_offsets(config)
    scale = 1.0 / np.sqrt(2 * p)
    for i11, i12, i13, i2 in itertools.product(range(b1), range(b2), range(len(offsets)), range(2)):
        k1, k2 = offsets[i13]
        v = dft_beam(n1, n2, o1, o2, i11, i12)
        vp = dft_beam(n1, n2, o1, o2, (i11 + k1) % b1, (i12 + k2) % b2)
        phi = np.exp(1j * np.pi * i2 / 2)
        w = scale * np.block([[v[:, None], vp[:, None]],
                              [phi * v[:, None], -phi * vp[:, None]]])
        out.append(PrecodingMatrix((i11, i12, i13, i2), w))
    return out


def as_array(codebook) -> np.ndarray:
    """Stack codewords into an array of shape (n_codewords, ports, rank)."""
    return np.stack([pm.w for pm in codebook])
