"""Independent reference implementations used only by the tests.

These are written from first principles with plain loops and scalar math
so they share no code with the package.
"""

import cmath
import math

import numpy as np


def element_gain_scalar(theta, phi, g_max=5.3, az=90.0, el=60.0, am=30.0, sla=30.0):
    a_h = -min(12.0 * (phi / az) ** 2, am)
    a_v = -min(12.0 * (theta / el) ** 2, sla)
    return g_max - min(-(a_v + a_h), am)


def nr_qam_point(b):
    """NR modulation mapper for one symbol's bit tuple (16, 64 or 256 QAM)."""
    s = [1 - 2 * int(x) for x in b]
    if len(b) == 4:
        return (s[0] * (2 - s[2]) + 1j * s[1] * (2 - s[3])) / math.sqrt(10)
    if len(b) == 6:
        return (s[0] * (4 - s[2] * (2 - s[4]))
                + 1j * s[1] * (4 - s[3] * (2 - s[5]))) / math.sqrt(42)
    if len(b) == 8:
        return (s[0] * (8 - s[2] * (4 - s[4] * (2 - s[6])))
                + 1j * s[1] * (8 - s[3] * (4 - s[5] * (2 - s[7])))) / math.sqrt(170)
    raise ValueError(len(b))


def qam_ber_closed_form(order, esn0_db):
    """Exact BER of Gray square M-QAM in AWGN (Cho and Yoon, 2002)."""
    m = order
    sq = int(round(math.sqrt(m)))
    esn0 = 10 ** (esn0_db / 10)
    arg = math.sqrt(3 * esn0 / (2 * (m - 1)))
    n_k = int(round(math.log2(sq)))
    total = 0.0
    for k in range(1, n_k + 1):
        pk = 0.0
        for i in range(int((1 - 2 ** -k) * sq)):
            w = i * 2 ** (k - 1) / sq
            pk += (-1) ** math.floor(w) * (2 ** (k - 1) - math.floor(w + 0.5)) * math.erfc(
                (2 * i + 1) * arg)
        total += pk / sq
    return total / n_k


def qam_ber_decision_regions(order, esn0_db):
    """Exact BER by integrating the Gaussian over every decision interval.

    Works per in-phase axis (square QAM is separable), using the NR mapper
    to label the levels.
    """
    q = int(round(math.log2(order)))
    k = q // 2
    labels = {}
    for v in range(2 ** q):
        bits = [(v >> (q - 1 - i)) & 1 for i in range(q)]
        p = nr_qam_point(bits)
        labels[round(p.real, 12)] = tuple(bits[0::2])
    levels = sorted(labels)
    sigma = math.sqrt(10 ** (-esn0_db / 10) / 2)
    edges = [-math.inf] + [(a + b) / 2 for a, b in zip(levels, levels[1:])] + [math.inf]

    def cdf(x):
        return 0.5 * math.erfc(-x / (sigma * math.sqrt(2)))

    err = 0.0
    for tx in levels:
        for j, rx in enumerate(levels):
            if rx == tx:
                continue
            p = cdf(edges[j + 1] - tx) - cdf(edges[j] - tx)
            err += p * sum(a != b for a, b in zip(labels[tx], labels[rx]))
    return err / (len(levels) * k)


def dft_codeword(n1, n2, o1, o2, i11, i12, i13, i2, rank):
    """Type I single-panel codeword built entry by entry."""
    def beam(l, m):
        return [cmath.exp(2j * math.pi * (l * a / (o1 * n1) + m * b / (o2 * n2)))
                for a in range(n1) for b in range(n2)]

    p = n1 * n2
    if rank == 1:
        v = beam(i11, i12)
        phase = cmath.exp(1j * math.pi * i2 / 2)
        return np.array([v + [phase * x for x in v]]).T / math.sqrt(2 * p)
    if n1 == n2:
        table = [(0, 0), (o1, 0), (0, o2), (o1, o2)]
    elif n1 > n2 > 1:
        table = [(0, 0), (o1, 0), (0, o2), (2 * o1, 0)]
    elif n2 == 1 and n1 == 2:
        table = [(0, 0), (o1, 0)]
    else:
        table = [(0, 0), (o1, 0), (2 * o1, 0), (3 * o1, 0)]
    k1, k2 = table[i13]
    v = beam(i11, i12)
    w = beam((i11 + k1) % (n1 * o1), (i12 + k2) % (n2 * o2))
    phase = cmath.exp(1j * math.pi * i2 / 2)
    c0 = v + [phase * x for x in v]
    c1 = w + [-phase * x for x in w]
    return np.array([c0, c1]).T / math.sqrt(2 * 2 * p)


def panel_eirp_linear(layout, w, theta, phi, wavelength):
    """Sum over layers and polarizations of |sum_elements a * w * exp(-jk r.u)|^2."""
    th, ph = math.radians(theta), math.radians(phi)
    u = (math.cos(th) * math.cos(ph), math.cos(th) * math.sin(ph), math.sin(th))
    amp = math.sqrt(10 ** (element_gain_scalar(theta, phi) / 10))
    k = 2 * math.pi / wavelength
    per_port = {}
    for e in range(len(layout.port)):
        per_port[int(layout.port[e])] = per_port.get(int(layout.port[e]), 0) + 1
    total = 0.0
    for l in range(w.shape[1]):
        fields = {}
        for e in range(len(layout.port)):
            r = layout.positions[e]
            port = int(layout.port[e])
            pol = int(layout.polarization[e])
            f = amp * w[port, l] / math.sqrt(per_port[port]) * cmath.exp(
                -1j * k * (r[0] * u[0] + r[1] * u[1] + r[2] * u[2]))
            fields[pol] = fields.get(pol, 0) + f
        total += sum(abs(f) ** 2 for f in fields.values())
    return total


def ula_hpbw_deg(n, d, wavelength):
    """Small-angle broadside HPBW of a uniform linear aperture, 0.886 lambda / D."""
    return math.degrees(0.886 * wavelength / (n * d))
