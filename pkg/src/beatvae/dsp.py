"""Butterworth IIR design via the bilinear transform, SOS filtering and decimation."""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import NumericalError


@dataclass
class BiquadSection:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    @property
    def poles(self):
        return np.roots([1.0, self.a1, self.a2])

    @property
    def b(self):
        return np.array([self.b0, self.b1, self.b2])

    @property
    def a(self):
        return np.array([1.0, self.a1, self.a2])


@dataclass
class SosCascade:
    sections: list = field(default_factory=list)
    overall_gain: float = 1.0

    @property
    def poles(self):
        if not self.sections:
            return np.array([])
        return np.concatenate([s.poles for s in self.sections])

    def is_stable(self):
        return bool(np.all(np.abs(self.poles) < 1.0))


def _butter_prototype_poles(order):
    k = np.arange(1, order + 1)
    return np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))


def _bilinear(zeros, poles, gain, fs):
    """Map analog zeros/poles/gain to the z-plane; zeros at infinity land on z = -1."""
    fs2 = 2.0 * fs
    zd = (fs2 + zeros) / (fs2 - zeros)
    pd = (fs2 + poles) / (fs2 - poles)
    zd = np.concatenate([zd, -np.ones(len(poles) - len(zeros))])
    kd = gain * np.real(np.prod(fs2 - zeros) / np.prod(fs2 - poles))
    return zd, pd, kd


def _pair_conjugates(poles):
    """Group poles into conjugate pairs (or real pairs), sorted by magnitude."""
    poles = list(poles)
    complex_p = [p for p in poles if p.imag > 1e-12]
    real_p = sorted([p.real for p in poles if abs(p.imag) <= 1e-12], key=abs)
    pairs = [(p, np.conj(p)) for p in complex_p]
    for i in range(0, len(real_p), 2):
        pairs.append(tuple(real_p[i:i + 2]))
    pairs.sort(key=lambda pr: max(abs(p) for p in pr))
    return pairs


def _zpk_to_sos(zeros, poles, gain):
    zeros = sorted(zeros, key=lambda z: -np.real(z))
    pairs = _pair_conjugates(poles)
    if len(zeros) != 2 * len(pairs):
        raise ValueError("expected two zeros per pole pair")
    # zeros lie at +1 and -1; give each section one of each where possible
    pos = [z for z in zeros if np.real(z) > 0]
    neg = [z for z in zeros if np.real(z) <= 0]
    sections = []
    for pr in pairs:
        if pos and neg:
            zz = (pos.pop(), neg.pop())
        else:
            rest = pos or neg
            zz = (rest.pop(), rest.pop())
        b = np.real(np.poly(zz))
        a = np.real(np.poly(pr if len(pr) == 2 else (pr[0], 0.0)))
        sections.append(BiquadSection(b[0], b[1], b[2], a[1], a[2]))
    return SosCascade(sections, float(gain))


def _check_band(f, fs, name):
    if not 0 < f < fs / 2:
        raise ValueError(f"{name}={f} Hz must lie strictly inside (0, fs/2 = {fs / 2} Hz)")


def design_butter_bandpass(order, f_low, f_high, fs):
    """Digital Butterworth bandpass of the given prototype order.

    The result has ``order`` biquad sections; the magnitude response is
    exactly 1/sqrt(2) at both band edges thanks to prewarping.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    _check_band(f_low, fs, "f_low")
    _check_band(f_high, fs, "f_high")
    if f_low >= f_high:
        raise ValueError(f"f_low ({f_low}) must be below f_high ({f_high})")
    wl = 2.0 * fs * np.tan(np.pi * f_low / fs)
    wh = 2.0 * fs * np.tan(np.pi * f_high / fs)
    bw = wh - wl
    w0sq = wl * wh

    proto = _butter_prototype_poles(order)
    # s^2 - p*bw*s + w0^2 = 0 for each prototype pole p
    half = proto * bw / 2.0
    disc = np.sqrt(half * half - w0sq + 0j)
    poles = np.concatenate([half + disc, half - disc])
    zeros = np.zeros(order, dtype=complex)
    gain = bw ** order

    zd, pd, kd = _bilinear(zeros, poles, gain, fs)
    return _zpk_to_sos(zd, pd, kd)


def design_butter_lowpass(order, f_cut, fs):
    """Digital Butterworth lowpass (used for the optional anti-alias stage)."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    _check_band(f_cut, fs, "f_cut")
    wc = 2.0 * fs * np.tan(np.pi * f_cut / fs)
    poles = _butter_prototype_poles(order) * wc
    zd, pd, kd = _bilinear(np.array([], dtype=complex), poles, wc ** order, fs)
    if len(pd) % 2:
        pd = np.append(pd, 0.0)
        zd = np.append(zd, 0.0)
    return _zpk_to_sos(zd, pd, kd)


def frequency_response(cascade, f, fs):
    """Complex gain of the cascade at frequency ``f`` (scalar or array, Hz)."""
    w = 2.0 * np.pi * np.asarray(f, dtype=np.float64) / fs
    e1 = np.exp(-1j * w)
    e2 = e1 * e1
    h = np.full(np.shape(w), cascade.overall_gain, dtype=complex)
    for s in cascade.sections:
        h = h * (s.b0 + s.b1 * e1 + s.b2 * e2) / (1.0 + s.a1 * e1 + s.a2 * e2)
    return h


def filter_forward(cascade, x):
    """Causal zero-state filtering, one transposed direct-form II stage per section."""
    y = np.asarray(x, dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise NumericalError(f"non-finite input sample at index {bad[0]}")
    y = y * cascade.overall_gain
    for s in cascade.sections:
        y = lfilter(s.b, s.a, y)
    return y


def resample_to_60hz(x, fs_in, fs_out=60):
    """Keep every ``fs_in / fs_out``-th sample starting at index 0."""
    factor = fs_in / fs_out
    if factor < 1 or factor != int(factor):
        raise ValueError(f"{fs_in} Hz is not an integer multiple of {fs_out} Hz")
    factor = int(factor)
    x = np.asarray(x)
    n = len(x) // factor
    return x[: n * factor : factor]
