"""Frequency-domain sounding math.

Sweep geometry, band windowing, CFR <-> CIR transforms, reference-based
inverse filtering, time gating and peak normalization. All functions are
pure; the containers hold read-only numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

#: Gate applied to the free-space reference record before inverse filtering.
REFERENCE_GATE = (0.0, 50e-9)
#: Tx-Rx separation of the free-space reference recording, in meters.
REFERENCE_DISTANCE = 0.25
DEFAULT_FLOOR = 1e-6


class GeometryMismatchError(ValueError):
    """Two sweeps that must share a frequency grid do not."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SweepGeometry:
    """Uniform frequency grid of a sounding sweep.

    Sample ``i`` sits at ``f_min + i * spacing`` for ``i < n_points``; the
    band ``f_max - f_min`` is divided into ``n_points`` equal bins.
    """

    f_min: float
    f_max: float
    n_points: int

    def __post_init__(self):
        if not self.f_max > self.f_min:
            raise ValueError(f"non-positive bandwidth: f_min={self.f_min}, f_max={self.f_max}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def bandwidth(self) -> float:
        return self.f_max - self.f_min

    @property
    def spacing(self) -> float:
        return self.bandwidth / self.n_points

    @property
    def resolution(self) -> float:
        """Delay resolution ``1 / B_w`` in seconds."""
        return 1.0 / self.bandwidth

    @property
    def max_excess_delay(self) -> float:
        """Unambiguous delay span ``1 / spacing`` in seconds."""
        return self.n_points / self.bandwidth

    def frequencies(self) -> np.ndarray:
        return self.f_min + np.arange(self.n_points) * self.spacing

    def matches(self, other: "SweepGeometry", rtol: float = 1e-9) -> bool:
        return (self.n_points == other.n_points
                and math.isclose(self.f_min, other.f_min, rel_tol=rtol)
                and math.isclose(self.f_max, other.f_max, rel_tol=rtol))


def sweep_geometry(f_min: float, f_max: float, n_points: int) -> SweepGeometry:
    return SweepGeometry(float(f_min), float(f_max), n_points)


@dataclass(frozen=True)
class FrequencySweep:
    geometry: SweepGeometry
    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        s = _frozen(self.samples, complex)
        if s.ndim != 1 or s.size != self.geometry.n_points:
            raise ValueError(f"expected {self.geometry.n_points} samples, got shape {s.shape}")
        object.__setattr__(self, "samples", s)

    def frequencies(self) -> np.ndarray:
        return self.geometry.frequencies()

    def replace(self, samples=None, label=None) -> "FrequencySweep":
        return FrequencySweep(self.geometry,
                              self.samples if samples is None else samples,
                              self.label if label is None else label)


@dataclass(frozen=True)
class ImpulseResponse:
    sample_period: float
    samples: np.ndarray
    t0: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.sample_period > 0:
            raise ValueError(f"sample_period must be positive, got {self.sample_period}")
        s = _frozen(self.samples, complex)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("impulse response needs a non-empty 1-D sample array")
        if not np.all(np.isfinite(s)):
            raise ValueError("impulse response contains non-finite samples")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) * self.sample_period

    def power(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def total_power(self) -> float:
        return float(np.sum(self.power()))

    def replace(self, samples=None, t0=None, label=None) -> "ImpulseResponse":
        return ImpulseResponse(self.sample_period,
                               self.samples if samples is None else samples,
                               self.t0 if t0 is None else t0,
                               self.label if label is None else label)


def window_coefficients(n: int, kind: str = "hann") -> np.ndarray:
    """Symmetric window, ``w_i = 0.5 (1 - cos(2 pi i / (n - 1)))`` for Hann."""
    if kind == "none":
        return np.ones(n)
    if kind == "hann":
        if n == 1:
            return np.ones(1)
        return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / (n - 1)))
    raise ValueError(f"unknown window kind {kind!r} (expected 'hann' or 'none')")


def apply_window(sweep: FrequencySweep, kind: str = "hann") -> FrequencySweep:
    if kind == "none":
        return sweep
    return sweep.replace(samples=sweep.samples * window_coefficients(sweep.geometry.n_points, kind))


def cfr_to_cir(sweep: FrequencySweep, window: str = "hann") -> ImpulseResponse:
    """Windowed inverse DFT of a sweep; returns exactly ``n_points`` delay samples."""
    h = np.fft.ifft(apply_window(sweep, window).samples)
    return ImpulseResponse(sweep.geometry.resolution, h, 0.0, sweep.label)


def cir_to_cfr(cir: ImpulseResponse, geometry: SweepGeometry, label: str = "") -> FrequencySweep:
    """Forward DFT of a CIR onto ``geometry`` (inverse of ``cfr_to_cir`` with no window)."""
    if cir.samples.size != geometry.n_points:
        raise GeometryMismatchError(
            f"CIR has {cir.samples.size} samples, geometry has {geometry.n_points} points")
    if not math.isclose(cir.sample_period, geometry.resolution, rel_tol=1e-9):
        raise GeometryMismatchError(
            f"CIR sample period {cir.sample_period} != geometry resolution {geometry.resolution}")
    return FrequencySweep(geometry, np.fft.fft(cir.samples), label or cir.label)


def inverse_filter(measured: FrequencySweep, reference: FrequencySweep,
                   floor: float = DEFAULT_FLOOR) -> FrequencySweep:
    """Per-bin quotient ``measured / reference``.

    Reference bins weaker than ``floor * max|reference|`` are lifted to that
    magnitude with their phase kept, which bounds noise gain at nulls.
    """
    if not measured.geometry.matches(reference.geometry):
        raise GeometryMismatchError(
            f"measured {measured.geometry} and reference {reference.geometry} differ")
    ref = np.array(reference.samples)
    mag = np.abs(ref)
    peak = mag.max()
    if peak == 0:
        raise ValueError("reference sweep is identically zero")
    lo = floor * peak
    weak = mag < lo
    if np.any(weak):
        # angle() of an exact zero is 0, so empty bins get a real floor value
        ref[weak] = lo * np.exp(1j * np.angle(ref[weak]))
    return measured.replace(samples=measured.samples / ref)


def time_gate(cir: ImpulseResponse, t_start: float, t_stop: float) -> ImpulseResponse:
    """Zero every sample whose time falls outside ``[t_start, t_stop)``."""
    if not t_stop > t_start:
        raise ValueError(f"empty gate [{t_start}, {t_stop})")
    # index-space comparison with a small tolerance keeps exact grid points stable
    k = np.arange(cir.samples.size)
    lo = (t_start - cir.t0) / cir.sample_period - 1e-9
    hi = (t_stop - cir.t0) / cir.sample_period - 1e-9
    keep = (k >= lo) & (k < hi)
    return cir.replace(samples=np.where(keep, cir.samples, 0))


def normalize_peak(cir: ImpulseResponse) -> tuple[ImpulseResponse, float]:
    """Scale so the strongest sample has unit power.

    Returns the scaled response and the applied gain in dB; the original
    absolute level is ``power / 10**(gain_db / 10)``.
    """
    peak = float(np.max(cir.power()))
    if peak == 0:
        raise ValueError("cannot normalize an all-zero impulse response")
    gain_db = -10.0 * math.log10(peak)
    return cir.replace(samples=cir.samples / math.sqrt(peak)), gain_db


def gate_reference(reference: FrequencySweep, gate=REFERENCE_GATE) -> FrequencySweep:
    """Isolate the direct path of a free-space reference sweep by time gating."""
    cir = cfr_to_cir(reference, window="none")
    gated = time_gate(cir, *gate)
    return FrequencySweep(reference.geometry, np.fft.fft(gated.samples), reference.label)


def reference_correction(cir: ImpulseResponse, d0: float = REFERENCE_DISTANCE,
                         f_c: float | None = None) -> ImpulseResponse:
    """Restore the delay and free-space attenuation removed by the reference.

    Dividing by the reference sweep strips the time of flight and the
    free-space loss over ``d0``. The delay is put back by shifting ``t0``;
    when a carrier ``f_c`` is given, amplitudes are also scaled by the
    free-space amplitude gain ``c / (4 pi d0 f_c)``.
    """
    samples = cir.samples
    if f_c is not None:
        samples = samples * (SPEED_OF_LIGHT / (4.0 * math.pi * d0 * f_c))
    return cir.replace(samples=samples, t0=cir.t0 + d0 / SPEED_OF_LIGHT)


def average_sweeps(sweeps) -> FrequencySweep:
    """Sample-wise mean of repeated sweeps taken on one grid."""
    sweeps = list(sweeps)
    if not sweeps:
        raise ValueError("no sweeps to average")
    g = sweeps[0].geometry
    for s in sweeps[1:]:
        if not s.geometry.matches(g):
            raise GeometryMismatchError("cannot average sweeps with different grids")
    return FrequencySweep(g, np.mean([s.samples for s in sweeps], axis=0), sweeps[0].label)


def calibrated_cir(measured: FrequencySweep, reference: FrequencySweep | None = None,
                   window: str = "hann", floor: float = DEFAULT_FLOOR,
                   reference_gate=REFERENCE_GATE) -> ImpulseResponse:
    """Full sounding chain: gate reference, inverse filter, window, IFFT."""
    h = measured
    if reference is not None:
        ref = gate_reference(reference, reference_gate) if reference_gate else reference
        h = inverse_filter(measured, ref, floor)
    return cfr_to_cir(h, window)


def nmse_db(estimate, truth) -> float:
    """Normalized mean-square error ``10 log10(|e - t|^2 / |t|^2)``."""
    e = np.asarray(estimate)
    t = np.asarray(truth)
    return 10.0 * math.log10(np.sum(np.abs(e - t) ** 2) / np.sum(np.abs(t) ** 2))
