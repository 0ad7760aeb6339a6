"""OFDM design arithmetic and uncoded OFDM bit-error-rate simulation.

The design helpers cover cyclic-prefix sizing, bandwidth efficiency, data
rate, block latency, Doppler and the three block-size constraints. The
simulator runs BPSK (or Gray QPSK) OFDM blocks through a channel with a
cyclic prefix, AWGN and perfect-CSI one-tap zero-forcing equalization.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sp_fft
from scipy.special import erfc

from .dsp import SPEED_OF_LIGHT, ImpulseResponse
from .extraction import MultipathProfile
from .synthesis import Realization, _bin, rng_stream

DOPPLER_LIMIT = 0.1
FLAT_FADING_FACTOR = 1.5
BLOCK_CAP = 250_000


class ChannelTooLongError(ValueError):
    """The channel memory exceeds the cyclic prefix."""


@dataclass(frozen=True)
class OfdmConfig:
    n_fft: int
    n_cp: int
    n_user: int
    bits_per_symbol: int = 1
    bandwidth: float = 5e9

    def __post_init__(self):
        if self.n_fft < 1 or self.n_cp < 0:
            raise ValueError("n_fft must be >= 1 and n_cp >= 0")
        if not 0 < self.n_user <= self.n_fft:
            raise ValueError(f"n_user must be in 1..n_fft, got {self.n_user}")
        if self.bits_per_symbol < 1:
            raise ValueError("bits_per_symbol must be >= 1")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    @property
    def n_guard_total(self) -> int:
        return self.n_fft - self.n_user

    @property
    def symbol_period(self) -> float:
        return 1.0 / self.bandwidth

    @property
    def block_length(self) -> int:
        return self.n_fft + self.n_cp

    @property
    def kappa(self) -> float:
        return self.bits_per_symbol * self.n_user / self.block_length

    def data_bins(self) -> np.ndarray:
        """FFT bin indices of the user subcarriers.

        Guards are split over the two band edges (the odd one goes to the
        upper edge); bins are ordered from the lowest to the highest
        frequency of the baseband block.
        """
        low = self.n_guard_total // 2
        centred = np.arange(low, low + self.n_user) - self.n_fft // 2
        return np.mod(centred, self.n_fft)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(n_guard_total=self.n_guard_total, symbol_period=self.symbol_period)
        return d


#: Low-latency (A) and high-rate (B) designs, without a cyclic prefix chosen yet.
DESIGN_A = dict(n_fft=2 ** 13, n_user=6720)
DESIGN_B = dict(n_fft=2 ** 17, n_user=107_520)


@dataclass(frozen=True)
class DesignEnvelope:
    t_max: float
    doppler: float = 0.0
    speed: float | None = None
    carrier: float = 60e9

    @classmethod
    def from_speed(cls, t_max: float, speed: float, carrier: float = 60e9) -> "DesignEnvelope":
        return cls(t_max, doppler_shift(speed, carrier), speed, carrier)


@dataclass(frozen=True)
class DesignCheck:
    cp_margin_s: float
    cp_ok: bool
    doppler_product: float
    doppler_margin: float
    doppler_ok: bool
    flat_fading_margin: float
    flat_fading_ok: bool
    soft: tuple[str, ...] = ("flat_fading",)

    @property
    def ok(self) -> bool:
        return self.cp_ok and self.doppler_ok and self.flat_fading_ok

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "soft"}


def check_design(cfg: OfdmConfig, env: DesignEnvelope, doppler_limit: float = DOPPLER_LIMIT,
                 flat_factor: float = FLAT_FADING_FACTOR) -> DesignCheck:
    """Margins of the cyclic-prefix, coherence-time and flat-fading constraints.

    ``cp_margin_s`` is ``N_cp T_s - t_max`` (zero on the boundary, which
    passes). The other two margins are ratios of the allowed to the actual
    value and pass when >= 1.
    """
    ts = cfg.symbol_period
    cp_margin = cfg.n_cp * ts - env.t_max
    cp_ok = cp_margin >= -1e-9 * max(env.t_max, ts)
    prod = cfg.block_length * env.doppler * ts
    dop_margin = math.inf if prod == 0 else doppler_limit / prod
    need = flat_factor * cfg.bandwidth * env.t_max
    flat_margin = math.inf if need == 0 else cfg.n_fft / need
    # boundaries pass, up to floating-point rounding of the products
    return DesignCheck(cp_margin, bool(cp_ok), prod, dop_margin, dop_margin >= 1.0 - 1e-9,
                       flat_margin, flat_margin >= 1.0 - 1e-9)


def rate_and_latency(cfg: OfdmConfig, exact: bool = False):
    """``(data rate [bit/s], block latency [s], efficiency kappa)``.

    With ``exact=True`` the three values are ``Fraction`` objects.
    """
    bw = Fraction(cfg.bandwidth)
    blk = cfg.block_length
    kappa = Fraction(cfg.bits_per_symbol * cfg.n_user, blk)
    rate, latency = kappa * bw, blk / bw
    if exact:
        return rate, latency, kappa
    return float(rate), float(latency), float(kappa)


def doppler_shift(speed: float, carrier: float) -> float:
    if speed < 0:
        raise ValueError("speed must be non-negative")
    return speed * carrier / SPEED_OF_LIGHT


doppler = doppler_shift


def antenna_gain(effective_aperture: float, carrier: float, efficiency: float = 1.0) -> float:
    """Linear aperture-antenna gain ``4 pi eta A f_c^2 / c^2``."""
    if not (effective_aperture > 0 and carrier > 0 and efficiency > 0):
        raise ValueError("aperture, carrier and efficiency must be positive")
    return 4 * math.pi * efficiency * effective_aperture * carrier ** 2 / SPEED_OF_LIGHT ** 2


def db10(x: float) -> float:
    return 10 * math.log10(x)


def es_n0_from_eb_n0(eb_n0_db: float, cfg: OfdmConfig) -> float:
    return eb_n0_db + db10(cfg.kappa)


def cp_from_channel(profile: MultipathProfile, symbol_period: float, margin: float = 0.0) -> int:
    """Smallest prefix (in samples) covering the excess delay of the last path.

    The excess delay is measured from the first path and stretched by
    ``1 + margin``.
    """
    if len(profile) == 0:
        raise ValueError("empty profile")
    t_last = float(profile.times[-1] - profile.times[0])
    # rounding guards against 780.6e-9 / 0.2e-9 landing a hair above 3903
    return int(math.ceil(round((1 + margin) * t_last / symbol_period, 6)))


def cp_from_delay(t_max: float, symbol_period: float, margin: float = 0.0) -> int:
    return int(math.ceil(round((1 + margin) * t_max / symbol_period, 6)))


# --- reference curves --------------------------------------------------------

def q_function(x):
    return 0.5 * erfc(np.asarray(x) / math.sqrt(2))


def ber_awgn_bpsk(eb_n0_db):
    g = 10 ** (np.asarray(eb_n0_db, dtype=float) / 10)
    return q_function(np.sqrt(2 * g))


def ber_rayleigh_bpsk(eb_n0_db):
    g = 10 ** (np.asarray(eb_n0_db, dtype=float) / 10)
    return 0.5 * (1 - np.sqrt(g / (1 + g)))


# --- simulation ---------------------------------------------------------------

@dataclass(frozen=True)
class BerPoint:
    eb_n0: float
    ber: float
    bits: int
    errors: int
    capped: bool = False
    block_ber_std: float = math.nan


@dataclass
class BerCurve:
    points: list[BerPoint]
    config: OfdmConfig
    channel_label: str
    seed: int
    extras: dict = field(default_factory=dict)

    def rows(self):
        return [(p.eb_n0, p.ber, p.bits, p.errors) for p in self.points]


@dataclass(frozen=True)
class StopRule:
    min_bits: int = 1_000_000
    min_errors: int = 100
    max_bits: int = 100_000_000


def channel_taps(channel, symbol_period: float) -> np.ndarray:
    """Unit-energy tap vector of a channel on the ``symbol_period`` grid.

    Accepts a ``Realization``, an ``ImpulseResponse``, a ``MultipathProfile``
    (zero-phase amplitudes) or a raw tap array already on the grid. Grids
    that differ are resampled by nearest-bin coherent accumulation;
    trailing zero taps are dropped.
    """
    if isinstance(channel, Realization):
        channel = channel.cir
    if isinstance(channel, ImpulseResponse):
        if math.isclose(channel.sample_period, symbol_period, rel_tol=1e-9) and channel.t0 == 0:
            taps = np.array(channel.samples)
        else:
            times = channel.times()
            taps = _bin(times - times[0], channel.samples, symbol_period)
    elif isinstance(channel, MultipathProfile):
        taps = _bin(channel.times - channel.times[0], np.sqrt(channel.powers), symbol_period)
    else:
        taps = np.asarray(channel, dtype=complex)
    nz = np.flatnonzero(taps)
    if nz.size == 0:
        raise ValueError("channel has no energy")
    taps = taps[: nz[-1] + 1]
    return taps / math.sqrt(np.sum(np.abs(taps) ** 2))


def _modulate(bits, bps):
    if bps == 1:
        return 1.0 - 2.0 * bits
    if bps == 2:
        return ((1.0 - 2.0 * bits[..., 0::2]) + 1j * (1.0 - 2.0 * bits[..., 1::2])) / math.sqrt(2)
    raise NotImplementedError("only BPSK (1 bit) and Gray QPSK (2 bits) are implemented")


def _demodulate(sym, bps):
    if bps == 1:
        return (sym.real < 0).astype(np.int8)
    out = np.empty(sym.shape[:-1] + (2 * sym.shape[-1],), dtype=np.int8)
    out[..., 0::2] = sym.real < 0
    out[..., 1::2] = sym.imag < 0
    return out


def _run_blocks(cfg: OfdmConfig, taps: np.ndarray | None, draw: Callable | None,
                n_blocks: int, noise_var: float, rng: np.random.Generator):
    """Transmit ``n_blocks`` OFDM blocks; return per-block error counts."""
    n, ncp, nu, bps = cfg.n_fft, cfg.n_cp, cfg.n_user, cfg.bits_per_symbol
    bins = cfg.data_bins()
    bits = rng.integers(0, 2, size=(n_blocks, nu * bps), dtype=np.int8)
    X = np.zeros((n_blocks, n), dtype=complex)
    X[:, bins] = _modulate(bits, bps)
    x = sp_fft.ifft(X, axis=1, norm="ortho")
    tx = np.concatenate([x[:, n - ncp:], x], axis=1) if ncp else x

    if draw is not None:
        h = np.stack([draw(rng) for _ in range(n_blocks)])
    else:
        h = np.broadcast_to(taps, (n_blocks, taps.size))
    L = h.shape[1]
    if L > ncp + 1:
        raise ChannelTooLongError(f"channel spans {L} samples but the cyclic prefix is {ncp} samples")
    nconv = sp_fft.next_fast_len(n + ncp + L - 1)
    rx = sp_fft.ifft(sp_fft.fft(tx, nconv, axis=1) * sp_fft.fft(h, nconv, axis=1), axis=1)[:, : n + ncp]
    if noise_var > 0:
        rx = rx + math.sqrt(noise_var / 2) * (rng.standard_normal(rx.shape) + 1j * rng.standard_normal(rx.shape))
    Y = sp_fft.fft(rx[:, ncp:], axis=1, norm="ortho")
    H = sp_fft.fft(h, n, axis=1)
    Z = Y[:, bins] / H[:, bins]
    return np.count_nonzero(_demodulate(Z, bps) != bits, axis=1)


def simulate_ber(cfg: OfdmConfig, channel, eb_n0_grid: Sequence[float],
                 stop: StopRule | tuple = StopRule(), seed: int = 0,
                 channel_label: str | None = None, batch_bits: int = 1 << 20) -> BerCurve:
    """Monte Carlo BER of uncoded OFDM with perfect-CSI zero-forcing.

    ``channel`` is a fixed channel (see ``channel_taps``) or a callable
    ``rng -> taps`` drawing a fresh unit-power channel per block. Noise is
    set from ``Es/N0 = Eb/N0 * kappa`` relative to the mean transmitted
    sample power ``N_u / N``; ``inf`` in the grid means noiseless. Each
    (grid point, batch) pair has its own random stream derived from
    ``seed``, so results do not depend on evaluation order.
    """
    grid = list(eb_n0_grid)
    if not grid:
        raise ValueError("empty Eb/N0 grid")
    if isinstance(stop, tuple):
        stop = StopRule(*stop)
    ts = cfg.symbol_period
    draw = channel if callable(channel) else None
    taps = None if draw else channel_taps(channel, ts)
    if taps is not None and taps.size > cfg.n_cp + 1:
        raise ChannelTooLongError(
            f"channel spans {taps.size} samples but the cyclic prefix is {cfg.n_cp} samples")
    if channel_label is None:
        channel_label = getattr(channel, "model_label", None) or getattr(channel, "label", "") or "channel"

    bits_per_block = cfg.n_user * cfg.bits_per_symbol
    blocks_per_batch = max(1, batch_bits // bits_per_block)
    signal_power = cfg.n_user / cfg.n_fft
    points = []
    for ip, ebn0 in enumerate(grid):
        if math.isinf(ebn0) and ebn0 > 0:
            noise_var = 0.0
        else:
            noise_var = signal_power / 10 ** (es_n0_from_eb_n0(ebn0, cfg) / 10)
        bits = errors = 0
        per_block = []
        ib = 0
        while True:
            remaining = stop.max_bits - bits
            nb = min(blocks_per_batch, max(1, -(-remaining // bits_per_block)))
            errs = _run_blocks(cfg, taps, draw, nb, noise_var, rng_stream(seed, ip, ib))
            per_block.append(errs)
            bits += nb * bits_per_block
            errors += int(errs.sum())
            ib += 1
            if bits >= stop.min_bits and errors >= stop.min_errors:
                capped = False
                break
            if bits >= stop.max_bits:
                capped = True
                break
        blk = np.concatenate(per_block) / bits_per_block
        std = float(blk.std(ddof=1) / math.sqrt(blk.size)) if blk.size > 1 else math.nan
        points.append(BerPoint(float(ebn0), errors / bits, bits, errors, capped, std))
    return BerCurve(points, cfg, channel_label, seed)


def rayleigh_source(n_taps: int) -> Callable[[np.random.Generator], np.ndarray]:
    """Per-block equal-power Rayleigh TDL draw (unit expected energy)."""
    def draw(rng):
        g = rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)
        return g * math.sqrt(0.5 / n_taps)
    draw.label = f"rayleigh-{n_taps}"
    return draw
