import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from cabinet60.dsp import ImpulseResponse
from cabinet60.extraction import MultipathProfile
from cabinet60.ofdm import (BLOCK_CAP, DESIGN_A, DESIGN_B, ChannelTooLongError, DesignEnvelope,
                            OfdmConfig, StopRule, antenna_gain, ber_awgn_bpsk, ber_rayleigh_bpsk,
                            channel_taps, check_design, cp_from_channel, doppler,
                            es_n0_from_eb_n0, rate_and_latency, rayleigh_source, simulate_ber)
from cabinet60.synthesis import normalize_unit_power, preset, rng_stream, synthesize_cir

C = 299_792_458.0

# (row, N_cp, A: Gbps, A: us, B: Gbps, B: us)
RATE_TABLE = [
    ("simulated-1", 11, 4.096, 1.640, 4.101, 26.216),
    ("simulated-2", 4001, 2.756, 2.438, 3.980, 27.015),
    ("scenario-1", 3903, 2.778, 2.418, 3.983, 26.994),
    ("scenario-2", 5812, 2.399, 2.801, 3.927, 27.377),
    ("scenario-3", 5617, 2.433, 2.762, 3.933, 27.338),
]


class TestConfig:
    def test_derived_fields(self):
        cfg = OfdmConfig(8192, 5000, 6720)
        assert cfg.n_guard_total + cfg.n_user == cfg.n_fft
        assert cfg.symbol_period == 1 / 5e9
        assert 0 < cfg.kappa <= cfg.bits_per_symbol

    @pytest.mark.parametrize("kw", [dict(n_fft=8, n_cp=0, n_user=9), dict(n_fft=8, n_cp=-1, n_user=4),
                                    dict(n_fft=8, n_cp=0, n_user=0), dict(n_fft=8, n_cp=0, n_user=4,
                                                                          bandwidth=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            OfdmConfig(**kw)

    @pytest.mark.parametrize("n_fft,n_user", [(8, 8), (8, 5), (9, 4), (64, 1)])
    def test_guards_split_with_extra_at_high_edge(self, n_fft, n_user):
        cfg = OfdmConfig(n_fft, 0, n_user)
        bins = cfg.data_bins()
        assert len(set(bins.tolist())) == n_user
        # baseband frequency index of each used bin, ordered low to high
        f = np.sort(np.where(bins >= (n_fft + 1) // 2, bins - n_fft, bins))
        low_guard = f.min() - (-(n_fft // 2))
        high_guard = (n_fft - 1 - n_fft // 2) - f.max()
        assert low_guard + high_guard == n_fft - n_user
        assert high_guard - low_guard in (0, 1)


class TestRateLatency:
    @pytest.mark.parametrize("row", RATE_TABLE, ids=[r[0] for r in RATE_TABLE])
    def test_table(self, row):
        _, ncp, ra, la, rb, lb = row
        for design, rate, lat in ((DESIGN_A, ra, la), (DESIGN_B, rb, lb)):
            r, t, _ = rate_and_latency(OfdmConfig(n_cp=ncp, **design))
            assert abs(r / 1e9 - rate) <= 0.002
            assert abs(t * 1e6 - lat) <= 0.002

    def test_prose_example(self):
        r, t, k = rate_and_latency(OfdmConfig(8192, 5000, 6720))
        assert abs(r / 1e9 - 2.547) <= 0.002 and abs(t * 1e6 - 2.638) <= 0.002
        assert round(t * 1e6, 2) == 2.64

    def test_exact_identity(self):
        cfg = OfdmConfig(8192, 3903, 6720, 2)
        rate, lat, kappa = rate_and_latency(cfg, exact=True)
        assert rate * lat == 2 * 6720
        assert kappa == Fraction(2 * 6720, 8192 + 3903)

    def test_zero_overhead(self):
        r, _, k = rate_and_latency(OfdmConfig(1024, 0, 1024, 2))
        assert k == 2 and r == 2 * 5e9

    def test_kappa_grows_with_n(self):
        ks = [OfdmConfig(2 ** m, 3903, int(2 ** m * 0.8203125)).kappa for m in range(13, 19)]
        assert all(a < b for a, b in zip(ks, ks[1:])) and ks[-1] < 1


class TestDesignCheck:
    def test_cp_boundary(self):
        chk = check_design(OfdmConfig(8192, 5000, 6720), DesignEnvelope(1e-6))
        assert chk.cp_ok and chk.cp_margin_s == pytest.approx(0, abs=1e-18)

    def test_cp_violation(self):
        assert not check_design(OfdmConfig(8192, 4999, 6720), DesignEnvelope(1e-6)).cp_ok

    def test_doppler_product_at_block_cap(self):
        cfg = OfdmConfig(245_000, 5000, 200_000)
        chk = check_design(cfg, DesignEnvelope(1e-6, 2e3))
        assert chk.doppler_product == pytest.approx(2.5e5 * 2e3 * 0.2e-9, rel=1e-12)
        assert chk.doppler_margin == pytest.approx(1.0) and chk.doppler_ok

    def test_doppler_per_symbol(self):
        assert doppler(10, 60e9) / 5e9 == pytest.approx(0.4e-6, rel=0.001)

    def test_doppler_violation(self):
        chk = check_design(OfdmConfig(2 ** 17, 5000, 107520), DesignEnvelope(1e-6, 1e5))
        assert not chk.doppler_ok and not chk.ok

    def test_zero_channel_and_speed(self):
        chk = check_design(OfdmConfig(8192, 0, 6720), DesignEnvelope(0.0, 0.0))
        assert chk.ok and chk.doppler_margin == math.inf and chk.flat_fading_margin == math.inf

    def test_flat_fading_soft(self):
        chk = check_design(OfdmConfig(8192, 5000, 6720), DesignEnvelope(1e-6))
        assert chk.flat_fading_margin == pytest.approx(8192 / 7500)
        assert chk.flat_fading_ok and "flat_fading" in chk.soft


class TestPhysics:
    def test_doppler(self):
        assert doppler(10, 60e9) == pytest.approx(10 * 60e9 / C)
        assert doppler(10, 60e9) == pytest.approx(2e3, rel=0.001)
        assert doppler(0, 60e9) == 0
        assert doppler(5, 60e9) == pytest.approx(doppler(10, 60e9) / 2)
        with pytest.raises(ValueError):
            doppler(-1, 60e9)

    def test_antenna_gain(self):
        assert antenna_gain(C ** 2 / (4 * math.pi * 60e9 ** 2), 60e9) == pytest.approx(1.0)
        g = 10 * math.log10(antenna_gain(3.759e-3 * 1.880e-3, 60e9))
        assert g == pytest.approx(5.5, abs=0.05)
        eta = 10 ** (4.6 / 10) / antenna_gain(3.759e-3 * 1.880e-3, 60e9)
        assert eta == pytest.approx(0.81, abs=0.01)
        assert 10 * math.log10(antenna_gain(3.759e-3 * 1.880e-3, 60e9, eta)) == pytest.approx(4.6)

    def test_es_n0(self):
        cfg = OfdmConfig(8192, 5000, 6720)
        assert es_n0_from_eb_n0(10, cfg) == pytest.approx(10 + 10 * math.log10(6720 / 13192))
        assert es_n0_from_eb_n0(10, cfg) == pytest.approx(7.071, abs=5e-4)
        assert es_n0_from_eb_n0(10, OfdmConfig(64, 0, 64)) == 10
        assert es_n0_from_eb_n0(13, cfg) - es_n0_from_eb_n0(10, cfg) == pytest.approx(3)


class TestCpSizing:
    def test_one_microsecond(self):
        assert cp_from_channel(MultipathProfile([0, 1e-6], [1, 0.01]), 0.2e-9) == 5000

    def test_single_path(self):
        assert cp_from_channel(MultipathProfile([0.0], [1.0]), 0.2e-9) == 0

    def test_scenario_one(self):
        assert cp_from_channel(MultipathProfile([0, 780.6e-9], [1, 0.01]), 0.2e-9) == 3903

    def test_margin(self):
        assert cp_from_channel(MultipathProfile([0, 1e-6], [1, 0.01]), 0.2e-9, 0.1) == 5500


def closed_form_sigma(p, n):
    return math.sqrt(p * (1 - p) / n)


class TestSimulation:
    def test_awgn_oracle(self):
        cfg = OfdmConfig(1024, 0, 1024)
        curve = simulate_ber(cfg, [1.0], [0.0, 4.0], seed=3)
        for p in curve.points:
            ref = float(ber_awgn_bpsk(p.eb_n0))
            assert p.bits >= 10 ** 6
            assert abs(p.ber - ref) < 3 * closed_form_sigma(ref, p.bits)

    def test_q_of_sqrt2(self):
        assert float(ber_awgn_bpsk(0.0)) == pytest.approx(stats.norm.sf(math.sqrt(2)), rel=1e-12)
        assert float(ber_awgn_bpsk(0.0)) == pytest.approx(0.0786, abs=1e-4)

    def test_rayleigh_closed_form(self):
        assert float(ber_rayleigh_bpsk(10.0)) == pytest.approx(0.5 * (1 - math.sqrt(10 / 11)))
        assert float(ber_rayleigh_bpsk(10.0)) == pytest.approx(0.0233, abs=1e-4)

    def test_noiseless_multipath_is_error_free(self):
        taps = rng_stream(4, "taps").standard_normal(40) + 0j
        curve = simulate_ber(OfdmConfig(256, 39, 200), taps, [math.inf],
                             StopRule(100_000, 0, 100_000), seed=0)
        assert curve.points[0].errors == 0 and curve.points[0].bits >= 100_000

    def test_channel_longer_than_prefix(self):
        with pytest.raises(ChannelTooLongError, match="41 samples.*39 samples"):
            simulate_ber(OfdmConfig(256, 39, 200), np.ones(41), [0.0])

    def test_per_block_channel_too_long(self):
        with pytest.raises(ChannelTooLongError):
            simulate_ber(OfdmConfig(64, 0, 64), rayleigh_source(3), [0.0], StopRule(64, 0, 64))

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            simulate_ber(OfdmConfig(64, 0, 64), [1.0], [])

    def test_deterministic(self):
        cfg = OfdmConfig(128, 8, 100)
        taps = np.array([1.0, 0.3j, -0.2])
        a = simulate_ber(cfg, taps, [2.0, 6.0], StopRule(20_000, 10, 50_000), seed=9)
        b = simulate_ber(cfg, taps, [2.0, 6.0], StopRule(20_000, 10, 50_000), seed=9)
        assert a.points == b.points
        c = simulate_ber(cfg, taps, [2.0, 6.0], StopRule(20_000, 10, 50_000), seed=10)
        assert a.points != c.points

    def test_cap_flag(self):
        curve = simulate_ber(OfdmConfig(64, 0, 64), [1.0], [30.0], StopRule(64, 100, 640), seed=0)
        p = curve.points[0]
        assert p.capped and p.bits == 640 and p.errors == 0

    def test_qpsk_awgn(self):
        cfg = OfdmConfig(512, 0, 512, bits_per_symbol=2)
        p = simulate_ber(cfg, [1.0], [4.0], StopRule(200_000, 10, 200_000), seed=2).points[0]
        ref = float(ber_awgn_bpsk(4.0))
        assert abs(p.ber - ref) < 3 * closed_form_sigma(ref, p.bits)

    def test_channel_inputs(self):
        ts = 0.2e-9
        cir = ImpulseResponse(ts, [0, 2.0, 0, 1j, 0, 0])
        np.testing.assert_allclose(channel_taps(cir, ts), np.array([0, 2, 0, 1j]) / math.sqrt(5))
        coarse = channel_taps(ImpulseResponse(0.1e-9, [1, 0, 0, 1, 0]), ts)
        np.testing.assert_allclose(coarse, np.array([1, 0, 1]) / math.sqrt(2))
        prof = MultipathProfile([0, 0.4e-9], [1.0, 1.0])
        np.testing.assert_allclose(channel_taps(prof, ts), np.array([1, 0, 1]) / math.sqrt(2))
        with pytest.raises(ValueError):
            channel_taps(np.zeros(3), ts)

    def test_realization_channel(self):
        r = normalize_unit_power(synthesize_cir(preset("sc1"), rng=rng_stream(5, "ber")))
        taps = channel_taps(r, 0.2e-9)
        cfg = OfdmConfig(8192, taps.size - 1, 6720)
        curve = simulate_ber(cfg, r, [math.inf], StopRule(100_000, 0, 100_000))
        assert curve.points[0].errors == 0
        assert curve.channel_label == "sc1"


def test_block_cap_and_presets():
    assert BLOCK_CAP == 250_000
    assert DESIGN_A == {"n_fft": 8192, "n_user": 6720}
    assert DESIGN_B == {"n_fft": 131072, "n_user": 107520}
