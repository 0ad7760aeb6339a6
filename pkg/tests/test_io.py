import json
import math

import numpy as np
import pytest

from cabinet60 import io as fio
from cabinet60.dsp import FrequencySweep, ImpulseResponse, sweep_geometry
from cabinet60.extraction import MultipathProfile
from cabinet60.ofdm import BerCurve, BerPoint, OfdmConfig


def test_sweep_round_trip(tmp_path, rng):
    g = sweep_geometry(57e9, 62e9, 101)
    s = FrequencySweep(g, rng.standard_normal(101) + 1j * rng.standard_normal(101))
    path = fio.write_sweep(tmp_path / "s.csv", s)
    back = fio.read_sweep(path)
    assert back.geometry.matches(g)
    np.testing.assert_array_equal(back.samples, s.samples)
    assert path.read_text().splitlines()[0] == "freq_hz,re,im"


def test_cir_and_profile_round_trip(tmp_path):
    cir = ImpulseResponse(0.2e-9, [1, 0.5j, -0.25], t0=1e-9)
    back = fio.read_cir(fio.write_cir(tmp_path / "c.csv", cir))
    assert back.sample_period == pytest.approx(0.2e-9, rel=1e-12)
    assert back.t0 == 1e-9
    np.testing.assert_array_equal(back.samples, cir.samples)
    prof = MultipathProfile([0, 1e-9, 5e-9], [1, 0.1, 0.01])
    pb = fio.read_profile(fio.write_profile(tmp_path / "p.csv", prof))
    np.testing.assert_array_equal(pb.times, prof.times)
    np.testing.assert_array_equal(pb.powers, prof.powers)


def test_single_sample_cir(tmp_path):
    path = fio.write_cir(tmp_path / "one.csv", ImpulseResponse(1e-9, [1.0]))
    with pytest.raises(fio.FormatError):
        fio.read_cir(path)
    assert len(fio.read_cir(path, sample_period=1e-9)) == 1


@pytest.mark.parametrize("body,line,what", [
    ("freq_hz,re,im\n1,0,0\n2,0,0\n2,0,0\n", 4, "ascending"),
    ("freq_hz,re,im\n1,0,0\n2,0,0\n3.5,0,0\n", 4, "spacing"),
    ("freq_hz,re,im\n1,0,0\n2,x,0\n", 3, "non-numeric"),
    ("freq_hz,re,im\n1,0,0\n2,0\n", 3, "fields"),
    ("f,re,im\n1,0,0\n", 1, "header"),
])
def test_sweep_errors_carry_line(tmp_path, body, line, what):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(fio.FormatError) as exc:
        fio.read_sweep(p)
    assert exc.value.line == line and what in str(exc.value)
    assert f"bad.csv:{line}" in str(exc.value)


def test_spacing_tolerance(tmp_path):
    p = tmp_path / "ok.csv"
    p.write_text("freq_hz,re,im\n1000000,1,0\n2000000.0000001,1,0\n3000000,1,0\n")
    assert fio.read_sweep(p).geometry.n_points == 3


def test_json_infinity_and_nan(tmp_path):
    path = fio.write_json(tmp_path / "x.json", {"a": math.inf, "b": math.nan, "c": np.float64(2)})
    d = json.loads(path.read_text())
    assert d == {"a": math.inf, "b": None, "c": 2.0}


def test_sidecar_path():
    assert fio.sidecar_path("run/x_0001.cir.csv").name == "x_0001.json"
    assert fio.sidecar_path("run/x_0001.profile.csv").name == "x_0001.json"
    assert fio.sidecar_path("a.csv").name == "a.json"


def test_ber_csv(tmp_path):
    curve = BerCurve([BerPoint(0.0, 0.1, 1000, 100), BerPoint(2.0, 0.05, 2000, 100)],
                     OfdmConfig(64, 0, 64), "awgn", 0)
    path = fio.write_ber(tmp_path / "b.csv", curve, {"awgn_theory": np.array([0.07, 0.03])})
    assert path.read_text().splitlines()[0] == "ebn0_db,ber,bits,errors,awgn_theory"
    assert fio.read_ber(path) == [(0.0, 0.1, 1000, 100), (2.0, 0.05, 2000, 100)]


def test_atomic_write_leaves_no_temp(tmp_path):
    fio.atomic_write(tmp_path / "sub" / "f.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]
