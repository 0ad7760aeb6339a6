import math

import numpy as np
import pytest

from cabinet60 import _backend
from cabinet60.extraction import mixture_loglik


def test_backend_selected():
    assert _backend.BACKEND in ("cython", "python")
    assert _backend.kernels in (_backend.compiled_kernels, _backend.python_kernels)


def em_reference(x, b, l1, l2):
    """Textbook E and M steps written out with explicit responsibilities."""
    f1 = b * l1 * np.exp(-l1 * x)
    f2 = (1 - b) * l2 * np.exp(-l2 * x)
    r1 = f1 / (f1 + f2)
    r2 = 1 - r1
    return r1.mean(), r1.sum() / (r1 @ x), r2.sum() / (r2 @ x)


class TestEmStep:
    def test_matches_reference(self, kernels, rng):
        x = rng.exponential(1.0, 5000)
        nb, n1, n2, ll = kernels.em_exp_mixture_step(x, 0.2, 0.3, 1.4)
        rb, r1, r2 = em_reference(x, 0.2, 0.3, 1.4)
        assert (nb, n1, n2) == pytest.approx((rb, r1, r2), rel=1e-12)
        assert ll == pytest.approx(mixture_loglik(x, 0.3, 1.4, 0.2), rel=1e-12)

    def test_extreme_intervals_stay_finite(self, kernels):
        x = np.array([1e-6, 0.5, 3000.0, 5000.0])
        nb, n1, n2, ll = kernels.em_exp_mixture_step(x, 0.01, 0.001, 5.0)
        assert all(math.isfinite(v) for v in (nb, n1, n2, ll))

    def test_degenerate_weight(self, kernels, rng):
        x = rng.exponential(1.0, 100)
        nb, n1, n2, ll = kernels.em_exp_mixture_step(x, 0.0, 0.3, 1.0)
        assert nb == 0 and n1 == 0.3
        assert n2 == pytest.approx(1 / x.mean())
        assert ll == pytest.approx(np.sum(np.log(1.0) - x))

    def test_likelihood_never_decreases(self, kernels, rng):
        x = np.concatenate([rng.exponential(10, 200), rng.exponential(0.8, 4000)])
        state = (0.5, 0.5, 2.0)
        last = -math.inf
        for _ in range(50):
            nb, n1, n2, ll = kernels.em_exp_mixture_step(x, *state)
            assert ll >= last - 1e-9 * abs(ll)
            last, state = ll, (nb, n1, n2)

    def test_backends_agree(self, rng):
        if _backend.compiled_kernels is None:
            pytest.skip("compiled kernels not built")
        x = rng.exponential(1.0, 10_000)
        a = _backend.compiled_kernels.em_exp_mixture_step(x, 0.1, 0.2, 1.2)
        b = _backend.python_kernels.em_exp_mixture_step(x, 0.1, 0.2, 1.2)
        assert a == pytest.approx(b, rel=1e-11)


class TestLocalMaxima:
    def test_basic(self, kernels):
        p = np.array([0.5, 0.1, 0.9, 0.9, 0.2, 0.7, 0.1, 1.0])
        assert kernels.strict_local_maxima(p, 0.0).tolist() == [0, 5, 7]

    def test_floor(self, kernels):
        p = np.array([0.1, 1.0, 0.1, 0.3, 0.1])
        assert kernels.strict_local_maxima(p, 0.5).tolist() == [1]
        assert kernels.strict_local_maxima(p, 0.3).tolist() == [1, 3]

    def test_short(self, kernels):
        assert kernels.strict_local_maxima(np.array([2.0]), 0.0).tolist() == [0]
        assert kernels.strict_local_maxima(np.array([1.0, 1.0]), 0.0).tolist() == []

    def test_backends_agree(self, rng):
        if _backend.compiled_kernels is None:
            pytest.skip("compiled kernels not built")
        p = rng.exponential(1.0, 50_000)
        np.testing.assert_array_equal(_backend.compiled_kernels.strict_local_maxima(p, 0.5),
                                      _backend.python_kernels.strict_local_maxima(p, 0.5))


class TestAccumulate:
    def test_coherent_sum(self, kernels):
        idx = np.array([0, 2, 2, 5, -1, 9], dtype=np.int64)
        vals = np.array([1, 1j, 2, 3, 100, 100], dtype=complex)
        out = kernels.accumulate_bins(idx, vals, 6)
        np.testing.assert_array_equal(out, [1, 0, 2 + 1j, 0, 0, 3])

    def test_empty(self, kernels):
        out = kernels.accumulate_bins(np.empty(0, np.int64), np.empty(0, complex), 3)
        np.testing.assert_array_equal(out, np.zeros(3))
