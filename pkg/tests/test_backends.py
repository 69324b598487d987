import numpy as np
import pytest

from capsel import backends
from capsel.errors import ConfigurationError


def test_numpy_always_available():
    assert "numpy" in backends.available()


def test_resolve_explicit_names():
    assert backends.resolve_name("numpy") == "numpy"
    with pytest.raises(ConfigurationError):
        backends.resolve_name("fortran")


def test_env_flag_controls_resolution(monkeypatch):
    monkeypatch.setenv(backends.ENV_VAR, "numpy")
    assert backends.resolve_name() == "numpy"
    monkeypatch.setenv(backends.ENV_VAR, "auto")
    assert backends.resolve_name() in backends.available()
    monkeypatch.setenv(backends.ENV_VAR, "hdl")
    with pytest.raises(ConfigurationError):
        backends.resolve_name()


def test_set_active_switches_module():
    previous = backends.active_name()
    try:
        assert backends.set_active("numpy") == "numpy"
        assert backends.active().NAME == "numpy"
    finally:
        backends.set_active(previous)


@pytest.mark.skipif("numba" not in backends.available(), reason="numba not installed")
class TestBackendEquivalence:
    """Both kernel sets must agree to float64 summation-order precision."""

    def setup_method(self):
        self.np_k = backends.load("numpy")
        self.nb_k = backends.load("numba")
        self.rng = np.random.default_rng(99)

    def test_conv_forward_and_vjp(self):
        for _ in range(10):
            r = self.rng
            cin, cout = int(r.integers(1, 5)), int(r.integers(1, 5))
            kh, kw = int(r.integers(1, 4)), int(r.integers(1, 4))
            sh, sw = int(r.integers(1, 3)), int(r.integers(1, 3))
            hp = int(r.integers(kh, kh + 8))
            wp = int(r.integers(kw, kw + 8))
            ho, wo = (hp - kh) // sh + 1, (wp - kw) // sw + 1
            xp = r.standard_normal((int(r.integers(1, 4)), cin, hp, wp))
            w = r.standard_normal((cout, cin, kh, kw))
            b = r.standard_normal(cout)
            ya = self.np_k.conv2d_fwd(xp, w, b, sh, sw, ho, wo)
            yb = self.nb_k.conv2d_fwd(xp, w, b, sh, sw, ho, wo)
            np.testing.assert_allclose(ya, yb, rtol=1e-13, atol=1e-13)
            gy = r.standard_normal(ya.shape)
            ga = self.np_k.conv2d_input_vjp(gy, w, sh, sw, hp, wp)
            gb = self.nb_k.conv2d_input_vjp(gy, w, sh, sw, hp, wp)
            np.testing.assert_allclose(ga, gb, rtol=1e-13, atol=1e-13)

    def test_tconv_forward_and_vjp(self):
        for _ in range(10):
            r = self.rng
            cin, cout = int(r.integers(1, 5)), int(r.integers(1, 5))
            s = int(r.integers(1, 4))
            x = r.standard_normal((int(r.integers(1, 4)), cin,
                                   int(r.integers(1, 6)), int(r.integers(1, 6))))
            w = r.standard_normal((cin, cout, s, s))
            b = r.standard_normal(cout)
            ya = self.np_k.tconv2d_fwd(x, w, b)
            yb = self.nb_k.tconv2d_fwd(x, w, b)
            np.testing.assert_allclose(ya, yb, rtol=1e-13, atol=1e-13)
            gy = r.standard_normal(ya.shape)
            ga = self.np_k.tconv2d_input_vjp(gy, w)
            gb = self.nb_k.tconv2d_input_vjp(gy, w)
            np.testing.assert_allclose(ga, gb, rtol=1e-13, atol=1e-13)
