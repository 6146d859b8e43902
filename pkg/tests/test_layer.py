import io

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcan.layer import LayerParams, activate, activate_grad, decode, encode, init_params, read_layer, write_layer


def scalar_params(w, gain=1.0):
    m = np.array([[w]])
    return LayerParams(W_x=m, W_y=m, b_x=np.zeros(1), b_y=np.zeros(1), c_x=np.zeros(1), c_y=np.zeros(1),
                       gain=gain)


def test_activate_oracle_values():
    mpmath.mp.dps = 30
    assert activate(np.array(0.0), 1.0) == 0.0
    assert activate(np.array(1.0), 1.0) == pytest.approx(float(mpmath.tanh(1)), abs=1e-15)
    assert float(mpmath.tanh(1)) == pytest.approx(0.761594, abs=1e-6)
    # gain scales the argument
    assert activate(np.array(0.5), 2.0) == pytest.approx(float(mpmath.tanh(1)), abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(z=st.floats(-20, 20), gain=st.floats(0.1, 3))
def test_activate_odd_bounded_and_derivative(z, gain):
    s = activate(np.array(z), gain)
    assert activate(np.array(-z), gain) == -s
    assert -1.0 <= s <= 1.0
    if abs(gain * z) < 15:
        assert -1.0 < s < 1.0
    eps = 1e-6
    fd = (activate(np.array(z + eps), gain) - activate(np.array(z - eps), gain)) / (2 * eps)
    an = activate_grad(s, gain)
    assert abs(an - fd) <= 1e-8 * max(1.0, abs(an)) + 1e-9


def test_encode_scalar_oracle():
    p = scalar_params(1.0)
    assert encode(p, np.array([[0.5]]), "x")[0, 0] == pytest.approx(0.462117157, abs=1e-9)
    assert encode(p, np.array([[0.5]]), "x")[0, 0] == pytest.approx(float(mpmath.tanh(0.5)), abs=1e-15)


def test_decode_scalar_oracle():
    p = scalar_params(2.0)
    assert decode(p, np.array([[0.3]]), "y")[0, 0] == pytest.approx(0.537049567, abs=1e-9)


def test_zero_parameters_give_zero_maps():
    p = LayerParams(W_x=np.zeros((3, 4)), W_y=np.zeros((3, 4)), b_x=np.zeros(3), b_y=np.zeros(3),
                    c_x=np.zeros(4), c_y=np.zeros(4))
    x = np.random.default_rng(0).standard_normal((5, 4))
    np.testing.assert_array_equal(encode(p, x, "x"), 0.0)
    np.testing.assert_array_equal(decode(p, np.zeros((5, 3)), "y"), 0.0)


def test_batching_and_shapes():
    p = init_params(6, 4, 1.0, seed=3)
    x = np.random.default_rng(1).uniform(-1, 1, (7, 6))
    h = encode(p, x, "y")
    rows = np.vstack([encode(p, x[i:i + 1], "y") for i in range(7)])
    np.testing.assert_allclose(h, rows, atol=1e-15)
    assert decode(p, h, "y").shape == x.shape
    with pytest.raises(ValueError):
        encode(p, x[:, :5], "x")
    with pytest.raises(ValueError):
        decode(p, x, "x")


def test_views_use_their_own_weights():
    p = init_params(3, 2, 1.0, seed=0)
    x = np.ones((1, 3))
    assert not np.allclose(encode(p, x, "x"), encode(p, x, "y"))
    np.testing.assert_allclose(encode(p, x, "x"), np.tanh(x @ p.W_x.T + p.b_x))


def test_init_params():
    d, h = 40, 25
    a, b = init_params(d, h, 1.0, 5), init_params(d, h, 1.0, 5)
    np.testing.assert_array_equal(a.W_x, b.W_x)
    np.testing.assert_array_equal(a.W_y, b.W_y)
    r = np.sqrt(6.0 / (d + h))
    assert np.max(np.abs(a.W_x)) <= r and np.max(np.abs(a.W_y)) <= r
    assert not np.array_equal(a.W_x, a.W_y)
    assert not np.any(a.b_x) and not np.any(a.c_y)
    big = init_params(100, 100, 1.0, 9).W_x  # 10^4 entries
    r = np.sqrt(6.0 / 200)
    assert abs(big.mean()) <= 3 * r / np.sqrt(3 * 1e4)


def test_params_validation_and_flatten_roundtrip():
    p = init_params(4, 3, 1.5, 2)
    theta = p.flatten()
    assert theta.size == p.size == 2 * (3 * 4 + 3 + 4)
    q = LayerParams.unflatten(theta, 4, 3, 1.5)
    for name in ("W_x", "W_y", "b_x", "b_y", "c_x", "c_y"):
        np.testing.assert_array_equal(getattr(p, name), getattr(q, name))
    with pytest.raises(ValueError):
        LayerParams(W_x=np.zeros((3, 4)), W_y=np.zeros((3, 5)), b_x=np.zeros(3), b_y=np.zeros(3),
                    c_x=np.zeros(4), c_y=np.zeros(4))
    with pytest.raises(ValueError):
        LayerParams(W_x=np.full((1, 1), np.inf), W_y=np.zeros((1, 1)), b_x=np.zeros(1), b_y=np.zeros(1),
                    c_x=np.zeros(1), c_y=np.zeros(1))
    with pytest.raises(ValueError):
        LayerParams(W_x=np.zeros((1, 1)), W_y=np.zeros((1, 1)), b_x=np.zeros(1), b_y=np.zeros(1),
                    c_x=np.zeros(1), c_y=np.zeros(1), gain=0.0)


def test_layer_text_roundtrip():
    p = init_params(3, 2, 1.0, 4)
    buf = io.StringIO()
    write_layer(buf, p, 0)
    text = buf.getvalue()
    tags = [ln.split()[0] for ln in text.splitlines() if ln[0].isalpha()]
    assert tags == ["layer", "gain", "W_x", "b_x", "c_x", "W_y", "b_y", "c_y"]
    q = read_layer(iter(text.splitlines()), 0)
    np.testing.assert_array_equal(p.flatten(), q.flatten())
