import numpy as np
import pytest

from staged_pbr.core import dual
from staged_pbr.core.dual import Dual


def _var(value, slot=0):
    return Dual.variable(np.asarray(value, dtype=float), slot)


def test_variable_seeds_one_slot():
    x = Dual.variable(np.array([1.0, 2.0]), "r")
    assert x.grad.shape == (2, dual.WIDTH)
    assert (x.grad[:, dual.INDEX["r"]] == 1.0).all()
    assert x.grad.sum() == 2.0


@pytest.mark.parametrize(
    "fn, derivative",
    [
        (lambda x: x * x, lambda v: 2 * v),
        (lambda x: 3.0 / x, lambda v: -3.0 / v**2),
        (lambda x: x / (1.0 + x), lambda v: 1.0 / (1.0 + v) ** 2),
        (lambda x: (1.0 - x) ** 5, lambda v: -5 * (1.0 - v) ** 4),
        (lambda x: 2.0 - x, lambda v: -np.ones_like(v)),
        (lambda x: dual.sqrt(x), lambda v: 0.5 / np.sqrt(v)),
        (lambda x: dual.logistic(x), lambda v: np.exp(-v) / (1 + np.exp(-v)) ** 2),
    ],
)
def test_chain_rule(fn, derivative):
    v = np.array([0.2, 0.5, 0.9])
    out = fn(_var(v))
    np.testing.assert_allclose(out.grad[:, 0], derivative(v), rtol=1e-12)
    np.testing.assert_allclose(out.grad[:, 1:], 0.0)


def test_value_matches_plain_arithmetic():
    v = np.array([0.1, 0.4, 0.7])
    plain = (v * v + 0.3) / (1.0 - v) ** 2
    d = (_var(v) * _var(v) + 0.3) / (1.0 - _var(v)) ** 2
    np.testing.assert_array_equal(d.value, plain)


def test_ndarray_on_the_left_defers_to_dual():
    out = np.array([2.0, 3.0]) * _var([1.0, 1.0], 4)
    assert isinstance(out, Dual)
    np.testing.assert_array_equal(out.grad[:, 4], [2.0, 3.0])


def test_two_variables_mix():
    x = _var([2.0], 0)
    y = _var([5.0], 1)
    out = x * y + x
    np.testing.assert_allclose(out.grad[0, :2], [6.0, 2.0])


def test_clamp_min_kink_has_zero_derivative():
    x = _var([0.0, 0.5, -1.0])
    out = dual.clamp_min(x, 0.0)
    np.testing.assert_array_equal(out.value, [0.0, 0.5, 0.0])
    np.testing.assert_array_equal(out.grad[:, 0], [0.0, 1.0, 0.0])


def test_absolute_sign_convention():
    out = dual.absolute(_var([-2.0, 0.0, 3.0]))
    np.testing.assert_array_equal(out.value, [2.0, 0.0, 3.0])
    np.testing.assert_array_equal(out.grad[:, 0], [-1.0, 0.0, 1.0])


def test_where_selects_partials():
    a = _var([1.0, 2.0], 0)
    out = dual.where(np.array([True, False]), a, 0.0)
    np.testing.assert_array_equal(out.value, [1.0, 0.0])
    np.testing.assert_array_equal(out.grad[:, 0], [1.0, 0.0])


def test_stack_and_reduce():
    a = _var([1.0, 2.0], 3)
    b = _var([3.0, 4.0], 4)
    stacked = dual.stack_last([a, b])
    assert stacked.shape == (2, 2)
    assert stacked.grad.shape == (2, 2, dual.WIDTH)
    summed = dual.total(stacked, axis=1)
    np.testing.assert_array_equal(summed.value, [4.0, 6.0])
    np.testing.assert_array_equal(summed.grad[:, 3], [1.0, 1.0])
    np.testing.assert_array_equal(summed.grad[:, 4], [1.0, 1.0])
    mean = dual.average(stacked, axis=1)
    np.testing.assert_array_equal(mean.grad[:, 3], [0.5, 0.5])


def test_with_value_keeps_partials():
    a = _var([1.0, 2.0], 6) * 3.0
    pinned = a.with_value(np.array([7.0, 8.0]))
    np.testing.assert_array_equal(pinned.value, [7.0, 8.0])
    np.testing.assert_array_equal(pinned.grad, a.grad)


def test_plain_inputs_stay_plain():
    assert not isinstance(dual.clamp_min(np.array([1.0]), 0.0), Dual)
    assert not isinstance(dual.stack_last([np.ones(2), np.zeros(2)]), Dual)


def test_narrow_variable_mixes_with_constants():
    x = Dual.variable(np.array([0.5, 2.0]), 1, width=2)
    assert x.width == 2
    out = dual.where(np.array([True, False]), x * Dual(3.0) + 1.0, 0.0)
    assert out.grad.shape == (2, 2)
    np.testing.assert_array_equal(out.grad[:, 1], [3.0, 0.0])
    np.testing.assert_array_equal(out.grad[:, 0], 0.0)


def test_stack_widens_constant_parts():
    stacked = dual.stack_last([Dual.variable(np.ones(3), 0, width=3), 2.0])
    assert stacked.grad.shape == (3, 2, 3)
    np.testing.assert_array_equal(stacked.grad[:, 1], 0.0)


def test_slot_beyond_width_is_rejected():
    with pytest.raises(IndexError):
        Dual.variable(np.ones(2), "sss", width=3)
