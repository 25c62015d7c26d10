"""Forward-mode dual numbers over numpy arrays.

A ``Dual`` carries a value array of shape S and a partials array of shape
S + (k,). k defaults to the nine optimisable pixel scalars; a caller that
differentiates fewer of them seeds narrower duals. Constants carry one zero
partial, which broadcasts against any width. Plain arrays and Python floats
mix freely with duals, so the shader is written once and runs on either.
"""

from __future__ import annotations

from typing import Union

import numpy as np

PARTIALS = ("nx", "ny", "disp", "dr", "dg", "db", "r", "s", "sss")
WIDTH = len(PARTIALS)
INDEX = {name: i for i, name in enumerate(PARTIALS)}


class Dual:
    """Value plus first-order partials; arithmetic follows the chain rule."""

    __slots__ = ("value", "grad")
    # make ndarray <op> Dual defer to the reflected Dual operator
    __array_ufunc__ = None

    def __init__(self, value, grad: np.ndarray | None = None) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        if grad is None:
            grad = np.zeros(self.value.shape + (1,))
        self.grad = np.asarray(grad, dtype=np.float64)

    @classmethod
    def variable(cls, value, slot: int | str, width: int = WIDTH) -> "Dual":
        """Seed a dual whose partial along one slot is 1."""
        index = INDEX[slot] if isinstance(slot, str) else int(slot)
        if not 0 <= index < width:
            raise IndexError(f"slot {index} outside a width of {width}")
        value = np.asarray(value, dtype=np.float64)
        grad = np.zeros(value.shape + (width,))
        grad[..., index] = 1.0
        return cls(value, grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def width(self) -> int:
        return int(self.grad.shape[-1])

    def __repr__(self) -> str:
        return f"Dual(shape={self.value.shape})"

    def __getitem__(self, index) -> "Dual":
        # Ellipsis is not supported: the partials axis must stay last
        if not isinstance(index, tuple):
            index = (index,)
        return Dual(self.value[index], self.grad[index + (slice(None),)])

    def sum(self, axis: int) -> "Dual":
        axis = axis if axis >= 0 else self.value.ndim + axis
        return Dual(self.value.sum(axis=axis), self.grad.sum(axis=axis))

    def mean(self, axis: int) -> "Dual":
        axis = axis if axis >= 0 else self.value.ndim + axis
        return Dual(self.value.mean(axis=axis), self.grad.mean(axis=axis))

    def with_value(self, value) -> "Dual":
        """Same partials, value replaced (used to pin exact stored values)."""
        return Dual(np.broadcast_to(value, self.value.shape).astype(np.float64), self.grad)

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.grad)

    def __add__(self, other) -> "Dual":
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.grad + other.grad)
        other = np.asarray(other, dtype=np.float64)
        value = self.value + other
        return Dual(value, np.broadcast_to(self.grad, value.shape + self.grad.shape[-1:]))

    __radd__ = __add__

    def __sub__(self, other) -> "Dual":
        return self + (-other)

    def __rsub__(self, other) -> "Dual":
        return (-self) + other

    def __mul__(self, other) -> "Dual":
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.grad * other.value[..., None] + other.grad * self.value[..., None],
            )
        other = np.asarray(other, dtype=np.float64)
        return Dual(self.value * other, self.grad * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Dual":
        if isinstance(other, Dual):
            value = self.value / other.value
            grad = (self.grad - other.grad * value[..., None]) / other.value[..., None]
            return Dual(value, grad)
        other = np.asarray(other, dtype=np.float64)
        return Dual(self.value / other, self.grad / other[..., None])

    def __rtruediv__(self, other) -> "Dual":
        other = np.asarray(other, dtype=np.float64)
        value = other / self.value
        return Dual(value, -self.grad * (value / self.value)[..., None])

    def __pow__(self, exponent: float) -> "Dual":
        if isinstance(exponent, Dual):
            raise TypeError("dual exponents are not supported")
        if exponent == 0:
            return Dual(np.ones_like(self.value))
        value = self.value**exponent
        slope = exponent * self.value ** (exponent - 1)
        return Dual(value, self.grad * slope[..., None])


Number = Union[Dual, np.ndarray, float]


def value_of(x: Number) -> np.ndarray:
    return x.value if isinstance(x, Dual) else np.asarray(x, dtype=np.float64)


def lift(x: Number) -> Dual:
    return x if isinstance(x, Dual) else Dual(x)


def sqrt(x: Number) -> Number:
    if isinstance(x, Dual):
        root = np.sqrt(x.value)
        return Dual(root, x.grad * (0.5 / root)[..., None])
    return np.sqrt(x)


def absolute(x: Number) -> Number:
    """|x| with sub-gradient 0 at x = 0."""
    if isinstance(x, Dual):
        return Dual(np.abs(x.value), x.grad * np.sign(x.value)[..., None])
    return np.abs(x)


def clamp_min(x: Number, bound: float) -> Number:
    """max(x, bound); the derivative is 0 at and below the bound."""
    if isinstance(x, Dual):
        keep = x.value > bound
        return Dual(np.where(keep, x.value, bound), np.where(keep[..., None], x.grad, 0.0))
    return np.maximum(x, bound)


def where(condition: np.ndarray, a: Number, b: Number) -> Number:
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.where(condition, a, b)
    a, b = lift(a), lift(b)
    value = np.where(condition, a.value, b.value)
    grad = np.where(np.asarray(condition)[..., None], a.grad, b.grad)
    return Dual(value, grad)


def expand_last(x: Number) -> Number:
    """Append a length-1 axis before the partials axis."""
    if isinstance(x, Dual):
        return Dual(x.value[..., None], x.grad[..., None, :])
    return np.asarray(x)[..., None]


def total(x: Number, axis: int) -> Number:
    if isinstance(x, Dual):
        return x.sum(axis)
    return np.asarray(x).sum(axis=axis)


def average(x: Number, axis: int) -> Number:
    if isinstance(x, Dual):
        return x.mean(axis)
    return np.asarray(x).mean(axis=axis)


def stack_last(parts: list[Number]) -> Number:
    """Stack along a new trailing value axis (RGB, xyz)."""
    if not any(isinstance(p, Dual) for p in parts):
        return np.stack([np.asarray(p, dtype=np.float64) for p in parts], axis=-1)
    duals = [lift(p) for p in parts]
    shape = np.broadcast_shapes(*(d.value.shape for d in duals))
    value = np.stack([np.broadcast_to(d.value, shape) for d in duals], axis=-1)
    width = max(d.width for d in duals)
    grad = np.stack([np.broadcast_to(d.grad, shape + (width,)) for d in duals], axis=-2)
    return Dual(value, grad)


def logistic(t: Number) -> Number:
    if isinstance(t, Dual):
        value = 1.0 / (1.0 + np.exp(-t.value))
        return Dual(value, t.grad * (value * (1.0 - value))[..., None])
    return 1.0 / (1.0 + np.exp(-np.asarray(t, dtype=np.float64)))


__all__ = [
    "Dual",
    "PARTIALS",
    "WIDTH",
    "INDEX",
    "value_of",
    "lift",
    "sqrt",
    "absolute",
    "clamp_min",
    "where",
    "expand_last",
    "total",
    "average",
    "stack_last",
    "logistic",
]
