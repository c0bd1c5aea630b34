"""
Differentiable primitives over Tensor

Every function accepts Tensors, numpy arrays or Python scalars, returns a
Tensor and records a graph node when any input requires grad.
"""

from __future__ import annotations

import itertools
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .tensor import ShapeError, Tensor, as_tensor, make_result

ArrayLike = Union[Tensor, np.ndarray, float, int]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`"""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


# Elementwise arithmetic

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'add')

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return make_result(a.data + b.data, (a, b), backward_fn, 'add')


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'sub')

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return make_result(a.data - b.data, (a, b), backward_fn, 'sub')


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'mul')

    def backward_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return make_result(a.data * b.data, (a, b), backward_fn, 'mul')


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'div')
    out = a.data / b.data

    def backward_fn(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)
    return make_result(out, (a, b), backward_fn, 'div')


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,), 'neg')


def power(a: ArrayLike, exponent: float) -> Tensor:
    a = as_tensor(a)
    exponent = float(exponent)

    def backward_fn(g):
        return (g * exponent * np.power(a.data, exponent - 1.0),)
    return make_result(np.power(a.data, exponent), (a,), backward_fn, 'power')


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_result(out, (a,), lambda g: (g * out,), 'exp')


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_result(np.log(a.data), (a,), lambda g: (g / a.data,), 'log')


def sqrt(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return make_result(out, (a,), lambda g: (g * 0.5 / out,), 'sqrt')


def absolute(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), 'abs')


def sin(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_result(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),), 'sin')


def cos(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return make_result(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),), 'cos')


# Activations

def leaky_relu(a: ArrayLike, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    scale = np.where(a.data > 0, 1.0, slope)
    return make_result(a.data * scale, (a,), lambda g: (g * scale,), 'leaky_relu')


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    # split form avoids overflow in exp for large |x|
    x = a.data
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return make_result(out, (a,), lambda g: (g * out * (1.0 - out),), 'sigmoid')


def softplus(a: ArrayLike) -> Tensor:
    """log(1 + exp(x)), computed stably"""
    a = as_tensor(a)
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    z = np.exp(-np.abs(x))
    slope = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return make_result(out, (a,), lambda g: (g * slope,), 'softplus')


def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return make_result(out, (a,), backward_fn, 'softmax')


# Contractions and shape ops

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not contract")
    out = np.matmul(a.data, b.data)

    def backward_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return make_result(out, (a, b), backward_fn, 'matmul')


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: no inputs")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors:
        if t.ndim != ndim or any(t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis):
            raise ShapeError(f"concat: shapes {[t.shape for t in tensors]} differ off axis {axis}")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        return tuple(np.split(g, splits, axis=axis))
    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward_fn, 'concat')


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeError(f"stack: shapes {[t.shape for t in tensors]} differ")
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward_fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))
    return make_result(out, tensors, backward_fn, 'stack')


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")
    return make_result(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')


def transpose(a: ArrayLike, axes: Optional[Tuple[int, ...]] = None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),), 'transpose')


def getitem(a: ArrayLike, index) -> Tensor:
    a = as_tensor(a)
    out = a.data[index]

    def backward_fn(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)
    return make_result(np.array(out), (a,), backward_fn, 'getitem')


# Reductions

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(ax % ndim for ax in axis)


def reduce_sum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def backward_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)
    return make_result(out, (a,), backward_fn, 'sum')


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    out = a.data.mean(axis=axes, keepdims=keepdims)

    def backward_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, a.shape).copy(),)
    return make_result(out, (a,), backward_fn, 'mean')


def var(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    """Population variance (divides by n)"""
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    centered = a.data - a.data.mean(axis=axes, keepdims=True)
    out = (centered ** 2).mean(axis=axes, keepdims=keepdims)

    def backward_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (g * 2.0 * centered / count,)
    return make_result(out, (a,), backward_fn, 'var')


def cumprod_exclusive(a: ArrayLike) -> Tensor:
    """
    Running products along the last axis: out[..., j] = prod(a[..., :j]).

    The output has one more entry than the input (out[..., 0] = 1 and
    out[..., N] is the full product). The gradient uses a reverse scan, so
    zero factors are handled without division.
    """
    a = as_tensor(a)
    x = a.data
    n = x.shape[-1]
    out = np.ones(x.shape[:-1] + (n + 1,))
    out[..., 1:] = np.cumprod(x, axis=-1)

    def backward_fn(g):
        grad = np.zeros_like(x)
        tail = g[..., n].copy()
        for k in range(n - 1, -1, -1):
            grad[..., k] = out[..., k] * tail
            tail = g[..., k] + x[..., k] * tail
        return (grad,)
    return make_result(out, (a,), backward_fn, 'cumprod_exclusive')


# Convolution and resampling

def conv(x: ArrayLike, weight: ArrayLike, bias: Optional[ArrayLike] = None,
         stride: int = 1, padding: int = 0) -> Tensor:
    """
    N-d cross-correlation: x (N, C, *S), weight (O, C, *K), bias (O,).

    Implemented as one tensordot per kernel offset, so 2-d and 3-d share code.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    dims = weight.ndim - 2
    if x.ndim != dims + 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv: input {x.shape} does not match weight {weight.shape}")
    kernel = weight.shape[2:]
    pad = [(0, 0), (0, 0)] + [(padding, padding)] * dims
    xp = np.pad(x.data, pad) if padding else x.data
    spatial = xp.shape[2:]
    out_sp = tuple((spatial[d] - kernel[d]) // stride + 1 for d in range(dims))
    if any(s <= 0 for s in out_sp):
        raise ShapeError(f"conv: kernel {kernel} larger than padded input {spatial}")

    def window(offset):
        return (slice(None), slice(None)) + tuple(
            slice(offset[d], offset[d] + stride * (out_sp[d] - 1) + 1, stride) for d in range(dims))

    offsets = list(itertools.product(*[range(k) for k in kernel]))
    out = np.zeros((x.shape[0], weight.shape[0]) + out_sp)
    for offset in offsets:
        w_off = weight.data[(slice(None), slice(None)) + offset]
        out += np.moveaxis(np.tensordot(w_off, xp[window(offset)], axes=([1], [1])), 0, 1)

    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"conv: bias {bias.shape} does not match {weight.shape[0]} outputs")
        out += bias.data.reshape((1, -1) + (1,) * dims)
        parents.append(bias)

    sum_axes = tuple([0] + list(range(2, dims + 2)))

    def backward_fn(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(weight.data)
        for offset in offsets:
            sl = window(offset)
            w_off = weight.data[(slice(None), slice(None)) + offset]
            gw[(slice(None), slice(None)) + offset] = np.tensordot(g, xp[sl], axes=(sum_axes, sum_axes))
            gxp[sl] += np.moveaxis(np.tensordot(g, w_off, axes=([1], [0])), -1, 1)
        if padding:
            gxp = gxp[(slice(None), slice(None)) + tuple(slice(padding, -padding) for _ in range(dims))]
        grads = [gxp, gw]
        if bias is not None:
            grads.append(g.sum(axis=sum_axes))
        return tuple(grads)
    return make_result(out, parents, backward_fn, f'conv{dims}d')


def upsample_nearest(x: ArrayLike, factor: int = 2, dims: int = 2) -> Tensor:
    """Nearest-neighbour upsampling of the trailing `dims` axes"""
    x = as_tensor(x)
    out = x.data
    lead = x.ndim - dims
    for d in range(dims):
        out = np.repeat(out, factor, axis=lead + d)

    def backward_fn(g):
        shape = list(x.shape[:lead])
        for d in range(dims):
            shape += [x.shape[lead + d], factor]
        grad = g.reshape(shape)
        return (grad.sum(axis=tuple(lead + 2 * d + 1 for d in range(dims))),)
    return make_result(out, (x,), backward_fn, 'upsample_nearest')


def grid_sample(features: ArrayLike, coords: ArrayLike) -> Tensor:
    """
    Multilinear sampling of a (C, *S) grid at normalized coordinates.

    coords has shape (N, d); coords[:, 0] addresses the last spatial axis
    (width), coords[:, 1] the one before it, and so on. -1 and +1 land on the
    first and last grid sites; out-of-range coordinates clamp to the border.
    Returns (N, C); differentiable in both features and coords.
    """
    features, coords = as_tensor(features), as_tensor(coords)
    dims = features.ndim - 1
    if coords.ndim != 2 or coords.shape[1] != dims:
        raise ShapeError(f"grid_sample: coords {coords.shape} do not address a {dims}-d grid {features.shape}")
    channels = features.shape[0]
    sizes = features.shape[1:][::-1]  # sizes[k] is the extent addressed by coords[:, k]

    clamped = np.clip(coords.data, -1.0, 1.0)
    inside = (coords.data > -1.0) & (coords.data < 1.0)
    lo, frac, scale = [], [], []
    for k in range(dims):
        extent = sizes[k]
        pos = (clamped[:, k] + 1.0) * 0.5 * (extent - 1)
        base = np.clip(np.floor(pos), 0, max(extent - 2, 0)).astype(np.int64)
        lo.append(base)
        frac.append(pos - base if extent > 1 else np.zeros_like(pos))
        scale.append(0.5 * (extent - 1))

    flat = features.data.reshape(channels, -1)
    strides = np.cumprod((1,) + tuple(sizes[:-1]))  # stride of coordinate k in flat storage
    corners = []
    for bits in itertools.product((0, 1), repeat=dims):
        index = np.zeros(coords.shape[0], dtype=np.int64)
        weight = np.ones(coords.shape[0])
        for k, bit in enumerate(bits):
            upper = np.minimum(lo[k] + bit, sizes[k] - 1)
            index += upper * strides[k]
            weight *= frac[k] if bit else (1.0 - frac[k])
        corners.append((bits, index, weight))

    out = np.zeros((coords.shape[0], channels))
    for _, index, weight in corners:
        out += flat[:, index].T * weight[:, None]

    def backward_fn(g):
        gflat = np.zeros((flat.shape[1], channels))
        gcoords = np.zeros_like(coords.data)
        for bits, index, weight in corners:
            np.add.at(gflat, index, g * weight[:, None])
            if coords.requires_grad:
                sampled = (flat[:, index].T * g).sum(axis=1)
                for k in range(dims):
                    partial = np.ones(coords.shape[0])
                    for j, bit in enumerate(bits):
                        if j == k:
                            partial *= 1.0 if bit else -1.0
                        else:
                            partial *= frac[j] if bit else (1.0 - frac[j])
                    gcoords[:, k] += sampled * partial
        gcoords *= np.array(scale)[None, :] * inside
        return gflat.T.reshape(features.shape), gcoords
    return make_result(out, (features, coords), backward_fn, 'grid_sample')


# Operator overloads

def _radd(self, other):
    return add(other, self)


def _rsub(self, other):
    return sub(other, self)


def _rmul(self, other):
    return mul(other, self)


def _rtruediv(self, other):
    return div(other, self)


def _rmatmul(self, other):
    return matmul(other, self)


Tensor.__add__ = add
Tensor.__radd__ = _radd
Tensor.__sub__ = sub
Tensor.__rsub__ = _rsub
Tensor.__mul__ = mul
Tensor.__rmul__ = _rmul
Tensor.__truediv__ = div
Tensor.__rtruediv__ = _rtruediv
Tensor.__matmul__ = matmul
Tensor.__rmatmul__ = _rmatmul
Tensor.__neg__ = neg
Tensor.__pow__ = power
Tensor.__getitem__ = getitem
Tensor.sum = reduce_sum
Tensor.mean = mean
Tensor.reshape = lambda self, *shape: reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)
Tensor.transpose = transpose
