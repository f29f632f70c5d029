"""
Network layers with explicit backward passes
Layers keep only their parameters; forward returns (output, cache) and
backward consumes that cache, so one layer can serve several threads.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def he_normal(rng, shape, fan_in):
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)


class Conv2D:
    """'same' convolution, odd square kernel, stride 1; weight (F, C, k, k)"""

    def __init__(self, name, in_channels, out_channels, kernel, rng):
        if kernel % 2 != 1:
            raise ValueError(f"Conv kernel must be odd, got {kernel}")
        self.name = name
        self.kernel = kernel
        self.params = {
            'weight': he_normal(rng, (out_channels, in_channels, kernel, kernel), in_channels * kernel * kernel),
            'bias': np.zeros(out_channels),
        }

    def _windows(self, x):
        pad = self.kernel // 2
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        return sliding_window_view(padded, (self.kernel, self.kernel), axis=(2, 3))

    def forward(self, x):
        windows = self._windows(x)
        out = np.tensordot(windows, self.params['weight'], axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + self.params['bias'][None, :, None, None]
        return out, windows

    def backward(self, dout, windows):
        grads = {
            'weight': np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3])),
            'bias': dout.sum(axis=(0, 2, 3)),
        }
        flipped = self.params['weight'][:, :, ::-1, ::-1]
        dx = np.tensordot(self._windows(dout), flipped, axes=([1, 4, 5], [0, 2, 3]))
        return dx.transpose(0, 3, 1, 2), grads


class ReLU:
    name = 'relu'
    params = {}

    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, dout, mask):
        return dout * mask, {}


class MaxPool2D:
    """2x2 max pooling, stride 2; odd trailing rows/cols are dropped"""
    name = 'pool'
    params = {}

    def forward(self, x):
        n, c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        blocks = x[:, :, :2 * h2, :2 * w2].reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
        blocks = blocks.reshape(n, c, h2, w2, 4)
        index = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, index[..., None], axis=-1)[..., 0]
        return out, (x.shape, index)

    def backward(self, dout, cache):
        shape, index = cache
        n, c, h, w = shape
        h2, w2 = index.shape[2], index.shape[3]
        routed = np.zeros((n, c, h2, w2, 4))
        np.put_along_axis(routed, index[..., None], dout[..., None], axis=-1)
        routed = routed.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)
        dx = np.zeros(shape)
        dx[:, :, :2 * h2, :2 * w2] = routed
        return dx, {}


class Flatten:
    name = 'flatten'
    params = {}

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, shape):
        return dout.reshape(shape), {}


class Dense:
    """Fully-connected layer; weight (in, out)"""

    def __init__(self, name, in_features, out_features, rng):
        self.name = name
        self.params = {
            'weight': he_normal(rng, (in_features, out_features), in_features),
            'bias': np.zeros(out_features),
        }

    def forward(self, x):
        return x @ self.params['weight'] + self.params['bias'], x

    def backward(self, dout, x):
        grads = {'weight': x.T @ dout, 'bias': dout.sum(axis=0)}
        return dout @ self.params['weight'].T, grads
