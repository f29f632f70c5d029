"""
Grasp network: convolutional trunk, two fully-connected layers and 18
independent binary heads (one per angle bin), each producing 2 logits.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

import config
from errors import ShapeMismatchError
from learner.layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Architecture:
    input_side: int = config.PATCH_INPUT_SIDE
    conv_channels: tuple = config.CONV_CHANNELS
    conv_kernel: int = config.CONV_KERNEL
    fc_widths: tuple = config.FC_WIDTHS
    n_bins: int = config.NUM_ANGLE_BINS
    head_init_std: float = config.HEAD_INIT_STD
    aux_classes: int = 8

    def __post_init__(self):
        if len(self.fc_widths) != 2:
            raise ValueError(f"Trunk needs exactly two fully-connected layers, got {self.fc_widths}")
        if self.n_bins != config.NUM_ANGLE_BINS:
            raise ValueError(f"Network needs exactly {config.NUM_ANGLE_BINS} heads, got {self.n_bins}")

    @property
    def flat_features(self):
        side = self.input_side
        for _ in self.conv_channels:
            side //= 2
        return self.conv_channels[-1] * side * side

    def describe(self):
        return {
            'input_side': self.input_side,
            'conv_channels': list(self.conv_channels),
            'conv_kernel': self.conv_kernel,
            'fc_widths': list(self.fc_widths),
            'n_bins': self.n_bins,
            'head_init_std': self.head_init_std,
            'aux_classes': self.aux_classes,
        }

    @classmethod
    def from_description(cls, description):
        return cls(input_side=int(description['input_side']),
                   conv_channels=tuple(description['conv_channels']),
                   conv_kernel=int(description['conv_kernel']),
                   fc_widths=tuple(description['fc_widths']),
                   n_bins=int(description['n_bins']),
                   head_init_std=float(description['head_init_std']),
                   aux_classes=int(description.get('aux_classes', 8)))


ARCHITECTURES = {
    'desk': Architecture(),
    'full': Architecture(input_side=config.FULL_INPUT_SIDE, conv_channels=(96, 256, 384, 384, 256),
                         conv_kernel=3, fc_widths=(4096, 1024)),
}


@dataclass(frozen=True)
class ActivationMatrix:
    """18 x 2 logits for one patch"""
    logits: np.ndarray

    @property
    def scores(self):
        """Per-bin softmax probability of the success logit"""
        return expit(self.logits[:, 1] - self.logits[:, 0])


class GraspNet:
    """
    Parameters of the feature extractor and the per-bin heads

    Every parameterized layer draws from its own child of SeedSequence(seed),
    so re-initializing a layer reproduces its original values.
    """

    def __init__(self, architecture=None, seed=0):
        self.architecture = architecture or ARCHITECTURES['desk']
        self.seed = int(seed)
        arch = self.architecture
        n_param_layers = len(arch.conv_channels) + len(arch.fc_widths)
        self._seeds = np.random.SeedSequence(self.seed).spawn(n_param_layers + 2)

        self.layers = []
        channels = 1
        for index, width in enumerate(arch.conv_channels):
            self.layers += [Conv2D(f"conv{index}", channels, width, arch.conv_kernel, self._rng(index)),
                            ReLU(), MaxPool2D()]
            channels = width
        self.layers.append(Flatten())
        features = arch.flat_features
        for index, width in enumerate(arch.fc_widths):
            self.layers += [Dense(f"fc{index}", features, width, self._rng(len(arch.conv_channels) + index)),
                            ReLU()]
            features = width
        self.reinit_heads()

    def _rng(self, index):
        return np.random.default_rng(self._seeds[index])

    @property
    def feature_width(self):
        return self.architecture.fc_widths[-1]

    def reinit_heads(self):
        rng = self._rng(len(self._seeds) - 2)
        shape = (self.architecture.n_bins, self.feature_width, 2)
        self.head_weight = rng.normal(0.0, self.architecture.head_init_std, size=shape)
        self.head_bias = np.zeros((self.architecture.n_bins, 2))

    def reinit_fc(self):
        """Fresh fully-connected trunk layers, conv layers untouched"""
        offset = len(self.architecture.conv_channels)
        for layer in self.layers:
            if isinstance(layer, Dense):
                index = int(layer.name[2:])
                fresh = Dense(layer.name, layer.params['weight'].shape[0], layer.params['weight'].shape[1],
                              self._rng(offset + index))
                layer.params = fresh.params

    def aux_rng(self):
        return self._rng(len(self._seeds) - 1)

    def zero_heads(self):
        self.head_weight = np.zeros_like(self.head_weight)
        self.head_bias = np.zeros_like(self.head_bias)

    def parameters(self):
        """Ordered {name: array}; arrays are the live parameters"""
        params = {}
        for layer in self.layers:
            for key, value in layer.params.items():
                params[f"{layer.name}.{key}"] = value
        params['heads.weight'] = self.head_weight
        params['heads.bias'] = self.head_bias
        return params

    def trunk_parameters(self):
        return {name: value for name, value in self.parameters().items() if not name.startswith('heads.')}

    def load_parameters(self, values):
        current = self.parameters()
        for name, value in values.items():
            if name not in current:
                raise KeyError(f"Unknown parameter {name}")
            if current[name].shape != value.shape:
                raise ShapeMismatchError(f"Parameter {name}: expected {current[name].shape}, got {value.shape}")
            current[name][...] = value

    def parameter_count(self):
        return int(sum(value.size for value in self.parameters().values()))

    def check_input(self, x):
        side = self.architecture.input_side
        if x.ndim != 4 or x.shape[1:] != (1, side, side):
            raise ShapeMismatchError(f"Expected input (N, 1, {side}, {side}), got {x.shape}")

    def trunk_forward(self, x):
        caches = []
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out, cache = layer.forward(out)
            caches.append(cache)
        return out, caches

    def trunk_backward(self, dfeatures, caches):
        grads = {}
        dout = dfeatures
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dout, layer_grads = layer.backward(dout, cache)
            for key, value in layer_grads.items():
                grads[f"{layer.name}.{key}"] = value
        return grads

    def forward(self, x):
        """
        Args:
            x: (N, 1, S, S) patches

        Returns:
            (logits (N, 18, 2), cache for backward)
        """
        self.check_input(x)
        features, caches = self.trunk_forward(x)
        logits = np.einsum('nh,jhk->njk', features, self.head_weight) + self.head_bias[None]
        return logits, (features, caches)

    def backward(self, dlogits, cache):
        features, caches = cache
        grads = {
            'heads.weight': np.einsum('njk,nh->jhk', dlogits, features),
            'heads.bias': dlogits.sum(axis=0),
        }
        dfeatures = np.einsum('njk,jhk->nh', dlogits, self.head_weight)
        grads.update(self.trunk_backward(dfeatures, caches))
        return grads

    def scores(self, x, batch_size=256):
        """(N, 18) success probabilities"""
        x = np.asarray(x)
        if len(x) == 0:
            return np.zeros((0, self.architecture.n_bins))
        chunks = []
        for start in range(0, len(x), batch_size):
            logits, _ = self.forward(x[start:start + batch_size])
            chunks.append(expit(logits[:, :, 1] - logits[:, :, 0]))
        return np.concatenate(chunks)


def forward(net, patch):
    """ActivationMatrix for a single Patch"""
    pixels = np.asarray(patch.pixels, dtype=np.float64)
    side = net.architecture.input_side
    if pixels.shape != (side, side):
        raise ShapeMismatchError(f"Patch side {pixels.shape} does not match network input {side}")
    logits, _ = net.forward(pixels[None, None])
    return ActivationMatrix(logits[0])
