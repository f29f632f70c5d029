"""
Checkpoint container
    magic (8 bytes) | descriptor length (uint32 LE) | JSON descriptor | float64 LE parameters
The descriptor names the payload kind, its architecture and every parameter's
shape in storage order. Baseline models reuse the container with their own kind.
"""

import json
import logging
from pathlib import Path

import numpy as np

from errors import CheckpointFormatError
from learner.network import Architecture, GraspNet

logger = logging.getLogger(__name__)

MAGIC = b'GFCKPT01'
GRASP_NET_KIND = 'grasp-net'


def write_container(path, kind, architecture, arrays):
    """
    Args:
        kind: Payload kind written into the descriptor
        architecture: JSON-serializable description
        arrays: Ordered {name: ndarray}
    """
    descriptor = {
        'kind': kind,
        'architecture': architecture,
        'params': [{'name': name, 'shape': list(np.shape(value))} for name, value in arrays.items()],
    }
    header = json.dumps(descriptor, sort_keys=True).encode('utf-8')
    with open(path, 'wb') as handle:
        handle.write(MAGIC)
        handle.write(np.array([len(header)], dtype='<u4').tobytes())
        handle.write(header)
        for value in arrays.values():
            handle.write(np.ascontiguousarray(value, dtype='<f8').tobytes())


def read_container(path, kind=None):
    """
    Returns:
        (descriptor, {name: float64 array})

    Raises:
        CheckpointFormatError: bad magic, truncated payload or unexpected kind
    """
    raw = Path(path).read_bytes()
    if raw[:len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint (bad magic)")
    offset = len(MAGIC)
    if len(raw) < offset + 4:
        raise CheckpointFormatError(f"{path}: truncated header")
    length = int(np.frombuffer(raw, dtype='<u4', count=1, offset=offset)[0])
    offset += 4
    try:
        descriptor = json.loads(raw[offset:offset + length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{path}: unreadable descriptor - {e}")
    offset += length

    if kind is not None and descriptor.get('kind') != kind:
        raise CheckpointFormatError(f"{path}: expected kind {kind}, found {descriptor.get('kind')}")

    arrays = {}
    for entry in descriptor['params']:
        shape = tuple(entry['shape'])
        count = int(np.prod(shape)) if shape else 1
        if len(raw) < offset + 8 * count:
            raise CheckpointFormatError(f"{path}: truncated parameter {entry['name']}")
        arrays[entry['name']] = np.frombuffer(raw, dtype='<f8', count=count, offset=offset).reshape(shape).copy()
        offset += 8 * count
    if offset != len(raw):
        raise CheckpointFormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return descriptor, arrays


def save_network(path, net):
    architecture = {**net.architecture.describe(), 'seed': net.seed}
    write_container(path, GRASP_NET_KIND, architecture, net.parameters())
    logger.info(f"Saved network checkpoint ({net.parameter_count()} parameters) to {path}")


def load_network(path):
    descriptor, arrays = read_container(path, kind=GRASP_NET_KIND)
    description = descriptor['architecture']
    net = GraspNet(Architecture.from_description(description), seed=int(description.get('seed', 0)))
    try:
        net.load_parameters(arrays)
    except (KeyError, ValueError) as e:
        raise CheckpointFormatError(f"{path}: parameters do not match the architecture - {e}")
    return net
