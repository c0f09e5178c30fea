# Copyright 2024 The Datatic Filtering Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
""" Binary network checkpoints.

    Layout, little-endian throughout:

        b'DAOF'                      magic
        u32                          format version
        u32                          layer count L
        u32 * (L + 1)                layer dims
        u8 * L                       activation tags
        u64                          training step
        u16 + utf-8                  config hash
        u32 + utf-8                  JSON metadata
        f64 ...                      W_0, b_0, ..., W_{L-1}, b_{L-1} (row-major)
        u8                           1 if Adam state follows, else 0
          u64, f64 * 4               Adam step, learning rate, β1, β2, ε
          f64 ...                    first moments, then second moments
        u32                          CRC32 of everything above
"""
from collections import namedtuple
import json
import logging
import struct
import zlib
import numpy as np
from .layers import ACTIVATION_TAGS, MlpNet
from .optimizers import AdamState

MAGIC = b'DAOF'
VERSION = 1

_TAG_NAMES = {v: k for k, v in ACTIVATION_TAGS.items()}

Checkpoint = namedtuple('Checkpoint', ['net', 'adam_state', 'step',
                                       'config_hash', 'metadata'])


class CheckpointError(IOError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class CheckpointDimensionError(CheckpointError):
    pass


def _blocks(arrays):
    return b''.join(np.ascontiguousarray(a, dtype='<f8').tobytes() for a in arrays)


def checkpoint_save(path, net, adam_state=None, step=0, config_hash='',
                    metadata=None):
    """ Write `net` (and optionally its Adam state) to `path`. """
    L = net.num_layers
    hash_bytes = config_hash.encode('utf-8')
    meta_bytes = json.dumps(metadata or {}, sort_keys=True).encode('utf-8')
    parts = [
        MAGIC,
        struct.pack('<II', VERSION, L),
        struct.pack('<{}I'.format(L + 1), *net.layer_dims),
        struct.pack('<{}B'.format(L), *[ACTIVATION_TAGS[a] for a in net.activations]),
        struct.pack('<Q', int(step)),
        struct.pack('<H', len(hash_bytes)), hash_bytes,
        struct.pack('<I', len(meta_bytes)), meta_bytes,
        _blocks(net.params()),
    ]
    if adam_state is None:
        parts.append(struct.pack('<B', 0))
    else:
        parts.append(struct.pack('<B', 1))
        parts.append(struct.pack('<Qdddd', adam_state.step, adam_state.learning_rate,
                                 adam_state.beta1, adam_state.beta2,
                                 adam_state.epsilon))
        parts.append(_blocks(adam_state.m))
        parts.append(_blocks(adam_state.v))
    body = b''.join(parts)
    with open(path, 'wb') as f:
        f.write(body)
        f.write(struct.pack('<I', zlib.crc32(body) & 0xFFFFFFFF))
    logging.debug('Saved checkpoint %s (%d bytes)', path, len(body) + 4)


class _Reader(object):

    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, count):
        if self.offset + count > len(self.data):
            raise CheckpointCorruptError('{}: truncated at byte {}'.format(
                self.path, self.offset))
        chunk = self.data[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def arrays(self, shapes):
        out = []
        for shape in shapes:
            count = int(np.prod(shape))
            out.append(np.frombuffer(self.take(8 * count), dtype='<f8')
                       .astype(np.float64).reshape(shape))
        return out


def checkpoint_load(path, expected_dims=None):
    """ Read a checkpoint written by `checkpoint_save`.

    Args:
        path: file path.
        expected_dims: optional layer dims the stored net must have.

    Returns:
        Checkpoint(net, adam_state, step, config_hash, metadata)

    Raises:
        CheckpointVersionError, CheckpointCorruptError, CheckpointDimensionError
    """
    with open(path, 'rb') as f:
        data = f.read()
    reader = _Reader(data, path)
    if reader.take(4) != MAGIC:
        raise CheckpointCorruptError('{}: not a checkpoint file'.format(path))
    version, L = reader.unpack('<II')
    if version != VERSION:
        raise CheckpointVersionError('{}: format version {}, expected {}'.format(
            path, version, VERSION))
    if len(data) < 4 or zlib.crc32(data[:-4]) & 0xFFFFFFFF != struct.unpack(
            '<I', data[-4:])[0]:
        raise CheckpointCorruptError('{}: checksum mismatch'.format(path))
    reader.data = data[:-4]
    if L < 1:
        raise CheckpointCorruptError('{}: no layers'.format(path))
    dims = list(reader.unpack('<{}I'.format(L + 1)))
    tags = reader.unpack('<{}B'.format(L))
    if any(t not in _TAG_NAMES for t in tags):
        raise CheckpointCorruptError('{}: unknown activation tag in {}'.format(path, tags))
    if expected_dims is not None and list(expected_dims) != dims:
        raise CheckpointDimensionError('{}: stored net has dims {}, expected {}'.format(
            path, dims, list(expected_dims)))
    step, = reader.unpack('<Q')
    hash_length, = reader.unpack('<H')
    config_hash = reader.take(hash_length).decode('utf-8')
    meta_length, = reader.unpack('<I')
    try:
        metadata = json.loads(reader.take(meta_length).decode('utf-8'))
    except ValueError:
        raise CheckpointCorruptError('{}: unreadable metadata'.format(path))
    shapes = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        shapes.extend([(fan_in, fan_out), (fan_out,)])
    params = reader.arrays(shapes)
    net = MlpNet(dims, params[0::2], params[1::2], [_TAG_NAMES[t] for t in tags])
    adam_state = None
    has_adam, = reader.unpack('<B')
    if has_adam:
        adam_step, lr, beta1, beta2, epsilon = reader.unpack('<Qdddd')
        m = reader.arrays(shapes)
        v = reader.arrays(shapes)
        adam_state = AdamState(m, v, adam_step, lr, beta1, beta2, epsilon)
    if reader.offset != len(reader.data):
        raise CheckpointCorruptError('{}: {} trailing bytes'.format(
            path, len(reader.data) - reader.offset))
    return Checkpoint(net, adam_state, step, config_hash, metadata)
