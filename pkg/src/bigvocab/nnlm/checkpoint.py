"""Binary checkpoints: a JSON config section plus named float32 tensors.

Layout (all integers little-endian uint32):

    magic b"BVNN", version, config length, config (UTF-8 JSON),
    tensor count, then per tensor: name length, name (UTF-8), ndim,
    dims..., row-major float32 little-endian payload.
"""

import json
import struct

import numpy as np

from .network import Network, NetworkConfig, NNLMVocabulary
from .outputs import Partition

MAGIC = b"BVNN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _u32(f, value):
    f.write(struct.pack("<I", value))


def _read_u32(f):
    data = f.read(4)
    if len(data) != 4:
        raise CheckpointError("truncated checkpoint")
    return struct.unpack("<I", data)[0]


def save_checkpoint(network: Network, path: str, extra: dict = None):
    meta = {
        "config": network.config.to_dict(),
        "vocabulary": network.vocab.to_dict(),
        "partition": network.partition.to_lists() if network.partition is not None else None,
        "extra": extra or {},
    }
    text = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        _u32(f, VERSION)
        _u32(f, len(text))
        f.write(text)
        _u32(f, len(network.params))
        for name in sorted(network.params):
            arr = np.ascontiguousarray(network.params[name], dtype="<f4")
            encoded = name.encode("utf-8")
            _u32(f, len(encoded))
            f.write(encoded)
            _u32(f, arr.ndim)
            for d in arr.shape:
                _u32(f, d)
            f.write(arr.tobytes(order="C"))


def load_checkpoint(path: str, dtype=np.float32):
    """Returns ``(network, extra)``."""
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError("%s is not a network checkpoint" % path)
        version = _read_u32(f)
        if version != VERSION:
            raise CheckpointError("unsupported checkpoint version %d" % version)
        meta = json.loads(f.read(_read_u32(f)).decode("utf-8"))
        params = {}
        for _ in range(_read_u32(f)):
            name = f.read(_read_u32(f)).decode("utf-8")
            shape = tuple(_read_u32(f) for _ in range(_read_u32(f)))
            size = int(np.prod(shape)) if shape else 1
            payload = f.read(4 * size)
            if len(payload) != 4 * size:
                raise CheckpointError("truncated tensor %s" % name)
            params[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(dtype)
    config = NetworkConfig(**meta["config"])
    vocab = NNLMVocabulary.from_dict(meta["vocabulary"])
    partition = Partition(meta["partition"]) if meta.get("partition") else None
    return Network(config, vocab, params, partition), meta.get("extra", {})
