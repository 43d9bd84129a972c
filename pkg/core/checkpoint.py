"""
Checkpoint files for TreeReply

Layout (all integers little-endian):

    4 bytes   magic b"TRCK"
    uint32    format version (1)
    uint32    header length in bytes
    header    UTF-8 JSON: dims, vocabulary tokens, vocabulary SHA-1,
              and the [name, shape] list of parameter blocks
    blocks    float64 little-endian, in header order, C order
"""

import json
import logging
import os
import struct
from typing import BinaryIO, Optional, Tuple

import numpy as np

from core.errors import ModelError
from core.model import ModelDims, TreeDecoderModel, parameter_shapes
from corpus.vocabulary import Vocabulary

log = logging.getLogger(__name__)

MAGIC = b"TRCK"
VERSION = 1
_FLOAT = np.dtype("<f8")


def write_checkpoint(stream: BinaryIO, model: TreeDecoderModel, vocabulary: Vocabulary):
    if len(vocabulary) != model.dims.vocab_size:
        raise ModelError(f"vocabulary has {len(vocabulary)} tokens, model expects {model.dims.vocab_size}")
    header = {
        "dims": {
            "vocab_size": model.dims.vocab_size,
            "embed_dim": model.dims.embed_dim,
            "hidden_dim": model.dims.hidden_dim,
            "arity": model.dims.arity,
            "eob_id": model.dims.eob_id,
        },
        "vocabulary": vocabulary.tokens,
        "vocabulary_sha1": vocabulary.sha1(),
        "blocks": [[name, list(shape)] for name, shape in parameter_shapes(model.dims)],
    }
    encoded = json.dumps(header, ensure_ascii=False).encode("utf-8")
    stream.write(MAGIC)
    stream.write(struct.pack("<II", VERSION, len(encoded)))
    stream.write(encoded)
    for name, _ in parameter_shapes(model.dims):
        stream.write(np.ascontiguousarray(model.params[name], dtype=_FLOAT).tobytes())


def read_checkpoint(stream: BinaryIO, expected_sha1: Optional[str] = None) -> Tuple[TreeDecoderModel, Vocabulary]:
    if stream.read(4) != MAGIC:
        raise ModelError("not a TreeReply checkpoint (bad magic)")
    prefix = stream.read(8)
    if len(prefix) != 8:
        raise ModelError("truncated checkpoint header")
    version, header_length = struct.unpack("<II", prefix)
    if version != VERSION:
        raise ModelError(f"unsupported checkpoint version {version}")
    raw = stream.read(header_length)
    if len(raw) != header_length:
        raise ModelError("truncated checkpoint header")
    try:
        header = json.loads(raw.decode("utf-8"))
        dims = ModelDims(**header["dims"])
        vocabulary = Vocabulary(header["vocabulary"])
        blocks = [(name, tuple(shape)) for name, shape in header["blocks"]]
    except (ValueError, KeyError, TypeError) as e:
        raise ModelError(f"unreadable checkpoint header: {e}")

    if vocabulary.sha1() != header.get("vocabulary_sha1"):
        raise ModelError("vocabulary hash does not match the stored vocabulary")
    if expected_sha1 is not None and expected_sha1 != vocabulary.sha1():
        raise ModelError("checkpoint was trained with a different vocabulary")
    if blocks != parameter_shapes(dims):
        raise ModelError("parameter block list does not match the stored dimensions")

    params = {}
    for name, shape in blocks:
        size = int(np.prod(shape)) * _FLOAT.itemsize
        data = stream.read(size)
        if len(data) != size:
            raise ModelError(f"truncated parameter block {name}")
        params[name] = np.frombuffer(data, dtype=_FLOAT).reshape(shape).astype(np.float64)
    if stream.read(1):
        raise ModelError("trailing bytes after the last parameter block")
    return TreeDecoderModel(dims, params), vocabulary


def save_checkpoint(path: str, model: TreeDecoderModel, vocabulary: Vocabulary):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        write_checkpoint(f, model, vocabulary)
    log.info("Saved checkpoint %s (%d parameters)", path, model.parameter_count())


def load_checkpoint(path: str, expected_sha1: Optional[str] = None) -> Tuple[TreeDecoderModel, Vocabulary]:
    with open(path, "rb") as f:
        model, vocabulary = read_checkpoint(f, expected_sha1)
    log.debug("Loaded checkpoint %s", path)
    return model, vocabulary
