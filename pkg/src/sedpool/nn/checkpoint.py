"""Named-tensor checkpoint archive.

Layout (all integers little-endian)::

    magic      8 bytes   b"SEDCKPT1"
    count      uint32    number of tensors
    per tensor, in ParamSet order:
      name_len uint32, name (UTF-8)
      ndim     uint32, dims (ndim x uint64)
      data     prod(dims) x float64, C order

Values round-trip bit-exactly.
"""
import struct

import numpy as np

from ..errors import ParseError

MAGIC = b"SEDCKPT1"


def save_checkpoint(path, params):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for name, t in params.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", t.data.ndim))
            fh.write(struct.pack(f"<{t.data.ndim}Q", *t.data.shape))
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Return an ordered ``name -> ndarray`` dict."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise ParseError("not a sedpool checkpoint", path=path)
    pos = 8
    try:
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        out = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}Q", blob, pos)
            pos += 8 * ndim
            n = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).reshape(shape)
            pos += 8 * n
            out[name] = data.astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise ParseError(f"truncated or corrupt checkpoint ({exc})", path=path) from exc
    return out
