"""TDR1 teacher-record writer (little-endian, CRC-32 trailer).

Layout: magic "TDR1", kind u32 (0 mlm / 1 task), n u32, K u32,
mask_seed u64, mask_fraction f32, temperature f32, count u64, then per
record {key0 u64, key1 u64, n_entries u32, n_entries * (id u32, p f32)},
then CRC-32 of everything before it.
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

MAGIC = b"TDR1"
KIND_CODES = {"mlm": 0, "task": 1}

_HEADER = struct.Struct("<4sIIIQffQ")
_KEY = struct.Struct("<QQI")
_ENTRY = struct.Struct("<If")


def write_records(path, kind, n, K, records, mask_seed=0, mask_fraction=0.0, temperature=1.0):
    """Atomically serialize (key, ids, probs) triples to `path`."""
    items = list(records)
    payload = bytearray()
    payload += _HEADER.pack(MAGIC, KIND_CODES[kind], n, K, mask_seed, mask_fraction, temperature, len(items))
    for key, ids, probs in items:
        ids = np.asarray(ids, dtype=np.uint32)
        probs = np.asarray(probs, dtype=np.float32)
        if ids.size > K:
            raise ValueError(f"record {key}: {ids.size} entries exceeds K={K}")
        payload += _KEY.pack(int(key[0]), int(key[1]), ids.size)
        for i, p in zip(ids.tolist(), probs.tolist()):
            payload += _ENTRY.pack(i, p)
    payload += struct.pack("<I", zlib.crc32(bytes(payload)))
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as f:
        f.write(bytes(payload))
    os.replace(tmp, path)
