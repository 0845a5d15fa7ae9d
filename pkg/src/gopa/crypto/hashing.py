"""Domain-separated hashing and a small deterministic random-bit generator."""

from __future__ import annotations

import hashlib
import os
import secrets
from typing import Optional, Union

Part = Union[bytes, str, int]


def _encode_part(p: Part) -> bytes:
    if isinstance(p, bytes):
        body = p
    elif isinstance(p, str):
        body = p.encode()
    elif isinstance(p, int):
        n = (p.bit_length() + 8) // 8 or 1
        body = p.to_bytes(n, "big", signed=True)
    else:
        raise TypeError(f"cannot hash {type(p).__name__}")
    return len(body).to_bytes(4, "big") + body


def hash_parts(tag: str, *parts: Part) -> bytes:
    """SHA-256 over a domain tag and length-prefixed parts (unambiguous framing)."""
    h = hashlib.sha256()
    h.update(_encode_part(tag))
    for p in parts:
        h.update(_encode_part(p))
    return h.digest()


def expand(seed: bytes, nbytes: int) -> bytes:
    out = b""
    ctr = 0
    while len(out) < nbytes:
        out += hashlib.sha256(seed + ctr.to_bytes(4, "big")).digest()
        ctr += 1
    return out[:nbytes]


def hash_to_int(tag: str, modulus: int, *parts: Part) -> int:
    """Hash to [0, modulus) with 128 extra bits so the reduction bias is negligible."""
    nbytes = (modulus.bit_length() + 128 + 7) // 8
    return int.from_bytes(expand(hash_parts(tag, *parts), nbytes), "big") % modulus


class Drbg:
    """Hash-counter generator: reproducible under a seed, os entropy otherwise.

    Seeded output is SHAKE-256(key || block counter), consumed as a stream.
    """

    _BLOCK = 4096

    def __init__(self, seed: Optional[Part] = None, label: str = "") -> None:
        if seed is None:
            self._key: Optional[bytes] = None
        else:
            self._key = hash_parts("gopa/drbg", seed, label)
        self._ctr = 0
        self._buf = b""
        self._pos = 0

    def child(self, label: str) -> "Drbg":
        if self._key is None:
            return Drbg(None)
        return Drbg(self._key, label)

    def randbytes(self, n: int) -> bytes:
        if self._key is None:
            return os.urandom(n)
        if self._pos + n > len(self._buf):
            self._ctr += 1
            block = hashlib.shake_256(self._key + self._ctr.to_bytes(8, "big")).digest(max(self._BLOCK, n))
            self._buf = self._buf[self._pos:] + block
            self._pos = 0
        out = self._buf[self._pos:self._pos + n]
        self._pos += n
        return out

    def randbelow(self, n: int) -> int:
        if self._key is None:
            return secrets.randbelow(n)
        nbytes = (n.bit_length() + 64 + 7) // 8
        return int.from_bytes(self.randbytes(nbytes), "big") % n
