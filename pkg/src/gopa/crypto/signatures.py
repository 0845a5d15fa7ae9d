"""Schnorr signatures used to authenticate bulletin entries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from gopa.crypto.groups import Element, Group
from gopa.crypto.hashing import Drbg, hash_parts, hash_to_int


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: Element


def keygen(group: Group, rng: Optional[Drbg] = None) -> KeyPair:
    rng = rng or Drbg()
    sk = 1 + rng.randbelow(group.q - 1)
    return KeyPair(sk, group.exp(group.generator, sk))


def _challenge(group: Group, R: Element, pk: Element, msg: bytes) -> int:
    return hash_to_int("gopa/sig/challenge", group.q, group.encode(R), group.encode(pk), msg)


def sign(group: Group, key: KeyPair, msg: bytes) -> bytes:
    """Deterministic-nonce Schnorr signature, encoded as e || s."""
    k = hash_to_int("gopa/sig/nonce", group.q, key.sk, msg)
    if k == 0:
        k = 1
    R = group.exp(group.generator, k)
    e = _challenge(group, R, key.pk, msg)
    s = (k + e * key.sk) % group.q
    n = group.scalar_len
    return e.to_bytes(n, "big") + s.to_bytes(n, "big")


def verify_signature(group: Group, pk: Element, msg: bytes, sig: bytes) -> bool:
    """True iff sig is valid for msg under pk; never raises."""
    try:
        n = group.scalar_len
        if not isinstance(sig, (bytes, bytearray)) or len(sig) != 2 * n:
            return False
        if pk is None or pk == group.identity or not group.is_element(pk):
            return False
        e = int.from_bytes(sig[:n], "big")
        s = int.from_bytes(sig[n:], "big")
        if e >= group.q or s >= group.q:
            return False
        R = group.mul(group.exp(group.generator, s), group.exp(pk, -e))
        return _challenge(group, R, pk, bytes(msg)) == e
    except Exception:
        return False


def fingerprint(group: Group, pk: Element) -> str:
    return hash_parts("gopa/sig/fp", group.encode(pk)).hex()[:16]
