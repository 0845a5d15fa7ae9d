"""Pedersen commitments over a prime-order group."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Tuple

from gopa.crypto.groups import ConfigurationError, Element, Group, get_group
from gopa.crypto.hashing import hash_parts


@dataclass(frozen=True)
class GroupParams:
    """Public commitment parameters: c = g^m h^r in `group`."""

    group: Group
    g: Element
    h: Element
    beacon_hash: bytes = b""

    @property
    def q(self) -> int:
        return self.group.q

    @property
    def backend(self) -> str:
        return self.group.backend

    def to_json(self) -> str:
        G = self.group
        return json.dumps({
            "group": G.name,
            "backend": G.backend,
            "q": str(G.q),
            "g": G.encode(self.g).hex(),
            "h": G.encode(self.h).hex(),
            "beacon_hash": self.beacon_hash.hex(),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GroupParams":
        d = json.loads(text)
        G = get_group(d["group"])
        return cls(G, G.decode(bytes.fromhex(d["g"])), G.decode(bytes.fromhex(d["h"])),
                   bytes.fromhex(d["beacon_hash"]))


def setup_from_beacon(beacon_output: bytes, backend: str = "schnorr127") -> GroupParams:
    """Derive g and h from a public beacon output by hash-to-group.

    Nobody ever exponentiates a known scalar to get h, so log_g(h) stays unknown.
    """
    if len(beacon_output) < 32:
        raise ValueError("beacon output must carry at least 256 bits")
    try:
        G = get_group(backend)
    except ConfigurationError:
        raise
    g = G.hash_to_group("gopa/setup/g", beacon_output)
    h = G.hash_to_group("gopa/setup/h", beacon_output)
    ctr = 0
    while h == g:  # only plausible in the toy group
        ctr += 1
        h = G.hash_to_group("gopa/setup/h", beacon_output + ctr.to_bytes(4, "big"))
    return GroupParams(G, g, h, hash_parts("gopa/setup/transcript", beacon_output))


@dataclass(frozen=True)
class Commitment:
    """A commitment c, with the opening (m, r) when held by the prover."""

    c: Element
    m: Optional[int] = None
    r: Optional[int] = None

    @property
    def has_opening(self) -> bool:
        return self.m is not None and self.r is not None


def to_zq(v: int, q: int) -> int:
    """Signed integer to Z_q; negatives map to q - |v|."""
    return v % q


def from_zq(v: int, q: int) -> int:
    v %= q
    return v if v <= q // 2 else v - q


def commit(params: GroupParams, m: int, r: int) -> Commitment:
    G = params.group
    c = G.mul(G.exp(params.g, m), G.exp(params.h, r))
    return Commitment(c, m % G.q, r % G.q)


def open_ok(params: GroupParams, com: Commitment, m: int, r: int) -> bool:
    return commit(params, m, r).c == com.c


def combine(params: GroupParams, a: Commitment, b: Commitment) -> Commitment:
    """Homomorphic addition; the opening adds when both are known."""
    G = params.group
    c = G.mul(a.c, b.c)
    if a.has_opening and b.has_opening:
        return Commitment(c, (a.m + b.m) % G.q, (a.r + b.r) % G.q)
    return Commitment(c)


def negated_pair_commit(params: GroupParams, delta: int, r: int) -> Tuple[Commitment, Commitment]:
    """Commitments to (delta, r) and (-delta, -r); their product is the identity."""
    return commit(params, delta, r), commit(params, -delta, -r)
