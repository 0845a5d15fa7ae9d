"""Byte encoding of proofs: tagged and length-prefixed, fixed-width group data."""

from __future__ import annotations

import struct
from typing import List, Tuple

from gopa.crypto.groups import Group
from gopa.zkp.circuit import MalformedProof
from gopa.zkp.proofs import MODES, Kind, Proof, UniformTranscript
from gopa.zkp.sigma import SigmaProof

MAGIC = b"GZ"
VERSION = 1


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.d = data
        self.i = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.i + n > len(self.d):
            raise MalformedProof("truncated proof bytes")
        out = self.d[self.i:self.i + n]
        self.i += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def done(self) -> None:
        if self.i != len(self.d):
            raise MalformedProof("trailing bytes after proof")


def _scalars(G: Group, xs: List[int]) -> bytes:
    n = G.scalar_len
    return struct.pack(">I", len(xs)) + b"".join(int(x).to_bytes(n, "big") for x in xs)


def _elements(G: Group, xs: List) -> bytes:
    return struct.pack(">I", len(xs)) + b"".join(G.encode(x) for x in xs)


def _read_scalars(G: Group, r: _Reader) -> List[int]:
    cnt = r.u32()
    n = G.scalar_len
    return [int.from_bytes(r.take(n), "big") for _ in range(cnt)]


def _read_elements(G: Group, r: _Reader) -> List:
    cnt = r.u32()
    n = G.element_len
    out = []
    for _ in range(cnt):
        try:
            out.append(G.decode(r.take(n)))
        except ValueError as e:
            raise MalformedProof(str(e)) from e
    return out


def encode_proof(G: Group, proof: Proof) -> bytes:
    sp = proof.sigma
    return b"".join([
        MAGIC, bytes([VERSION, int(proof.kind), MODES.index(proof.mode)]),
        _elements(G, proof.aux),
        int(sp.challenge).to_bytes(G.scalar_len, "big"),
        _elements(G, sp.announcements),
        _scalars(G, sp.or_challenges),
        _scalars(G, sp.responses),
    ])


def _read_proof(G: Group, r: _Reader) -> Proof:
    if r.take(2) != MAGIC or r.u8() != VERSION:
        raise MalformedProof("not a proof encoding")
    try:
        kind = Kind(r.u8())
        mode = MODES[r.u8()]
    except (ValueError, IndexError) as e:
        raise MalformedProof("unknown proof kind or mode") from e
    aux = _read_elements(G, r)
    ch = int.from_bytes(r.take(G.scalar_len), "big")
    ann = _read_elements(G, r)
    orc = _read_scalars(G, r)
    resp = _read_scalars(G, r)
    return Proof(kind, aux, SigmaProof(ch, ann, orc, resp), mode)


def decode_proof(G: Group, data: bytes) -> Proof:
    r = _Reader(data)
    p = _read_proof(G, r)
    r.done()
    return p


def encode_uniform(G: Group, tr: UniformTranscript) -> bytes:
    body = encode_proof(G, tr.proof)
    return (bytes([int(Kind.UNIFORM)]) + G.encode(tr.cz) + struct.pack(">Q", tr.t) + G.encode(tr.cy)
            + struct.pack(">I", len(body)) + body)


def decode_uniform(G: Group, data: bytes) -> UniformTranscript:
    r = _Reader(data)
    if r.u8() != Kind.UNIFORM:
        raise MalformedProof("not a uniform transcript")
    try:
        cz = G.decode(r.take(G.element_len))
        t = struct.unpack(">Q", r.take(8))[0]
        cy = G.decode(r.take(G.element_len))
    except ValueError as e:
        raise MalformedProof(str(e)) from e
    n = r.u32()
    proof = decode_proof(G, r.take(n))
    r.done()
    return UniformTranscript(cz, t, cy, proof)


def proof_size(G: Group, proof: Proof) -> Tuple[int, int]:
    """(bytes, number of group elements) of an encoded proof."""
    return len(encode_proof(G, proof)), len(proof.aux) + len(proof.sigma.announcements)
