"""Append-only signed public log, persisted as a hash-chained file.

Record layout (all integers big-endian):

    prev_hash[32] | seq u64 | author u32 | kind u8 | len u32 | payload | len u16 | sig

On disk every record is preceded by its u32 length.  The hash of a record is
SHA-256 over its bytes and becomes the next record's prev_hash.
"""

from __future__ import annotations

import hashlib
import json
import struct
import threading
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Dict, Iterable, Iterator, List, Optional

from gopa.crypto.groups import Element, Group, get_group
from gopa.crypto.hashing import hash_parts
from gopa.crypto.signatures import KeyPair, sign, verify_signature

GENESIS = bytes(32)
COORDINATOR = 0xFFFFFFFF
SIG_BACKEND = "schnorr127"


class BoardError(RuntimeError):
    pass


class RejectedEntry(BoardError):
    """Bad signature, unknown author or malformed payload."""


class SequenceConflict(BoardError):
    """The caller expected a different next sequence number; re-read the head and retry."""


class BoardCorrupted(BoardError):
    pass


class EntryKind(IntEnum):
    METADATA = 0  # enrollment, configuration, dropout notices
    COMMITMENT = 1
    PROOF = 2
    REVEAL = 3
    CHALLENGE = 4
    NOISY_VALUE = 5


def encode_payload(obj: Dict[str, Any]) -> bytes:
    """Canonical JSON, so equal payloads have equal bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def signing_message(author: int, kind: EntryKind, payload: bytes) -> bytes:
    return hash_parts("gopa/board/entry", author, int(kind), payload)


@dataclass(frozen=True)
class BulletinEntry:
    seq: int
    author: int
    kind: EntryKind
    payload: bytes
    sig: bytes
    prev_hash: bytes = GENESIS

    @property
    def data(self) -> Dict[str, Any]:
        return json.loads(self.payload)

    @property
    def payload_hash(self) -> bytes:
        return hashlib.sha256(self.payload).digest()

    def record(self) -> bytes:
        return b"".join([
            self.prev_hash, struct.pack(">QIB", self.seq, self.author, int(self.kind)),
            struct.pack(">I", len(self.payload)), self.payload,
            struct.pack(">H", len(self.sig)), self.sig,
        ])

    @property
    def hash(self) -> bytes:
        return hashlib.sha256(self.record()).digest()

    @classmethod
    def from_record(cls, rec: bytes) -> "BulletinEntry":
        try:
            prev = rec[:32]
            seq, author, kind = struct.unpack(">QIB", rec[32:45])
            (plen,) = struct.unpack(">I", rec[45:49])
            payload = rec[49:49 + plen]
            (slen,) = struct.unpack(">H", rec[49 + plen:51 + plen])
            sig = rec[51 + plen:51 + plen + slen]
            if len(prev) != 32 or len(payload) != plen or len(sig) != slen or 51 + plen + slen != len(rec):
                raise ValueError("length mismatch")
            return cls(seq, author, EntryKind(kind), payload, sig, prev)
        except (struct.error, ValueError) as e:
            raise BoardCorrupted(f"malformed record: {e}") from e


@dataclass(frozen=True)
class Draft:
    """A signed entry before the board assigns it a position."""

    author: int
    kind: EntryKind
    payload: bytes
    sig: bytes


def make_draft(group: Group, key: KeyPair, author: int, kind: EntryKind, payload: Dict[str, Any]) -> Draft:
    body = encode_payload(payload)
    return Draft(author, EntryKind(kind), body, sign(group, key, signing_message(author, kind, body)))


def enrollment_draft(group: Group, key: KeyPair, author: int) -> Draft:
    return make_draft(group, key, author, EntryKind.METADATA,
                      {"type": "enroll", "pk": group.encode(key.pk).hex()})


class Board:
    """The log.  Appends are serialised by a lock; readers see immutable prefixes.

    If `path` is given every append is written through to that file.
    """

    def __init__(self, path: Optional[str] = None, sig_backend: str = SIG_BACKEND) -> None:
        self.group = get_group(sig_backend)
        self._entries: List[BulletinEntry] = []
        self._keys: Dict[int, Element] = {}
        self._lock = threading.Lock()
        self.path = path
        if path is not None:
            with open(path, "wb"):
                pass

    # -- reads ---------------------------------------------------------------
    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[BulletinEntry]:
        return iter(self.entries())

    def entries(self) -> List[BulletinEntry]:
        return self._entries[:len(self._entries)]

    def read(self, seq: int) -> BulletinEntry:
        return self._entries[seq]

    @property
    def head(self) -> bytes:
        es = self._entries
        return es[-1].hash if es else GENESIS

    def key_of(self, author: int) -> Optional[Element]:
        return self._keys.get(author)

    # -- writes ----------------------------------------------------------------
    def _pk_from_enrollment(self, d: Draft) -> Optional[Element]:
        try:
            body = json.loads(d.payload)
            if body.get("type") != "enroll":
                return None
            return self.group.decode(bytes.fromhex(body["pk"]))
        except (ValueError, KeyError, TypeError, AttributeError):
            return None

    def append(self, draft: Draft, expected_seq: Optional[int] = None) -> int:
        """Check the signature, assign the next sequence number, persist."""
        pk = self._pk_from_enrollment(draft)
        with self._lock:
            if pk is not None and draft.author in self._keys:
                raise RejectedEntry(f"author {draft.author} is already enrolled")
            if pk is None:
                pk = self._keys.get(draft.author)
                if pk is None:
                    raise RejectedEntry(f"author {draft.author} is not enrolled")
            if not verify_signature(self.group, pk, signing_message(draft.author, draft.kind, draft.payload),
                                    draft.sig):
                raise RejectedEntry(f"bad signature from author {draft.author}")
            if expected_seq is not None and expected_seq != len(self._entries):
                raise SequenceConflict(f"next sequence number is {len(self._entries)}, not {expected_seq}")
            if draft.author not in self._keys:
                self._keys[draft.author] = pk
            return self._store(draft)

    def append_unchecked(self, draft: Draft) -> int:
        """Store without the signature check.

        Models a log that was tampered with or relayed by a faulty operator;
        verify_run re-checks every signature, so such entries are still caught.
        """
        with self._lock:
            pk = self._pk_from_enrollment(draft)
            if pk is not None and draft.author not in self._keys:
                self._keys[draft.author] = pk
            return self._store(draft)

    def _store(self, d: Draft) -> int:
        seq = len(self._entries)
        e = BulletinEntry(seq, d.author, d.kind, d.payload, d.sig, self.head)
        if self.path is not None:
            rec = e.record()
            with open(self.path, "ab") as fh:
                fh.write(struct.pack(">I", len(rec)) + rec)
                fh.flush()
        self._entries.append(e)
        return seq

    # -- persistence -------------------------------------------------------------
    def to_bytes(self) -> bytes:
        out = bytearray()
        for e in self._entries:
            rec = e.record()
            out += struct.pack(">I", len(rec)) + rec
        return bytes(out)

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes, sig_backend: str = SIG_BACKEND) -> "Board":
        """Rebuild a board, checking the hash chain and sequence numbers (not signatures)."""
        b = cls(sig_backend=sig_backend)
        i = 0
        prev = GENESIS
        while i < len(data):
            if i + 4 > len(data):
                raise BoardCorrupted("truncated length prefix")
            (n,) = struct.unpack(">I", data[i:i + 4])
            rec = data[i + 4:i + 4 + n]
            if len(rec) != n:
                raise BoardCorrupted("truncated record")
            e = BulletinEntry.from_record(rec)
            if e.prev_hash != prev:
                raise BoardCorrupted(f"hash chain broken at entry {e.seq}")
            if e.seq != len(b._entries):
                raise BoardCorrupted(f"sequence gap at entry {e.seq}")
            pk = b._pk_from_enrollment(Draft(e.author, e.kind, e.payload, e.sig))
            if pk is not None and e.author not in b._keys:
                b._keys[e.author] = pk
            b._entries.append(e)
            prev = e.hash
            i += 4 + n
        return b

    @classmethod
    def load(cls, path: str, sig_backend: str = SIG_BACKEND) -> "Board":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), sig_backend)


def entries_of(board: Board, author: Optional[int] = None, kind: Optional[EntryKind] = None,
               type_: Optional[str] = None) -> Iterable[BulletinEntry]:
    for e in board.entries():
        if author is not None and e.author != author:
            continue
        if kind is not None and e.kind != kind:
            continue
        if type_ is not None:
            try:
                if e.data.get("type") != type_:
                    continue
            except ValueError:
                continue
        yield e
