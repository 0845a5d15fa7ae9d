"""Commit-then-reveal randomness beacon with a hash-chained challenge stream.

Every participant commits to a seed s_u in [0, M) with a hash commitment,
and only after all commitments are in do reveals start.  The partial sums
s'_u = s_u + s'_(u-1) mod M give t_0 = s'_n, which is uniform as long as a
single participant picked its seed uniformly.  Further challenges come from
the chain t_i = H(t_(i-1)), kept as 256-bit states and reduced mod M by
rejection sampling.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from gopa.crypto.hashing import Drbg, hash_parts


class BeaconError(RuntimeError):
    pass


class OrderViolation(BeaconError):
    def __init__(self, user: int, msg: str) -> None:
        super().__init__(msg)
        self.user = user


class RevealMismatch(BeaconError):
    def __init__(self, user: int) -> None:
        super().__init__(f"user {user} revealed a seed that does not match its commitment")
        self.user = user


def seed_commitment(seed: int, nonce: bytes) -> bytes:
    return hash_parts("gopa/beacon/commit", seed, nonce)


def reduce_mod(state: bytes, M: int) -> int:
    """Uniform value in [0, M) from a 256-bit state, rehashing on the biased tail."""
    if M <= 0:
        raise ValueError("M must be positive")
    nbits = max(256, M.bit_length() + 64)
    top = 1 << nbits
    limit = top - top % M
    s = state
    while True:
        v = int.from_bytes(_widen(s, nbits), "big")
        if v < limit:
            return v % M
        s = hash_parts("gopa/beacon/reject", s)


def _widen(state: bytes, nbits: int) -> bytes:
    out = state
    i = 0
    while len(out) * 8 < nbits:
        i += 1
        out += hash_parts("gopa/beacon/widen", state, i)
    v = int.from_bytes(out, "big") >> (len(out) * 8 - nbits)
    return v.to_bytes((nbits + 7) // 8, "big")


class ChallengeStream:
    """t_0 and the chained states; value(i) is the i-th public challenge."""

    def __init__(self, t0: int, M: int, label: str = "") -> None:
        self.t0 = t0
        self.M = M
        self._states = [hash_parts("gopa/beacon/t0", label, M, t0)]

    def state(self, i: int) -> bytes:
        while len(self._states) <= i:
            self._states.append(hash_parts("gopa/beacon/chain", self._states[-1]))
        return self._states[i]

    def value(self, i: int) -> int:
        if i == 0:
            return self.t0
        return reduce_mod(self.state(i), self.M)

    def values(self, count: int, start: int = 1) -> List[int]:
        return [self.value(i) for i in range(start, start + count)]


@dataclass
class BeaconState:
    """One beacon round over an ordered participant list."""

    users: Sequence[int]
    M: int
    label: str = ""
    commitments: Dict[int, bytes] = field(default_factory=dict)
    seeds: Dict[int, int] = field(default_factory=dict)
    flagged: Dict[int, str] = field(default_factory=dict)

    def commit(self, u: int, c: bytes) -> None:
        if u not in self.users:
            raise BeaconError(f"user {u} is not a beacon participant")
        if self.seeds:
            self.flagged.setdefault(u, "order_violation")
            raise OrderViolation(u, f"user {u} committed after reveals started")
        if u in self.commitments:
            raise BeaconError(f"user {u} committed twice")
        self.commitments[u] = bytes(c)

    @property
    def all_committed(self) -> bool:
        return all(u in self.commitments for u in self.users)

    def reveal(self, u: int, seed: int, nonce: bytes) -> None:
        if not self.all_committed:
            self.flagged.setdefault(u, "order_violation")
            raise OrderViolation(u, f"user {u} revealed before every participant committed")
        if not 0 <= seed < self.M or seed_commitment(seed, nonce) != self.commitments[u]:
            self.flagged.setdefault(u, "beacon_mismatch")
            raise RevealMismatch(u)
        self.seeds[u] = seed

    def partial_sums(self) -> List[int]:
        """s'_u over the participants whose reveal was accepted, in list order."""
        out, acc = [], 0
        for u in self.users:
            if u in self.seeds:
                acc = (acc + self.seeds[u]) % self.M
                out.append(acc)
        return out

    @property
    def complete(self) -> bool:
        return all(u in self.seeds or u in self.flagged for u in self.users)

    def output(self) -> ChallengeStream:
        if not self.complete:
            missing = [u for u in self.users if u not in self.seeds and u not in self.flagged]
            raise BeaconError(f"waiting for reveals from {missing}")
        ps = self.partial_sums()
        return ChallengeStream(ps[-1] if ps else 0, self.M, self.label)


@dataclass
class Participant:
    """A beacon participant; `choose` picks the seed from the commitments seen so far."""

    uid: int
    choose: Optional[Callable[[Dict[int, bytes]], int]] = None
    rng: Optional[Drbg] = None
    seed: int = 0
    nonce: bytes = b""

    def make_commitment(self, M: int, seen: Dict[int, bytes]) -> bytes:
        if self.choose is not None:
            self.seed = self.choose(dict(seen)) % M
        else:
            self.seed = self.rng.randbelow(M) if self.rng is not None else secrets.randbelow(M)
        self.nonce = self.rng.randbytes(32) if self.rng is not None else secrets.token_bytes(32)
        return seed_commitment(self.seed, self.nonce)


def beacon_round(participants: Sequence[Participant], M: int, label: str = "") -> ChallengeStream:
    """Run commit then reveal among in-process participants and return the stream."""
    st = BeaconState([p.uid for p in participants], M, label)
    for p in participants:
        st.commit(p.uid, p.make_commitment(M, st.commitments))
    for p in participants:
        st.reveal(p.uid, p.seed, p.nonce)
    return st.output()
