"""Generic sigma protocols over statements built from three node types.

    Eq   lhs = prod_i base_i ** secret_i      (a discrete-log representation)
    And  all children hold                     (one shared challenge)
    Or   at least one child holds              (challenge split, others simulated)

Secrets are referred to by name.  Inside one challenge scope a name gets a
single response, which is what links equations that share a secret (for
example the x of an equality proof).  Every Or branch opens a fresh scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

from gopa.crypto.groups import Element, Group
from gopa.crypto.hashing import Drbg, hash_to_int


class ProofError(ValueError):
    """The prover was asked to prove a false statement."""


class Eq:
    __slots__ = ("lhs", "terms")

    def __init__(self, lhs: Element, terms: Sequence[Tuple[Element, str]]) -> None:
        self.lhs = lhs
        self.terms = tuple(terms)


class And:
    __slots__ = ("children",)

    def __init__(self, children: Sequence["Node"]) -> None:
        self.children = list(children)


class Or:
    __slots__ = ("children", "real")

    def __init__(self, children: Sequence["Node"], real: Optional[int] = None) -> None:
        if len(children) < 2:
            raise ValueError("Or needs at least two branches")
        self.children = list(children)
        self.real = real  # prover side only, never serialised


Node = Union[Eq, And, Or]


@dataclass
class SigmaProof:
    challenge: int
    announcements: List[Element]
    or_challenges: List[int]
    responses: List[int]


# ---------------------------------------------------------------------------
# canonical traversal helpers

def _walk_keys(node: Node, scope: str, counter: List[int], seen: Dict[Tuple[str, str], None]) -> None:
    if isinstance(node, Eq):
        for _, name in node.terms:
            seen.setdefault((scope, name), None)
    elif isinstance(node, And):
        for ch in node.children:
            _walk_keys(ch, scope, counter, seen)
    else:
        oid = counter[0]
        counter[0] += 1
        for i, ch in enumerate(node.children):
            _walk_keys(ch, f"{scope}/{oid}.{i}", counter, seen)


def response_keys(root: Node) -> List[Tuple[str, str]]:
    seen: Dict[Tuple[str, str], None] = {}
    _walk_keys(root, "", [0], seen)
    return list(seen)


def encode_statement(group: Group, root: Node) -> bytes:
    """Deterministic byte encoding of a statement tree (Or choices excluded)."""
    out = bytearray()
    enc_cache: Dict[object, bytes] = {}

    def enc(e: Element) -> bytes:
        try:
            return enc_cache[e]
        except (KeyError, TypeError):
            b = group.encode(e)
            try:
                enc_cache[e] = b
            except TypeError:
                pass
            return b

    stack = [root]
    while stack:
        node = stack.pop()
        if isinstance(node, Eq):
            out += b"E" + len(node.terms).to_bytes(2, "big") + enc(node.lhs)
            for base, name in node.terms:
                nb = name.encode()
                out += enc(base) + len(nb).to_bytes(2, "big") + nb
        else:
            out += (b"A" if isinstance(node, And) else b"O") + len(node.children).to_bytes(4, "big")
            stack.extend(reversed(node.children))
    return bytes(out)


# ---------------------------------------------------------------------------
# challenge sources

ChallengeSource = Callable[[bytes], int]


def fiat_shamir(group: Group, domain: str, root: Node, announcements: Sequence[Element],
                statement: Optional[bytes] = None) -> int:
    """Challenge hash.  `statement` may replace the tree encoding when the
    caller has a shorter encoding that determines the tree completely."""
    ann = b"".join(group.encode(a) for a in announcements)
    if statement is None:
        statement = encode_statement(group, root)
    return hash_to_int("gopa/fs", group.q, domain, statement, ann)


# ---------------------------------------------------------------------------
# prover

class _Prover:
    def __init__(self, group: Group, witness: Dict[str, int], rng: Drbg, check: bool) -> None:
        self.G = group
        self.q = group.q
        self.w = witness
        self.rng = rng
        self.check = check
        self.nonces: Dict[Tuple[str, str], int] = {}
        self.resp: Dict[Tuple[str, str], int] = {}
        self.ann: List[Element] = []
        # per Or node (DFS order): full challenge vector, None for the real child
        self.or_ch: List[List[Optional[int]]] = []
        self.counter = 0

    def commit(self, node: Node, scope: str, sim: Optional[int]) -> None:
        G, q = self.G, self.q
        if isinstance(node, Eq):
            acc = G.identity
            if sim is None:
                if self.check:
                    self._check_eq(node)
                for base, name in node.terms:
                    k = self.nonces.get((scope, name))
                    if k is None:
                        k = self.nonces[(scope, name)] = self.rng.randbelow(q)
                    acc = G.mul(acc, G.exp(base, k))
            else:
                for base, name in node.terms:
                    s = self.resp.get((scope, name))
                    if s is None:
                        s = self.resp[(scope, name)] = self.rng.randbelow(q)
                    acc = G.mul(acc, G.exp(base, s))
                acc = G.mul(acc, G.exp(node.lhs, -sim))
            self.ann.append(acc)
        elif isinstance(node, And):
            for ch in node.children:
                self.commit(ch, scope, sim)
        else:
            oid = self.counter
            self.counter += 1
            n = len(node.children)
            chs: List[Optional[int]] = [None] * n
            self.or_ch.append(chs)
            if sim is None:
                real = node.real
                if real is None or not 0 <= real < n:
                    raise ProofError("Or node without a valid real branch")
                for i in range(n):
                    if i != real:
                        chs[i] = self.rng.randbelow(q)
            else:
                tot = 0
                for i in range(n - 1):
                    chs[i] = self.rng.randbelow(q)
                    tot += chs[i]
                chs[n - 1] = (sim - tot) % q
            for i, ch in enumerate(node.children):
                self.commit(ch, f"{scope}/{oid}.{i}", chs[i])

    def _check_eq(self, node: Eq) -> None:
        G = self.G
        acc = G.identity
        for base, name in node.terms:
            acc = G.mul(acc, G.exp(base, self.w[name]))
        if acc != node.lhs:
            raise ProofError("witness does not satisfy an equation of the statement")

    def respond(self, node: Node, scope: str, c: int) -> None:
        q = self.q
        if isinstance(node, Eq):
            for _, name in node.terms:
                key = (scope, name)
                if key not in self.resp:
                    self.resp[key] = (self.nonces[key] + c * self.w[name]) % q
        elif isinstance(node, And):
            for ch in node.children:
                self.respond(ch, scope, c)
        else:
            oid = self.counter
            self.counter += 1
            chs = self.or_ch[oid]
            real = node.real
            chs[real] = (c - sum(x for i, x in enumerate(chs) if i != real)) % q
            for i, ch in enumerate(node.children):
                if i == real:
                    self.respond(ch, f"{scope}/{oid}.{i}", chs[i])
                else:
                    self._skip(ch)

    def _skip(self, node: Node) -> None:
        # keep the Or counter aligned with the commit pass
        if isinstance(node, And):
            for ch in node.children:
                self._skip(ch)
        elif isinstance(node, Or):
            self.counter += 1
            for ch in node.children:
                self._skip(ch)


def prove(group: Group, root: Node, witness: Dict[str, int], *, domain: str = "",
          challenge: Optional[ChallengeSource] = None, rng: Optional[Drbg] = None,
          check: bool = True, statement: Optional[bytes] = None) -> SigmaProof:
    """Run the prover.

    With challenge=None the challenge is the Fiat-Shamir hash of
    (domain, statement, announcements); otherwise challenge(announcement bytes)
    plays the verifier.  check=False lets tests produce transcripts for false
    statements (they must then fail verification).
    """
    p = _Prover(group, witness, rng or Drbg(), check)
    p.commit(root, "", None)
    if challenge is None:
        c = fiat_shamir(group, domain, root, p.ann, statement)
    else:
        c = challenge(b"".join(group.encode(a) for a in p.ann)) % group.q
    p.counter = 0
    p.respond(root, "", c)
    or_flat: List[int] = []
    for chs in p.or_ch:
        or_flat.extend(int(x) for x in chs[:-1])
    keys = response_keys(root)
    return SigmaProof(c, p.ann, or_flat, [int(p.resp[k]) for k in keys])


# ---------------------------------------------------------------------------
# verifier

class _Verifier:
    def __init__(self, group: Group, proof: SigmaProof, resp: Dict[Tuple[str, str], int]) -> None:
        self.G = group
        self.ann: Iterator[Element] = iter(proof.announcements)
        self.orc: Iterator[int] = iter(proof.or_challenges)
        self.resp = resp
        self.counter = 0

    def check(self, node: Node, scope: str, c: int) -> bool:
        G = self.G
        if isinstance(node, Eq):
            A = next(self.ann)
            acc = G.identity
            for base, name in node.terms:
                acc = G.mul(acc, G.exp(base, self.resp[(scope, name)]))
            return acc == G.mul(A, G.exp(node.lhs, c))
        if isinstance(node, And):
            ok = True
            for ch in node.children:
                ok = self.check(ch, scope, c) and ok
            return ok
        oid = self.counter
        self.counter += 1
        n = len(node.children)
        chs = [next(self.orc) for _ in range(n - 1)]
        chs.append((c - sum(chs)) % G.q)
        ok = True
        for i, ch in enumerate(node.children):
            ok = self.check(ch, f"{scope}/{oid}.{i}", chs[i]) and ok
        return ok


def verify(group: Group, root: Node, proof: SigmaProof, *, domain: str = "",
           expected_challenge: Optional[int] = None, statement: Optional[bytes] = None) -> bool:
    """Check a transcript.  Fiat-Shamir unless expected_challenge is given."""
    try:
        keys = response_keys(root)
        if len(keys) != len(proof.responses):
            return False
        q = group.q
        if any(not 0 <= s < q for s in proof.responses) or any(not 0 <= x < q for x in proof.or_challenges):
            return False
        if not all(group.is_element(a) for a in proof.announcements):
            return False
        if expected_challenge is None:
            c = fiat_shamir(group, domain, root, proof.announcements, statement)
        else:
            c = expected_challenge % q
        if c != proof.challenge:
            return False
        v = _Verifier(group, proof, dict(zip(keys, proof.responses)))
        ok = v.check(root, "", c)
        # every announcement and Or challenge must have been consumed exactly
        if next(v.ann, None) is not None or next(v.orc, None) is not None:
            return False
        return ok
    except StopIteration:
        return False


# ---------------------------------------------------------------------------
# simulator (zero-knowledge checks)

def simulate(group: Group, root: Node, challenge: int, rng: Optional[Drbg] = None) -> SigmaProof:
    """Transcript for a given challenge without any witness."""
    p = _Prover(group, {}, rng or Drbg(), check=False)
    p.commit(root, "", challenge % group.q)
    or_flat: List[int] = []
    for chs in p.or_ch:
        or_flat.extend(int(x) for x in chs[:-1])
    keys = response_keys(root)
    return SigmaProof(challenge % group.q, p.ann, or_flat, [int(p.resp[k]) for k in keys])
