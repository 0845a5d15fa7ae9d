"""Proof kinds over Pedersen commitments: equality, linear, product, bit, range,
modular sum and uniform sampling.

Every prover returns a Proof whose sigma challenge is either the Fiat-Shamir
hash (default) or comes from an explicit challenge source.  Verifiers rebuild
the statement from public data and the auxiliary commitments in the proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, List, Optional, Sequence, Tuple

from gopa.crypto.groups import Element
from gopa.crypto.hashing import Drbg, hash_parts
from gopa.crypto.pedersen import Commitment, GroupParams, commit
from gopa.zkp import sigma
from gopa.zkp.circuit import Circuit, Lin, MalformedProof, Wire
from gopa.zkp.sigma import ChallengeSource, Eq, SigmaProof


class Kind(IntEnum):
    EQ = 1
    LINEAR = 2
    PROD = 3
    BIT = 4
    RANGE = 5
    MOD = 6
    UNIFORM = 7
    NORMAL = 8


MODES = ("fiat_shamir", "interactive")


@dataclass
class Proof:
    """A transcript: auxiliary commitments plus the sigma messages."""

    kind: Kind
    aux: List[Element]
    sigma: SigmaProof
    mode: str = "fiat_shamir"


def domain_tag(kind: Kind, user: str = "", context: str = "") -> str:
    """Challenge domain: proof kind and user id are always mixed in."""
    return f"gopa/zkp/{kind.name.lower()}|user={user}|{context}"


def _run(params: GroupParams, kind: Kind, circ: Circuit, domain: str,
         challenge: Optional[ChallengeSource], check: bool) -> Proof:
    root = circ.finish()
    sp = sigma.prove(params.group, root, circ.witness, domain=domain, challenge=challenge,
                     rng=circ.rng.child("nonces"), check=check, statement=circ.statement_bytes())
    return Proof(kind, list(circ.aux_out), sp, "fiat_shamir" if challenge is None else "interactive")


def public_bytes(kind: Kind, *values: int) -> bytes:
    """Encoding of the public integers a circuit statement depends on."""
    return hash_parts("gopa/public", int(kind), *values)


def _check(params: GroupParams, kind: Kind, proof: Proof, build: Callable[[Circuit], None],
           domain: str, expected_challenge: Optional[int], public: bytes) -> bool:
    if proof.kind != kind:
        return False
    if (proof.mode == "interactive") != (expected_challenge is not None):
        return False
    try:
        circ = Circuit(params, prover=False, aux=proof.aux, public=public)
        build(circ)
        root = circ.finish()
    except (MalformedProof, ValueError):
        return False
    return sigma.verify(params.group, root, proof.sigma, domain=domain, expected_challenge=expected_challenge,
                        statement=circ.statement_bytes())


# ---------------------------------------------------------------------------
# equality

def _eq_statement(c1: Element, c2: Element, b1: Tuple[Element, Element], b2: Tuple[Element, Element]) -> sigma.Node:
    return sigma.And([Eq(c1, [(b1[0], "x"), (b1[1], "r")]), Eq(c2, [(b2[0], "x"), (b2[1], "r2")])])


def zkp_eq(params: GroupParams, c1: Element, c2: Element, bases1: Tuple[Element, Element],
           bases2: Tuple[Element, Element], x: int, r: int, r2: int, *, domain: str = "",
           challenge: Optional[ChallengeSource] = None, rng: Optional[Drbg] = None,
           check: bool = True) -> Proof:
    """c1 = g1^x h1^r and c2 = g2^x h2^r2 commit to the same x."""
    q = params.q
    root = _eq_statement(c1, c2, bases1, bases2)
    sp = sigma.prove(params.group, root, {"x": x % q, "r": r % q, "r2": r2 % q}, domain=domain,
                     challenge=challenge, rng=rng, check=check)
    return Proof(Kind.EQ, [], sp, "fiat_shamir" if challenge is None else "interactive")


def verify_eq(params: GroupParams, c1: Element, c2: Element, bases1: Tuple[Element, Element],
              bases2: Tuple[Element, Element], proof: Proof, *, domain: str = "",
              expected_challenge: Optional[int] = None) -> bool:
    if proof.kind != Kind.EQ or proof.aux:
        return False
    if (proof.mode == "interactive") != (expected_challenge is not None):
        return False
    root = _eq_statement(c1, c2, bases1, bases2)
    return sigma.verify(params.group, root, proof.sigma, domain=domain, expected_challenge=expected_challenge)


# ---------------------------------------------------------------------------
# linear relation <x, a> = b

def linear_combination(params: GroupParams, commitments: Sequence[Element], coeffs: Sequence[int]) -> Element:
    G = params.group
    acc = G.identity
    for c, a in zip(commitments, coeffs):
        acc = G.mul(acc, c if a == 1 else G.exp(c, a))
    return acc


def zkp_linear(params: GroupParams, commitments: Sequence[Commitment], coeffs: Sequence[int], b: int, *,
               domain: str = "", challenge: Optional[ChallengeSource] = None,
               rng: Optional[Drbg] = None, check: bool = True) -> Proof:
    """sum a_i x_i = b (mod q) for commitments c_i = g^x_i h^r_i, with public b."""
    if len(commitments) != len(coeffs):
        raise ValueError("one coefficient per commitment")
    q = params.q
    cL = linear_combination(params, [c.c for c in commitments], coeffs)
    rL = sum(a * c.r for a, c in zip(coeffs, commitments)) % q
    cb = params.group.exp(params.g, b)
    p = zkp_eq(params, cL, cb, (params.g, params.h), (params.g, params.h), b, rL, 0,
               domain=domain, challenge=challenge, rng=rng, check=check)
    p.kind = Kind.LINEAR
    return p


def verify_linear(params: GroupParams, commitments: Sequence[Element], coeffs: Sequence[int], b: int,
                  proof: Proof, *, domain: str = "", expected_challenge: Optional[int] = None) -> bool:
    if proof.kind != Kind.LINEAR or len(commitments) != len(coeffs):
        return False
    cL = linear_combination(params, commitments, coeffs)
    cb = params.group.exp(params.g, b)
    p = Proof(Kind.EQ, proof.aux, proof.sigma, proof.mode)
    return verify_eq(params, cL, cb, (params.g, params.h), (params.g, params.h), p,
                     domain=domain, expected_challenge=expected_challenge)


# ---------------------------------------------------------------------------
# product a b = d

def _prod_statement(params: GroupParams, ca: Element, cb: Element, cd: Element) -> sigma.Node:
    return sigma.And([Eq(cb, [(params.g, "b"), (params.h, "rb")]), Eq(cd, [(ca, "b"), (params.h, "s")])])


def zkp_prod(params: GroupParams, ca: Commitment, cb: Commitment, cd: Commitment, *, domain: str = "",
             challenge: Optional[ChallengeSource] = None, rng: Optional[Drbg] = None,
             check: bool = True) -> Proof:
    """d = a b (mod q), using c_d = c_a^b h^(r_d - b r_a)."""
    q = params.q
    w = {"b": cb.m % q, "rb": cb.r % q, "s": (cd.r - cb.m * ca.r) % q}
    root = _prod_statement(params, ca.c, cb.c, cd.c)
    sp = sigma.prove(params.group, root, w, domain=domain, challenge=challenge, rng=rng, check=check)
    return Proof(Kind.PROD, [], sp, "fiat_shamir" if challenge is None else "interactive")


def verify_prod(params: GroupParams, ca: Element, cb: Element, cd: Element, proof: Proof, *,
                domain: str = "", expected_challenge: Optional[int] = None) -> bool:
    if proof.kind != Kind.PROD or proof.aux:
        return False
    if (proof.mode == "interactive") != (expected_challenge is not None):
        return False
    root = _prod_statement(params, ca, cb, cd)
    return sigma.verify(params.group, root, proof.sigma, domain=domain, expected_challenge=expected_challenge)


# ---------------------------------------------------------------------------
# bit, range, modular sum

def _input(circ: Circuit, c: Commitment | Element) -> Wire:
    if isinstance(c, Commitment):
        return circ.input(c.c, c.m, c.r)
    return circ.input(c)


def zkp_bit(params: GroupParams, cb: Commitment, *, domain: str = "",
            challenge: Optional[ChallengeSource] = None, rng: Optional[Drbg] = None,
            check: bool = True) -> Proof:
    """b in {0, 1}: Or of c = h^r and c/g = h^r."""
    circ = Circuit(params, prover=True, rng=rng, check=check, public=public_bytes(Kind.BIT))
    circ.assert_bit(_input(circ, cb))
    return _run(params, Kind.BIT, circ, domain, challenge, check)


def verify_bit(params: GroupParams, cb: Element, proof: Proof, *, domain: str = "",
               expected_challenge: Optional[int] = None) -> bool:
    return _check(params, Kind.BIT, proof, lambda circ: circ.assert_bit(circ.input(cb)), domain,
                  expected_challenge, public_bytes(Kind.BIT))


def zkp_range(params: GroupParams, cx: Commitment, M: int, *, domain: str = "",
              challenge: Optional[ChallengeSource] = None, rng: Optional[Drbg] = None,
              check: bool = True) -> Proof:
    """x in [0, M]: x and M - x both decompose into l = floor(log2 M)+1 bits."""
    circ = Circuit(params, prover=True, rng=rng, check=check, public=public_bytes(Kind.RANGE, M))
    circ.assert_interval(_input(circ, cx), 0, M)
    return _run(params, Kind.RANGE, circ, domain, challenge, check)


def verify_range(params: GroupParams, cx: Element, M: int, proof: Proof, *, domain: str = "",
                 expected_challenge: Optional[int] = None) -> bool:
    return _check(params, Kind.RANGE, proof, lambda circ: circ.assert_interval(circ.input(cx), 0, M),
                  domain, expected_challenge, public_bytes(Kind.RANGE, M))


def _mod_build(circ: Circuit, y: Wire, z: Wire, M: int, t: int, bit_value: Optional[int]) -> None:
    circ.assert_interval(y, 0, M - 1)
    circ.assert_interval(z, 0, M - 1)
    b = circ.new(bit_value)
    circ.assert_bit(b)
    circ.assert_zero(Lin.of(y) - z - t + b * M)


def zkp_mod(params: GroupParams, cy: Commitment, cz: Commitment, M: int, t: int, *, domain: str = "",
            challenge: Optional[ChallengeSource] = None, rng: Optional[Drbg] = None,
            check: bool = True) -> Proof:
    """y = z + t mod M with y, z in [0, M-1]: y = z + t - bM for a committed bit b."""
    if 2 * M >= params.q:
        raise ValueError("M must be below q/2")
    circ = Circuit(params, prover=True, rng=rng, check=check, public=public_bytes(Kind.MOD, M, t))
    y, z = _input(circ, cy), _input(circ, cz)
    b = 1 if cz.m + t >= M else 0
    _mod_build(circ, y, z, M, t, b)
    return _run(params, Kind.MOD, circ, domain, challenge, check)


def verify_mod(params: GroupParams, cy: Element, cz: Element, M: int, t: int, proof: Proof, *,
               domain: str = "", expected_challenge: Optional[int] = None) -> bool:
    if 2 * M >= params.q:
        return False
    return _check(params, Kind.MOD, proof,
                  lambda circ: _mod_build(circ, circ.input(cy), circ.input(cz), M, t, None),
                  domain, expected_challenge, public_bytes(Kind.MOD, M, t))


# ---------------------------------------------------------------------------
# uniform sampling: commit z first, then y = z + t mod M for a beacon value t

@dataclass
class UniformTranscript:
    cz: Element
    t: int
    cy: Element
    proof: Proof


class UniformProver:
    """Two-phase prover.  commitment() must be published before t is known."""

    def __init__(self, params: GroupParams, M: int, rng: Optional[Drbg] = None,
                 z: Optional[int] = None) -> None:
        self.pp = params
        self.M = M
        self.rng = rng or Drbg()
        self.z = self.rng.randbelow(M) if z is None else z
        self.cz = commit(params, self.z, self.rng.randbelow(params.q))

    def commitment(self) -> Element:
        return self.cz.c

    def respond(self, t: int, *, domain: str = "", check: bool = True) -> Tuple[Commitment, UniformTranscript]:
        if not 0 <= t < self.M:
            raise ValueError("beacon value outside [0, M-1]")
        y = (self.z + t) % self.M
        cy = commit(self.pp, y, self.rng.randbelow(self.pp.q))
        proof = zkp_mod(self.pp, cy, self.cz, self.M, t, domain=domain, rng=self.rng, check=check)
        proof.kind = Kind.UNIFORM
        return cy, UniformTranscript(self.cz.c, t, cy.c, proof)


def zkp_uniform(params: GroupParams, challenge_source: Callable[[Element], int], M: int, *,
                domain: str = "", rng: Optional[Drbg] = None) -> Tuple[Commitment, UniformTranscript]:
    """Commit to z, obtain t from the challenge source, prove y = z + t mod M."""
    prover = UniformProver(params, M, rng)
    t = challenge_source(prover.commitment())
    return prover.respond(t, domain=domain)


def verify_uniform(params: GroupParams, tr: UniformTranscript, M: int, t_expected: int, *,
                   domain: str = "") -> bool:
    """The t inside the transcript must be the one the beacon produced."""
    if tr.t != t_expected or tr.proof.kind != Kind.UNIFORM:
        return False
    p = Proof(Kind.MOD, tr.proof.aux, tr.proof.sigma, tr.proof.mode)
    return verify_mod(params, tr.cy, tr.cz, M, tr.t, p, domain=domain)
