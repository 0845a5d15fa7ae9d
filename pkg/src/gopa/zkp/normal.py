"""Proof that a committed eta is a correctly derived Gaussian sample.

Given c_y for a uniform y' in [0, M-1], the prover commits to x (scale S)
and shows that the fixed-point erf trace of x meets the committed identity
for y' within the tolerance.  The proven value x is the inverse erf of
(2y'+1)/M - 1; eta = round(C x / 2^k) with a public C holding sigma*sqrt(2).

When the budget admits the asymptotic erfc branch the statement is an Or of
three options: the erf trace, and the erfc trace for x > 0 and for x < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from gopa.crypto.groups import Element
from gopa.crypto.hashing import Drbg
from gopa.crypto.pedersen import Commitment, GroupParams
from gopa.numerics import (
    ErfBudget,
    IdentityConstants,
    erf_trace,
    identity_constants,
    rdiv,
    sample_branch,
)
from gopa.zkp import sigma
from gopa.zkp.circuit import Circuit, Lin, MalformedProof, Wire
from gopa.zkp.proofs import Kind, Proof, public_bytes
from gopa.zkp.sigma import ChallengeSource

# significant bits kept in the public scaling constant
C_BITS = 20


@dataclass(frozen=True)
class NormalParams:
    """Public parameters of the Gaussian derivation.

    eta is produced at scale 2^-out_bits.
    """

    budget: ErfBudget
    M: int
    sigma: float
    out_bits: int = 40

    @property
    def shift(self) -> int:
        e = math.log2(self.sigma * math.sqrt(2)) + self.out_bits - self.budget.psi_bits
        return max(0, C_BITS - math.floor(e))

    @property
    def c_hat(self) -> int:
        k = self.shift
        v = self.sigma * math.sqrt(2) * 2.0 ** (self.out_bits - self.budget.psi_bits + k)
        return max(1, round(v))

    def eta_from_x(self, x_hat: int) -> int:
        return rdiv(self.c_hat * x_hat, 1 << self.shift)

    @property
    def eta_bits(self) -> int:
        X = max(self.budget.x_max_hat, self.budget.x_cap_hat)
        return (abs(self.eta_from_x(X)) + 1).bit_length()

    @property
    def branches(self) -> int:
        return 3 if self.budget.erfc_reachable else 1

    def public(self) -> bytes:
        b = self.budget
        return public_bytes(Kind.NORMAL, self.M, b.L, b.psi_bits, b.x_max_hat, b.x_cap_hat,
                            b.pi_bits, self.c_hat, self.shift, self.branches)

    def required_bits(self) -> int:
        """Largest signed magnitude (in bits) any relation of the circuit handles."""
        b, M = self.budget, self.M
        ic = identity_constants(b, M)
        S = b.S
        X = b.x_max_hat
        tr = erf_trace(X, b.psi_bits, b.L)
        w = tr.w
        need = [
            (X * X).bit_length(),
            (max(tr.terms) * w * (2 * b.L + 1)).bit_length(),
            ((M * sum(tr.terms)) << (ic.g + 1)).bit_length(),
            (ic.k_pi * S * 2 * M).bit_length(),
            (self.c_hat * max(X, b.x_cap_hat)).bit_length(),
        ]
        if self.branches == 3:
            Z = b.x_cap_hat
            need += [(Z * Z).bit_length(), (2 * S * S).bit_length(),
                     ((M * 4 * S * S) << ic.g).bit_length()]
        return max(need) + 2


@dataclass
class NormalOutput:
    x: Commitment
    eta: Commitment


class _Bounds:
    """Honest magnitude bounds for every ranged wire."""

    def __init__(self, np_: NormalParams) -> None:
        b = np_.budget
        self.S = b.S
        tr = erf_trace(b.x_max_hat, b.psi_bits, b.L)
        self.w_erf = tr.w
        self.t_bits = [max(1, abs(t).bit_length()) for t in tr.terms]
        if np_.branches == 3:
            S = b.S
            self.z_lo, self.z_hi = b.erfc_threshold_hat, b.x_cap_hat
            self.w_lo = rdiv(self.z_lo * self.z_lo, S)
            self.w_hi = rdiv(self.z_hi * self.z_hi, S)
            self.v_hi = rdiv(S * S, 2 * self.w_lo) + 1
            self.r_hi = rdiv(S * S, self.z_lo) + 1


def _val(w: Wire) -> int:
    return w.value or 0


def _erf_branch(c: Circuit, np_: NormalParams, ic: IdentityConstants, bd: _Bounds,
                x: Wire, y: Wire) -> None:
    b = np_.budget
    S, L, M = b.S, b.L, np_.M
    c.assert_interval(x, -b.x_max_hat, b.x_max_hat)
    w = c.div_round(c.mul(x, x), S)
    c.assert_range(w, bd.w_erf.bit_length())
    terms = [x]
    for l in range(L - 1):
        p = c.mul(terms[-1], w)
        t = c.div_round(p * (2 * l + 1), S * (l + 1) * (2 * l + 3))
        c.assert_signed_range(t, bd.t_bits[l + 1])
        terms.append(t)
    A = Lin()
    for l, t in enumerate(terms):
        A = A + (t if l % 2 == 0 else -t)
    R = A * (M << (ic.g + 1)) - (y * 2 + (1 - M)) * (ic.k_pi * S)
    c.assert_signed_range(R, ic.tol_bits)


def _erfc_branch(c: Circuit, np_: NormalParams, ic: IdentityConstants, bd: _Bounds,
                 x: Wire, y: Wire, sign: int) -> None:
    b = np_.budget
    S, M = b.S, np_.M
    real = c.real
    z = x * sign
    c.assert_interval(z, bd.z_lo, bd.z_hi)
    w = c.div_round(c.mul(x, x), S)
    c.assert_interval(w, bd.w_lo - 1, bd.w_hi + 1)

    # v = round(S^2 / 2w): |S^2 - 2 w v| <= w
    v = c.new(rdiv(S * S, 2 * _val(w)) if real else None)
    c.assert_range(v, bd.v_hi.bit_length())
    c.assert_signed_range(S * S - c.mul(w, v) * 2, (bd.w_hi + 1).bit_length())

    # asymptotic series sum_l (-1)^l (2l-1)!! v^l, powers at scale S
    powers = [None, v]
    for _ in range(2, b.erfc_index):
        pw = c.div_round(c.mul(powers[-1], v), S)
        c.assert_range(pw, bd.v_hi.bit_length())
        powers.append(pw)
    total = Lin([], S)
    dfact = 1
    for l in range(1, b.erfc_index):
        dfact *= 2 * l - 1
        total = total + (powers[l] * (dfact if l % 2 == 0 else -dfact))
    sw = c.new(c.lin_opening(total)[0] if real else None)
    c.assert_equal(sw, total)

    # e^{-z^2}: series in u = w / (S a), then repeated squaring
    a = 1 << b.erfc_halving_bits
    sbits = S.bit_length()
    e = [None]
    E0 = Lin([], S)
    if b.exp_terms > 1:
        e1 = c.div_round(w, a)
        c.assert_range(e1, sbits)
        e.append(e1)
        E0 = E0 - e1
    for i in range(1, b.exp_terms - 1):
        t = c.div_round(c.mul(e[-1], w), S * a * (i + 1))
        c.assert_range(t, sbits)
        e.append(t)
        E0 = E0 + (t if (i + 1) % 2 == 0 else -t)
    E = c.new(c.lin_opening(E0)[0] if real else None)
    c.assert_equal(E, E0)
    for _ in range(b.erfc_halving_bits):
        E = c.div_round(c.mul(E, E), S)
        c.assert_range(E, sbits)

    # r = round(S^2 / z): |S^2 - z r| <= z/2
    r = c.new(rdiv(S * S, sign * _val(x)) if real else None)
    c.assert_range(r, bd.r_hi.bit_length())
    c.assert_signed_range(S * S - c.mul(x, r) * sign, (bd.z_hi // 2 + 1).bit_length())

    m1 = c.div_round(c.mul(E, r), S)
    c.assert_range(m1, (bd.r_hi + 1).bit_length())
    m2 = c.div_round(c.mul(m1, sw), S)
    c.assert_range(m2, (2 * bd.r_hi + 2).bit_length())
    # n = 2y'+1-M; for x > 0 the target is M - n, for x < 0 it is M + n
    R = m2 * (M << ic.g) - (M - (y * 2 + (1 - M)) * sign) * (ic.k_pi * S)
    c.assert_signed_range(R, ic.tol_bits)


def _build(c: Circuit, np_: NormalParams, y: Wire, x_value: Optional[int], branch: int) -> Tuple[Wire, Optional[Wire]]:
    ic = identity_constants(np_.budget, np_.M)
    bd = _Bounds(np_)
    x = c.new(x_value)
    if np_.branches == 1:
        _erf_branch(c, np_, ic, bd, x, y)
    else:
        with c.either(branch) as ob:
            with ob.option():
                _erf_branch(c, np_, ic, bd, x, y)
            with ob.option():
                _erfc_branch(c, np_, ic, bd, x, y, +1)
            with ob.option():
                _erfc_branch(c, np_, ic, bd, x, y, -1)
    eta = None
    if np_.shift:
        eta = c.div_round(x * np_.c_hat, 1 << np_.shift)
        c.assert_signed_range(eta, np_.eta_bits)
    return x, eta


_BRANCH_INDEX = {"erf": 0, "erfc+": 1, "erfc-": 2}


def zkp_normal(params: GroupParams, np_: NormalParams, cy: Commitment, *, domain: str = "",
               challenge: Optional[ChallengeSource] = None, rng: Optional[Drbg] = None,
               prefer_erfc: bool = False, check: bool = True,
               x_override: Optional[int] = None) -> Tuple[NormalOutput, Proof]:
    """Derive eta from the committed y' and prove the derivation.

    x_override replaces the solved x (tests use it to produce false proofs
    together with check=False).
    """
    params.group.require_capacity(np_.required_bits(), "the Gaussian derivation")
    x_hat, br = sample_branch(cy.m, np_.M, np_.budget, prefer_erfc=prefer_erfc)
    if x_override is not None:
        x_hat = x_override
    c = Circuit(params, prover=True, rng=rng, check=check, public=np_.public())
    y = c.input(cy.c, cy.m, cy.r)
    x, eta = _build(c, np_, y, x_hat, _BRANCH_INDEX[br] if np_.branches == 3 else 0)
    root = c.finish()
    sp = sigma.prove(params.group, root, c.witness, domain=domain, challenge=challenge,
                     rng=c.rng.child("nonces"), check=check, statement=c.statement_bytes())
    q = params.q
    xc = Commitment(x.c, x.value, x.rand)
    if eta is None:
        ce = Commitment(params.group.exp(x.c, np_.c_hat), np_.c_hat * x.value, np_.c_hat * x.rand % q)
    else:
        ce = Commitment(eta.c, eta.value, eta.rand)
    mode = "fiat_shamir" if challenge is None else "interactive"
    return NormalOutput(xc, ce), Proof(Kind.NORMAL, list(c.aux_out), sp, mode)


def verify_normal(params: GroupParams, np_: NormalParams, cy: Element, c_eta: Element, proof: Proof, *,
                  domain: str = "", expected_challenge: Optional[int] = None) -> bool:
    if proof.kind != Kind.NORMAL:
        return False
    if (proof.mode == "interactive") != (expected_challenge is not None):
        return False
    if np_.required_bits() > params.group.capacity_bits():
        return False
    try:
        c = Circuit(params, prover=False, aux=proof.aux, public=np_.public())
        y = c.input(cy)
        x, eta = _build(c, np_, y, None, 0)
        root = c.finish()
    except (MalformedProof, ValueError):
        return False
    derived = params.group.exp(x.c, np_.c_hat) if eta is None else eta.c
    if derived != c_eta:
        return False
    return sigma.verify(params.group, root, proof.sigma, domain=domain, expected_challenge=expected_challenge,
                        statement=c.statement_bytes())
