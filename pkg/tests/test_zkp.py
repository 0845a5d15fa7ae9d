import copy
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chi2_contingency, chisquare

from gopa.bulletin.beacon import Participant, beacon_round
from gopa.crypto import Drbg, GroupParams, commit, get_group
from gopa.crypto.pedersen import from_zq
from gopa.numerics import ErfBudget
from gopa.zkp import (
    Kind,
    MalformedProof,
    NormalParams,
    UniformProver,
    decode_proof,
    decode_uniform,
    domain_tag,
    encode_proof,
    encode_uniform,
    verify_bit,
    verify_eq,
    verify_linear,
    verify_mod,
    verify_normal,
    verify_prod,
    verify_range,
    verify_uniform,
    zkp_bit,
    zkp_eq,
    zkp_linear,
    zkp_mod,
    zkp_normal,
    zkp_prod,
    zkp_range,
    zkp_uniform,
)
from gopa.zkp import sigma
from gopa.zkp.sigma import And, Eq, Or, ProofError

from zkp_cases import D, KINDS, MUTATIONS, NP61, swapped

P, Q = 607, 101


class StubRng:
    """Returns a fixed list of nonces in order."""

    def __init__(self, values):
        self.values = list(values)

    def randbelow(self, n):
        return self.values.pop(0) % n

    def child(self, label):
        return self


# --- hand-worked equality proof in the toy group --------------------------

def test_eq_hand_worked():
    G = get_group("toy101")
    g1, h1, g2, h2 = (pow(b, 6, P) for b in (3, 5, 2, 7))
    x, r, r2 = 5, 9, 13
    a, b, c, t = 10, 20, 30, 17
    c1 = pow(g1, x, P) * pow(h1, r, P) % P
    c2 = pow(g2, x, P) * pow(h2, r2, P) % P
    el = lambda v: G.decode(v.to_bytes(2, "big"))
    pp = GroupParams(G, el(g1), el(h1))
    proof = zkp_eq(pp, el(c1), el(c2), (el(g1), el(h1)), (el(g2), el(h2)), x, r, r2,
                   challenge=lambda ann: t, rng=StubRng([a, b, c]))
    A1 = pow(g1, a, P) * pow(h1, b, P) % P
    A2 = pow(g2, a, P) * pow(h2, c, P) % P
    assert [int(v) for v in proof.sigma.announcements] == [A1, A2] == [76, 182]
    d, e, f = (a + x * t) % Q, (b + r * t) % Q, (c + r2 * t) % Q
    assert proof.sigma.responses == [d, e, f] == [95, 72, 49]
    assert proof.sigma.challenge == t
    # verifier equations by hand
    assert pow(g1, d, P) * pow(h1, e, P) % P == A1 * pow(c1, t, P) % P
    assert pow(g2, d, P) * pow(h2, f, P) % P == A2 * pow(c2, t, P) % P
    assert verify_eq(pp, el(c1), el(c2), (el(g1), el(h1)), (el(g2), el(h2)), proof, expected_challenge=t)
    assert not verify_eq(pp, el(c1), el(c2), (el(g1), el(h1)), (el(g2), el(h2)), proof, expected_challenge=t + 1)


def test_bit_challenge_split(toy_params):
    pp = toy_params
    cb = commit(pp, 1, 33)
    proof = zkp_bit(pp, cb, challenge=lambda ann: 55, rng=Drbg(4))
    sp = proof.sigma
    assert len(sp.or_challenges) == 1
    t1 = sp.or_challenges[0]
    t2 = (55 - t1) % Q
    assert (t1 + t2) % Q == sp.challenge == 55
    assert verify_bit(pp, cb.c, proof, expected_challenge=55)




@pytest.mark.parametrize("kind", list(KINDS))
def test_completeness(kind, params61):
    rng = Drbg(kind)
    reps = 3 if kind == "normal" else 25
    for _ in range(reps):
        pr, ver = KINDS[kind](params61, rng)
        assert ver(pr)


@pytest.mark.parametrize("kind", list(KINDS))
def test_mutations_reject(kind, params61):
    rng = Drbg("mut" + kind)
    pr, ver = KINDS[kind](params61, rng)
    other, _ = KINDS[kind](params61, rng)
    assert ver(pr)
    for m in MUTATIONS:
        assert not ver(m(params61, pr, other)), m.__name__
    # wrong base and wrong domain
    assert not ver(pr, params=swapped(params61))
    assert not ver(pr, domain=D + "x")


@pytest.mark.parametrize("kind", list(KINDS))
def test_false_witness_rejects(kind, params61):
    rng = Drbg("false" + kind)
    pr, ver = KINDS[kind](params61, rng, honest=False)
    assert not ver(pr)


@pytest.mark.parametrize("kind", [k for k in KINDS if k not in ("uniform",)])
def test_false_witness_refused_by_prover(kind, params61):
    with pytest.raises(ProofError):
        _refuse(kind, params61)


def _refuse(kind, pp):
    rng = Drbg(1)
    if kind == "eq":
        c1 = commit(pp, 3, 4).c
        zkp_eq(pp, c1, c1, (pp.g, pp.h), (pp.g, pp.h), 5, 4, 4, rng=rng)
    elif kind == "linear":
        zkp_linear(pp, [commit(pp, 3, 4)], [1], 4, rng=rng)
    elif kind == "prod":
        zkp_prod(pp, commit(pp, 3, 1), commit(pp, 4, 2), commit(pp, 13, 3), rng=rng)
    elif kind == "bit":
        zkp_bit(pp, commit(pp, 2, 1), rng=rng)
    elif kind == "range":
        zkp_range(pp, commit(pp, 1001, 1), 1000, rng=rng)
    elif kind == "mod":
        zkp_mod(pp, commit(pp, 5, 1), commit(pp, 3, 1), 64, 1, rng=rng)
    elif kind == "normal":
        cy = commit(pp, 100, 1)
        zkp_normal(pp, NP61, cy, rng=rng, x_override=10**6)


# --- specific examples ----------------------------------------------------

def test_prod_examples(toy_params):
    pp = toy_params
    ca, cb, cd = commit(pp, 7, 3), commit(pp, 5, 8), commit(pp, 35, 11)
    assert verify_prod(pp, ca.c, cb.c, cd.c, zkp_prod(pp, ca, cb, cd, rng=Drbg(1)))
    z = commit(pp, 0, 2)
    assert verify_prod(pp, z.c, cb.c, commit(pp, 0, 9).c, zkp_prod(pp, z, cb, commit(pp, 0, 9), rng=Drbg(2)))


def test_range_boundaries(params61):
    M = 2 ** 40
    for x in (0, M):
        c = commit(params61, x, 7)
        assert verify_range(params61, c.c, M, zkp_range(params61, c, M, rng=Drbg(x)))
    c = commit(params61, M + 1, 7)
    bad = zkp_range(params61, c, M, rng=Drbg(3), check=False)
    assert not verify_range(params61, c.c, M, bad)


def test_mod_wraparound(params61):
    M = 64
    cy, cz = commit(params61, 0, 1), commit(params61, M - 1, 2)
    assert verify_mod(params61, cy.c, cz.c, M, 1, zkp_mod(params61, cy, cz, M, 1, rng=Drbg(1)))
    cy, cz = commit(params61, 9, 1), commit(params61, 9, 2)
    assert verify_mod(params61, cy.c, cz.c, M, 0, zkp_mod(params61, cy, cz, M, 0, rng=Drbg(1)))
    # z outside [0, M-1]
    cy, cz = commit(params61, 5, 1), commit(params61, M + 4, 2)
    bad = zkp_mod(params61, cy, cz, M, 1, rng=Drbg(1), check=False)
    assert not verify_mod(params61, cy.c, cz.c, M, 1, bad)


def test_mod_needs_small_M(toy_params):
    with pytest.raises(ValueError):
        zkp_mod(toy_params, commit(toy_params, 1, 1), commit(toy_params, 1, 1), 60, 0)


def test_linear_ledger_relation(params61):
    # X + sum Delta + eta = X_hat with all-ones coefficients, and Delta_uv + Delta_vu = 0
    rng = Drbg(5)
    parts = [123456, -7777, 8888, -99, 4242]
    cs = [commit(params61, v, rng.randbelow(params61.q)) for v in parts]
    pr = zkp_linear(params61, cs, [1] * 5, sum(parts), rng=rng)
    assert verify_linear(params61, [c.c for c in cs], [1] * 5, sum(parts), pr)
    assert not verify_linear(params61, [c.c for c in cs], [1, 1, 1, 1, 2], sum(parts), pr)
    a, b = commit(params61, 77, 3), commit(params61, -77, -3)
    assert verify_linear(params61, [a.c, b.c], [1, 1], 0, zkp_linear(params61, [a, b], [1, 1], 0, rng=rng))


# --- Fiat-Shamir ----------------------------------------------------------

@pytest.mark.parametrize("kind", ["eq", "bit", "range", "mod"])
def test_fiat_shamir_deterministic(kind, params61):
    a, _ = KINDS[kind](params61, Drbg("fs"))
    b, _ = KINDS[kind](params61, Drbg("fs"))
    G = params61.group
    assert encode_proof(G, a) == encode_proof(G, b)


def test_fs_statement_binding(params61):
    rng = Drbg(2)
    c = commit(params61, 5, 9)
    pr = zkp_range(params61, c, 1000, rng=rng)
    assert not verify_range(params61, c.c, 1001, pr)
    assert not verify_range(params61, commit(params61, 5, 10).c, 1000, pr)


def test_domain_tags_distinct():
    assert domain_tag(Kind.EQ, "1") != domain_tag(Kind.EQ, "2")
    assert domain_tag(Kind.EQ, "1") != domain_tag(Kind.LINEAR, "1")
    assert domain_tag(Kind.EQ, "1", "run-a") != domain_tag(Kind.EQ, "1", "run-b")


def test_cross_user_replay_rejected(params61):
    c = commit(params61, 1, 2)
    pr = zkp_bit(params61, c, domain=domain_tag(Kind.BIT, "3"), rng=Drbg(1))
    assert verify_bit(params61, c.c, pr, domain=domain_tag(Kind.BIT, "3"))
    assert not verify_bit(params61, c.c, pr, domain=domain_tag(Kind.BIT, "4"))


def test_interactive_mode(params61):
    c = commit(params61, 1, 2)
    pr = zkp_bit(params61, c, challenge=lambda ann: 424242, rng=Drbg(1))
    assert pr.mode == "interactive"
    assert verify_bit(params61, c.c, pr, expected_challenge=424242)
    assert not verify_bit(params61, c.c, pr)
    assert not verify_bit(params61, c.c, pr, expected_challenge=424243)
    fs = zkp_bit(params61, c, rng=Drbg(1))
    assert not verify_bit(params61, c.c, fs, expected_challenge=fs.sigma.challenge)


# --- serialisation --------------------------------------------------------

@pytest.mark.parametrize("kind", ["eq", "prod", "bit", "range", "mod", "normal"])
def test_proof_round_trip(kind, params61):
    pr, ver = KINDS[kind](params61, Drbg("ser"))
    G = params61.group
    data = encode_proof(G, pr)
    back = decode_proof(G, data)
    assert encode_proof(G, back) == data
    assert ver(back)


def test_uniform_round_trip(params61):
    prover = UniformProver(params61, 64, Drbg(1))
    _, tr = prover.respond(17, domain=D)
    G = params61.group
    back = decode_uniform(G, encode_uniform(G, tr))
    assert verify_uniform(params61, back, 64, 17, domain=D)


def test_decode_rejects_garbage(params61):
    G = params61.group
    pr, _ = KINDS["bit"](params61, Drbg(1))
    data = encode_proof(G, pr)
    for bad in (b"", data[:-1], data + b"\0", b"XX" + data[2:]):
        with pytest.raises(MalformedProof):
            decode_proof(G, bad)


# --- zero knowledge: simulator vs honest transcripts ----------------------

def _field_counts(values):
    c = Counter(values)
    return [c.get(v, 0) for v in range(Q)]


def _same_distribution(a, b):
    table = np.array([_field_counts(a), _field_counts(b)])
    table = table[:, table.sum(axis=0) > 0]
    return chi2_contingency(table).pvalue


def test_simulator_eq(toy_params):
    pp = toy_params
    G = pp.group
    x, r, r2 = 4, 8, 15
    c1, c2 = commit(pp, x, r).c, commit(pp, x, r2).c
    root = And([Eq(c1, [(pp.g, "x"), (pp.h, "r")]), Eq(c2, [(pp.g, "x"), (pp.h, "r2")])])
    rng = Drbg(11)
    honest, sim = [], []
    for _ in range(3000):
        t = rng.randbelow(Q)
        h = sigma.prove(G, root, {"x": x, "r": r, "r2": r2}, challenge=lambda ann: t, rng=rng)
        s = sigma.simulate(G, root, rng.randbelow(Q), rng)
        assert sigma.verify(G, root, s, expected_challenge=s.challenge)
        honest.append(h)
        sim.append(s)
    for i in range(3):
        assert _same_distribution([p.responses[i] for p in honest], [p.responses[i] for p in sim]) > 0.01
    elems = sorted({int(commit(pp, 0, k).c) for k in range(Q)})
    idx = {e: i for i, e in enumerate(elems)}
    assert _same_distribution([idx[int(p.announcements[0])] for p in honest],
                              [idx[int(p.announcements[0])] for p in sim]) > 0.01


def test_simulator_bit(toy_params):
    pp = toy_params
    G = pp.group
    cb = commit(pp, 1, 21)
    cg = G.div(cb.c, pp.g)
    root = Or([Eq(cb.c, [(pp.h, "r")]), Eq(cg, [(pp.h, "r")])], real=1)
    rng = Drbg(12)
    honest, sim = [], []
    for _ in range(3000):
        t = rng.randbelow(Q)
        honest.append(sigma.prove(G, root, {"r": 21}, challenge=lambda ann: t, rng=rng))
        s = sigma.simulate(G, root, rng.randbelow(Q), rng)
        assert sigma.verify(G, root, s, expected_challenge=s.challenge)
        sim.append(s)
    assert _same_distribution([p.or_challenges[0] for p in honest], [p.or_challenges[0] for p in sim]) > 0.01
    for i in range(2):
        assert _same_distribution([p.responses[i] for p in honest], [p.responses[i] for p in sim]) > 0.01


# --- uniform --------------------------------------------------------------

def test_uniform_chi_square_via_beacon(params61):
    M, n = 16, 16_000
    rng = Drbg("uni")
    stream = beacon_round([Participant(i, rng=rng.child(str(i))) for i in range(3)], M, "uniform-test")
    ts = stream.values(n)
    ys = []
    for i, t in enumerate(ts):
        prover = UniformProver(params61, M, rng)
        cy, tr = prover.respond(t, domain=D)
        if i % 40 == 0:
            assert verify_uniform(params61, tr, M, t, domain=D)
        ys.append(cy.m)
    counts = np.bincount(ys, minlength=M)
    assert chisquare(counts).pvalue > 0.01


def test_uniform_wrong_t_rejected(params61):
    prover = UniformProver(params61, 64, Drbg(3))
    _, tr = prover.respond(5, domain=D)
    assert not verify_uniform(params61, tr, 64, 6, domain=D)


def test_zkp_uniform_challenge_source(params61):
    seen = []

    def source(cz):
        seen.append(cz)
        return 9

    cy, tr = zkp_uniform(params61, source, 32, domain=D, rng=Drbg(4))
    assert seen == [tr.cz]
    assert verify_uniform(params61, tr, 32, 9, domain=D)


# --- normal ---------------------------------------------------------------

def test_normal_midpoint(params61):
    M = 255
    np_ = NormalParams(ErfBudget.for_sampling(2.0 ** -8, M), M, 1.0)
    cy = commit(params61, (M - 1) // 2, 5)
    out, pr = zkp_normal(params61, np_, cy, domain=D, rng=Drbg(1))
    assert out.x.m == 0 and out.eta.m == 0
    assert verify_normal(params61, np_, cy.c, out.eta.c, pr, domain=D)


def test_normal_wrong_eta_commitment(params61):
    cy = commit(params61, 40, 5)
    out, pr = zkp_normal(params61, NP61, cy, domain=D, rng=Drbg(1))
    assert not verify_normal(params61, NP61, cy.c, params61.group.mul(out.eta.c, params61.g), pr, domain=D)
    assert not verify_normal(params61, NP61, commit(params61, 41, 5).c, out.eta.c, pr, domain=D)


def test_normal_every_aux_tamper_rejects(params61):
    cy = commit(params61, 200, 5)
    out, pr = zkp_normal(params61, NP61, cy, domain=D, rng=Drbg(2))
    G = params61.group
    for i in range(0, len(pr.aux), max(1, len(pr.aux) // 25)):
        bad = copy.deepcopy(pr)
        bad.aux[i] = G.mul(bad.aux[i], params61.g)
        assert not verify_normal(params61, NP61, cy.c, out.eta.c, bad, domain=D), i


def test_normal_x_shift_rejects(params61):
    cy = commit(params61, 70, 5)
    good, _ = zkp_normal(params61, NP61, cy, domain=D, rng=Drbg(3))
    x = from_zq(good.x.m, params61.q)
    for dx in (5000, -5000, 1 << 14):
        out, pr = zkp_normal(params61, NP61, cy, domain=D, rng=Drbg(4), check=False, x_override=x + dx)
        assert not verify_normal(params61, NP61, cy.c, out.eta.c, pr, domain=D)


def test_normal_capacity_check(toy_params):
    with pytest.raises(Exception):
        zkp_normal(toy_params, NP61, commit(toy_params, 1, 1))
