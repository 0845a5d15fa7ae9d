"""Verified runs: every user commits, proves and publishes through the board.

The order of board entries is

    enrollment, configuration, setup beacon (commit then reveal),
    c_X with its range proof, c_z, challenge beacon,
    c_y with the uniform proof, c_eta with the Gaussian proof,
    pairwise commitments, dropout notices, Xhat_u with its linear proof,
    rollback reveals for late dropouts.

Fault injection lets single users misbehave in one of seven ways so the
auditor can be exercised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set

import numpy as np

from gopa.bulletin.beacon import BeaconState, Participant
from gopa.bulletin.board import COORDINATOR, Board, EntryKind, enrollment_draft, make_draft
from gopa.bulletin.verify import (CHALLENGE_ROUND, SETUP_MODULUS, SETUP_ROUND, RunConfig, Verdict,
                                  element_hex, verify_run)
from gopa.crypto.hashing import Drbg
from gopa.crypto.pedersen import Commitment, commit, from_zq, setup_from_beacon
from gopa.crypto.signatures import keygen
from gopa.graph import Topology
from gopa.numerics import FixedPoint, rdiv, sample_branch
from gopa.protocol import DEFAULT_MARGIN, GaussianSampler, streams
from gopa.zkp.normal import zkp_normal
from gopa.zkp.proofs import Kind, UniformProver, zkp_linear, zkp_range
from gopa.zkp.serialize import encode_proof

log = logging.getLogger(__name__)

FAULTS = ("bad_range", "bad_sum", "bad_pair", "bad_distribution", "order_violation", "bad_signature",
          "missing_entry")
ALIASES = {"bias-eta": "bad_distribution", "bias_eta": "bad_distribution"}


@dataclass(frozen=True)
class Fault:
    kind: str
    user: int

    @classmethod
    def parse(cls, text: str) -> "Fault":
        """'bad-sum:user7' or 'bad_sum:7'."""
        try:
            k, u = text.split(":")
        except ValueError:
            raise ValueError(f"fault must look like kind:userN, got {text!r}") from None
        k = ALIASES.get(k.strip(), k.strip().replace("-", "_"))
        if k not in FAULTS:
            raise ValueError(f"unknown fault {k!r}; choose one of {FAULTS}")
        u = u.strip()
        return cls(k, int(u[4:] if u.startswith("user") else u))


def parse_faults(spec: Optional[Iterable[str]]) -> List[Fault]:
    out: List[Fault] = []
    for item in spec or ():
        out += [Fault.parse(p) for p in item.split(",") if p.strip()]
    return out


@dataclass
class VerifiedResult:
    board: Board
    config: RunConfig
    estimate: FixedPoint
    true_avg: FixedPoint
    x_hat: Dict[int, int]
    prover_ops: Dict[int, int]
    faults: List[Fault]
    dropouts: Dict[int, str] = field(default_factory=dict)

    def expected_flags(self) -> Set[int]:
        out: Set[int] = set()
        for f in self.faults:
            out.add(f.user)
            if f.kind == "bad_pair":
                out.add(pair_peer(self.config.topology, f.user))
        return out


def pair_peer(g: Topology, u: int) -> int:
    nb = g.neighbors(u)
    if len(nb) == 0:
        raise ValueError(f"user {u} has no neighbour to corrupt a pair with")
    return int(nb[0])


class _User:
    def __init__(self, uid: int, rng: Drbg, sig_group) -> None:
        self.uid = uid
        self.rng = rng
        self.key = keygen(sig_group, rng.child("sig"))
        self.beacon: Dict[str, Participant] = {}
        self.deltas: Dict[int, Commitment] = {}


def run_verified(graph: Topology, values: Sequence[float], sigma_eta: float, sigma_delta: float, *,
                 seed: int = 0, B: float = 2.0 ** -8, M: int = 256, psi_bits: int = 40,
                 backend: str = "schnorr127", faults: Sequence[Fault] = (),
                 dropouts: Optional[Dict[int, str]] = None, margin: int = DEFAULT_MARGIN,
                 board_path: Optional[str] = None) -> VerifiedResult:
    n = graph.n
    if len(values) != n:
        raise ValueError("one value per user")
    dropouts = dict(dropouts or {})
    for d, when in dropouts.items():
        if when not in ("before_publish", "after_publish"):
            raise ValueError("dropout phase must be before_publish or after_publish")
    fault_of: Dict[int, str] = {}
    for f in faults:
        if not 0 <= f.user < n:
            raise ValueError(f"fault targets unknown user {f.user}")
        if f.user in fault_of:
            raise ValueError(f"user {f.user} already has a fault")
        fault_of[f.user] = f.kind

    root = Drbg(seed, "gopa/verified")
    board = Board(board_path)
    sg = board.group
    coord_key = keygen(sg, root.child("coordinator"))
    users = [_User(u, root.child(f"user/{u}"), sg) for u in range(n)]
    S = 1 << psi_bits
    cfg = RunConfig(root.child("run-id").randbytes(8).hex(), n, tuple(map(tuple, graph.edges.tolist())),
                    psi_bits, M, float(B), float(sigma_eta), float(sigma_delta), backend)

    def post(u: _User, kind: EntryKind, payload: dict, corrupt: bool = False) -> int:
        dr = make_draft(sg, u.key, u.uid, kind, payload)
        if corrupt:
            bad = bytes([dr.sig[0] ^ 1]) + dr.sig[1:]
            return board.append_unchecked(type(dr)(dr.author, dr.kind, dr.payload, bad))
        return board.append(dr)

    board.append(enrollment_draft(sg, coord_key, COORDINATOR))
    for u in users:
        board.append(enrollment_draft(sg, u.key, u.uid))
    board.append(make_draft(sg, coord_key, COORDINATOR, EntryKind.METADATA, cfg.to_payload()))

    def beacon(label: str, mod: int):
        st = BeaconState(list(range(n)), mod, label)
        for u in users:
            p = Participant(u.uid, rng=u.rng.child(f"beacon/{label}"))
            u.beacon[label] = p
            c = p.make_commitment(mod, st.commitments)
            st.commit(u.uid, c)
            post(u, EntryKind.COMMITMENT, {"type": "beacon_commit", "round": label, "c": c.hex()})
        for u in users:
            p = u.beacon[label]
            st.reveal(u.uid, p.seed, p.nonce)
            post(u, EntryKind.REVEAL, {"type": "beacon_reveal", "round": label, "seed": str(p.seed),
                                        "nonce": p.nonce.hex()})
        return st.output()

    setup = beacon(SETUP_ROUND, SETUP_MODULUS)
    pp = setup_from_beacon(setup.state(0), backend)
    G = pp.group
    q = pp.q
    np_ = cfg.normal_params()
    G.require_capacity(np_.required_bits(), "the Gaussian derivation")
    ops: Dict[int, int] = {u: 0 for u in range(n)}

    def counted(u: int, fn, *a, **k):
        before = sum(G.ops.counts.values())
        out = fn(*a, **k)
        ops[u] += sum(G.ops.counts.values()) - before
        return out

    # inputs and their range proofs
    xs: Dict[int, Commitment] = {}
    for u in users:
        m = min(max(round(Fraction(values[u.uid]) * S), 0), S)
        if fault_of.get(u.uid) == "bad_range":
            m = S + S // 2  # X_u = 1.5
        cx = commit(pp, m, u.rng.randbelow(q))
        xs[u.uid] = cx
        pr = counted(u.uid, zkp_range, pp, cx, S, domain=cfg.domain(Kind.RANGE, u.uid), rng=u.rng.child("range"),
                     check=fault_of.get(u.uid) != "bad_range")
        post(u, EntryKind.COMMITMENT, {"type": "x", "c": element_hex(G, cx.c),
                                       "proof": encode_proof(G, pr).hex()})

    # first move of the uniform proofs, then the challenge beacon
    provers: Dict[int, UniformProver] = {}
    for u in users:
        if fault_of.get(u.uid) == "order_violation":
            continue
        provers[u.uid] = counted(u.uid, UniformProver, pp, M, u.rng.child("uniform"))
        post(u, EntryKind.COMMITMENT, {"type": "z", "c": element_hex(G, provers[u.uid].commitment())})
    chal = beacon(CHALLENGE_ROUND, M)
    for u in users:
        if fault_of.get(u.uid) == "order_violation":
            # sees t first, then picks z so that y' = M - 1 (the largest noise)
            t = chal.value(1 + u.uid)
            provers[u.uid] = counted(u.uid, UniformProver, pp, M, u.rng.child("uniform"), z=(M - 1 - t) % M)
            post(u, EntryKind.COMMITMENT, {"type": "z", "c": element_hex(G, provers[u.uid].commitment())})

    etas: Dict[int, Commitment] = {}
    skip_normal = {f.user for f in faults if f.kind == "missing_entry"}
    for u in users:
        t = chal.value(1 + u.uid)
        cy, tr = counted(u.uid, provers[u.uid].respond, t, domain=cfg.domain(Kind.UNIFORM, u.uid))
        post(u, EntryKind.PROOF, {"type": "uniform", "cy": element_hex(G, cy.c),
                                  "proof": encode_proof(G, tr.proof).hex()})
        override = None
        if fault_of.get(u.uid) == "bad_distribution":
            x_true, _ = sample_branch(cy.m, M, np_.budget)
            override = 10 * x_true + (np_.budget.S if x_true >= 0 else -np_.budget.S)
        out, pr = counted(u.uid, zkp_normal, pp, np_, cy, domain=cfg.domain(Kind.NORMAL, u.uid),
                          rng=u.rng.child("normal"), x_override=override, check=override is None)
        etas[u.uid] = out.eta
        if u.uid not in skip_normal:
            post(u, EntryKind.PROOF, {"type": "normal", "c_eta": element_hex(G, out.eta.c),
                                      "proof": encode_proof(G, pr).hex()})

    # pairwise terms: one Gaussian per edge, committed with negated randomness
    dsampler = GaussianSampler("fast", psi_bits=psi_bits)
    edges = graph.edges.tolist()
    draws = dsampler.draw(streams(seed)["pairwise"], sigma_delta, len(edges)) if edges else np.zeros(0)
    pair_rng = root.child("pairwise")
    for (a, b), val in zip(edges, draws.tolist()):
        r = pair_rng.randbelow(q)
        users[a].deltas[b] = counted(a, commit, pp, int(val), r)
        users[b].deltas[a] = counted(b, commit, pp, -int(val), -r)
    for f in faults:
        if f.kind == "bad_pair":
            v = pair_peer(graph, f.user)
            c = users[f.user].deltas[v]
            users[f.user].deltas[v] = commit(pp, c.m + 1, c.r)
    for u in users:
        post(u, EntryKind.COMMITMENT, {"type": "pairwise",
                                       "c": {str(v): element_hex(G, c.c) for v, c in sorted(u.deltas.items())}})

    for d, when in sorted(dropouts.items()):
        if when == "before_publish":
            board.append(make_draft(sg, coord_key, COORDINATOR, EntryKind.METADATA,
                                    {"type": "dropout", "user": d, "phase": when}))

    x_hat: Dict[int, int] = {}
    for u in users:
        if u.uid in dropouts:
            continue
        peers = [v for v in sorted(u.deltas) if dropouts.get(v) != "before_publish"]
        cs = [xs[u.uid]] + [u.deltas[v] for v in peers] + [etas[u.uid]]
        val = from_zq(sum(c.m for c in cs), q)
        proof = counted(u.uid, zkp_linear, pp, cs, [1] * len(cs), val % q, domain=cfg.domain(Kind.LINEAR, u.uid),
                        rng=u.rng.child("linear"))
        shown = val + 1 if fault_of.get(u.uid) == "bad_sum" else val
        x_hat[u.uid] = shown
        post(u, EntryKind.NOISY_VALUE, {"type": "noisy", "x_hat": str(shown), "proof": encode_proof(G, proof).hex()},
             corrupt=fault_of.get(u.uid) == "bad_signature")

    # late dropouts: published neighbours reveal their term while their margin lasts
    budget = {u: margin for u in range(n)}
    corr: Dict[int, int] = {}
    for d, when in sorted(dropouts.items()):
        if when != "after_publish":
            continue
        board.append(make_draft(sg, coord_key, COORDINATOR, EntryKind.METADATA,
                                {"type": "dropout", "user": d, "phase": when}))
        for v in sorted(users[d].deltas):
            if v not in x_hat:
                continue
            if budget[v] <= 0:
                log.warning("user %d has no margin left; term towards %d stays in the sum", v, d)
                continue
            budget[v] -= 1
            c = users[v].deltas[d]
            post(users[v], EntryKind.REVEAL, {"type": "rollback", "peer": d, "delta": str(c.m), "r": str(c.r)})
            corr[v] = corr.get(v, 0) - from_zq(c.m, q)

    pub = sorted(x_hat)
    scale = Fraction(1, S)
    est = FixedPoint(rdiv(sum(x_hat[u] + corr.get(u, 0) for u in pub), max(1, len(pub))), scale)
    true = FixedPoint(rdiv(sum(xs[u].m for u in pub), max(1, len(pub))), scale)
    return VerifiedResult(board, cfg, est, true, x_hat, ops, list(faults), dropouts)


def audit(board: Board) -> Verdict:
    return verify_run(board)
