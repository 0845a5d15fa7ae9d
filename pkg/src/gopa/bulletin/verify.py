"""Audit of a verified run: a pure function of the board contents.

For every user the verifier checks the range proof on X_u, the uniform and
Gaussian derivation of eta_u, the zero-sum property of every pairwise
commitment pair and the linear proof tying c_X * prod c_Delta * c_eta to the
published Xhat_u.  All failures are accumulated.  Missing mandatory entries
make a user non-compliant, which is reported apart from proof failures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Set, Tuple

from gopa.bulletin.beacon import BeaconError, BeaconState, ChallengeStream
from gopa.bulletin.board import COORDINATOR, Board, BulletinEntry, EntryKind, signing_message
from gopa.crypto.groups import Element, Group
from gopa.crypto.pedersen import commit, from_zq, setup_from_beacon
from gopa.crypto.signatures import verify_signature
from gopa.graph import Topology
from gopa.numerics import ErfBudget, FixedPoint, rdiv
from gopa.zkp.circuit import MalformedProof
from gopa.zkp.normal import NormalParams, verify_normal
from gopa.zkp.proofs import Kind, UniformTranscript, domain_tag, verify_linear, verify_range, verify_uniform
from gopa.zkp.serialize import decode_proof

SETUP_ROUND = "setup"
CHALLENGE_ROUND = "challenge"
SETUP_MODULUS = 1 << 256

# entry "type" -> board kind; the mandatory per-user sequence
USER_ENTRIES = {
    "x": EntryKind.COMMITMENT,
    "z": EntryKind.COMMITMENT,
    "uniform": EntryKind.PROOF,
    "normal": EntryKind.PROOF,
    "pairwise": EntryKind.COMMITMENT,
    "noisy": EntryKind.NOISY_VALUE,
}


@dataclass(frozen=True)
class RunConfig:
    """Public parameters of a verified run, posted by the coordinator."""

    run_id: str
    n: int
    edges: Tuple[Tuple[int, int], ...]
    psi_bits: int
    M: int
    B: float
    sigma_eta: float
    sigma_delta: float
    backend: str

    def to_payload(self) -> dict:
        return {"type": "config", "run_id": self.run_id, "n": self.n, "edges": [list(e) for e in self.edges],
                "psi_bits": self.psi_bits, "M": self.M, "B": repr(self.B), "sigma_eta": repr(self.sigma_eta),
                "sigma_delta": repr(self.sigma_delta), "backend": self.backend}

    @classmethod
    def from_payload(cls, d: dict) -> "RunConfig":
        return cls(str(d["run_id"]), int(d["n"]), tuple((int(u), int(v)) for u, v in d["edges"]),
                   int(d["psi_bits"]), int(d["M"]), float(d["B"]), float(d["sigma_eta"]),
                   float(d["sigma_delta"]), str(d["backend"]))

    @property
    def topology(self) -> Topology:
        return Topology.from_edges(self.n, list(self.edges))

    def normal_params(self) -> NormalParams:
        return NormalParams(ErfBudget.for_sampling(self.B, self.M), self.M, self.sigma_eta, self.psi_bits)

    def domain(self, kind: Kind, user: int) -> str:
        return domain_tag(kind, str(user), self.run_id)


def element_hex(G: Group, e: Element) -> str:
    return G.encode(e).hex()


@dataclass
class Verdict:
    ok: bool
    cheaters: Dict[int, List[str]]
    noncompliant: Dict[int, List[str]]
    estimate: Optional[FixedPoint]
    n_used: int
    ops: Dict[int, int]
    dropouts: List[int] = field(default_factory=list)
    residual: int = 0
    problems: List[str] = field(default_factory=list)

    @property
    def flagged(self) -> Set[int]:
        return set(self.cheaters) | set(self.noncompliant)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "cheaters": {str(k): v for k, v in sorted(self.cheaters.items())},
            "noncompliant": {str(k): v for k, v in sorted(self.noncompliant.items())},
            "estimate": None if self.estimate is None else self.estimate.to_decimal(),
            "n_used": self.n_used,
            "dropouts": self.dropouts,
            "residual": self.residual,
            "ops": {str(k): v for k, v in sorted(self.ops.items())},
            "problems": self.problems,
        }


class _Audit:
    def __init__(self, board: Board) -> None:
        self.board = board
        self.sig_group = board.group
        self.cheat: Dict[int, List[str]] = {}
        self.nonc: Dict[int, List[str]] = {}
        self.problems: List[str] = []

    def blame(self, u: int, why: str) -> None:
        lst = self.cheat.setdefault(u, [])
        if why not in lst:
            lst.append(why)

    def absent(self, u: int, why: str) -> None:
        lst = self.nonc.setdefault(u, [])
        if why not in lst:
            lst.append(why)

    # -- signatures and indexing ----------------------------------------------
    def authentic(self) -> List[BulletinEntry]:
        """Entries whose signature verifies under the author's enrolled key."""
        keys: Dict[int, Element] = {}
        good = []
        for e in self.board.entries():
            try:
                d = e.data
            except ValueError:
                d = {}
            pk = keys.get(e.author)
            if pk is None and e.kind == EntryKind.METADATA and d.get("type") == "enroll":
                try:
                    pk = self.sig_group.decode(bytes.fromhex(d["pk"]))
                except (ValueError, KeyError, TypeError):
                    pk = None
            if pk is None or not verify_signature(self.sig_group, pk, signing_message(e.author, e.kind, e.payload),
                                                  e.sig):
                self.blame(e.author, "bad_signature")
                continue
            keys.setdefault(e.author, pk)
            good.append(e)
        return good


def _beacon(entries: List[BulletinEntry], users: List[int], M: int, label: str,
            audit: _Audit) -> Tuple[Optional[ChallengeStream], Optional[int]]:
    """Replay one beacon round; returns the stream and the seq of its first reveal."""
    st = BeaconState(users, M, label)
    first_reveal = None
    for e in entries:
        d = e.data
        if d.get("round") != label:
            continue
        try:
            if d.get("type") == "beacon_commit":
                st.commit(e.author, bytes.fromhex(d["c"]))
            elif d.get("type") == "beacon_reveal":
                if first_reveal is None:
                    first_reveal = e.seq
                st.reveal(e.author, int(d["seed"]), bytes.fromhex(d["nonce"]))
        except BeaconError:
            pass
        except (KeyError, ValueError, TypeError):
            audit.blame(e.author, "malformed_beacon_entry")
    for u, why in st.flagged.items():
        audit.blame(u, why)
    for u in users:
        if u not in st.seeds and u not in st.flagged:
            audit.absent(u, f"missing:beacon_{label}")
            st.flagged[u] = "missing"
    if not st.seeds:
        audit.problems.append(f"beacon round {label!r} produced no accepted reveal")
        return None, first_reveal
    return st.output(), first_reveal


def verify_run(board: Board) -> Verdict:
    """Audit a full verified run and name cheaters."""
    A = _Audit(board)
    entries = A.authentic()
    cfgs = [e for e in entries if e.author == COORDINATOR and e.data.get("type") == "config"]
    if not cfgs:
        A.problems.append("no signed run configuration on the board")
        return Verdict(False, A.cheat, A.nonc, None, 0, {}, problems=A.problems)
    cfg = RunConfig.from_payload(cfgs[0].data)
    users = list(range(cfg.n))
    user_set = set(users)

    setup, _ = _beacon(entries, users, SETUP_MODULUS, SETUP_ROUND, A)
    chal, chal_reveal_seq = _beacon(entries, users, cfg.M, CHALLENGE_ROUND, A)
    if setup is None or chal is None:
        return Verdict(False, A.cheat, A.nonc, None, 0, {}, problems=A.problems)
    pp = setup_from_beacon(setup.state(0), cfg.backend)
    G = pp.group
    q = pp.q
    np_ = cfg.normal_params()
    S = 1 << cfg.psi_bits

    # first authentic entry of each (user, type); later different copies are equivocation
    own: Dict[Tuple[int, str], BulletinEntry] = {}
    dropped: Dict[int, str] = {}
    rollbacks: List[BulletinEntry] = []
    for e in entries:
        d = e.data
        t = d.get("type")
        if e.author == COORDINATOR and t == "dropout":
            dropped.setdefault(int(d["user"]), str(d["phase"]))
            continue
        if e.author not in user_set:
            continue
        if t == "rollback":
            rollbacks.append(e)
            continue
        if t in USER_ENTRIES:
            if e.kind != USER_ENTRIES[t]:
                A.blame(e.author, f"wrong_kind:{t}")
                continue
            prev = own.get((e.author, t))
            if prev is None:
                own[(e.author, t)] = e
            elif prev.payload != e.payload:
                A.blame(e.author, f"equivocation:{t}")

    def el(hexs: str) -> Element:
        return G.decode(bytes.fromhex(hexs))

    graph = cfg.topology
    nbrs = {u: sorted(int(v) for v in graph.neighbors(u)) for u in users}
    pair_c: Dict[Tuple[int, int], Element] = {}
    ops: Dict[int, int] = {}
    c_x: Dict[int, Element] = {}
    c_eta: Dict[int, Element] = {}

    def get(u: int, t: str) -> Optional[dict]:
        e = own.get((u, t))
        if e is None:
            exempt = dropped.get(u) == "before_publish" or (u in dropped and t == "noisy")
            if not exempt:
                A.absent(u, f"missing:{t}")
            return None
        return e.data

    for u in users:
        before = sum(G.ops.counts.values())
        try:
            d = get(u, "x")
            if d is not None:
                c_x[u] = el(d["c"])
                if not verify_range(pp, c_x[u], S, decode_proof(G, bytes.fromhex(d["proof"])),
                                    domain=cfg.domain(Kind.RANGE, u)):
                    A.blame(u, "bad_range")
            dz = get(u, "z")
            du = get(u, "uniform")
            cy = None
            if dz is not None and du is not None:
                ez = own[(u, "z")]
                if chal_reveal_seq is not None and ez.seq > chal_reveal_seq:
                    A.blame(u, "order_violation")
                t = chal.value(1 + u)
                cy = el(du["cy"])
                tr = UniformTranscript(el(dz["c"]), t, cy, decode_proof(G, bytes.fromhex(du["proof"])))
                if not verify_uniform(pp, tr, cfg.M, t, domain=cfg.domain(Kind.UNIFORM, u)):
                    A.blame(u, "bad_distribution")
            dn = get(u, "normal")
            if dn is not None:
                c_eta[u] = el(dn["c_eta"])
                if cy is None or not verify_normal(pp, np_, cy, c_eta[u],
                                                   decode_proof(G, bytes.fromhex(dn["proof"])),
                                                   domain=cfg.domain(Kind.NORMAL, u)):
                    if cy is not None:
                        A.blame(u, "bad_distribution")
            dp = get(u, "pairwise")
            if dp is not None:
                cs = {int(v): el(c) for v, c in dp["c"].items()}
                expected = set(nbrs[u])
                if set(cs) != expected:
                    A.blame(u, "bad_pair_set")
                for v, c in cs.items():
                    if v in expected:
                        pair_c[(u, v)] = c
        except (KeyError, ValueError, TypeError, MalformedProof) as err:
            A.blame(u, f"malformed:{type(err).__name__}")
        ops[u] = sum(G.ops.counts.values()) - before

    for u, v in graph.edges.tolist():
        a, b = pair_c.get((u, v)), pair_c.get((v, u))
        if a is None or b is None:
            continue
        before = sum(G.ops.counts.values())
        if G.mul(a, b) != G.identity:
            A.blame(u, "bad_pair")
            A.blame(v, "bad_pair")
        ops[u] = ops.get(u, 0) + (sum(G.ops.counts.values()) - before)

    x_hat: Dict[int, int] = {}
    for u in users:
        dn = get(u, "noisy")
        if dn is None:
            continue
        before = sum(G.ops.counts.values())
        try:
            xh = int(dn["x_hat"])
            peers = [v for v in nbrs[u] if dropped.get(v) != "before_publish"]
            if u not in c_x or u not in c_eta or any((u, v) not in pair_c for v in peers):
                A.absent(u, "noisy_value_without_commitments")
            else:
                cs = [c_x[u]] + [pair_c[(u, v)] for v in peers] + [c_eta[u]]
                if not verify_linear(pp, cs, [1] * len(cs), xh % q, decode_proof(G, bytes.fromhex(dn["proof"])),
                                     domain=cfg.domain(Kind.LINEAR, u)):
                    A.blame(u, "bad_sum")
            x_hat[u] = xh
        except (KeyError, ValueError, TypeError, MalformedProof) as err:
            A.blame(u, f"malformed:{type(err).__name__}")
        ops[u] = ops.get(u, 0) + (sum(G.ops.counts.values()) - before)

    # rollback terms for users that dropped after their neighbours published
    corr: Dict[int, int] = {}
    settled: Set[Tuple[int, int]] = set()
    for e in rollbacks:
        d = e.data
        v, peer = e.author, int(d["peer"])
        if dropped.get(peer) != "after_publish" or (v, peer) in settled:
            A.blame(v, "unexpected_rollback")
            continue
        c = pair_c.get((v, peer))
        delta, r = int(d["delta"]), int(d["r"])
        if c is None or commit(pp, delta, r).c != c:
            A.blame(v, "bad_rollback")
            continue
        settled.add((v, peer))
        corr[v] = corr.get(v, 0) - from_zq(delta, q)
    residual = 0
    for d_, phase in dropped.items():
        if phase != "after_publish":
            continue
        for v in nbrs[d_]:
            if v in x_hat and (v, d_) not in settled:
                residual += 1  # count of uncancelled terms; their values stay hidden

    pub = sorted(x_hat)
    est = None
    if pub:
        total = sum(x_hat[u] + corr.get(u, 0) for u in pub)
        est = FixedPoint(rdiv(total, len(pub)), Fraction(1, S))
    ok = not A.cheat and not A.nonc and not A.problems
    return Verdict(ok, A.cheat, A.nonc, est, len(pub), ops, sorted(dropped), residual, A.problems)
