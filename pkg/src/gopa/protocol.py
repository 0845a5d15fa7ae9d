"""The noisy-averaging protocol over a simulated population.

Each user u holds X_u in [0, 1], draws a Gaussian Delta_{u,v} = -Delta_{v,u}
with every neighbour, adds an independent eta_u and publishes

    Xhat_u = X_u + sum_v Delta_{u,v} + eta_u.

Values are integers at scale 2**-psi_bits, so the pairwise terms cancel
exactly in the sum.  Gaussians are produced from a uniform y' in [0, M) through
the inverse error function, the same path the verified mode proves.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, TextIO

import numpy as np
from scipy.sparse import csr_matrix

from gopa.graph import Topology
from gopa.numerics import DEFAULT_M, DEFAULT_PSI_BITS, ErfBudget, FixedPoint, inverse_erf_fast, rdiv, sample_branch

log = logging.getLogger(__name__)

POLICIES = ("remove_before_publish", "reveal_and_subtract", "accept_residual")
DEFAULT_MARGIN = 2


class ProtocolError(RuntimeError):
    pass


class IncompleteExchange(ProtocolError):
    pass


class UnresolvedDropout(ProtocolError):
    """Strict aggregation met a dropout whose pairwise terms did not cancel."""

    def __init__(self, report: "BiasReport") -> None:
        super().__init__(f"unresolved dropouts {report.users}: bias bound {report.bound:.3g}")
        self.report = report


def streams(seed) -> Dict[str, np.random.Generator]:
    """Independent generators for the graph, the two noise kinds and the adversary."""
    names = ("graph", "pairwise", "eta", "adversary")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return {k: np.random.default_rng(c) for k, c in zip(names, ss.spawn(len(names)))}


# ---------------------------------------------------------------------------
# Gaussian sampling

class GaussianSampler:
    """sigma * sqrt(2) * erfinv((2y'+1)/M - 1) for uniform y', quantised to scale 2**-psi_bits.

    mode="exact" solves the committed fixed-point identity (what a verified
    user proves); mode="fast" evaluates the same quantile in floating point for
    bulk simulation.
    """

    def __init__(self, mode: str = "fast", M: int = DEFAULT_M, B: float = 2.0 ** -23,
                 psi_bits: int = DEFAULT_PSI_BITS) -> None:
        if mode not in ("fast", "exact"):
            raise ValueError("mode must be 'fast' or 'exact'")
        self.mode = mode
        self.M = M
        self.psi_bits = psi_bits
        self.budget = ErfBudget.for_sampling(B, M) if mode == "exact" else None

    def uniform(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.integers(0, self.M, size=size, dtype=np.int64)

    def from_uniform(self, y: np.ndarray, sigma: float) -> np.ndarray:
        """Map uniform integers to quantised Gaussians (int64 mantissas, or objects if too wide)."""
        y = np.asarray(y)
        if sigma == 0:
            return np.zeros(y.shape, dtype=np.int64)
        if self.mode == "fast":
            z = np.rint(inverse_erf_fast(y, self.M) * (sigma * 2.0 ** self.psi_bits))
            if z.size and np.max(np.abs(z)) >= 2.0 ** 62:
                return np.array([int(v) for v in z.ravel()], dtype=object).reshape(z.shape)
            return z.astype(np.int64)
        from gopa.zkp.normal import NormalParams

        npar = NormalParams(self.budget, self.M, sigma, self.psi_bits)
        flat = [npar.eta_from_x(sample_branch(int(v), self.M, self.budget)[0]) for v in y.ravel()]
        return np.array(flat, dtype=object).reshape(y.shape)

    def draw(self, rng: np.random.Generator, sigma: float, size) -> np.ndarray:
        return self.from_uniform(self.uniform(rng, size), sigma)


# ---------------------------------------------------------------------------
# per-user ledgers

@dataclass
class UserLedger:
    uid: int
    x: int
    honest: bool = True
    delta: Dict[int, int] = field(default_factory=dict)
    eta: Optional[int] = None
    x_hat: Optional[int] = None
    margin: int = DEFAULT_MARGIN
    online: bool = True
    randomness: Dict[str, int] = field(default_factory=dict)

    def recompute(self) -> int:
        if self.eta is None:
            raise IncompleteExchange(f"user {self.uid} has no independent noise yet")
        return self.x + sum(self.delta.values()) + self.eta


@dataclass
class BiasReport:
    users: List[int]
    residual: int
    n: int
    psi_bits: int

    @property
    def bound(self) -> float:
        """|sum of uncancelled pairwise terms| / n, in value units."""
        return abs(self.residual) / self.n / 2.0 ** self.psi_bits


@dataclass
class RunOutcome:
    x_hat: Dict[int, int]
    estimate: FixedPoint
    true_avg: FixedPoint
    n_used: int
    dropouts: List[dict]
    residual: int
    psi_bits: int

    @property
    def error(self) -> float:
        return float(self.estimate.value - self.true_avg.value)

    @property
    def bias_bound(self) -> float:
        return abs(self.residual) / max(1, self.n_used) / 2.0 ** self.psi_bits


@dataclass
class AdversaryView:
    """What a coalition of malicious users can strip off the published values."""

    honest: np.ndarray
    x_hat_H: np.ndarray
    graph: Topology
    honest_graph: Topology
    malicious: Dict[int, dict]

    def laplacian(self) -> np.ndarray:
        n = self.honest_graph.n
        L = np.zeros((n, n))
        for u, v in self.honest_graph.edges:
            L[u, u] += 1
            L[v, v] += 1
            L[u, v] -= 1
            L[v, u] -= 1
        return L


class ProtocolRun:
    """One execution over a fixed graph.

    Typical sequence: exchange(); optional dropouts; publish(); aggregate().
    """

    def __init__(self, graph: Topology, values: Sequence[float], sigma_eta: float, sigma_delta: float, *,
                 seed=0, malicious: Iterable[int] = (), margin: int = DEFAULT_MARGIN,
                 sampler: Optional[GaussianSampler] = None, psi_bits: int = DEFAULT_PSI_BITS,
                 test_mode: bool = False) -> None:
        if len(values) != graph.n:
            raise ValueError("one value per user")
        if (sigma_delta <= 0 or sigma_eta < 0) and not test_mode:
            raise ValueError("sigma_delta must be positive outside test mode")
        self.g = graph
        self.n = graph.n
        self.psi_bits = psi_bits
        self.S = 1 << psi_bits
        self.sigma_eta = sigma_eta
        self.sigma_delta = sigma_delta
        self.sampler = sampler or GaussianSampler(psi_bits=psi_bits)
        self.rng = streams(seed)
        bad = set(int(u) for u in malicious)
        self.users: Dict[int, UserLedger] = {}
        for u, v in enumerate(values):
            fx = v if isinstance(v, FixedPoint) else FixedPoint.from_bits(v, psi_bits)
            m = fx.rescale(Fraction(1, self.S)).mantissa
            if not 0 <= m <= self.S:
                raise ValueError(f"value of user {u} outside [0, 1]")
            self.users[u] = UserLedger(u, m, u not in bad, margin=margin)
        self.published: Dict[int, int] = {}
        self.corrections: Dict[int, int] = {}
        self.dropout_log: List[dict] = []
        self.events: List[dict] = []
        self._exchanged = False

    # -- phases -----------------------------------------------------------
    def exchange(self) -> None:
        """One Gaussian draw per edge (u < v): Delta_{u,v} = x, Delta_{v,u} = -x."""
        e = self.g.edges
        draws = self.sampler.draw(self.rng["pairwise"], self.sigma_delta, len(e))
        for (u, v), x in zip(e.tolist(), draws.tolist()):
            x = int(x)
            self.users[u].delta[v] = x
            self.users[v].delta[u] = -x
        self._exchanged = True
        self.events.append({"event": "exchange", "edges": len(e)})

    def draw_eta(self) -> None:
        draws = self.sampler.draw(self.rng["eta"], self.sigma_eta, self.n)
        for u, x in enumerate(draws.tolist()):
            if self.users[u].eta is None:
                self.users[u].eta = int(x)

    def release_noisy(self, u: int, eta: Optional[int] = None) -> int:
        led = self.users[u]
        if not self._exchanged:
            raise IncompleteExchange("pairwise exchange has not happened")
        nb = set(self.g.neighbors(u).tolist())
        missing = nb - set(led.delta) - {v for v in nb if not self.users[v].online}
        if missing:
            raise IncompleteExchange(f"user {u} lacks pairwise terms with {sorted(missing)}")
        if eta is not None:
            led.eta = int(eta)
        if led.eta is None:
            led.eta = int(self.sampler.draw(self.rng["eta"], self.sigma_eta, 1)[0])
        led.x_hat = led.recompute()
        return led.x_hat

    def publish(self, users: Optional[Iterable[int]] = None) -> None:
        if any(led.eta is None for led in self.users.values()):
            self.draw_eta()
        for u in (users if users is not None else range(self.n)):
            led = self.users[u]
            if not led.online:
                continue
            self.published[u] = self.release_noisy(u)
            self.events.append({"event": "publish", "user": u, "x_hat": self._dec(self.published[u])})

    # -- dropouts ---------------------------------------------------------
    def handle_dropout(self, d: int, policy: Optional[str] = None) -> List[dict]:
        """Repair the state after user d goes offline without publishing.

        Without an explicit policy the chain is: remove the pairwise terms
        of neighbours that have not published; neighbours that have published
        reveal their term and subtract it while their margin lasts; otherwise
        the residual is accepted (and reported).
        """
        if policy is not None and policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        led = self.users[d]
        if d in self.published:
            raise ProtocolError(f"user {d} already published; it is not a dropout")
        led.online = False
        actions = []
        for v in sorted(led.delta):
            vl = self.users[v]
            if v in self.published or not vl.online:
                pol = policy or "reveal_and_subtract"
                if pol == "remove_before_publish":
                    pol = "reveal_and_subtract"
            else:
                pol = policy or "remove_before_publish"
            if pol == "reveal_and_subtract" and vl.margin <= 0:
                log.warning("user %d has no surplus neighbours left; accepting residual for dropout %d", v, d)
                pol = "accept_residual"
            term = vl.delta.get(d)
            if term is None:
                continue
            if pol == "remove_before_publish":
                del vl.delta[d]
            elif pol == "reveal_and_subtract":
                vl.margin -= 1
                if v in self.published:
                    self.corrections[v] = self.corrections.get(v, 0) - term
                    self.events.append({"event": "reveal", "user": v, "peer": d, "delta": self._dec(term)})
                else:
                    del vl.delta[d]
            actions.append({"user": d, "neighbor": v, "policy": pol})
        self.dropout_log.append({"user": d, "policy": policy or "chain", "actions": actions})
        self.events.append({"event": "dropout", "user": d, "actions": actions})
        return actions

    def residual(self) -> int:
        """Sum of pairwise terms that no longer cancel: terms toward offline users kept in published values."""
        res = 0
        for u, xh in self.published.items():
            for v, t in self.users[u].delta.items():
                if not self.users[v].online:
                    res += t
        return res + sum(self.corrections.values())

    # -- aggregation --------------------------------------------------------
    def aggregate(self, strict: bool = False) -> RunOutcome:
        users = sorted(self.published)
        if not users:
            raise ProtocolError("nothing was published")
        vals = {u: self.published[u] + self.corrections.get(u, 0) for u in users}
        total = sum(vals.values())
        n = len(users)
        res = self.residual()
        if res and strict:
            raise UnresolvedDropout(BiasReport([d["user"] for d in self.dropout_log], res, n, self.psi_bits))
        scale = Fraction(1, self.S)
        est = FixedPoint(rdiv(total, n), scale)
        true = FixedPoint(rdiv(sum(self.users[u].x for u in users), n), scale)
        return RunOutcome(vals, est, true, n, list(self.dropout_log), res, self.psi_bits)

    def run(self, dropouts: Optional[Dict[int, str]] = None, strict: bool = False) -> RunOutcome:
        """Full run.  dropouts maps user -> "before_publish" or "after_publish"."""
        dropouts = dropouts or {}
        self.exchange()
        self.draw_eta()
        for d, when in dropouts.items():
            if when == "before_publish":
                self.handle_dropout(d)
        self.publish([u for u in range(self.n) if u not in dropouts])
        for d, when in dropouts.items():
            if when == "after_publish":
                self.handle_dropout(d)
        return self.aggregate(strict)

    # -- exactness and adversary view ---------------------------------------
    def exact_sum_gap(self) -> int:
        """sum Xhat - sum X - sum eta over published users (0 with no dropouts)."""
        us = list(self.published)
        return sum(self.published[u] + self.corrections.get(u, 0) for u in us) \
            - sum(self.users[u].x for u in us) - sum(self.users[u].eta for u in us)

    def extract_adversary_view(self, malicious: Optional[Iterable[int]] = None) -> AdversaryView:
        bad = set(malicious) if malicious is not None else {u for u, l in self.users.items() if not l.honest}
        honest = np.array([u for u in range(self.n) if u not in bad], dtype=np.int64)
        local = {int(u): i for i, u in enumerate(honest)}
        xh = np.empty(len(honest), dtype=np.float64)
        for i, u in enumerate(honest):
            led = self.users[int(u)]
            x_hat = led.x_hat if led.x_hat is not None else led.recompute()
            known = sum(t for v, t in led.delta.items() if v in bad)
            xh[i] = (x_hat - known) / self.S
        he = [(local[u], local[v]) for u, v in self.g.edges.tolist() if u in local and v in local]
        hg = Topology.from_edges(len(honest), he)
        info = {b: {"x": self.users[b].x, "eta": self.users[b].eta, "delta": dict(self.users[b].delta)} for b in bad}
        return AdversaryView(honest, xh, self.g, hg, info)

    # -- transcript ---------------------------------------------------------
    def _dec(self, m: int) -> str:
        return FixedPoint(m, Fraction(1, self.S)).to_decimal()

    def write_transcript(self, fh: TextIO) -> None:
        for ev in self.events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# vectorised Monte-Carlo engine

def _exact_dtype(n: int, sigma_delta: float, max_deg: int, psi_bits: int):
    """int64 when n (1 + 6 sigma_Delta maxdeg) fits at this scale, otherwise Python ints."""
    bound = n * (1 + 6 * max(sigma_delta, 1.0) * max(max_deg, 1) + 6) * 2.0 ** psi_bits
    return np.int64 if bound < 2.0 ** 62 else object


def _spread(delta: np.ndarray, e: np.ndarray, n: int, dtype) -> np.ndarray:
    """Per-user sums of pairwise terms, +d on the smaller endpoint and -d on the other."""
    r = delta.shape[0]
    if dtype is np.int64 and len(e):
        m = len(e)
        B = csr_matrix((np.concatenate([np.ones(m), -np.ones(m)]).astype(np.int64),
                        (np.concatenate([np.arange(m)] * 2), np.concatenate([e[:, 0], e[:, 1]]))),
                       shape=(m, n), dtype=np.int64)
        return np.asarray(B.T.dot(delta.T).T, dtype=np.int64)
    out = np.zeros((r, n), dtype=dtype)
    for j, (u, v) in enumerate(e.tolist()):
        out[:, u] += delta[:, j]
        out[:, v] -= delta[:, j]
    return out


@dataclass
class BatchResult:
    errors: np.ndarray            # estimate - true average, per run (float)
    exact_gaps: np.ndarray        # sum Xhat - sum X - sum eta, per run (integers)
    x_hat_H: Optional[np.ndarray] = None   # runs x n_H, adversary-stripped values


def simulate_runs(graph: Topology, values: Sequence[float], sigma_eta: float, sigma_delta: float, runs: int,
                  seed=0, malicious: Iterable[int] = (), keep_view: bool = False, chunk: int = 256,
                  sampler: Optional[GaussianSampler] = None, psi_bits: int = DEFAULT_PSI_BITS) -> BatchResult:
    """Many independent runs on one graph, vectorised over runs.

    Each run draws fresh pairwise and independent noise, forms every Xhat_u
    exactly and averages.  With keep_view the malicious users' pairwise terms
    are stripped from the honest users' values (the adversary view).
    """
    sampler = sampler or GaussianSampler(psi_bits=psi_bits)
    n, S = graph.n, 1 << psi_bits
    x = np.array([round(v * S) for v in values], dtype=np.int64)
    e = graph.edges
    dtype = _exact_dtype(n, sigma_delta, int(graph.degrees.max(initial=0)), psi_bits)
    bad = np.zeros(n, dtype=bool)
    bad[list(malicious)] = True
    honest = np.flatnonzero(~bad)
    hh = ~bad[e[:, 0]] & ~bad[e[:, 1]] if len(e) else np.zeros(0, bool)
    rng = streams(seed)
    errors, gaps, views = [], [], []
    done = 0
    while done < runs:
        r = min(chunk, runs - done)
        eta = sampler.draw(rng["eta"], sigma_eta, (r, n)).astype(dtype)
        delta = sampler.draw(rng["pairwise"], sigma_delta, (r, len(e))).astype(dtype)
        xhat = np.tile(x.astype(dtype), (r, 1)) + eta
        # Delta_{u,v} = +d on u, -d on v; keep only honest-honest edges for the view
        inc = _spread(delta, e, n, dtype)
        inc_h = _spread(delta * hh, e, n, dtype) if keep_view else None
        xhat = xhat + inc
        tot = xhat.sum(axis=1)
        gaps.append(tot - x.sum() - eta.sum(axis=1))
        errors.append(np.array([float(Fraction(int(t) - int(x.sum()), n * S)) for t in tot]))
        if keep_view:
            views.append(((np.tile(x.astype(dtype), (r, 1)) + eta + inc_h)[:, honest]).astype(np.float64) / S)
        done += r
    return BatchResult(np.concatenate(errors), np.concatenate(gaps),
                       np.concatenate(views) if keep_view else None)


def laplacian(g: Topology) -> np.ndarray:
    L = np.zeros((g.n, g.n))
    deg = g.degrees
    L[np.arange(g.n), np.arange(g.n)] = deg
    for u, v in g.edges.tolist():
        L[u, v] -= 1
        L[v, u] -= 1
    return L
