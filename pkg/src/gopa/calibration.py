"""Privacy accountant: theta per topology, the two DP inequalities, noise plans
and the Monte-Carlo search for admissible pairwise noise on k-out graphs.

All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from gopa.graph import embed_spanning_tree, generate_k_out, induce_honest, star_norm_sq

TOPOLOGIES = ("worst_case", "complete", "k_out")


class CalibrationError(ValueError):
    """Infeasible target or degenerate parameters."""


class InfeasibleTarget(CalibrationError):
    pass


class DegenerateBranching(CalibrationError):
    pass


class NoAdmissibleValue(CalibrationError):
    pass


# ---------------------------------------------------------------------------
# the DP inequalities

@dataclass(frozen=True)
class ConditionCheck:
    passed: bool
    slack_first: float
    slack_second: float


def check_lemma1(epsilon: float, delta: float, theta: float) -> ConditionCheck:
    """eps >= theta/2 + sqrt(theta) and (eps - theta/2)^2 >= 2 log(2/(delta sqrt(2 pi))) theta."""
    if min(epsilon, delta, theta) <= 0:
        raise ValueError("epsilon, delta and theta must be positive")
    s1 = epsilon - theta / 2 - math.sqrt(theta)
    s2 = (epsilon - theta / 2) ** 2 - 2 * math.log(2 / (delta * math.sqrt(2 * math.pi))) * theta
    return ConditionCheck(s1 >= 0 and s2 >= 0, s1, s2)


def kout_branching(k: int, rho: float) -> int:
    return math.floor((k - 1) * rho / 3 + 1e-12) - 1


def kout_coefficient(n_H: int, k: int, rho: float) -> float:
    """1/(floor((k-1) rho/3) - 1) + (12 + 6 log n_H)/n_H."""
    b = kout_branching(k, rho)
    if b <= 0:
        raise DegenerateBranching(f"floor((k-1)rho/3) - 1 = {b} for k={k}, rho={rho}")
    return 1.0 / b + (12 + 6 * math.log(n_H)) / n_H


def theta_for(topology: str, n_H: int, sigma_eta_sq: float, sigma_delta_sq: float,
              k: Optional[int] = None, rho: float = 1.0) -> float:
    if sigma_eta_sq <= 0 or sigma_delta_sq <= 0:
        raise ValueError("variances must be positive")
    base = 1.0 / (sigma_eta_sq * n_H)
    if topology == "worst_case":
        return base + n_H / (3 * sigma_delta_sq)
    if topology == "complete":
        return base + 1.0 / (sigma_delta_sq * n_H)
    if topology == "k_out":
        if k is None or k < 2:
            raise ValueError("k_out needs k >= 2")
        return base + kout_coefficient(n_H, k, rho) / sigma_delta_sq
    raise ValueError(f"unknown topology {topology!r}")


# ---------------------------------------------------------------------------
# noise plans

@dataclass(frozen=True)
class PrivacyTarget:
    epsilon: float
    delta: float
    delta_prime: float
    n: int
    rho: float = 1.0
    topology: str = "complete"
    k: Optional[int] = None

    def __post_init__(self) -> None:
        for name in ("epsilon", "delta", "delta_prime"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")

    @property
    def n_H(self) -> int:
        return int(math.floor(self.rho * self.n + 1e-9))

    @classmethod
    def standard(cls, n: int, rho: float, topology: str, epsilon: float = 0.1, k: Optional[int] = None,
                 delta_factor: float = 10.0) -> "PrivacyTarget":
        """delta' = 1/n_H^2 and delta = delta_factor * delta'."""
        n_H = int(math.floor(rho * n + 1e-9))
        dp = 1.0 / n_H ** 2
        return cls(epsilon, delta_factor * dp, dp, n, rho, topology, k)


@dataclass(frozen=True)
class NoisePlan:
    topology: str
    n: int
    n_H: int
    rho: float
    epsilon: float
    delta: float
    delta_prime: float
    c_sq: float
    kappa: float
    sigma_eta_sq: float
    sigma_delta_sq: float
    theta: float
    k: Optional[int] = None
    a: float = 1.25
    check: ConditionCheck = field(default=None)

    @property
    def sigma_eta(self) -> float:
        return math.sqrt(self.sigma_eta_sq)

    @property
    def sigma_delta(self) -> float:
        return math.sqrt(self.sigma_delta_sq)

    def as_dict(self) -> Dict:
        d = asdict(self)
        d["sigma_eta"] = self.sigma_eta
        d["sigma_delta"] = self.sigma_delta
        return d


def c_squared(delta_prime: float) -> float:
    return 2 * math.log(1.25 / delta_prime)


def solve_kappa(delta: float, delta_prime: float, a: float) -> float:
    """kappa with delta = a (delta'/1.25)^(kappa/(kappa+1))."""
    if delta / a >= 1:
        raise InfeasibleTarget("delta/a must be below 1")
    r = math.log(delta / a) / math.log(delta_prime / 1.25)
    if not 0 < r < 1:
        raise InfeasibleTarget(f"no kappa > 0 reaches delta={delta} from delta'={delta_prime} (a={a})")
    return r / (1 - r)


def kout_conditions(n_H: int, k: int, rho: float, delta: float) -> Dict[str, bool]:
    """The four conditions on (n, k, rho) of the k-out guarantee, at internal delta."""
    rk = rho * k
    return {
        "rho_n_ge_81": n_H >= 81,
        "log_2rhon_over_3delta": rk >= 4 * math.log(2 * n_H / (3 * delta)),
        "log_rhon_over_3": rk >= 6 * math.log(n_H / 3),
        "log_2e_over_delta": rk >= 1.5 + 2.25 * math.log(2 * math.e / delta),
    }


def minimal_k(n: int, rho: float, delta: float) -> int:
    """Smallest k meeting all k-out conditions; the guarantee is (eps, 3 delta) so delta/3 goes in."""
    n_H = int(math.floor(rho * n + 1e-9))
    if n_H < 81:
        raise InfeasibleTarget("the k-out guarantee needs rho n >= 81")
    d = delta / 3
    need = max(4 * math.log(2 * n_H / (3 * d)), 6 * math.log(n_H / 3), 1.5 + 2.25 * math.log(2 * math.e / d))
    k = max(2, math.ceil(need / rho - 1e-12))
    while not all(kout_conditions(n_H, k, rho, d).values()):
        k += 1
    while kout_branching(k, rho) <= 0:
        k += 1
    return k


def corollary1_plan(target: PrivacyTarget) -> NoisePlan:
    """Noise plan matching trusted-curator utility for the target."""
    n_H = target.n_H
    if n_H < 1:
        raise InfeasibleTarget("no honest users")
    eps = target.epsilon
    c2 = c_squared(target.delta_prime)
    s_eta = c2 / (n_H * eps ** 2)
    k = None
    if target.topology == "k_out":
        a = 3.75
        k = target.k if target.k is not None else minimal_k(target.n, target.rho, target.delta)
        kappa = solve_kappa(target.delta, target.delta_prime, a)
        s_delta = kappa * s_eta * n_H * kout_coefficient(n_H, k, target.rho)
    else:
        a = 1.25
        kappa = solve_kappa(target.delta, target.delta_prime, a)
        s_delta = kappa * s_eta * (1.0 if target.topology == "complete" else n_H ** 2 / 3)
    theta = theta_for(target.topology, n_H, s_eta, s_delta, k, target.rho)
    chk = check_lemma1(eps, target.delta, theta)
    return NoisePlan(target.topology, target.n, n_H, target.rho, eps, target.delta, target.delta_prime,
                     c2, kappa, s_eta, s_delta, theta, k, a, chk)


def utility_noise_floor(plan: NoisePlan, n: Optional[int] = None) -> Dict[str, float]:
    """Variance of the protocol average and the trusted-curator benchmarks.

    curator: c^2/(eps n)^2, the Gaussian mechanism on the average of all n
    values.  curator_honest: the same with n_H values.
    """
    n = plan.n if n is None else n
    floor = plan.sigma_eta_sq / n
    cur = plan.c_sq / (plan.epsilon * n) ** 2
    cur_h = plan.c_sq / (plan.epsilon * plan.n_H) ** 2
    return {"variance": floor, "curator": cur, "curator_honest": cur_h, "ratio": floor / cur}


# ---------------------------------------------------------------------------
# Monte-Carlo admissibility

@dataclass
class SimulationResult:
    n: int
    rho: float
    k: int
    runs: int
    connected_runs: int
    worst_norm_sq: float
    p999_norm_sq: float
    mean_norm_sq: float
    kappa: float
    sigma_eta_sq: float
    sigma_delta_sq: float
    sigma_delta_p999: float

    @property
    def connect_rate(self) -> float:
        return self.connected_runs / self.runs

    @property
    def sigma_delta(self) -> float:
        return math.sqrt(self.sigma_delta_sq)

    def as_dict(self) -> Dict:
        d = asdict(self)
        d["connect_rate"] = self.connect_rate
        d["sigma_delta"] = self.sigma_delta
        return d


def simulation_norms(n: int, rho: float, k: int, runs: int, rng_seed=0) -> Tuple[np.ndarray, int]:
    """Tree norms of the connected runs, and the number of connected runs.

    Each run draws a k-out graph and an honest set; the tree is rooted at a
    minimum-degree honest vertex (smallest id on ties), the hardest vertex to
    hide since its value spreads over the fewest edges.
    """
    if runs < 1:
        raise ValueError("runs must be positive")
    n_H = int(math.floor(rho * n + 1e-9))
    if k >= n - 1 and rho == 1:
        return np.full(runs, float(star_norm_sq(n_H))), runs
    norms: List[float] = []
    for child in np.random.SeedSequence(rng_seed).spawn(runs):
        rng = np.random.default_rng(child)
        gh = induce_honest(generate_k_out(n, k, rng), rho, rng)
        if not gh.connected:
            continue
        root = int(np.argmin(gh.graph.degrees))
        norms.append(embed_spanning_tree(gh, root).norm_sq_delta)
    return np.asarray(norms), len(norms)


def simulate_admissible(n: int, rho: float, k: int, runs: int, rng_seed=0, epsilon: float = 0.1,
                        delta: Optional[float] = None, delta_prime: Optional[float] = None) -> SimulationResult:
    """Admissible sigma_Delta^2 = kappa sigma_eta^2 n_H max_runs ||t_Delta||^2 (a = 1.25)."""
    n_H = int(math.floor(rho * n + 1e-9))
    dp = delta_prime if delta_prime is not None else 1.0 / n_H ** 2
    d = delta if delta is not None else 10 * dp
    norms, conn = simulation_norms(n, rho, k, runs, rng_seed)
    if conn == 0:
        raise NoAdmissibleValue("the honest subgraph was disconnected in every run")
    kappa = solve_kappa(d, dp, 1.25)
    s_eta = c_squared(dp) / (n_H * epsilon ** 2)
    worst = float(norms.max())
    p999 = float(np.percentile(norms, 99.9))
    return SimulationResult(n, rho, k, runs, conn, worst, p999, float(norms.mean()), kappa, s_eta,
                            kappa * s_eta * n_H * worst, math.sqrt(kappa * s_eta * n_H * p999))


# ---------------------------------------------------------------------------
# reference grid (n = 10^4, eps = 0.1, delta' = 1/n_H^2, delta = 10 delta')

REFERENCE_SIGMA_DELTA = {
    ("complete", 1.0): 1.7,
    ("complete", 0.5): 2.1,
    ("k_out", 1.0): 44.7,
    ("k_out", 0.5): 34.4,
    ("worst_case", 1.0): 9655.0,
    ("worst_case", 0.5): 6114.8,
}
REFERENCE_K = {1.0: 105, 0.5: 203}

REFERENCE_NOTES = {
    ("complete", 1.0): "published cell sits about 4% above the closed form; the rounding behind it is not stated",
    ("worst_case", 1.0): "published cell sits about 3% above the closed form; the rounding behind it is not stated",
    ("k_out", 0.5): ("published k=203, sigma=34.4 cannot be reconstructed: the four k-out conditions at "
                     "delta/3 give k=192 and the coefficient formula then gives a larger sigma"),
}


@dataclass
class ReferenceRow:
    topology: str
    rho: float
    sigma_delta: float
    reference: float
    k: Optional[int]
    reference_k: Optional[int]
    note: str = ""

    @property
    def rel_error(self) -> float:
        return abs(self.sigma_delta - self.reference) / self.reference


def reference_grid(n: int = 10_000, epsilon: float = 0.1) -> List[ReferenceRow]:
    rows = []
    for topo in ("complete", "k_out", "worst_case"):
        for rho in (1.0, 0.5):
            plan = corollary1_plan(PrivacyTarget.standard(n, rho, topo, epsilon))
            rows.append(ReferenceRow(topo, rho, plan.sigma_delta, REFERENCE_SIGMA_DELTA[(topo, rho)], plan.k,
                                     REFERENCE_K.get(rho) if topo == "k_out" else None,
                                     REFERENCE_NOTES.get((topo, rho), "")))
    return rows
