"""Command line entry point: calibrate, run, verify, audit, report.

Exit codes: 0 success, 2 infeasible or invalid configuration (including an
unresolved dropout under --strict), 3 verification named cheaters.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from gopa import calibration as cal
from gopa.bulletin.board import Board, BoardError
from gopa.bulletin.verify import verify_run
from gopa.crypto.groups import BACKENDS, ConfigurationError
from gopa.graph import Topology, complete_graph, generate_k_out, path_graph, star_graph
from gopa.protocol import DEFAULT_MARGIN, ProtocolRun, UnresolvedDropout, simulate_runs, streams

log = logging.getLogger("gopa")

EXIT_OK, EXIT_CONFIG, EXIT_CHEATERS = 0, 2, 3

# the simulation row printed with the reference grid (n = 10^4)
SIMULATION_REFERENCE = [
    {"rho": 1.0, "k": 20, "reference": 34.7},
    {"rho": 0.5, "k": 40, "reference": 28.4},
]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scenario configuration

@dataclass
class ScenarioConfig:
    n: int = 100
    rho: float = 1.0
    epsilon: float = 0.1
    delta: Optional[float] = None
    delta_prime: Optional[float] = None
    topology: str = "k_out"
    k: Optional[int] = None
    runs: int = 1000
    seed: int = 0
    dropout: List[str] = field(default_factory=list)
    adversary: List[str] = field(default_factory=list)
    backend: str = "schnorr127"
    psi_bits: int = 40
    B: float = 2.0 ** -8
    M: int = 256
    margin: int = DEFAULT_MARGIN
    sigma_eta: Optional[float] = None
    sigma_delta: Optional[float] = None
    defaults_applied: List[str] = field(default_factory=list)

    @property
    def n_H(self) -> int:
        return int(math.floor(self.rho * self.n + 1e-9))

    def finalize(self) -> "ScenarioConfig":
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must lie in (0, 1]")
        if self.n_H < 1:
            raise ConfigError("rho * n leaves no honest user")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.topology not in ("k_out", "complete", "worst_case", "path", "star"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.delta_prime is None:
            self.delta_prime = 1.0 / self.n_H ** 2
            self.defaults_applied.append(f"delta_prime = 1/n_H^2 = {self.delta_prime:.6g}")
        if self.delta is None:
            self.delta = 10 * self.delta_prime
            self.defaults_applied.append(f"delta = 10 delta_prime = {self.delta:.6g}")
        if self.topology == "k_out" and self.k is None:
            self.k = 3
            self.defaults_applied.append("k = 3")
        return self


_NESTED_ALIASES = {("topology", "kind"): "topology", ("topology", "k"): "k"}


def _flatten(d: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for key, val in d.items():
        if isinstance(val, dict):
            for k2, v2 in _flatten(val, key).items():
                out[_NESTED_ALIASES.get((key, k2), k2)] = v2
        else:
            out[key.replace("-", "_")] = val
    return out


def load_config(path: Optional[str], overrides: Dict[str, Any]) -> ScenarioConfig:
    """File values first, then every flag the user actually passed."""
    values: Dict[str, Any] = {}
    if path:
        try:
            with open(path) as fh:
                values.update(_flatten(json.load(fh)))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    for key in ("dropout", "adversary"):
        if isinstance(values.get(key), str):
            values[key] = [values[key]]
    try:
        return ScenarioConfig(**values).finalize()
    except TypeError as e:
        raise ConfigError(str(e)) from e


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = [f.name for f in fields(ScenarioConfig)]
    return {k: getattr(args, k, None) for k in keys}


# ---------------------------------------------------------------------------
# output helpers

def emit(obj: Dict[str, Any], as_json: bool, text: str, out: Optional[str] = None) -> None:
    body = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) if as_json else text
    if out:
        with open(out, "w") as fh:
            fh.write(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    print(body)


def _jsonable(o: Any) -> Any:
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return "-"
    return f"{x:.4g}" if abs(x) < 1e4 else f"{x:.1f}"


# ---------------------------------------------------------------------------
# calibrate

def reference_grid_report(n: int = 10_000, epsilon: float = 0.1, simulate_runs_: int = 0, seed: int = 0) -> Dict[str, Any]:
    rows = []
    for r in cal.reference_grid(n, epsilon):
        rows.append({"topology": r.topology, "rho": r.rho, "sigma_delta": r.sigma_delta, "reference": r.reference,
                     "rel_error": r.rel_error, "k": r.k, "reference_k": r.reference_k, "note": r.note})
    sim = []
    for s in SIMULATION_REFERENCE:
        row: Dict[str, Any] = dict(s, n=n, sigma_delta=None, runs=0)
        if simulate_runs_ > 0:
            res = cal.simulate_admissible(n, s["rho"], s["k"], simulate_runs_, seed, epsilon)
            row.update(sigma_delta=res.sigma_delta, runs=res.runs, connect_rate=res.connect_rate,
                       rel_error=abs(res.sigma_delta - s["reference"]) / s["reference"])
        sim.append(row)
    return {"n": n, "epsilon": epsilon, "delta_prime": "1/n_H^2", "delta": "10 delta_prime",
            "closed_form": rows, "simulation": sim}


def _grid_text(rep: Dict[str, Any]) -> str:
    lines = [f"sigma_Delta for trusted-curator utility (n={rep['n']}, eps={rep['epsilon']}, "
             f"delta'=1/n_H^2, delta=10 delta')",
             f"{'topology':<11}{'rho':>5}{'sigma_Delta':>13}{'reference':>11}{'rel.err':>9}{'k':>6}{'ref k':>7}"]
    notes = []
    for r in rep["closed_form"]:
        lines.append(f"{r['topology']:<11}{r['rho']:>5}{_fmt(r['sigma_delta']):>13}{_fmt(r['reference']):>11}"
                     f"{100 * r['rel_error']:>8.2f}%{(r['k'] or '-'):>6}{(r['reference_k'] or '-'):>7}")
        if r["note"]:
            notes.append(f"note [{r['topology']}, rho={r['rho']}]: {r['note']}")
    lines.append("simulation row (k-out, minimum-degree root):")
    for s in rep["simulation"]:
        got = "run with --simulate" if s["sigma_delta"] is None else \
            f"{_fmt(s['sigma_delta'])} over {s['runs']} runs"
        lines.append(f"  rho={s['rho']} k={s['k']}: {got} (reference {s['reference']})")
    return "\n".join(lines + notes)


def cmd_calibrate(args: argparse.Namespace) -> int:
    if args.table1:
        rep = reference_grid_report(10_000, 0.1, args.runs if args.simulate and args.runs else 0, args.seed or 0)
        emit(rep, args.json, _grid_text(rep), args.out)
        return EXIT_OK
    cfg = load_config(args.config, _overrides(args))
    head = {"n": cfg.n, "rho": cfg.rho, "n_H": cfg.n_H, "epsilon": cfg.epsilon, "delta": cfg.delta,
            "delta_prime": cfg.delta_prime, "defaults_applied": cfg.defaults_applied}
    if args.simulate:
        if cfg.k is None:
            raise ConfigError("--simulate needs --k")
        res = cal.simulate_admissible(cfg.n, cfg.rho, cfg.k, cfg.runs, cfg.seed, cfg.epsilon, cfg.delta,
                                      cfg.delta_prime)
        rep = dict(head, simulation=res.as_dict())
        text = "\n".join([f"defaults: {d}" for d in cfg.defaults_applied] + [
            f"k-out simulation n={cfg.n} rho={cfg.rho} k={cfg.k}: {res.connected_runs}/{res.runs} runs connected",
            f"worst ||t_Delta||^2 = {res.worst_norm_sq:.6g}, kappa = {res.kappa:.6g}, "
            f"sigma_eta^2 = {res.sigma_eta_sq:.6g}",
            f"admissible sigma_Delta = {res.sigma_delta:.4f} (99.9th percentile tree: {res.sigma_delta_p999:.4f})"])
        emit(rep, args.json, text, args.out)
        return EXIT_OK
    topos = ["complete", "k_out", "worst_case"] if args.all_topologies else \
        [cfg.topology if cfg.topology in cal.TOPOLOGIES else "worst_case"]
    plans = []
    lines = [f"defaults: {d}" for d in cfg.defaults_applied]
    for t in topos:
        tgt = cal.PrivacyTarget(cfg.epsilon, cfg.delta, cfg.delta_prime, cfg.n, cfg.rho, t,
                                cfg.k if t == "k_out" and args.k is not None else None)
        plan = cal.corollary1_plan(tgt)
        util = cal.utility_noise_floor(plan)
        plans.append(dict(plan.as_dict(), utility=util))
        lines.append(f"{t:<11} sigma_eta={plan.sigma_eta:.4g} sigma_Delta={_fmt(plan.sigma_delta)}"
                     + (f" k={plan.k}" if plan.k else "")
                     + f" kappa={plan.kappa:.4g} conditions={'ok' if plan.check.passed else 'FAIL'}"
                     + f" Var(avg)={util['variance']:.4g} (curator {util['curator']:.4g})")
    emit(dict(head, plans=plans), args.json, "\n".join(lines), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# run

def build_graph(cfg: ScenarioConfig) -> Topology:
    if cfg.topology == "k_out":
        return generate_k_out(cfg.n, cfg.k, streams(cfg.seed)["graph"])
    if cfg.topology == "path":
        return path_graph(cfg.n)
    if cfg.topology == "star":
        return star_graph(cfg.n)
    return complete_graph(cfg.n)


def noise_for(cfg: ScenarioConfig) -> Dict[str, Any]:
    """sigma_eta and sigma_Delta from flags, else from the closed-form plan."""
    if cfg.sigma_eta is not None and cfg.sigma_delta is not None:
        return {"source": "flags", "sigma_eta": cfg.sigma_eta, "sigma_delta": cfg.sigma_delta}
    topo = {"k_out": "k_out", "complete": "complete"}.get(cfg.topology, "worst_case")
    try:
        plan = cal.corollary1_plan(cal.PrivacyTarget(cfg.epsilon, cfg.delta, cfg.delta_prime, cfg.n, cfg.rho,
                                                     topo, cfg.k if topo == "k_out" else None))
        if topo == "k_out" and not all(cal.kout_conditions(cfg.n_H, cfg.k, cfg.rho, cfg.delta / 3).values()):
            raise cal.InfeasibleTarget("k-out conditions fail")
    except cal.CalibrationError:
        topo = "worst_case"
        plan = cal.corollary1_plan(cal.PrivacyTarget(cfg.epsilon, cfg.delta, cfg.delta_prime, cfg.n, cfg.rho,
                                                     topo))
    return {"source": f"closed form ({topo})", "sigma_eta": cfg.sigma_eta or plan.sigma_eta,
            "sigma_delta": cfg.sigma_delta or plan.sigma_delta}


def parse_dropouts(items: Sequence[str]) -> Dict[int, str]:
    """'after-publish:user3' -> {3: 'after_publish'}."""
    out: Dict[int, str] = {}
    for item in items:
        for part in item.split(","):
            if not part.strip():
                continue
            try:
                when, who = part.split(":")
            except ValueError:
                raise ConfigError(f"dropout must look like after-publish:userN, got {part!r}") from None
            when = when.strip().replace("-", "_")
            if when not in ("before_publish", "after_publish"):
                raise ConfigError(f"dropout phase must be before-publish or after-publish, got {when!r}")
            who = who.strip()
            out[int(who[4:] if who.startswith("user") else who)] = when
    return out


def user_values(cfg: ScenarioConfig) -> List[float]:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x76616C]))
    return rng.random(cfg.n).tolist()


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    g = build_graph(cfg)
    noise = noise_for(cfg)
    values = user_values(cfg)
    drops = parse_dropouts(cfg.dropout)
    if any(not 0 <= d < cfg.n for d in drops):
        raise ConfigError("dropout names an unknown user")
    s_eta, s_delta = noise["sigma_eta"], noise["sigma_delta"]
    bench = s_eta ** 2 / cfg.n
    base = {"n": cfg.n, "topology": cfg.topology, "k": cfg.k, "edges": int(len(g.edges)), "seed": cfg.seed,
            "sigma_eta": s_eta, "sigma_delta": s_delta, "noise_source": noise["source"],
            "benchmark_variance": bench, "defaults_applied": cfg.defaults_applied}
    if args.verified:
        return _run_verified(args, cfg, g, values, drops, base)
    if args.repeat and args.repeat > 1:
        if drops:
            raise ConfigError("--repeat does not combine with --dropout")
        t0 = time.perf_counter()
        res = simulate_runs(g, values, s_eta, s_delta, args.repeat, seed=cfg.seed)
        err = res.errors
        rep = dict(base, runs=int(args.repeat), mean_error=float(err.mean()), variance=float(err.var(ddof=1)),
                   variance_ratio=float(err.var(ddof=1) / bench), exact_gap_max=int(np.abs(res.exact_gaps).max()),
                   errors=err.tolist(), seconds=time.perf_counter() - t0)
        text = (f"{args.repeat} runs on {cfg.topology} n={cfg.n}: mean error {rep['mean_error']:.3e}, "
                f"Var {rep['variance']:.4e} vs sigma_eta^2/n {bench:.4e} (ratio {rep['variance_ratio']:.4f}); "
                f"max |sum Xhat - sum X - sum eta| = {rep['exact_gap_max']}")
        emit(rep, args.json, text, args.out)
        return EXIT_OK
    pr = ProtocolRun(g, values, s_eta, s_delta, seed=cfg.seed, margin=cfg.margin)
    try:
        out = pr.run(drops, strict=args.strict)
    except UnresolvedDropout as e:
        rep = dict(base, error="unresolved dropout", bias={"users": e.report.users, "bound": e.report.bound})
        emit(rep, args.json, f"unresolved dropout of {e.report.users}: bias bound {e.report.bound:.3e}", args.out)
        return EXIT_CONFIG
    if args.transcript:
        with open(args.transcript, "w") as fh:
            pr.write_transcript(fh)
    rep = dict(base, runs=1, estimate=out.estimate.to_decimal(), true_average=out.true_avg.to_decimal(),
               error=out.error, errors=[out.error], n_used=out.n_used, dropouts=out.dropouts,
               bias_bound=out.bias_bound, exact_gap=pr.exact_sum_gap() if not drops else None)
    text = "\n".join([f"defaults: {d}" for d in cfg.defaults_applied] + [
        f"estimate {float(out.estimate.value):.6f}, true average {float(out.true_avg.value):.6f}, "
        f"error {out.error:+.3e} over {out.n_used} users",
        f"noise: sigma_eta={s_eta:.4g} sigma_Delta={s_delta:.4g} ({noise['source']}); "
        f"expected std of the average {math.sqrt(bench):.3e}",
        f"dropouts: {len(out.dropouts)}; bias bound {out.bias_bound:.3e}"])
    emit(rep, args.json, text, args.out)
    return EXIT_OK


def _run_verified(args, cfg: ScenarioConfig, g: Topology, values, drops, base) -> int:
    from gopa.pipeline import parse_faults, run_verified

    try:
        faults = parse_faults(cfg.adversary)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    path = args.board or "gopa-board.bin"
    t0 = time.perf_counter()
    res = run_verified(g, values, base["sigma_eta"], base["sigma_delta"], seed=cfg.seed, B=cfg.B, M=cfg.M,
                       psi_bits=cfg.psi_bits, backend=cfg.backend, faults=faults, dropouts=drops,
                       margin=cfg.margin, board_path=path)
    t1 = time.perf_counter()
    v = verify_run(res.board)
    rep = dict(base, verified=True, board=path, entries=len(res.board), estimate=res.estimate.to_decimal(),
               true_average=res.true_avg.to_decimal(), error=float(res.estimate.value - res.true_avg.value),
               faults=[asdict(f) for f in faults], verdict=v.as_dict(), prove_seconds=t1 - t0,
               verify_seconds=time.perf_counter() - t1)
    text = "\n".join([
        f"verified run: {len(res.board)} board entries written to {path}",
        f"estimate {float(res.estimate.value):.6f}, true average {float(res.true_avg.value):.6f}",
        _verdict_text(v)])
    emit(rep, args.json, text, args.out)
    return EXIT_OK if v.ok else EXIT_CHEATERS


# ---------------------------------------------------------------------------
# verify / audit

def _verdict_text(v) -> str:
    if v.ok:
        return f"verdict: PASS ({v.n_used} users published)"
    lines = ["verdict: FAIL"]
    for u, why in sorted(v.cheaters.items()):
        lines.append(f"  cheater {u}: {', '.join(why)}")
    for u, why in sorted(v.noncompliant.items()):
        lines.append(f"  non-compliant {u}: {', '.join(why)}")
    lines += [f"  problem: {p}" for p in v.problems]
    return "\n".join(lines)


def _load_board(path: str) -> Board:
    try:
        return Board.load(path)
    except OSError as e:
        raise ConfigError(f"cannot read board {path}: {e}") from e
    except BoardError as e:
        raise ConfigError(f"board {path} is corrupted: {e}") from e


def cmd_verify(args: argparse.Namespace) -> int:
    v = verify_run(_load_board(args.board))
    emit(v.as_dict(), args.json, _verdict_text(v), args.out)
    return EXIT_OK if v.ok else EXIT_CHEATERS


def cmd_audit(args: argparse.Namespace) -> int:
    b = _load_board(args.board)
    kinds: Counter = Counter()
    for e in b.entries():
        try:
            kinds[f"{e.kind.name.lower()}/{e.data.get('type', '?')}"] += 1
        except ValueError:
            kinds[f"{e.kind.name.lower()}/?"] += 1
    rep: Dict[str, Any] = {"entries": len(b), "head": b.head.hex(), "chain": "ok", "by_type": dict(sorted(kinds.items()))}
    lines = [f"{len(b)} entries, hash chain ok, head {b.head.hex()[:16]}"]
    lines += [f"  {k}: {c}" for k, c in sorted(kinds.items())]
    if args.counts:
        v = verify_run(b)
        rep["ops"] = {str(u): c for u, c in sorted(v.ops.items())}
        vals = list(v.ops.values()) or [0]
        rep["ops_total"] = int(sum(vals))
        lines.append(f"verification group operations: total {sum(vals)}, per user min {min(vals)} "
                     f"max {max(vals)} mean {sum(vals) / len(vals):.1f}")
        lines += [f"  user {u}: {c}" for u, c in sorted(v.ops.items())]
    emit(rep, args.json, "\n".join(lines), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# report

def summarize(docs: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    """Aggregate run outputs; the variance is compared to sigma_eta^2/n."""
    groups: Dict[str, Dict[str, Any]] = {}
    for d in docs:
        if "errors" not in d:
            continue
        key = f"n={d.get('n')} topology={d.get('topology')} sigma_eta={d.get('sigma_eta')}"
        g = groups.setdefault(key, {"errors": [], "benchmark_variance": d.get("benchmark_variance")})
        g["errors"].extend(float(x) for x in d["errors"])
    rows = []
    for key, g in sorted(groups.items()):
        e = np.asarray(g["errors"])
        r = len(e)
        var = float(e.var(ddof=1)) if r > 1 else float("nan")
        mean = float(e.mean())
        se = math.sqrt(var / r) if r > 1 else float("nan")
        bench = g["benchmark_variance"]
        rows.append({"group": key, "runs": r, "mean_error": mean, "variance": var, "std_error": se,
                     "mean_z": mean / se if r > 1 and se > 0 else None, "benchmark_variance": bench,
                     "variance_ratio": var / bench if bench else None})
    out: Dict[str, Any] = {"groups": rows, "runs": sum(r["runs"] for r in rows)}
    if not rows:
        out["warning"] = "empty report: no runs found in the inputs"
    return out


def parse_report(text: str) -> Dict[str, Any]:
    return json.loads(text)


def cmd_report(args: argparse.Namespace) -> int:
    docs = []
    for p in args.inputs:
        try:
            with open(p) as fh:
                docs.append(json.load(fh))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read {p}: {e}") from e
    rep = summarize(docs)
    if "warning" in rep:
        log.warning(rep["warning"])
        text = "warning: " + rep["warning"]
    else:
        text = "\n".join(
            f"{r['group']}: {r['runs']} runs, mean {r['mean_error']:.3e} (z={_fmt(r['mean_z'])}), "
            f"Var {r['variance']:.4e} vs sigma_eta^2/n {r['benchmark_variance']:.4e}, "
            f"ratio {_fmt(r['variance_ratio'])}" for r in rep["groups"])
    emit(rep, args.json, text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON scenario file; flags override its values")
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--delta-prime", dest="delta_prime", type=float)
    p.add_argument("--topology", choices=["k_out", "complete", "worst_case", "path", "star"])
    p.add_argument("--k", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)


def _output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--out", help="also write the JSON output to this file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gopa", description="Private averaging with pairwise-cancelling noise.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="noise calibration and reference tables")
    _scenario_flags(c)
    _output_flags(c)
    c.add_argument("--table1", action="store_true", help="the n=10^4, eps=0.1 reference grid")
    c.add_argument("--simulate", action="store_true", help="Monte-Carlo admissible sigma_Delta for k-out graphs")
    c.add_argument("--all-topologies", action="store_true")
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("run", help="execute the protocol, optionally with the verification layer")
    _scenario_flags(r)
    _output_flags(r)
    r.add_argument("--verified", action="store_true")
    r.add_argument("--adversary", action="append", help="fault injection, e.g. bad-sum:user7 or bias-eta:user7")
    r.add_argument("--dropout", action="append", help="after-publish:user3 or before-publish:user3")
    r.add_argument("--margin", type=int)
    r.add_argument("--strict", action="store_true", help="fail when dropouts leave uncancelled noise")
    r.add_argument("--repeat", type=int, help="independent runs (unverified, no dropouts)")
    r.add_argument("--sigma-eta", dest="sigma_eta", type=float)
    r.add_argument("--sigma-delta", dest="sigma_delta", type=float)
    r.add_argument("--backend", choices=list(BACKENDS))
    r.add_argument("--B", type=float, help="erf error budget of the verified Gaussian")
    r.add_argument("--M", type=int, help="size of the uniform domain of the verified Gaussian")
    r.add_argument("--psi-bits", dest="psi_bits", type=int)
    r.add_argument("--board", help="board file written by --verified")
    r.add_argument("--transcript", help="JSONL transcript of an unverified run")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="audit a board file and name cheaters")
    v.add_argument("board")
    _output_flags(v)
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("audit", help="board statistics and operation tallies")
    a.add_argument("board")
    a.add_argument("--counts", action="store_true", help="per-user verification operation counts")
    _output_flags(a)
    a.set_defaults(func=cmd_audit)

    p = sub.add_parser("report", help="aggregate JSON outputs of run")
    p.add_argument("inputs", nargs="*")
    _output_flags(p)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, cal.CalibrationError, ConfigurationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
