import io
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gopa.graph import complete_graph, generate_k_out, path_graph
from gopa.protocol import (
    GaussianSampler,
    IncompleteExchange,
    ProtocolError,
    ProtocolRun,
    UnresolvedDropout,
    laplacian,
    simulate_runs,
)

PSI = 40
S = 1 << PSI


def make_run(n=30, k=3, seed=0, se=0.5, sd=2.0, **kw):
    g = generate_k_out(n, k, seed)
    vals = np.random.default_rng(seed).random(n)
    return ProtocolRun(g, vals, se, sd, seed=seed, **kw)


# --- pairwise exchange ----------------------------------------------------

def test_pairwise_antisymmetric():
    r = make_run()
    r.exchange()
    total = 0
    for u, led in r.users.items():
        for v, t in led.delta.items():
            assert r.users[v].delta[u] == -t
            total += t
    assert total == 0


def test_zero_pairwise_in_test_mode():
    g = path_graph(5)
    r = ProtocolRun(g, [0.2] * 5, 0.0, 0.0, test_mode=True)
    r.exchange()
    assert all(t == 0 for led in r.users.values() for t in led.delta.values())
    with pytest.raises(ValueError):
        ProtocolRun(g, [0.2] * 5, 0.0, 0.0)


def test_pairwise_stdev():
    y = GaussianSampler().draw(np.random.default_rng(3), 2.5, 100_000) / S
    assert abs(np.std(y) / 2.5 - 1) < 0.02


def test_exact_sampler_matches_fast():
    fast = GaussianSampler("fast", M=256)
    exact = GaussianSampler("exact", M=256, B=2.0 ** -10)
    y = np.arange(0, 256, 17)
    a = fast.from_uniform(y, 1.0).astype(float) / S
    b = np.array([int(v) for v in exact.from_uniform(y, 1.0)], dtype=float) / S
    assert np.max(np.abs(a - b)) < 0.05


# --- release / aggregate --------------------------------------------------

def test_no_noise_returns_values():
    vals = [0.1, 0.5, 0.25, 0.75]
    r = ProtocolRun(complete_graph(4), vals, 0.0, 0.0, test_mode=True)
    out = r.run()
    assert all(out.x_hat[u] == round(vals[u] * S) for u in range(4))
    total = sum(round(v * S) for v in vals)
    # ties round away from zero
    assert out.estimate.value == Fraction((2 * total + 4) // 8, S)


def test_constant_values_average():
    r = ProtocolRun(complete_graph(6), [0.5] * 6, 0.0, 0.0, test_mode=True)
    assert r.run().estimate.value == Fraction(1, 2)


def test_ledger_identity():
    r = make_run()
    r.run()
    for u, led in r.users.items():
        assert led.x_hat == led.x + sum(led.delta.values()) + led.eta
        assert r.published[u] == led.recompute()


def test_release_before_exchange():
    r = make_run()
    with pytest.raises(IncompleteExchange):
        r.release_noisy(0)


def test_release_with_missing_term():
    r = make_run()
    r.exchange()
    v = next(iter(r.users[0].delta))
    del r.users[0].delta[v]
    with pytest.raises(IncompleteExchange):
        r.release_noisy(0)


@settings(max_examples=100)
@given(st.integers(2, 60), st.integers(1, 5), st.integers(0, 2**32 - 1),
       st.floats(0.01, 10), st.floats(0.01, 1000))
def test_cancellation_exact(n, k, seed, se, sd):
    g = generate_k_out(n, min(k, n - 1), seed)
    vals = np.random.default_rng(seed).random(n)
    r = ProtocolRun(g, vals, se, sd, seed=seed)
    r.run()
    assert r.exact_sum_gap() == 0
    assert r.residual() == 0


def test_value_range_checked():
    with pytest.raises(ValueError):
        ProtocolRun(path_graph(2), [0.5, 1.5], 1.0, 1.0)
    with pytest.raises(ValueError):
        ProtocolRun(path_graph(2), [0.5], 1.0, 1.0)


def test_deterministic():
    a, b = make_run(seed=9).run(), make_run(seed=9).run()
    assert a.x_hat == b.x_hat
    assert make_run(seed=10).run().x_hat != a.x_hat


def test_transcript_lines():
    r = make_run(n=8, k=2)
    r.run()
    buf = io.StringIO()
    r.write_transcript(buf)
    events = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert events[0]["event"] == "exchange"
    assert sum(e["event"] == "publish" for e in events) == 8


# --- dropouts -------------------------------------------------------------

def test_dropout_before_publish_keeps_cancellation():
    r = make_run()
    out = r.run({4: "before_publish"})
    assert out.residual == 0
    assert r.exact_sum_gap() == 0
    assert out.n_used == 29


def test_dropout_after_publish_with_margin_matches_before():
    a = make_run().run({4: "after_publish"})
    b = make_run().run({4: "before_publish"})
    assert a.residual == 0
    assert a.estimate == b.estimate


def test_dropout_without_margin_reports_bias():
    r = make_run(margin=0)
    r.exchange()
    r.draw_eta()
    r.publish([u for u in range(r.n) if u != 4])
    expected = sum(r.users[v].delta[4] for v in r.users[4].delta)
    r.handle_dropout(4)
    assert r.residual() == expected
    with pytest.raises(UnresolvedDropout) as ei:
        r.aggregate(strict=True)
    assert ei.value.report.bound == pytest.approx(abs(expected) / (r.n - 1) / S)
    out = r.aggregate()
    assert out.bias_bound == pytest.approx(abs(expected) / (r.n - 1) / S)


def test_margin_decrements():
    r = make_run(margin=2)
    r.run({4: "after_publish"})
    for v in r.users[4].delta:
        assert r.users[v].margin == 1


def test_dropout_of_published_user():
    r = make_run()
    r.run()
    with pytest.raises(ProtocolError):
        r.handle_dropout(0)


def test_accept_residual_policy():
    r = make_run()
    r.exchange()
    r.draw_eta()
    r.publish([u for u in range(r.n) if u != 2])
    r.handle_dropout(2, "accept_residual")
    assert r.residual() == sum(r.users[v].delta[2] for v in r.users[2].delta)


# --- adversary view -------------------------------------------------------

def test_adversary_view_strips_malicious_terms():
    g = generate_k_out(20, 3, 1)
    bad = [0, 5, 7]
    r = ProtocolRun(g, np.linspace(0, 1, 20), 0.3, 4.0, seed=2, malicious=bad)
    r.run()
    view = r.extract_adversary_view()
    for i, u in enumerate(view.honest.tolist()):
        led = r.users[u]
        hh = sum(t for v, t in led.delta.items() if v not in bad)
        assert view.x_hat_H[i] == pytest.approx((led.x + led.eta + hh) / S, abs=1e-12)
    assert set(view.malicious) == set(bad)
    L = view.laplacian()
    assert np.allclose(L.sum(axis=1), 0)


def test_laplacian_rows_sum_zero():
    L = laplacian(path_graph(4))
    assert np.array_equal(np.diag(L), [1, 2, 2, 1])
    assert np.allclose(L.sum(axis=0), 0)


# --- batch engine ---------------------------------------------------------

def test_batch_gaps_zero_and_matches_single():
    g = generate_k_out(40, 3, 0)
    vals = np.random.default_rng(0).random(40)
    res = simulate_runs(g, vals, 0.5, 3.0, 300, seed=1)
    assert np.all(res.exact_gaps == 0)
    assert len(res.errors) == 300


def test_batch_variance_law():
    n, se = 200, 0.7
    g = generate_k_out(n, 3, 0)
    res = simulate_runs(g, np.full(n, 0.5), se, 5.0, 4000, seed=3)
    ratio = np.var(res.errors) / (se ** 2 / n)
    assert 0.9 < ratio < 1.1
    assert abs(res.errors.mean()) < 3 * np.sqrt(se ** 2 / n / 4000)


def test_batch_reproducible():
    g = generate_k_out(30, 2, 0)
    a = simulate_runs(g, np.full(30, 0.3), 1.0, 1.0, 50, seed=4)
    b = simulate_runs(g, np.full(30, 0.3), 1.0, 1.0, 50, seed=4)
    assert np.array_equal(a.errors, b.errors)


def test_batch_wide_values_use_python_ints():
    g = complete_graph(10)
    res = simulate_runs(g, np.full(10, 0.5), 1.0, 1e9, 20, seed=0)
    assert all(int(x) == 0 for x in res.exact_gaps)
