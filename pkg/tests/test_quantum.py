import numpy as np
import pytest

from entgames import classical, games, linalg, quantum
from entgames.errors import InvalidMeasurement
from entgames.rng import stream

CHSH = games.chsh()


def embed_classical(assign, n_outcomes):
    # deterministic strategy as a 1-dimensional projective strategy
    ops = np.zeros((len(assign), n_outcomes, 1, 1), dtype=complex)
    for q, a in enumerate(assign):
        ops[q, a, 0, 0] = 1.0
    return quantum.QuantumStrategy(ops=ops)


def test_check_povm():
    good = np.array([np.eye(2) * 0.5, np.eye(2) * 0.5], dtype=complex)
    quantum.check_povm(good)
    with pytest.raises(InvalidMeasurement):
        quantum.check_povm(np.array([np.eye(2)], dtype=complex) * 0.9)
    quantum.check_povm(np.array([np.eye(2)], dtype=complex) * 0.9, sub_normalized=True)


def test_value_reduces_to_classical_in_dimension_one():
    rng = stream(401, 0)
    for trial in range(5):
        g = games.random_game(2, 3, 2, 2, stream(401, 1, trial))
        f = rng.integers(0, g.n_a, g.n_u)
        h = rng.integers(0, g.n_b, g.n_v)
        expected = classical.value_of(g, classical.DeterministicStrategy(f, h))
        state = np.array([1.0 + 0j])
        got = quantum.value(g, embed_classical(f, g.n_a), embed_classical(h, g.n_b), state)
        assert got == pytest.approx(expected, abs=1e-12)


def test_tsirelson_strategy_value():
    alice, bob, state = quantum.chsh_tsirelson()
    quantum.check_strategy(alice)
    quantum.check_strategy(bob)
    val = quantum.value(CHSH, alice, bob, state)
    assert val == pytest.approx(np.cos(np.pi / 8) ** 2, abs=1e-12)


def test_best_state_is_optimal_for_tsirelson_measurements():
    alice, bob, state = quantum.chsh_tsirelson()
    top, val = quantum.best_state(CHSH, alice, bob)
    assert val == pytest.approx(np.cos(np.pi / 8) ** 2, abs=1e-10)
    assert quantum.value(CHSH, alice, bob, top) == pytest.approx(val, abs=1e-10)


def test_strategy_operator_is_hermitian():
    rng = stream(402, 0)
    alice = quantum.random_strategy(2, 2, 3, rng)
    bob = quantum.random_strategy(2, 2, 2, rng)
    m = quantum.strategy_operator(CHSH, alice, bob)
    assert np.allclose(m, m.conj().T, atol=1e-12)
    w = np.linalg.eigvalsh(m)
    assert w.min() > -1e-10 and w.max() < 1 + 1e-10


def test_effective_ensembles_recover_value():
    rng = stream(403, 0)
    for trial in range(5):
        g = games.random_projection_game(3, 2, 2, 3, stream(403, 1, trial))
        alice = quantum.random_strategy(g.n_u, g.n_a, 2, rng)
        bob = quantum.random_strategy(g.n_v, g.n_b, 2, rng)
        state = quantum.random_state(4, rng)
        val = quantum.value(g, alice, bob, state)
        mu_l, mu_r = games.marginals(g)
        rhos = quantum.alice_effective_ops(g, bob, state)
        via_alice = sum(
            mu_l[u] * quantum.discrimination_value(rhos[u], alice.ops[u].conj())
            for u in range(g.n_u)
        )
        sigmas = quantum.bob_effective_ops(g, alice, state)
        via_bob = sum(
            mu_r[v] * quantum.discrimination_value(sigmas[v], bob.ops[v])
            for v in range(g.n_v)
        )
        assert via_alice == pytest.approx(val, abs=1e-10)
        assert via_bob == pytest.approx(val, abs=1e-10)


def test_alice_effective_ops_against_kron_oracle():
    rng = stream(404, 0)
    g = games.random_projection_game(2, 2, 2, 2, stream(404, 1))
    bob = quantum.random_strategy(g.n_v, g.n_b, 3, rng)
    state = quantum.random_state(2 * 3, rng)
    cond = games.conditional_rows(g)
    rhos = quantum.alice_effective_ops(g, bob, state)
    proj = np.outer(state, state.conj())
    for u in range(2):
        total = 0.0
        for a in range(2):
            bua = sum(
                cond[u, v] * g.predicate[a, b, u, v] * bob.ops[v, b]
                for v in range(2)
                for b in range(2)
            )
            oracle = linalg.partial_trace(
                linalg.kron(np.eye(2), bua) @ proj, 2, 3, "first"
            )
            assert np.allclose(rhos[u, a], oracle, atol=1e-10)
            total += np.trace(rhos[u, a]).real
        assert total <= 1.0 + 1e-8


def test_pgm_is_povm_and_perfect_on_orthogonal_states():
    e0 = np.diag([1.0, 0.0]).astype(complex) * 0.5
    e1 = np.diag([0.0, 1.0]).astype(complex) * 0.5
    povm = quantum.pgm(np.array([e0, e1]))
    quantum.check_povm(povm.ops)
    assert quantum.discrimination_value(np.array([e0, e1]), povm.ops) == pytest.approx(1.0)


def test_helstrom_matches_trace_norm_formula():
    rng = stream(405, 0)
    for _ in range(10):
        p = rng.uniform(0.2, 0.8)
        r0 = linalg.random_psd(3, rng)
        r0 = p * r0 / np.trace(r0).real
        r1 = linalg.random_psd(3, rng)
        r1 = (1 - p) * r1 / np.trace(r1).real
        povm, val = quantum.helstrom(r0, r1)
        quantum.check_povm(povm.ops)
        tn = np.abs(np.linalg.eigvalsh(r0 - r1)).sum()
        assert val == pytest.approx((1 + tn) / 2, abs=1e-10)


def test_fixed_point_beats_pgm_and_respects_barnum_knill():
    rng = stream(406, 0)
    for trial in range(8):
        n, d = 3, 3
        ens = np.array([linalg.random_psd(d, rng) for _ in range(n)])
        ens /= sum(np.trace(e).real for e in ens)
        pgm_val = quantum.discrimination_value(ens, quantum.pgm(ens).ops)
        povm, val, _ = quantum.discrimination_fixed_point(ens)
        quantum.check_povm(povm.ops)
        assert val >= pgm_val - 1e-10
        assert pgm_val >= val**2 - 1e-10
        assert val <= 1.0 + 1e-10


def test_fixed_point_exact_on_commuting_ensemble():
    # diagonal ensemble: optimum is the classical per-basis-vector argmax
    rng = stream(407, 0)
    for trial in range(5):
        diags = rng.random((4, 5)) * 0.1
        ens = np.array([np.diag(x).astype(complex) for x in diags])
        povm, val, conv = quantum.discrimination_fixed_point(ens)
        assert conv
        assert val == pytest.approx(diags.max(axis=0).sum(), abs=1e-12)
        quantum.check_povm(povm.ops)


def test_bob_to_alice_response_is_complete_povm():
    rng = stream(408, 0)
    g = games.random_projection_game(2, 3, 2, 4, stream(408, 1), bottom_rate=0.3)
    bob = quantum.random_strategy(g.n_v, g.n_b, 3, rng)
    resp = quantum.bob_to_alice_response(g, bob)
    assert resp.n_outcomes == g.n_a + 1
    quantum.check_strategy(resp)


def test_product_strategy_value_multiplies():
    rng = stream(409, 0)
    g = games.chsh()
    h = games.identity_game(2)
    t = games.tensor(g, h)
    a1 = quantum.random_strategy(2, 2, 2, rng)
    b1 = quantum.random_strategy(2, 2, 2, rng)
    a2 = quantum.random_strategy(2, 2, 2, rng)
    b2 = quantum.random_strategy(2, 2, 2, rng)
    s1 = quantum.random_state(4, rng)
    s2 = quantum.random_state(4, rng)
    va = quantum.value(g, a1, b1, s1)
    vb = quantum.value(h, a2, b2, s2)
    vt = quantum.value(
        t,
        quantum.product_strategy(a1, a2),
        quantum.product_strategy(b1, b2),
        quantum.product_state(s1, 2, 2, s2, 2, 2),
    )
    assert vt == pytest.approx(va * vb, abs=1e-10)


def test_seesaw_dimension_one_equals_classical_chsh():
    res = quantum.seesaw(CHSH, d=1, restarts=3, iters=25, seed=5)
    assert res.value == pytest.approx(0.75, abs=1e-9)


def test_seesaw_monotone_and_reaches_tsirelson():
    res = quantum.seesaw(CHSH, d=2, restarts=4, iters=40, seed=11)
    assert res.value >= 0.85
    assert res.value <= np.cos(np.pi / 8) ** 2 + 1e-6
    quantum.check_strategy(res.alice)
    quantum.check_strategy(res.bob)
    assert quantum.value(CHSH, res.alice, res.bob, res.state) == pytest.approx(
        res.value, abs=1e-9
    )


def test_seesaw_deterministic_across_workers():
    r1 = quantum.seesaw(CHSH, d=2, restarts=3, iters=10, seed=3, workers=1)
    r2 = quantum.seesaw(CHSH, d=2, restarts=3, iters=10, seed=3, workers=3)
    assert r1.restart_values == r2.restart_values
    assert r1.value == r2.value
