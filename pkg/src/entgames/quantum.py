"""Entangled strategies and their optimization.

A strategy is one measurement per question, stored as a single complex array
``ops[question, outcome]`` of d x d effects. Values are computed with the
first player's effects entrywise conjugated, so that for the maximally
entangled state matching measurements reproduce the usual correlations.

The see-saw optimizer alternates exact best-response steps: the shared state
by a top eigenvector, each player's measurements by state discrimination on
the other side's effective ensemble. Every step keeps the incumbent when the
candidate does not strictly improve, so sweeps are monotone by construction.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .config import TOL
from .errors import DimensionMismatch, InternalInconsistency, InvalidMeasurement, ShapeMismatch
from .games import Game, apply_projection, conditional_rows
from .linalg import (
    clamp_spectrum,
    eig_hermitian,
    hermitize,
    psd_pinv_sqrt,
    psd_sqrt,
    random_unitary,
    support_projector,
)
from .rng import as_generator


@dataclass(frozen=True)
class POVM:
    """One measurement: ops[o] is the effect of outcome o."""

    ops: np.ndarray  # (n_outcomes, d, d)

    @property
    def n_outcomes(self) -> int:
        return self.ops.shape[0]

    @property
    def dim(self) -> int:
        return self.ops.shape[1]


@dataclass(frozen=True)
class QuantumStrategy:
    """One measurement per question; sub_normalized allows sum_o E_o <= Id."""

    ops: np.ndarray  # (n_questions, n_outcomes, d, d)
    sub_normalized: bool = False

    @property
    def n_questions(self) -> int:
        return self.ops.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.ops.shape[1]

    @property
    def dim(self) -> int:
        return self.ops.shape[2]

    def povm(self, question: int) -> POVM:
        return POVM(self.ops[question])


def check_povm(ops: np.ndarray, sub_normalized: bool = False, tol: float | None = None):
    """Validate PSD effects summing to Id (or at most Id)."""
    tol = TOL.povm_sum if tol is None else tol
    ops = np.asarray(ops)
    for e in ops:
        w = np.linalg.eigvalsh(hermitize(e, tol=1e-8))
        clamp_spectrum(w, hard=tol)
    total = ops.sum(axis=0)
    d = ops.shape[1]
    gap = total - np.eye(d)
    if sub_normalized:
        top = float(np.linalg.eigvalsh(hermitize(gap, tol=1e-8)).max())
        if top > tol:
            raise InvalidMeasurement(f"effects sum beyond Id by {top:.3e}")
    else:
        dev = float(np.max(np.abs(gap)))
        if dev > tol:
            raise InvalidMeasurement(f"effects sum to Id +/- {dev:.3e}")


def check_strategy(s: QuantumStrategy, tol: float | None = None):
    if s.ops.ndim != 4 or s.ops.shape[2] != s.ops.shape[3]:
        raise ShapeMismatch(f"strategy ops must be (nQ, nO, d, d), got {s.ops.shape}")
    for q in range(s.n_questions):
        check_povm(s.ops[q], sub_normalized=s.sub_normalized, tol=tol)


def strategy_operator(g: Game, alice: QuantumStrategy, bob: QuantumStrategy) -> np.ndarray:
    """Hermitian operator whose expectation is the winning probability.

    M = sum_{u,v} mu(u,v) sum_{accepted (a,b)} conj(A_u^a) (x) B_v^b.
    """
    a_ops = alice.ops[:, : g.n_a]
    b_ops = bob.ops[:, : g.n_b]
    d1, d2 = alice.dim, bob.dim
    m = np.einsum(
        "uv,abuv,uaij,vbkl->ikjl",
        g.mu,
        g.predicate.astype(np.float64),
        a_ops.conj(),
        b_ops,
        optimize=True,
    ).reshape(d1 * d2, d1 * d2)
    return hermitize(m, tol=1e-8)


def value(g: Game, alice: QuantumStrategy, bob: QuantumStrategy, state: np.ndarray) -> float:
    """Winning probability of (alice, bob, state)."""
    state = np.asarray(state, dtype=np.complex128)
    if state.shape != (alice.dim * bob.dim,):
        raise DimensionMismatch(
            f"state has shape {state.shape}, expected ({alice.dim * bob.dim},)"
        )
    m = strategy_operator(g, alice, bob)
    val = float(np.vdot(state, m @ state).real)
    if val < -TOL.value_range or val > 1.0 + TOL.value_range:
        raise InternalInconsistency(f"value {val} outside [0, 1]")
    return min(max(val, 0.0), 1.0)


def best_state(g: Game, alice: QuantumStrategy, bob: QuantumStrategy) -> tuple[np.ndarray, float]:
    """Optimal shared state for fixed measurements: top eigenvector."""
    m = strategy_operator(g, alice, bob)
    w, vecs = eig_hermitian(m, tol=1e-8)
    val = float(min(max(w[-1], 0.0), 1.0))
    return vecs[:, -1], val


def alice_effective_ops(g: Game, bob: QuantumStrategy, state: np.ndarray) -> np.ndarray:
    """Ensemble the first player must discriminate, one PSD block per (u, a).

    rho_u^a = Tr_2((Id (x) B_u^a) |state><state|) with
    B_u^a = sum_v mu(v|u) sum_b predicate(a,b,u,v) B_v^b.
    """
    cond = conditional_rows(g)
    b_ops = bob.ops[:, : g.n_b]
    bua = np.einsum(
        "uv,abuv,vbkl->uakl", cond, g.predicate.astype(np.float64), b_ops, optimize=True
    )
    d1 = state.shape[0] // bob.dim
    rho4 = np.outer(state, state.conj()).reshape(d1, bob.dim, d1, bob.dim)
    rho = np.einsum("uakm,imjk->uaij", bua, rho4, optimize=True)
    return (rho + rho.conj().transpose(0, 1, 3, 2)) / 2


def pgm(ensemble: np.ndarray) -> POVM:
    """Pretty-good measurement of a PSD ensemble (n, d, d).

    The kernel of the ensemble sum is split evenly between the outcomes so
    the measurement is complete.
    """
    ensemble = np.asarray(ensemble, dtype=np.complex128)
    n, d = ensemble.shape[0], ensemble.shape[1]
    total = hermitize(ensemble.sum(axis=0), tol=1e-8)
    root = psd_pinv_sqrt(total)
    pi = support_projector(total)
    filler = (np.eye(d) - pi) / n
    ops = np.array([root @ e @ root + filler for e in ensemble])
    return POVM((ops + ops.conj().transpose(0, 2, 1)) / 2)


def discrimination_value(ensemble: np.ndarray, povm_ops: np.ndarray) -> float:
    """sum_a Tr(E_a rho_a) for a weighted ensemble."""
    return float(np.einsum("aij,aji->", povm_ops, ensemble, optimize=True).real)


def helstrom(k0: np.ndarray, k1: np.ndarray) -> tuple[POVM, float]:
    """Optimal two-outcome discrimination of a weighted pair."""
    diff = hermitize(k0 - k1, tol=1e-8)
    w, vecs = eig_hermitian(diff, tol=1e-8)
    pos = vecs[:, w > 0]
    e0 = pos @ pos.conj().T
    d = k0.shape[0]
    ops = np.array([e0, np.eye(d) - e0])
    val = discrimination_value(np.array([k0, k1]), ops)
    return POVM(ops), val


def _commuting(ensemble: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.max(np.abs(ensemble))))
    n = ensemble.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            comm = ensemble[i] @ ensemble[j] - ensemble[j] @ ensemble[i]
            if np.max(np.abs(comm)) > tol * scale**2:
                return False
    return True


def _commuting_optimum(ensemble: np.ndarray) -> tuple[POVM, float]:
    # mutually commuting blocks diagonalize together; pick the best label
    # per joint eigenvector
    n, d = ensemble.shape[0], ensemble.shape[1]
    coeff = np.sqrt(np.arange(2, n + 2, dtype=np.float64))  # generic combination
    w, vecs = eig_hermitian(np.einsum("a,aij->ij", coeff, ensemble), tol=1e-8)
    scores = np.einsum("ik,akl,li->ai", vecs.conj().T, ensemble, vecs, optimize=True).real
    labels = scores.argmax(axis=0)
    ops = np.zeros((n, d, d), dtype=np.complex128)
    for i in range(d):
        vec = vecs[:, i]
        ops[labels[i]] += np.outer(vec, vec.conj())
    val = float(scores.max(axis=0).sum())
    return POVM(ops), val


def discrimination_fixed_point(
    ensemble: np.ndarray, iters: int = 200, tol: float = 1e-12
) -> tuple[POVM, float, bool]:
    """Discriminate a weighted PSD ensemble (n, d, d); returns (POVM, value, converged).

    Commuting ensembles are solved exactly in the common eigenbasis. Otherwise
    a fixed-point iteration climbs from the pretty-good measurement and the
    best iterate seen is returned; ``converged`` reports whether successive
    values settled within tol.
    """
    ensemble = np.asarray(ensemble, dtype=np.complex128)
    ensemble = (ensemble + ensemble.conj().transpose(0, 2, 1)) / 2
    n, d = ensemble.shape[0], ensemble.shape[1]
    if n == 1:
        return POVM(np.eye(d, dtype=np.complex128)[None]), float(
            np.trace(ensemble[0]).real
        ), True
    if n == 2:
        povm, val = helstrom(ensemble[0], ensemble[1])
        return povm, val, True
    if _commuting(ensemble):
        povm, val = _commuting_optimum(ensemble)
        return povm, val, True
    current = pgm(ensemble)
    best_ops, best_val = current.ops, discrimination_value(ensemble, current.ops)
    prev = best_val
    converged = False
    for _ in range(iters):
        weighted = np.einsum("aij,ajk,akl->ail", ensemble, current.ops, ensemble, optimize=True)
        lam = hermitize(weighted.sum(axis=0), tol=1e-6)
        root = psd_pinv_sqrt(lam)
        pi = support_projector(lam)
        filler = (np.eye(d) - pi) / n
        ops = np.einsum("ij,ajk,kl->ail", root, weighted, root, optimize=True) + filler
        ops = (ops + ops.conj().transpose(0, 2, 1)) / 2
        val = discrimination_value(ensemble, ops)
        current = POVM(ops)
        if val > best_val:
            best_ops, best_val = ops, val
        if abs(val - prev) < tol:
            converged = True
            break
        prev = val
    return POVM(best_ops), best_val, converged


def bob_to_alice_response(g: Game, bob: QuantumStrategy, pm: np.ndarray | None = None) -> QuantumStrategy:
    """First-player strategy induced by pushing a second-player strategy
    through the game's projections, completed by a slack outcome.

    A_u^a = sum_v mu(v|u) sum_{b with projection a at (u,v)} B_v^b; outcome
    n_a holds the remaining Id - sum_a A_u^a.
    """
    aua = apply_projection(g, bob.ops[:, : g.n_b], pm)
    d = bob.dim
    slack = np.eye(d) - aua.sum(axis=1)
    ops = np.concatenate([aua, slack[:, None]], axis=1)
    ops = (ops + ops.conj().transpose(0, 1, 3, 2)) / 2
    return QuantumStrategy(ops=ops)


def random_strategy(
    n_questions: int, n_outcomes: int, d: int, rng: np.random.Generator
) -> QuantumStrategy:
    """Random complete strategy: unitary conjugates of a basis-partition POVM,
    softened through the pretty-good map of a perturbed ensemble."""
    ops = np.zeros((n_questions, n_outcomes, d, d), dtype=np.complex128)
    for q in range(n_questions):
        u = random_unitary(d, rng)
        raw = np.zeros((n_outcomes, d, d), dtype=np.complex128)
        for i in range(d):
            raw[i % n_outcomes] += np.outer(u[:, i], u[:, i].conj())
        # mix a little noise so effects are generic full-rank when possible
        noise = 0.1
        for o in range(n_outcomes):
            w = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            raw[o] = (1 - noise) * raw[o] + noise * (w @ w.conj().T) / d
        total = raw.sum(axis=0)
        root = psd_pinv_sqrt(total)
        for o in range(n_outcomes):
            ops[q, o] = root @ raw[o] @ root
    ops = (ops + ops.conj().transpose(0, 1, 3, 2)) / 2
    return QuantumStrategy(ops=ops)


def random_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def _swap_game(g: Game) -> Game:
    return Game(mu=g.mu.T.copy(), predicate=g.predicate.transpose(1, 0, 3, 2).copy())


def _swap_state(state: np.ndarray, d1: int, d2: int) -> np.ndarray:
    return state.reshape(d1, d2).T.reshape(-1).copy()


def bob_effective_ops(g: Game, alice: QuantumStrategy, state: np.ndarray) -> np.ndarray:
    """Ensemble the second player must discriminate, one PSD block per (v, b)."""
    swapped = _swap_game(g)
    mirror = QuantumStrategy(ops=alice.ops.conj(), sub_normalized=alice.sub_normalized)
    d2 = state.shape[0] // alice.dim
    return alice_effective_ops(swapped, mirror, _swap_state(state, alice.dim, d2))


@dataclass
class SeesawResult:
    value: float
    alice: QuantumStrategy
    bob: QuantumStrategy
    state: np.ndarray
    restart_values: list = field(default_factory=list)
    sweeps: int = 0


def _seesaw_once(g: Game, d: int, iters: int, rng: np.random.Generator, tol: float) -> SeesawResult:
    mu_l = g.mu.sum(axis=1)
    mu_r = g.mu.sum(axis=0)
    alice = random_strategy(g.n_u, g.n_a, d, rng)
    bob = random_strategy(g.n_v, g.n_b, d, rng)
    state, val = best_state(g, alice, bob)
    sweeps = 0
    for sweep in range(iters):
        sweeps = sweep + 1
        # first player: discriminate the effective ensemble per question
        rhos = alice_effective_ops(g, bob, state)
        new_a = alice.ops.copy()
        for u in range(g.n_u):
            if mu_l[u] <= 0:
                continue
            povm, cand, _ = discrimination_fixed_point(rhos[u])
            incumbent = discrimination_value(rhos[u], alice.ops[u, : g.n_a].conj())
            if cand > incumbent:
                new_a[u, : g.n_a] = povm.ops.conj()
                if alice.n_outcomes > g.n_a:
                    new_a[u, g.n_a :] = 0.0
        alice = QuantumStrategy(ops=new_a)
        state, _ = best_state(g, alice, bob)
        # second player symmetrically
        sigmas = bob_effective_ops(g, alice, state)
        new_b = bob.ops.copy()
        for v in range(g.n_v):
            if mu_r[v] <= 0:
                continue
            povm, cand, _ = discrimination_fixed_point(sigmas[v])
            incumbent = discrimination_value(sigmas[v], bob.ops[v, : g.n_b])
            if cand > incumbent:
                new_b[v, : g.n_b] = povm.ops
                if bob.n_outcomes > g.n_b:
                    new_b[v, g.n_b :] = 0.0
        bob = QuantumStrategy(ops=new_b)
        state, _ = best_state(g, alice, bob)
        new_val = value(g, alice, bob, state)
        if new_val < val - TOL.sweep_monotone:
            raise RuntimeError(f"see-saw decreased: {val} -> {new_val}")
        if new_val - val < tol:
            val = max(val, new_val)
            break
        val = new_val
    return SeesawResult(value=val, alice=alice, bob=bob, state=state, sweeps=sweeps)


def seesaw(
    g: Game,
    d: int,
    restarts: int = 10,
    iters: int = 50,
    seed: int = 0,
    tol: float = 1e-9,
    workers: int | None = None,
) -> SeesawResult:
    """Lower-bound the entangled value by alternating exact best responses.

    Restarts draw from independent substreams of the seed, so the result does
    not depend on the worker count. Returns the best restart, with all
    restart values recorded.
    """
    def run(r: int) -> SeesawResult:
        return _seesaw_once(g, d, iters, as_generator(seed, 7, r), tol)

    if workers is not None and workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(r) for r in range(restarts)]
    best = max(enumerate(results), key=lambda kv: (kv[1].value, -kv[0]))[1]
    best.restart_values = [r.value for r in results]
    return best


def product_strategy(s1: QuantumStrategy, s2: QuantumStrategy) -> QuantumStrategy:
    """Tensor two strategies; questions, outcomes and registers combine row-major."""
    ops = np.einsum("qaij,rbkl->qrabikjl", s1.ops, s2.ops, optimize=True).reshape(
        s1.n_questions * s2.n_questions,
        s1.n_outcomes * s2.n_outcomes,
        s1.dim * s2.dim,
        s1.dim * s2.dim,
    )
    return QuantumStrategy(ops=ops, sub_normalized=s1.sub_normalized or s2.sub_normalized)


def product_state(
    psi1: np.ndarray, d1a: int, d1b: int, psi2: np.ndarray, d2a: int, d2b: int
) -> np.ndarray:
    """Combine two bipartite states, regrouping registers to (A1 A2)(B1 B2)."""
    t = np.kron(psi1, psi2).reshape(d1a, d1b, d2a, d2b)
    return t.transpose(0, 2, 1, 3).reshape(-1).copy()


def chsh_tsirelson() -> tuple[QuantumStrategy, QuantumStrategy, np.ndarray]:
    """Optimal qubit strategy for CHSH (value cos^2(pi/8))."""
    z = np.diag([1.0, -1.0]).astype(np.complex128)
    x = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    eye = np.eye(2, dtype=np.complex128)
    a_obs = [z, x]
    b_obs = [(z + x) / np.sqrt(2), (z - x) / np.sqrt(2)]

    def povm_pair(obs):
        return [(eye + obs) / 2, (eye - obs) / 2]

    alice = QuantumStrategy(ops=np.array([povm_pair(o) for o in a_obs]))
    bob = QuantumStrategy(ops=np.array([povm_pair(o) for o in b_obs]))
    state = np.zeros(4, dtype=np.complex128)
    state[0] = state[3] = 1 / np.sqrt(2)
    return alice, bob, state
