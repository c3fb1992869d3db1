"""Square-game norms and the multiplicative relaxation they certify.

The square norm of a second-player strategy B is the operator norm of the
marginal-weighted extended inner product of the pushed-through family
(G B)_u^a; it sandwiches the entangled value quadratically. Vector strategies
(weighted families of fractional strategies) carry the relaxation whose
witness ratio is perfectly multiplicative across tensor products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import TOL
from .errors import InvalidMeasurement, ShapeMismatch
from .games import Game, apply_projection, marginals, projection_map
from .linalg import clamp_spectrum, hermitize, operator_norm
from .quantum import (
    QuantumStrategy,
    best_state,
    bob_to_alice_response,
    value,
)


def ext_inner(a_ops: np.ndarray, b_ops: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Extended inner product sum_u w(u) sum_a conj(A_u^a) (x) B_u^a."""
    a_ops = np.asarray(a_ops, dtype=np.complex128)
    b_ops = np.asarray(b_ops, dtype=np.complex128)
    if a_ops.shape[:2] != b_ops.shape[:2]:
        raise ShapeMismatch(f"label axes differ: {a_ops.shape[:2]} vs {b_ops.shape[:2]}")
    d1, d2 = a_ops.shape[2], b_ops.shape[2]
    m = np.einsum(
        "u,uaij,uakl->ikjl", weights, a_ops.conj(), b_ops, optimize=True
    ).reshape(d1 * d2, d1 * d2)
    return m


def square_norm(g: Game, bob: QuantumStrategy, pm: np.ndarray | None = None) -> float:
    """Norm certifying the square-game value of a second-player strategy."""
    mu_l, _ = marginals(g)
    pushed = apply_projection(g, bob.ops[:, : g.n_b], pm)
    gram = hermitize(ext_inner(pushed, pushed, mu_l), tol=1e-8)
    return float(np.sqrt(max(operator_norm(gram), 0.0)))


@dataclass(frozen=True)
class VectorStrategy:
    """Weighted family of fractional strategies.

    weights is a nonnegative measure over the family index (not necessarily
    normalized); ops[w, v, b] are PSD with sum_b ops[w, v, b] <= Id.
    """

    weights: np.ndarray  # (nW,)
    ops: np.ndarray      # (nW, nV, nB, d, d)

    @property
    def dim(self) -> int:
        return self.ops.shape[3]


def check_vector_strategy(vs: VectorStrategy, tol: float | None = None):
    tol = TOL.povm_sum if tol is None else tol
    if vs.ops.ndim != 5 or vs.ops.shape[3] != vs.ops.shape[4]:
        raise ShapeMismatch(f"ops must be (nW, nV, nB, d, d), got {vs.ops.shape}")
    if vs.weights.shape != (vs.ops.shape[0],):
        raise ShapeMismatch("weights length does not match the family index")
    if float(vs.weights.min(initial=0.0)) < -1e-12:
        raise InvalidMeasurement("weights must be nonnegative")
    d = vs.dim
    totals = vs.ops.sum(axis=2) - np.eye(d)
    for w in range(vs.ops.shape[0]):
        for v in range(vs.ops.shape[1]):
            for b in range(vs.ops.shape[2]):
                spec = np.linalg.eigvalsh(hermitize(vs.ops[w, v, b], tol=1e-8))
                clamp_spectrum(spec, hard=tol)
            top = float(np.linalg.eigvalsh(hermitize(totals[w, v], tol=1e-8)).max())
            if top > tol:
                raise InvalidMeasurement(f"family ({w}, {v}) sums beyond Id by {top:.3e}")


def plus_norm(vs: VectorStrategy) -> float:
    """(max over v of || E_w conj(A_wv) (x) A_wv ||)^{1/2} with A_wv = sum_b ops."""
    tot = vs.ops.sum(axis=2)  # (nW, nV, d, d)
    d = vs.dim
    per_v = np.einsum(
        "w,wvij,wvkl->vikjl", vs.weights, tot.conj(), tot, optimize=True
    ).reshape(-1, d * d, d * d)
    worst = max(operator_norm(hermitize(m, tol=1e-8)) for m in per_v)
    return float(np.sqrt(max(worst, 0.0)))


def vector_strategy_value(g: Game, vs: VectorStrategy, pm: np.ndarray | None = None) -> float:
    """Square-game value of the raw (unnormalized) vector strategy.

    || sum_w m(w) sum_u mu_l(u) sum_a conj((G A_w)_u^a) (x) (G A_w)_u^a ||.
    """
    pm = projection_map(g) if pm is None else pm
    mu_l, _ = marginals(g)
    pushed = apply_projection(g, vs.ops.transpose(1, 2, 0, 3, 4), pm)
    # pushed axes: (u, a, w, d, d)
    d = vs.dim
    m = np.einsum(
        "w,u,uawij,uawkl->ikjl", vs.weights, mu_l, pushed.conj(), pushed, optimize=True
    ).reshape(d * d, d * d)
    return float(max(operator_norm(hermitize(m, tol=1e-8)), 0.0))


def valplus_witness(g: Game, vs: VectorStrategy, pm: np.ndarray | None = None) -> float:
    """Witness lower bound on the multiplicative relaxation: the raw value of
    the strategy rescaled to unit plus-norm."""
    pn = plus_norm(vs)
    if pn <= 0.0:
        return 0.0
    return vector_strategy_value(g, vs, pm) / pn**2


def vector_from_product(h: Game, bob: QuantumStrategy, pm_h: np.ndarray | None = None) -> VectorStrategy:
    """Vector strategy for the left factor induced by a product-game strategy.

    bob plays the product of some game G with h (questions v_g * h.n_v + v_h,
    outcomes b_g * h.n_b + b_h). The family index runs over (u_h, a_h) pairs
    weighted by h's first-question marginal, and the right factor's game
    operator is applied on the h axes.
    """
    pm_h = projection_map(h) if pm_h is None else pm_h
    if bob.n_questions % h.n_v or bob.n_outcomes % h.n_b:
        raise ShapeMismatch(
            f"strategy shape {bob.ops.shape[:2]} does not factor through "
            f"({h.n_v}, {h.n_b})"
        )
    n_vg = bob.n_questions // h.n_v
    n_bg = bob.n_outcomes // h.n_b
    d = bob.dim
    split = bob.ops.reshape(n_vg, h.n_v, n_bg, h.n_b, d, d)
    # move h's axes first for the projection push: (v_h, b_h, v_g, b_g, d, d)
    pushed = apply_projection(h, split.transpose(1, 3, 0, 2, 4, 5), pm_h)
    # pushed axes: (u_h, a_h, v_g, b_g, d, d)
    mu_l_h, _ = marginals(h)
    ops = pushed.reshape(h.n_u * h.n_a, n_vg, n_bg, d, d)
    weights = np.repeat(mu_l_h, h.n_a)
    return VectorStrategy(weights=weights, ops=ops)


def induced_row_strategies(h: Game, bob: QuantumStrategy) -> list[QuantumStrategy]:
    """Per-left-question strategies for h obtained by summing out the left
    factor's outcomes of a product-game strategy."""
    if bob.n_questions % h.n_v or bob.n_outcomes % h.n_b:
        raise ShapeMismatch(
            f"strategy shape {bob.ops.shape[:2]} does not factor through "
            f"({h.n_v}, {h.n_b})"
        )
    n_vg = bob.n_questions // h.n_v
    n_bg = bob.n_outcomes // h.n_b
    d = bob.dim
    split = bob.ops.reshape(n_vg, h.n_v, n_bg, h.n_b, d, d)
    rows = split.sum(axis=2)  # (n_vg, n_vh, n_bh, d, d)
    return [
        QuantumStrategy(ops=rows[vg], sub_normalized=bob.sub_normalized)
        for vg in range(n_vg)
    ]


@dataclass
class ChainReport:
    results: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_chain(g: Game, corpus, pm: np.ndarray | None = None, tol: float = 1e-8) -> ChainReport:
    """Check the value / square-norm / best-response sandwich on a corpus.

    corpus yields (alice, bob, state) triples. For each one the chain
    value^2 <= square_norm^2 <= value of the induced best response must hold
    within tol.
    """
    pm = projection_map(g) if pm is None else pm
    report = ChainReport()
    for idx, (alice, bob, state) in enumerate(corpus):
        val = value(g, alice, bob, state)
        sq2 = square_norm(g, bob, pm) ** 2
        resp = bob_to_alice_response(g, bob, pm)
        st, _ = best_state(g, resp, bob)
        resp_val = value(g, resp, bob, st)
        entry = {
            "index": idx,
            "value": val,
            "square_norm_sq": sq2,
            "response_value": resp_val,
            "lower_margin": sq2 - val**2,
            "upper_margin": resp_val - sq2,
        }
        report.results.append(entry)
        if val**2 > sq2 + tol or sq2 > resp_val + tol:
            report.violations.append(entry)
    return report


def product_inequality_check(
    g: Game,
    h: Game,
    bob: QuantumStrategy,
    extra_h_strategies=(),
    tol: float = 1e-7,
) -> dict:
    """Instantiate the multiplicativity bound on one product-game witness.

    Checks square_norm(g (x) h, bob)^2 against the witness ratio of the
    induced vector strategy times the best square norm of h over the induced
    rows and any extra candidate strategies.
    """
    from .games import tensor  # local import to keep module load light

    t = tensor(g, h)
    lhs = square_norm(t, bob) ** 2
    vs = vector_from_product(h, bob)
    witness = valplus_witness(g, vs)
    rows = induced_row_strategies(h, bob)
    row_norms = [square_norm(h, r) for r in rows]
    candidates = row_norms + [square_norm(h, s) for s in extra_h_strategies]
    best_h = max(candidates)
    rhs = witness * best_h**2
    pn = plus_norm(vs)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "witness": witness,
        "plus_norm": pn,
        "best_h_norm": best_h,
        "max_row_norm": max(row_norms),
        "product_ok": lhs <= rhs + tol,
        "row_bound_ok": pn <= max(row_norms) + 1e-8,
    }
