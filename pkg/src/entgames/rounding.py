"""Rounding fractional strategies into genuine square-game strategies.

A fractional family A_v (PSD, sum_b A_v^b <= Id) almost wins the square game
against a symmetric state. The rounding picks a polar unitary per question,
renormalizes each family on its support plus a dummy outcome, and plays the
average diagonal post-measurement state. The measured defect eta (how far the
family is from square consistency) controls the rounded strategy's error
through the question graph's spectral gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TOL
from .errors import DegenerateState, DimensionMismatch, InternalInconsistency
from .games import BOTTOM, Game, apply_projection, laplacian_gap, marginals, projection_map, square_spec
from .linalg import (
    clamp_spectrum,
    hermitize,
    kron,
    polar_unitary,
    psd_pinv_sqrt,
    psd_power,
    psd_sqrt,
    support_projector,
)
from .norms import VectorStrategy
from .quantum import POVM
from .rng import as_generator


@dataclass(frozen=True)
class SymmetricState:
    """Bipartite pure state with identical real Schmidt bases on both sides.

    K is real symmetric PSD with Tr(K^2) = 1; the state's amplitude matrix is
    K itself, so the reduced density on either side is K^2 and K is its
    square root.
    """

    K: np.ndarray

    @property
    def dim(self) -> int:
        return self.K.shape[0]

    def vector(self) -> np.ndarray:
        return self.K.reshape(-1).astype(np.complex128)

    def rho(self) -> np.ndarray:
        return self.K @ self.K


def make_symmetric_state(k: np.ndarray) -> SymmetricState:
    """Validate and normalize a real PSD Schmidt matrix."""
    k = np.asarray(k)
    if np.max(np.abs(k.imag)) > 1e-12 if np.iscomplexobj(k) else False:
        raise DimensionMismatch("Schmidt matrix must be real")
    k = np.real(k).astype(np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise DimensionMismatch(f"Schmidt matrix must be square, got {k.shape}")
    if np.max(np.abs(k - k.T)) > 1e-12:
        raise DimensionMismatch("Schmidt matrix must be symmetric")
    clamp_spectrum(np.linalg.eigvalsh(k))
    mass = float(np.sum(k * k))
    if mass <= 0:
        raise DegenerateState("Schmidt matrix is zero")
    return SymmetricState(K=k / np.sqrt(mass))


def random_symmetric_state(d: int, seed_or_rng, rank: int | None = None) -> SymmetricState:
    rng = as_generator(seed_or_rng, 31)
    rank = d if rank is None else rank
    w = rng.standard_normal((d, rank))
    return make_symmetric_state(w @ w.T)


def bilinear(state: SymmetricState, x: np.ndarray, y: np.ndarray) -> complex:
    """<psi| X (x) Y |psi> for the symmetric state, via its amplitude matrix."""
    k = state.K
    return complex(np.trace(k @ x @ k @ y.T))


def rounding_unitary(a_op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Unitary U with U A^{1/2} rho^{1/4} = (rho^{1/4} A rho^{1/4})^{1/2}."""
    m = psd_sqrt(a_op) @ psd_power(rho, 0.25)
    return polar_unitary(m)


def post_measurement_state(
    state: SymmetricState,
    a_v: np.ndarray,
    a_vp: np.ndarray,
    u_v: np.ndarray,
    u_vp: np.ndarray,
) -> np.ndarray:
    """Unnormalized state after both sides condition on their family firing."""
    left = (u_v @ psd_sqrt(a_v)).conj()
    right = u_vp @ psd_sqrt(a_vp)
    return kron(left, right) @ state.vector()


def renormalized_measurement(ops_v: np.ndarray, u_v: np.ndarray) -> POVM:
    """Complete measurement from a fractional family: renormalize on the
    support, rotate by the rounding unitary, and add a dummy outcome last."""
    ops_v = np.asarray(ops_v, dtype=np.complex128)
    total = hermitize(ops_v.sum(axis=0), tol=1e-8)
    inv_root = psd_pinv_sqrt(total)
    pi = support_projector(total)
    d = total.shape[0]
    out = np.empty((ops_v.shape[0] + 1, d, d), dtype=np.complex128)
    for b in range(ops_v.shape[0]):
        out[b] = u_v @ inv_root @ ops_v[b] @ inv_root @ u_v.conj().T
    out[-1] = np.eye(d) - u_v @ pi @ u_v.conj().T
    return POVM((out + out.conj().transpose(0, 2, 1)) / 2)


@dataclass
class RoundedStrategy:
    """Square-game strategy produced by rounding one family of a vector
    strategy, together with its measured diagnostics."""

    omega: int
    unitaries: np.ndarray     # (nV, d, d)
    measurements: np.ndarray  # (nV, nB + 1, d, d), dummy outcome last
    sigma: np.ndarray         # (d^2, d^2) shared state for the square game
    eta: float                # consistency defect of the chosen family
    epsilon: float            # square-game loss of the rounded strategy
    square_value: float       # 1 - epsilon
    ratios: np.ndarray        # (nW,) per-family consistency ratios


def _family_ratio(g: Game, pm: np.ndarray, vs: VectorStrategy, state: SymmetricState, w: int) -> tuple[float, float]:
    """(numerator, denominator) of the square-consistency ratio of family w."""
    mu_l, mu_r = marginals(g)
    pushed = apply_projection(g, vs.ops[w], pm)  # (nU, nA, d, d)
    num = 0.0
    for u in range(g.n_u):
        if mu_l[u] <= 0:
            continue
        for a in range(g.n_a):
            num += mu_l[u] * bilinear(state, pushed[u, a].conj(), pushed[u, a]).real
    totals = vs.ops[w].sum(axis=1)  # (nV, d, d)
    den = 0.0
    for v in range(g.n_v):
        if mu_r[v] <= 0:
            continue
        den += mu_r[v] * bilinear(state, totals[v].conj(), totals[v]).real
    return num, den


def expand_round(
    g: Game,
    vs: VectorStrategy,
    state: SymmetricState,
    pm: np.ndarray | None = None,
    omega: int | None = None,
) -> RoundedStrategy:
    """Round one family of a vector strategy into a full square-game strategy.

    The family index omega defaults to the one with the best square
    consistency ratio. Raises DegenerateState when every diagonal
    post-measurement state vanishes.
    """
    pm = projection_map(g) if pm is None else pm
    if vs.dim != state.dim:
        raise DimensionMismatch(f"strategy dim {vs.dim} != state dim {state.dim}")
    n_w = vs.ops.shape[0]
    ratios = np.zeros(n_w)
    for w in range(n_w):
        num, den = _family_ratio(g, pm, vs, state, w)
        ratios[w] = num / den if den > 1e-300 else 0.0
    pick = int(np.argmax(ratios)) if omega is None else int(omega)
    eta = float(min(max(1.0 - ratios[pick], 0.0), 1.0))

    _, mu_r = marginals(g)
    ops = vs.ops[pick]  # (nV, nB, d, d)
    totals = ops.sum(axis=1)
    d = vs.dim
    rho = state.rho()
    unitaries = np.array([rounding_unitary(totals[v], rho) for v in range(g.n_v)])
    measurements = np.array(
        [renormalized_measurement(ops[v], unitaries[v]).ops for v in range(g.n_v)]
    )

    diag_states = np.array(
        [
            post_measurement_state(state, totals[v], totals[v], unitaries[v], unitaries[v])
            for v in range(g.n_v)
        ]
    )
    sigma_raw = np.einsum("v,vi,vj->ij", mu_r, diag_states, diag_states.conj())
    mass = float(np.trace(sigma_raw).real)
    if mass < 1e-300:
        raise DegenerateState("all diagonal post-measurement states vanish")
    sigma = hermitize(sigma_raw / mass, tol=1e-8)

    # pair distribution over measured outcomes, dummy excluded from wins
    n_b = g.n_b
    sig4 = sigma.reshape(d, d, d, d)
    table = np.einsum(
        "vbij,wckl,jlik->vbwc",
        measurements.conj(),
        measurements,
        sig4,
        optimize=True,
    ).real
    per_pair = table.sum(axis=(1, 3))
    if np.max(np.abs(per_pair - 1.0)) > 1e-7:
        raise InternalInconsistency(
            "outcome pair distribution does not sum to one; "
            f"worst deviation {np.max(np.abs(per_pair - 1.0)):.3e}"
        )
    cond = square_spec(g).cond
    good = 0.0
    total_pair_mass = 0.0
    mu_l = g.mu.sum(axis=1)
    for u in range(g.n_u):
        if mu_l[u] <= 0:
            continue
        for v in range(g.n_v):
            if cond[u, v] <= 0:
                continue
            for vp in range(g.n_v):
                if cond[u, vp] <= 0:
                    continue
                wgt = mu_l[u] * cond[u, v] * cond[u, vp]
                match = (pm[u, v][:, None] == pm[u, vp][None, :]) & (
                    pm[u, v][:, None] != BOTTOM
                )
                block = table[v, :n_b, vp, :n_b]
                good += wgt * float(block[match].sum())
                total_pair_mass += wgt
    square_value = float(min(max(good / total_pair_mass, 0.0), 1.0)) if total_pair_mass else 0.0
    epsilon = 1.0 - square_value
    return RoundedStrategy(
        omega=pick,
        unitaries=unitaries,
        measurements=measurements,
        sigma=sigma,
        eta=eta,
        epsilon=epsilon,
        square_value=square_value,
        ratios=ratios,
    )


def expand_inequality_check(
    g: Game, totals: np.ndarray, state: SymmetricState, eta: float, tol: float = 1e-8
) -> dict:
    """Check the spectral mixing bound: under the square question graph with
    gap lam, the independent-pair expectation of the totals' bilinear form is
    at least (1 - 2 eta / lam) times the diagonal expectation."""
    sq = square_spec(g)
    lam = laplacian_gap(sq.mu2)
    _, mu_r = marginals(g)
    gram = np.array(
        [
            [bilinear(state, totals[v].conj(), totals[w]).real for w in range(g.n_v)]
            for v in range(g.n_v)
        ]
    )
    diag = float(mu_r @ np.diag(gram))
    indep = float(mu_r @ gram @ mu_r)
    rhs = (1.0 - 2.0 * eta / lam) * diag if lam > 0 else -np.inf
    return {
        "independent": indep,
        "diagonal": diag,
        "gap": lam,
        "eta": eta,
        "rhs": rhs,
        "ok": indep >= rhs - tol,
    }


@dataclass
class PsiCloseReport:
    eta: float
    diag_mass: float          # E_v ||Phi_vv||^2 under the pair marginal
    lhs_cross: np.ndarray     # (nV,) E_{v~v'} ||Phi_{v v''} - Phi_{v' v''}||^2
    rhs_cross: np.ndarray     # (nV,) matching bounds
    lhs_diag: float           # E_{v~v'} ||Phi_{vv} - Phi_{v'v}||^2
    rhs_diag: float
    xu_residual: float        # worst deviation in the trace identities

    @property
    def ok(self) -> bool:
        return (
            np.all(self.lhs_cross <= self.rhs_cross + 1e-8)
            and self.lhs_diag <= self.rhs_diag + 1e-8
            and self.xu_residual < 1e-8
        )


def psi_close_diagnostic(
    totals: np.ndarray, state: SymmetricState, nu: np.ndarray
) -> PsiCloseReport:
    """Measure the closeness lemma's quantities for a family of PSD operators
    totals[v] <= Id against a symmetric pair distribution nu.

    The defect eta is measured from the bilinear Gram; the report carries both
    sides of the two closeness inequalities and the worst residual of the
    fourth-moment trace identities.
    """
    totals = np.asarray(totals, dtype=np.complex128)
    nu = np.asarray(nu, dtype=np.float64)
    n_v, d = totals.shape[0], totals.shape[1]
    if nu.shape != (n_v, n_v):
        raise DimensionMismatch(f"nu shape {nu.shape}, expected {(n_v, n_v)}")
    if np.max(np.abs(nu - nu.T)) > 1e-12:
        raise DimensionMismatch("nu must be symmetric")
    marginal = nu.sum(axis=1)
    rho = state.rho()
    quarter = psd_power(rho, 0.25)

    unitaries = [rounding_unitary(totals[v], rho) for v in range(n_v)]
    x_ops = [unitaries[v] @ psd_sqrt(totals[v]) @ quarter for v in range(n_v)]
    phi = np.array(
        [
            [
                post_measurement_state(state, totals[v], totals[w], unitaries[v], unitaries[w])
                for w in range(n_v)
            ]
            for v in range(n_v)
        ]
    )

    gram = np.array(
        [
            [bilinear(state, totals[v].conj(), totals[w]).real for w in range(n_v)]
            for v in range(n_v)
        ]
    )
    xu_residual = 0.0
    for v in range(n_v):
        for w in range(n_v):
            via_x = float(np.trace(x_ops[v] @ x_ops[v] @ x_ops[w] @ x_ops[w]).real)
            xu_residual = max(xu_residual, abs(via_x - gram[v, w]))
            if v == w:
                xu_residual = max(
                    xu_residual,
                    abs(float(np.vdot(phi[v, v], phi[v, v]).real) - gram[v, v]),
                )

    diag_mass = float(marginal @ np.diag(gram))
    pair_mass = float(np.sum(nu * gram))
    eta = min(max(1.0 - pair_mass / diag_mass, 0.0), 1.0) if diag_mass > 0 else 0.0

    lhs_cross = np.zeros(n_v)
    rhs_cross = np.zeros(n_v)
    scale = np.sqrt(2.0 * eta * diag_mass)
    for vpp in range(n_v):
        lhs = 0.0
        for v in range(n_v):
            for w in range(n_v):
                if nu[v, w] <= 0:
                    continue
                diff = phi[v, vpp] - phi[w, vpp]
                lhs += nu[v, w] * float(np.vdot(diff, diff).real)
        lhs_cross[vpp] = lhs
        rhs_cross[vpp] = scale * np.sqrt(max(gram[vpp, vpp], 0.0))
    lhs_diag = 0.0
    for v in range(n_v):
        for w in range(n_v):
            if nu[v, w] <= 0:
                continue
            diff = phi[v, v] - phi[w, v]
            lhs_diag += nu[v, w] * float(np.vdot(diff, diff).real)
    rhs_diag = np.sqrt(2.0 * eta) * diag_mass
    return PsiCloseReport(
        eta=eta,
        diag_mass=diag_mass,
        lhs_cross=lhs_cross,
        rhs_cross=rhs_cross,
        lhs_diag=lhs_diag,
        rhs_diag=rhs_diag,
        xu_residual=xu_residual,
    )


def planted_instance(
    n_u: int,
    n_v: int,
    n_b: int,
    d: int,
    noise: float,
    seed_or_rng,
    n_a: int | None = None,
) -> tuple[Game, VectorStrategy, SymmetricState]:
    """Game with a planted consistent answer map, plus a noisy witness.

    The predicate is built so one fixed answer per question projects to one
    fixed answer per paired question; the clean projective family for that
    plant wins the square game exactly. Mixing it at rate ``noise`` with a
    random measurement (half the time a strictly sub-normalized one) makes
    the measured consistency defect grow linearly with the rate.
    """
    from .games import make_game
    from .quantum import random_strategy  # local import to avoid cycle at load

    rng = as_generator(seed_or_rng, 37)
    n_a = n_b if n_a is None else n_a
    a_star = rng.integers(0, n_a, size=n_u)
    b_star = rng.integers(0, n_b, size=n_v)
    pred = np.zeros((n_a, n_b, n_u, n_v), dtype=bool)
    for u in range(n_u):
        for v in range(n_v):
            for b in range(n_b):
                a = a_star[u] if b == b_star[v] else int(rng.integers(0, n_a))
                pred[a, b, u, v] = True
    mu = rng.uniform(0.5, 1.5, size=(n_u, n_v))
    g = make_game(mu / mu.sum(), pred)

    ops = np.zeros((1, n_v, n_b, d, d), dtype=np.complex128)
    for v in range(n_v):
        clean = np.zeros((n_b, d, d), dtype=np.complex128)
        clean[b_star[v]] = np.eye(d)
        noisy = random_strategy(1, n_b, d, rng).ops[0]
        if rng.random() < 0.5:
            noisy = noisy * rng.uniform(0.5, 0.9)
        ops[0, v] = (1.0 - noise) * clean + noise * noisy
    state = random_symmetric_state(d, rng)
    return g, VectorStrategy(weights=np.ones(1), ops=ops), state
