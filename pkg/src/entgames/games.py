"""Two-player one-round games.

A game is a joint question distribution ``mu`` over U x V together with a 0/1
acceptance predicate on (a, b, u, v). A projection game additionally accepts,
for every question pair and second answer b, at most one first answer; that
assignment is the projection map, with BOTTOM marking rejected b's.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .config import TOL
from .errors import (
    DegenerateState,
    NegativeProbability,
    NonNormalizedMu,
    NotProjection,
    SearchSpaceTooLarge,
    ShapeMismatch,
)
from .rng import as_generator

BOTTOM = -1


@dataclass(frozen=True)
class Game:
    mu: np.ndarray         # (nU, nV) joint question distribution
    predicate: np.ndarray  # (nA, nB, nU, nV) boolean acceptance tensor

    @property
    def n_u(self) -> int:
        return self.mu.shape[0]

    @property
    def n_v(self) -> int:
        return self.mu.shape[1]

    @property
    def n_a(self) -> int:
        return self.predicate.shape[0]

    @property
    def n_b(self) -> int:
        return self.predicate.shape[1]


def make_game(mu, predicate) -> Game:
    """Validate raw arrays and return a normalized Game."""
    mu = np.asarray(mu, dtype=np.float64)
    predicate = np.asarray(predicate).astype(bool)
    if mu.ndim != 2:
        raise ShapeMismatch(f"mu must be 2-d, got shape {mu.shape}")
    if predicate.ndim != 4:
        raise ShapeMismatch(f"predicate must be 4-d, got shape {predicate.shape}")
    if predicate.shape[2:] != mu.shape:
        raise ShapeMismatch(
            f"predicate question axes {predicate.shape[2:]} do not match mu {mu.shape}"
        )
    if float(mu.min()) < -1e-12:
        raise NegativeProbability(f"mu has entry {mu.min():.3e}")
    mu = np.maximum(mu, 0.0)
    total = float(mu.sum())
    if abs(total - 1.0) > TOL.mu_sum:
        raise NonNormalizedMu(f"mu sums to {total!r}")
    return Game(mu=mu, predicate=predicate)


def projection_map(g: Game) -> np.ndarray:
    """(nU, nV, nB) array of accepted first answers, BOTTOM where none."""
    counts = g.predicate.sum(axis=0)  # (nB, nU, nV)
    if counts.max(initial=0) > 1:
        b, u, v = np.argwhere(counts > 1)[0]
        raise NotProjection(int(u), int(v), int(b))
    hit = counts.astype(bool)
    first = np.argmax(g.predicate, axis=0)  # (nB, nU, nV)
    pm = np.where(hit, first, BOTTOM)
    return pm.transpose(1, 2, 0).copy()


def is_projection(g: Game) -> bool:
    return bool(g.predicate.sum(axis=0).max(initial=0) <= 1)


def marginals(g: Game) -> tuple[np.ndarray, np.ndarray]:
    """(mu_left, mu_right) over first and second questions."""
    return g.mu.sum(axis=1), g.mu.sum(axis=0)


def conditional_rows(g: Game) -> np.ndarray:
    """(nU, nV) matrix of mu(v | u); rows with zero marginal are zero."""
    mu_l = g.mu.sum(axis=1)
    out = np.zeros_like(g.mu)
    live = mu_l > 0
    out[live] = g.mu[live] / mu_l[live, None]
    if not live.all():
        warnings.warn("some first-player questions have zero probability", stacklevel=2)
    return out


def conditional_cols(g: Game) -> np.ndarray:
    """(nU, nV) matrix of mu(u | v); columns with zero marginal are zero."""
    mu_r = g.mu.sum(axis=0)
    out = np.zeros_like(g.mu)
    live = mu_r > 0
    out[:, live] = g.mu[:, live] / mu_r[live]
    return out


def game_operator(g: Game, pm: np.ndarray | None = None) -> np.ndarray:
    """Matrix of the projection-game operator on second-player label space.

    Row index (u, a), column index (v, b); the entry is mu(v|u) when the
    projection at (u, v) sends b to a, else 0.
    """
    pm = projection_map(g) if pm is None else pm
    cond = conditional_rows(g)
    mask = pm[:, :, :, None] == np.arange(g.n_a)  # (nU, nV, nB, nA)
    op = np.einsum("uv,uvba->uavb", cond, mask.astype(np.float64))
    return op.reshape(g.n_u * g.n_a, g.n_v * g.n_b)


def game_operator_adjoint(g: Game, pm: np.ndarray | None = None) -> np.ndarray:
    """Adjoint of game_operator for the marginal-weighted inner products.

    Satisfies <f, G g>_{mu_left} = <adjoint(G) f, g>_{mu_right}.
    """
    pm = projection_map(g) if pm is None else pm
    cond = conditional_cols(g)
    mask = pm[:, :, :, None] == np.arange(g.n_a)
    op = np.einsum("uv,uvba->vbua", cond, mask.astype(np.float64))
    return op.reshape(g.n_v * g.n_b, g.n_u * g.n_a)


@dataclass(frozen=True)
class SquareSpec:
    """Second-player squared game data, keeping the first-question coupling.

    mu2 is the symmetric distribution of correlated question pairs (v, v');
    cond holds mu(v|u) so consistency checks can be decomposed through u.
    """

    mu2: np.ndarray   # (nV, nV)
    cond: np.ndarray  # (nU, nV)
    mu_l: np.ndarray  # (nU,)


def square_spec(g: Game) -> SquareSpec:
    mu_l = g.mu.sum(axis=1)
    cond = conditional_rows(g)
    mu2 = np.einsum("u,uv,uw->vw", mu_l, cond, cond)
    return SquareSpec(mu2=mu2, cond=cond, mu_l=mu_l)


def apply_projection(g: Game, ops: np.ndarray, pm: np.ndarray | None = None) -> np.ndarray:
    """Push a family ops[v, b] through the game: out[u, a] = sum_v mu(v|u)
    sum over b projecting to a of ops[v, b]. Works on any trailing shape."""
    pm = projection_map(g) if pm is None else pm
    cond = conditional_rows(g)
    mask = (pm[:, :, :, None] == np.arange(g.n_a)).astype(np.float64)
    return np.einsum("uv,uvba,vb...->ua...", cond, mask, ops, optimize=True)


def square_game(g: Game, pm: np.ndarray | None = None) -> Game:
    """The squared game: both players get correlated second questions.

    Answers (b, b') are accepted when some question u consistent with both
    sides projects them to a common first answer.
    """
    pm = projection_map(g) if pm is None else pm
    sq = square_spec(g)
    n_v, n_b = g.n_v, g.n_b
    pred2 = np.zeros((n_b, n_b, n_v, n_v), dtype=bool)
    for u in range(g.n_u):
        if sq.mu_l[u] <= 0:
            continue
        live = np.flatnonzero(sq.cond[u] > 0)
        for v in live:
            pv = pm[u, v]  # (nB,)
            for w in live:
                pw = pm[u, w]
                match = (pv[:, None] == pw[None, :]) & (pv[:, None] != BOTTOM)
                pred2[:, :, v, w] |= match
    return make_game(sq.mu2, pred2)


def laplacian_gap(mu2: np.ndarray) -> float:
    """Second-smallest eigenvalue of the normalized Laplacian of mu2's graph.

    Vertices with zero degree are dropped first. A single live vertex mixes
    perfectly and reports 1.
    """
    mu2 = np.asarray(mu2, dtype=np.float64)
    deg = mu2.sum(axis=1)
    keep = deg > 0
    k = int(keep.sum())
    if k == 0:
        raise DegenerateState("square distribution is identically zero")
    if k == 1:
        return 1.0
    h = mu2[np.ix_(keep, keep)]
    d = deg[keep]
    lap = np.eye(k) - h / np.sqrt(np.outer(d, d))
    w = np.linalg.eigvalsh((lap + lap.T) / 2)
    return float(w[1])


def tensor(g: Game, h: Game, max_entries: int = 50_000_000) -> Game:
    """Product game: independent questions, both sub-games must accept.

    Indices combine row-major with g first: u = u_g * h.n_u + u_h, and the
    same for v, a, b.
    """
    entries = (g.n_a * h.n_a) * (g.n_b * h.n_b) * (g.n_u * h.n_u) * (g.n_v * h.n_v)
    if entries > max_entries:
        raise SearchSpaceTooLarge(f"product predicate would hold {entries} entries")
    mu = np.kron(g.mu, h.mu)
    pred = (
        g.predicate[:, None, :, None, :, None, :, None]
        & h.predicate[None, :, None, :, None, :, None, :]
    ).reshape(g.n_a * h.n_a, g.n_b * h.n_b, g.n_u * h.n_u, g.n_v * h.n_v)
    return make_game(mu, pred)


def to_projection(g: Game) -> Game:
    """Turn any game into a projection game on doubled questions.

    The second player receives the pair (u, v) and answers with a full answer
    pair (a, b); the first player receives u or v (a fair coin decides) and
    must answer the matching half. Pairs the original predicate rejects are
    accepted for no first answer at all.
    """
    n_u, n_v, n_a, n_b = g.n_u, g.n_v, g.n_a, g.n_b
    mu_p = np.zeros((n_u + n_v, n_u * n_v))
    pred_p = np.zeros((n_a + n_b, n_a * n_b, n_u + n_v, n_u * n_v), dtype=bool)
    for u in range(n_u):
        for v in range(n_v):
            q = u * n_v + v
            mu_p[u, q] += g.mu[u, v] / 2
            mu_p[n_u + v, q] += g.mu[u, v] / 2
    acc = np.argwhere(g.predicate)  # rows (a, b, u, v)
    for a, b, u, v in acc:
        q = u * n_v + v
        pred_p[a, a * n_b + b, u, q] = True
        pred_p[n_a + b, a * n_b + b, n_u + v, q] = True
    return make_game(mu_p, pred_p)


def chsh() -> Game:
    """The CHSH game: uniform bits, accept when a xor b equals u and v."""
    mu = np.full((2, 2), 0.25)
    a, b, u, v = np.ix_(*[np.arange(2)] * 4)
    pred = (a ^ b) == (u & v)
    return make_game(mu, pred)


def identity_game(n: int) -> Game:
    """Both players get the same uniform question and must answer alike."""
    mu = np.eye(n) / n
    a, b, u, v = np.ix_(*[np.arange(n)] * 4)
    pred = (a == b) & (u == v)
    return make_game(mu, pred)


def random_projection_game(
    n_u: int,
    n_v: int,
    n_a: int,
    n_b: int,
    seed_or_rng,
    density: float = 1.0,
    bottom_rate: float = 0.0,
) -> Game:
    """Random projection game.

    The question distribution puts random weight on about ``density`` of the
    grid; each (u, v, b) is assigned a uniform first answer, or BOTTOM with
    probability ``bottom_rate``.
    """
    rng = as_generator(seed_or_rng, 11)
    n_pairs = n_u * n_v
    n_live = max(1, int(round(density * n_pairs)))
    live = rng.choice(n_pairs, size=n_live, replace=False)
    mu = np.zeros(n_pairs)
    mu[live] = rng.random(n_live) + 0.05
    mu = (mu / mu.sum()).reshape(n_u, n_v)
    pm = rng.integers(0, n_a, size=(n_u, n_v, n_b))
    if bottom_rate > 0:
        pm = np.where(rng.random(pm.shape) < bottom_rate, BOTTOM, pm)
    pred = pm.transpose(2, 0, 1)[None, :, :, :] == np.arange(n_a)[:, None, None, None]
    return make_game(mu, pred)


def random_game(
    n_u: int, n_v: int, n_a: int, n_b: int, seed_or_rng, accept_rate: float = 0.4
) -> Game:
    """Random general game with a dense predicate at the given acceptance rate."""
    rng = as_generator(seed_or_rng, 12)
    mu = rng.random((n_u, n_v)) + 0.05
    mu /= mu.sum()
    pred = rng.random((n_a, n_b, n_u, n_v)) < accept_rate
    return make_game(mu, pred)


def enumerate_assignments(n_questions: int, n_answers: int):
    """Lexicographic iterator over deterministic answer assignments."""
    return itertools.product(range(n_answers), repeat=n_questions)
