"""Exact classical value by exhaustive search over deterministic strategies.

Only the second player's assignment is enumerated; for each one the first
player's best reply decomposes per question into an argmax, so the search is
n_b ** n_v assignments instead of the full product. Ties resolve to the
lexicographically smallest pair of assignments (second player outermost).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SearchSpaceTooLarge, ShapeMismatch
from .games import Game, enumerate_assignments


@dataclass(frozen=True)
class DeterministicStrategy:
    first: np.ndarray   # (nU,) answer per first-player question
    second: np.ndarray  # (nV,)


def value_of(g: Game, s: DeterministicStrategy) -> float:
    """Acceptance probability of a deterministic strategy pair."""
    first = np.asarray(s.first, dtype=np.int64)
    second = np.asarray(s.second, dtype=np.int64)
    if first.shape != (g.n_u,) or second.shape != (g.n_v,):
        raise ShapeMismatch("assignment lengths do not match the question counts")
    uu = np.arange(g.n_u)[:, None]
    vv = np.arange(g.n_v)[None, :]
    acc = g.predicate[first[:, None], second[None, :], uu, vv]
    return float(np.sum(g.mu * acc))


def classical_value(g: Game, cap: int = 10**8) -> tuple[float, DeterministicStrategy]:
    """Optimal value over deterministic strategies, with an optimal pair.

    Raises SearchSpaceTooLarge when n_a**n_u * n_b**n_v exceeds cap.
    """
    space = (g.n_a ** g.n_u) * (g.n_b ** g.n_v)
    if space > cap:
        raise SearchSpaceTooLarge(f"{space} strategy pairs exceeds cap {cap}")
    # scored[v, b, a, u] = mu(u, v) * predicate(a, b, u, v)
    scored = np.einsum("uv,abuv->vbau", g.mu, g.predicate.astype(np.float64))
    rows = np.arange(g.n_v)
    best_val = -1.0
    best_first: np.ndarray | None = None
    best_second: np.ndarray | None = None
    for assign in enumerate_assignments(g.n_v, g.n_b):
        second = np.asarray(assign, dtype=np.int64)
        per_u = scored[rows, second].sum(axis=0)  # (nA, nU)
        val = float(per_u.max(axis=0).sum())
        if val > best_val + 1e-15:
            best_val = val
            best_second = second
            best_first = per_u.argmax(axis=0).astype(np.int64)
    assert best_first is not None and best_second is not None
    return best_val, DeterministicStrategy(first=best_first, second=best_second)
