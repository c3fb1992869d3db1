"""Command line surface: game files in, values, sweeps and reports out.

Game files are JSON documents:

    {
      "nU": 2, "nV": 2, "nA": 2, "nB": 2,
      "mu": [[0.25, 0.25], [0.25, 0.25]],
      "predicate": {"projection": [[[0, 0], [0, 0]], [[0, 0], [0, 1]]]}
    }

``mu`` is the joint question distribution, nested or flat row-major.
``predicate`` is either a dense 0/1 array indexed [u][v][a][b] or the
projection form shown above: integers indexed [u][v][b] naming the accepted
first answer, -1 where the pair rejects the second answer outright.

State specs for ``corrsample`` are real coefficient lists over the two
registers (flat of length d*d, or a d x d nested array, row-major), given
inline as JSON or as a path to a JSON file; they are normalized on load.

Exit codes: 0 success, 1 verification violation, 2 parse/usage error,
3 enumeration cap exceeded. CSV output carries a header row and full double
precision so downstream fits lose nothing. ENTGAMES_THREADS sets the worker
count for restart and trial sweeps; results do not depend on it.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classical import classical_value
from .embezzlement import correlated_sample, pq_overlap
from .errors import EntGamesError, SearchSpaceTooLarge
from .games import (
    Game,
    is_projection,
    make_game,
    projection_map,
    square_spec,
    tensor,
)
from .norms import VectorStrategy, square_norm, verify_chain
from .quantum import QuantumStrategy, check_strategy, random_state, random_strategy, seesaw
from .rng import stream
from .rounding import (
    expand_inequality_check,
    expand_round,
    psi_close_diagnostic,
    random_symmetric_state,
)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_PARSE = 2
EXIT_CAP = 3

GAME_KEYS = ("nU", "nV", "nA", "nB", "mu", "predicate")


class CommandFailure(Exception):
    """Fatal CLI error carrying the process exit code."""

    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


@dataclass(frozen=True)
class RunConfig:
    """Numeric knobs for a command run, assembled and validated from flags."""

    seed: int = 0
    dim: int = 2
    restarts: int = 10
    iters: int = 50
    tol: float = 1e-8
    max_copies: int = 10_000
    cap: int = 10**8
    out: str | None = None
    workers: int | None = None


def worker_count() -> int | None:
    raw = os.environ.get("ENTGAMES_THREADS")
    if raw is None or raw.strip() == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise CommandFailure(EXIT_PARSE, f"ENTGAMES_THREADS={raw!r} is not an integer")
    return max(1, n)


def config_from_args(args) -> RunConfig:
    dim = getattr(args, "dim", None)
    if dim is None:
        dim = getattr(args, "quantum", None)
    cfg = RunConfig(
        seed=int(getattr(args, "seed", 0)),
        dim=1 if dim is None else int(dim),
        restarts=int(getattr(args, "restarts", 10)),
        iters=int(getattr(args, "iters", 50)),
        tol=float(getattr(args, "tol", 1e-8)),
        max_copies=int(getattr(args, "max_copies", 10_000)),
        cap=int(getattr(args, "cap", 10**8)),
        out=getattr(args, "out", None),
        workers=worker_count(),
    )
    if cfg.dim < 1:
        raise CommandFailure(EXIT_PARSE, "dimension must be >= 1")
    if cfg.restarts < 1:
        raise CommandFailure(EXIT_PARSE, "restarts must be >= 1")
    if cfg.iters < 1:
        raise CommandFailure(EXIT_PARSE, "iters must be >= 1")
    if not cfg.tol > 0:
        raise CommandFailure(EXIT_PARSE, "tol must be positive")
    if cfg.max_copies < 1:
        raise CommandFailure(EXIT_PARSE, "max-copies must be >= 1")
    if cfg.cap < 1:
        raise CommandFailure(EXIT_PARSE, "cap must be >= 1")
    return cfg


def derive_seed(seed: int, *ids: int) -> int:
    """Stable 32-bit child seed for a labelled substream."""
    entropy = [int(seed)] + [int(i) for i in ids]
    return int(np.random.SeedSequence(entropy=entropy).generate_state(1)[0])


def fmt(x) -> str:
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# game file round trip


def parse_game_doc(doc) -> Game:
    if not isinstance(doc, dict):
        raise CommandFailure(EXIT_PARSE, "game document must be a JSON object")
    missing = [k for k in GAME_KEYS if k not in doc]
    if missing:
        raise CommandFailure(EXIT_PARSE, f"game document missing keys: {missing}")
    try:
        n_u, n_v, n_a, n_b = (int(doc[k]) for k in ("nU", "nV", "nA", "nB"))
    except (TypeError, ValueError) as exc:
        raise CommandFailure(EXIT_PARSE, f"question/answer counts must be integers: {exc}")
    if min(n_u, n_v, n_a, n_b) < 1:
        raise CommandFailure(EXIT_PARSE, "question/answer counts must be positive")
    try:
        mu = np.asarray(doc["mu"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CommandFailure(EXIT_PARSE, f"mu is not a numeric array: {exc}")
    if mu.ndim == 1:
        if mu.size != n_u * n_v:
            raise CommandFailure(
                EXIT_PARSE, f"flat mu has {mu.size} entries, expected {n_u * n_v}"
            )
        mu = mu.reshape(n_u, n_v)
    elif mu.shape != (n_u, n_v):
        raise CommandFailure(EXIT_PARSE, f"mu shape {mu.shape} does not match ({n_u}, {n_v})")

    spec = doc["predicate"]
    if isinstance(spec, dict):
        if "projection" not in spec:
            raise CommandFailure(EXIT_PARSE, "predicate object must carry a 'projection' key")
        pm = np.asarray(spec["projection"])
        if not np.issubdtype(pm.dtype, np.integer):
            raise CommandFailure(EXIT_PARSE, "projection entries must be integers")
        if pm.shape != (n_u, n_v, n_b):
            raise CommandFailure(
                EXIT_PARSE,
                f"projection shape {pm.shape} does not match ({n_u}, {n_v}, {n_b})",
            )
        if pm.min(initial=0) < -1 or pm.max(initial=-1) >= n_a:
            raise CommandFailure(EXIT_PARSE, "projection entries must lie in [-1, nA)")
        pred = pm.transpose(2, 0, 1)[None] == np.arange(n_a)[:, None, None, None]
    else:
        try:
            dense = np.asarray(spec, dtype=np.int64)
        except (TypeError, ValueError) as exc:
            raise CommandFailure(EXIT_PARSE, f"predicate is not a numeric array: {exc}")
        if dense.shape != (n_u, n_v, n_a, n_b):
            raise CommandFailure(
                EXIT_PARSE,
                f"dense predicate shape {dense.shape} does not match "
                f"({n_u}, {n_v}, {n_a}, {n_b})",
            )
        if not np.isin(dense, (0, 1)).all():
            raise CommandFailure(EXIT_PARSE, "dense predicate entries must be 0 or 1")
        pred = dense.transpose(2, 3, 0, 1).astype(bool)
    try:
        return make_game(mu, pred)
    except EntGamesError as exc:
        raise CommandFailure(EXIT_PARSE, f"invalid game: {exc}")


def game_to_doc(g: Game) -> dict:
    """JSON-ready document; projection games serialize in projection form."""
    doc = {"nU": g.n_u, "nV": g.n_v, "nA": g.n_a, "nB": g.n_b, "mu": g.mu.tolist()}
    if is_projection(g):
        doc["predicate"] = {"projection": projection_map(g).tolist()}
    else:
        doc["predicate"] = g.predicate.transpose(2, 3, 0, 1).astype(int).tolist()
    return doc


def load_game(path: str) -> Game:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CommandFailure(EXIT_PARSE, f"cannot read {path}: {exc}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CommandFailure(EXIT_PARSE, f"{path}: invalid JSON: {exc}")
    return parse_game_doc(doc)


def parse_state_spec(text_or_path: str) -> np.ndarray:
    raw = text_or_path.strip()
    if raw.startswith("["):
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CommandFailure(EXIT_PARSE, f"invalid state spec: {exc}")
    else:
        try:
            doc = json.loads(Path(raw).read_text())
        except OSError as exc:
            raise CommandFailure(EXIT_PARSE, f"cannot read state spec {raw}: {exc}")
        except json.JSONDecodeError as exc:
            raise CommandFailure(EXIT_PARSE, f"{raw}: invalid JSON: {exc}")
    try:
        arr = np.asarray(doc, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CommandFailure(EXIT_PARSE, f"state spec is not a real coefficient list: {exc}")
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        arr = arr.reshape(-1)
    elif arr.ndim == 1:
        d = math.isqrt(arr.size)
        if d * d != arr.size:
            raise CommandFailure(
                EXIT_PARSE, f"state spec length {arr.size} is not a perfect square"
            )
    else:
        raise CommandFailure(
            EXIT_PARSE, f"state spec must be flat or square, got shape {arr.shape}"
        )
    norm = float(np.linalg.norm(arr))
    if not np.isfinite(norm) or norm <= 0:
        raise CommandFailure(EXIT_PARSE, "state spec has no usable norm")
    return (arr / norm).astype(np.complex128)


def emit_text(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise CommandFailure(EXIT_PARSE, f"cannot write {out}: {exc}")


def witness_digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        rounded = np.round(np.asarray(a, dtype=np.complex128), 12) + 0.0
        h.update(np.ascontiguousarray(rounded).tobytes())
    return h.hexdigest()[:12]


# ---------------------------------------------------------------------------
# commands


def cmd_value(args) -> int:
    cfg = config_from_args(args)
    g = load_game(args.game)
    if args.classical:
        val, strat = classical_value(g, cap=cfg.cap)
        print(f"{val:.6f} exact")
        print(
            f"witness sha256={witness_digest(strat.first, strat.second)} "
            f"first={strat.first.tolist()} second={strat.second.tolist()}"
        )
    else:
        res = seesaw(
            g,
            cfg.dim,
            restarts=cfg.restarts,
            iters=cfg.iters,
            seed=cfg.seed,
            tol=cfg.tol,
            workers=cfg.workers,
        )
        print(
            f"{res.value:.6f} lower-bound (see-saw d={cfg.dim}, restarts={cfg.restarts}, "
            f"sweeps={res.sweeps})"
        )
        print(f"witness sha256={witness_digest(res.alice.ops, res.bob.ops, res.state)}")
    return EXIT_OK


REPEAT_HEADER = "k,classical_value,classical_status,quantum_lower_bound,sqnorm_sq_lower_bound"


def cmd_repeat(args) -> int:
    cfg = config_from_args(args)
    g = load_game(args.game)
    if args.k < 1:
        raise CommandFailure(EXIT_PARSE, "k must be >= 1")
    if not is_projection(g):
        raise CommandFailure(EXIT_PARSE, "repeat requires a projection game")
    lines = [REPEAT_HEADER]
    gk: Game | None = None
    for k in range(1, args.k + 1):
        try:
            gk = g if gk is None else tensor(gk, g)
        except SearchSpaceTooLarge:
            lines.append(f"{k},,capped,,")
            break
        try:
            cval, _ = classical_value(gk, cap=cfg.cap)
            classical, status = fmt(cval), "exact"
        except SearchSpaceTooLarge:
            classical, status = "", "capped"
        res = seesaw(
            gk,
            cfg.dim,
            restarts=cfg.restarts,
            iters=cfg.iters,
            seed=derive_seed(cfg.seed, 53, k),
            workers=cfg.workers,
        )
        sq2 = square_norm(gk, res.bob) ** 2
        lines.append(f"{k},{classical},{status},{fmt(res.value)},{fmt(sq2)}")
    emit_text("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK


CORR_HEADER = "trial,success,fidelity,copies,pq_overlap"


def cmd_corrsample(args) -> int:
    cfg = config_from_args(args)
    psi = parse_state_spec(args.psi)
    phi = parse_state_spec(args.phi)
    if psi.size != phi.size:
        raise CommandFailure(
            EXIT_PARSE, f"state specs differ in size: {psi.size} vs {phi.size}"
        )
    if not 0 < args.delta < 1:
        raise CommandFailure(EXIT_PARSE, "delta must lie in (0, 1)")
    if args.trials < 1:
        raise CommandFailure(EXIT_PARSE, "trials must be >= 1")

    def run(t: int):
        return correlated_sample(
            psi,
            phi,
            args.delta,
            seed_or_rng=stream(cfg.seed, 61, t),
            max_copies=cfg.max_copies,
        )

    if cfg.workers is not None and cfg.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            transcripts = list(pool.map(run, range(args.trials)))
    else:
        transcripts = [run(t) for t in range(args.trials)]

    lines = [CORR_HEADER]
    success_fids = []
    overlaps = []
    copies = []
    for t, tr in enumerate(transcripts):
        fid = tr.fidelity_to(psi)
        fid = float("nan") if fid is None else fid
        if tr.success:
            success_fids.append(fid)
        overlaps.append(pq_overlap(tr))
        copies.append(tr.copies_used)
        lines.append(f"{t},{int(tr.success)},{fmt(fid)},{tr.copies_used},{fmt(overlaps[-1])}")
    med_fid = float(np.median(success_fids)) if success_fids else float("nan")
    lines.append(
        "median,"
        f"{fmt(np.median([int(tr.success) for tr in transcripts]))},"
        f"{fmt(med_fid)},{fmt(np.median(copies))},{fmt(np.median(overlaps))}"
    )
    emit_text("\n".join(lines) + "\n", cfg.out)
    if args.transcript:
        blob = json.dumps([tr.to_dict() for tr in transcripts], indent=2)
        emit_text(blob + "\n", args.transcript)
    return EXIT_OK


def _parse_operator_array(entry) -> np.ndarray:
    """Nested lists of reals, or of [re, im] pairs on the innermost axis."""
    arr = np.asarray(entry, dtype=np.float64)
    if arr.ndim % 2 == 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(np.complex128)


def _load_sidecar_strategies(path: Path) -> list:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return [{"error": f"unreadable strategies file: {exc}"}]
    if not isinstance(doc, list):
        return [{"error": "strategies file must be a JSON list"}]
    out = []
    for idx, item in enumerate(doc):
        if not isinstance(item, dict) or "ops" not in item:
            out.append({"error": f"entry {idx} missing 'ops'"})
            continue
        try:
            ops = _parse_operator_array(item["ops"])
        except (TypeError, ValueError) as exc:
            out.append({"error": f"entry {idx} is not numeric: {exc}"})
            continue
        out.append({"ops": ops, "index": idx})
    return out


def _sidecar_triples(g: Game, path: Path, seed: int, gi: int, report: dict) -> list:
    """Validated (alice, bob, state) triples from a game's strategies file."""
    sidecar = path.with_name(path.stem + ".strategies.json")
    if not sidecar.exists():
        return []
    triples = []
    for entry in _load_sidecar_strategies(sidecar):
        if "error" in entry:
            report["violations"].append(
                {"file": path.name, "kind": "strategy-file", "detail": entry["error"]}
            )
            continue
        try:
            bob = QuantumStrategy(ops=entry["ops"])
            check_strategy(bob)
            if bob.n_questions != g.n_v or bob.n_outcomes != g.n_b:
                raise EntGamesError(f"strategy shape {bob.ops.shape} does not match the game")
        except (EntGamesError, IndexError, ValueError) as exc:
            report["violations"].append(
                {
                    "file": path.name,
                    "kind": "strategy-file",
                    "entry": entry["index"],
                    "detail": str(exc),
                }
            )
            continue
        rng = stream(seed, 73, gi, entry["index"])
        alice = random_strategy(g.n_u, g.n_a, bob.dim, rng)
        triples.append((alice, bob, random_state(alice.dim * bob.dim, rng)))
    return triples


def cmd_verify(args) -> int:
    cfg = config_from_args(args)
    root = Path(args.corpus)
    if not root.is_dir():
        raise CommandFailure(EXIT_PARSE, f"{args.corpus} is not a directory")
    files = sorted(p for p in root.glob("*.json") if not p.name.endswith(".strategies.json"))
    if not files:
        raise CommandFailure(EXIT_PARSE, f"no game files in {args.corpus}")

    report = {"checked": [], "skipped": [], "violations": []}
    for gi, path in enumerate(files):
        g = load_game(str(path))
        if not is_projection(g):
            print(
                f"warning: {path.name}: not a projection game; "
                "skipping projection-only checks",
                file=sys.stderr,
            )
            report["skipped"].append({"file": path.name, "reason": "not a projection game"})
            continue
        pm = projection_map(g)

        triples = []
        for i in range(3):
            rng = stream(cfg.seed, 71, gi, i)
            alice = random_strategy(g.n_u, g.n_a, cfg.dim, rng)
            bob = random_strategy(g.n_v, g.n_b, cfg.dim, rng)
            triples.append((alice, bob, random_state(cfg.dim * cfg.dim, rng)))
        triples.extend(_sidecar_triples(g, path, cfg.seed, gi, report))

        chain = verify_chain(g, triples, pm, tol=cfg.tol)
        for v in chain.violations:
            report["violations"].append({"file": path.name, "kind": "chain", **v})

        rng = stream(cfg.seed, 79, gi)
        base = random_strategy(g.n_v, g.n_b, cfg.dim, rng)
        ops = base.ops[None] * 0.8
        vs = VectorStrategy(weights=np.ones(1), ops=ops)
        state = random_symmetric_state(cfg.dim, rng)
        rounded = expand_round(g, vs, state, pm)
        totals = ops[0].sum(axis=1)
        ineq = expand_inequality_check(g, totals, state, rounded.eta, tol=cfg.tol)
        if not ineq["ok"]:
            detail = {k: ineq[k] for k in ("independent", "diagonal", "gap", "eta", "rhs")}
            report["violations"].append(
                {"file": path.name, "kind": "expand-bound", **detail}
            )
        closeness = psi_close_diagnostic(totals, state, square_spec(g).mu2)
        if not closeness.ok:
            report["violations"].append(
                {
                    "file": path.name,
                    "kind": "closeness",
                    "eta": closeness.eta,
                    "xu_residual": closeness.xu_residual,
                    "worst_cross_gap": float(
                        np.max(closeness.lhs_cross - closeness.rhs_cross)
                    ),
                    "diag_gap": closeness.lhs_diag - closeness.rhs_diag,
                }
            )
        report["checked"].append(
            {
                "file": path.name,
                "chain_entries": len(chain.results),
                "rounding_eta": rounded.eta,
                "rounding_epsilon": rounded.epsilon,
            }
        )

    print(json.dumps(report, indent=2))
    return EXIT_VIOLATION if report["violations"] else EXIT_OK


# ---------------------------------------------------------------------------
# argument surface


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="entgames",
        description="Projection-game values, repetition sweeps, and sampling protocols.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("value", help="exact classical value or see-saw lower bound")
    v.add_argument("game", help="path to a game JSON file")
    mode = v.add_mutually_exclusive_group(required=True)
    mode.add_argument("--classical", action="store_true", help="exact enumeration")
    mode.add_argument("--quantum", type=int, metavar="D", help="see-saw at local dimension D")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--restarts", type=int, default=10)
    v.add_argument("--iters", type=int, default=50)
    v.add_argument("--tol", type=float, default=1e-9, help="see-saw convergence tolerance")
    v.add_argument("--cap", type=int, default=10**8, help="enumeration size guard")
    v.set_defaults(func=cmd_value)

    r = sub.add_parser("repeat", help="value columns for tensor powers 1..k")
    r.add_argument("game", help="path to a projection game JSON file")
    r.add_argument("k", type=int, help="largest tensor power")
    r.add_argument("--dim", type=int, default=2, help="see-saw local dimension")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--restarts", type=int, default=10)
    r.add_argument("--iters", type=int, default=50)
    r.add_argument("--cap", type=int, default=10**8, help="enumeration size guard")
    r.add_argument("--out", default=None, help="CSV path (default: stdout)")
    r.set_defaults(func=cmd_repeat)

    c = sub.add_parser("corrsample", help="correlated sampling trials to CSV")
    c.add_argument("psi", help="state spec: JSON list inline or a file path")
    c.add_argument("phi", help="state spec: JSON list inline or a file path")
    c.add_argument("--delta", type=float, required=True, help="precision parameter in (0,1)")
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--max-copies", type=int, default=10_000)
    c.add_argument("--out", default=None, help="CSV path (default: stdout)")
    c.add_argument("--transcript", default=None, help="write per-trial JSON transcripts here")
    c.set_defaults(func=cmd_corrsample)

    w = sub.add_parser("verify", help="inequality chain + rounding diagnostics on a corpus")
    w.add_argument("corpus", help="directory of game JSON files")
    w.add_argument("--dim", type=int, default=2, help="dimension of the sampled strategies")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--tol", type=float, default=1e-8)
    w.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SearchSpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except EntGamesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
