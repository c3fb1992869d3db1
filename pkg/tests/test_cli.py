"""End-to-end tests of the command line surface against the shipped corpus."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from entgames.cli import (
    CommandFailure,
    EXIT_CAP,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_VIOLATION,
    derive_seed,
    game_to_doc,
    main,
    parse_game_doc,
    parse_state_spec,
)
from entgames.games import chsh, random_game, random_projection_game

DATA = Path(__file__).parent / "data"


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGameRoundTrip:
    def test_projection_form_identity(self):
        for g in (
            chsh(),
            random_projection_game(3, 3, 3, 2, 77, bottom_rate=0.3),
            random_projection_game(2, 4, 5, 3, 78),
        ):
            back = parse_game_doc(game_to_doc(g))
            assert np.array_equal(back.mu, g.mu)
            assert np.array_equal(back.predicate, g.predicate)

    def test_dense_form_identity(self):
        g = random_game(2, 3, 2, 2, 79)
        doc = game_to_doc(g)
        assert isinstance(doc["predicate"], list)
        back = parse_game_doc(doc)
        assert np.array_equal(back.mu, g.mu)
        assert np.array_equal(back.predicate, g.predicate)

    def test_flat_mu_accepted(self):
        doc = game_to_doc(chsh())
        doc["mu"] = [0.25, 0.25, 0.25, 0.25]
        back = parse_game_doc(doc)
        assert np.array_equal(back.mu, chsh().mu)

    def test_shipped_corpus_parses(self):
        for path in sorted(DATA.glob("*.json")):
            if path.name.endswith(".strategies.json"):
                continue
            doc = json.loads(path.read_text())
            g = parse_game_doc(doc)
            assert g.n_u >= 1

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.pop("mu"),
            lambda d: d.update(nA=0),
            lambda d: d.update(mu=[[0.5, 0.5]]),
            lambda d: d.update(mu="not an array"),
            lambda d: d.update(predicate={"wrong": []}),
            lambda d: d.update(predicate={"projection": [[[0.5, 0.0]] * 2] * 2}),
            lambda d: d.update(predicate={"projection": [[[9, 0]] * 2] * 2}),
            lambda d: d.update(predicate=[[[[2, 0], [0, 0]]] * 2] * 2),
        ],
    )
    def test_bad_documents_fail_with_parse_code(self, mutate):
        doc = game_to_doc(chsh())
        mutate(doc)
        with pytest.raises(CommandFailure) as info:
            parse_game_doc(doc)
        assert info.value.code == EXIT_PARSE


class TestStateSpec:
    def test_inline_list_normalized(self):
        v = parse_state_spec("[1, 0, 0, 1]")
        assert v.dtype == np.complex128
        assert abs(np.linalg.norm(v) - 1) < 1e-12
        assert abs(v[0] - 1 / math.sqrt(2)) < 1e-12

    def test_nested_matrix_flattens_row_major(self):
        v = parse_state_spec("[[0, 1], [0, 0]]")
        assert abs(v[1] - 1) < 1e-12

    def test_file_path(self, tmp_path):
        p = tmp_path / "state.json"
        p.write_text("[0.6, 0, 0, 0.8]")
        v = parse_state_spec(str(p))
        assert abs(v[3] - 0.8) < 1e-12

    @pytest.mark.parametrize("bad", ["[1, 0, 0]", "[[1, 0, 0], [0, 1, 0]]", "[0, 0, 0, 0]", "[1, oops]"])
    def test_bad_specs(self, bad):
        with pytest.raises(CommandFailure) as info:
            parse_state_spec(bad)
        assert info.value.code == EXIT_PARSE

    def test_missing_file(self):
        with pytest.raises(CommandFailure) as info:
            parse_state_spec("no/such/file.json")
        assert info.value.code == EXIT_PARSE


class TestValueCommand:
    def test_classical_chsh(self, capsys):
        code, out, _ = run(capsys, ["value", str(DATA / "chsh.json"), "--classical"])
        assert code == EXIT_OK
        assert out.splitlines()[0] == "0.750000 exact"
        assert "witness sha256=" in out

    def test_quantum_chsh(self, capsys):
        code, out, _ = run(
            capsys,
            ["value", str(DATA / "chsh.json"), "--quantum", "2", "--restarts", "3", "--iters", "30"],
        )
        assert code == EXIT_OK
        first = out.splitlines()[0]
        assert float(first.split()[0]) >= 0.8525
        assert "lower-bound" in first

    def test_quantum_deterministic(self, capsys):
        argv = ["value", str(DATA / "chsh.json"), "--quantum", "2", "--restarts", "2", "--iters", "20", "--seed", "4"]
        code_a, out_a, _ = run(capsys, argv)
        code_b, out_b, _ = run(capsys, argv)
        assert code_a == code_b == EXIT_OK
        assert out_a == out_b

    def test_thread_count_does_not_change_output(self, capsys, monkeypatch):
        argv = ["value", str(DATA / "chsh.json"), "--quantum", "2", "--restarts", "3", "--iters", "20"]
        monkeypatch.delenv("ENTGAMES_THREADS", raising=False)
        _, out_one, _ = run(capsys, argv)
        monkeypatch.setenv("ENTGAMES_THREADS", "3")
        _, out_three, _ = run(capsys, argv)
        assert out_one == out_three

    def test_invalid_thread_env(self, capsys, monkeypatch):
        monkeypatch.setenv("ENTGAMES_THREADS", "lots")
        code, _, err = run(capsys, ["value", str(DATA / "chsh.json"), "--quantum", "1"])
        assert code == EXIT_PARSE
        assert "ENTGAMES_THREADS" in err

    def test_malformed_json_exits_2(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{ not json")
        code, _, err = run(capsys, ["value", str(bad), "--classical"])
        assert code == EXIT_PARSE
        assert "invalid JSON" in err

    def test_cap_exceeded_exits_3(self, capsys):
        code, _, err = run(capsys, ["value", str(DATA / "chsh.json"), "--classical", "--cap", "1"])
        assert code == EXIT_CAP
        assert "cap" in err


class TestRepeatCommand:
    def test_chsh_two_powers(self, capsys):
        code, out, _ = run(
            capsys,
            ["repeat", str(DATA / "chsh.json"), "2", "--restarts", "2", "--iters", "25"],
        )
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        assert lines[0] == "k,classical_value,classical_status,quantum_lower_bound,sqnorm_sq_lower_bound"
        row1 = lines[1].split(",")
        row2 = lines[2].split(",")
        assert row1[0] == "1" and row1[2] == "exact"
        assert float(row1[1]) == 0.75
        assert float(row2[1]) == 0.625
        # lower-bound columns stay within the sandwich for their own witness
        for row in (row1, row2):
            q = float(row[3])
            sq2 = float(row[4])
            assert q * q <= sq2 + 1e-7
            assert 0.0 <= q <= 1.0 + 1e-12

    def test_k1_matches_value_command(self, capsys):
        code, out, _ = run(
            capsys,
            ["repeat", str(DATA / "chsh.json"), "1", "--restarts", "3", "--iters", "30"],
        )
        assert code == EXIT_OK
        row = out.strip().splitlines()[1].split(",")
        assert float(row[1]) == 0.75
        assert float(row[3]) >= 0.8525

    def test_cap_flags_partial_row(self, capsys):
        code, out, _ = run(
            capsys,
            ["repeat", str(DATA / "chsh.json"), "2", "--cap", "100", "--restarts", "1", "--iters", "10"],
        )
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        row1 = lines[1].split(",")
        row2 = lines[2].split(",")
        assert row1[2] == "exact"
        assert row2[1] == "" and row2[2] == "capped"
        assert row2[3] != ""  # quantum columns survive the classical cap

    def test_out_file_and_determinism(self, capsys, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        argv = ["repeat", str(DATA / "chsh.json"), "1", "--restarts", "2", "--iters", "20", "--seed", "9"]
        assert main(argv + ["--out", str(a)]) == EXIT_OK
        assert main(argv + ["--out", str(b)]) == EXIT_OK
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_requires_projection_game(self, capsys):
        code, _, err = run(capsys, ["repeat", str(DATA / "dense_overlap.json"), "1"])
        assert code == EXIT_PARSE
        assert "projection" in err

    def test_derive_seed_stable(self):
        assert derive_seed(3, 53, 1) == derive_seed(3, 53, 1)
        assert derive_seed(3, 53, 1) != derive_seed(3, 53, 2)


class TestCorrsampleCommand:
    def test_identical_states_csv(self, capsys):
        code, out, _ = run(
            capsys,
            ["corrsample", "[1,0,0,1]", "[1,0,0,1]", "--delta", "0.1", "--trials", "30", "--seed", "5"],
        )
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        assert lines[0] == "trial,success,fidelity,copies,pq_overlap"
        assert lines[-1].startswith("median,")
        body = [ln.split(",") for ln in lines[1:-1]]
        assert len(body) == 30
        fids = [float(r[2]) for r in body if r[1] == "1"]
        assert fids, "no successful trials"
        assert np.median(fids) >= 0.9

    @pytest.mark.filterwarnings("ignore:state gap")
    def test_orthogonal_states_zero_overlap(self, capsys):
        code, out, _ = run(
            capsys,
            ["corrsample", "[1,0,0,0]", "[0,0,0,1]", "--delta", "0.3", "--trials", "10"],
        )
        assert code == EXIT_OK
        body = [ln.split(",") for ln in out.strip().splitlines()[1:-1]]
        assert all(r[1] == "0" for r in body)
        assert all(float(r[4]) == 0.0 for r in body)

    def test_fixed_seed_byte_identical(self, capsys, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        argv = ["corrsample", "[3,1,1,3]", "[1,0,0,1]", "--delta", "0.2", "--trials", "25", "--seed", "11"]
        assert main(argv + ["--out", str(a)]) == EXIT_OK
        assert main(argv + ["--out", str(b)]) == EXIT_OK
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_worker_count_does_not_change_csv(self, capsys, tmp_path, monkeypatch):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        argv = ["corrsample", "[1,0,0,1]", "[1,0,0,1]", "--delta", "0.1", "--trials", "12", "--seed", "2"]
        monkeypatch.delenv("ENTGAMES_THREADS", raising=False)
        assert main(argv + ["--out", str(a)]) == EXIT_OK
        monkeypatch.setenv("ENTGAMES_THREADS", "4")
        assert main(argv + ["--out", str(b)]) == EXIT_OK
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_transcript_json(self, capsys, tmp_path):
        t = tmp_path / "transcripts.json"
        code, _, _ = run(
            capsys,
            [
                "corrsample", "[1,0,0,1]", "[1,0,0,1]",
                "--delta", "0.1", "--trials", "6", "--seed", "3",
                "--out", str(tmp_path / "out.csv"), "--transcript", str(t),
            ],
        )
        assert code == EXIT_OK
        doc = json.loads(t.read_text())
        assert len(doc) == 6
        for entry in doc:
            assert set(entry) >= {"success", "taus", "s_counts", "p_sync", "pq_overlap"}
            if entry["success"]:
                assert entry["joint_state"] is not None

    def test_bad_delta_and_specs(self, capsys):
        code, _, _ = run(capsys, ["corrsample", "[1,0,0,1]", "[1,0,0,1]", "--delta", "1.5"])
        assert code == EXIT_PARSE
        code, _, _ = run(capsys, ["corrsample", "[1,0,0]", "[1,0,0,1]", "--delta", "0.1"])
        assert code == EXIT_PARSE
        code, _, _ = run(capsys, ["corrsample", "[1,0,0,1]", "[1,0,0,1,0,0,0,0,1]", "--delta", "0.1"])
        assert code == EXIT_PARSE


class TestVerifyCommand:
    def test_shipped_corpus_passes(self, capsys):
        code, out, err = run(capsys, ["verify", str(DATA), "--seed", "1"])
        assert code == EXIT_OK
        report = json.loads(out)
        assert report["violations"] == []
        names = {entry["file"] for entry in report["checked"]}
        assert {"chsh.json", "triangle.json", "rect.json"} <= names
        assert report["skipped"] == [
            {"file": "dense_overlap.json", "reason": "not a projection game"}
        ]
        assert "dense_overlap.json" in err

    def test_sidecar_strategies_are_used(self, capsys):
        code, out, _ = run(capsys, ["verify", str(DATA)])
        assert code == EXIT_OK
        report = json.loads(out)
        chsh_entry = next(e for e in report["checked"] if e["file"] == "chsh.json")
        assert chsh_entry["chain_entries"] == 5  # 3 sampled + 2 sidecar strategies

    def test_corrupted_strategy_exits_1(self, capsys, tmp_path):
        (tmp_path / "game.json").write_text((DATA / "chsh.json").read_text())
        broken = [{"ops": [[[[0.9, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.3]]]] * 2}]
        (tmp_path / "game.strategies.json").write_text(json.dumps(broken))
        code, out, _ = run(capsys, ["verify", str(tmp_path)])
        assert code == EXIT_VIOLATION
        report = json.loads(out)
        assert any(v["kind"] == "strategy-file" for v in report["violations"])

    def test_unreadable_strategy_file_exits_1(self, capsys, tmp_path):
        (tmp_path / "game.json").write_text((DATA / "chsh.json").read_text())
        (tmp_path / "game.strategies.json").write_text("{ nope")
        code, out, _ = run(capsys, ["verify", str(tmp_path)])
        assert code == EXIT_VIOLATION

    def test_empty_and_missing_directories(self, capsys, tmp_path):
        code, _, _ = run(capsys, ["verify", str(tmp_path)])
        assert code == EXIT_PARSE
        code, _, _ = run(capsys, ["verify", str(tmp_path / "nope")])
        assert code == EXIT_PARSE

    def test_bad_game_file_exits_2(self, capsys, tmp_path):
        (tmp_path / "game.json").write_text('{"nU": 1}')
        code, _, _ = run(capsys, ["verify", str(tmp_path)])
        assert code == EXIT_PARSE
