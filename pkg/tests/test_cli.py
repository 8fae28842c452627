import pytest

import backtest_stream as cli

G4_PAIRS = "u1\ta\t1\nu1\tb\t2\nu2\tb\t3\nu2\tc\t4\n"

SYNTHETIC = [
    "--format", "synthetic",
    "--synthetic-users", "60",
    "--synthetic-items", "40",
    "--synthetic-degree", "4",
    "--synthetic-seed", "1",
    "--checkpoint-interval", "20",
    "--start-threshold", "40",
    "--ks", "5,10",
    "--no-timing",
]


@pytest.fixture
def g4_file(tmp_path):
    path = tmp_path / "g4.tsv"
    path.write_text(G4_PAIRS, encoding="utf-8")
    return str(path)


def _data_lines(path) -> list[str]:
    return path.read_text(encoding="utf-8").splitlines()[1:]


def test_stats_on_pairs_fixture(g4_file, capsys):
    assert cli.main(["stats", "--dataset", g4_file, "--format", "pairs-tsv"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "使用者數 users: 2" in out
    assert "物品數 items: 3" in out
    assert "邊數 edges: 4" in out


def test_stats_missing_file_exits_nonzero(tmp_path, capsys):
    code = cli.main(["stats", "--dataset", str(tmp_path / "absent.tsv")])
    assert code == cli.EXIT_DATASET
    assert "absent.tsv" in capsys.readouterr().err


def test_stats_does_not_touch_input(g4_file):
    cli.main(["stats", "--dataset", g4_file, "--format", "pairs-tsv"])
    with open(g4_file, encoding="utf-8") as f:
        assert f.read() == G4_PAIRS


def test_run_rejects_bad_config(tmp_path, capsys):
    code = cli.main(["run", *SYNTHETIC, "--test-fraction", "1.5", "--output", str(tmp_path / "x.csv")])
    assert code == cli.EXIT_CONFIG
    assert capsys.readouterr().err.startswith("[X]")
    assert not (tmp_path / "x.csv").exists()


def test_run_twice_gives_identical_csv(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (first, second):
        assert cli.main(["run", *SYNTHETIC, "--algorithms", "aas", "--output", str(path)]) == cli.EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    lines = first.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("edges_fed,algorithm,auc,precision@5,precision@10,recall@5,recall@10")
    assert len(lines) == 1 + 6


def test_run_on_toy_graph_with_large_interval(tmp_path, g4_file):
    out = tmp_path / "toy.csv"
    code = cli.main(
        [
            "run", "--dataset", g4_file, "--format", "pairs-tsv",
            "--checkpoint-interval", "1000", "--start-threshold", "1", "--ks", "1",
            "--output", str(out),
        ]
    )
    assert code == cli.EXIT_OK
    assert out.exists()


def test_snapshot_then_resume_matches_full_run(tmp_path, capsys):
    full, resumed, snap = tmp_path / "full.csv", tmp_path / "resumed.csv", tmp_path / "s.dfrs"
    assert cli.main(
        ["run", *SYNTHETIC, "--output", str(full), "--snapshot-at", "90", "--snapshot-path", str(snap)]
    ) == cli.EXIT_OK
    assert snap.exists()
    assert cli.main(["run", *SYNTHETIC, "--output", str(resumed), "--resume", str(snap)]) == cli.EXIT_OK

    tail = [line for line in _data_lines(full) if int(line.split(",")[0]) > 90]
    assert _data_lines(resumed) == tail

    capsys.readouterr()
    assert cli.main(["snapshot", "load", str(snap)]) == cli.EXIT_OK
    assert "edges_fed: 90" in capsys.readouterr().out


def test_resume_with_different_settings_is_refused(tmp_path):
    snap = tmp_path / "s.dfrs"
    assert cli.main(["snapshot", "save", *SYNTHETIC, "--at", "60", "--snapshot-path", str(snap)]) == cli.EXIT_OK
    code = cli.main(["run", *SYNTHETIC, "--seed", "7", "--resume", str(snap), "--output", str(tmp_path / "r.csv")])
    assert code == cli.EXIT_CONFIG


def test_snapshot_load_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.dfrs"
    bad.write_bytes(b"not a snapshot at all, definitely")
    assert cli.main(["snapshot", "load", str(bad)]) == cli.EXIT_SNAPSHOT
    assert cli.main(["snapshot", "load", str(tmp_path / "none.dfrs")]) == cli.EXIT_SNAPSHOT


def test_snapshot_save_requires_at(tmp_path):
    assert cli.main(["snapshot", "save", *SYNTHETIC, "--snapshot-path", str(tmp_path / "s")]) == cli.EXIT_CONFIG


def test_verify_small_and_empty(capsys):
    assert cli.main(["verify", "--events", "20", "--max-users", "12", "--max-items", "15", "--graphs", "3"]) == cli.EXIT_OK
    assert "[OK]" in capsys.readouterr().out
    assert cli.main(["verify", "--events", "0", "--graphs", "0"]) == cli.EXIT_OK
