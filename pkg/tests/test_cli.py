"""End-to-end command-line coverage: every subcommand runs in-process
against a small generated corpus, with exit codes and artifacts checked."""

from __future__ import annotations

import json
import re

import pytest

from amg.cli import main
from amg.corpus import CorpusSpec, generate

MAL, BEN, SEED = 42, 28, 5


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """Workspace with a generated corpus, two detectors, and one agent."""
    root = tmp_path_factory.mktemp("cli-ws")
    corpus = root / "corpus"
    assert main(["corpus", "--out", str(corpus), "--malicious", str(MAL),
                 "--benign", str(BEN), "--seed", str(SEED)]) == 0
    det_a = root / "a.det"
    det_b = root / "b.det"
    assert main(["detector", "train", "--corpus", str(corpus), "--kind",
                 "structural", "--out", str(det_a)]) == 0
    assert main(["detector", "train", "--corpus", str(corpus), "--kind", "b",
                 "--out", str(det_b)]) == 0
    agent = root / "ppo.ckpt"
    assert main(["train", "--corpus", str(corpus), "--detector", str(det_a),
                 "--agent", "ppo", "--episodes", "8", "--max-steps", "2",
                 "--out", str(agent)]) == 0
    return {"root": root, "corpus": corpus, "det_a": det_a, "det_b": det_b,
            "agent": agent}


def test_corpus_layout(ws):
    corpus = ws["corpus"]
    assert (corpus / "meta.json").exists()
    files = sorted((corpus / "files").iterdir())
    assert len(files) == MAL + BEN
    assert sum(1 for f in files if f.name.startswith("mal_")) == MAL


def test_detector_classify_text_and_json(ws, capsys):
    corpus_files = sorted((ws["corpus"] / "files").glob("mal_*"))[:2]
    args = ["detector", "classify", "--model", str(ws["det_a"])]
    assert main(args + [str(f) for f in corpus_files]) == 0
    text = capsys.readouterr().out
    assert all(f.name in text for f in corpus_files)

    assert main(args + ["--json"] + [str(f) for f in corpus_files]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 2
    assert all(row["verdict"] in ("malicious", "benign") for row in rows)


def test_mutate_applied_writes_modified_file(ws, tmp_path, capsys):
    src = next((ws["corpus"] / "files").glob("mal_*"))
    out = tmp_path / "rewritten.exe"
    code = main(["mutate", "--action", "break_checksum", "--in", str(src),
                 "--out", str(out), "--corpus", str(ws["corpus"])])
    assert code == 0
    assert out.exists()
    assert "applied" in capsys.readouterr().out


def test_mutate_accepts_numeric_action_ids(ws, tmp_path):
    src = next((ws["corpus"] / "files").glob("mal_*"))
    out = tmp_path / "rewritten.exe"
    assert main(["mutate", "--action", "3", "--in", str(src), "--out", str(out),
                 "--corpus", str(ws["corpus"])]) == 0
    assert out.exists()


def test_mutate_failure_exits_one_without_output(ws, tmp_path, capsys):
    # regenerate the same corpus in memory to find a file with tight header slack
    tight = next(f.name for f in generate(CorpusSpec(malicious=MAL, benign=BEN, seed=SEED))
                 if f.planted["slack"] < 40)
    src = ws["corpus"] / "files" / tight
    out = tmp_path / "never.exe"
    code = main(["mutate", "--action", "add_new_section", "--in", str(src),
                 "--out", str(out), "--corpus", str(ws["corpus"])])
    assert code == 1
    assert not out.exists()
    assert "failed" in capsys.readouterr().err


def test_mutate_unknown_action_is_usage_error(ws, tmp_path, capsys):
    src = next((ws["corpus"] / "files").glob("mal_*"))
    code = main(["mutate", "--action", "defragment", "--in", str(src),
                 "--out", str(tmp_path / "x"), "--corpus", str(ws["corpus"])])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_validate_table_and_json(ws, capsys):
    base = ["validate", "--corpus", str(ws["corpus"]), "--action",
            "break_checksum", "--limit", "3"]
    assert main(base) == 0
    table = capsys.readouterr().out
    assert re.search(r"break_checksum\s+valid\s+\d+ /\s+\d+", table)

    assert main(base + ["--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["action"] == "break_checksum"
    assert 0 <= rows[0]["valid"] <= rows[0]["total"] == 3


def test_evaluate_prints_rate_line(ws, capsys):
    assert main(["evaluate", "--corpus", str(ws["corpus"]), "--detector",
                 str(ws["det_a"]), "--agent", str(ws["agent"]),
                 "--split", "val", "--max-steps", "2"]) == 0
    out = capsys.readouterr().out
    assert re.search(r"evasion: \d+/\d+ = \d+\.\d{2}% \(excluded \d+, queries \d+\)", out)


def test_transfer_prints_both_rates(ws, capsys):
    assert main(["transfer", "--corpus", str(ws["corpus"]),
                 "--detector-a", str(ws["det_a"]), "--detector-b", str(ws["det_b"]),
                 "--agent", str(ws["agent"]), "--split", "val",
                 "--max-steps", "2"]) == 0
    out = capsys.readouterr().out
    assert "source evasion:" in out
    assert "transfer" in out


def test_report_micro_plan_writes_artifacts(ws, tmp_path, capsys):
    out_dir = tmp_path / "reports"
    assert main(["report", "--corpus", str(ws["corpus"]), "--plan", "micro",
                 "--out", str(out_dir)]) == 0
    stdout = capsys.readouterr().out
    assert (out_dir / "workflow.json").exists()
    assert (out_dir / "workflow.txt").exists()
    report = json.loads((out_dir / "workflow.json").read_text())
    assert "winner" in report and "test" in report
    assert "winner" in stdout


def test_workspace_env_var_sets_default_paths(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("AMG_WORKSPACE", str(tmp_path / "space"))
    assert main(["corpus", "--malicious", "6", "--benign", "4", "--seed", "1"]) == 0
    capsys.readouterr()
    assert (tmp_path / "space" / "corpus" / "meta.json").exists()


def test_missing_file_exits_two(tmp_path, capsys):
    code = main(["detector", "classify", "--model", str(tmp_path / "nope.det"),
                 str(tmp_path / "alsonope.exe")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_garbage_model_exits_two(ws, tmp_path, capsys):
    bogus = tmp_path / "bogus.det"
    bogus.write_bytes(b"not a model at all")
    src = next((ws["corpus"] / "files").glob("mal_*"))
    assert main(["detector", "classify", "--model", str(bogus), str(src)]) == 2
    assert "error:" in capsys.readouterr().err


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
