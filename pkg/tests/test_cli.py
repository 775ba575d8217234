from importlib import resources
from pathlib import Path

import pytest

from charp_hodge.cli import EXIT, main, run
from charp_hodge.errors import SemanticError
from charp_hodge.problem import load_problem, parse_problem

CORPUS = Path(str(resources.files("charp_hodge") / "corpus"))
CODES = {"pass": 0, "fail": 1, "inconclusive": 2, "error": 3}


def corpus_files():
    return sorted(CORPUS.glob("*.prob"))


def header_task(path):
    text = path.read_text()
    return text.split("task = ", 1)[1].split(";")[0].split()[0].rstrip("}")


def expected(path):
    return path.read_text().split("expect = ", 1)[1].split()[0].rstrip(";}")


def records(path):
    out = {}
    for line in path.read_text().splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            out.setdefault(key, value)
    return out


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_corpus_file_exit_code(path, capsys):
    assert main([header_task(path), str(path)]) == CODES[expected(path)]
    out, err = capsys.readouterr()
    if expected(path) == "error":
        assert "line 3" in err and not out
    else:
        assert out.startswith("charp-hodge report (format 1)")


def test_suite_over_corpus(capsys):
    assert main(["suite", "@corpus"]) == 0
    out = capsys.readouterr().out
    n = len(corpus_files())
    assert out.rstrip().endswith(f"summary: {n} passed, 0 failed, 0 inconclusive -> PASS")
    for path in corpus_files():
        assert f"== {path.name}" in out


def test_records_sidecar(tmp_path, capsys):
    out = tmp_path / "r.txt"
    assert main(["glue", str(CORPUS / "bad_sign.prob"), "--out", str(out)]) == 1
    rec = records(out)
    assert rec["format_version"] == "1"
    assert rec["task"] == "glue" and rec["status"] == "fail"
    n = int(rec["checks"])
    statuses = [rec[f"check.{k}.status"] for k in range(n)]
    assert statuses.count("fail") == 2
    assert rec["check.2.witness.defect[1]"] == "[[0, 2], [0, 0]]"
    # text and records agree on the failing checks
    text = capsys.readouterr().out
    assert text.count("FAIL]") == 2


def test_inconclusive_exit_code(capsys):
    path = CORPUS / "fontaine_gauge.prob"
    assert main(["fontaine", str(path), "--deg-bound", "0"]) == EXIT["inconclusive"] == 2
    assert "INCONCLUSIVE" in capsys.readouterr().out


def test_seed_override_is_reported(capsys):
    main(["suite", str(CORPUS / "rank2_p3.prob"), "--seed", "11"])
    assert "seed: 11" in capsys.readouterr().out


def test_missing_file(tmp_path, capsys):
    assert main(["check", str(tmp_path / "nope.prob")]) == 3
    assert "nope.prob" in capsys.readouterr().err


def test_empty_directory(tmp_path):
    assert main(["suite", str(tmp_path)]) == 3


def test_semantic_error_exit(tmp_path, capsys):
    f = tmp_path / "bad.prob"
    f.write_text("header { p = 4 }\n")
    assert main(["check", str(f)]) == 3
    assert "not prime" in capsys.readouterr().err


def test_task_needing_missing_block(tmp_path, capsys):
    prob = parse_problem("header { p = 3 }\nlift { vars = [s]; a = [0] }")
    with pytest.raises(SemanticError, match="cover"):
        run(prob, "glue")
    f = tmp_path / "lift.prob"
    f.write_text("header { p = 3 }\nlift { vars = [s]; a = [0] }\n")
    assert main(["glue", str(f)]) == 3


def test_unknown_task():
    with pytest.raises(ValueError):
        run(load_problem(CORPUS / "rank2_p3.prob"), "frobnicate")


def test_reports_are_repeatable(capsys):
    outs = []
    for _ in range(2):
        main(["suite", str(CORPUS / "nonlinear_higgs.prob")])
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]


def test_directory_mismatch_fails_the_summary(tmp_path, capsys):
    src = (CORPUS / "curved.prob").read_text().replace("expect = fail", "expect = pass")
    (tmp_path / "curved.prob").write_text(src)
    assert main(["suite", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "observed: fail" in out and "expected: pass" in out
