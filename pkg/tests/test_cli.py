import json
import shutil
import subprocess
import sys

import pytest

from conftest import CORPUS
from termlog.cli import EXIT_INPUT, EXIT_NO, EXIT_OK, InputError, main, read_manifest


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# ------------------------------------------------------------ analyze


def test_analyze_permute(capsys):
    code, out, _ = run(capsys, "analyze", str(CORPUS / "permute.pl"))
    assert code == EXIT_OK
    assert out.startswith("verdict: Terminating")


def test_analyze_discon(capsys):
    code, out, _ = run(capsys, "analyze", str(CORPUS / "discon.pl"), "--mode", "rigid")
    assert code == EXIT_NO
    assert "verdict: Unknown" in out and "reason:" in out


def test_analyze_without_directives(tmp_path, capsys):
    f = tmp_path / "plain.pl"
    f.write_text("p(a).\n")
    code, _, err = run(capsys, "analyze", str(f))
    assert code == EXIT_INPUT and "query" in err
    code, _, err = run(capsys, "analyze", str(f), "--mode", "wellmoded")
    assert code == EXIT_INPUT and "mode" in err


def test_analyze_not_well_moded(tmp_path, capsys):
    f = tmp_path / "nwm.pl"
    f.write_text("%% mode: p(in).\n%% mode: q(in).\np(a) :- q(X).\nq(f(X)) :- q(X).\n")
    code, _, err = run(capsys, "analyze", str(f), "--mode", "wellmoded")
    assert code == EXIT_INPUT and "well-moded" in err


def test_analyze_parse_error_and_missing_file(tmp_path, capsys):
    f = tmp_path / "bad.pl"
    f.write_text("p(X :- q.\n")
    code, _, err = run(capsys, "analyze", str(f))
    assert code == EXIT_INPUT and "line 1" in err
    code, _, err = run(capsys, "analyze", str(tmp_path / "absent.pl"))
    assert code == EXIT_INPUT and "cannot read" in err


def test_analyze_verbose_uses_wildcards(capsys):
    code, out, _ = run(capsys, "analyze", str(CORPUS / "permute.pl"), "-v")
    assert code == EXIT_OK
    assert "delete(t,[H|T],t) > delete(t,T,t)" in out
    assert "delete(El,L,L1) sat R_delete implies permute(L,t) > permute(L1,t)" in out
    assert "relation: R[delete/3] = { t2 > t3 }" in out
    assert "timings:" in out


def test_emit_then_verify(tmp_path, capsys):
    cert = tmp_path / "permute.json"
    code, out, _ = run(capsys, "analyze", str(CORPUS / "permute.pl"), "--emit", str(cert))
    assert code == EXIT_OK and cert.exists()
    json.loads(cert.read_text())
    code, out, _ = run(capsys, "verify", str(CORPUS / "permute.pl"), str(cert))
    assert code == EXIT_OK and "certificate valid" in out


def test_verify_rejects_mutated_certificate(tmp_path, capsys):
    cert = tmp_path / "permute.json"
    run(capsys, "analyze", str(CORPUS / "permute.pl"), "--emit", str(cert))
    d = json.loads(cert.read_text())
    d["order"]["subterm"].pop("./2", None)
    cert.write_text(json.dumps(d))
    code, out, _ = run(capsys, "verify", str(CORPUS / "permute.pl"), str(cert))
    assert code == EXIT_NO and "constraint 1" in out


def test_verify_unreadable_certificate(tmp_path, capsys):
    cert = tmp_path / "junk.json"
    cert.write_text("{not json")
    code, _, _ = run(capsys, "verify", str(CORPUS / "permute.pl"), str(cert))
    assert code == EXIT_INPUT


def test_no_certificate_written_for_unknown(tmp_path, capsys):
    cert = tmp_path / "discon.json"
    code, _, _ = run(capsys, "analyze", str(CORPUS / "discon.pl"), "--emit", str(cert))
    assert code == EXIT_NO and not cert.exists()


# ------------------------------------------------------------ run


def test_run_permute(capsys):
    code, out, _ = run(capsys, "run", str(CORPUS / "permute.pl"), "permute([a,b],X)", "--depth", "50")
    assert code == EXIT_OK
    assert "FiniteTree answers=2" in out


def test_run_loop(tmp_path, capsys):
    f = tmp_path / "loop.pl"
    f.write_text("p :- p.\n")
    code, out, _ = run(capsys, "run", str(f), "p", "--depth", "10")
    assert code == EXIT_NO
    assert "LoopEvidence" in out or "DepthLimitHit" in out


def test_run_bad_query(capsys):
    code, _, err = run(capsys, "run", str(CORPUS / "permute.pl"), "bad((")
    assert code == EXIT_INPUT and err.startswith("error: query:")


def test_run_trace(capsys):
    code, out, _ = run(capsys, "run", str(CORPUS / "permute.pl"), "delete(X,[a],T)", "--trace")
    assert code == EXIT_OK
    assert out.splitlines()[0] == "0\tdelete(X,[a],T)\t-1\t{}"


def test_run_rejects_nonpositive_depth(capsys):
    code, _, _ = run(capsys, "run", str(CORPUS / "permute.pl"), "permute([],X)", "--depth", "0")
    assert code == EXIT_INPUT


# ------------------------------------------------------------ corpus


def test_empty_corpus(tmp_path, capsys):
    code, out, _ = run(capsys, "corpus", str(tmp_path))
    assert code == EXIT_OK
    assert out.splitlines()[-1] == "0 programs, 0 mismatches"


def test_broken_fixture_is_a_mismatch(tmp_path, capsys):
    shutil.copy(CORPUS / "discon.pl", tmp_path / "discon.pl")
    shutil.copy(CORPUS / "permute.pl", tmp_path / "permute.pl")
    (tmp_path / "manifest.txt").write_text("discon.pl rigid terminating\npermute.pl rigid terminating\n")
    code, out, _ = run(capsys, "corpus", str(tmp_path), "--jobs", "1")
    assert code == EXIT_NO
    rows = {line.split()[0]: line for line in out.splitlines()[1:-1]}
    assert rows["discon.pl"].endswith("NO") and rows["permute.pl"].endswith("yes")
    assert out.splitlines()[-1] == "2 programs, 1 mismatches"


def test_missing_manifest_entry(tmp_path, capsys):
    shutil.copy(CORPUS / "permute.pl", tmp_path / "permute.pl")
    code, _, err = run(capsys, "corpus", str(tmp_path))
    assert code == EXIT_INPUT and "permute.pl" in err


def test_manifest_parsing(tmp_path):
    f = tmp_path / "manifest.txt"
    f.write_text("# comment\n\na.pl rigid unknown   # trailing\n")
    assert read_manifest(f) == {"a.pl": ("rigid", "unknown")}
    f.write_text("a.pl fast unknown\n")
    with pytest.raises(InputError):
        read_manifest(f)


def test_shipped_corpus_matches_manifest():
    """The whole corpus in a fresh interpreter, through the console entry point."""
    r = subprocess.run(
        [sys.executable, "-m", "termlog", "corpus", str(CORPUS)],
        capture_output=True, text=True, timeout=600,
    )
    assert r.returncode == EXIT_OK, r.stdout + r.stderr
    assert r.stdout.splitlines()[-1] == "15 programs, 0 mismatches"
    assert "DISAGREE" not in r.stdout


def test_exit_codes_are_stable(capsys):
    for name, want in [("permute.pl", EXIT_OK), ("discon.pl", EXIT_NO)]:
        assert {run(capsys, "analyze", str(CORPUS / name))[0] for _ in range(3)} == {want}
