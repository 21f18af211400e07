from listingdedup import bench
from listingdedup.bench import CRITERIA, CriterionResult, format_report, run_acceptance, run_criterion


def test_criteria_are_numbered_one_to_eleven():
    assert [c.number for c in CRITERIA] == list(range(1, 12))


def test_empty_suite_and_unknown_suite():
    assert run_acceptance("empty") == []
    assert format_report([]).split("\t")[0] == "criterion"
    try:
        run_acceptance("nope")
    except ValueError as exc:
        assert "unknown suite" in str(exc)
    else:
        raise AssertionError("unknown suite accepted")


def test_report_line_and_table():
    r = CriterionResult(3, "x", True, "ok", 1.234, 5.0)
    assert r.line() == "criterion  3 x: PASS (ok)"
    table = format_report([r], sep="|").splitlines()
    assert table[1] == "3|x|PASS|1.23|5|ok"


def test_worked_example_criterion_passes():
    r = run_criterion(1)
    assert r.passed, r.detail


def test_crash_becomes_failure(monkeypatch):
    def boom(_):
        raise RuntimeError("kaput")

    c = CRITERIA[0]
    patched = tuple(type(c)(c.number, c.name, boom, c.budget) if x is c else x for x in CRITERIA)
    monkeypatch.setattr(bench, "CRITERIA", patched)
    r = run_criterion(1)
    assert not r.passed and r.detail == "error: RuntimeError: kaput"
