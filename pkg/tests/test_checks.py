import pytest

from spinboson.checks import SUITES, CheckResult, format_result, run_suite


@pytest.mark.parametrize("name", list(SUITES))
def test_suite_passes(name):
    results = run_suite(name)
    assert results
    failed = [format_result(r) for r in results if not r.passed]
    assert not failed, "\n".join(failed)


def test_unknown_suite():
    with pytest.raises(KeyError, match="available"):
        run_suite("nope")


def test_format_result():
    line = format_result(CheckResult("ccr", "x", True, 1e-13, 1e-12))
    assert line.startswith("PASS ccr: x")
    assert "FAIL" in format_result(CheckResult("ccr", "x", False, 1.0, 1e-12, "note"))
