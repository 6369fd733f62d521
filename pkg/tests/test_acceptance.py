"""One check per acceptance criterion; each prints a PASS/FAIL line."""
import pytest

from sfwzoo.verification import CHECKS


@pytest.mark.parametrize("check", CHECKS, ids=lambda c: c.__name__.removeprefix("check_"))
def test_criterion(check, capsys):
    result = check()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
